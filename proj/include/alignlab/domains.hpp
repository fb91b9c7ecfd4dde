#pragma once

#include "alignlab/common.hpp"
#include "alignlab/nn.hpp"

#include <string>
#include <vector>

namespace alignlab {

enum class TargetMapKind { kRotation, kAffine, kSmoothWarp };

// Invertible C^1 map with closed-form forward, inverse and Jacobian.
//   rotation:    z = R x            (plane rotation in coordinates 0,1)
//   affine:      z = A x + b        (A nonsingular)
//   smooth_warp: z = R t(x),  t(x)_i = tanh(alpha x_i) / alpha
struct TargetMap {
  TargetMapKind kind = TargetMapKind::kRotation;
  int dim = 2;
  double angle = 0.0;   // rotation / smooth_warp
  double alpha = 0.3;   // smooth_warp blend strength
  Mat a;                // affine matrix, or the rotation matrix
  Vec b;                // affine offset

  static TargetMap rotation(int dim, double angle);
  static TargetMap affine(const Mat& a, const Vec& b);
  static TargetMap smooth_warp(int dim, double angle, double alpha);

  Vec apply(const Vec& x) const;
  Mat apply(const Mat& xs) const;  // row-wise
  Vec apply_inverse(const Vec& z) const;
  Mat apply_inverse(const Mat& zs) const;
  Mat jacobian(const Vec& x) const;
  std::string describe() const;
};

struct MixtureSpec {
  std::vector<Vec> means;
  std::vector<double> weights;
  double sigma = 0.25;  // shared isotropic component std

  void validate() const;
};

enum class SymmetryKind { kNone, kPointReflection };
enum class Domain { kA, kB };

// A synthetic domain pair: D_A is a truncated Gaussian mixture and D_B is
// the exact pushforward y o D_A. Component counts are allocated
// proportionally (largest remainder) so the mixture weights hold exactly in
// every sample; rows are then shuffled by the seeded stream.
struct DomainPair {
  std::string name;
  int dim = 2;
  MixtureSpec mixture;
  TargetMap y;
  std::vector<TargetMap> targets;  // non-unique case; empty means {y}
  double support_radius = 6.0;
  SymmetryKind symmetry = SymmetryKind::kNone;
  Vec symmetry_center;

  // One truncated mixture draw with a randomly chosen component.
  Vec draw_a(Rng& rng) const;
};

SampleSet sample(const DomainPair& pair, Domain which, int n,
                 std::uint64_t seed);

// Evaluation-only: mean L2^2 distance between h and the analytic target on
// a seeded D_A sample. Never used inside learning.
double ground_truth_risk(const MlpNetwork& h, const DomainPair& pair, int n,
                         std::uint64_t seed);

// B-space transform Pi with Pi o D_B = D_B, built as y o rho o y^{-1} from
// the mixture's point reflection rho(x) = 2c - x. An involution.
struct SymmetryPermutation {
  TargetMap y;
  Vec center;

  Vec apply(const Vec& z) const;
  Mat apply(const Mat& zs) const;
  Vec apply_inverse(const Vec& z) const { return apply(z); }
};

SymmetryPermutation make_symmetry_permutation(const DomainPair& pair);

// The alignment-failure demonstration: the wrong pair h^ = Pi o y and
// h^' = y^{-1} o Pi^{-1} zeroes every term of the circularity objective
// while its ground-truth risk stays large. The two reconstruction risks are
// exact zeros by the algebraic collapse h^' o h^ = Id; the numeric residues
// of evaluating the compositions are reported alongside.
struct AmbiguityReport {
  double divergence_wrong_map = 0.0;      // W(h^ o S_A, S_B)
  double divergence_wrong_inverse = 0.0;  // W(h^' o S_B, S_A)
  double circularity_a = 0.0;             // R_A[h^' o h^, Id], exact
  double circularity_b = 0.0;             // R_B[h^ o h^', Id], exact
  double circularity_a_residual = 0.0;    // numeric evaluation of the same
  double circularity_b_residual = 0.0;
  double gt_risk_wrong_map = 0.0;
};

AmbiguityReport ambiguity_demo(const DomainPair& pair, int n = 512,
                               std::uint64_t seed = 2024);

// Registered pairs: "twin-moons-rotation", "warp", "multi-target".
std::vector<std::string> registered_pair_names();
DomainPair make_pair(const std::string& name, int dim = 2);

}  // namespace alignlab
