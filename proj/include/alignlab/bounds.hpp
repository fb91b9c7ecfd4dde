#pragma once

#include "alignlab/common.hpp"
#include "alignlab/domains.hpp"
#include "alignlab/nn.hpp"
#include "alignlab/training.hpp"

#include <functional>
#include <string>
#include <vector>

namespace alignlab {

struct BoundReport {
  int epoch = 0;
  double pair_risk = 0.0;  // R[h1, h2] on the held-out A sample
  double div_h1 = 0.0;
  double div_h2 = 0.0;
  double bound_value = 0.0;
  bool feasible = false;  // both divergences <= epsilon0
  double gt_risk = 0.0;   // evaluation-only
};

std::string bound_reports_to_csv(const std::vector<BoundReport>& reports);

class NoFeasibleEpochError : public std::runtime_error {
 public:
  explicit NoFeasibleEpochError(std::vector<BoundReport> reports)
      : std::runtime_error("no feasible epoch: no checkpoint had both "
                           "divergences below epsilon0"),
        reports(std::move(reports)) {}
  std::vector<BoundReport> reports;
};

// Index of the feasible report minimizing `value(report)`; throws
// NoFeasibleEpochError when the feasible set is empty.
int select_feasible_argmin(
    const std::vector<BoundReport>& reports,
    const std::function<double(const BoundReport&)>& value);

struct StoppingResult {
  MlpNetwork selected;
  int selected_epoch = 0;  // 1-based
  std::vector<BoundReport> reports;
  std::vector<CheckpointRecord> h1_trace;  // competing signals per epoch
};

// The stopping criterion: per outer epoch, one epoch of h1 (WGAN) then t2
// epochs of the adversary h2; selects the feasible epoch minimizing
// R[h1, h2]. cfg.epochs plays the role of T1.
StoppingResult stopping_criterion(const DomainPair& pair,
                                  const Architecture& arch_k,
                                  const TrainConfig& cfg);

// Surrogate bound R[h1,h2] + W(h1 o S_A', S_B') on fresh seeded samples.
BoundReport thm1_surrogate(const MlpNetwork& h1, const MlpNetwork& h2,
                           const DomainPair& pair, int n_div,
                           std::uint64_t seed, double epsilon0);

struct PerSampleBound {
  double bound = 0.0;  // l(h1(x), h2(x))
  MlpNetwork h2;
  double div_h2 = 0.0;  // held-out divergence of h2 on the mixed source
};

PerSampleBound per_sample_bound(const MlpNetwork& h1, const DomainPair& pair,
                                const Vec& x, const Architecture& arch,
                                const TrainConfig& cfg);

// A finite one-parameter family of closed-form hypotheses; the feasible set
// P = {theta : exact_w1(h_theta o S_A, S_B) <= eps0} is computable by full
// enumeration.
struct GridHypothesisFamily {
  std::string name;
  std::vector<double> thetas;
  std::function<Mat(double, const Mat&)> apply;  // row-wise member map

  Vec apply_one(double theta, const Vec& x) const {
    return apply(theta, Mat(x.transpose())).row(0).transpose();
  }
};

GridHypothesisFamily rotation_grid(int dim, int steps);
// Rotations composed with the coordinate-wise tanh blend; matches the
// smooth_warp target family.
GridHypothesisFamily warped_rotation_grid(int dim, int steps, double alpha);

struct GridMembership {
  std::vector<int> members;         // indices into thetas
  std::vector<double> divergences;  // one per theta
};

GridMembership feasible_set(const GridHypothesisFamily& family,
                            const DomainPair& pair, double epsilon0, int n_div,
                            std::uint64_t seed);

struct GridCheckResult {
  bool passed = true;
  bool vacuous = false;  // empty feasible set
  int feasible_count = 0;
  double worst_margin = 0.0;        // max over h1 of lhs - rhs (<= 0 passes)
  double diameter_lhs = 0.0;        // sup pair risk over P
  double diameter_rhs = 0.0;        // 6 sup risk-to-target over P
  bool diameter_passed = true;
};

// Checks, for every h1 in P, R[h1,y] <= 3 max_{h2 in P} R[h1,h2] +
// 3 min_{h in P} R[h,y], plus the diameter bound
// sup_{h1,h2} R[h1,h2] <= 6 sup_h R[h,y]. Empirical risks at n_risk points.
GridCheckResult verify_lemma1_grid(const GridHypothesisFamily& family,
                                   const DomainPair& pair, double epsilon0,
                                   int n_risk = 512, int n_div = 256,
                                   std::uint64_t seed = 99);

// Same enumeration at a single point x (no diameter clause).
GridCheckResult verify_per_sample_lemma_grid(const GridHypothesisFamily& family,
                                             const DomainPair& pair,
                                             const Vec& x, double epsilon0,
                                             int n_div = 256,
                                             std::uint64_t seed = 99);

struct AffineHypothesis {
  Mat a;
  Vec b;
  Vec apply(const Vec& x) const { return a * x + b; }
  Mat apply(const Mat& xs) const {
    return (xs * a.transpose()).rowwise() + b.transpose();
  }
};

struct QuadraticCritic {
  Mat m;  // symmetric Hessian
  Vec b;
  double beta() const;  // ||m||_2
};

struct GaussianSpec {
  Vec mean;
  double sigma = 1.0;  // isotropic std
};

struct IpmBoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  double rho = 0.0;        // C-IPM value used
  double sup_gap = 0.0;    // sup_u ||h(u) - y(u)||
  double grad_term = 0.0;  // R_{D_B}[h o y^{-1} - Id, grad d]
};

// Closed-form check of the IPM risk bound for affine h, affine target and a
// quadratic critic under Gaussian source moments. The C-IPM is estimated by
// ipm_quadratic on n_ipm truncated-Gaussian samples; everything else is a
// moment computation.
IpmBoundCheck verify_ipm_bound_affine(const AffineHypothesis& h,
                                      const TargetMap& y,
                                      const QuadraticCritic& d,
                                      const GaussianSpec& source,
                                      double support_radius, double beta_cap,
                                      int n_ipm = 4096,
                                      std::uint64_t seed = 77);

struct LipschitzLemmaCheck {
  double premise_lhs = 0.0;      // ||J_h - J_y||_2
  double premise_rhs = 0.0;      // 1 / ||J_y^{-1}||_2
  bool premise = false;
  double conclusion_lhs = 0.0;   // ||J_h J_y^{-1} - I||_2
  bool conclusion = false;
  bool implication_holds = false;
};

LipschitzLemmaCheck verify_lipschitz_lemma(const AffineHypothesis& h,
                                           const AffineHypothesis& y);

// Exact maximum of ||D u + delta|| over the ball ||u|| <= radius
// (trust-region boundary subproblem, solved by the secular equation).
double max_affine_gap_on_ball(const Mat& d, const Vec& delta, double radius);

}  // namespace alignlab
