#include "alignlab/domains.hpp"

#include "alignlab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace alignlab {

namespace {

Mat plane_rotation(int dim, double angle) {
  Mat r = Mat::Identity(dim, dim);
  r(0, 0) = std::cos(angle);
  r(0, 1) = -std::sin(angle);
  r(1, 0) = std::sin(angle);
  r(1, 1) = std::cos(angle);
  return r;
}

}  // namespace

TargetMap TargetMap::rotation(int dim, double angle) {
  require(dim >= 2, "rotation needs dim >= 2");
  TargetMap m;
  m.kind = TargetMapKind::kRotation;
  m.dim = dim;
  m.angle = angle;
  m.a = plane_rotation(dim, angle);
  m.b = Vec::Zero(dim);
  return m;
}

TargetMap TargetMap::affine(const Mat& a, const Vec& b) {
  require(a.rows() == a.cols() && a.rows() == b.size(),
          "affine map must be square with matching offset");
  require(std::abs(a.determinant()) > 1e-12, "affine map must be invertible");
  TargetMap m;
  m.kind = TargetMapKind::kAffine;
  m.dim = static_cast<int>(a.rows());
  m.a = a;
  m.b = b;
  return m;
}

TargetMap TargetMap::smooth_warp(int dim, double angle, double alpha) {
  require(alpha > 0.0, "smooth_warp alpha must be positive");
  TargetMap m;
  m.kind = TargetMapKind::kSmoothWarp;
  m.dim = dim;
  m.angle = angle;
  m.alpha = alpha;
  m.a = plane_rotation(dim, angle);
  m.b = Vec::Zero(dim);
  return m;
}

Vec TargetMap::apply(const Vec& x) const {
  require(x.size() == dim, "target map: dimension mismatch");
  switch (kind) {
    case TargetMapKind::kRotation:
      return a * x;
    case TargetMapKind::kAffine:
      return a * x + b;
    case TargetMapKind::kSmoothWarp: {
      Vec t = (alpha * x.array()).tanh() / alpha;
      return a * t;
    }
  }
  return x;
}

Mat TargetMap::apply(const Mat& xs) const {
  require(xs.cols() == dim, "target map: dimension mismatch");
  switch (kind) {
    case TargetMapKind::kRotation:
      return xs * a.transpose();
    case TargetMapKind::kAffine:
      return (xs * a.transpose()).rowwise() + b.transpose();
    case TargetMapKind::kSmoothWarp: {
      Mat t = (alpha * xs.array()).tanh() / alpha;
      return t * a.transpose();
    }
  }
  return xs;
}

Vec TargetMap::apply_inverse(const Vec& z) const {
  require(z.size() == dim, "target map: dimension mismatch");
  switch (kind) {
    case TargetMapKind::kRotation:
      return a.transpose() * z;
    case TargetMapKind::kAffine:
      return a.partialPivLu().solve(z - b);
    case TargetMapKind::kSmoothWarp: {
      Vec u = a.transpose() * z;
      if ((u.array().abs() * alpha >= 1.0).any())
        throw NumericError("smooth_warp inverse: point outside range");
      return (alpha * u.array()).atanh() / alpha;
    }
  }
  return z;
}

Mat TargetMap::apply_inverse(const Mat& zs) const {
  Mat out(zs.rows(), zs.cols());
  for (Eigen::Index i = 0; i < zs.rows(); ++i)
    out.row(i) = apply_inverse(Vec(zs.row(i).transpose())).transpose();
  return out;
}

Mat TargetMap::jacobian(const Vec& x) const {
  require(x.size() == dim, "target map: dimension mismatch");
  switch (kind) {
    case TargetMapKind::kRotation:
    case TargetMapKind::kAffine:
      return a;
    case TargetMapKind::kSmoothWarp: {
      Vec diag = 1.0 - (alpha * x.array()).tanh().square();
      return a * diag.asDiagonal();
    }
  }
  return a;
}

std::string TargetMap::describe() const {
  switch (kind) {
    case TargetMapKind::kRotation:
      return "rotation(" + std::to_string(angle) + ")";
    case TargetMapKind::kAffine:
      return "affine";
    case TargetMapKind::kSmoothWarp:
      return "smooth_warp(angle=" + std::to_string(angle) +
             ",alpha=" + std::to_string(alpha) + ")";
  }
  return "?";
}

void MixtureSpec::validate() const {
  require(!means.empty() && means.size() == weights.size(),
          "mixture: means and weights must be non-empty and match");
  double total = 0.0;
  for (double w : weights) {
    require(w > 0.0, "mixture: weights must be positive");
    total += w;
  }
  require(std::abs(total - 1.0) < 1e-9, "mixture: weights must sum to 1");
  require(sigma > 0.0, "mixture: sigma must be positive");
}

Vec DomainPair::draw_a(Rng& rng) const {
  const double u = rng.uniform();
  size_t k = 0;
  double acc = 0.0;
  for (; k + 1 < mixture.weights.size(); ++k) {
    acc += mixture.weights[k];
    if (u < acc) break;
  }
  const Vec& mean = mixture.means[k];
  Vec x(dim);
  do {
    for (int d = 0; d < dim; ++d) x[d] = mean[d] + mixture.sigma * rng.normal();
  } while (x.norm() > support_radius);
  return x;
}

namespace {

// Largest-remainder allocation of n slots across the mixture weights.
std::vector<int> allocate_counts(const MixtureSpec& mix, int n) {
  const size_t k = mix.weights.size();
  std::vector<int> counts(k, 0);
  std::vector<std::pair<double, size_t>> remainders;
  int assigned = 0;
  for (size_t i = 0; i < k; ++i) {
    const double exact = mix.weights[i] * n;
    counts[i] = static_cast<int>(std::floor(exact));
    assigned += counts[i];
    remainders.push_back({exact - counts[i], i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int r = 0; r < n - assigned; ++r)
    counts[remainders[static_cast<size_t>(r)].second]++;
  return counts;
}

SampleSet sample_mixture(const DomainPair& pair, int n, Rng& rng) {
  const std::vector<int> counts = allocate_counts(pair.mixture, n);
  SampleSet xs(n, pair.dim);
  int row = 0;
  for (size_t k = 0; k < counts.size(); ++k) {
    const Vec& mean = pair.mixture.means[k];
    for (int i = 0; i < counts[k]; ++i) {
      Vec x(pair.dim);
      do {
        for (int d = 0; d < pair.dim; ++d)
          x[d] = mean[d] + pair.mixture.sigma * rng.normal();
      } while (x.norm() > pair.support_radius);
      xs.row(row++) = x.transpose();
    }
  }
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  SampleSet shuffled(n, pair.dim);
  for (int i = 0; i < n; ++i) shuffled.row(i) = xs.row(order[static_cast<size_t>(i)]);
  return shuffled;
}

}  // namespace

SampleSet sample(const DomainPair& pair, Domain which, int n,
                 std::uint64_t seed) {
  require(n >= 1, "sample: n must be >= 1");
  pair.mixture.validate();
  // Independent streams for the two domains.
  Rng rng(derive_seed(seed, which == Domain::kA ? 0xA11CEULL : 0xB0B5ULL));
  SampleSet xs = sample_mixture(pair, n, rng);
  if (which == Domain::kA) return xs;
  return pair.y.apply(xs);
}

double ground_truth_risk(const MlpNetwork& h, const DomainPair& pair, int n,
                         std::uint64_t seed) {
  require(h.arch.input_dim == pair.dim && h.arch.output_dim == pair.dim,
          "ground_truth_risk: network dims must match the pair");
  const SampleSet xs = sample(pair, Domain::kA, n, seed);
  const Mat pred = forward(h, xs);
  const Mat truth = pair.y.apply(xs);
  return (pred - truth).rowwise().squaredNorm().mean();
}

Vec SymmetryPermutation::apply(const Vec& z) const {
  return y.apply(2.0 * center - y.apply_inverse(z));
}

Mat SymmetryPermutation::apply(const Mat& zs) const {
  Mat u = y.apply_inverse(zs);
  u = (-u).rowwise() + 2.0 * center.transpose();
  return y.apply(u);
}

SymmetryPermutation make_symmetry_permutation(const DomainPair& pair) {
  if (pair.symmetry != SymmetryKind::kPointReflection)
    throw ContractError("pair '" + pair.name +
                        "' declares no symmetry; no permutation available");
  return SymmetryPermutation{pair.y, pair.symmetry_center};
}

AmbiguityReport ambiguity_demo(const DomainPair& pair, int n,
                               std::uint64_t seed) {
  const SymmetryPermutation pi = make_symmetry_permutation(pair);
  const Vec c = pair.symmetry_center;
  const TargetMap& y = pair.y;

  // Closed forms: h^ = Pi o y = y o rho and h^' = y^{-1} o Pi^{-1} =
  // rho o y^{-1}, with rho(x) = 2c - x. Their composition collapses to the
  // identity, so both circularity risks are exactly zero.
  auto wrong_map = [&](const Mat& xs) {
    Mat rho = (-xs).rowwise() + 2.0 * c.transpose();
    return y.apply(rho);
  };
  auto wrong_inverse = [&](const Mat& zs) {
    Mat u = y.apply_inverse(zs);
    return Mat((-u).rowwise() + 2.0 * c.transpose());
  };

  const SampleSet sa = sample(pair, Domain::kA, n, derive_seed(seed, 1));
  const SampleSet sb = sample(pair, Domain::kB, n, derive_seed(seed, 2));

  AmbiguityReport rep;
  rep.divergence_wrong_map = exact_w1(wrong_map(sa), sb).value;
  rep.divergence_wrong_inverse = exact_w1(wrong_inverse(sb), sa).value;
  rep.circularity_a = 0.0;
  rep.circularity_b = 0.0;
  rep.circularity_a_residual =
      (wrong_inverse(wrong_map(sa)) - sa).rowwise().squaredNorm().mean();
  rep.circularity_b_residual =
      (wrong_map(wrong_inverse(sb)) - sb).rowwise().squaredNorm().mean();
  const Mat truth = y.apply(sa);
  rep.gt_risk_wrong_map =
      (wrong_map(sa) - truth).rowwise().squaredNorm().mean();
  return rep;
}

std::vector<std::string> registered_pair_names() {
  return {"twin-moons-rotation", "warp", "multi-target"};
}

namespace {

Vec axis_vec(int dim, int axis, double v) {
  Vec x = Vec::Zero(dim);
  x[axis] = v;
  return x;
}

}  // namespace

DomainPair make_pair(const std::string& name, int dim) {
  require(dim >= 2 && dim <= 8, "pair dimension must lie in [2, 8]");
  constexpr double kPi = 3.14159265358979323846;
  DomainPair p;
  p.name = name;
  p.dim = dim;
  p.support_radius = 6.0;
  if (name == "twin-moons-rotation") {
    p.mixture.means = {axis_vec(dim, 0, 2.0), axis_vec(dim, 0, -2.0)};
    p.mixture.weights = {0.5, 0.5};
    p.mixture.sigma = 0.25;
    p.y = TargetMap::rotation(dim, kPi / 4.0);
    p.symmetry = SymmetryKind::kPointReflection;
    p.symmetry_center = Vec::Zero(dim);
  } else if (name == "warp") {
    p.mixture.means = {axis_vec(dim, 0, 2.0), axis_vec(dim, 0, -2.0)};
    p.mixture.weights = {0.5, 0.5};
    p.mixture.sigma = 0.5;
    p.y = TargetMap::smooth_warp(dim, kPi / 4.0, 0.3);
    p.symmetry = SymmetryKind::kPointReflection;
    p.symmetry_center = Vec::Zero(dim);
  } else if (name == "multi-target") {
    p.mixture.means = {axis_vec(dim, 0, 2.0), axis_vec(dim, 0, -2.0),
                       axis_vec(dim, 1, 2.0), axis_vec(dim, 1, -2.0)};
    p.mixture.weights = {0.25, 0.25, 0.25, 0.25};
    p.mixture.sigma = 0.25;
    p.y = TargetMap::rotation(dim, kPi / 4.0);
    p.targets = {TargetMap::rotation(dim, kPi / 4.0),
                 TargetMap::rotation(dim, -kPi / 4.0)};
    p.symmetry = SymmetryKind::kPointReflection;
    p.symmetry_center = Vec::Zero(dim);
  } else {
    throw ContractError("unknown domain pair '" + name + "'");
  }
  p.mixture.validate();
  return p;
}

}  // namespace alignlab
