#include "alignlab/bounds.hpp"

#include "alignlab/io.hpp"
#include "alignlab/transport.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace alignlab {

std::string bound_reports_to_csv(const std::vector<BoundReport>& reports) {
  std::ostringstream os;
  os << "epoch,pair_risk,div_h1,div_h2,bound,feasible,gt_risk\n";
  for (const auto& r : reports) {
    os << r.epoch << ',' << format_double(r.pair_risk) << ','
       << format_double(r.div_h1) << ',' << format_double(r.div_h2) << ','
       << format_double(r.bound_value) << ',' << (r.feasible ? 1 : 0) << ','
       << format_double(r.gt_risk) << '\n';
  }
  return os.str();
}

int select_feasible_argmin(
    const std::vector<BoundReport>& reports,
    const std::function<double(const BoundReport&)>& value) {
  int best = -1;
  double best_value = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < reports.size(); ++i) {
    if (!reports[i].feasible) continue;
    const double v = value(reports[i]);
    if (v < best_value) {
      best_value = v;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) throw NoFeasibleEpochError(reports);
  return best;
}

StoppingResult stopping_criterion(const DomainPair& pair,
                                  const Architecture& arch_k,
                                  const TrainConfig& cfg) {
  cfg.validate();
  TrainConfig c1 = cfg;
  c1.record_checkpoints = false;
  MapperTrainer t1(pair, arch_k, c1);
  TrainConfig c2 = c1;
  c2.seed = derive_seed(cfg.seed, 21);  // independent h2 initialization
  MapperTrainer t2(pair, arch_k, c2, &t1.mapper(), -cfg.lambda);

  const std::uint64_t gt_seed = derive_seed(cfg.eval_seed, 200);
  std::vector<BoundReport> reports;
  std::vector<CheckpointRecord> trace;
  std::vector<Vec> snapshots;
  for (int t = 1; t <= cfg.epochs; ++t) {
    t1.run_epoch();
    t2.run_epochs(cfg.t2);
    BoundReport rep;
    rep.epoch = t;
    rep.div_h1 = t1.heldout_divergence();
    rep.div_h2 = t2.heldout_divergence();
    rep.pair_risk = empirical_risk(t1.mapper(), t2.mapper(), t1.eval_a());
    rep.bound_value = rep.pair_risk;  // epsilon0 enters as a constant offset
    rep.feasible = rep.div_h1 <= cfg.epsilon0 && rep.div_h2 <= cfg.epsilon0;
    rep.gt_risk = ground_truth_risk(t1.mapper(), pair, cfg.n_div, gt_seed);
    reports.push_back(rep);
    CheckpointRecord rec;
    rec.epoch = t;
    rec.div_h = rep.div_h1;
    rec.aux["loss_gen"] = t1.last_loss_gen();
    rec.aux["loss_critic"] = t1.last_loss_critic();
    rec.aux["risk_aux"] = rep.pair_risk;
    trace.push_back(rec);
    snapshots.push_back(t1.mapper().params);
  }
  const int sel = select_feasible_argmin(
      reports, [](const BoundReport& r) { return r.pair_risk; });
  StoppingResult out{MlpNetwork{arch_k, snapshots[static_cast<size_t>(sel)]},
                     reports[static_cast<size_t>(sel)].epoch,
                     std::move(reports), std::move(trace)};
  return out;
}

BoundReport thm1_surrogate(const MlpNetwork& h1, const MlpNetwork& h2,
                           const DomainPair& pair, int n_div,
                           std::uint64_t seed, double epsilon0) {
  const SampleSet risk_a = sample(pair, Domain::kA, n_div, derive_seed(seed, 1));
  const SampleSet div_a = sample(pair, Domain::kA, n_div, derive_seed(seed, 2));
  const SampleSet div_b = sample(pair, Domain::kB, n_div, derive_seed(seed, 3));
  BoundReport rep;
  rep.pair_risk = empirical_risk(h1, h2, risk_a);
  rep.div_h1 = exact_w1(forward(h1, div_a), div_b).value;
  rep.div_h2 = exact_w1(forward(h2, div_a), div_b).value;
  rep.bound_value = rep.pair_risk + rep.div_h1;
  rep.feasible = rep.div_h1 <= epsilon0 && rep.div_h2 <= epsilon0;
  rep.gt_risk = ground_truth_risk(h1, pair, n_div, derive_seed(seed, 4));
  return rep;
}

PerSampleBound per_sample_bound(const MlpNetwork& h1, const DomainPair& pair,
                                const Vec& x, const Architecture& arch,
                                const TrainConfig& cfg) {
  MlpNetwork h2 = train_per_sample_adversary(h1, pair, x, arch, cfg);
  PerSampleBound out;
  out.bound = (forward(h1, x) - forward(h2, x)).squaredNorm();
  // Held-out divergence on the probe-mixed source, as in training.
  MapperTrainer probe_eval(pair, arch, cfg, nullptr, 0.0, x);
  out.div_h2 = exact_w1(forward(h2, probe_eval.eval_a()),
                        probe_eval.eval_b()).value;
  out.h2 = std::move(h2);
  return out;
}

GridHypothesisFamily rotation_grid(int dim, int steps) {
  require(steps >= 1, "rotation grid needs at least one step");
  GridHypothesisFamily fam;
  fam.name = "rotation_grid";
  constexpr double kTau = 2.0 * 3.14159265358979323846;
  for (int i = 0; i < steps; ++i)
    fam.thetas.push_back(kTau * static_cast<double>(i) /
                         static_cast<double>(steps));
  fam.apply = [dim](double theta, const Mat& xs) {
    return TargetMap::rotation(dim, theta).apply(xs);
  };
  return fam;
}

GridHypothesisFamily warped_rotation_grid(int dim, int steps, double alpha) {
  GridHypothesisFamily fam = rotation_grid(dim, steps);
  fam.name = "warped_rotation_grid";
  fam.apply = [dim, alpha](double theta, const Mat& xs) {
    return TargetMap::smooth_warp(dim, theta, alpha).apply(xs);
  };
  return fam;
}

GridMembership feasible_set(const GridHypothesisFamily& family,
                            const DomainPair& pair, double epsilon0, int n_div,
                            std::uint64_t seed) {
  const SampleSet sa = sample(pair, Domain::kA, n_div, derive_seed(seed, 1));
  const SampleSet sb = sample(pair, Domain::kB, n_div, derive_seed(seed, 2));
  GridMembership out;
  for (size_t i = 0; i < family.thetas.size(); ++i) {
    const double div = exact_w1(family.apply(family.thetas[i], sa), sb).value;
    out.divergences.push_back(div);
    if (div <= epsilon0) out.members.push_back(static_cast<int>(i));
  }
  return out;
}

GridCheckResult verify_lemma1_grid(const GridHypothesisFamily& family,
                                   const DomainPair& pair, double epsilon0,
                                   int n_risk, int n_div, std::uint64_t seed) {
  const GridMembership mem = feasible_set(family, pair, epsilon0, n_div, seed);
  GridCheckResult res;
  res.feasible_count = static_cast<int>(mem.members.size());
  if (mem.members.empty()) {
    res.vacuous = true;
    return res;
  }
  const SampleSet s = sample(pair, Domain::kA, n_risk, derive_seed(seed, 3));
  const Mat target = pair.y.apply(s);

  std::vector<Mat> outputs;
  std::vector<double> risk_to_target;
  for (int idx : mem.members) {
    Mat o = family.apply(family.thetas[static_cast<size_t>(idx)], s);
    risk_to_target.push_back((o - target).rowwise().squaredNorm().mean());
    outputs.push_back(std::move(o));
  }
  const double min_bias =
      *std::min_element(risk_to_target.begin(), risk_to_target.end());
  const double max_bias =
      *std::max_element(risk_to_target.begin(), risk_to_target.end());

  double worst_margin = -std::numeric_limits<double>::infinity();
  double diameter = 0.0;
  for (size_t i = 0; i < outputs.size(); ++i) {
    double max_pair = 0.0;
    for (size_t j = 0; j < outputs.size(); ++j) {
      const double r =
          (outputs[i] - outputs[j]).rowwise().squaredNorm().mean();
      max_pair = std::max(max_pair, r);
    }
    diameter = std::max(diameter, max_pair);
    const double lhs = risk_to_target[i];
    const double rhs = 3.0 * max_pair + 3.0 * min_bias;
    worst_margin = std::max(worst_margin, lhs - rhs);
  }
  res.worst_margin = worst_margin;
  res.diameter_lhs = diameter;
  res.diameter_rhs = 6.0 * max_bias;
  res.diameter_passed = diameter <= res.diameter_rhs + 1e-9;
  res.passed = worst_margin <= 1e-9 && res.diameter_passed;
  return res;
}

GridCheckResult verify_per_sample_lemma_grid(const GridHypothesisFamily& family,
                                             const DomainPair& pair,
                                             const Vec& x, double epsilon0,
                                             int n_div, std::uint64_t seed) {
  const GridMembership mem = feasible_set(family, pair, epsilon0, n_div, seed);
  GridCheckResult res;
  res.feasible_count = static_cast<int>(mem.members.size());
  if (mem.members.empty()) {
    res.vacuous = true;
    return res;
  }
  const Vec yx = pair.y.apply(x);
  std::vector<Vec> values;
  std::vector<double> loss_to_target;
  for (int idx : mem.members) {
    Vec v = family.apply_one(family.thetas[static_cast<size_t>(idx)], x);
    loss_to_target.push_back((v - yx).squaredNorm());
    values.push_back(std::move(v));
  }
  const double min_bias =
      *std::min_element(loss_to_target.begin(), loss_to_target.end());
  double worst_margin = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < values.size(); ++i) {
    double max_pair = 0.0;
    for (size_t j = 0; j < values.size(); ++j)
      max_pair = std::max(max_pair, (values[i] - values[j]).squaredNorm());
    const double lhs = loss_to_target[i];
    const double rhs = 3.0 * max_pair + 3.0 * min_bias;
    worst_margin = std::max(worst_margin, lhs - rhs);
  }
  res.worst_margin = worst_margin;
  res.passed = worst_margin <= 1e-9;
  return res;
}

namespace {

double spectral_norm_svd(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

double QuadraticCritic::beta() const { return spectral_norm_svd(m); }

double max_affine_gap_on_ball(const Mat& d, const Vec& delta, double radius) {
  // Maximize ||D u + delta||^2 = u^T P u + 2 q^T u + ||delta||^2 over
  // ||u|| <= radius. The maximum of a convex quadratic sits on the sphere;
  // solve the secular equation sum q_i^2 / (nu - lam_i)^2 = r^2 over
  // nu > lam_max, with the degenerate top-eigenspace case handled.
  const Mat p = d.transpose() * d;
  const Vec q = d.transpose() * delta;
  if (p.norm() == 0.0) return delta.norm();
  Eigen::SelfAdjointEigenSolver<Mat> es(p);
  const Vec lam = es.eigenvalues();
  const Vec qt = es.eigenvectors().transpose() * q;
  const Eigen::Index n = lam.size();
  const double lam_max = lam(n - 1);
  const double r2 = radius * radius;

  auto phi = [&](double nu) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double diff = nu - lam[i];
      s += qt[i] * qt[i] / (diff * diff);
    }
    return s;
  };
  auto value_at = [&](const Vec& u) {
    return std::sqrt(std::max(
        0.0, u.dot(lam.asDiagonal() * u) + 2.0 * qt.dot(u) +
                 delta.squaredNorm()));
  };

  const double top_weight = std::abs(qt[n - 1]);
  const double scale = std::max(1.0, q.norm());
  if (top_weight < 1e-13 * scale) {
    // Degenerate case: no gradient component on the top eigenspace.
    Vec u = Vec::Zero(n);
    double used = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (lam_max - lam[i] > 1e-13 * std::max(1.0, lam_max)) {
        u[i] = qt[i] / (lam_max - lam[i]);
        used += u[i] * u[i];
      }
    }
    if (used <= r2) {
      u[n - 1] = std::sqrt(r2 - used);
      return value_at(u);
    }
    // Otherwise the interior coefficients already exceed the sphere and
    // the regular secular equation applies below.
  }

  double lo = lam_max + 1e-15;
  double hi = lam_max + q.norm() / radius + 1e-15;
  while (phi(hi) > r2) hi = lam_max + 2.0 * (hi - lam_max);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (phi(mid) > r2)
      lo = mid;
    else
      hi = mid;
  }
  const double nu = 0.5 * (lo + hi);
  Vec u(n);
  for (Eigen::Index i = 0; i < n; ++i) u[i] = qt[i] / (nu - lam[i]);
  if (u.norm() > 0.0) u *= radius / u.norm();
  return value_at(u);
}

IpmBoundCheck verify_ipm_bound_affine(const AffineHypothesis& h,
                                      const TargetMap& y,
                                      const QuadraticCritic& d,
                                      const GaussianSpec& source,
                                      double support_radius, double beta_cap,
                                      int n_ipm, std::uint64_t seed) {
  require(y.kind == TargetMapKind::kAffine || y.kind == TargetMapKind::kRotation,
          "verify_ipm_bound_affine: target must be affine");
  const Mat sym_check = d.m - d.m.transpose();
  require(sym_check.norm() < 1e-12, "quadratic critic must be symmetric");
  const double beta = d.beta();
  require(beta < 2.0, "verify_ipm_bound_affine: beta(d) must be < 2");
  require(beta <= beta_cap + 1e-12,
          "verify_ipm_bound_affine: critic must lie in the IPM class");
  const double b_cap = 10.0 * support_radius;
  require(d.b.norm() <= b_cap + 1e-12,
          "verify_ipm_bound_affine: critic offset exceeds the class cap");

  const Eigen::Index dim = source.mean.size();
  const Mat ya = y.a;
  const Vec yb = y.kind == TargetMapKind::kAffine ? y.b : Vec(Vec::Zero(dim));

  // LHS: R_{D_A}[h, y] under N(mu, sigma^2 I).
  const Mat dm = h.a - ya;
  const Vec db = h.b - yb;
  IpmBoundCheck out;
  out.lhs = (dm * source.mean + db).squaredNorm() +
            source.sigma * source.sigma * dm.squaredNorm();

  // rho_C from empirical moments of truncated-Gaussian samples.
  Rng rng(seed);
  auto draw = [&](SampleSet& dst) {
    for (Eigen::Index r = 0; r < dst.rows(); ++r) {
      Vec x(dim);
      do {
        for (Eigen::Index c = 0; c < dim; ++c)
          x[c] = source.mean[c] + source.sigma * rng.normal();
      } while (x.norm() > support_radius);
      dst.row(r) = x.transpose();
    }
  };
  SampleSet x1(n_ipm, dim), x2(n_ipm, dim);
  draw(x1);
  draw(x2);
  const SampleSet s1 = h.apply(x1);
  const SampleSet s2 = y.apply(x2);
  out.rho = ipm_quadratic(s1, s2, beta_cap, b_cap).value;

  // sup_u ||h(u) - y(u)|| over the truncated support.
  out.sup_gap = max_affine_gap_on_ball(dm, db, support_radius);

  // Gradient-mismatch term under the exact D_B moments:
  //   h o y^{-1}(z) - z - grad d(z) = F z + f,
  //   F = A_h A_y^{-1} - I - M,  f = b_h - A_h A_y^{-1} b_y - b_d.
  const Mat ya_inv = ya.inverse();
  const Mat g = h.a * ya_inv;
  const Mat f_mat = g - Mat::Identity(dim, dim) - d.m;
  const Vec f_vec = h.b - g * yb - d.b;
  const Vec mu_b = ya * source.mean + yb;
  out.grad_term = (f_mat * mu_b + f_vec).squaredNorm() +
                  source.sigma * source.sigma * (f_mat * ya).squaredNorm();

  out.rhs = 2.0 * out.rho / (2.0 - beta) +
            2.0 * out.sup_gap / (2.0 - beta) * std::sqrt(out.grad_term);
  out.holds = out.lhs <= out.rhs + 1e-6;
  return out;
}

LipschitzLemmaCheck verify_lipschitz_lemma(const AffineHypothesis& h,
                                           const AffineHypothesis& y) {
  require(h.a.rows() == y.a.rows() && h.a.cols() == y.a.cols(),
          "verify_lipschitz_lemma: dimension mismatch");
  require(std::abs(y.a.determinant()) > 1e-12,
          "verify_lipschitz_lemma: target Jacobian must be invertible");
  const Mat y_inv = y.a.inverse();
  LipschitzLemmaCheck out;
  out.premise_lhs = spectral_norm_svd(h.a - y.a);
  out.premise_rhs = 1.0 / spectral_norm_svd(y_inv);
  out.premise = out.premise_lhs <= out.premise_rhs;
  out.conclusion_lhs =
      spectral_norm_svd(h.a * y_inv - Mat::Identity(h.a.rows(), h.a.cols()));
  out.conclusion = out.conclusion_lhs <= 1.0 + 1e-12;
  out.implication_holds = !out.premise || out.conclusion;
  return out;
}

}  // namespace alignlab
