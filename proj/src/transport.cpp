#include "alignlab/transport.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <vector>

namespace alignlab {

std::string divergence_method_name(DivergenceMethod m) {
  switch (m) {
    case DivergenceMethod::kExactAssignment:
      return "exact_assignment";
    case DivergenceMethod::kSinkhorn:
      return "sinkhorn";
    case DivergenceMethod::kCritic:
      return "critic";
  }
  return "exact_assignment";
}

namespace {

Mat pairwise_distances(const SampleSet& s1, const SampleSet& s2) {
  const Eigen::Index n = s1.rows(), m = s2.rows();
  Mat c(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    c.row(i) = (s2.rowwise() - s1.row(i)).rowwise().norm().transpose();
  return c;
}

// Jonker-Volgenant style shortest augmenting path assignment. Returns the
// minimal total cost of a perfect matching of the square cost matrix.
double solve_assignment(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<size_t>(n) + 1, 0);  // column -> row
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    std::vector<int> way(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = match[static_cast<size_t>(j0)];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] -
                           v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j)
    total += cost(match[static_cast<size_t>(j)] - 1, j - 1);
  return total;
}

}  // namespace

DivergenceEstimate exact_w1(const SampleSet& s1, const SampleSet& s2) {
  require(s1.rows() == s2.rows(),
          "exact_w1: sample sets must have equal size (" +
              std::to_string(s1.rows()) + " vs " + std::to_string(s2.rows()) +
              "); subsample upstream");
  require(s1.cols() == s2.cols(), "exact_w1: dimension mismatch");
  require(s1.rows() >= 1, "exact_w1: empty sample set");
  const Mat cost = pairwise_distances(s1, s2);
  DivergenceEstimate est;
  est.method = DivergenceMethod::kExactAssignment;
  est.n_samples = static_cast<int>(s1.rows());
  est.value = solve_assignment(cost) / static_cast<double>(s1.rows());
  return est;
}

namespace {

// log sum exp over a vector expression
double logsumexp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

DivergenceEstimate sinkhorn_w1(const SampleSet& s1, const SampleSet& s2,
                               double epsilon, int max_iters) {
  require(epsilon > 0.0, "sinkhorn_w1: epsilon must be positive");
  require(s1.rows() == s2.rows(), "sinkhorn_w1: sample sets must match in size");
  require(s1.cols() == s2.cols(), "sinkhorn_w1: dimension mismatch");
  const int n = static_cast<int>(s1.rows());
  const Mat cost = pairwise_distances(s1, s2);
  const double log_marginal = -std::log(static_cast<double>(n));

  Vec f = Vec::Zero(n), g = Vec::Zero(n);
  // Epsilon scaling: start coarse and halve toward the target; this keeps
  // the iteration count manageable for small target epsilons.
  const double eps_start = std::max(epsilon, std::max(1.0, cost.maxCoeff()));
  std::vector<double> schedule;
  for (double e = eps_start; e > epsilon * 1.5; e *= 0.5) schedule.push_back(e);
  schedule.push_back(epsilon);

  int iters = 0;
  double violation = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (size_t level = 0; level < schedule.size() && !converged; ++level) {
    const double eps = schedule[level];
    const bool final_level = (level + 1 == schedule.size());
    const int level_cap = final_level ? max_iters : 60;
    for (int it = 0; it < level_cap && iters < max_iters; ++it, ++iters) {
      for (int i = 0; i < n; ++i)
        f[i] = eps * (log_marginal -
                      logsumexp(((g.array() - cost.row(i).transpose().array()) /
                                 eps)
                                    .matrix()));
      for (int j = 0; j < n; ++j)
        g[j] = eps * (log_marginal -
                      logsumexp(((f.array() - cost.col(j).array()) / eps)
                                    .matrix()));
      if (!final_level) continue;
      // L1 violation of the row marginals (columns are exact after the g
      // update).
      double viol = 0.0;
      for (int i = 0; i < n; ++i) {
        const double row_mass = std::exp(
            logsumexp(((f[i] + g.array() - cost.row(i).transpose().array()) /
                       eps)
                          .matrix()));
        viol += std::abs(row_mass - 1.0 / n);
      }
      violation = viol;
      if (viol < 1e-8) {
        converged = true;
        break;
      }
    }
  }

  // Transport cost of the (approximately feasible) plan.
  double value = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      value += std::exp((f[i] + g[j] - cost(i, j)) / epsilon) * cost(i, j);

  DivergenceEstimate est;
  est.method = DivergenceMethod::kSinkhorn;
  est.n_samples = n;
  est.value = value;
  est.diagnostics["epsilon"] = epsilon;
  est.diagnostics["iterations"] = static_cast<double>(iters);
  est.diagnostics["marginal_violation"] = violation;
  est.diagnostics["converged"] = converged ? 1.0 : 0.0;
  return est;
}

DivergenceEstimate critic_divergence(const SampleSet& s1, const SampleSet& s2,
                                     const Architecture& critic_arch,
                                     int steps, double clip_c,
                                     std::uint64_t seed,
                                     double learning_rate) {
  require(steps >= 1, "critic_divergence: steps must be >= 1");
  require(critic_arch.output_dim == 1, "critic must be scalar-valued");
  require(s1.cols() == critic_arch.input_dim && s2.cols() == critic_arch.input_dim,
          "critic_divergence: dimension mismatch");
  Rng rng(seed);
  MlpNetwork critic = make_network(critic_arch, rng);
  clip_weights(critic, clip_c);
  OptimizerState opt = OptimizerState::make(OptimizerKind::kRmsprop,
                                            learning_rate, critic.arch.param_count());
  const double inv_n1 = 1.0 / static_cast<double>(s1.rows());
  const double inv_n2 = 1.0 / static_cast<double>(s2.rows());
  double objective = 0.0;
  for (int step = 0; step < steps; ++step) {
    ForwardTrace t1 = forward_trace(critic, s1);
    ForwardTrace t2 = forward_trace(critic, s2);
    objective = t1.output.mean() - t2.output.mean();
    if (!std::isfinite(objective))
      throw NumericError("critic_divergence: non-finite critic loss at step " +
                         std::to_string(step));
    // Ascend the objective: descend its negation.
    Vec grad = backward(critic, t1, Mat::Constant(s1.rows(), 1, -inv_n1));
    grad += backward(critic, t2, Mat::Constant(s2.rows(), 1, inv_n2));
    opt.step(critic.params, grad);
    clip_weights(critic, clip_c);
  }
  ForwardTrace t1 = forward_trace(critic, s1);
  ForwardTrace t2 = forward_trace(critic, s2);
  objective = t1.output.mean() - t2.output.mean();
  const double lip = lipschitz_upper_bound(critic);

  DivergenceEstimate est;
  est.method = DivergenceMethod::kCritic;
  est.n_samples = static_cast<int>(std::min(s1.rows(), s2.rows()));
  est.value = lip > 0.0 ? objective / lip : 0.0;
  est.diagnostics["critic_objective"] = objective;
  est.diagnostics["lipschitz_bound"] = lip;
  est.diagnostics["steps"] = static_cast<double>(steps);
  est.diagnostics["clip_c"] = clip_c;
  return est;
}

QuadraticIpmResult ipm_quadratic(const SampleSet& s1, const SampleSet& s2,
                                 double beta_cap, double b_cap) {
  require(s1.cols() == s2.cols(), "ipm_quadratic: dimension mismatch");
  require(beta_cap >= 0.0 && b_cap >= 0.0, "ipm_quadratic: caps must be >= 0");
  const Eigen::Index d = s1.cols();
  const Vec mu1 = s1.colwise().mean().transpose();
  const Vec mu2 = s2.colwise().mean().transpose();
  const Mat m1 = s1.transpose() * s1 / static_cast<double>(s1.rows());
  const Mat m2 = s2.transpose() * s2 / static_cast<double>(s2.rows());
  const Vec dmu = mu1 - mu2;
  Mat dS = m1 - m2;
  dS = 0.5 * (dS + dS.transpose());  // symmetrize against rounding

  QuadraticIpmResult out;
  // Linear part: sup over ||b|| <= b_cap of b . dmu.
  const double mean_term = b_cap * dmu.norm();
  out.best_b = dmu.norm() > 0.0 ? Vec(b_cap * dmu.normalized())
                                : Vec(Vec::Zero(d));
  // Quadratic part: sup over symmetric ||M||_2 <= beta_cap of
  //   0.5 tr(M dS) = 0.5 beta_cap ||dS||_nuclear,
  // attained at M = beta_cap U sign(Lambda) U^T.
  Eigen::SelfAdjointEigenSolver<Mat> es(dS);
  const Vec lam = es.eigenvalues();
  const Mat U = es.eigenvectors();
  Vec signs(d);
  for (Eigen::Index i = 0; i < d; ++i) signs[i] = lam[i] >= 0.0 ? 1.0 : -1.0;
  out.best_m = beta_cap * (U * signs.asDiagonal() * U.transpose());
  const double quad_term = 0.5 * beta_cap * lam.array().abs().sum();
  out.value = mean_term + quad_term;
  return out;
}

}  // namespace alignlab
