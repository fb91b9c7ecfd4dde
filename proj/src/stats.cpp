#include "alignlab/stats.hpp"

#include "alignlab/io.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace alignlab {

namespace {

struct Moments {
  double mean_x, mean_y, var_x, var_y, cov;
};

Moments moments(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  Moments m{};
  m.mean_x = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  m.mean_y = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - m.mean_x;
    const double dy = ys[i] - m.mean_y;
    m.var_x += dx * dx;
    m.var_y += dy * dy;
    m.cov += dx * dy;
  }
  return m;
}

void check_series(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size(), "correlation: series lengths differ");
  require(xs.size() >= 3, "correlation: need at least 3 points");
}

double pearson_from_perm(const std::vector<double>& xs,
                         const std::vector<double>& ys,
                         const std::vector<int>& perm, const Moments& base) {
  // Means and variances are permutation-invariant; only the covariance
  // needs recomputing.
  double cov = 0.0;
  for (size_t i = 0; i < xs.size(); ++i)
    cov += (xs[i] - base.mean_x) *
           (ys[static_cast<size_t>(perm[i])] - base.mean_y);
  return cov / std::sqrt(base.var_x * base.var_y);
}

}  // namespace

double pearson_r(const std::vector<double>& xs, const std::vector<double>& ys) {
  check_series(xs, ys);
  const Moments m = moments(xs, ys);
  if (m.var_x <= 0.0 || m.var_y <= 0.0)
    throw UndefinedCorrelationError(
        "correlation undefined: a series has zero variance");
  return m.cov / std::sqrt(m.var_x * m.var_y);
}

double p_value(const std::vector<double>& xs, const std::vector<double>& ys,
               int n_perms, std::uint64_t seed) {
  check_series(xs, ys);
  require(n_perms >= 99, "p_value: need at least 99 permutations");
  const double r_obs = std::abs(pearson_r(xs, ys));
  const Moments base = moments(xs, ys);
  Rng rng(seed);
  std::vector<int> perm(xs.size());
  std::iota(perm.begin(), perm.end(), 0);
  int hits = 0;
  for (int k = 0; k < n_perms; ++k) {
    rng.shuffle(perm);
    if (std::abs(pearson_from_perm(xs, ys, perm, base)) >= r_obs) ++hits;
  }
  return static_cast<double>(hits + 1) / static_cast<double>(n_perms + 1);
}

double r_squared(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double r = pearson_r(xs, ys);
  return r * r;
}

std::vector<LedgerRow> correlation_ledger(
    const std::vector<double>& gt_series, const std::vector<double>& bound_series,
    const std::vector<std::pair<std::string, std::vector<double>>>& competing,
    int n_perms, std::uint64_t seed) {
  std::vector<LedgerRow> rows;
  auto add = [&](const std::string& name, const std::vector<double>& series,
                 bool is_bound) {
    require(series.size() == gt_series.size(),
            "correlation_ledger: series '" + name +
                "' is misaligned with the ground-truth index");
    LedgerRow row;
    row.signal = name;
    row.n = static_cast<int>(series.size());
    row.is_bound = is_bound;
    try {
      row.r = pearson_r(series, gt_series);
      row.p = p_value(series, gt_series, n_perms, derive_seed(seed, rows.size()));
    } catch (const UndefinedCorrelationError&) {
      row.excluded = true;
      row.exclusion_reason = "zero variance";
    }
    rows.push_back(row);
  };
  add("bound", bound_series, true);
  for (const auto& [name, series] : competing) add(name, series, false);
  return rows;
}

std::string ledger_to_csv(const std::vector<LedgerRow>& rows) {
  std::ostringstream os;
  os << "signal,r,p,n\n";
  for (const auto& row : rows) {
    if (row.excluded) continue;
    os << row.signal << ',' << format_double(row.r) << ','
       << format_double(row.p) << ',' << row.n << '\n';
  }
  return os.str();
}

}  // namespace alignlab
