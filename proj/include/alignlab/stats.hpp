#pragma once

#include "alignlab/common.hpp"

#include <string>
#include <vector>

namespace alignlab {

// Raised when a correlation is requested for a degenerate series.
class UndefinedCorrelationError : public ContractError {
 public:
  using ContractError::ContractError;
};

double pearson_r(const std::vector<double>& xs, const std::vector<double>& ys);

// Two-sided permutation test on |r| with +1 smoothing; the smallest
// reachable value is 1/(n_perms+1).
double p_value(const std::vector<double>& xs, const std::vector<double>& ys,
               int n_perms, std::uint64_t seed);

double r_squared(const std::vector<double>& xs, const std::vector<double>& ys);

struct LedgerRow {
  std::string signal;
  double r = 0.0;
  double p = 1.0;
  int n = 0;
  bool is_bound = false;
  bool excluded = false;
  std::string exclusion_reason;
};

// One row per signal, correlated against the reference series (the
// ground-truth risks); the bound row is flagged. Signals with zero variance
// are excluded with a reason rather than failing the whole table.
std::vector<LedgerRow> correlation_ledger(
    const std::vector<double>& gt_series, const std::vector<double>& bound_series,
    const std::vector<std::pair<std::string, std::vector<double>>>& competing,
    int n_perms, std::uint64_t seed);

std::string ledger_to_csv(const std::vector<LedgerRow>& rows);

}  // namespace alignlab
