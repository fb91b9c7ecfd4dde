#pragma once

#include "alignlab/common.hpp"
#include "alignlab/domains.hpp"
#include "alignlab/training.hpp"

#include <vector>

namespace alignlab {

class NoMinimalDepthError : public std::runtime_error {
 public:
  NoMinimalDepthError(std::vector<std::pair<int, double>> table)
      : std::runtime_error(
            "no depth in the probed range reached the divergence threshold"),
        divergence_table(std::move(table)) {}
  std::vector<std::pair<int, double>> divergence_table;  // (depth, div)
};

struct MinimalDepthResult {
  int k1 = 0;
  std::vector<std::pair<int, double>> divergence_table;  // probed depths
};

// Trains one generator per depth (fixed budget, ascending) and returns the
// first depth whose held-out divergence drops below `threshold` (the
// liberal step-1 threshold, by default 1.5 * epsilon0).
MinimalDepthResult find_minimal_complexity(const DomainPair& pair,
                                           const std::vector<int>& depth_range,
                                           const TrainConfig& cfg,
                                           double threshold);

struct DistillResult {
  MlpNetwork teacher;
  MlpNetwork student;
  double div_teacher = 0.0;
  double div_student = 0.0;
  double risk_student_teacher = 0.0;
  double gt_teacher = 0.0;  // evaluation-only
  double gt_student = 0.0;  // evaluation-only
};

// Complexity-regularized alignment: fit a minimal teacher g at depth k1,
// then a deeper student h at depth k2 > k1 against the critic divergence
// plus lambda * R[h, g] with g frozen.
DistillResult distill_train(const DomainPair& pair, int k1, int k2,
                            const TrainConfig& cfg);

}  // namespace alignlab
