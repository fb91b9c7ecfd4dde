#pragma once

#include "alignlab/common.hpp"
#include "alignlab/nn.hpp"

#include <string>

namespace alignlab {

enum class DivergenceMethod { kExactAssignment, kSinkhorn, kCritic };

struct DivergenceEstimate {
  double value = 0.0;
  DivergenceMethod method = DivergenceMethod::kExactAssignment;
  int n_samples = 0;
  Diagnostics diagnostics;
};

std::string divergence_method_name(DivergenceMethod m);

// Empirical 1-Wasserstein distance between two equal-size uniform empirical
// measures: the minimum over perfect matchings of the mean Euclidean cost,
// solved exactly by the assignment algorithm in O(n^3).
DivergenceEstimate exact_w1(const SampleSet& s1, const SampleSet& s2);

// Entropic-regularized transport cost <P, C> with uniform marginals.
// Log-domain iterations with epsilon scaling; converged when the L1
// marginal violation drops below 1e-8 (recorded in diagnostics, along with
// a `converged` flag when max_iters is hit first).
DivergenceEstimate sinkhorn_w1(const SampleSet& s1, const SampleSet& s2,
                               double epsilon, int max_iters = 20000);

// WGAN-style divergence: trains a weight-clipped critic by rmsprop ascent
// on mean_{s1} d - mean_{s2} d and returns the final objective divided by
// lipschitz_upper_bound(d), so the estimate targets the 1-Lipschitz dual.
DivergenceEstimate critic_divergence(const SampleSet& s1, const SampleSet& s2,
                                     const Architecture& critic_arch,
                                     int steps, double clip_c,
                                     std::uint64_t seed,
                                     double learning_rate = 5e-4);

// Closed-form IPM over quadratic critics d(z) = 0.5 z^T M z + b^T z with
// ||M||_2 <= beta_cap and ||b||_2 <= b_cap. The supremum is a function of
// the first and (raw) second empirical moment differences.
struct QuadraticIpmResult {
  double value = 0.0;
  Mat best_m;
  Vec best_b;
};

QuadraticIpmResult ipm_quadratic(const SampleSet& s1, const SampleSet& s2,
                                 double beta_cap, double b_cap);

}  // namespace alignlab
