#pragma once

#include "alignlab/bounds.hpp"
#include "alignlab/common.hpp"
#include "alignlab/domains.hpp"
#include "alignlab/nn.hpp"
#include "alignlab/training.hpp"

#include <vector>

namespace alignlab {

// Two hypotheses sharing one encoder object: h_i = dec_i o encoder. The
// encoder is aliased, not copied, so an omega update is visible through
// both forward paths.
struct SharedEncoderPair {
  EncoderDecoderSplit split;
  MlpNetwork encoder;
  MlpNetwork dec1;
  MlpNetwork dec2;

  SharedEncoderPair(const Architecture& full_arch, int l1, Rng& rng);

  Mat h_forward(int which, const Mat& xs) const;  // which in {1, 2}
  // Materializes h_which as a plain full network (same forward map).
  MlpNetwork h_full(int which) const;
};

struct Alg5Report {
  BoundReport report;
  double min_target_risk = 0.0;
};

struct Alg5Result {
  MlpNetwork selected_h1;
  int selected_epoch = 0;
  std::vector<Alg5Report> reports;
  SharedEncoderPair final_pair;
};

// Three-way alternating training for the non-unique case: per outer epoch,
// (1) one epoch updating the shared encoder against R[h1,h2] plus h1's
// critic divergence (divergence gradient flows only through h1's decoder,
// theta frozen), (2) t1 epochs on decoder 1 (WGAN objective), (3) cfg.t2
// epochs on decoder 2 (relaxed adversarial objective). Selects the feasible
// epoch minimizing R[h1,h2] + div(h1).
Alg5Result alg5_train(const DomainPair& pair_with_targets,
                      const Architecture& arch, int l1, const TrainConfig& cfg,
                      int t1 = 1);

// min over the target family of the ground-truth risk, on a shared seeded
// sample; reduces to ground_truth_risk when the family is the singleton.
double multi_target_gt_risk(const MlpNetwork& h, const DomainPair& pair,
                            int n, std::uint64_t seed);

std::string alg5_reports_to_csv(const std::vector<Alg5Report>& reports);

}  // namespace alignlab
