#pragma once

#include "alignlab/common.hpp"
#include "alignlab/domains.hpp"
#include "alignlab/nn.hpp"
#include "alignlab/transport.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace alignlab {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  int critic_steps = 5;  // critic updates per generator step
  OptimizerKind optimizer = OptimizerKind::kRmsprop;
  double learning_rate = 5e-4;
  double critic_learning_rate = 5e-4;
  double clip_c = 0.1;
  double lambda = 0.0;    // trade-off weight for the paired-risk objectives
  double epsilon0 = 0.2;  // low-discrepancy threshold
  std::uint64_t seed = 1;
  int n_train = 256;  // training samples per domain
  int n_div = 256;    // held-out samples for divergence evaluation
  // Fixed evaluation stream; shared across runs so losses are comparable.
  std::uint64_t eval_seed = 0xE7A1;
  std::vector<int> critic_hidden = {32};
  int gen_width = 16;  // hidden width of generator networks
  int t2 = 20;         // adversary epochs per outer epoch (Alg. 1's T2)
  bool record_checkpoints = true;

  void validate() const;
  Architecture critic_arch(int dim) const;
  Architecture generator_arch(int dim, int depth) const;
  Architecture generator_arch(int dim, int depth, int width) const;
};

struct CheckpointRecord {
  int epoch = 0;
  double div_h = 0.0;  // exact_w1 on the fixed held-out sample pair
  Diagnostics aux;     // loss_gen, loss_critic, risk_aux
};

double empirical_risk(const MlpNetwork& f1, const MlpNetwork& f2,
                      const SampleSet& s);

// One mapper (generator) with its own critic, optimizers and seeded data
// streams. The generator objective per batch is
//   -mean d(h(x)) + risk_weight * mean l(h(x), ref(x))
// so risk_weight = -lambda gives the adversarial objective and +lambda the
// distillation objective. In per-sample mode the A-batches are drawn from
// the 50/50 mixture of the probe point and fresh D_A draws, and the risk
// term is the single-point loss at the probe.
class MapperTrainer {
 public:
  MapperTrainer(const DomainPair& pair, const Architecture& gen_arch,
                const TrainConfig& cfg, const MlpNetwork* reference = nullptr,
                double risk_weight = 0.0,
                std::optional<Vec> probe_point = std::nullopt);

  void run_epoch();
  void run_epochs(int count);
  int epochs_run() const { return epochs_run_; }
  // Held-out exact_w1 between the mapper pushforward and the B sample.
  double heldout_divergence() const;
  CheckpointRecord make_checkpoint() const;
  const MlpNetwork& mapper() const { return gen_; }
  MlpNetwork& mapper() { return gen_; }
  void set_mapper(const MlpNetwork& net);
  const std::vector<CheckpointRecord>& checkpoints() const {
    return checkpoints_;
  }
  const SampleSet& eval_a() const { return eval_a_; }
  const SampleSet& eval_b() const { return eval_b_; }
  double last_loss_gen() const { return last_loss_gen_; }
  double last_loss_critic() const { return last_loss_critic_; }
  double last_risk_aux() const { return last_risk_aux_; }

 private:
  Mat next_batch(int cursor_id);

  const DomainPair& pair_;
  TrainConfig cfg_;
  const MlpNetwork* reference_;
  double risk_weight_;
  std::optional<Vec> probe_;

  MlpNetwork gen_;
  MlpNetwork critic_;
  OptimizerState gen_opt_;
  OptimizerState critic_opt_;

  SampleSet train_a_;
  SampleSet train_b_;
  SampleSet eval_a_;  // mixed with the probe point in per-sample mode
  SampleSet eval_b_;

  // Independent shuffled cursors: 0 = generator A batches, 1 = critic A
  // batches, 2 = critic B batches.
  struct Cursor {
    std::vector<int> order;
    size_t pos = 0;
    Rng rng;
  };
  std::vector<Cursor> cursors_;
  Rng per_sample_rng_;

  int epochs_run_ = 0;
  double last_loss_gen_ = 0.0;
  double last_loss_critic_ = 0.0;
  double last_risk_aux_ = 0.0;
  std::vector<CheckpointRecord> checkpoints_;
};

struct TrainResult {
  MlpNetwork net;
  std::vector<CheckpointRecord> checkpoints;
};

// Plain WGAN fitting of the pair (Alg. 1's h1 objective).
TrainResult train_generator(const DomainPair& pair, const Architecture& arch,
                            const TrainConfig& cfg);

// Relaxed adversary: minimize the critic divergence minus
// lambda * R[h1, h2]; h1 stays fixed.
MlpNetwork train_adversary(const MlpNetwork& h1, const DomainPair& pair,
                           const Architecture& arch, const TrainConfig& cfg);

// Per-sample variant: A-batches mix the probe point with prob 0.5 and the
// risk term is the single-point loss at the probe.
MlpNetwork train_per_sample_adversary(const MlpNetwork& h1,
                                      const DomainPair& pair, const Vec& x,
                                      const Architecture& arch,
                                      const TrainConfig& cfg);

// Doubling/bisection search for the largest lambda in [2^-6, 2^6] (8
// probes) whose adversary stays below the discrepancy threshold.
double select_lambda(const MlpNetwork& h1, const DomainPair& pair,
                     const Architecture& arch, const TrainConfig& cfg);

std::string trace_to_csv(const std::vector<CheckpointRecord>& checkpoints);

}  // namespace alignlab
