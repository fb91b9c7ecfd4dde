#pragma once

#include "alignlab/common.hpp"
#include "alignlab/domains.hpp"
#include "alignlab/training.hpp"

#include <string>
#include <vector>

namespace alignlab {

struct HyperConfig {
  int depth = 2;
  int width = 16;
  int batch_size = 64;
  double learning_rate = 5e-4;

  std::string key() const;  // canonical store key
};

struct HyperSpace {
  std::vector<int> depths = {1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> widths = {8, 16, 32};
  std::vector<int> batch_sizes = {32, 64, 128};
  double lr_min = 1e-4;
  double lr_max = 4e-3;  // learning rate sampled log-uniformly

  bool empty() const;
  HyperConfig sample(Rng& rng) const;
};

// Disk-backed map from config key to the trained pair and its epoch count.
// Unknown keys yield fresh seeded initializations with T_last = 0. Layout:
// <dir>/<key>/{h1.model, h2.model, meta.json}.
class ModelStore {
 public:
  explicit ModelStore(std::string dir);

  struct Entry {
    MlpNetwork h1;
    MlpNetwork h2;
    int epochs_trained = 0;
  };

  Entry load_or_init(const HyperConfig& omega, const DomainPair& pair,
                     const TrainConfig& base, std::uint64_t seed) const;
  void store(const HyperConfig& omega, const MlpNetwork& h1,
             const MlpNetwork& h2, int epochs_trained);
  int stored_epochs(const HyperConfig& omega) const;  // -1 when absent
  const std::string& dir() const { return dir_; }

 private:
  std::string entry_dir(const HyperConfig& omega) const;
  std::string dir_;
};

// Alg. 2 plug-in: resumes (h1, h2) from the store, trains both up to T
// epochs total, stores, and returns R[h1,h2] + W(h1 o eval_A, eval_B) on
// the shared held-out samples.
double run_then_return_val_loss(const HyperConfig& omega, int T,
                                const DomainPair& pair, double lambda,
                                ModelStore& store, const TrainConfig& base);

struct HyperbandRow {
  HyperConfig config;
  double loss = 0.0;
  int final_epochs = 0;
};

struct HyperbandResult {
  std::vector<HyperbandRow> ranked;  // ascending by loss
  const HyperbandRow& best() const { return ranked.front(); }
};

// Standard hyperband driver over the unsupervised plug-in loss.
HyperbandResult hyperband_search(const HyperSpace& space, int max_resource,
                                 int eta, const DomainPair& pair,
                                 double lambda, std::uint64_t seed,
                                 ModelStore& store, const TrainConfig& base);

// Bracket arithmetic exposed for tests: (n_configs, initial_resource) per
// bracket s = s_max .. 0.
std::vector<std::pair<int, int>> hyperband_schedule(int max_resource, int eta);

}  // namespace alignlab
