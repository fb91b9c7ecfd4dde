#include "alignlab/hyperband.hpp"

#include "alignlab/io.hpp"
#include "alignlab/transport.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace alignlab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string HyperConfig::key() const {
  return "d" + std::to_string(depth) + "_w" + std::to_string(width) + "_b" +
         std::to_string(batch_size) + "_lr" + format_double(learning_rate);
}

bool HyperSpace::empty() const {
  return depths.empty() || widths.empty() || batch_sizes.empty() ||
         !(lr_min > 0.0) || lr_max < lr_min;
}

HyperConfig HyperSpace::sample(Rng& rng) const {
  HyperConfig c;
  c.depth = depths[static_cast<size_t>(
      rng.uniform_int(0, static_cast<int>(depths.size()) - 1))];
  c.width = widths[static_cast<size_t>(
      rng.uniform_int(0, static_cast<int>(widths.size()) - 1))];
  c.batch_size = batch_sizes[static_cast<size_t>(
      rng.uniform_int(0, static_cast<int>(batch_sizes.size()) - 1))];
  c.learning_rate =
      std::exp(rng.uniform(std::log(lr_min), std::log(lr_max)));
  return c;
}

ModelStore::ModelStore(std::string dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

std::string ModelStore::entry_dir(const HyperConfig& omega) const {
  return dir_ + "/" + sanitize_filename(omega.key());
}

int ModelStore::stored_epochs(const HyperConfig& omega) const {
  const std::string meta = entry_dir(omega) + "/meta.json";
  if (!fs::exists(meta)) return -1;
  std::ifstream in(meta);
  json j;
  in >> j;
  return j.at("epochs_trained").get<int>();
}

ModelStore::Entry ModelStore::load_or_init(const HyperConfig& omega,
                                           const DomainPair& pair,
                                           const TrainConfig& base,
                                           std::uint64_t seed) const {
  const int stored = stored_epochs(omega);
  if (stored >= 0) {
    Entry e;
    e.h1 = checkpoint_load(entry_dir(omega) + "/h1.model");
    e.h2 = checkpoint_load(entry_dir(omega) + "/h2.model");
    e.epochs_trained = stored;
    return e;
  }
  // Fresh pair, seeded from the config key so every configuration gets its
  // own deterministic initialization.
  const Architecture arch =
      base.generator_arch(pair.dim, omega.depth, omega.width);
  std::uint64_t key_seed = seed;
  for (char c : omega.key())
    key_seed = derive_seed(key_seed, static_cast<std::uint64_t>(c));
  Rng r1(derive_seed(key_seed, 1));
  Rng r2(derive_seed(key_seed, 2));
  Entry e;
  e.h1 = make_network(arch, r1);
  e.h2 = make_network(arch, r2);
  e.epochs_trained = 0;
  return e;
}

void ModelStore::store(const HyperConfig& omega, const MlpNetwork& h1,
                       const MlpNetwork& h2, int epochs_trained) {
  const std::string dir = entry_dir(omega);
  fs::create_directories(dir);
  checkpoint_save(h1, dir + "/h1.model");
  checkpoint_save(h2, dir + "/h2.model");
  json j;
  j["epochs_trained"] = epochs_trained;
  j["key"] = omega.key();
  j["depth"] = omega.depth;
  j["width"] = omega.width;
  j["batch_size"] = omega.batch_size;
  j["learning_rate"] = omega.learning_rate;
  std::ofstream out(dir + "/meta.json");
  out << j.dump(2) << '\n';
}

double run_then_return_val_loss(const HyperConfig& omega, int T,
                                const DomainPair& pair, double lambda,
                                ModelStore& store, const TrainConfig& base) {
  require(T >= 0, "run_then_return_val_loss: T must be >= 0");
  ModelStore::Entry entry = store.load_or_init(omega, pair, base, base.seed);
  require(T >= entry.epochs_trained,
          "run_then_return_val_loss: requested T=" + std::to_string(T) +
              " below stored T_last=" + std::to_string(entry.epochs_trained));
  const int remaining = T - entry.epochs_trained;

  TrainConfig cfg = base;
  cfg.batch_size = omega.batch_size;
  cfg.learning_rate = omega.learning_rate;
  cfg.epochs = std::max(remaining, 1);
  cfg.record_checkpoints = false;
  // Critics are not persisted; their streams are keyed on the resume point
  // so a given (omega, T_last) always trains identically.
  std::uint64_t key_seed = base.seed;
  for (char c : omega.key())
    key_seed = derive_seed(key_seed, static_cast<std::uint64_t>(c));
  const std::uint64_t resume_seed =
      derive_seed(key_seed, static_cast<std::uint64_t>(entry.epochs_trained));

  const Architecture arch =
      base.generator_arch(pair.dim, omega.depth, omega.width);

  TrainConfig cfg1 = cfg;
  cfg1.seed = derive_seed(resume_seed, 1);
  MapperTrainer t1(pair, arch, cfg1);
  t1.set_mapper(entry.h1);
  t1.run_epochs(remaining);

  TrainConfig cfg2 = cfg;
  cfg2.seed = derive_seed(resume_seed, 2);
  MapperTrainer t2(pair, arch, cfg2, &t1.mapper(), -lambda);
  t2.set_mapper(entry.h2);
  t2.run_epochs(remaining);

  store.store(omega, t1.mapper(), t2.mapper(), T);

  // Eq. 17 plug-in on the shared evaluation streams.
  const double pair_risk =
      empirical_risk(t1.mapper(), t2.mapper(), t1.eval_a());
  const double div =
      exact_w1(forward(t1.mapper(), t1.eval_a()), t1.eval_b()).value;
  return pair_risk + div;
}

std::vector<std::pair<int, int>> hyperband_schedule(int max_resource, int eta) {
  require(max_resource >= 1, "hyperband: max_resource must be >= 1");
  require(eta >= 2, "hyperband: eta must be >= 2");
  const int s_max = static_cast<int>(
      std::floor(std::log(static_cast<double>(max_resource)) /
                 std::log(static_cast<double>(eta))));
  std::vector<std::pair<int, int>> out;
  for (int s = s_max; s >= 0; --s) {
    const int n = static_cast<int>(std::ceil(
        static_cast<double>(s_max + 1) / static_cast<double>(s + 1) *
        std::pow(static_cast<double>(eta), s)));
    const int r = static_cast<int>(std::round(
        max_resource * std::pow(static_cast<double>(eta), -s)));
    out.push_back({n, std::max(r, 1)});
  }
  return out;
}

HyperbandResult hyperband_search(const HyperSpace& space, int max_resource,
                                 int eta, const DomainPair& pair,
                                 double lambda, std::uint64_t seed,
                                 ModelStore& store, const TrainConfig& base) {
  require(!space.empty(), "hyperband: hyperparameter space is empty");
  const auto schedule = hyperband_schedule(max_resource, eta);
  const int s_max = static_cast<int>(schedule.size()) - 1;

  Rng rng(derive_seed(seed, 0xB4Dull));
  std::map<std::string, HyperbandRow> evaluated;

  for (int bracket = 0; bracket <= s_max; ++bracket) {
    const int s = s_max - bracket;
    const auto [n0, r0] = schedule[static_cast<size_t>(bracket)];
    std::vector<HyperConfig> configs;
    for (int i = 0; i < n0; ++i) configs.push_back(space.sample(rng));
    for (int i = 0; i <= s; ++i) {
      const int n_i = std::max(
          1, static_cast<int>(std::floor(
                 n0 * std::pow(static_cast<double>(eta), -i))));
      const int r_i = static_cast<int>(std::round(
          r0 * std::pow(static_cast<double>(eta), i)));
      if (static_cast<int>(configs.size()) > n_i)
        configs.resize(static_cast<size_t>(n_i));
      std::vector<std::pair<double, size_t>> scored;
      for (size_t c = 0; c < configs.size(); ++c) {
        const double loss = run_then_return_val_loss(configs[c], r_i, pair,
                                                     lambda, store, base);
        scored.push_back({loss, c});
        evaluated[configs[c].key()] = HyperbandRow{configs[c], loss, r_i};
      }
      std::stable_sort(scored.begin(), scored.end(),
                       [](const auto& a, const auto& b) {
                         return a.first < b.first;
                       });
      const int keep =
          i == s ? static_cast<int>(configs.size())
                 : std::max(1, static_cast<int>(std::floor(
                                   static_cast<double>(configs.size()) / eta)));
      std::vector<HyperConfig> next;
      for (int k = 0; k < keep && k < static_cast<int>(scored.size()); ++k)
        next.push_back(configs[scored[static_cast<size_t>(k)].second]);
      configs = std::move(next);
    }
  }

  HyperbandResult result;
  for (const auto& [key, row] : evaluated) result.ranked.push_back(row);
  std::stable_sort(result.ranked.begin(), result.ranked.end(),
                   [](const HyperbandRow& a, const HyperbandRow& b) {
                     return a.loss < b.loss;
                   });
  return result;
}

}  // namespace alignlab
