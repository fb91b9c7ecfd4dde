#include "alignlab/pipelines.hpp"

#include "alignlab/bounds.hpp"
#include "alignlab/distill.hpp"
#include "alignlab/hyperband.hpp"
#include "alignlab/nonunique.hpp"
#include "alignlab/stats.hpp"
#include "alignlab/transport.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

namespace alignlab {

namespace fs = std::filesystem;
using nlohmann::json;

const char* const kVersion = "0.1.0";

std::vector<std::string> pipeline_commands() {
  return {"demo-ambiguity", "depth-sweep", "stop-criterion", "per-sample",
          "hyperband",      "distill",     "nonunique",      "verify"};
}

DomainPair resolve_pair(const RunConfig& cfg) {
  DomainPair pair = make_pair(cfg.get_string("domain.pair", "twin-moons-rotation"),
                              cfg.get_int("domain.dim", 2));
  if (cfg.has("domain.sigma"))
    pair.mixture.sigma = cfg.get_double("domain.sigma", pair.mixture.sigma);
  if (cfg.has("domain.support_radius"))
    pair.support_radius =
        cfg.get_double("domain.support_radius", pair.support_radius);
  pair.mixture.validate();
  return pair;
}

TrainConfig resolve_train(const RunConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.get_int("train.epochs", t.epochs);
  t.batch_size = cfg.get_int("train.batch_size", t.batch_size);
  t.critic_steps = cfg.get_int("train.critic_steps", t.critic_steps);
  const std::string opt = cfg.get_string("train.optimizer", "rmsprop");
  if (opt == "sgd")
    t.optimizer = OptimizerKind::kSgd;
  else if (opt == "rmsprop")
    t.optimizer = OptimizerKind::kRmsprop;
  else if (opt == "adam")
    t.optimizer = OptimizerKind::kAdam;
  else
    throw ContractError("unknown optimizer '" + opt + "'");
  t.learning_rate = cfg.get_double("train.learning_rate", t.learning_rate);
  t.critic_learning_rate =
      cfg.get_double("train.critic_learning_rate", t.learning_rate);
  t.clip_c = cfg.get_double("train.clip_c", t.clip_c);
  if (cfg.get_string("train.lambda", "auto") != "auto")
    t.lambda = cfg.get_double("train.lambda", t.lambda);
  t.epsilon0 = cfg.get_double("train.epsilon0", t.epsilon0);
  t.seed = cfg.get_u64("train.seed", t.seed);
  t.n_train = cfg.get_int("train.n_train", t.n_train);
  t.n_div = cfg.get_int("train.n_div", t.n_div);
  t.eval_seed = cfg.get_u64("train.eval_seed", t.eval_seed);
  t.critic_hidden = cfg.get_int_list("train.critic_hidden", t.critic_hidden);
  t.gen_width = cfg.get_int("train.width", t.gen_width);
  t.t2 = cfg.get_int("train.t2", t.t2);
  t.validate();
  return t;
}

namespace {

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const RunConfig& cfg, double wall_time_sec) {
  json j;
  j["command"] = command;
  j["config"] = json::object();
  for (const auto& [k, v] : cfg.entries()) j["config"][k] = v;
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.get_u64("train.seed", 1);
  j["version"] = kVersion;
  j["wall_time_sec"] = wall_time_sec;
  save_text(out_dir + "/manifest.json", j.dump(2) + "\n");
}

// Runs fn(0..count-1), possibly on a small thread pool. Each call owns its
// output slot so the result is identical for any job count.
template <typename Fn>
void parallel_runs(int jobs, int count, Fn fn) {
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      fn(i);
    }
  };
  std::vector<std::future<void>> pool;
  const int n_threads = std::min(jobs, count);
  for (int t = 0; t < n_threads; ++t)
    pool.push_back(std::async(std::launch::async, worker));
  for (auto& f : pool) f.get();
}

double resolve_lambda(const RunConfig& cfg, const DomainPair& pair,
                      const TrainConfig& train, const Architecture& arch) {
  if (cfg.get_string("train.lambda", "auto") != "auto") return train.lambda;
  // Calibrate once against a default-trained h1, per the doubling search.
  TrainConfig base = train;
  base.record_checkpoints = false;
  MapperTrainer t1(pair, arch, base);
  t1.run_epochs(base.epochs);
  return select_lambda(t1.mapper(), pair, arch, base);
}

int cmd_demo_ambiguity(const RunConfig& cfg, const std::string& out_dir) {
  const DomainPair pair = resolve_pair(cfg);
  const int n = cfg.get_int("verify.n", 512);
  const std::uint64_t seed = cfg.get_u64("train.seed", 2024);
  const AmbiguityReport rep = ambiguity_demo(pair, n, seed);
  json j;
  j["pair"] = pair.name;
  j["divergence_wrong_map"] = rep.divergence_wrong_map;
  j["divergence_wrong_inverse"] = rep.divergence_wrong_inverse;
  j["circularity_a"] = rep.circularity_a;
  j["circularity_b"] = rep.circularity_b;
  j["circularity_a_residual"] = rep.circularity_a_residual;
  j["circularity_b_residual"] = rep.circularity_b_residual;
  j["gt_risk_wrong_map"] = rep.gt_risk_wrong_map;
  save_text(out_dir + "/ambiguity.json", j.dump(2) + "\n");
  std::cout << "wrong map: W=" << format_double(rep.divergence_wrong_map)
            << " circ=(" << format_double(rep.circularity_a) << ","
            << format_double(rep.circularity_b)
            << ") gt_risk=" << format_double(rep.gt_risk_wrong_map) << "\n";
  return kExitOk;
}

int cmd_depth_sweep(const RunConfig& cfg, const std::string& out_dir,
                    int jobs) {
  const DomainPair pair = resolve_pair(cfg);
  const TrainConfig train = resolve_train(cfg);
  const std::vector<int> depths =
      cfg.get_int_list("sweep.depths", {1, 2, 3, 4, 5, 6, 7, 8});
  const int n_seeds = cfg.get_int("sweep.n_seeds", 5);

  struct Row {
    int depth;
    double div, gt;
  };
  std::vector<Row> rows(depths.size() * static_cast<size_t>(n_seeds));
  parallel_runs(jobs, static_cast<int>(rows.size()), [&](int i) {
    const int depth = depths[static_cast<size_t>(i) / n_seeds];
    const int seed_idx = i % n_seeds;
    TrainConfig t = train;
    t.record_checkpoints = false;
    t.seed = derive_seed(train.seed, static_cast<std::uint64_t>(i));
    MapperTrainer trainer(pair, t.generator_arch(pair.dim, depth), t);
    trainer.run_epochs(t.epochs);
    const double div = trainer.heldout_divergence();
    const double gt = ground_truth_risk(trainer.mapper(), pair, t.n_div,
                                        derive_seed(t.eval_seed, 200));
    rows[static_cast<size_t>(i)] = Row{depth, div, gt};
    (void)seed_idx;
  });

  CsvWriter csv({"depth", "div", "gt_risk"});
  for (const Row& r : rows)
    csv.add_row({csv.cell(r.depth), csv.cell(r.div), csv.cell(r.gt)});
  csv.save(out_dir + "/depth_sweep.csv");

  CsvWriter med({"depth", "median_div", "median_gt"});
  for (size_t d = 0; d < depths.size(); ++d) {
    std::vector<double> divs, gts;
    for (int s = 0; s < n_seeds; ++s) {
      divs.push_back(rows[d * n_seeds + static_cast<size_t>(s)].div);
      gts.push_back(rows[d * n_seeds + static_cast<size_t>(s)].gt);
    }
    std::sort(divs.begin(), divs.end());
    std::sort(gts.begin(), gts.end());
    med.add_row({med.cell(depths[d]), med.cell(divs[divs.size() / 2]),
                 med.cell(gts[gts.size() / 2])});
  }
  med.save(out_dir + "/depth_sweep_median.csv");
  return kExitOk;
}

int cmd_stop_criterion(const RunConfig& cfg, const std::string& out_dir) {
  const DomainPair pair = resolve_pair(cfg);
  TrainConfig train = resolve_train(cfg);
  const int depth = cfg.get_int("train.depth", 2);
  const Architecture arch = train.generator_arch(pair.dim, depth);
  train.lambda = resolve_lambda(cfg, pair, train, arch);

  std::vector<BoundReport> reports;
  try {
    StoppingResult result = stopping_criterion(pair, arch, train);
    save_text(out_dir + "/reports.csv", bound_reports_to_csv(result.reports));
    save_text(out_dir + "/trace.csv", trace_to_csv(result.h1_trace));
    checkpoint_save(result.selected, out_dir + "/selected_h1.model");

    // Correlation ledger over the feasible checkpoints.
    std::vector<double> gt, bound, loss_gen, loss_critic;
    for (size_t i = 0; i < result.reports.size(); ++i) {
      if (!result.reports[i].feasible) continue;
      gt.push_back(result.reports[i].gt_risk);
      bound.push_back(result.reports[i].bound_value);
      loss_gen.push_back(result.h1_trace[i].aux.at("loss_gen"));
      loss_critic.push_back(result.h1_trace[i].aux.at("loss_critic"));
    }
    json j;
    j["selected_epoch"] = result.selected_epoch;
    j["lambda"] = train.lambda;
    j["feasible_checkpoints"] = gt.size();
    if (gt.size() >= 3) {
      const auto ledger = correlation_ledger(
          gt, bound, {{"loss_gen", loss_gen}, {"loss_critic", loss_critic}},
          cfg.get_int("stats.n_perms", 9999), train.eval_seed);
      save_text(out_dir + "/ledger.csv", ledger_to_csv(ledger));
      CsvWriter scatter({"x", "y"});
      for (size_t i = 0; i < gt.size(); ++i)
        scatter.add_row({scatter.cell(gt[i]), scatter.cell(bound[i])});
      scatter.save(out_dir + "/scatter.csv");
      for (const auto& row : ledger)
        if (row.is_bound) {
          j["bound_r"] = row.r;
          j["bound_p"] = row.p;
        }
    }
    save_text(out_dir + "/summary.json", j.dump(2) + "\n");
    return kExitOk;
  } catch (const NoFeasibleEpochError& e) {
    save_text(out_dir + "/reports.csv", bound_reports_to_csv(e.reports));
    std::cerr << "stop-criterion: " << e.what() << "\n";
    return kExitNoFeasible;
  }
}

int cmd_per_sample(const RunConfig& cfg, const std::string& out_dir,
                   int jobs) {
  const DomainPair pair = resolve_pair(cfg);
  const TrainConfig train = resolve_train(cfg);
  const int depth = cfg.get_int("train.depth", 2);
  const Architecture arch = train.generator_arch(pair.dim, depth);

  TrainConfig h1_cfg = train;
  h1_cfg.record_checkpoints = false;
  MapperTrainer t1(pair, arch, h1_cfg);
  t1.run_epochs(h1_cfg.epochs);
  const MlpNetwork h1 = t1.mapper();

  const int n_probes = cfg.get_int("persample.probes", 30);
  TrainConfig probe_cfg = train;
  probe_cfg.epochs = cfg.get_int("persample.epochs", 60);
  probe_cfg.lambda = cfg.get_double("persample.lambda", 1.0);
  probe_cfg.record_checkpoints = false;

  Rng probe_rng(derive_seed(train.seed, 500));
  std::vector<Vec> probes;
  for (int i = 0; i < n_probes; ++i) probes.push_back(pair.draw_a(probe_rng));

  std::vector<double> bounds(probes.size()), true_losses(probes.size());
  parallel_runs(jobs, n_probes, [&](int i) {
    TrainConfig c = probe_cfg;
    c.seed = derive_seed(train.seed, 600 + static_cast<std::uint64_t>(i));
    const PerSampleBound psb =
        per_sample_bound(h1, pair, probes[static_cast<size_t>(i)], arch, c);
    bounds[static_cast<size_t>(i)] = psb.bound;
    const Vec x = probes[static_cast<size_t>(i)];
    true_losses[static_cast<size_t>(i)] =
        (forward(h1, x) - pair.y.apply(x)).squaredNorm();
  });

  CsvWriter csv({"probe", "bound", "true_loss"});
  for (size_t i = 0; i < probes.size(); ++i)
    csv.add_row({csv.cell(static_cast<int>(i)), csv.cell(bounds[i]),
                 csv.cell(true_losses[i])});
  csv.save(out_dir + "/per_sample.csv");
  CsvWriter scatter({"x", "y"});
  for (size_t i = 0; i < probes.size(); ++i)
    scatter.add_row({scatter.cell(true_losses[i]), scatter.cell(bounds[i])});
  scatter.save(out_dir + "/scatter.csv");

  json j;
  j["probes"] = n_probes;
  j["r"] = pearson_r(bounds, true_losses);
  j["r2"] = r_squared(bounds, true_losses);
  j["p"] = p_value(bounds, true_losses, cfg.get_int("stats.n_perms", 9999),
                   train.eval_seed);
  save_text(out_dir + "/summary.json", j.dump(2) + "\n");
  return kExitOk;
}

int cmd_hyperband(const RunConfig& cfg, const std::string& out_dir) {
  const DomainPair pair = resolve_pair(cfg);
  TrainConfig train = resolve_train(cfg);
  train.record_checkpoints = false;

  HyperSpace space;
  space.depths = cfg.get_int_list("hyperband.depths", space.depths);
  space.widths = cfg.get_int_list("hyperband.widths", space.widths);
  space.batch_sizes = cfg.get_int_list("hyperband.batches", space.batch_sizes);
  space.lr_min = cfg.get_double("hyperband.lr_min", space.lr_min);
  space.lr_max = cfg.get_double("hyperband.lr_max", space.lr_max);
  const int max_resource = cfg.get_int("hyperband.max_resource", 27);
  const int eta = cfg.get_int("hyperband.eta", 3);
  const double lambda =
      cfg.get_string("train.lambda", "auto") == "auto"
          ? 1.0
          : cfg.get_double("train.lambda", 1.0);

  ModelStore store(cfg.get_string("hyperband.store_dir", out_dir + "/store"));
  const HyperbandResult result = hyperband_search(
      space, max_resource, eta, pair, lambda, train.seed, store, train);

  CsvWriter csv({"config_key", "depth", "width", "batch", "lr", "final_T",
                 "loss", "gt_risk"});
  for (const auto& row : result.ranked) {
    const auto entry = store.load_or_init(row.config, pair, train, train.seed);
    const double gt = ground_truth_risk(entry.h1, pair, train.n_div,
                                        derive_seed(train.eval_seed, 200));
    csv.add_row({row.config.key(), csv.cell(row.config.depth),
                 csv.cell(row.config.width), csv.cell(row.config.batch_size),
                 csv.cell(row.config.learning_rate),
                 csv.cell(row.final_epochs), csv.cell(row.loss),
                 csv.cell(gt)});
  }
  csv.save(out_dir + "/hyperband.csv");

  json j;
  j["best_key"] = result.best().config.key();
  j["best_loss"] = result.best().loss;
  j["evaluated"] = result.ranked.size();
  save_text(out_dir + "/summary.json", j.dump(2) + "\n");
  return kExitOk;
}

int cmd_distill(const RunConfig& cfg, const std::string& out_dir) {
  const DomainPair pair = resolve_pair(cfg);
  TrainConfig train = resolve_train(cfg);
  train.record_checkpoints = false;
  const int k2 = cfg.get_int("distill.k2", 5);
  TrainConfig dcfg = train;
  dcfg.lambda = cfg.get_double("distill.lambda", 1.0);

  int k1 = cfg.get_int("distill.k1", 0);
  try {
    if (k1 <= 0) {
      TrainConfig probe = train;
      probe.epochs = cfg.get_int("distill.probe_epochs", 150);
      std::vector<int> range;
      for (int d = 1; d < k2; ++d) range.push_back(d);
      const double threshold = 1.5 * train.epsilon0;  // liberal step-1 gate
      k1 = find_minimal_complexity(pair, range, probe, threshold).k1;
    }
    const DistillResult res = distill_train(pair, k1, k2, dcfg);

    // Unregularized baseline at the student depth, same budget.
    TrainConfig base_cfg = train;
    base_cfg.seed = derive_seed(train.seed, 33);
    MapperTrainer baseline(pair, train.generator_arch(pair.dim, k2), base_cfg);
    baseline.run_epochs(base_cfg.epochs);
    const double gt_baseline = ground_truth_risk(
        baseline.mapper(), pair, train.n_div, derive_seed(train.eval_seed, 200));

    json j;
    j["k1"] = k1;
    j["k2"] = k2;
    j["lambda"] = dcfg.lambda;
    j["div_g"] = res.div_teacher;
    j["div_h"] = res.div_student;
    j["risk_h_g"] = res.risk_student_teacher;
    j["gt_risk_g"] = res.gt_teacher;
    j["gt_risk_h"] = res.gt_student;
    save_text(out_dir + "/report.json", j.dump(2) + "\n");
    json jb;
    jb["gt_risk_unregularized_k2"] = gt_baseline;
    jb["div_unregularized_k2"] = baseline.heldout_divergence();
    save_text(out_dir + "/baseline.json", jb.dump(2) + "\n");
    checkpoint_save(res.teacher, out_dir + "/teacher.model");
    checkpoint_save(res.student, out_dir + "/student.model");
    return kExitOk;
  } catch (const NoMinimalDepthError& e) {
    CsvWriter csv({"depth", "div"});
    for (const auto& [d, div] : e.divergence_table)
      csv.add_row({csv.cell(d), csv.cell(div)});
    csv.save(out_dir + "/minimal_depth_probe.csv");
    std::cerr << "distill: " << e.what() << "\n";
    return kExitNoFeasible;
  }
}

int cmd_nonunique(const RunConfig& cfg, const std::string& out_dir) {
  RunConfig local = cfg;
  if (!cfg.has("domain.pair")) local.set("domain.pair", "multi-target");
  const DomainPair pair = resolve_pair(local);
  TrainConfig train = resolve_train(cfg);
  const int depth = cfg.get_int("train.depth", 2);
  require(depth >= 2, "nonunique: shared-encoder depth must be >= 2");
  const Architecture arch = train.generator_arch(pair.dim, depth);
  int l1 = cfg.get_int("nonunique.l1", 0);
  if (l1 <= 0) l1 = depth / 2;
  const int t1 = cfg.get_int("nonunique.t1", 1);
  if (cfg.get_string("train.lambda", "auto") == "auto") train.lambda = 1.0;

  try {
    const Alg5Result result = alg5_train(pair, arch, l1, train, t1);
    save_text(out_dir + "/reports.csv", alg5_reports_to_csv(result.reports));
    checkpoint_save(result.selected_h1, out_dir + "/selected_h1.model");
    json j;
    j["selected_epoch"] = result.selected_epoch;
    j["l1"] = l1;
    j["lambda"] = train.lambda;
    j["selected_min_target_risk"] =
        result.reports[static_cast<size_t>(result.selected_epoch - 1)]
            .min_target_risk;
    save_text(out_dir + "/summary.json", j.dump(2) + "\n");
    return kExitOk;
  } catch (const NoFeasibleEpochError& e) {
    save_text(out_dir + "/reports.csv", bound_reports_to_csv(e.reports));
    std::cerr << "nonunique: " << e.what() << "\n";
    return kExitNoFeasible;
  }
}

struct VerificationItem {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<VerificationItem> run_verification_suite(const RunConfig& cfg) {
  std::vector<VerificationItem> items;
  const int grid_steps = cfg.get_int("verify.grid_steps", 360);
  const int n_risk = cfg.get_int("verify.n_risk", 512);
  const int n_div = cfg.get_int("verify.n_div", 256);
  const double eps0 = cfg.get_double("train.epsilon0", 0.2);
  const std::uint64_t seed = cfg.get_u64("train.seed", 99);

  for (const std::string& name : registered_pair_names()) {
    const DomainPair pair = make_pair(name);
    const GridHypothesisFamily family =
        pair.y.kind == TargetMapKind::kSmoothWarp
            ? warped_rotation_grid(pair.dim, grid_steps, pair.y.alpha)
            : rotation_grid(pair.dim, grid_steps);

    const GridCheckResult lemma1 =
        verify_lemma1_grid(family, pair, eps0, n_risk, n_div, seed);
    items.push_back(
        {"lemma1_grid[" + name + "]", lemma1.passed || lemma1.vacuous,
         lemma1.vacuous
             ? "vacuous (empty feasible set)"
             : "feasible=" + std::to_string(lemma1.feasible_count) +
                   " margin=" + format_double(lemma1.worst_margin) +
                   " diameter=" + format_double(lemma1.diameter_lhs) + "<=" +
                   format_double(lemma1.diameter_rhs)});

    Rng xr(derive_seed(seed, 7));
    const Vec x = pair.draw_a(xr);
    const GridCheckResult per_sample =
        verify_per_sample_lemma_grid(family, pair, x, eps0, n_div, seed);
    items.push_back({"per_sample_lemma_grid[" + name + "]",
                     per_sample.passed || per_sample.vacuous,
                     per_sample.vacuous
                         ? "vacuous (empty feasible set)"
                         : "margin=" + format_double(per_sample.worst_margin)});

    if (pair.symmetry != SymmetryKind::kNone) {
      const AmbiguityReport amb = ambiguity_demo(pair, 512, seed);
      const bool ok = amb.circularity_a == 0.0 && amb.circularity_b == 0.0 &&
                      amb.divergence_wrong_map < 0.1 &&
                      amb.divergence_wrong_inverse < 0.1 &&
                      amb.gt_risk_wrong_map >= 1.0;
      items.push_back(
          {"ambiguity[" + name + "]", ok,
           "W=" + format_double(amb.divergence_wrong_map) +
               " gt=" + format_double(amb.gt_risk_wrong_map)});
    }
  }

  {  // IPM risk-bound check over seeded random affine/quadratic trials.
    const int trials = cfg.get_int("verify.ipm_trials", 100);
    Rng rng(derive_seed(seed, 1001));
    int failures = 0;
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
      const int dim = 2;
      Mat ay(dim, dim);
      do {
        for (int r = 0; r < dim; ++r)
          for (int c = 0; c < dim; ++c) ay(r, c) = rng.uniform(-1.5, 1.5);
      } while (std::abs(ay.determinant()) < 0.2);
      Vec by(dim);
      for (int r = 0; r < dim; ++r) by[r] = rng.uniform(-1.0, 1.0);
      AffineHypothesis h;
      h.a = ay;
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) h.a(r, c) += rng.uniform(-0.5, 0.5);
      h.b = by + Vec::NullaryExpr(dim, [&](Eigen::Index) {
              return rng.uniform(-0.5, 0.5);
            });
      QuadraticCritic d;
      Mat m(dim, dim);
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) m(r, c) = rng.uniform(-0.5, 0.5);
      d.m = 0.5 * (m + m.transpose());
      if (d.beta() > 1.0) d.m *= 1.0 / d.beta();
      d.b = Vec::NullaryExpr(dim, [&](Eigen::Index) {
        return rng.uniform(-1.0, 1.0);
      });
      GaussianSpec src;
      src.mean = Vec::NullaryExpr(dim, [&](Eigen::Index) {
        return rng.uniform(-0.5, 0.5);
      });
      src.sigma = rng.uniform(0.3, 0.8);
      const IpmBoundCheck check = verify_ipm_bound_affine(
          h, TargetMap::affine(ay, by), d, src, 6.0, 1.0, 4096,
          derive_seed(seed, 2000 + static_cast<std::uint64_t>(trial)));
      if (!check.holds) {
        ++failures;
        worst = std::max(worst, check.lhs - check.rhs);
      }
    }
    items.push_back({"ipm_bound_affine", failures == 0,
                     std::to_string(trials) + " trials, " +
                         std::to_string(failures) + " violations"});
  }

  {  // Lipschitz lemma implication over random affine pairs.
    const int trials = cfg.get_int("verify.lipschitz_trials", 500);
    Rng rng(derive_seed(seed, 3001));
    int failures = 0;
    for (int trial = 0; trial < trials; ++trial) {
      const int dim = 2;
      Mat ay(dim, dim);
      do {
        for (int r = 0; r < dim; ++r)
          for (int c = 0; c < dim; ++c) ay(r, c) = rng.uniform(-2.0, 2.0);
      } while (std::abs(ay.determinant()) < 0.1);
      // Perturbation kept inside the premise ball.
      Eigen::JacobiSVD<Mat> svd(ay.inverse());
      const double cap = 1.0 / svd.singularValues()(0);
      Mat e(dim, dim);
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) e(r, c) = rng.uniform(-1.0, 1.0);
      Eigen::JacobiSVD<Mat> esvd(e);
      if (esvd.singularValues()(0) > 0.0)
        e *= rng.uniform(0.0, 1.0) * cap / esvd.singularValues()(0);
      AffineHypothesis h{ay + e, Vec::Zero(dim)};
      AffineHypothesis y{ay, Vec::Zero(dim)};
      const LipschitzLemmaCheck check = verify_lipschitz_lemma(h, y);
      if (check.premise && !check.conclusion) ++failures;
    }
    items.push_back({"lipschitz_lemma", failures == 0,
                     std::to_string(trials) + " trials, " +
                         std::to_string(failures) + " violations"});
  }

  return items;
}

int cmd_verify(const RunConfig& cfg, const std::string& out_dir) {
  const auto items = run_verification_suite(cfg);
  bool all = true;
  json j = json::array();
  for (const auto& item : items) {
    all = all && item.passed;
    std::cout << (item.passed ? "[PASS] " : "[FAIL] ") << item.name << ": "
              << item.detail << "\n";
    j.push_back({{"name", item.name},
                 {"passed", item.passed},
                 {"detail", item.detail}});
  }
  save_text(out_dir + "/verify.json", j.dump(2) + "\n");
  return all ? kExitOk : kExitContract;
}

}  // namespace

int run_command(const std::string& command, const RunConfig& cfg,
                const std::string& out_dir, int jobs) {
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  int code = kExitUsage;
  if (command == "demo-ambiguity")
    code = cmd_demo_ambiguity(cfg, out_dir);
  else if (command == "depth-sweep")
    code = cmd_depth_sweep(cfg, out_dir, jobs);
  else if (command == "stop-criterion")
    code = cmd_stop_criterion(cfg, out_dir);
  else if (command == "per-sample")
    code = cmd_per_sample(cfg, out_dir, jobs);
  else if (command == "hyperband")
    code = cmd_hyperband(cfg, out_dir);
  else if (command == "distill")
    code = cmd_distill(cfg, out_dir);
  else if (command == "nonunique")
    code = cmd_nonunique(cfg, out_dir);
  else if (command == "verify")
    code = cmd_verify(cfg, out_dir);
  else
    throw ContractError("unknown command '" + command + "'");
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  write_manifest(out_dir, command, cfg, wall);
  return code;
}

}  // namespace alignlab
