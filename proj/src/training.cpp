#include "alignlab/training.hpp"

#include "alignlab/io.hpp"

#include <cmath>
#include <sstream>

namespace alignlab {

void TrainConfig::validate() const {
  require(epochs >= 1, "train config: epochs must be >= 1");
  require(batch_size >= 2, "train config: batch_size must be >= 2");
  require(critic_steps >= 1, "train config: critic_steps must be >= 1");
  require(lambda >= 0.0, "train config: lambda must be >= 0");
  require(epsilon0 >= 0.0, "train config: epsilon0 must be >= 0");
  require(n_train >= batch_size, "train config: n_train must cover a batch");
  require(n_div >= 2, "train config: n_div must be >= 2");
  require(t2 >= 1, "train config: t2 must be >= 1");
}

Architecture TrainConfig::critic_arch(int dim) const {
  Architecture a;
  a.input_dim = dim;
  a.hidden_widths = critic_hidden;
  a.output_dim = 1;
  a.activation = Activation::kLeakyRelu;
  a.leaky_slope = 0.2;
  a.output_activation = OutputActivation::kIdentity;
  return a;
}

Architecture TrainConfig::generator_arch(int dim, int depth) const {
  return generator_arch(dim, depth, gen_width);
}

Architecture TrainConfig::generator_arch(int dim, int depth, int width) const {
  require(depth >= 1, "generator depth must be >= 1");
  Architecture a;
  a.input_dim = dim;
  a.hidden_widths.assign(static_cast<size_t>(depth - 1), width);
  a.output_dim = dim;
  a.activation = Activation::kTanh;
  a.output_activation = OutputActivation::kIdentity;
  return a;
}

double empirical_risk(const MlpNetwork& f1, const MlpNetwork& f2,
                      const SampleSet& s) {
  require(f1.arch.input_dim == f2.arch.input_dim &&
              f1.arch.output_dim == f2.arch.output_dim,
          "empirical_risk: networks must share dimensions");
  const Mat y1 = forward(f1, s);
  const Mat y2 = forward(f2, s);
  return (y1 - y2).rowwise().squaredNorm().mean();
}

MapperTrainer::MapperTrainer(const DomainPair& pair,
                             const Architecture& gen_arch,
                             const TrainConfig& cfg,
                             const MlpNetwork* reference, double risk_weight,
                             std::optional<Vec> probe_point)
    : pair_(pair),
      cfg_(cfg),
      reference_(reference),
      risk_weight_(risk_weight),
      probe_(std::move(probe_point)),
      gen_(make_zero_network(gen_arch)),
      critic_(make_zero_network(cfg.critic_arch(pair.dim))),
      gen_opt_(OptimizerState::make(cfg.optimizer, cfg.learning_rate,
                                    gen_arch.param_count())),
      critic_opt_(OptimizerState::make(cfg.optimizer, cfg.critic_learning_rate,
                                       cfg.critic_arch(pair.dim).param_count())),
      per_sample_rng_(derive_seed(cfg.seed, 7)) {
  cfg_.validate();
  require(gen_arch.input_dim == pair.dim && gen_arch.output_dim == pair.dim,
          "generator architecture must map dim_a -> dim_b");
  if (reference_ != nullptr)
    require(reference_->arch.input_dim == pair.dim &&
                reference_->arch.output_dim == pair.dim,
            "reference network dimension mismatch");
  if (probe_.has_value())
    require(probe_->size() == pair.dim, "probe point dimension mismatch");

  Rng init_rng(derive_seed(cfg_.seed, 3));
  gen_ = make_network(gen_arch, init_rng);
  Rng critic_rng(derive_seed(cfg_.seed, 4));
  critic_ = make_network(cfg_.critic_arch(pair.dim), critic_rng);
  clip_weights(critic_, cfg_.clip_c);

  train_a_ = sample(pair_, Domain::kA, cfg_.n_train, derive_seed(cfg_.seed, 5));
  train_b_ = sample(pair_, Domain::kB, cfg_.n_train, derive_seed(cfg_.seed, 6));
  eval_b_ = sample(pair_, Domain::kB, cfg_.n_div, cfg_.eval_seed);
  if (probe_.has_value()) {
    // Held-out sample of D^x_A: half the probe point, half fresh draws.
    eval_a_ = sample(pair_, Domain::kA, cfg_.n_div, cfg_.eval_seed);
    const int half = cfg_.n_div / 2;
    for (int i = 0; i < half; ++i) eval_a_.row(i) = probe_->transpose();
  } else {
    eval_a_ = sample(pair_, Domain::kA, cfg_.n_div, cfg_.eval_seed);
  }

  for (int c = 0; c < 3; ++c) {
    Cursor cur{std::vector<int>(static_cast<size_t>(cfg_.n_train)), 0,
               Rng(derive_seed(cfg_.seed, 10 + static_cast<std::uint64_t>(c)))};
    for (int i = 0; i < cfg_.n_train; ++i) cur.order[static_cast<size_t>(i)] = i;
    cur.rng.shuffle(cur.order);
    cursors_.push_back(std::move(cur));
  }
}

Mat MapperTrainer::next_batch(int cursor_id) {
  Cursor& cur = cursors_[static_cast<size_t>(cursor_id)];
  const SampleSet& source = cursor_id == 2 ? train_b_ : train_a_;
  Mat batch(cfg_.batch_size, pair_.dim);
  for (int i = 0; i < cfg_.batch_size; ++i) {
    if (cur.pos >= cur.order.size()) {
      cur.rng.shuffle(cur.order);
      cur.pos = 0;
    }
    batch.row(i) = source.row(cur.order[cur.pos++]);
  }
  if (cursor_id != 2 && probe_.has_value()) {
    // D^x_A: each element independently equals the probe with prob 0.5.
    for (int i = 0; i < cfg_.batch_size; ++i)
      if (per_sample_rng_.uniform() < 0.5) batch.row(i) = probe_->transpose();
  }
  return batch;
}

void MapperTrainer::run_epoch() {
  const int steps_per_epoch = cfg_.n_train / cfg_.batch_size;
  const double inv_b = 1.0 / static_cast<double>(cfg_.batch_size);
  double loss_gen_sum = 0.0, loss_critic_sum = 0.0, risk_sum = 0.0;
  for (int step = 0; step < steps_per_epoch; ++step) {
    // Critic ascent.
    for (int c = 0; c < cfg_.critic_steps; ++c) {
      const Mat fake = forward(gen_, next_batch(1));
      const Mat real = next_batch(2);
      ForwardTrace tf = forward_trace(critic_, fake);
      ForwardTrace tr = forward_trace(critic_, real);
      const double objective = tr.output.mean() - tf.output.mean();
      if (!std::isfinite(objective))
        throw NumericError("training: non-finite critic loss at epoch " +
                           std::to_string(epochs_run_ + 1));
      // Maximize mean d(real) - mean d(fake).
      Vec grad = backward(critic_, tr, Mat::Constant(real.rows(), 1, -inv_b));
      grad += backward(critic_, tf, Mat::Constant(fake.rows(), 1, inv_b));
      critic_opt_.step(critic_.params, grad);
      clip_weights(critic_, cfg_.clip_c);
      loss_critic_sum += objective;
    }
    // Generator descent.
    const Mat xa = next_batch(0);
    ForwardTrace tg = forward_trace(gen_, xa);
    ForwardTrace tc = forward_trace(critic_, tg.output);
    const double loss_gen = -tc.output.mean();
    if (!std::isfinite(loss_gen))
      throw NumericError("training: non-finite generator loss at epoch " +
                         std::to_string(epochs_run_ + 1));
    Mat grad_fake;
    backward(critic_, tc, Mat::Constant(xa.rows(), 1, -inv_b), &grad_fake);
    if (reference_ != nullptr && risk_weight_ != 0.0) {
      if (probe_.has_value()) {
        // Single-point risk term at the probe; handled by a separate pass
        // below since it does not depend on this batch.
      } else {
        const Mat ref_out = forward(*reference_, xa);
        risk_sum += (tg.output - ref_out).rowwise().squaredNorm().mean();
        grad_fake += risk_weight_ * 2.0 * inv_b * (tg.output - ref_out);
      }
    }
    Vec gen_grad = backward(gen_, tg, grad_fake);
    if (reference_ != nullptr && risk_weight_ != 0.0 && probe_.has_value()) {
      const Vec hx = forward(gen_, *probe_);
      const Vec rx = forward(*reference_, *probe_);
      risk_sum += (hx - rx).squaredNorm();
      gen_grad += backward(gen_, Vec(risk_weight_ * 2.0 * (hx - rx)), *probe_);
    }
    gen_opt_.step(gen_.params, gen_grad);
    if (!gen_.params.allFinite())
      throw NumericError("training: generator parameters diverged at epoch " +
                         std::to_string(epochs_run_ + 1));
    loss_gen_sum += loss_gen;
  }
  ++epochs_run_;
  const double denom = static_cast<double>(steps_per_epoch);
  last_loss_gen_ = loss_gen_sum / denom;
  last_loss_critic_ = loss_critic_sum / (denom * cfg_.critic_steps);
  last_risk_aux_ = risk_sum / denom;
  if (cfg_.record_checkpoints) checkpoints_.push_back(make_checkpoint());
}

void MapperTrainer::run_epochs(int count) {
  for (int i = 0; i < count; ++i) run_epoch();
}

double MapperTrainer::heldout_divergence() const {
  return exact_w1(forward(gen_, eval_a_), eval_b_).value;
}

CheckpointRecord MapperTrainer::make_checkpoint() const {
  CheckpointRecord rec;
  rec.epoch = epochs_run_;
  rec.div_h = heldout_divergence();
  rec.aux["loss_gen"] = last_loss_gen_;
  rec.aux["loss_critic"] = last_loss_critic_;
  rec.aux["risk_aux"] = last_risk_aux_;
  return rec;
}

void MapperTrainer::set_mapper(const MlpNetwork& net) {
  require(net.arch == gen_.arch, "set_mapper: architecture mismatch");
  gen_ = net;
}

TrainResult train_generator(const DomainPair& pair, const Architecture& arch,
                            const TrainConfig& cfg) {
  cfg.validate();
  MapperTrainer trainer(pair, arch, cfg);
  trainer.run_epochs(cfg.epochs);
  return TrainResult{trainer.mapper(), trainer.checkpoints()};
}

MlpNetwork train_adversary(const MlpNetwork& h1, const DomainPair& pair,
                           const Architecture& arch, const TrainConfig& cfg) {
  cfg.validate();
  MapperTrainer trainer(pair, arch, cfg, &h1, -cfg.lambda);
  trainer.run_epochs(cfg.epochs);
  return trainer.mapper();
}

MlpNetwork train_per_sample_adversary(const MlpNetwork& h1,
                                      const DomainPair& pair, const Vec& x,
                                      const Architecture& arch,
                                      const TrainConfig& cfg) {
  cfg.validate();
  require(x.norm() <= pair.support_radius,
          "per-sample probe must lie inside the support");
  MapperTrainer trainer(pair, arch, cfg, &h1, -cfg.lambda, x);
  trainer.run_epochs(cfg.epochs);
  return trainer.mapper();
}

double select_lambda(const MlpNetwork& h1, const DomainPair& pair,
                     const Architecture& arch, const TrainConfig& cfg) {
  // Bisection on log2(lambda) in [-6, 6] for the largest value whose
  // adversary still reaches the discrepancy threshold; 8 probes.
  auto feasible = [&](double lambda) {
    TrainConfig probe_cfg = cfg;
    probe_cfg.lambda = lambda;
    probe_cfg.epochs = cfg.t2;
    probe_cfg.record_checkpoints = false;
    MapperTrainer trainer(pair, arch, probe_cfg, &h1, -lambda);
    trainer.run_epochs(probe_cfg.epochs);
    return trainer.heldout_divergence() <= cfg.epsilon0;
  };
  double lo = -6.0, hi = 6.0;
  if (!feasible(std::exp2(lo))) return std::exp2(lo);
  if (feasible(std::exp2(hi))) return std::exp2(hi);
  for (int probe = 0; probe < 8; ++probe) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(std::exp2(mid)))
      lo = mid;
    else
      hi = mid;
  }
  return std::exp2(lo);
}

std::string trace_to_csv(const std::vector<CheckpointRecord>& checkpoints) {
  std::ostringstream os;
  os << "epoch,div_h,risk_aux,loss_gen,loss_critic\n";
  for (const auto& c : checkpoints) {
    os << c.epoch << ',' << format_double(c.div_h) << ','
       << format_double(c.aux.count("risk_aux") ? c.aux.at("risk_aux") : 0.0)
       << ','
       << format_double(c.aux.count("loss_gen") ? c.aux.at("loss_gen") : 0.0)
       << ','
       << format_double(c.aux.count("loss_critic") ? c.aux.at("loss_critic")
                                                   : 0.0)
       << '\n';
  }
  return os.str();
}

}  // namespace alignlab
