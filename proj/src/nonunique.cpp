#include "alignlab/nonunique.hpp"

#include "alignlab/io.hpp"
#include "alignlab/transport.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace alignlab {

SharedEncoderPair::SharedEncoderPair(const Architecture& full_arch, int l1,
                                     Rng& rng)
    : split(full_arch, l1),
      encoder(make_network(split.encoder_arch(), rng)),
      dec1(make_network(split.decoder_arch(), rng)),
      dec2(make_network(split.decoder_arch(), rng)) {}

Mat SharedEncoderPair::h_forward(int which, const Mat& xs) const {
  const Mat code = forward(encoder, xs);
  return forward(which == 1 ? dec1 : dec2, code);
}

MlpNetwork SharedEncoderPair::h_full(int which) const {
  return MlpNetwork{split.full,
                    split.join(encoder.params,
                               which == 1 ? dec1.params : dec2.params)};
}

namespace {

// Shuffled minibatch cursor over a fixed sample set.
struct Cursor {
  const SampleSet* data;
  std::vector<int> order;
  size_t pos = 0;
  Rng rng;

  Cursor(const SampleSet& d, std::uint64_t seed)
      : data(&d), order(static_cast<size_t>(d.rows())), rng(seed) {
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
  }

  Mat next(int batch) {
    Mat out(batch, data->cols());
    for (int i = 0; i < batch; ++i) {
      if (pos >= order.size()) {
        rng.shuffle(order);
        pos = 0;
      }
      out.row(i) = data->row(order[pos++]);
    }
    return out;
  }
};

double critic_ascent(MlpNetwork& critic, OptimizerState& opt, const Mat& fake,
                     const Mat& real, double clip_c) {
  ForwardTrace tf = forward_trace(critic, fake);
  ForwardTrace tr = forward_trace(critic, real);
  const double objective = tr.output.mean() - tf.output.mean();
  if (!std::isfinite(objective))
    throw NumericError("alg5: non-finite critic objective");
  const double inv_f = 1.0 / static_cast<double>(fake.rows());
  const double inv_r = 1.0 / static_cast<double>(real.rows());
  Vec grad = backward(critic, tr, Mat::Constant(real.rows(), 1, -inv_r));
  grad += backward(critic, tf, Mat::Constant(fake.rows(), 1, inv_f));
  opt.step(critic.params, grad);
  clip_weights(critic, clip_c);
  return objective;
}

}  // namespace

Alg5Result alg5_train(const DomainPair& pair, const Architecture& arch,
                      int l1, const TrainConfig& cfg, int t1) {
  cfg.validate();
  require(!pair.targets.empty(),
          "alg5_train: pair must declare a target family");
  require(t1 >= 1, "alg5_train: t1 must be >= 1");

  Rng init_rng(derive_seed(cfg.seed, 41));
  SharedEncoderPair nets(arch, l1, init_rng);

  Rng critic_rng(derive_seed(cfg.seed, 42));
  const Architecture critic_arch = cfg.critic_arch(pair.dim);
  MlpNetwork critic1 = make_network(critic_arch, critic_rng);
  MlpNetwork critic2 = make_network(critic_arch, critic_rng);
  clip_weights(critic1, cfg.clip_c);
  clip_weights(critic2, cfg.clip_c);

  OptimizerState enc_opt = OptimizerState::make(
      cfg.optimizer, cfg.learning_rate, nets.encoder.arch.param_count());
  OptimizerState dec1_opt = OptimizerState::make(
      cfg.optimizer, cfg.learning_rate, nets.dec1.arch.param_count());
  OptimizerState dec2_opt = OptimizerState::make(
      cfg.optimizer, cfg.learning_rate, nets.dec2.arch.param_count());
  OptimizerState critic1_opt = OptimizerState::make(
      cfg.optimizer, cfg.critic_learning_rate, critic1.arch.param_count());
  OptimizerState critic2_opt = OptimizerState::make(
      cfg.optimizer, cfg.critic_learning_rate, critic2.arch.param_count());

  const SampleSet train_a =
      sample(pair, Domain::kA, cfg.n_train, derive_seed(cfg.seed, 45));
  const SampleSet train_b =
      sample(pair, Domain::kB, cfg.n_train, derive_seed(cfg.seed, 46));
  const SampleSet eval_a = sample(pair, Domain::kA, cfg.n_div, cfg.eval_seed);
  const SampleSet eval_b = sample(pair, Domain::kB, cfg.n_div, cfg.eval_seed);
  const std::uint64_t gt_seed = derive_seed(cfg.eval_seed, 200);

  Cursor gen_cur(train_a, derive_seed(cfg.seed, 50));
  Cursor critic_a_cur(train_a, derive_seed(cfg.seed, 51));
  Cursor critic_b_cur(train_b, derive_seed(cfg.seed, 52));

  const int steps_per_epoch = cfg.n_train / cfg.batch_size;
  const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);

  std::vector<Alg5Report> reports;
  std::vector<Vec> snapshots;

  for (int t = 1; t <= cfg.epochs; ++t) {
    // (1) Encoder epoch: minimize R[h1,h2] + W(h1 o D_A, D_B) w.r.t. omega.
    for (int step = 0; step < steps_per_epoch; ++step) {
      for (int c = 0; c < cfg.critic_steps; ++c) {
        const Mat fake = nets.h_forward(1, critic_a_cur.next(cfg.batch_size));
        critic_ascent(critic1, critic1_opt, fake,
                      critic_b_cur.next(cfg.batch_size), cfg.clip_c);
      }
      const Mat xa = gen_cur.next(cfg.batch_size);
      ForwardTrace enc_tr = forward_trace(nets.encoder, xa);
      ForwardTrace d1_tr = forward_trace(nets.dec1, enc_tr.output);
      ForwardTrace d2_tr = forward_trace(nets.dec2, enc_tr.output);
      ForwardTrace c_tr = forward_trace(critic1, d1_tr.output);
      Mat g_div;
      backward(critic1, c_tr, Mat::Constant(xa.rows(), 1, -inv_b), &g_div);
      const Mat diff = d1_tr.output - d2_tr.output;
      Mat g1 = g_div + 2.0 * inv_b * diff;
      Mat g2 = -2.0 * inv_b * diff;
      Mat genc1, genc2;
      backward(nets.dec1, d1_tr, g1, &genc1);  // decoder grads discarded
      backward(nets.dec2, d2_tr, g2, &genc2);
      Vec enc_grad = backward(nets.encoder, enc_tr, genc1 + genc2);
      enc_opt.step(nets.encoder.params, enc_grad);
      if (!nets.encoder.params.allFinite())
        throw NumericError("alg5: encoder parameters diverged at epoch " +
                           std::to_string(t));
    }
    // (2) Decoder-1 epochs: plain WGAN objective, theta1 only.
    for (int e = 0; e < t1; ++e) {
      for (int step = 0; step < steps_per_epoch; ++step) {
        for (int c = 0; c < cfg.critic_steps; ++c) {
          const Mat fake = nets.h_forward(1, critic_a_cur.next(cfg.batch_size));
          critic_ascent(critic1, critic1_opt, fake,
                        critic_b_cur.next(cfg.batch_size), cfg.clip_c);
        }
        const Mat xa = gen_cur.next(cfg.batch_size);
        const Mat code = forward(nets.encoder, xa);
        ForwardTrace d1_tr = forward_trace(nets.dec1, code);
        ForwardTrace c_tr = forward_trace(critic1, d1_tr.output);
        Mat g_div;
        backward(critic1, c_tr, Mat::Constant(xa.rows(), 1, -inv_b), &g_div);
        Vec dec_grad = backward(nets.dec1, d1_tr, g_div);
        dec1_opt.step(nets.dec1.params, dec_grad);
      }
    }
    // (3) Decoder-2 epochs: W(h2 o D_A, D_B) - lambda R[h1,h2], theta2 only.
    for (int e = 0; e < cfg.t2; ++e) {
      for (int step = 0; step < steps_per_epoch; ++step) {
        for (int c = 0; c < cfg.critic_steps; ++c) {
          const Mat fake = nets.h_forward(2, critic_a_cur.next(cfg.batch_size));
          critic_ascent(critic2, critic2_opt, fake,
                        critic_b_cur.next(cfg.batch_size), cfg.clip_c);
        }
        const Mat xa = gen_cur.next(cfg.batch_size);
        const Mat code = forward(nets.encoder, xa);
        const Mat h1_out = forward(nets.dec1, code);
        ForwardTrace d2_tr = forward_trace(nets.dec2, code);
        ForwardTrace c_tr = forward_trace(critic2, d2_tr.output);
        Mat g_div;
        backward(critic2, c_tr, Mat::Constant(xa.rows(), 1, -inv_b), &g_div);
        g_div += -cfg.lambda * 2.0 * inv_b * (d2_tr.output - h1_out);
        Vec dec_grad = backward(nets.dec2, d2_tr, g_div);
        dec2_opt.step(nets.dec2.params, dec_grad);
        if (!nets.dec2.params.allFinite())
          throw NumericError("alg5: decoder-2 parameters diverged at epoch " +
                             std::to_string(t));
      }
    }

    Alg5Report rep;
    rep.report.epoch = t;
    rep.report.div_h1 = exact_w1(nets.h_forward(1, eval_a), eval_b).value;
    rep.report.div_h2 = exact_w1(nets.h_forward(2, eval_a), eval_b).value;
    rep.report.pair_risk =
        (nets.h_forward(1, eval_a) - nets.h_forward(2, eval_a))
            .rowwise()
            .squaredNorm()
            .mean();
    rep.report.bound_value = rep.report.pair_risk + rep.report.div_h1;
    rep.report.feasible = rep.report.div_h1 <= cfg.epsilon0 &&
                          rep.report.div_h2 <= cfg.epsilon0;
    const MlpNetwork h1_now = nets.h_full(1);
    rep.report.gt_risk = ground_truth_risk(h1_now, pair, cfg.n_div, gt_seed);
    rep.min_target_risk = multi_target_gt_risk(h1_now, pair, cfg.n_div, gt_seed);
    reports.push_back(rep);
    snapshots.push_back(h1_now.params);
  }

  std::vector<BoundReport> plain;
  for (const auto& r : reports) plain.push_back(r.report);
  const int sel = select_feasible_argmin(
      plain, [](const BoundReport& r) { return r.bound_value; });

  Alg5Result out{MlpNetwork{arch, snapshots[static_cast<size_t>(sel)]},
                 reports[static_cast<size_t>(sel)].report.epoch,
                 std::move(reports), std::move(nets)};
  return out;
}

double multi_target_gt_risk(const MlpNetwork& h, const DomainPair& pair,
                            int n, std::uint64_t seed) {
  const SampleSet xs = sample(pair, Domain::kA, n, seed);
  const Mat pred = forward(h, xs);
  std::vector<TargetMap> targets = pair.targets;
  if (targets.empty()) targets.push_back(pair.y);
  double best = std::numeric_limits<double>::infinity();
  for (const TargetMap& y : targets) {
    const double risk =
        (pred - y.apply(xs)).rowwise().squaredNorm().mean();
    best = std::min(best, risk);
  }
  return best;
}

std::string alg5_reports_to_csv(const std::vector<Alg5Report>& reports) {
  std::ostringstream os;
  os << "epoch,pair_risk,div_h1,div_h2,bound,feasible,gt_risk,min_target_risk\n";
  for (const auto& r : reports) {
    os << r.report.epoch << ',' << format_double(r.report.pair_risk) << ','
       << format_double(r.report.div_h1) << ','
       << format_double(r.report.div_h2) << ','
       << format_double(r.report.bound_value) << ','
       << (r.report.feasible ? 1 : 0) << ','
       << format_double(r.report.gt_risk) << ','
       << format_double(r.min_target_risk) << '\n';
  }
  return os.str();
}

}  // namespace alignlab
