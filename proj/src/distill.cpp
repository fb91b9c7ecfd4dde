#include "alignlab/distill.hpp"

#include "alignlab/transport.hpp"

namespace alignlab {

MinimalDepthResult find_minimal_complexity(const DomainPair& pair,
                                           const std::vector<int>& depth_range,
                                           const TrainConfig& cfg,
                                           double threshold) {
  require(!depth_range.empty(), "find_minimal_complexity: empty depth range");
  for (size_t i = 1; i < depth_range.size(); ++i)
    require(depth_range[i] > depth_range[i - 1],
            "find_minimal_complexity: depth range must be ascending");

  MinimalDepthResult out;
  for (int depth : depth_range) {
    TrainConfig probe = cfg;
    probe.record_checkpoints = false;
    probe.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(depth));
    MapperTrainer trainer(pair, cfg.generator_arch(pair.dim, depth), probe);
    trainer.run_epochs(probe.epochs);
    const double div = trainer.heldout_divergence();
    out.divergence_table.push_back({depth, div});
    if (div <= threshold) {
      out.k1 = depth;
      return out;
    }
  }
  throw NoMinimalDepthError(out.divergence_table);
}

DistillResult distill_train(const DomainPair& pair, int k1, int k2,
                            const TrainConfig& cfg) {
  require(k2 > k1, "distill_train: student depth must exceed teacher depth");
  cfg.validate();

  TrainConfig teacher_cfg = cfg;
  teacher_cfg.record_checkpoints = false;
  teacher_cfg.seed = derive_seed(cfg.seed, 31);
  MapperTrainer teacher_trainer(pair, cfg.generator_arch(pair.dim, k1),
                                teacher_cfg);
  teacher_trainer.run_epochs(teacher_cfg.epochs);

  DistillResult out;
  out.teacher = teacher_trainer.mapper();
  out.div_teacher = teacher_trainer.heldout_divergence();

  TrainConfig student_cfg = cfg;
  student_cfg.record_checkpoints = false;
  student_cfg.seed = derive_seed(cfg.seed, 32);
  // Attraction toward the frozen teacher: +lambda on the batch risk.
  MapperTrainer student_trainer(pair, cfg.generator_arch(pair.dim, k2),
                                student_cfg, &out.teacher, +cfg.lambda);
  student_trainer.run_epochs(student_cfg.epochs);

  out.student = student_trainer.mapper();
  out.div_student = student_trainer.heldout_divergence();
  out.risk_student_teacher =
      empirical_risk(out.student, out.teacher, student_trainer.eval_a());
  const std::uint64_t gt_seed = derive_seed(cfg.eval_seed, 200);
  out.gt_teacher = ground_truth_risk(out.teacher, pair, cfg.n_div, gt_seed);
  out.gt_student = ground_truth_risk(out.student, pair, cfg.n_div, gt_seed);
  return out;
}

}  // namespace alignlab
