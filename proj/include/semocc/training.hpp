#pragma once

#include <memory>
#include <string>
#include <vector>

#include "semocc/augment.hpp"
#include "semocc/dataset.hpp"
#include "semocc/fusion.hpp"
#include "semocc/metrics.hpp"
#include "semocc/semantic.hpp"

namespace semocc {

// Evenly spaced annotated-frame selection: {round(k/fraction)} inside
// [0, frame_count), first frame always included.
std::vector<int> interval_sample(int frame_count, double fraction);

struct TrainConfig {
  double learning_rate = 2e-4;
  double weight_decay = 1e-4;
  int batch_size = 1;

  // reference epoch counts, scaled by epoch_scale (minimum 1 per phase)
  int epochs_semantic = 40;
  int epochs_geo_teacher = 100;
  int epochs_geo_student = 40;
  int epochs_fusion = 40;
  double epoch_scale = 0.1;

  double label_fraction = 0.10;
  double confidence_tau = 0.85;
  double exchange_rho = 0.5;
  uint64_t seed = 1;

  // network widths
  int sem_c0 = 8, sem_c1 = 12, sem_c2 = 16, sem_c3 = 16, sem_c3d = 16;
  int geo_channels = 8;
  int fusion_channels = 8;

  // experiment switches
  std::string student_augmentation = "strong";  // off|weak|middle|strong
  bool use_teacher_in_fusion = false;
  bool disable_semantic_branch = false;
  bool disable_projection_supervision = false;
  bool fusion_zero_annotations = false;
  std::string projection_mode = "plain";  // plain|distance_weighted

  int scaled(int reference_epochs) const;
  AugmentationPolicy student_policy() const;
  ProjectionMode projection() const;
};

TrainConfig load_train_config(const std::string& path);
void save_train_config(const std::string& path, const TrainConfig& cfg);

std::string format_metric_line(const std::string& phase, int epoch, const std::string& split,
                               const EvalResult& eval);

// Runs the phased training strategy over an on-disk dataset. Each phase
// writes its checkpoint under out_dir and appends metric-log lines; later
// phases require the earlier checkpoints and the pseudo-label cache.
class Trainer {
 public:
  Trainer(Dataset dataset, TrainConfig config);
  ~Trainer();
  Trainer(Trainer&&) noexcept;

  void run_phase_semantic(const std::string& out_dir);
  void run_phase_geo_teacher(const std::string& out_dir);   // + pseudo cache
  void run_phase_geo_student(const std::string& out_dir);
  void run_phase_fusion(const std::string& out_dir);        // + model_full.ckpt

  // Convenience: all four phases in order.
  void run_all(const std::string& out_dir);

  EvalResult evaluate_checkpoint(const std::string& ckpt_path, const std::string& split);
  // Evaluation of a freshly initialized (untrained) pipeline.
  EvalResult evaluate_untrained(const std::string& split);
  // Voxel class prediction of the full pipeline on one frame.
  LabelGrid predict_frame(const std::string& ckpt_path, int frame_index,
                          const std::string& split);

  const std::vector<std::string>& metric_log() const;
  void write_metric_log(const std::string& path) const;

  const Dataset& dataset() const;
  const TrainConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace semocc
