#include "semocc/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "semocc/geometric.hpp"
#include "semocc/optim.hpp"

namespace semocc {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> interval_sample(int frame_count, double fraction) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw std::invalid_argument("interval_sample: fraction must lie in (0,1]");
  std::vector<int> out;
  for (int k = 0;; ++k) {
    int idx = static_cast<int>(std::lround(static_cast<double>(k) / fraction));
    if (idx >= frame_count) break;
    if (out.empty() || idx != out.back()) out.push_back(idx);
  }
  return out;
}

int TrainConfig::scaled(int reference_epochs) const {
  return std::max(1, static_cast<int>(std::lround(epoch_scale * reference_epochs)));
}

AugmentationPolicy TrainConfig::student_policy() const {
  if (student_augmentation == "off") return AugmentationPolicy::off();
  if (student_augmentation == "weak") return AugmentationPolicy::student_weak();
  if (student_augmentation == "middle") return AugmentationPolicy::student_middle();
  if (student_augmentation == "strong") return AugmentationPolicy::student_strong();
  throw std::invalid_argument("unknown student augmentation level '" + student_augmentation + "'");
}

ProjectionMode TrainConfig::projection() const {
  if (projection_mode == "plain") return ProjectionMode::kPlain;
  if (projection_mode == "distance_weighted") return ProjectionMode::kDistanceWeighted;
  throw std::invalid_argument("unknown projection mode '" + projection_mode + "'");
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  json j = json::parse(is);
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs_semantic = j.value("epochs_semantic", c.epochs_semantic);
  c.epochs_geo_teacher = j.value("epochs_geo_teacher", c.epochs_geo_teacher);
  c.epochs_geo_student = j.value("epochs_geo_student", c.epochs_geo_student);
  c.epochs_fusion = j.value("epochs_fusion", c.epochs_fusion);
  c.epoch_scale = j.value("epoch_scale", c.epoch_scale);
  c.label_fraction = j.value("label_fraction", c.label_fraction);
  c.confidence_tau = j.value("confidence_tau", c.confidence_tau);
  c.exchange_rho = j.value("exchange_rho", c.exchange_rho);
  c.seed = j.value("seed", c.seed);
  c.sem_c0 = j.value("sem_c0", c.sem_c0);
  c.sem_c1 = j.value("sem_c1", c.sem_c1);
  c.sem_c2 = j.value("sem_c2", c.sem_c2);
  c.sem_c3 = j.value("sem_c3", c.sem_c3);
  c.sem_c3d = j.value("sem_c3d", c.sem_c3d);
  c.geo_channels = j.value("geo_channels", c.geo_channels);
  c.fusion_channels = j.value("fusion_channels", c.fusion_channels);
  c.student_augmentation = j.value("student_augmentation", c.student_augmentation);
  c.use_teacher_in_fusion = j.value("use_teacher_in_fusion", c.use_teacher_in_fusion);
  c.disable_semantic_branch = j.value("disable_semantic_branch", c.disable_semantic_branch);
  c.disable_projection_supervision =
      j.value("disable_projection_supervision", c.disable_projection_supervision);
  c.fusion_zero_annotations = j.value("fusion_zero_annotations", c.fusion_zero_annotations);
  c.projection_mode = j.value("projection_mode", c.projection_mode);
  return c;
}

void save_train_config(const std::string& path, const TrainConfig& c) {
  json j{{"learning_rate", c.learning_rate},
         {"weight_decay", c.weight_decay},
         {"batch_size", c.batch_size},
         {"epochs_semantic", c.epochs_semantic},
         {"epochs_geo_teacher", c.epochs_geo_teacher},
         {"epochs_geo_student", c.epochs_geo_student},
         {"epochs_fusion", c.epochs_fusion},
         {"epoch_scale", c.epoch_scale},
         {"label_fraction", c.label_fraction},
         {"confidence_tau", c.confidence_tau},
         {"exchange_rho", c.exchange_rho},
         {"seed", c.seed},
         {"sem_c0", c.sem_c0},
         {"sem_c1", c.sem_c1},
         {"sem_c2", c.sem_c2},
         {"sem_c3", c.sem_c3},
         {"sem_c3d", c.sem_c3d},
         {"geo_channels", c.geo_channels},
         {"fusion_channels", c.fusion_channels},
         {"student_augmentation", c.student_augmentation},
         {"use_teacher_in_fusion", c.use_teacher_in_fusion},
         {"disable_semantic_branch", c.disable_semantic_branch},
         {"disable_projection_supervision", c.disable_projection_supervision},
         {"fusion_zero_annotations", c.fusion_zero_annotations},
         {"projection_mode", c.projection_mode}};
  std::ofstream os(path);
  os << j.dump(2) << "\n";
}

std::string format_metric_line(const std::string& phase, int epoch, const std::string& split,
                               const EvalResult& eval) {
  char buf[64];
  std::string line = phase;
  std::snprintf(buf, sizeof(buf), " %d %s %.6f %.6f", epoch, split.c_str(), eval.iou, eval.miou);
  line += buf;
  for (double v : eval.per_class) {
    if (std::isnan(v)) {
      line += " na";
    } else {
      std::snprintf(buf, sizeof(buf), " %.6f", v);
      line += buf;
    }
  }
  return line;
}

namespace {

std::string frame_tag(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", id);
  return buf;
}

LabelGrid argmax_grid(const Tensor& logits) {
  const int m = logits.dim(0);
  const int nx = logits.dim(1), ny = logits.dim(2), nz = logits.dim(3);
  const int64_t cells = static_cast<int64_t>(nx) * ny * nz;
  LabelGrid out = make_label_grid(nx, ny, nz, 0);
  const auto& d = logits.data();
  for (int64_t v = 0; v < cells; ++v) {
    int best = 0;
    double bv = d[static_cast<size_t>(v)];
    for (int c = 1; c < m; ++c) {
      double val = d[static_cast<size_t>(c * cells + v)];
      if (val > bv) {
        bv = val;
        best = c;
      }
    }
    out.labels[static_cast<size_t>(v)] = static_cast<uint16_t>(best);
  }
  return out;
}

std::vector<int> shuffled_indices(int n, uint64_t seed) {
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  Rng rng(seed);
  for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

}  // namespace

struct Trainer::Impl {
  struct PreparedFrame {
    LoadedFrame raw;
    LabelMap aligned;      // merged pseudo labels
    LabelGrid lifted;      // pseudo labels lifted into the grid
    bool annotated = false;
    Tensor image_tensor;   // (3,h,w) constant
  };

  Dataset ds;
  TrainConfig cfg;
  SemanticConfig sem_cfg;
  GeometricConfig geo_cfg;
  FusionConfig fus_cfg;
  std::vector<int> annotated_ids;  // via interval_sample over the train split
  std::vector<std::string> log;

  std::vector<PreparedFrame> train_frames, val_frames;
  std::vector<double> pixel_weights, voxel_sem_weights, voxel_gt_weights, geo_weights;

  Impl(Dataset dataset, TrainConfig config) : ds(std::move(dataset)), cfg(std::move(config)) {
    sem_cfg.image_h = ds.meta.image_h;
    sem_cfg.image_w = ds.meta.image_w;
    sem_cfg.num_classes = ds.meta.num_classes;
    sem_cfg.c0 = cfg.sem_c0;
    sem_cfg.c1 = cfg.sem_c1;
    sem_cfg.c2 = cfg.sem_c2;
    sem_cfg.c3 = cfg.sem_c3;
    sem_cfg.c3d = cfg.sem_c3d;
    geo_cfg.channels = cfg.geo_channels;
    fus_cfg.channels = cfg.fusion_channels;
    fus_cfg.num_classes = ds.meta.num_classes;
    fus_cfg.rho = cfg.exchange_rho;
    annotated_ids = interval_sample(static_cast<int>(ds.train.frames.size()), cfg.label_fraction);
    prepare_frames();
    compute_weights();
  }

  bool is_annotated(int index) const {
    return std::find(annotated_ids.begin(), annotated_ids.end(), index) != annotated_ids.end();
  }

  PreparedFrame prepare(const FrameRecord& rec, bool annotated) const {
    PreparedFrame f;
    f.raw = load_frame(ds, rec);
    f.aligned = align_pseudo_labels(f.raw.primary_seg, f.raw.aux_masks, ds.taxonomy);
    f.lifted = lift_label_map(f.aligned, ds.meta.grid, ds.calib);
    f.annotated = annotated;
    f.image_tensor = Tensor::from_data({3, f.raw.image.h, f.raw.image.w}, f.raw.image.rgb);
    return f;
  }

  void prepare_frames() {
    train_frames.reserve(ds.train.frames.size());
    for (size_t i = 0; i < ds.train.frames.size(); ++i)
      train_frames.push_back(prepare(ds.train.frames[i], is_annotated(static_cast<int>(i))));
    val_frames.reserve(ds.val.frames.size());
    for (const auto& rec : ds.val.frames) val_frames.push_back(prepare(rec, true));
  }

  void compute_weights() {
    const int m = ds.meta.num_classes;
    std::vector<int64_t> px(static_cast<size_t>(m), 0), vx_sem(static_cast<size_t>(m), 0);
    std::vector<int64_t> vx_gt(static_cast<size_t>(m), 0), geo(2, 0);
    for (const auto& f : train_frames) {
      for (uint16_t l : f.aligned.labels)
        if (l != kIgnoreLabel) ++px[l];
      for (uint16_t l : f.lifted.labels)
        if (l != kIgnoreLabel) ++vx_sem[l];
      if (f.annotated) {
        for (uint16_t l : f.raw.voxel_gt.labels)
          if (l != kIgnoreLabel) ++vx_gt[l];
        for (uint16_t l : f.raw.geometry_gt.labels) ++geo[l];
      }
    }
    pixel_weights = class_frequency_weights(px);
    voxel_sem_weights = class_frequency_weights(vx_sem);
    voxel_gt_weights = class_frequency_weights(vx_gt);
    geo_weights = class_frequency_weights(geo);
  }

  // ---- phase I ----
  void run_phase_semantic(const std::string& out_dir) {
    fs::create_directories(out_dir);
    Rng rng(derive_seed(cfg.seed, 11));
    SemanticNet2d net2d(sem_cfg, rng);
    SemanticNet3d net3d(sem_cfg, rng);
    auto params = net2d.params().tensors();
    for (auto& t : net3d.params().tensors()) params.push_back(t);
    AdamW opt(params, {cfg.learning_rate, cfg.weight_decay});
    const int epochs = cfg.scaled(cfg.epochs_semantic);
    for (int epoch = 0; epoch < epochs; ++epoch) {
      auto order = shuffled_indices(static_cast<int>(train_frames.size()),
                                    derive_seed(cfg.seed, 12, static_cast<uint64_t>(epoch)));
      for (int idx : order) {
        const auto& f = train_frames[static_cast<size_t>(idx)];
        auto vox = voxelize(f.raw.cloud, ds.meta.grid,
                            derive_seed(cfg.seed, 13, static_cast<uint64_t>(idx)));
        auto out2d = net2d.forward(f.image_tensor);
        auto out3d = net3d.forward(densify(vox, ds.meta.grid));
        Tensor loss = semantic_loss(out2d.logits, f.aligned, out3d.logits, f.lifted,
                                    point_count_grid(vox, ds.meta.grid), pixel_weights,
                                    voxel_sem_weights);
        // zero-weight anchor: parameters must carry grads even when a term
        // supervises nothing on this frame
        loss = add(loss, scale(add(sum_all(out2d.logits), sum_all(out3d.logits)), 0.0));
        loss.backward();
        opt.step();
      }
      log.push_back(format_metric_line("I", epoch, "val", eval_semantic(net3d)));
    }
    ParamMap pm;
    net2d.params().export_params(pm, "sem2d.");
    net3d.params().export_params(pm, "sem3d.");
    save_checkpoint(out_dir + "/semantic.ckpt", pm);
  }

  EvalResult eval_semantic(const SemanticNet3d& net3d) {
    ConfusionMatrix cm(ds.meta.num_classes);
    for (const auto& f : val_frames) {
      auto vox = voxelize(f.raw.cloud, ds.meta.grid, derive_seed(cfg.seed, 14));
      auto out = net3d.forward(densify(vox, ds.meta.grid));
      cm.add(argmax_grid(out.logits).labels, f.raw.voxel_gt.labels);
    }
    return evaluate_confusion(cm);
  }

  // ---- phase II ----
  void train_geometry(GeometryNet& net, const std::vector<int>& frame_ids,
                      const std::map<int, LabelGrid>& labels,
                      const std::map<int, KeepMask>& masks, const AugmentationPolicy& policy,
                      int epochs, uint64_t seed_tag, const std::string& phase_name) {
    AdamW opt(net.params().tensors(), {cfg.learning_rate, cfg.weight_decay});
    for (int epoch = 0; epoch < epochs; ++epoch) {
      auto order = shuffled_indices(static_cast<int>(frame_ids.size()),
                                    derive_seed(cfg.seed, seed_tag, static_cast<uint64_t>(epoch)));
      for (int oi : order) {
        int idx = frame_ids[static_cast<size_t>(oi)];
        const auto& f = train_frames[static_cast<size_t>(idx)];
        TrainSample sample{f.raw.image, f.raw.cloud};
        uint64_t aseed = derive_seed(cfg.seed, seed_tag + 1, static_cast<uint64_t>(epoch),
                                     static_cast<uint64_t>(idx));
        TrainSample aug = augment(sample, policy, aseed);
        auto out = net.forward({aug}, derive_seed(cfg.seed, seed_tag + 2, static_cast<uint64_t>(idx)),
                               policy.voxel_sample_count);
        const LabelGrid& lbl = labels.at(idx);
        const std::vector<uint8_t>* mask = nullptr;
        std::vector<uint8_t> mask_store;
        auto mit = masks.find(idx);
        if (mit != masks.end()) {
          mask_store = mit->second.keep;
          mask = &mask_store;
        }
        Tensor loss = add(geometry_loss(out.logits, lbl.labels, geo_weights, mask),
                          scale(sum_all(out.logits), 0.0));
        loss.backward();
        opt.step();
      }
      log.push_back(format_metric_line(phase_name, epoch, "val", eval_geometry(net)));
    }
  }

  EvalResult eval_geometry(const GeometryNet& net) {
    ConfusionMatrix cm(2);
    for (const auto& f : val_frames) {
      TrainSample sample{f.raw.image, f.raw.cloud};
      auto out = net.forward({sample}, derive_seed(cfg.seed, 29));
      cm.add(argmax_grid(out.logits).labels, f.raw.geometry_gt.labels);
    }
    return evaluate_confusion(cm);
  }

  void run_phase_geo_teacher(const std::string& out_dir) {
    fs::create_directories(out_dir);
    Rng rng(derive_seed(cfg.seed, 21));
    GeometryNet teacher(geo_cfg, ds.meta.grid, ds.calib, rng);
    std::map<int, LabelGrid> labels;
    for (int idx : annotated_ids) labels[idx] = train_frames[static_cast<size_t>(idx)].raw.geometry_gt;
    train_geometry(teacher, annotated_ids, labels, {}, AugmentationPolicy::teacher(),
                   cfg.scaled(cfg.epochs_geo_teacher), 22, "II-T");
    ParamMap pm;
    teacher.params().export_params(pm, "geo.");
    save_checkpoint(out_dir + "/geo_teacher.ckpt", pm);

    // pseudo-label cache over the unannotated frames
    fs::create_directories(out_dir + "/pseudo");
    for (size_t idx = 0; idx < train_frames.size(); ++idx) {
      if (is_annotated(static_cast<int>(idx))) continue;
      const auto& f = train_frames[idx];
      TrainSample sample{f.raw.image, f.raw.cloud};
      TrainSample weak = augment(sample, AugmentationPolicy::teacher(),
                                 derive_seed(cfg.seed, 25, idx));
      auto out = teacher.forward({weak}, derive_seed(cfg.seed, 26, idx),
                                 AugmentationPolicy::teacher().voxel_sample_count);
      FilteredPrediction fp = confidence_filter(out.logits, cfg.confidence_tau);
      std::string tag = frame_tag(static_cast<int>(idx));
      save_label_grid(out_dir + "/pseudo/pseudo_" + tag + ".occg", fp.labels);
      save_keep_mask(out_dir + "/pseudo/pseudo_" + tag + ".occk", fp.keep);
    }
  }

  void run_phase_geo_student(const std::string& out_dir) {
    // the merged stream needs the teacher's pseudo cache
    std::map<int, LabelGrid> labels;
    std::map<int, KeepMask> masks;
    std::vector<int> frame_ids;
    for (size_t idx = 0; idx < train_frames.size(); ++idx) {
      frame_ids.push_back(static_cast<int>(idx));
      if (is_annotated(static_cast<int>(idx))) {
        labels[static_cast<int>(idx)] = train_frames[idx].raw.geometry_gt;
      } else {
        std::string tag = frame_tag(static_cast<int>(idx));
        std::string lpath = out_dir + "/pseudo/pseudo_" + tag + ".occg";
        if (!fs::exists(lpath))
          throw std::runtime_error("missing pseudo-label cache " + lpath +
                                   "; run the geo-teacher phase first");
        labels[static_cast<int>(idx)] = load_label_grid(lpath);
        masks[static_cast<int>(idx)] = load_keep_mask(out_dir + "/pseudo/pseudo_" + tag + ".occk");
      }
    }
    Rng rng(derive_seed(cfg.seed, 31));
    GeometryNet student(geo_cfg, ds.meta.grid, ds.calib, rng);
    train_geometry(student, frame_ids, labels, masks, cfg.student_policy(),
                   cfg.scaled(cfg.epochs_geo_student), 32, "II-S");
    ParamMap pm;
    student.params().export_params(pm, "geo.");
    save_checkpoint(out_dir + "/geo_student.ckpt", pm);
  }

  // ---- phase III ----
  struct FullModel {
    SemanticNet2d net2d;
    SemanticNet3d net3d;
    GeometryNet geo;
    FusionModel fusion;
    ScatterProjector projector;

    FullModel(const SemanticConfig& sc, const GeometricConfig& gc, const FusionConfig& fc,
              const GridSpec& grid, const CameraCalibration& calib, uint64_t seed)
        : net2d(sc, *make_rng(seed, 11)), net3d(sc, *make_rng(seed, 11, 1)),
          geo(gc, grid, calib, *make_rng(seed, 21)),
          fusion(fc, {grid.nx, grid.ny, grid.nz}, sc.c3 + sc.c3d, gc.channels,
                 *make_rng(seed, 41)),
          projector(ScatterProjector::build(grid, calib)) {}

    // small helper keeping member-init deterministic and readable
    static std::unique_ptr<Rng> make_rng(uint64_t seed, uint64_t a, uint64_t b = 0) {
      return std::make_unique<Rng>(derive_seed(seed, a, b));
    }
  };

  FullModel build_full_model() const {
    return FullModel(sem_cfg, geo_cfg, fus_cfg, ds.meta.grid, ds.calib, cfg.seed);
  }

  void import_full(FullModel& model, const ParamMap& pm) const {
    model.net2d.params().import_params(pm, "sem2d.");
    model.net3d.params().import_params(pm, "sem3d.");
    model.geo.params().import_params(pm, "geo.");
    model.fusion.params().import_params(pm, "fus.");
  }

  FusionModel::Output full_forward(FullModel& model, const PreparedFrame& f,
                                   uint64_t voxel_seed, Tensor* logits_3d_out = nullptr,
                                   Tensor* logits_2d_out = nullptr) const {
    auto vox = voxelize(f.raw.cloud, ds.meta.grid, voxel_seed);
    Tensor lifted_img, lidar_feats;
    if (cfg.disable_semantic_branch) {
      lifted_img = Tensor::zeros({sem_cfg.c3, ds.meta.grid.nx, ds.meta.grid.ny, ds.meta.grid.nz});
      lidar_feats = Tensor::zeros({sem_cfg.c3d, ds.meta.grid.nx, ds.meta.grid.ny, ds.meta.grid.nz});
    } else {
      auto out2d = model.net2d.forward(f.image_tensor);
      auto out3d = model.net3d.forward(densify(vox, ds.meta.grid));
      lifted_img = lift_feature_map(out2d.features, ds.meta.grid, ds.calib);
      lidar_feats = out3d.features;
      if (logits_2d_out) *logits_2d_out = out2d.logits;
      if (logits_3d_out) *logits_3d_out = out3d.logits;
    }
    TrainSample sample{f.raw.image, f.raw.cloud};
    auto geo_out = model.geo.forward({sample}, derive_seed(voxel_seed, 7));
    return model.fusion.forward(lifted_img, lidar_feats, geo_out.feature_grid, model.projector,
                                cfg.projection());
  }

  void run_phase_fusion(const std::string& out_dir) {
    std::string sem_path = out_dir + "/semantic.ckpt";
    if (!fs::exists(sem_path))
      throw std::runtime_error("missing " + sem_path + "; run the semantic phase first");
    std::string geo_path =
        out_dir + (cfg.use_teacher_in_fusion ? "/geo_teacher.ckpt" : "/geo_student.ckpt");
    if (!fs::exists(geo_path))
      throw std::runtime_error("missing " + geo_path + "; run the " +
                               (cfg.use_teacher_in_fusion ? "geo-teacher" : "geo-student") +
                               " phase first");
    FullModel model = build_full_model();
    ParamMap sem_pm = load_checkpoint(sem_path);
    model.net2d.params().import_params(sem_pm, "sem2d.");
    model.net3d.params().import_params(sem_pm, "sem3d.");
    ParamMap geo_pm = load_checkpoint(geo_path);
    model.geo.params().import_params(geo_pm, "geo.");
    // freeze the geometric branch: no updates, no gradient propagation
    for (auto& t : model.geo.params().tensors()) t.set_requires_grad(false);

    std::vector<Tensor> params = model.fusion.params().tensors();
    if (!cfg.disable_semantic_branch) {
      for (auto& t : model.net2d.params().tensors()) params.push_back(t);
      for (auto& t : model.net3d.params().tensors()) params.push_back(t);
    }
    AdamW opt(params, {cfg.learning_rate, cfg.weight_decay});

    LabelGrid ignore_grid = make_label_grid(ds.meta.grid.nx, ds.meta.grid.ny, ds.meta.grid.nz,
                                            kIgnoreLabel);
    const int epochs = cfg.scaled(cfg.epochs_fusion);
    for (int epoch = 0; epoch < epochs; ++epoch) {
      auto order = shuffled_indices(static_cast<int>(train_frames.size()),
                                    derive_seed(cfg.seed, 42, static_cast<uint64_t>(epoch)));
      for (int idx : order) {
        const auto& f = train_frames[static_cast<size_t>(idx)];
        Tensor logits_3d, logits_2d;
        uint64_t vseed = derive_seed(cfg.seed, 43, static_cast<uint64_t>(idx));
        auto out = full_forward(model, f, vseed, &logits_3d, &logits_2d);
        bool use_gt = f.annotated && !cfg.fusion_zero_annotations;
        const LabelGrid& y_lbl = use_gt ? f.raw.voxel_gt : ignore_grid;
        Tensor loss = occupancy_loss(out.voxel_logits, y_lbl.labels, voxel_gt_weights);
        loss = add(loss, scale(add(sum_all(out.voxel_logits), sum_all(out.projected_logits)), 0.0));
        if (!cfg.disable_projection_supervision)
          loss = add(loss, weighted_cross_entropy(out.projected_logits, f.aligned.labels,
                                                  pixel_weights));
        if (!cfg.disable_semantic_branch) {
          auto vox = voxelize(f.raw.cloud, ds.meta.grid, vseed);
          Tensor sem = semantic_loss(logits_2d, f.aligned, logits_3d, f.lifted,
                                     point_count_grid(vox, ds.meta.grid), pixel_weights,
                                     voxel_sem_weights);
          loss = add(loss, sem);
          loss = add(loss, scale(add(sum_all(logits_2d), sum_all(logits_3d)), 0.0));
        }
        loss.backward();
        opt.step();
      }
      log.push_back(format_metric_line("III", epoch, "val", eval_full(model)));
    }

    ParamMap pm;
    model.fusion.params().export_params(pm, "fus.");
    save_checkpoint(out_dir + "/fusion.ckpt", pm);
    ParamMap full;
    model.net2d.params().export_params(full, "sem2d.");
    model.net3d.params().export_params(full, "sem3d.");
    model.geo.params().export_params(full, "geo.");
    model.fusion.params().export_params(full, "fus.");
    save_checkpoint(out_dir + "/model_full.ckpt", full);
  }

  EvalResult eval_full(FullModel& model) const {
    ConfusionMatrix cm(ds.meta.num_classes);
    for (size_t i = 0; i < val_frames.size(); ++i) {
      const auto& f = val_frames[i];
      auto out = full_forward(model, f, derive_seed(cfg.seed, 49, i));
      cm.add(argmax_grid(out.voxel_logits).labels, f.raw.voxel_gt.labels);
    }
    return evaluate_confusion(cm);
  }

  const std::vector<PreparedFrame>& split_frames(const std::string& split) const {
    if (split == "train") return train_frames;
    if (split == "val") return val_frames;
    throw std::invalid_argument("unknown split '" + split + "'");
  }
};

Trainer::Trainer(Dataset dataset, TrainConfig config)
    : impl_(std::make_unique<Impl>(std::move(dataset), std::move(config))) {}
Trainer::~Trainer() = default;
Trainer::Trainer(Trainer&&) noexcept = default;

void Trainer::run_phase_semantic(const std::string& out_dir) { impl_->run_phase_semantic(out_dir); }
void Trainer::run_phase_geo_teacher(const std::string& out_dir) { impl_->run_phase_geo_teacher(out_dir); }
void Trainer::run_phase_geo_student(const std::string& out_dir) { impl_->run_phase_geo_student(out_dir); }
void Trainer::run_phase_fusion(const std::string& out_dir) { impl_->run_phase_fusion(out_dir); }

void Trainer::run_all(const std::string& out_dir) {
  run_phase_semantic(out_dir);
  run_phase_geo_teacher(out_dir);
  run_phase_geo_student(out_dir);
  run_phase_fusion(out_dir);
}

EvalResult Trainer::evaluate_checkpoint(const std::string& ckpt_path, const std::string& split) {
  auto model = impl_->build_full_model();
  impl_->import_full(model, load_checkpoint(ckpt_path));
  ConfusionMatrix cm(impl_->ds.meta.num_classes);
  const auto& frames = impl_->split_frames(split);
  for (size_t i = 0; i < frames.size(); ++i) {
    auto out = impl_->full_forward(model, frames[i], derive_seed(impl_->cfg.seed, 49, i));
    cm.add(argmax_grid(out.voxel_logits).labels, frames[i].raw.voxel_gt.labels);
  }
  return evaluate_confusion(cm);
}

EvalResult Trainer::evaluate_untrained(const std::string& split) {
  auto model = impl_->build_full_model();
  ConfusionMatrix cm(impl_->ds.meta.num_classes);
  const auto& frames = impl_->split_frames(split);
  for (size_t i = 0; i < frames.size(); ++i) {
    auto out = impl_->full_forward(model, frames[i], derive_seed(impl_->cfg.seed, 49, i));
    cm.add(argmax_grid(out.voxel_logits).labels, frames[i].raw.voxel_gt.labels);
  }
  return evaluate_confusion(cm);
}

LabelGrid Trainer::predict_frame(const std::string& ckpt_path, int frame_index,
                                 const std::string& split) {
  auto model = impl_->build_full_model();
  impl_->import_full(model, load_checkpoint(ckpt_path));
  const auto& frames = impl_->split_frames(split);
  if (frame_index < 0 || frame_index >= static_cast<int>(frames.size()))
    throw std::invalid_argument("frame index out of range");
  auto out = impl_->full_forward(model, frames[static_cast<size_t>(frame_index)],
                                 derive_seed(impl_->cfg.seed, 49, static_cast<uint64_t>(frame_index)));
  return argmax_grid(out.voxel_logits);
}

const std::vector<std::string>& Trainer::metric_log() const { return impl_->log; }

void Trainer::write_metric_log(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& line : impl_->log) os << line << "\n";
}

const Dataset& Trainer::dataset() const { return impl_->ds; }
const TrainConfig& Trainer::config() const { return impl_->cfg; }

}  // namespace semocc
