#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "semocc/dataset.hpp"
#include "semocc/training.hpp"

namespace fs = std::filesystem;
using namespace semocc;

namespace {

int cmd_gen(const std::string& out, int frames, int val_frames, uint64_t seed,
            double label_fraction, double noise) {
  GenerateOptions opts;
  opts.train_frames = frames;
  opts.val_frames = val_frames;
  opts.seed = seed;
  opts.label_fraction = label_fraction;
  opts.seg_noise_rate = noise;
  generate_dataset(out, opts);
  std::cout << "wrote " << frames << " train + " << val_frames << " val frames to " << out
            << "\n";
  return 0;
}

TrainConfig resolve_config(const std::string& config_path) {
  if (config_path.empty()) return TrainConfig{};
  return load_train_config(config_path);
}

int cmd_train(const std::string& phase, const std::string& config_path, const std::string& data,
              const std::string& out) {
  Dataset ds = Dataset::open(data);
  TrainConfig cfg = resolve_config(config_path);
  Trainer trainer(std::move(ds), cfg);
  if (phase == "semantic") {
    trainer.run_phase_semantic(out);
  } else if (phase == "geo-teacher") {
    trainer.run_phase_geo_teacher(out);
  } else if (phase == "geo-student") {
    trainer.run_phase_geo_student(out);
  } else if (phase == "fusion") {
    trainer.run_phase_fusion(out);
  } else {
    std::cerr << "unknown phase '" << phase
              << "' (expected semantic|geo-teacher|geo-student|fusion)\n";
    return 2;
  }
  // append this phase's metric lines
  fs::create_directories(out);
  std::string log_path = out + "/metrics.log";
  std::ofstream os(log_path, std::ios::app);
  for (const auto& line : trainer.metric_log()) os << line << "\n";
  std::cout << "phase " << phase << " done; metrics appended to " << log_path << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& split,
             const std::string& config_path) {
  Dataset ds = Dataset::open(data);
  TrainConfig cfg = resolve_config(config_path);
  Trainer trainer(std::move(ds), cfg);
  EvalResult res = trainer.evaluate_checkpoint(ckpt, split);
  std::cout << format_metric_line("eval", 0, split, res) << "\n";
  std::printf("IoU  %.2f\nmIoU %.2f\n", res.iou, res.miou);
  return 0;
}

int cmd_viz(const std::string& ckpt, const std::string& data, int frame,
            const std::string& split, const std::string& out, const std::string& config_path) {
  Dataset ds = Dataset::open(data);
  TrainConfig cfg = resolve_config(config_path);
  GridSpec grid = ds.meta.grid;
  Trainer trainer(std::move(ds), cfg);
  LabelGrid pred = trainer.predict_frame(ckpt, frame, split);
  fs::create_directories(out);
  const auto& palette = desk_palette();
  // one image per z slice
  for (int k = 0; k < grid.nz; ++k) {
    Image img = make_image(grid.nx, grid.ny);
    for (int i = 0; i < grid.nx; ++i)
      for (int j = 0; j < grid.ny; ++j) {
        uint16_t cls = pred.at(i, j, k);
        if (cls >= palette.size()) cls = 0;
        img.at(0, i, j) = palette[cls][0] / 255.0;
        img.at(1, i, j) = palette[cls][1] / 255.0;
        img.at(2, i, j) = palette[cls][2] / 255.0;
      }
    char name[64];
    std::snprintf(name, sizeof(name), "%s/slice_%02d.ppm", out.c_str(), k);
    save_ppm(name, img);
  }
  // colored point export of occupied voxel centers
  std::vector<std::array<double, 3>> pts;
  std::vector<std::array<uint8_t, 3>> colors;
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.ny; ++j)
      for (int k = 0; k < grid.nz; ++k) {
        uint16_t cls = pred.at(i, j, k);
        if (cls == 0 || cls >= palette.size()) continue;
        pts.push_back(grid.center(i, j, k));
        colors.push_back(palette[cls]);
      }
  save_ply(out + "/occupancy.ply", pts, colors);
  std::cout << "wrote " << grid.nz << " slices and " << pts.size() << " voxel points to " << out
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale semantic occupancy pipeline"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  int frames = 60, val_frames = 10;
  uint64_t seed = 1;
  double label_fraction = 0.10, noise = 0.02;
  std::string out_dir;
  gen->add_option("--frames", frames, "training frame count");
  gen->add_option("--val-frames", val_frames, "validation frame count");
  gen->add_option("--seed", seed, "dataset seed");
  gen->add_option("--label-fraction", label_fraction, "annotated fraction (interval sampled)");
  gen->add_option("--noise", noise, "segmentation label noise rate");
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "run one training phase");
  std::string phase, config_path, data_dir, run_dir;
  train->add_option("--phase", phase, "semantic|geo-teacher|geo-student|fusion")->required();
  train->add_option("--config", config_path, "training config JSON");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", run_dir, "run directory (shared across phases)")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a full checkpoint");
  std::string ckpt, split = "val";
  eval->add_option("--ckpt", ckpt, "model_full checkpoint")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--split", split, "train|val");
  eval->add_option("--config", config_path, "training config JSON");

  auto* viz = app.add_subcommand("viz", "export prediction slices and a point cloud");
  int frame = 0;
  viz->add_option("--ckpt", ckpt, "model_full checkpoint")->required();
  viz->add_option("--data", data_dir, "dataset directory")->required();
  viz->add_option("--frame", frame, "frame index");
  viz->add_option("--split", split, "train|val");
  viz->add_option("--out", out_dir, "output directory")->required();
  viz->add_option("--config", config_path, "training config JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(out_dir, frames, val_frames, seed, label_fraction, noise);
    if (train->parsed()) return cmd_train(phase, config_path, data_dir, run_dir);
    if (eval->parsed()) return cmd_eval(ckpt, data_dir, split, config_path);
    if (viz->parsed()) return cmd_viz(ckpt, data_dir, frame, split, out_dir, config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
