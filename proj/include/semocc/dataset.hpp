#pragma once

#include <string>
#include <vector>

#include "semocc/scene.hpp"

namespace semocc {

struct FrameRecord {
  int frame_id = 0;
  std::string image_path, cloud_path, gt_path, geo_path, seg_path;
  std::vector<std::string> aux_paths;  // aux_<class>_<id>.occk
  bool annotated = false;
};

// Line format: "frame_id path_image path_cloud path_gt path_geo path_seg
// [path_aux...] annotated={0|1}"
struct DatasetManifest {
  std::vector<FrameRecord> frames;

  std::vector<int> annotated_ids() const;
};

void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);

struct DatasetMeta {
  GridSpec grid;
  int image_h = 64, image_w = 64;
  int num_classes = kDeskClassCount;
  uint64_t seed = 1;
};

// On-disk dataset handle: meta.json, calib.json, taxonomy.txt,
// train.manifest, val.manifest plus the per-frame files.
struct Dataset {
  std::string root;
  DatasetMeta meta;
  CameraCalibration calib;
  ClassTaxonomy taxonomy;
  DatasetManifest train, val;

  static Dataset open(const std::string& dir);
};

struct LoadedFrame {
  FrameRecord rec;
  Image image;
  PointCloud cloud;
  LabelGrid voxel_gt;
  LabelGrid geometry_gt;
  LabelMap primary_seg;
  std::vector<AuxiliaryMask> aux_masks;
};

LoadedFrame load_frame(const Dataset& ds, const FrameRecord& rec);

struct GenerateOptions {
  int train_frames = 60;
  int val_frames = 10;
  uint64_t seed = 1;
  double label_fraction = 0.10;
  double seg_noise_rate = 0.02;
  SceneSpec scene;  // grid/image/counts template; per-frame seeds derived
};

// Writes a full synthetic dataset (frames, manifests, meta, calib, taxonomy)
// under dir. Also drops the 20-class reference taxonomy alongside.
void generate_dataset(const std::string& dir, const GenerateOptions& opts);

}  // namespace semocc
