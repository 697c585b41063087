#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "semocc/formats.hpp"
#include "semocc/geometry.hpp"
#include "semocc/taxonomy.hpp"

namespace semocc {

// Desk-scale class set: a 12-class subset of the 20-class reference
// taxonomy, renumbered contiguously.
enum DeskClass : uint16_t {
  kClassFree = 0,
  kClassCar = 1,
  kClassTruck = 2,
  kClassRoad = 3,
  kClassSidewalk = 4,
  kClassBuilding = 5,
  kClassFence = 6,
  kClassVegetation = 7,
  kClassTrunk = 8,
  kClassTerrain = 9,
  kClassPole = 10,
  kClassTrafficSign = 11,
};
constexpr int kDeskClassCount = 12;

// Source-ID taxonomy for the synthetic renderer; source IDs reuse the
// universal segmentation IDs of the reference table, trunk comes from an
// auxiliary mask.
ClassTaxonomy desk_taxonomy();

const std::array<std::array<uint8_t, 3>, kDeskClassCount>& desk_palette();

struct SceneSpec {
  uint64_t seed = 1;
  GridSpec grid = GridSpec::desk_default();
  int image_h = 64, image_w = 64;
  double focal = 56.0;

  // procedural street scene: ground bands plus primitive objects
  int building_count = 3;
  int car_count = 3;
  int truck_count = 1;
  int tree_count = 3;   // trunk cylinder + vegetation blob
  int pole_count = 2;   // pole cylinder + traffic-sign board
  int fence_count = 2;

  // LiDAR beam pattern and return model
  int azimuth_count = 160;
  int elevation_count = 30;
  double max_range = 20.0;
  double beam_dropout = 0.04;  // per-return sensor dropout

  // fraction of primary-segmentation pixels replaced with random source IDs
  double seg_noise_rate = 0.0;
};

struct FrameBundle {
  Image image;
  PointCloud cloud;
  LabelGrid voxel_gt;     // task classes, solid fill plus raycast surface stamps
  LabelGrid geometry_gt;  // 1 where voxel_gt != free
  LabelMap primary_seg;   // source IDs; trunk pixels carry the vegetation ID
  std::vector<AuxiliaryMask> aux_masks;
  CameraCalibration calib;
  // voxels stamped from camera hits whose center projects back onto the
  // stamping pixel (used by the scene-consistency checks)
  std::vector<uint8_t> camera_surface;
};

// Deterministic per spec.seed; camera and LiDAR poses are fixed by the grid,
// object layout is drawn from the seed. Throws on a degenerate camera.
FrameBundle generate_scene(const SceneSpec& spec);

}  // namespace semocc
