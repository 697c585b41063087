#pragma once

#include <cstdint>

#include "semocc/formats.hpp"
#include "semocc/geometry.hpp"

namespace semocc {

enum class AugStrength { kOff, kWeak, kMiddle, kStrong };

// Weak-to-strong augmentation ladder. Image ops apply in declaration order;
// LiDAR dropout removes points before voxelization. voxel_sample_count caps
// the per-voxel sampling during voxelization (<= 35).
struct AugmentationPolicy {
  AugStrength brightness = AugStrength::kOff;
  AugStrength hsv_shift = AugStrength::kOff;
  AugStrength motion_blur = AugStrength::kOff;
  AugStrength weather = AugStrength::kOff;
  AugStrength cutout = AugStrength::kOff;
  double point_dropout_prob = 0.0;
  int dropout_regions = 0;
  int voxel_sample_count = kMaxPointsPerVoxel;

  static AugmentationPolicy off();
  static AugmentationPolicy teacher();        // weak global ops only
  static AugmentationPolicy student_weak();   // matches the teacher strengths
  static AugmentationPolicy student_middle();
  static AugmentationPolicy student_strong();

  // strength-wise partial order (teacher must not exceed the student)
  bool weaker_or_equal(const AugmentationPolicy& other) const;
};

int cutout_rect_count(AugStrength s);

struct TrainSample {
  Image image;
  PointCloud cloud;
};

struct AugmentTrace {
  int cutout_rects_applied = 0;
  int64_t points_dropped = 0;
};

// Deterministic given (policy, seed). Image dims and, under a dropout-free
// policy, point counts are preserved.
TrainSample augment(const TrainSample& sample, const AugmentationPolicy& policy,
                    uint64_t seed, AugmentTrace* trace = nullptr);

}  // namespace semocc
