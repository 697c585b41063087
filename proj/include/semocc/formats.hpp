#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "semocc/geometry.hpp"

namespace semocc {

// Binary artifact formats. All integers little-endian.
//   label grid:  magic "OCCG", dims u32 x3, u16 class IDs row-major (65535 = ignore)
//   label map:   magic "OCCM", dims u32 x2, u16 IDs row-major
//   keep mask:   magic "OCCK", dims u32 x3, u8 0/1 row-major
//   point cloud: consecutive f32 quadruples (x, y, z, intensity), no header

void save_label_grid(const std::string& path, const LabelGrid& g);
LabelGrid load_label_grid(const std::string& path);

void save_label_map(const std::string& path, const LabelMap& m);
LabelMap load_label_map(const std::string& path);

struct KeepMask {
  int nx = 0, ny = 0, nz = 0;
  std::vector<uint8_t> keep;

  bool at(int i, int j, int k) const {
    return keep[static_cast<size_t>((static_cast<int64_t>(i) * ny + j) * nz + k)] != 0;
  }
};
void save_keep_mask(const std::string& path, const KeepMask& m);
KeepMask load_keep_mask(const std::string& path);

void save_point_cloud(const std::string& path, const PointCloud& cloud);
PointCloud load_point_cloud(const std::string& path);

// 8-bit RGB image, values quantized to byte/255 on load.
struct Image {
  int h = 0, w = 0;
  std::vector<double> rgb;  // (3,h,w) channel-first in [0,1]

  double at(int c, int row, int col) const {
    return rgb[(static_cast<size_t>(c) * h + row) * static_cast<size_t>(w) + col];
  }
  double& at(int c, int row, int col) {
    return rgb[(static_cast<size_t>(c) * h + row) * static_cast<size_t>(w) + col];
  }
};
Image make_image(int h, int w);

void save_ppm(const std::string& path, const Image& img);
Image load_ppm(const std::string& path);

// ASCII PLY of colored points.
void save_ply(const std::string& path,
              const std::vector<std::array<double, 3>>& points,
              const std::vector<std::array<uint8_t, 3>>& colors);

}  // namespace semocc
