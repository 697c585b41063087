#include "semocc/formats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace semocc {

namespace {

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_u16(std::ostream& os, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

uint16_t read_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_f32(std::ostream& os, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_u32(os, bits);
}

float read_f32(std::istream& is) {
  uint32_t bits = read_u32(is);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return is;
}

void expect_magic(std::istream& is, const char* magic, const std::string& path) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0)
    throw std::runtime_error("bad magic in " + path + ", expected " + magic);
}

}  // namespace

void save_label_grid(const std::string& path, const LabelGrid& g) {
  auto os = open_out(path);
  os.write("OCCG", 4);
  write_u32(os, static_cast<uint32_t>(g.nx));
  write_u32(os, static_cast<uint32_t>(g.ny));
  write_u32(os, static_cast<uint32_t>(g.nz));
  for (uint16_t v : g.labels) write_u16(os, v);
}

LabelGrid load_label_grid(const std::string& path) {
  auto is = open_in(path);
  expect_magic(is, "OCCG", path);
  LabelGrid g;
  g.nx = static_cast<int>(read_u32(is));
  g.ny = static_cast<int>(read_u32(is));
  g.nz = static_cast<int>(read_u32(is));
  g.labels.resize(static_cast<size_t>(g.size()));
  for (auto& v : g.labels) v = read_u16(is);
  if (!is) throw std::runtime_error("truncated label grid " + path);
  return g;
}

void save_label_map(const std::string& path, const LabelMap& m) {
  auto os = open_out(path);
  os.write("OCCM", 4);
  write_u32(os, static_cast<uint32_t>(m.h));
  write_u32(os, static_cast<uint32_t>(m.w));
  for (uint16_t v : m.labels) write_u16(os, v);
}

LabelMap load_label_map(const std::string& path) {
  auto is = open_in(path);
  expect_magic(is, "OCCM", path);
  LabelMap m;
  m.h = static_cast<int>(read_u32(is));
  m.w = static_cast<int>(read_u32(is));
  m.labels.resize(static_cast<size_t>(m.size()));
  for (auto& v : m.labels) v = read_u16(is);
  if (!is) throw std::runtime_error("truncated label map " + path);
  return m;
}

void save_keep_mask(const std::string& path, const KeepMask& m) {
  auto os = open_out(path);
  os.write("OCCK", 4);
  write_u32(os, static_cast<uint32_t>(m.nx));
  write_u32(os, static_cast<uint32_t>(m.ny));
  write_u32(os, static_cast<uint32_t>(m.nz));
  os.write(reinterpret_cast<const char*>(m.keep.data()),
           static_cast<std::streamsize>(m.keep.size()));
}

KeepMask load_keep_mask(const std::string& path) {
  auto is = open_in(path);
  expect_magic(is, "OCCK", path);
  KeepMask m;
  m.nx = static_cast<int>(read_u32(is));
  m.ny = static_cast<int>(read_u32(is));
  m.nz = static_cast<int>(read_u32(is));
  m.keep.resize(static_cast<size_t>(m.nx) * m.ny * m.nz);
  is.read(reinterpret_cast<char*>(m.keep.data()), static_cast<std::streamsize>(m.keep.size()));
  if (!is) throw std::runtime_error("truncated keep mask " + path);
  return m;
}

void save_point_cloud(const std::string& path, const PointCloud& cloud) {
  auto os = open_out(path);
  for (const auto& p : cloud.points)
    for (double v : p) write_f32(os, static_cast<float>(v));
}

PointCloud load_point_cloud(const std::string& path) {
  auto is = open_in(path);
  is.seekg(0, std::ios::end);
  auto bytes = is.tellg();
  is.seekg(0, std::ios::beg);
  if (bytes % 16 != 0) throw std::runtime_error("point cloud " + path + " is not a multiple of 16 bytes");
  PointCloud cloud;
  cloud.points.resize(static_cast<size_t>(bytes / 16));
  for (auto& p : cloud.points)
    for (auto& v : p) v = static_cast<double>(read_f32(is));
  return cloud;
}

Image make_image(int h, int w) {
  Image img;
  img.h = h;
  img.w = w;
  img.rgb.assign(static_cast<size_t>(3) * h * w, 0.0);
  return img;
}

void save_ppm(const std::string& path, const Image& img) {
  auto os = open_out(path);
  os << "P6\n" << img.w << " " << img.h << "\n255\n";
  for (int r = 0; r < img.h; ++r)
    for (int c = 0; c < img.w; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double v = std::clamp(img.at(ch, r, c), 0.0, 1.0);
        os.put(static_cast<char>(std::lround(v * 255.0)));
      }
}

Image load_ppm(const std::string& path) {
  auto is = open_in(path);
  std::string magic;
  is >> magic;
  if (magic != "P6") throw std::runtime_error("unsupported PPM " + path);
  int w, h, maxval;
  is >> w >> h >> maxval;
  if (maxval != 255) throw std::runtime_error("unsupported PPM depth in " + path);
  is.get();  // single whitespace after header
  Image img = make_image(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        int byte = is.get();
        if (byte < 0) throw std::runtime_error("truncated PPM " + path);
        img.at(ch, r, c) = static_cast<double>(byte) / 255.0;
      }
  return img;
}

void save_ply(const std::string& path,
              const std::vector<std::array<double, 3>>& points,
              const std::vector<std::array<uint8_t, 3>>& colors) {
  if (points.size() != colors.size())
    throw std::invalid_argument("save_ply: point/color count mismatch");
  auto os = open_out(path);
  os << "ply\nformat ascii 1.0\nelement vertex " << points.size()
     << "\nproperty float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  char buf[128];
  for (size_t i = 0; i < points.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.4f %.4f %.4f %d %d %d\n", points[i][0], points[i][1],
                  points[i][2], colors[i][0], colors[i][1], colors[i][2]);
    os << buf;
  }
}

}  // namespace semocc
