#include "semocc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "semocc/rng.hpp"

namespace semocc {

namespace {

constexpr double kGroundTop = 0.35;
constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

Vec3 normalize(Vec3 v) {
  double n = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
  return {v.x / n, v.y / n, v.z / n};
}

struct Primitive {
  enum Kind { kBox, kCylinder, kSphere } kind = kBox;
  // box
  Vec3 lo, hi;
  // cylinder (z-aligned) / sphere
  double cx = 0, cy = 0, cz = 0, r = 0, z0 = 0, z1 = 0;
  uint16_t cls = 0;
  double volume = 0;
};

Primitive make_box(Vec3 lo, Vec3 hi, uint16_t cls) {
  Primitive p;
  p.kind = Primitive::kBox;
  p.lo = lo;
  p.hi = hi;
  p.cls = cls;
  p.volume = (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z);
  return p;
}

Primitive make_cylinder(double cx, double cy, double z0, double z1, double r, uint16_t cls) {
  Primitive p;
  p.kind = Primitive::kCylinder;
  p.cx = cx;
  p.cy = cy;
  p.z0 = z0;
  p.z1 = z1;
  p.r = r;
  p.cls = cls;
  p.volume = kPi * r * r * (z1 - z0);
  return p;
}

Primitive make_sphere(double cx, double cy, double cz, double r, uint16_t cls) {
  Primitive p;
  p.kind = Primitive::kSphere;
  p.cx = cx;
  p.cy = cy;
  p.cz = cz;
  p.r = r;
  p.cls = cls;
  p.volume = 4.0 / 3.0 * kPi * r * r * r;
  return p;
}

bool inside(const Primitive& p, double x, double y, double z) {
  switch (p.kind) {
    case Primitive::kBox:
      return x >= p.lo.x && x <= p.hi.x && y >= p.lo.y && y <= p.hi.y && z >= p.lo.z &&
             z <= p.hi.z;
    case Primitive::kCylinder: {
      double dx = x - p.cx, dy = y - p.cy;
      return dx * dx + dy * dy <= p.r * p.r && z >= p.z0 && z <= p.z1;
    }
    case Primitive::kSphere: {
      double dx = x - p.cx, dy = y - p.cy, dz = z - p.cz;
      return dx * dx + dy * dy + dz * dz <= p.r * p.r;
    }
  }
  return false;
}

struct Hit {
  bool valid = false;
  double t = std::numeric_limits<double>::infinity();
  uint16_t cls = 0;
  Vec3 normal{0, 0, 1};
};

void hit_box(const Primitive& p, Vec3 o, Vec3 d, Hit& best) {
  double tmin = 1e-6, tmax = best.t;
  int enter_axis = -1;
  double enter_sign = 0;
  const double lo[3] = {p.lo.x, p.lo.y, p.lo.z};
  const double hi[3] = {p.hi.x, p.hi.y, p.hi.z};
  const double oo[3] = {o.x, o.y, o.z};
  const double dd[3] = {d.x, d.y, d.z};
  for (int a = 0; a < 3; ++a) {
    if (std::fabs(dd[a]) < 1e-12) {
      if (oo[a] < lo[a] || oo[a] > hi[a]) return;
      continue;
    }
    double t1 = (lo[a] - oo[a]) / dd[a];
    double t2 = (hi[a] - oo[a]) / dd[a];
    double sign = -1;
    if (t1 > t2) {
      std::swap(t1, t2);
      sign = 1;
    }
    if (t1 > tmin) {
      tmin = t1;
      enter_axis = a;
      enter_sign = sign;
    }
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return;
  }
  if (enter_axis < 0) return;  // origin inside; skip
  best.valid = true;
  best.t = tmin;
  best.cls = p.cls;
  best.normal = {0, 0, 0};
  if (enter_axis == 0) best.normal.x = enter_sign;
  if (enter_axis == 1) best.normal.y = enter_sign;
  if (enter_axis == 2) best.normal.z = enter_sign;
}

void hit_cylinder(const Primitive& p, Vec3 o, Vec3 d, Hit& best) {
  // side surface
  double ox = o.x - p.cx, oy = o.y - p.cy;
  double a = d.x * d.x + d.y * d.y;
  if (a > 1e-12) {
    double b = 2 * (ox * d.x + oy * d.y);
    double c = ox * ox + oy * oy - p.r * p.r;
    double disc = b * b - 4 * a * c;
    if (disc >= 0) {
      double t = (-b - std::sqrt(disc)) / (2 * a);
      if (t > 1e-6 && t < best.t) {
        double z = o.z + t * d.z;
        if (z >= p.z0 && z <= p.z1) {
          best.valid = true;
          best.t = t;
          best.cls = p.cls;
          best.normal = normalize({(o.x + t * d.x - p.cx) / p.r, (o.y + t * d.y - p.cy) / p.r, 0});
          return;
        }
      }
    }
  }
  // top cap
  if (std::fabs(d.z) > 1e-12) {
    double t = (p.z1 - o.z) / d.z;
    if (t > 1e-6 && t < best.t) {
      double x = o.x + t * d.x - p.cx, y = o.y + t * d.y - p.cy;
      if (x * x + y * y <= p.r * p.r) {
        best.valid = true;
        best.t = t;
        best.cls = p.cls;
        best.normal = {0, 0, 1};
      }
    }
  }
}

void hit_sphere(const Primitive& p, Vec3 o, Vec3 d, Hit& best) {
  double ox = o.x - p.cx, oy = o.y - p.cy, oz = o.z - p.cz;
  double b = 2 * (ox * d.x + oy * d.y + oz * d.z);
  double c = ox * ox + oy * oy + oz * oz - p.r * p.r;
  double disc = b * b - 4 * c;  // |d| = 1
  if (disc < 0) return;
  double t = (-b - std::sqrt(disc)) / 2;
  if (t > 1e-6 && t < best.t) {
    best.valid = true;
    best.t = t;
    best.cls = p.cls;
    best.normal = normalize({(o.x + t * d.x - p.cx) / p.r, (o.y + t * d.y - p.cy) / p.r,
                             (o.z + t * d.z - p.cz) / p.r});
  }
}

struct SceneWorld {
  const SceneSpec* spec = nullptr;
  std::vector<Primitive> prims;
  double x0, x1, y0, y1;  // grid extent
  double road_lo, road_hi, walk_lo, walk_hi;

  uint16_t band_class(double y) const {
    if (y >= road_lo && y < road_hi) return kClassRoad;
    if ((y >= walk_lo && y < road_lo) || (y >= road_hi && y < walk_hi)) return kClassSidewalk;
    return kClassTerrain;
  }

  Hit cast(Vec3 o, Vec3 d, double max_t) const {
    Hit best;
    best.t = max_t;
    for (const auto& p : prims) {
      switch (p.kind) {
        case Primitive::kBox: hit_box(p, o, d, best); break;
        case Primitive::kCylinder: hit_cylinder(p, o, d, best); break;
        case Primitive::kSphere: hit_sphere(p, o, d, best); break;
      }
    }
    // ground slab top, only inside the grid extent
    if (d.z < -1e-12) {
      double t = (kGroundTop - o.z) / d.z;
      if (t > 1e-6 && t < best.t) {
        double x = o.x + t * d.x, y = o.y + t * d.y;
        if (x >= x0 && x < x1 && y >= y0 && y < y1) {
          best.valid = true;
          best.t = t;
          best.cls = band_class(y);
          best.normal = {0, 0, 1};
        }
      }
    }
    return best;
  }

  uint16_t solid_class(double x, double y, double z) const {
    if (z <= kGroundTop) return band_class(y);
    const Primitive* pick = nullptr;
    for (const auto& p : prims)
      if (inside(p, x, y, z) && (!pick || p.volume < pick->volume)) pick = &p;
    return pick ? pick->cls : kClassFree;
  }
};

SceneWorld build_world(const SceneSpec& spec, Rng& rng) {
  SceneWorld w;
  w.spec = &spec;
  const auto& g = spec.grid;
  w.x0 = g.origin[0];
  w.x1 = g.origin[0] + g.nx * g.voxel_size;
  w.y0 = g.origin[1];
  w.y1 = g.origin[1] + g.ny * g.voxel_size;
  double ymid = (w.y0 + w.y1) / 2;
  w.road_lo = ymid - 1.6;
  w.road_hi = ymid + 1.6;
  w.walk_lo = w.road_lo - 1.2;
  w.walk_hi = w.road_hi + 1.2;

  auto ux = [&](double lo, double hi) { return rng.uniform(lo, hi); };
  for (int i = 0; i < spec.building_count; ++i) {
    bool left = rng.bernoulli(0.5);
    double sx = ux(1.6, 3.2), sy = ux(1.0, 2.2), h = ux(1.4, 2.6);
    double bx = ux(w.x0 + 1.0, w.x1 - sx - 0.5);
    double by = left ? ux(w.y0 + 0.3, std::max(w.y0 + 0.4, w.walk_lo - sy - 0.3))
                     : ux(w.walk_hi + 0.3, w.y1 - sy - 0.3);
    w.prims.push_back(make_box({bx, by, kGroundTop}, {bx + sx, by + sy, kGroundTop + h},
                               kClassBuilding));
  }
  for (int i = 0; i < spec.truck_count; ++i) {
    double bx = ux(w.x0 + 1.5, w.x1 - 3.5);
    double by = ux(w.road_lo + 0.2, w.road_hi - 1.3);
    w.prims.push_back(make_box({bx, by, kGroundTop}, {bx + 2.6, by + 1.1, kGroundTop + 1.3},
                               kClassTruck));
  }
  for (int i = 0; i < spec.car_count; ++i) {
    double bx = ux(w.x0 + 1.2, w.x1 - 2.5);
    double by = ux(w.road_lo + 0.15, w.road_hi - 1.05);
    w.prims.push_back(make_box({bx, by, kGroundTop}, {bx + 1.9, by + 0.9, kGroundTop + 0.75},
                               kClassCar));
  }
  for (int i = 0; i < spec.fence_count; ++i) {
    bool left = rng.bernoulli(0.5);
    double len = ux(2.5, 6.0);
    double bx = ux(w.x0 + 0.5, w.x1 - len - 0.5);
    double by = left ? w.walk_lo - 0.15 : w.walk_hi + 0.03;
    w.prims.push_back(make_box({bx, by, kGroundTop}, {bx + len, by + 0.12, kGroundTop + 0.85},
                               kClassFence));
  }
  for (int i = 0; i < spec.tree_count; ++i) {
    bool left = rng.bernoulli(0.5);
    double cx = ux(w.x0 + 1.0, w.x1 - 1.0);
    double cy = left ? ux(w.y0 + 0.8, w.walk_lo - 0.8) : ux(w.walk_hi + 0.8, w.y1 - 0.8);
    double r = ux(0.13, 0.24), h = ux(1.0, 1.6), vr = ux(0.55, 0.95);
    w.prims.push_back(make_cylinder(cx, cy, kGroundTop, kGroundTop + h, r, kClassTrunk));
    w.prims.push_back(make_sphere(cx, cy, kGroundTop + h + vr * 0.55, vr, kClassVegetation));
  }
  for (int i = 0; i < spec.pole_count; ++i) {
    bool left = rng.bernoulli(0.5);
    double cx = ux(w.x0 + 1.0, w.x1 - 1.0);
    double cy = left ? ux(w.walk_lo + 0.2, w.road_lo - 0.2) : ux(w.road_hi + 0.2, w.walk_hi - 0.2);
    double h = ux(1.9, 2.5);
    w.prims.push_back(make_cylinder(cx, cy, kGroundTop, kGroundTop + h, 0.09, kClassPole));
    w.prims.push_back(make_box({cx - 0.035, cy - 0.3, kGroundTop + h - 0.55},
                               {cx + 0.035, cy + 0.3, kGroundTop + h - 0.05}, kClassTrafficSign));
  }
  return w;
}

// source IDs reused from the reference table; trunk withheld (rendered as
// vegetation by the primary source)
uint16_t source_id_of(uint16_t cls) {
  switch (cls) {
    case kClassCar: return 176;
    case kClassTruck: return 182;
    case kClassRoad: return 98;
    case kClassSidewalk: return 100;
    case kClassBuilding: return 35;
    case kClassFence: return 144;
    case kClassVegetation: return 174;
    case kClassTrunk: return 174;  // the primary source has no trunk class
    case kClassTerrain: return 102;
    case kClassPole: return 143;
    case kClassTrafficSign: return 135;
    default: return 142;  // sky: unmapped
  }
}

}  // namespace

ClassTaxonomy desk_taxonomy() {
  ClassTaxonomy tax;
  tax.num_classes = kDeskClassCount;
  tax.primary_map[176] = kClassCar;
  tax.primary_map[182] = kClassTruck;
  tax.primary_map[98] = kClassRoad;
  tax.primary_map[100] = kClassSidewalk;
  tax.primary_map[35] = kClassBuilding;
  tax.primary_map[144] = kClassFence;
  tax.primary_map[174] = kClassVegetation;
  tax.primary_map[102] = kClassTerrain;
  tax.primary_map[143] = kClassPole;
  tax.primary_map[135] = kClassTrafficSign;
  tax.auxiliary_classes.emplace_back("trunk", kClassTrunk);
  tax.validate();
  return tax;
}

const std::array<std::array<uint8_t, 3>, kDeskClassCount>& desk_palette() {
  static const std::array<std::array<uint8_t, 3>, kDeskClassCount> palette = {{
      {0, 0, 0},        // free
      {70, 130, 240},   // car
      {160, 60, 220},   // truck
      {95, 90, 95},     // road
      {190, 150, 190},  // sidewalk
      {220, 190, 120},  // building
      {170, 110, 60},   // fence
      {50, 150, 50},    // vegetation
      {120, 80, 40},    // trunk
      {130, 180, 95},   // terrain
      {210, 210, 210},  // pole
      {235, 50, 50},    // traffic sign
  }};
  return palette;
}

FrameBundle generate_scene(const SceneSpec& spec) {
  if (spec.focal <= 0.0)
    throw std::invalid_argument("generate_scene: camera focal length must be positive");
  if (spec.image_h <= 0 || spec.image_w <= 0)
    throw std::invalid_argument("generate_scene: image dims must be positive");
  const GridSpec& g = spec.grid;

  Rng rng_layout(derive_seed(spec.seed, 1));
  Rng rng_lidar(derive_seed(spec.seed, 2));
  Rng rng_image(derive_seed(spec.seed, 3));
  Rng rng_seg(derive_seed(spec.seed, 4));

  SceneWorld world = build_world(spec, rng_layout);

  FrameBundle out;
  // fixed rig: camera slightly behind the grid center line, looking along +x
  double ymid = (world.y0 + world.y1) / 2;
  Vec3 cam_pos{world.x0 - 1.2, ymid, 1.7};
  out.calib.K = {{{spec.focal, 0.0, spec.image_w / 2.0},
                  {0.0, spec.focal, spec.image_h / 2.0},
                  {0.0, 0.0, 1.0}}};
  // rows: camera x = -world y, camera y = -world z, camera z = +world x
  out.calib.T = {{{0, -1, 0, ymid},
                  {0, 0, -1, 1.7},
                  {1, 0, 0, -(world.x0 - 1.2)},
                  {0, 0, 0, 1}}};
  out.calib.image_h = spec.image_h;
  out.calib.image_w = spec.image_w;
  out.calib.validate();

  // camera render: per pixel hit record
  struct PixelHit {
    bool valid = false;
    uint16_t cls = 0;
    Vec3 point;
  };
  std::vector<PixelHit> hits(static_cast<size_t>(spec.image_h) * spec.image_w);
  out.image = make_image(spec.image_h, spec.image_w);
  const auto& palette = desk_palette();
  Vec3 light = normalize({-0.45, 0.25, 0.85});
  for (int r = 0; r < spec.image_h; ++r)
    for (int c = 0; c < spec.image_w; ++c) {
      // pixel center ray in camera frame, rotated to world
      double xc = (c + 0.5 - out.calib.K[0][2]) / spec.focal;
      double yc = (r + 0.5 - out.calib.K[1][2]) / spec.focal;
      Vec3 dir = normalize({1.0, -xc, -yc});
      Hit h = world.cast(cam_pos, dir, 100.0);
      double rr, gg, bb;
      if (h.valid) {
        double tpt = h.t;
        Vec3 pt{cam_pos.x + tpt * dir.x, cam_pos.y + tpt * dir.y, cam_pos.z + tpt * dir.z};
        hits[static_cast<size_t>(r) * spec.image_w + c] = {true, h.cls, pt};
        double lam = std::max(0.0, h.normal.x * light.x + h.normal.y * light.y + h.normal.z * light.z);
        double shade = 0.55 + 0.45 * lam;
        double haze = std::min(0.25, tpt / 60.0);
        rr = palette[h.cls][0] / 255.0 * shade * (1 - haze) + 0.6 * haze;
        gg = palette[h.cls][1] / 255.0 * shade * (1 - haze) + 0.6 * haze;
        bb = palette[h.cls][2] / 255.0 * shade * (1 - haze) + 0.65 * haze;
      } else {
        double grad = 0.55 + 0.2 * (1.0 - static_cast<double>(r) / spec.image_h);
        rr = grad * 0.75;
        gg = grad * 0.85;
        bb = grad;
      }
      out.image.at(0, r, c) = std::clamp(rr + rng_image.normal(0.0, 0.012), 0.0, 1.0);
      out.image.at(1, r, c) = std::clamp(gg + rng_image.normal(0.0, 0.012), 0.0, 1.0);
      out.image.at(2, r, c) = std::clamp(bb + rng_image.normal(0.0, 0.012), 0.0, 1.0);
    }

  // LiDAR sweep
  Vec3 lidar_pos{world.x0 - 0.6, ymid, 1.9};
  static const double intensity_base[kDeskClassCount] = {0.0, 0.75, 0.65, 0.30, 0.40, 0.55,
                                                         0.45, 0.50, 0.42, 0.38, 0.80, 0.90};
  for (int e = 0; e < spec.elevation_count; ++e) {
    double el = -28.0 + (34.0 * e) / std::max(1, spec.elevation_count - 1);
    double cel = std::cos(el * kPi / 180.0), sel = std::sin(el * kPi / 180.0);
    for (int a = 0; a < spec.azimuth_count; ++a) {
      double az = -50.0 + (100.0 * a) / std::max(1, spec.azimuth_count - 1);
      double caz = std::cos(az * kPi / 180.0), saz = std::sin(az * kPi / 180.0);
      Vec3 dir{cel * caz, cel * saz, sel};
      bool keep = !rng_lidar.bernoulli(spec.beam_dropout);
      double jitter = rng_lidar.normal(0.0, 0.02);
      if (!keep) continue;
      Hit h = world.cast(lidar_pos, dir, spec.max_range);
      if (!h.valid) continue;
      double t = h.t + 1e-4;  // nudge the return just inside the surface
      Vec3 pt{lidar_pos.x + t * dir.x, lidar_pos.y + t * dir.y, lidar_pos.z + t * dir.z};
      if (pt.x < world.x0 || pt.x >= world.x1 || pt.y < world.y0 || pt.y >= world.y1 ||
          pt.z < g.origin[2] || pt.z >= g.origin[2] + g.nz * g.voxel_size)
        continue;
      double cosi = std::fabs(dir.x * h.normal.x + dir.y * h.normal.y + dir.z * h.normal.z);
      double intensity = intensity_base[h.cls] * (0.7 + 0.3 * cosi) * (1.0 - 0.4 * h.t / spec.max_range);
      intensity = std::clamp(intensity + jitter, 0.0, 1.0);
      out.cloud.points.push_back({pt.x, pt.y, pt.z, intensity});
    }
  }

  // solid-fill voxel labels from the primitive interiors
  out.voxel_gt = make_label_grid(g.nx, g.ny, g.nz, kClassFree);
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.ny; ++j)
      for (int k = 0; k < g.nz; ++k) {
        auto ctr = g.center(i, j, k);
        out.voxel_gt.at(i, j, k) = world.solid_class(ctr[0], ctr[1], ctr[2]);
      }

  // stamp camera-visible surfaces: voxels seen by pixel rays, labeled by the
  // hit whose pixel the voxel center projects back to when available
  auto voxel_of = [&](const Vec3& p, int& i, int& j, int& k) {
    i = static_cast<int>(std::floor((p.x - g.origin[0]) / g.voxel_size));
    j = static_cast<int>(std::floor((p.y - g.origin[1]) / g.voxel_size));
    k = static_cast<int>(std::floor((p.z - g.origin[2]) / g.voxel_size));
    return i >= 0 && i < g.nx && j >= 0 && j < g.ny && k >= 0 && k < g.nz;
  };
  std::vector<uint8_t> camera_hit(static_cast<size_t>(g.cell_count()), 0);
  for (const auto& h : hits) {
    if (!h.valid) continue;
    int i, j, k;
    if (!voxel_of(h.point, i, j, k)) continue;
    int64_t f = g.flat(i, j, k);
    camera_hit[static_cast<size_t>(f)] = 1;
    if (out.voxel_gt.labels[static_cast<size_t>(f)] == kClassFree)
      out.voxel_gt.labels[static_cast<size_t>(f)] = h.cls;
  }
  // prefer the class seen by the pixel the voxel center projects to
  out.camera_surface.assign(static_cast<size_t>(g.cell_count()), 0);
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.ny; ++j)
      for (int k = 0; k < g.nz; ++k) {
        int64_t f = g.flat(i, j, k);
        if (!camera_hit[static_cast<size_t>(f)]) continue;
        auto ctr = g.center(i, j, k);
        Projection pr = project_point(out.calib, {ctr[0], ctr[1], ctr[2]});
        if (!pr.valid) continue;
        const auto& ph = hits[static_cast<size_t>(std::floor(pr.v)) * spec.image_w +
                              static_cast<size_t>(std::floor(pr.u))];
        if (!ph.valid) continue;
        int hi, hj, hk;
        if (!voxel_of(ph.point, hi, hj, hk)) continue;
        if (hi != i || hj != j || hk != k) continue;
        out.voxel_gt.labels[static_cast<size_t>(f)] = ph.cls;
        out.camera_surface[static_cast<size_t>(f)] = 1;
      }

  // stamp LiDAR returns into free voxels so every return is occupied
  for (const auto& p : out.cloud.points) {
    int i, j, k;
    if (!voxel_of({p[0], p[1], p[2]}, i, j, k)) continue;
    int64_t f = g.flat(i, j, k);
    if (out.voxel_gt.labels[static_cast<size_t>(f)] == kClassFree) {
      Hit h = world.cast(lidar_pos, normalize({p[0] - lidar_pos.x, p[1] - lidar_pos.y,
                                               p[2] - lidar_pos.z}), spec.max_range);
      out.voxel_gt.labels[static_cast<size_t>(f)] = h.valid ? h.cls : kClassTerrain;
    }
  }

  out.geometry_gt = make_label_grid(g.nx, g.ny, g.nz, 0);
  for (int64_t f = 0; f < g.cell_count(); ++f)
    out.geometry_gt.labels[static_cast<size_t>(f)] =
        out.voxel_gt.labels[static_cast<size_t>(f)] != kClassFree ? 1 : 0;

  // primary segmentation in source-ID space plus the trunk auxiliary mask
  out.primary_seg = make_label_map(spec.image_h, spec.image_w);
  AuxiliaryMask trunk{"trunk", make_label_map(spec.image_h, spec.image_w, 0)};
  static const uint16_t noise_ids[] = {176, 182, 98, 100, 35, 144, 174, 102, 143, 135, 142};
  for (int r = 0; r < spec.image_h; ++r)
    for (int c = 0; c < spec.image_w; ++c) {
      const auto& h = hits[static_cast<size_t>(r) * spec.image_w + c];
      uint16_t src = h.valid ? source_id_of(h.cls) : source_id_of(kClassFree);
      if (spec.seg_noise_rate > 0.0 && rng_seg.bernoulli(spec.seg_noise_rate))
        src = noise_ids[rng_seg.below(sizeof(noise_ids) / sizeof(noise_ids[0]))];
      out.primary_seg.at(r, c) = src;
      if (h.valid && h.cls == kClassTrunk) trunk.mask.at(r, c) = 1;
    }
  out.aux_masks.push_back(std::move(trunk));
  return out;
}

}  // namespace semocc
