#include "semocc/augment.hpp"

#include <algorithm>
#include <cmath>

#include "semocc/rng.hpp"

namespace semocc {

namespace {

double strength_value(AugStrength s, double weak, double middle, double strong) {
  switch (s) {
    case AugStrength::kOff: return 0.0;
    case AugStrength::kWeak: return weak;
    case AugStrength::kMiddle: return middle;
    case AugStrength::kStrong: return strong;
  }
  return 0.0;
}

int blur_kernel(AugStrength s) {
  switch (s) {
    case AugStrength::kOff: return 1;
    case AugStrength::kWeak: return 3;
    case AugStrength::kMiddle: return 5;
    case AugStrength::kStrong: return 7;
  }
  return 1;
}

void apply_brightness(Image& img, AugStrength s, Rng& rng) {
  double range = strength_value(s, 0.10, 0.20, 0.35);
  double gain = 1.0 + rng.uniform(-range, range);
  double offset = rng.uniform(-range / 2, range / 2);
  for (auto& v : img.rgb) v = std::clamp(gain * v + offset, 0.0, 1.0);
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  v = mx;
  double d = mx - mn;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r) h = std::fmod((g - b) / d, 6.0);
  else if (mx == g) h = (b - r) / d + 2.0;
  else h = (r - g) / d + 4.0;
  h *= 60.0;
  if (h < 0) h += 360.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  double c = v * s;
  double hp = h / 60.0;
  double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  if (hp < 1) { r1 = c; g1 = x; }
  else if (hp < 2) { r1 = x; g1 = c; }
  else if (hp < 3) { g1 = c; b1 = x; }
  else if (hp < 4) { g1 = x; b1 = c; }
  else if (hp < 5) { r1 = x; b1 = c; }
  else { r1 = c; b1 = x; }
  double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

void apply_hsv(Image& img, AugStrength s, Rng& rng) {
  double hue_range = strength_value(s, 12.0, 24.0, 40.0);
  double sat_range = strength_value(s, 0.10, 0.20, 0.35);
  double dh = rng.uniform(-hue_range, hue_range);
  double ds = 1.0 + rng.uniform(-sat_range, sat_range);
  for (int r = 0; r < img.h; ++r)
    for (int c = 0; c < img.w; ++c) {
      double hh, ss, vv;
      rgb_to_hsv(img.at(0, r, c), img.at(1, r, c), img.at(2, r, c), hh, ss, vv);
      hh = std::fmod(hh + dh + 360.0, 360.0);
      ss = std::clamp(ss * ds, 0.0, 1.0);
      double rr, gg, bb;
      hsv_to_rgb(hh, ss, vv, rr, gg, bb);
      img.at(0, r, c) = std::clamp(rr, 0.0, 1.0);
      img.at(1, r, c) = std::clamp(gg, 0.0, 1.0);
      img.at(2, r, c) = std::clamp(bb, 0.0, 1.0);
    }
}

// horizontal 1D box kernel
void apply_motion_blur(Image& img, AugStrength s) {
  int k = blur_kernel(s);
  if (k <= 1) return;
  int half = k / 2;
  Image out = img;
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < img.h; ++r)
      for (int c = 0; c < img.w; ++c) {
        double acc = 0.0;
        int cnt = 0;
        for (int d = -half; d <= half; ++d) {
          int cc = c + d;
          if (cc < 0 || cc >= img.w) continue;
          acc += img.at(ch, r, cc);
          ++cnt;
        }
        out.at(ch, r, c) = acc / cnt;
      }
  img = out;
}

// additive low-frequency luminance field plus gaussian pixel noise
void apply_weather(Image& img, AugStrength s, Rng& rng) {
  double field_amp = strength_value(s, 0.05, 0.10, 0.16);
  double noise_sigma = strength_value(s, 0.01, 0.02, 0.04);
  constexpr int kCoarse = 4;
  double field[kCoarse + 1][kCoarse + 1];
  for (int i = 0; i <= kCoarse; ++i)
    for (int j = 0; j <= kCoarse; ++j) field[i][j] = rng.uniform(-field_amp, field_amp);
  for (int r = 0; r < img.h; ++r)
    for (int c = 0; c < img.w; ++c) {
      double fy = static_cast<double>(r) / img.h * kCoarse;
      double fx = static_cast<double>(c) / img.w * kCoarse;
      int iy = std::min(static_cast<int>(fy), kCoarse - 1);
      int ix = std::min(static_cast<int>(fx), kCoarse - 1);
      double ty = fy - iy, tx = fx - ix;
      double lum = (1 - ty) * ((1 - tx) * field[iy][ix] + tx * field[iy][ix + 1]) +
                   ty * ((1 - tx) * field[iy + 1][ix] + tx * field[iy + 1][ix + 1]);
      for (int ch = 0; ch < 3; ++ch) {
        double v = img.at(ch, r, c) + lum + rng.normal(0.0, noise_sigma);
        img.at(ch, r, c) = std::clamp(v, 0.0, 1.0);
      }
    }
}

int apply_cutout(Image& img, AugStrength s, Rng& rng) {
  int rects = cutout_rect_count(s);
  double frac = strength_value(s, 0.10, 0.15, 0.20);
  for (int n = 0; n < rects; ++n) {
    int rh = std::max(1, static_cast<int>(frac * img.h));
    int rw = std::max(1, static_cast<int>(frac * img.w));
    int r0 = static_cast<int>(rng.below(static_cast<uint64_t>(std::max(1, img.h - rh))));
    int c0 = static_cast<int>(rng.below(static_cast<uint64_t>(std::max(1, img.w - rw))));
    for (int ch = 0; ch < 3; ++ch)
      for (int r = r0; r < r0 + rh; ++r)
        for (int c = c0; c < c0 + rw; ++c) img.at(ch, r, c) = 0.0;
  }
  return rects;
}

}  // namespace

int cutout_rect_count(AugStrength s) {
  switch (s) {
    case AugStrength::kOff: return 0;
    case AugStrength::kWeak: return 1;
    case AugStrength::kMiddle: return 2;
    case AugStrength::kStrong: return 3;
  }
  return 0;
}

AugmentationPolicy AugmentationPolicy::off() { return AugmentationPolicy{}; }

AugmentationPolicy AugmentationPolicy::teacher() {
  AugmentationPolicy p;
  p.brightness = AugStrength::kWeak;
  p.hsv_shift = AugStrength::kWeak;
  p.point_dropout_prob = 0.05;
  p.dropout_regions = 0;
  p.voxel_sample_count = 35;
  return p;
}

AugmentationPolicy AugmentationPolicy::student_weak() { return teacher(); }

AugmentationPolicy AugmentationPolicy::student_middle() {
  AugmentationPolicy p;
  p.brightness = AugStrength::kMiddle;
  p.hsv_shift = AugStrength::kMiddle;
  p.motion_blur = AugStrength::kMiddle;
  p.weather = AugStrength::kMiddle;
  p.point_dropout_prob = 0.10;
  p.dropout_regions = 1;
  p.voxel_sample_count = 28;
  return p;
}

AugmentationPolicy AugmentationPolicy::student_strong() {
  AugmentationPolicy p;
  p.brightness = AugStrength::kStrong;
  p.hsv_shift = AugStrength::kStrong;
  p.motion_blur = AugStrength::kMiddle;
  p.weather = AugStrength::kMiddle;
  p.cutout = AugStrength::kWeak;
  p.point_dropout_prob = 0.20;
  p.dropout_regions = 2;
  p.voxel_sample_count = 20;
  return p;
}

bool AugmentationPolicy::weaker_or_equal(const AugmentationPolicy& other) const {
  auto le = [](AugStrength a, AugStrength b) {
    return static_cast<int>(a) <= static_cast<int>(b);
  };
  return le(brightness, other.brightness) && le(hsv_shift, other.hsv_shift) &&
         le(motion_blur, other.motion_blur) && le(weather, other.weather) &&
         le(cutout, other.cutout) && point_dropout_prob <= other.point_dropout_prob &&
         dropout_regions <= other.dropout_regions &&
         voxel_sample_count >= other.voxel_sample_count;
}

TrainSample augment(const TrainSample& sample, const AugmentationPolicy& policy, uint64_t seed,
                    AugmentTrace* trace) {
  TrainSample out = sample;
  Rng rng(derive_seed(seed, 0xa06));
  if (policy.brightness != AugStrength::kOff) apply_brightness(out.image, policy.brightness, rng);
  if (policy.hsv_shift != AugStrength::kOff) apply_hsv(out.image, policy.hsv_shift, rng);
  if (policy.motion_blur != AugStrength::kOff) apply_motion_blur(out.image, policy.motion_blur);
  if (policy.weather != AugStrength::kOff) apply_weather(out.image, policy.weather, rng);
  int rects = 0;
  if (policy.cutout != AugStrength::kOff) rects = apply_cutout(out.image, policy.cutout, rng);

  int64_t dropped = 0;
  if (policy.point_dropout_prob > 0.0 || policy.dropout_regions > 0) {
    // angular sector dropout, then per-point dropout
    std::vector<std::pair<double, double>> sectors;
    for (int s = 0; s < policy.dropout_regions; ++s) {
      double center = rng.uniform(0.0, 6.283185307179586);
      double width = rng.uniform(0.15, 0.35);
      sectors.emplace_back(center, width);
    }
    std::vector<std::array<double, 4>> kept;
    kept.reserve(out.cloud.points.size());
    for (const auto& p : out.cloud.points) {
      bool drop = false;
      if (!sectors.empty()) {
        double az = std::atan2(p[1], p[0]);
        if (az < 0) az += 6.283185307179586;
        for (const auto& [c, w] : sectors) {
          double d = std::fabs(az - c);
          d = std::min(d, 6.283185307179586 - d);
          if (d <= w / 2) {
            drop = true;
            break;
          }
        }
      }
      if (!drop && policy.point_dropout_prob > 0.0 && rng.bernoulli(policy.point_dropout_prob))
        drop = true;
      if (drop) ++dropped;
      else kept.push_back(p);
    }
    out.cloud.points = std::move(kept);
  }
  if (trace) {
    trace->cutout_rects_applied = rects;
    trace->points_dropped = dropped;
  }
  return out;
}

}  // namespace semocc
