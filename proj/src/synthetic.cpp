#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "reid/dataset.hpp"
#include "reid/hash.hpp"
#include "reid/vision.hpp"

namespace reid {

namespace fs = std::filesystem;

void SyntheticSpec::validate() const {
  if (identities == 0 || frames_per_track == 0 || width == 0 || height == 0) {
    throw std::invalid_argument("synthetic spec: counts and sizes must be positive");
  }
  if (width < 32 || height < 112) throw std::invalid_argument("synthetic spec: frames must be at least 32x112");
  if (!(occlusion_probability >= 0.0 && occlusion_probability <= 1.0)) {
    throw std::invalid_argument("synthetic spec: occlusion probability must lie in [0,1]");
  }
  if (occluder_width == 0 || occluder_height == 0 || occluder_width > width || occluder_height > height) {
    throw std::invalid_argument("synthetic spec: occluder must be non-empty and fit inside the frame");
  }
  if (!(min_speed >= 0.0 && max_speed >= min_speed)) throw std::invalid_argument("synthetic spec: bad speed range");
}

std::string SyntheticSpec::hash() const {
  std::ostringstream os;
  os << std::setprecision(17) << identities << '|' << frames_per_track << '|' << width << '|' << height << '|'
     << texture_seed << '|' << occlusion_probability << '|' << occluder_width << '|' << occluder_height << '|'
     << camera_brightness_shift << '|' << camera_hue_shift << '|' << min_speed << '|' << max_speed;
  return fnv1a_hex(os.str());
}

namespace {

constexpr std::size_t kSpriteW = 24;
constexpr std::size_t kSpriteH = 96;
constexpr double kSpriteTop = 16.0;

using Rgb = std::array<double, 3>;

// Person appearance: premultiplied colour plus coverage.
struct Sprite {
  std::vector<Rgb> color = std::vector<Rgb>(kSpriteW * kSpriteH);
  std::vector<double> alpha = std::vector<double>(kSpriteW * kSpriteH, 0.0);
};

Rgb random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(20.0, 235.0);
  return {u(rng), u(rng), u(rng)};
}

Sprite make_sprite(std::mt19937_64& rng) {
  Sprite s;
  const Rgb skin = std::array<Rgb, 4>{{{224, 172, 105}, {198, 134, 66}, {141, 85, 36}, {241, 194, 125}}}[rng() % 4];
  const Rgb shirt = random_color(rng), accent = random_color(rng), pants = random_color(rng);
  const int pattern = static_cast<int>(rng() % 4);
  const int period = 3 + static_cast<int>(rng() % 6);
  std::normal_distribution<double> grain(0.0, 14.0);

  std::vector<Rgb> raw(kSpriteW * kSpriteH);
  for (std::size_t y = 0; y < kSpriteH; ++y) {
    for (std::size_t x = 0; x < kSpriteW; ++x) {
      const std::size_t k = y * kSpriteW + x;
      const double cx = static_cast<double>(x) - (kSpriteW - 1) / 2.0;
      Rgb c{};
      double a = 0.0;
      if (y < 16) {  // head
        const double dy = static_cast<double>(y) - 8.0;
        if (cx * cx / 36.0 + dy * dy / 64.0 <= 1.0) {
          c = skin;
          a = 1.0;
        }
      } else if (y < 56) {  // torso
        const int yy = static_cast<int>(y), xx = static_cast<int>(x);
        bool alt = false;
        switch (pattern) {
          case 0: alt = (yy / period) % 2 == 0; break;
          case 1: alt = (xx / period) % 2 == 0; break;
          case 2: alt = ((yy / period) + (xx / period)) % 2 == 0; break;
          default: alt = std::sin(0.7 * yy + 0.9 * xx) > 0.3; break;
        }
        c = alt ? accent : shirt;
        a = 1.0;
      } else if (std::abs(cx) > 1.0 && std::abs(cx) < 10.5) {  // legs
        c = pants;
        a = 1.0;
      }
      for (auto& ch : c) ch += a * grain(rng);
      raw[k] = c;
      s.alpha[k] = a;
    }
  }
  // 3×3 box blur keeps the texture smooth enough for small-displacement flow.
  for (std::size_t y = 0; y < kSpriteH; ++y) {
    for (std::size_t x = 0; x < kSpriteW; ++x) {
      Rgb acc{};
      double wsum = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const auto yy = static_cast<std::ptrdiff_t>(y) + dy, xx = static_cast<std::ptrdiff_t>(x) + dx;
          if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(kSpriteH) ||
              xx >= static_cast<std::ptrdiff_t>(kSpriteW))
            continue;
          const std::size_t k = static_cast<std::size_t>(yy) * kSpriteW + static_cast<std::size_t>(xx);
          if (s.alpha[k] == 0.0) continue;
          for (int ch = 0; ch < 3; ++ch) acc[ch] += raw[k][ch];
          wsum += 1.0;
        }
      }
      const std::size_t k = y * kSpriteW + x;
      if (s.alpha[k] > 0.0 && wsum > 0.0)
        for (int ch = 0; ch < 3; ++ch) s.color[k][ch] = acc[ch] / wsum;
    }
  }
  return s;
}

std::vector<Rgb> make_background(std::size_t w, std::size_t h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  const double p1 = u(rng), p2 = u(rng), p3 = u(rng);
  std::vector<Rgb> bg(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double v = 110.0 + 40.0 * static_cast<double>(y) / static_cast<double>(h) +
                       12.0 * std::sin(0.11 * x + p1) + 10.0 * std::sin(0.07 * y + p2) +
                       6.0 * std::sin(0.05 * (x + y) + p3);
      bg[y * w + x] = {v, v * 0.97, v * 0.92};
    }
  }
  return bg;
}

// Rotates colour around the grey axis by `degrees`.
Rgb rotate_hue(const Rgb& c, double degrees) {
  if (degrees == 0.0) return c;
  const double t = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(t), sn = std::sin(t), k = (1.0 - cs) / 3.0, r = std::sqrt(1.0 / 3.0) * sn;
  return {c[0] * (cs + k) + c[1] * (k - r) + c[2] * (k + r), c[0] * (k + r) + c[1] * (cs + k) + c[2] * (k - r),
          c[0] * (k - r) + c[1] * (k + r) + c[2] * (cs + k)};
}

double reflect(double v, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return lo;
  double t = std::fmod(v - lo, 2.0 * span);
  if (t < 0) t += 2.0 * span;
  return lo + (t <= span ? t : 2.0 * span - t);
}

struct Motion {
  double x0, speed, bob_phase;
  double x(double t, double lo, double hi) const { return reflect(x0 + speed * t, lo, hi); }
  double y(double t) const { return kSpriteTop + 2.0 * std::sin(bob_phase + 0.6 * t); }
};

RawFrame render(const SyntheticSpec& spec, const std::vector<Rgb>& bg, const Sprite& sprite, double px, double py,
                int camera, bool occlude, double ox, double oy) {
  RawFrame f(spec.width, spec.height);
  for (std::size_t y = 0; y < spec.height; ++y) {
    for (std::size_t x = 0; x < spec.width; ++x) {
      Rgb c = bg[y * spec.width + x];
      // Bilinear lookup of the sprite at the sub-pixel offset.
      const double sx = static_cast<double>(x) - px, sy = static_cast<double>(y) - py;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double wx = sx - fx, wy = sy - fy;
      Rgb sc{};
      double sa = 0.0;
      for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
          const double ix = fx + dx, iy = fy + dy;
          if (ix < 0 || iy < 0 || ix >= kSpriteW || iy >= kSpriteH) continue;
          const double wgt = (dx ? wx : 1 - wx) * (dy ? wy : 1 - wy);
          const std::size_t k = static_cast<std::size_t>(iy) * kSpriteW + static_cast<std::size_t>(ix);
          sa += wgt * sprite.alpha[k];
          for (int ch = 0; ch < 3; ++ch) sc[ch] += wgt * sprite.alpha[k] * sprite.color[k][ch];
        }
      }
      for (int ch = 0; ch < 3; ++ch) c[ch] = c[ch] * (1.0 - sa) + sc[ch];
      if (occlude && x >= ox && x < ox + spec.occluder_width && y >= oy && y < oy + spec.occluder_height) {
        c = {128.0, 128.0, 128.0};
      }
      if (camera == 2) {
        c = rotate_hue(c, spec.camera_hue_shift);
        for (auto& ch : c) ch += spec.camera_brightness_shift;
      }
      auto* p = f.pixel(x, y);
      for (int ch = 0; ch < 3; ++ch) p[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(c[ch]), 0L, 255L));
    }
  }
  return f;
}

std::string padded(std::size_t v, std::size_t width) {
  std::ostringstream os;
  os << std::setw(static_cast<int>(width)) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed, const fs::path& root) {
  spec.validate();
  fs::create_directories(root);
  const auto bg = make_background(spec.width, spec.height, spec.texture_seed * 7919u + 17u);
  const std::size_t id_digits = std::max<std::size_t>(3, std::to_string(spec.identities).size());
  const std::size_t frame_digits = std::max<std::size_t>(4, std::to_string(spec.frames_per_track).size());
  const std::string spec_hash = spec.hash();
  const double x_hi = static_cast<double>(spec.width - kSpriteW);

  std::ofstream manifest(root / "manifest.csv");
  manifest << "identity,camera,track_path,frame_count,spec_hash\n";

  for (std::size_t id = 0; id < spec.identities; ++id) {
    std::seed_seq appearance_seq{spec.texture_seed, static_cast<std::uint64_t>(id), std::uint64_t{0xA11CE}};
    std::mt19937_64 appearance(appearance_seq);
    const Sprite sprite = make_sprite(appearance);

    std::seed_seq motion_seq{seed, static_cast<std::uint64_t>(id), std::uint64_t{0x3071}};
    std::mt19937_64 motion_rng(motion_seq);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Motion motion{u01(motion_rng) * x_hi, spec.min_speed + (spec.max_speed - spec.min_speed) * u01(motion_rng),
                  u01(motion_rng) * 2.0 * std::numbers::pi};
    if (u01(motion_rng) < 0.5) motion.speed = -motion.speed;
    // Camera 2 sees the same walk a whole number of frames later.
    const auto phase = static_cast<double>(1 + motion_rng() % std::max<std::size_t>(1, spec.frames_per_track / 2));

    const std::string name = "person" + padded(id + 1, id_digits);
    for (int cam = 1; cam <= 2; ++cam) {
      std::seed_seq occ_seq{seed, static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(cam),
                            std::uint64_t{0x0CC1}};
      std::mt19937_64 occ_rng(occ_seq);
      const fs::path rel = fs::path("cam" + std::to_string(cam)) / name;
      fs::create_directories(root / rel);
      for (std::size_t t = 0; t < spec.frames_per_track; ++t) {
        const double time = static_cast<double>(t) + (cam == 2 ? phase : 0.0);
        const double px = motion.x(time, 0.0, x_hi), py = motion.y(time);
        const bool occlude = u01(occ_rng) < spec.occlusion_probability;
        const double ox = std::clamp(std::round(px + (u01(occ_rng) - 0.5) * 16.0), 0.0,
                                     static_cast<double>(spec.width - spec.occluder_width));
        const double oy = std::round(u01(occ_rng) * static_cast<double>(spec.height - spec.occluder_height));
        write_png(root / rel / ("frame" + padded(t + 1, frame_digits) + ".png"),
                  render(spec, bg, sprite, px, py, cam, occlude, ox, oy));
      }
      manifest << name << ',' << cam << ',' << rel.generic_string() << ',' << spec.frames_per_track << ','
               << spec_hash << '\n';
    }
  }
  manifest.close();
  return load_dataset(root, DatasetFormat::kSyntheticDir);
}

}  // namespace reid
