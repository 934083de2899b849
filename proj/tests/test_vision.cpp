#include <doctest.h>

#include <cmath>
#include <random>

#include "reid/vision.hpp"
#include "support.hpp"

using namespace reid;

namespace {

RawFrame solid(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RawFrame f(w, h);
  for (std::size_t i = 0; i < w * h; ++i) {
    f.rgb[3 * i] = r;
    f.rgb[3 * i + 1] = g;
    f.rgb[3 * i + 2] = b;
  }
  return f;
}

// Smooth random texture: a sum of random low-frequency sinusoids sampled at (y, x + shift).
Image texture(std::size_t h, std::size_t w, double shift_x, double shift_y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(0.15, 0.6), phase(0, 6.283), amp(0.05, 0.15);
  struct Wave { double fx, fy, ph, a; };
  std::vector<Wave> waves;
  for (int i = 0; i < 12; ++i) waves.push_back({freq(rng) * (i % 2 ? 1 : -1), freq(rng), phase(rng), amp(rng)});
  Image g(Shape{1, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double v = 0.5;
      for (const auto& wv : waves)
        v += wv.a * std::sin(wv.fx * (static_cast<double>(x) - shift_x) + wv.fy * (static_cast<double>(y) - shift_y) + wv.ph);
      g.at(0, y, x) = static_cast<float>(v);
    }
  return g;
}

double interior_flow_error(const FlowField& f, double u, double v, std::size_t border) {
  const std::size_t h = f.flow.dim(1), w = f.flow.dim(2);
  double err = 0;
  std::size_t n = 0;
  for (std::size_t y = border; y + border < h; ++y)
    for (std::size_t x = border; x + border < w; ++x) {
      err += std::abs(f.flow.at(0, y, x) - u) + std::abs(f.flow.at(1, y, x) - v);
      ++n;
    }
  return err / (2.0 * static_cast<double>(n));
}

}  // namespace

TEST_CASE("rgb_to_yuv: black, white and red") {
  auto black = rgb_to_yuv(solid(8, 8, 0, 0, 0));
  auto white = rgb_to_yuv(solid(8, 8, 255, 255, 255));
  auto red = rgb_to_yuv(solid(8, 8, 255, 0, 0));
  CHECK(black.shape() == Shape{3, 8, 8});
  for (std::size_t c = 0; c < 3; ++c) CHECK(black.at(c, 3, 3) == doctest::Approx(0.0));
  CHECK(white.at(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(white.at(1, 0, 0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(white.at(2, 0, 0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(red.at(0, 5, 2) == doctest::Approx(0.299).epsilon(1e-6));
  CHECK(red.at(1, 5, 2) == doctest::Approx(0.492 * -0.299).epsilon(1e-6));
  CHECK(red.at(2, 5, 2) == doctest::Approx(0.877 * 0.701).epsilon(1e-6));
}

TEST_CASE("validate_frame rejects tiny or inconsistent frames") {
  CHECK_THROWS_AS(validate_frame(RawFrame(7, 8)), std::invalid_argument);
  RawFrame bad(8, 8);
  bad.rgb.pop_back();
  CHECK_THROWS_AS(validate_frame(bad), std::invalid_argument);
  CHECK_NOTHROW(validate_frame(RawFrame(8, 8)));
}

TEST_CASE("png and ppm round trip") {
  testing::TempDir dir("vision-io");
  std::mt19937_64 rng(4);
  RawFrame f(11, 9);
  for (auto& b : f.rgb) b = static_cast<std::uint8_t>(rng());
  write_png(dir.path() / "a.png", f);
  write_ppm(dir.path() / "a.ppm", f);
  for (const char* name : {"a.png", "a.ppm"}) {
    auto back = read_image(dir.path() / name);
    CHECK(back.width == 11);
    CHECK(back.height == 9);
    CHECK(back.rgb == f.rgb);
  }
  CHECK_THROWS(read_image(dir.path() / "missing.png"));
}

TEST_CASE("lucas_kanade_flow: identical frames give zero flow") {
  auto a = texture(40, 32, 0, 0, 1);
  auto f = lucas_kanade_flow(a, a);
  for (auto v : f.flow.values()) CHECK(v == 0.0f);
}

TEST_CASE("lucas_kanade_flow: integer translation is recovered") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto prev = texture(48, 40, 0, 0, seed);
    auto right = texture(48, 40, 1, 0, seed);
    auto down = texture(48, 40, 0, 1, seed);
    CHECK(interior_flow_error(lucas_kanade_flow(prev, right), 1, 0, 4) < 0.2);
    CHECK(interior_flow_error(lucas_kanade_flow(prev, down), 0, 1, 4) < 0.2);
  }
}

TEST_CASE("lucas_kanade_flow: uniform images are degenerate everywhere") {
  Image a(Shape{1, 20, 16}, 0.4f), b(Shape{1, 20, 16}, 0.7f);
  auto f = lucas_kanade_flow(a, b);
  CHECK(f.degenerate_count() == 20 * 16);
  for (auto v : f.flow.values()) CHECK(v == 0.0f);
}

TEST_CASE("lucas_kanade_flow: argument checks") {
  Image a(Shape{1, 8, 8}), b(Shape{1, 8, 9}), c(Shape{3, 8, 8});
  CHECK_THROWS_AS(lucas_kanade_flow(a, b), std::invalid_argument);
  CHECK_THROWS_AS(lucas_kanade_flow(c, c), std::invalid_argument);
  CHECK_THROWS_AS(lucas_kanade_flow(a, a, {4, 1e-4}), std::invalid_argument);
}

TEST_CASE("resize_bilinear: constant, identity and ramp") {
  Image k(Shape{2, 30, 17}, 0.25f);
  for (auto v : resize_bilinear(k, 56, 40).values()) CHECK(v == doctest::Approx(0.25));

  std::mt19937_64 rng(9);
  auto noise = testing::random_tensor<float>(Shape{5, 56, 40}, rng);
  CHECK(resize_bilinear(noise, 56, 40).storage() == noise.storage());

  Image ramp(Shape{1, 112, 80});
  for (std::size_t y = 0; y < 112; ++y)
    for (std::size_t x = 0; x < 80; ++x) ramp.at(0, y, x) = static_cast<float>(0.01 * y + 0.02 * x);
  auto small = resize_bilinear(ramp, 56, 40);
  double worst = 0;
  for (std::size_t y = 0; y < 56; ++y)
    for (std::size_t x = 0; x < 40; ++x) {
      const double sy = y * 111.0 / 55.0, sx = x * 79.0 / 39.0;
      worst = std::max(worst, std::abs(small.at(0, y, x) - (0.01 * sy + 0.02 * sx)));
    }
  CHECK(worst < 1e-6);
  CHECK(small.at(0, 0, 0) == ramp.at(0, 0, 0));
  CHECK(small.at(0, 55, 39) == doctest::Approx(ramp.at(0, 111, 79)).epsilon(1e-6));
}

TEST_CASE("channel stats match a direct two-pass computation") {
  std::mt19937_64 rng(21);
  std::vector<Image> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(testing::random_tensor<float>(Shape{5, 6, 4}, rng, 2.0));
  std::vector<const Image*> ptrs;
  for (const auto& f : frames) ptrs.push_back(&f);
  auto stats = compute_channel_stats(ptrs);
  for (std::size_t c = 0; c < 5; ++c) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& f : frames)
      for (std::size_t i = 0; i < 24; ++i, ++n) sum += f[c * 24 + i];
    const double mean = sum / static_cast<double>(n);
    double var = 0;
    for (const auto& f : frames)
      for (std::size_t i = 0; i < 24; ++i) var += (f[c * 24 + i] - mean) * (f[c * 24 + i] - mean);
    var /= static_cast<double>(n);
    CHECK(stats.mean[c] == doctest::Approx(mean).epsilon(1e-9));
    CHECK(stats.stddev[c] == doctest::Approx(std::sqrt(var)).epsilon(1e-9));
  }
  CHECK(stats.guarded.empty());
}

TEST_CASE("normalize_dataset: zero mean, unit variance and the constant-channel guard") {
  std::mt19937_64 rng(5);
  std::vector<std::vector<Image>> seqs(3);
  for (auto& s : seqs)
    for (int i = 0; i < 4; ++i) {
      auto f = testing::random_tensor<float>(Shape{5, 8, 6}, rng, 3.0);
      for (std::size_t k = 0; k < 48; ++k) f[k] += 7.0f;
      for (std::size_t k = 4 * 48; k < 5 * 48; ++k) f[k] = 2.5f;  // constant flow-y
      s.push_back(f);
    }
  auto stats = normalize_dataset(seqs);
  CHECK(stats.guarded == std::vector<std::size_t>{4});
  CHECK(stats.stddev[4] == 1.0);
  std::vector<const Image*> ptrs;
  for (auto& s : seqs)
    for (auto& f : s) ptrs.push_back(&f);
  auto after = compute_channel_stats(ptrs);
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(std::abs(after.mean[c]) < 1e-3);
    CHECK(std::abs(after.stddev[c] * after.stddev[c] - 1.0) < 1e-3);
  }
  for (auto* f : ptrs)
    for (std::size_t k = 4 * 48; k < 5 * 48; ++k) CHECK((*f)[k] == 0.0f);
}

TEST_CASE("assemble_input stacks channels in fixed order") {
  Image yuv(Shape{3, 56, 40}), flow(Shape{2, 56, 40});
  auto zero = assemble_input(yuv, flow);
  CHECK(zero.shape() == Shape{5, 56, 40});
  for (auto v : zero.values()) CHECK(v == 0.0f);
  for (std::size_t c = 0; c < 3; ++c) yuv.at(c, 1, 2) = static_cast<float>(c + 1);
  flow.at(0, 1, 2) = 4;
  flow.at(1, 1, 2) = 5;
  auto x = assemble_input(yuv, flow);
  for (std::size_t c = 0; c < 5; ++c) CHECK(x.at(c, 1, 2) == static_cast<float>(c + 1));
  CHECK(std::string(channel_name(InputChannel::kFlowX)) == "flow-x");
  CHECK_THROWS_AS(assemble_input(yuv, Image(Shape{2, 56, 41})), std::invalid_argument);
}

TEST_CASE("augment: bounds, determinism, coherence and mirror involution") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 1000; ++i) {
    auto p = sample_augment(rng, 64, 48, 56, 40);
    CHECK(p.offset_y + 56 <= 64);
    CHECK(p.offset_x + 40 <= 48);
  }

  std::vector<Image> seq;
  for (int i = 0; i < 5; ++i) seq.push_back(testing::random_tensor<float>(Shape{5, 64, 48}, rng));
  std::mt19937_64 r1(77), r2(77);
  auto a = augment(seq, r1, 56, 40);
  auto b = augment(seq, r2, 56, 40);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(a[i].storage() == b[i].storage());

  // Every frame shares one transform: recover it from frame 0 and apply to the rest.
  bool found = false;
  for (std::size_t oy = 0; oy <= 8 && !found; ++oy)
    for (std::size_t ox = 0; ox <= 8 && !found; ++ox)
      for (bool m : {false, true}) {
        AugmentParams p{oy, ox, m};
        if (crop_mirror(seq[0], p, 56, 40).storage() != a[0].storage()) continue;
        found = true;
        for (std::size_t i = 1; i < 5; ++i) CHECK(crop_mirror(seq[i], p, 56, 40).storage() == a[i].storage());
        break;
      }
  CHECK(found);

  AugmentParams mirror{0, 0, true}, plain{0, 0, false};
  auto twice = crop_mirror(crop_mirror(seq[0], mirror, 64, 48), mirror, 64, 48);
  CHECK(twice.storage() == seq[0].storage());
  auto once = crop_mirror(seq[0], mirror, 64, 48);
  auto id = crop_mirror(seq[0], plain, 64, 48);
  CHECK(id.storage() == seq[0].storage());
  CHECK(once.at(3, 10, 0) == -seq[0].at(3, 10, 47));
  CHECK(once.at(4, 10, 0) == seq[0].at(4, 10, 47));
  CHECK(once.at(0, 10, 5) == seq[0].at(0, 10, 42));
}

TEST_CASE("center_crop takes the middle window") {
  std::mt19937_64 rng(3);
  auto f = testing::random_tensor<float>(Shape{5, 64, 48}, rng);
  auto c = center_crop(f, 56, 40);
  CHECK(c.shape() == Shape{5, 56, 40});
  CHECK(c.at(2, 0, 0) == f.at(2, 4, 4));
  CHECK(c.at(4, 55, 39) == f.at(4, 59, 43));
}

TEST_CASE("prepare_track: shapes and flow of the last frame") {
  std::vector<RawFrame> frames;
  std::mt19937_64 rng(12);
  for (int i = 0; i < 3; ++i) {
    RawFrame f(32, 64);
    for (auto& b : f.rgb) b = static_cast<std::uint8_t>(rng());
    frames.push_back(f);
  }
  auto track = prepare_track(frames);
  REQUIRE(track.size() == 3);
  for (const auto& t : track) CHECK(t.shape() == Shape{5, 56 + kCropMargin, 40 + kCropMargin});
  for (std::size_t k = 3 * 64 * 48; k < 5 * 64 * 48; ++k) CHECK(track[2][k] == track[1][k]);

  auto lone = prepare_track({frames[0]});
  REQUIRE(lone.size() == 1);
  for (std::size_t k = 3 * 64 * 48; k < 5 * 64 * 48; ++k) CHECK(lone[0][k] == 0.0f);

  // A static track has zero flow.
  auto still = prepare_track({frames[0], frames[0]});
  for (std::size_t k = 3 * 64 * 48; k < 5 * 64 * 48; ++k) CHECK(still[0][k] == 0.0f);
}
