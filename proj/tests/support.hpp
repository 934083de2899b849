#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "reid/tensor.hpp"
#include "reid/vision.hpp"

namespace reid::testing {

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(d(rng));
  return t;
}

/// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("reid-" + tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Writes `count` small noise frames named <prefix><index>.png into `dir`.
inline void write_noise_track(const std::filesystem::path& dir, std::size_t count, std::uint64_t seed,
                              const std::string& prefix = "frame", std::size_t first_index = 1) {
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> px(0, 255);
  for (std::size_t i = 0; i < count; ++i) {
    RawFrame f(16, 32);
    for (auto& b : f.rgb) b = static_cast<std::uint8_t>(px(rng));
    char name[32];
    std::snprintf(name, sizeof name, "%04zu", first_index + i);
    write_png(dir / (prefix + name + ".png"), f);
  }
}

}  // namespace reid::testing
