#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace reid {

/// |a - n| / max(|a|, |n|) in the Euclidean norm; 0 when both vanish.
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

/// (f(x + eps) - f(x - eps)) / 2 eps, restoring x afterwards.
template <typename F>
double central_difference(F&& f, double& x, double eps) {
  const double saved = x;
  x = saved + eps;
  const double up = f();
  x = saved - eps;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * eps);
}

/// Indices to probe: all of them when n <= max_count, else a seeded sample.
inline std::vector<std::size_t> probe_indices(std::size_t n, std::size_t max_count, std::mt19937_64& rng) {
  std::vector<std::size_t> idx;
  if (n <= max_count) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    return idx;
  }
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t i = 0; i < max_count; ++i) idx.push_back(pick(rng));
  return idx;
}

struct GradCheckReport {
  std::string name;
  double max_relative_error = 0;
  double threshold = 0;
  std::size_t cases = 0;
  double seconds = 0;
  bool passed() const { return max_relative_error < threshold; }
};

inline constexpr double kFiniteDifferenceStep = 1e-5;
/// Smaller step for the composed network: one first-layer weight moves every
/// pooled window, and a 1e-5 step flips max-pool winners on noise inputs.
inline constexpr double kEndToEndStep = 1e-6;
inline constexpr double kOpTolerance = 1e-4;
inline constexpr double kEndToEndTolerance = 1e-3;

/// Finite-difference checks for every differentiable operation at float64,
/// each on three random shapes.
std::vector<GradCheckReport> run_op_gradchecks(std::uint64_t seed);

/// Full L_id1 + L_hinge + L_id2 on a 2-frame pair; every parameter tensor is
/// probed at `coords_per_tensor` sampled coordinates.
GradCheckReport run_end_to_end_gradcheck(std::uint64_t seed, std::size_t coords_per_tensor = 6);

}  // namespace reid
