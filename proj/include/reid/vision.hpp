#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "reid/tensor.hpp"

namespace reid {

/// Real-valued C×H×W grid used throughout preprocessing.
using Image = Tensor<float>;

/// 8-bit RGB frame, row-major, three bytes per pixel.
struct RawFrame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  RawFrame() = default;
  RawFrame(std::size_t w, std::size_t h);

  std::uint8_t* pixel(std::size_t x, std::size_t y) { return rgb.data() + 3 * (y * width + x); }
  const std::uint8_t* pixel(std::size_t x, std::size_t y) const { return rgb.data() + 3 * (y * width + x); }
};

/// Rejects frames smaller than 8×8 or with a pixel buffer of the wrong size.
void validate_frame(const RawFrame& frame);

RawFrame read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RawFrame& frame);
void write_ppm(const std::filesystem::path& path, const RawFrame& frame);

/// BT.601 on [0,1]-scaled RGB: Y = .299R + .587G + .114B, U = .492(B - Y),
/// V = .877(R - Y). Returns a 3×H×W grid.
Image rgb_to_yuv(const RawFrame& frame);

/// Channel `c` of a C×H×W grid as a 1×H×W grid.
Image channel(const Image& grid, std::size_t c);

struct LucasKanadeOptions {
  std::size_t window = 5;
  /// Smallest structure-tensor eigenvalue accepted; below it the flow is zero.
  double min_eigenvalue = 1e-4;
};

struct FlowField {
  Image flow;                         // 2×H×W: x (horizontal) then y (vertical)
  std::vector<std::uint8_t> degenerate;  // 1 where the structure tensor was rejected

  std::size_t degenerate_count() const;
};

/// Single-level Lucas-Kanade over a square window on 1×H×W (or H×W) luma grids.
/// Displacements are in pixels per frame.
FlowField lucas_kanade_flow(const Image& prev, const Image& next, const LucasKanadeOptions& opt = {});

/// Corner-aligned bilinear resampling of every channel to out_h×out_w.
Image resize_bilinear(const Image& grid, std::size_t out_h, std::size_t out_w);

/// Stacks Y, U, V and flow-x, flow-y into a 5×H×W tensor.
Image assemble_input(const Image& yuv, const Image& flow);

enum class InputChannel : std::uint8_t { kY = 0, kU = 1, kV = 2, kFlowX = 3, kFlowY = 4 };
inline constexpr std::array<InputChannel, 5> kChannelOrder = {InputChannel::kY, InputChannel::kU, InputChannel::kV,
                                                              InputChannel::kFlowX, InputChannel::kFlowY};
const char* channel_name(InputChannel c);

/// Per-channel mean and standard deviation over a training set.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  /// Channels whose deviation was zero and were given stddev 1.
  std::vector<std::size_t> guarded;
};

/// Two-pass mean/variance over every pixel of every frame.
ChannelStats compute_channel_stats(const std::vector<const Image*>& frames);

/// (x - mean) / stddev per channel, in place.
void normalize_frame(Image& frame, const ChannelStats& stats);

/// Computes stats over all frames of all sequences and normalizes them in place.
ChannelStats normalize_dataset(std::vector<std::vector<Image>>& sequences);

/// One crop offset and mirror decision shared by a whole sequence.
struct AugmentParams {
  std::size_t offset_y = 0;
  std::size_t offset_x = 0;
  bool mirror = false;
};

AugmentParams sample_augment(std::mt19937_64& rng, std::size_t src_h, std::size_t src_w, std::size_t dst_h,
                             std::size_t dst_w);

/// Crops dst_h×dst_w at the given offset; mirroring flips columns and negates
/// the flow-x channel (index 3) when present.
Image crop_mirror(const Image& frame, const AugmentParams& p, std::size_t dst_h, std::size_t dst_w);

/// Crop/mirror with parameters drawn once for the whole sequence.
std::vector<Image> augment(const std::vector<Image>& sequence, std::mt19937_64& rng, std::size_t dst_h,
                           std::size_t dst_w);

/// Centered crop, used at test time.
Image center_crop(const Image& frame, std::size_t dst_h, std::size_t dst_w);

/// Margin kept around the network input so training crops can shift.
inline constexpr std::size_t kCropMargin = 8;

/// Frame -> YUV + flow, resized to (56 + margin)×(40 + margin).
/// Flow of frame i is computed from frame i to i+1; the last frame uses the
/// flow from its predecessor; a lone frame gets zero flow.
std::vector<Image> prepare_track(const std::vector<RawFrame>& frames, const LucasKanadeOptions& lk = {});

}  // namespace reid
