#include "reid/vision.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "reid/feature_net.hpp"

namespace reid {

Image rgb_to_yuv(const RawFrame& frame) {
  validate_frame(frame);
  const std::size_t h = frame.height, w = frame.width;
  Image out(Shape{3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto* p = frame.pixel(x, y);
      const double r = p[0] / 255.0, g = p[1] / 255.0, b = p[2] / 255.0;
      const double luma = 0.299 * r + 0.587 * g + 0.114 * b;
      out.at(0, y, x) = static_cast<float>(luma);
      out.at(1, y, x) = static_cast<float>(0.492 * (b - luma));
      out.at(2, y, x) = static_cast<float>(0.877 * (r - luma));
    }
  }
  return out;
}

Image channel(const Image& grid, std::size_t c) {
  if (grid.rank() != 3 || c >= grid.dim(0)) throw std::invalid_argument("channel: index out of range");
  const std::size_t plane = grid.dim(1) * grid.dim(2);
  return Image(Shape{1, grid.dim(1), grid.dim(2)},
               std::vector<float>(grid.data() + c * plane, grid.data() + (c + 1) * plane));
}

std::size_t FlowField::degenerate_count() const {
  return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), std::uint8_t{1}));
}

namespace {

struct PlaneView {
  std::size_t h, w;
  const float* data;
  float at(std::ptrdiff_t y, std::ptrdiff_t x) const {
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(h) - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(w) - 1);
    return data[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  }
};

PlaneView as_plane(const Image& g, const char* what) {
  if (g.rank() == 2) return {g.dim(0), g.dim(1), g.data()};
  if (g.rank() == 3 && g.dim(0) == 1) return {g.dim(1), g.dim(2), g.data()};
  throw std::invalid_argument(std::string("lucas_kanade_flow: ") + what + " must be a single-channel grid, got " +
                              shape_string(g.shape()));
}

}  // namespace

FlowField lucas_kanade_flow(const Image& prev, const Image& next, const LucasKanadeOptions& opt) {
  const auto a = as_plane(prev, "prev");
  const auto b = as_plane(next, "next");
  if (a.h != b.h || a.w != b.w) throw std::invalid_argument("lucas_kanade_flow: grid sizes differ");
  if (opt.window == 0 || opt.window % 2 == 0) throw std::invalid_argument("lucas_kanade_flow: window must be odd");
  const std::size_t h = a.h, w = a.w, n = h * w;

  // Spatial gradients of the mean of both frames, temporal difference next - prev.
  std::vector<double> ix(n), iy(n), it(n);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto sy = static_cast<std::ptrdiff_t>(y), sx = static_cast<std::ptrdiff_t>(x);
      const double gx = (a.at(sy, sx + 1) - a.at(sy, sx - 1) + b.at(sy, sx + 1) - b.at(sy, sx - 1)) / 4.0;
      const double gy = (a.at(sy + 1, sx) - a.at(sy - 1, sx) + b.at(sy + 1, sx) - b.at(sy - 1, sx)) / 4.0;
      ix[y * w + x] = gx;
      iy[y * w + x] = gy;
      it[y * w + x] = static_cast<double>(b.at(sy, sx)) - a.at(sy, sx);
    }
  }

  FlowField out{Image(Shape{2, h, w}), std::vector<std::uint8_t>(n, 0)};
  const auto r = static_cast<std::ptrdiff_t>(opt.window / 2);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double sxx = 0, sxy = 0, syy = 0, sxt = 0, syt = 0;
      const auto y0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(y) - r);
      const auto y1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(h) - 1, static_cast<std::ptrdiff_t>(y) + r);
      const auto x0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(x) - r);
      const auto x1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w) - 1, static_cast<std::ptrdiff_t>(x) + r);
      for (auto yy = y0; yy <= y1; ++yy) {
        for (auto xx = x0; xx <= x1; ++xx) {
          const std::size_t k = static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx);
          sxx += ix[k] * ix[k];
          sxy += ix[k] * iy[k];
          syy += iy[k] * iy[k];
          sxt += ix[k] * it[k];
          syt += iy[k] * it[k];
        }
      }
      const double tr = sxx + syy;
      const double disc = std::sqrt((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy);
      const double lambda_min = 0.5 * (tr - disc);
      const std::size_t k = y * w + x;
      if (!(lambda_min >= opt.min_eigenvalue)) {
        out.degenerate[k] = 1;
        continue;
      }
      const double det = sxx * syy - sxy * sxy;
      out.flow[k] = static_cast<float>((-syy * sxt + sxy * syt) / det);
      out.flow[n + k] = static_cast<float>((sxy * sxt - sxx * syt) / det);
    }
  }
  return out;
}

Image resize_bilinear(const Image& grid, std::size_t out_h, std::size_t out_w) {
  if (grid.rank() != 3) throw std::invalid_argument("resize_bilinear: expected C×H×W, got " + shape_string(grid.shape()));
  const std::size_t c = grid.dim(0), h = grid.dim(1), w = grid.dim(2);
  if (h < 2 || w < 2) throw std::invalid_argument("resize_bilinear: source must be at least 2x2");
  if (out_h == 0 || out_w == 0) throw std::invalid_argument("resize_bilinear: empty target");
  if (h == out_h && w == out_w) return grid;

  const double sy = out_h > 1 ? static_cast<double>(h - 1) / static_cast<double>(out_h - 1) : 0.0;
  const double sx = out_w > 1 ? static_cast<double>(w - 1) / static_cast<double>(out_w - 1) : 0.0;
  Image out(Shape{c, out_h, out_w});
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = y * sy;
    const std::size_t y0 = std::min(static_cast<std::size_t>(fy), h - 2);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = x * sx;
      const std::size_t x0 = std::min(static_cast<std::size_t>(fx), w - 2);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = (1 - wx) * grid.at(ch, y0, x0) + wx * grid.at(ch, y0, x0 + 1);
        const double bot = (1 - wx) * grid.at(ch, y0 + 1, x0) + wx * grid.at(ch, y0 + 1, x0 + 1);
        out.at(ch, y, x) = static_cast<float>((1 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

Image assemble_input(const Image& yuv, const Image& flow) {
  if (yuv.rank() != 3 || yuv.dim(0) != 3) throw std::invalid_argument("assemble_input: colour grid must be 3×H×W");
  if (flow.rank() != 3 || flow.dim(0) != 2) throw std::invalid_argument("assemble_input: flow grid must be 2×H×W");
  if (yuv.dim(1) != flow.dim(1) || yuv.dim(2) != flow.dim(2)) {
    throw std::invalid_argument("assemble_input: colour " + shape_string(yuv.shape()) + " and flow " +
                                shape_string(flow.shape()) + " extents differ");
  }
  std::vector<float> v(yuv.storage());
  v.insert(v.end(), flow.storage().begin(), flow.storage().end());
  return Image(Shape{5, yuv.dim(1), yuv.dim(2)}, std::move(v));
}

const char* channel_name(InputChannel c) {
  switch (c) {
    case InputChannel::kY: return "Y";
    case InputChannel::kU: return "U";
    case InputChannel::kV: return "V";
    case InputChannel::kFlowX: return "flow-x";
    case InputChannel::kFlowY: return "flow-y";
  }
  return "?";
}

ChannelStats compute_channel_stats(const std::vector<const Image*>& frames) {
  if (frames.empty()) throw std::invalid_argument("normalization: empty training set");
  const std::size_t c = frames.front()->dim(0);
  ChannelStats s{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0), {}};
  std::vector<std::size_t> count(c, 0);
  for (const auto* f : frames) {
    if (f->rank() != 3 || f->dim(0) != c) throw std::invalid_argument("normalization: inconsistent channel counts");
    const std::size_t plane = f->dim(1) * f->dim(2);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < plane; ++p) s.mean[ch] += (*f)[ch * plane + p];
      count[ch] += plane;
    }
  }
  for (std::size_t ch = 0; ch < c; ++ch) s.mean[ch] /= static_cast<double>(count[ch]);
  for (const auto* f : frames) {
    const std::size_t plane = f->dim(1) * f->dim(2);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = (*f)[ch * plane + p] - s.mean[ch];
        s.stddev[ch] += d * d;
      }
    }
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    s.stddev[ch] = std::sqrt(s.stddev[ch] / static_cast<double>(count[ch]));
    if (s.stddev[ch] == 0.0) {
      std::cerr << "warning: channel " << ch << " has zero variance over the training set; using stddev 1\n";
      s.stddev[ch] = 1.0;
      s.guarded.push_back(ch);
    }
  }
  return s;
}

void normalize_frame(Image& frame, const ChannelStats& stats) {
  if (frame.rank() != 3 || frame.dim(0) != stats.mean.size()) {
    throw std::invalid_argument("normalize_frame: frame " + shape_string(frame.shape()) + " does not match " +
                                std::to_string(stats.mean.size()) + " channel statistics");
  }
  const std::size_t plane = frame.dim(1) * frame.dim(2);
  for (std::size_t ch = 0; ch < frame.dim(0); ++ch) {
    const double m = stats.mean[ch], inv = 1.0 / stats.stddev[ch];
    float* p = frame.data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] = static_cast<float>((p[i] - m) * inv);
  }
}

ChannelStats normalize_dataset(std::vector<std::vector<Image>>& sequences) {
  std::vector<const Image*> all;
  for (const auto& seq : sequences)
    for (const auto& f : seq) all.push_back(&f);
  auto stats = compute_channel_stats(all);
  for (auto& seq : sequences)
    for (auto& f : seq) normalize_frame(f, stats);
  return stats;
}

AugmentParams sample_augment(std::mt19937_64& rng, std::size_t src_h, std::size_t src_w, std::size_t dst_h,
                             std::size_t dst_w) {
  if (src_h < dst_h || src_w < dst_w) throw std::invalid_argument("augment: frames smaller than the crop target");
  AugmentParams p;
  p.offset_y = std::uniform_int_distribution<std::size_t>(0, src_h - dst_h)(rng);
  p.offset_x = std::uniform_int_distribution<std::size_t>(0, src_w - dst_w)(rng);
  p.mirror = std::bernoulli_distribution(0.5)(rng);
  return p;
}

Image crop_mirror(const Image& frame, const AugmentParams& p, std::size_t dst_h, std::size_t dst_w) {
  if (frame.rank() != 3) throw std::invalid_argument("crop: expected C×H×W");
  const std::size_t c = frame.dim(0);
  if (p.offset_y + dst_h > frame.dim(1) || p.offset_x + dst_w > frame.dim(2)) {
    throw std::invalid_argument("crop: window leaves the source frame");
  }
  Image out(Shape{c, dst_h, dst_w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float sign = (p.mirror && ch == static_cast<std::size_t>(InputChannel::kFlowX)) ? -1.0f : 1.0f;
    for (std::size_t y = 0; y < dst_h; ++y) {
      for (std::size_t x = 0; x < dst_w; ++x) {
        const std::size_t sx = p.mirror ? dst_w - 1 - x : x;
        out.at(ch, y, x) = sign * frame.at(ch, p.offset_y + y, p.offset_x + sx);
      }
    }
  }
  return out;
}

std::vector<Image> augment(const std::vector<Image>& sequence, std::mt19937_64& rng, std::size_t dst_h,
                           std::size_t dst_w) {
  if (sequence.empty()) return {};
  const auto p = sample_augment(rng, sequence.front().dim(1), sequence.front().dim(2), dst_h, dst_w);
  std::vector<Image> out;
  out.reserve(sequence.size());
  for (const auto& f : sequence) out.push_back(crop_mirror(f, p, dst_h, dst_w));
  return out;
}

Image center_crop(const Image& frame, std::size_t dst_h, std::size_t dst_w) {
  if (frame.rank() != 3 || frame.dim(1) < dst_h || frame.dim(2) < dst_w) {
    throw std::invalid_argument("center_crop: frame smaller than the crop target");
  }
  return crop_mirror(frame, {(frame.dim(1) - dst_h) / 2, (frame.dim(2) - dst_w) / 2, false}, dst_h, dst_w);
}

std::vector<Image> prepare_track(const std::vector<RawFrame>& frames, const LucasKanadeOptions& lk) {
  const std::size_t out_h = kInputHeight + kCropMargin, out_w = kInputWidth + kCropMargin;
  std::vector<Image> yuv;
  yuv.reserve(frames.size());
  for (const auto& f : frames) yuv.push_back(rgb_to_yuv(f));

  std::vector<Image> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    Image flow;
    if (frames.size() == 1) {
      flow = Image(Shape{2, frames[i].height, frames[i].width});
    } else {
      const std::size_t a = (i + 1 < frames.size()) ? i : i - 1;
      flow = lucas_kanade_flow(channel(yuv[a], 0), channel(yuv[a + 1], 0), lk).flow;
    }
    out.push_back(assemble_input(resize_bilinear(yuv[i], out_h, out_w), resize_bilinear(flow, out_h, out_w)));
  }
  return out;
}

}  // namespace reid
