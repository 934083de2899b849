#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "reid/autograd.hpp"
#include "reid/param_store.hpp"
#include "reid/tensor.hpp"

namespace reid {

inline constexpr std::size_t kInputChannels = 5;
inline constexpr std::size_t kInputHeight = 56;
inline constexpr std::size_t kInputWidth = 40;
inline constexpr std::size_t kFeatureDim = 128;
inline constexpr std::size_t kConvMapChannels = 32;
inline constexpr std::size_t kConvMapHeight = 10;
inline constexpr std::size_t kConvMapWidth = 8;
inline constexpr std::size_t kConvMapSize = kConvMapChannels * kConvMapHeight * kConvMapWidth;

struct FeatureNetConfig {
  /// tanh after the final fully connected layer (`fc_activation = tanh`).
  bool fc_tanh = true;
};

/// Adds featnet.conv{1,2,3}.{w,b} and featnet.fc.{w,b} with He-scaled
/// normal weights and zero biases.
template <typename T>
void init_feature_net(ParamStore<T>& params, std::mt19937_64& rng);

/// Per-frame CNN outputs.
template <typename T>
struct FeatureBundle {
  Tensor<T> conv_map;  // 32×10×8, after the third pooling stage
  Tensor<T> feature;   // 128
};

/// Graph handles produced by one frame's forward pass.
struct FeatureVars {
  Var conv_map;
  Var feature;
  std::vector<Var> stages;  // input, each conv/pool output, flatten, fc
};

/// Records conv(pad 4) -> maxpool 2×2 -> tanh three times, then flatten -> fc.
template <typename T>
FeatureVars build_feature_net(Graph<T>& g, Var input, const ParamStore<T>& params,
                              const FeatureNetConfig& cfg);

template <typename T>
FeatureBundle<T> extract_features(const Tensor<T>& input, const ParamStore<T>& params,
                                  const FeatureNetConfig& cfg);

/// Order-preserving map of extract_features; frames are evaluated on up to
/// `workers` threads.
template <typename T>
std::vector<FeatureBundle<T>> extract_sequence(std::span<const Tensor<T>> frames, const ParamStore<T>& params,
                                               const FeatureNetConfig& cfg, std::size_t workers = 1);

/// One frame's recorded forward pass, kept alive until its backward sweep.
template <typename T>
class FrameForward {
 public:
  FrameForward(const Tensor<T>& input, const ParamStore<T>& params, const FeatureNetConfig& cfg);

  const Tensor<T>& conv_map() const { return graph_.value(vars_.conv_map); }
  const Tensor<T>& feature() const { return graph_.value(vars_.feature); }

  /// Backpropagates the given output gradients through this frame only.
  void backward(const Tensor<T>& d_conv_map, const Tensor<T>& d_feature);
  void accumulate_into(ParamStore<T>& params) const { graph_.accumulate_param_grads(params); }

 private:
  Graph<T> graph_;
  FeatureVars vars_;
};

void check_frame_shape(const Shape& shape);

}  // namespace reid
