#include "reid/feature_net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "reid/parallel.hpp"

namespace reid {

namespace {

struct ConvStage {
  const char* name;
  std::size_t in, out;
};

constexpr ConvStage kStages[] = {
    {"featnet.conv1", kInputChannels, 16},
    {"featnet.conv2", 16, 32},
    {"featnet.conv3", 32, kConvMapChannels},
};
constexpr std::size_t kKernel = 5;
constexpr Conv2dOptions kConvOptions{1, 1, 4, 4};
constexpr Pool2dOptions kPoolOptions{2, 2, 2, 2};

template <typename T>
Tensor<T> he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace

void check_frame_shape(const Shape& shape) {
  if (shape != Shape{kInputChannels, kInputHeight, kInputWidth}) {
    throw std::invalid_argument("feature net: expected a 5x56x40 frame tensor, got " + shape_string(shape));
  }
}

template <typename T>
void init_feature_net(ParamStore<T>& params, std::mt19937_64& rng) {
  for (const auto& s : kStages) {
    params.add(std::string(s.name) + ".w", he_normal<T>({s.out, s.in, kKernel, kKernel}, s.in * kKernel * kKernel, rng));
    params.add(std::string(s.name) + ".b", Tensor<T>(Shape{s.out}));
  }
  params.add("featnet.fc.w", he_normal<T>({kFeatureDim, kConvMapSize}, kConvMapSize, rng));
  params.add("featnet.fc.b", Tensor<T>(Shape{kFeatureDim}));
}

template <typename T>
FeatureVars build_feature_net(Graph<T>& g, Var input, const ParamStore<T>& params, const FeatureNetConfig& cfg) {
  check_frame_shape(g.value(input).shape());
  FeatureVars out;
  out.stages.push_back(input);
  Var x = input;
  for (const auto& s : kStages) {
    const std::string base(s.name);
    x = conv2d(g, x, g.parameter(params, base + ".w"), g.parameter(params, base + ".b"), kConvOptions);
    out.stages.push_back(x);
    x = maxpool2d(g, x, kPoolOptions);
    out.stages.push_back(x);
    x = activate(g, x, Activation::kTanh);
  }
  out.conv_map = x;
  Var flat = reshape(g, x, Shape{kConvMapSize});
  out.stages.push_back(flat);
  Var fc = linear(g, flat, g.parameter(params, "featnet.fc.w"), g.parameter(params, "featnet.fc.b"));
  if (cfg.fc_tanh) fc = activate(g, fc, Activation::kTanh);
  out.stages.push_back(fc);
  out.feature = fc;
  return out;
}

template <typename T>
FeatureBundle<T> extract_features(const Tensor<T>& input, const ParamStore<T>& params, const FeatureNetConfig& cfg) {
  Graph<T> g(/*record=*/false);
  const auto vars = build_feature_net(g, g.constant(input), params, cfg);
  return {g.value(vars.conv_map), g.value(vars.feature)};
}

template <typename T>
std::vector<FeatureBundle<T>> extract_sequence(std::span<const Tensor<T>> frames, const ParamStore<T>& params,
                                               const FeatureNetConfig& cfg, std::size_t workers) {
  if (frames.empty()) throw std::invalid_argument("extract_sequence: empty sequence");
  std::vector<FeatureBundle<T>> out(frames.size());
  parallel_for(frames.size(), workers, [&](std::size_t i) { out[i] = extract_features(frames[i], params, cfg); });
  return out;
}

template <typename T>
FrameForward<T>::FrameForward(const Tensor<T>& input, const ParamStore<T>& params, const FeatureNetConfig& cfg)
    : graph_(true) {
  vars_ = build_feature_net(graph_, graph_.constant(input), params, cfg);
}

template <typename T>
void FrameForward<T>::backward(const Tensor<T>& d_conv_map, const Tensor<T>& d_feature) {
  graph_.backward({{vars_.conv_map, d_conv_map}, {vars_.feature, d_feature}});
}

template void init_feature_net<float>(ParamStore<float>&, std::mt19937_64&);
template void init_feature_net<double>(ParamStore<double>&, std::mt19937_64&);
template FeatureVars build_feature_net<float>(Graph<float>&, Var, const ParamStore<float>&, const FeatureNetConfig&);
template FeatureVars build_feature_net<double>(Graph<double>&, Var, const ParamStore<double>&,
                                               const FeatureNetConfig&);
template FeatureBundle<float> extract_features<float>(const Tensor<float>&, const ParamStore<float>&,
                                                      const FeatureNetConfig&);
template FeatureBundle<double> extract_features<double>(const Tensor<double>&, const ParamStore<double>&,
                                                        const FeatureNetConfig&);
template std::vector<FeatureBundle<float>> extract_sequence<float>(std::span<const Tensor<float>>,
                                                                   const ParamStore<float>&,
                                                                   const FeatureNetConfig&, std::size_t);
template std::vector<FeatureBundle<double>> extract_sequence<double>(std::span<const Tensor<double>>,
                                                                     const ParamStore<double>&,
                                                                     const FeatureNetConfig&, std::size_t);
template class FrameForward<float>;
template class FrameForward<double>;

}  // namespace reid
