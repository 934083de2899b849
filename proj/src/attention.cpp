#include "reid/attention.hpp"

#include <cmath>
#include <stdexcept>

#include "reid/feature_net.hpp"

namespace reid {

namespace {

constexpr Conv2dOptions kSpatialConv{1, 1, 2, 2};
constexpr std::size_t kSpatialKernel = 5;

template <typename T>
Tensor<T> normal_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace

std::string hop_param_name(std::size_t hop, const char* field) {
  return "attn.spatial.hop" + std::to_string(hop) + "." + field;
}

template <typename T>
void init_attention(ParamStore<T>& params, const AttentionConfig& cfg, std::mt19937_64& rng) {
  params.add("attn.temporal.theta", normal_tensor<T>({kFeatureDim}, std::sqrt(2.0 / kFeatureDim), rng));
  if (cfg.temporal_bias) params.add("attn.temporal.bias", Tensor<T>(Shape{1}));
  const std::size_t fan_in = kConvMapChannels * kSpatialKernel * kSpatialKernel;
  for (std::size_t j = 1; j <= cfg.hops; ++j) {
    params.add(hop_param_name(j, "w"), normal_tensor<T>({1, kConvMapChannels, kSpatialKernel, kSpatialKernel},
                                                        std::sqrt(2.0 / static_cast<double>(fan_in)), rng));
    params.add(hop_param_name(j, "b"), Tensor<T>(Shape{1}));
  }
}

template <typename T>
std::vector<Var> temporal_scores(Graph<T>& g, const std::vector<Var>& features, Var theta, Var bias) {
  if (features.empty()) throw std::invalid_argument("temporal_scores: empty feature list");
  const std::size_t dim = g.value(theta).size();
  std::vector<Var> scores;
  scores.reserve(features.size());
  for (Var x : features) {
    if (g.value(x).size() != dim) {
      throw std::invalid_argument("temporal_scores: feature of length " + std::to_string(g.value(x).size()) +
                                  " does not match theta length " + std::to_string(dim));
    }
    Var logit = dot(g, theta, x);
    if (bias.valid()) logit = add(g, logit, bias);
    scores.push_back(activate(g, logit, Activation::kSigmoid));
  }
  return scores;
}

template <typename T>
Var temporal_feature(Graph<T>& g, const std::vector<Var>& features, const std::vector<Var>& scores) {
  if (features.size() != scores.size()) {
    throw std::invalid_argument("temporal_feature: " + std::to_string(features.size()) + " features but " +
                                std::to_string(scores.size()) + " scores");
  }
  if (features.empty()) throw std::invalid_argument("temporal_feature: empty sequence");
  std::vector<Var> terms;
  terms.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) terms.push_back(scale_by(g, features[i], scores[i]));
  return add_n(g, terms);
}

template <typename T>
std::vector<Var> spatial_scores(Graph<T>& g, const std::vector<Var>& conv_maps, Var filter, Var bias) {
  std::vector<Var> maps;
  maps.reserve(conv_maps.size());
  for (Var m : conv_maps) maps.push_back(activate(g, conv2d(g, m, filter, bias, kSpatialConv), Activation::kSigmoid));
  return maps;
}

template <typename T>
std::vector<Var> spatial_scores(Graph<T>& g, const std::vector<Var>& conv_maps, const ParamStore<T>& params,
                                const AttentionConfig& cfg, std::size_t hop) {
  if (hop < 1 || hop > cfg.hops) {
    throw std::out_of_range("spatial_scores: hop " + std::to_string(hop) + " outside 1.." + std::to_string(cfg.hops));
  }
  return spatial_scores(g, conv_maps, g.parameter(params, hop_param_name(hop, "w")),
                        g.parameter(params, hop_param_name(hop, "b")));
}

template <typename T>
Var spatial_feature(Graph<T>& g, const std::vector<Var>& conv_maps, const std::vector<Var>& score_maps,
                    Var fc_weight, Var fc_bias) {
  if (conv_maps.size() != score_maps.size()) {
    throw std::invalid_argument("spatial_feature: " + std::to_string(conv_maps.size()) + " conv maps but " +
                                std::to_string(score_maps.size()) + " score maps");
  }
  if (conv_maps.empty()) throw std::invalid_argument("spatial_feature: empty sequence");
  std::vector<Var> projected;
  projected.reserve(conv_maps.size());
  for (std::size_t i = 0; i < conv_maps.size(); ++i) {
    Var masked = mul_channels(g, conv_maps[i], score_maps[i]);
    Var flat = reshape(g, masked, Shape{g.value(masked).size()});
    projected.push_back(linear(g, flat, fc_weight, fc_bias));
  }
  return add_n(g, projected);
}

template <typename T>
Var fuse(Graph<T>& g, Var f_t, const std::vector<Var>& f_s, Fusion fusion) {
  if (f_s.empty()) return add_n(g, {f_t});
  std::vector<Var> terms;
  if (fusion == Fusion::kLiteral) {
    for (Var s : f_s) terms.push_back(add(g, s, f_t));
  } else {
    terms = f_s;
    terms.push_back(f_t);
  }
  return add_n(g, terms);
}

template <typename T>
AttentionVars build_attention(Graph<T>& g, const std::vector<Var>& conv_maps, const std::vector<Var>& features,
                              const ParamStore<T>& params, const AttentionConfig& cfg) {
  AttentionVars out;
  Var theta = g.parameter(params, "attn.temporal.theta");
  Var bias = cfg.temporal_bias ? g.parameter(params, "attn.temporal.bias") : Var{};
  out.temporal = temporal_scores(g, features, theta, bias);
  out.f_t = temporal_feature(g, features, out.temporal);
  if (cfg.hops > 0) {
    Var fc_w = g.parameter(params, "featnet.fc.w");
    Var fc_b = g.parameter(params, "featnet.fc.b");
    for (std::size_t j = 1; j <= cfg.hops; ++j) {
      out.spatial.push_back(spatial_scores(g, conv_maps, params, cfg, j));
      out.f_s.push_back(spatial_feature(g, conv_maps, out.spatial.back(), fc_w, fc_b));
    }
  }
  out.embedding = fuse(g, out.f_t, out.f_s, cfg.fusion);
  return out;
}

#define REID_INSTANTIATE_ATTENTION(T)                                                                          \
  template void init_attention<T>(ParamStore<T>&, const AttentionConfig&, std::mt19937_64&);                  \
  template std::vector<Var> temporal_scores<T>(Graph<T>&, const std::vector<Var>&, Var, Var);                 \
  template Var temporal_feature<T>(Graph<T>&, const std::vector<Var>&, const std::vector<Var>&);              \
  template std::vector<Var> spatial_scores<T>(Graph<T>&, const std::vector<Var>&, Var, Var);                  \
  template std::vector<Var> spatial_scores<T>(Graph<T>&, const std::vector<Var>&, const ParamStore<T>&,       \
                                              const AttentionConfig&, std::size_t);                           \
  template Var spatial_feature<T>(Graph<T>&, const std::vector<Var>&, const std::vector<Var>&, Var, Var);     \
  template Var fuse<T>(Graph<T>&, Var, const std::vector<Var>&, Fusion);                                      \
  template AttentionVars build_attention<T>(Graph<T>&, const std::vector<Var>&, const std::vector<Var>&,      \
                                            const ParamStore<T>&, const AttentionConfig&);

REID_INSTANTIATE_ATTENTION(float)
REID_INSTANTIATE_ATTENTION(double)

}  // namespace reid
