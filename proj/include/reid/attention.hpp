#pragma once

#include <random>
#include <string>
#include <vector>

#include "reid/autograd.hpp"
#include "reid/param_store.hpp"

namespace reid {

/// How the per-hop vectors are combined with the temporal feature.
enum class Fusion {
  kLiteral,   // F = sum_j (f_s[j] + f_t); the temporal term enters once per hop
  kSingleFt,  // F = sum_j f_s[j] + f_t
};

struct AttentionConfig {
  std::size_t hops = 3;
  Fusion fusion = Fusion::kLiteral;
  bool temporal_bias = false;
};

std::string hop_param_name(std::size_t hop, const char* field);

/// Adds attn.temporal.theta (and attn.temporal.bias when enabled) plus one
/// 1×32×5×5 filter and scalar bias per hop. Nothing spatial is allocated for J = 0.
template <typename T>
void init_attention(ParamStore<T>& params, const AttentionConfig& cfg, std::mt19937_64& rng);

/// alpha_i = sigmoid(theta . x_i [+ b]) for each frame, independently.
template <typename T>
std::vector<Var> temporal_scores(Graph<T>& g, const std::vector<Var>& features, Var theta, Var bias = {});

/// f_t = sum_i alpha_i x_i (a plain weighted sum, no normalization).
template <typename T>
Var temporal_feature(Graph<T>& g, const std::vector<Var>& features, const std::vector<Var>& scores);

/// One 1×10×8 sigmoid map per frame: 5×5 conv, stride 1, pad 2.
template <typename T>
std::vector<Var> spatial_scores(Graph<T>& g, const std::vector<Var>& conv_maps, Var filter, Var bias);

/// Score maps for hop `hop` (1-based); rejects hops outside 1..cfg.hops.
template <typename T>
std::vector<Var> spatial_scores(Graph<T>& g, const std::vector<Var>& conv_maps, const ParamStore<T>& params,
                                const AttentionConfig& cfg, std::size_t hop);

/// Masks each conv map with its score map, projects it through the shared
/// fc (2560 -> 128) and sums over frames.
template <typename T>
Var spatial_feature(Graph<T>& g, const std::vector<Var>& conv_maps, const std::vector<Var>& score_maps,
                    Var fc_weight, Var fc_bias);

/// Combines f_t with the per-hop vectors. With no hops the result is f_t.
template <typename T>
Var fuse(Graph<T>& g, Var f_t, const std::vector<Var>& f_s, Fusion fusion);

/// Handles for a full attention pass over one sequence.
struct AttentionVars {
  std::vector<Var> temporal;               // per frame
  std::vector<std::vector<Var>> spatial;   // [hop][frame]
  Var f_t;
  std::vector<Var> f_s;                    // per hop
  Var embedding;                           // F
};

/// Records the temporal branch, every spatial hop and the fusion.
template <typename T>
AttentionVars build_attention(Graph<T>& g, const std::vector<Var>& conv_maps, const std::vector<Var>& features,
                              const ParamStore<T>& params, const AttentionConfig& cfg);

}  // namespace reid
