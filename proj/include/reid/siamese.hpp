#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "reid/attention.hpp"
#include "reid/autograd.hpp"
#include "reid/feature_net.hpp"
#include "reid/param_store.hpp"

namespace reid {

/// Everything that shapes the embedding path of one branch.
struct ModelConfig {
  FeatureNetConfig feature;
  AttentionConfig attention;
};

/// Feature net and attention parameters, seeded deterministically.
template <typename T>
ParamStore<T> init_model(const ModelConfig& cfg, std::uint64_t seed);

/// Adds the identity classifier clf.{w,b} (128 -> classes) to `params`.
template <typename T>
void init_classifier(ParamStore<T>& params, std::size_t classes, std::mt19937_64& rng);

/// Sequence-level embedding plus the intermediate quantities behind it.
template <typename T>
struct VideoEmbedding {
  Tensor<T> embedding;                           // F
  Tensor<T> f_t;
  std::vector<Tensor<T>> f_s;                    // per hop
  std::vector<T> temporal;                       // alpha_t per frame
  std::vector<std::vector<Tensor<T>>> spatial;   // [hop][frame] 1×10×8 maps
};

/// Inference-mode embedding of a preprocessed frame sequence. Never touches
/// the identity classifier.
template <typename T>
VideoEmbedding<T> embed_frames(std::span<const Tensor<T>> frames, const ParamStore<T>& params,
                               const ModelConfig& cfg, std::size_t workers = 1);

/// Squared hinge on the Euclidean distance d = |a - b|:
/// same -> d^2 / 2, different -> max(0, margin - d)^2 / 2.
/// At d = 0 on a different pair the gradient is taken as zero.
template <typename T>
Var squared_hinge(Graph<T>& g, Var a, Var b, bool same, T margin);

/// Softmax cross-entropy of the linear classifier applied to `embedding`.
template <typename T>
Var identity_loss(Graph<T>& g, Var embedding, std::size_t label, Var clf_weight, Var clf_bias);

/// Two preprocessed sequences with their training-class labels.
template <typename T>
struct PairSample {
  std::vector<Tensor<T>> first;
  std::vector<Tensor<T>> second;
  std::size_t label_first = 0;
  std::size_t label_second = 0;
  bool same = false;
};

struct LossBreakdown {
  double id_first = 0;
  double hinge = 0;
  double id_second = 0;
  double total = 0;
};

/// Runs both branches on one shared parameter store and evaluates
/// L = L_id1 + L_hinge + L_id2. With `accumulate_grads`, dL/dparam is added
/// into the store's gradient buffers (including clf.{w,b}).
template <typename T>
LossBreakdown pair_loss(const PairSample<T>& pair, ParamStore<T>& params, const ModelConfig& cfg, T margin,
                        bool accumulate_grads, std::size_t workers = 1);

}  // namespace reid
