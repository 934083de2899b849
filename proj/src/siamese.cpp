#include "reid/siamese.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "reid/parallel.hpp"

namespace reid {

template <typename T>
ParamStore<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore<T> params;
  init_feature_net(params, rng);
  init_attention(params, cfg.attention, rng);
  return params;
}

template <typename T>
void init_classifier(ParamStore<T>& params, std::size_t classes, std::mt19937_64& rng) {
  if (classes == 0) throw std::invalid_argument("identity classifier needs at least one class");
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / kFeatureDim));
  Tensor<T> w(Shape{classes, kFeatureDim});
  for (auto& v : w.values()) v = static_cast<T>(dist(rng));
  params.add("clf.w", std::move(w));
  params.add("clf.b", Tensor<T>(Shape{classes}));
}

namespace {

template <typename T>
struct BranchVars {
  std::vector<Var> conv_maps;
  std::vector<Var> features;
  AttentionVars attention;
};

template <typename T>
BranchVars<T> branch_on_graph(Graph<T>& g, const std::vector<FeatureBundle<T>>& bundles,
                              const ParamStore<T>& params, const ModelConfig& cfg, bool differentiable) {
  BranchVars<T> b;
  for (const auto& fb : bundles) {
    b.conv_maps.push_back(differentiable ? g.input(fb.conv_map) : g.constant(fb.conv_map));
    b.features.push_back(differentiable ? g.input(fb.feature) : g.constant(fb.feature));
  }
  b.attention = build_attention(g, b.conv_maps, b.features, params, cfg.attention);
  return b;
}

}  // namespace

template <typename T>
VideoEmbedding<T> embed_frames(std::span<const Tensor<T>> frames, const ParamStore<T>& params,
                               const ModelConfig& cfg, std::size_t workers) {
  const auto bundles = extract_sequence(frames, params, cfg.feature, workers);
  Graph<T> g(/*record=*/false);
  const auto b = branch_on_graph(g, bundles, params, cfg, false);
  VideoEmbedding<T> out;
  out.embedding = g.value(b.attention.embedding);
  out.f_t = g.value(b.attention.f_t);
  for (Var v : b.attention.f_s) out.f_s.push_back(g.value(v));
  for (Var v : b.attention.temporal) out.temporal.push_back(g.value(v)[0]);
  for (const auto& hop : b.attention.spatial) {
    out.spatial.emplace_back();
    for (Var v : hop) out.spatial.back().push_back(g.value(v));
  }
  return out;
}

template <typename T>
Var squared_hinge(Graph<T>& g, Var a, Var b, bool same, T margin) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  if (av.size() != bv.size()) throw std::invalid_argument("squared_hinge: embedding lengths differ");
  T sq{0};
  for (std::size_t i = 0; i < av.size(); ++i) sq += (av[i] - bv[i]) * (av[i] - bv[i]);
  const T dist = std::sqrt(sq);
  T loss{0};
  if (same) {
    loss = sq / T{2};
  } else if (dist < margin) {
    loss = (margin - dist) * (margin - dist) / T{2};
  }
  return g.record("squared_hinge", Tensor<T>::scalar(loss), {a.id, b.id},
                  [same, margin, dist, ia = a.id, ib = b.id](Graph<T>& gr, std::size_t self) {
                    // dL/da = coef * (a - b), dL/db = -coef * (a - b)
                    T coef{0};
                    if (same) {
                      coef = T{1};
                    } else if (dist < margin && dist > T{0}) {
                      coef = -(margin - dist) / dist;
                    }
                    if (coef == T{0}) return;
                    coef *= gr.grad_of(self)[0];
                    const auto& av = gr.value_of(ia);
                    const auto& bv = gr.value_of(ib);
                    if (auto* da = gr.grad_accumulator(ia))
                      for (std::size_t i = 0; i < av.size(); ++i) (*da)[i] += coef * (av[i] - bv[i]);
                    if (auto* db = gr.grad_accumulator(ib))
                      for (std::size_t i = 0; i < av.size(); ++i) (*db)[i] -= coef * (av[i] - bv[i]);
                  });
}

template <typename T>
Var identity_loss(Graph<T>& g, Var embedding, std::size_t label, Var clf_weight, Var clf_bias) {
  const std::size_t classes = g.value(clf_weight).dim(0);
  if (label >= classes) {
    throw std::invalid_argument("identity_loss: label " + std::to_string(label) + " is not among the " +
                                std::to_string(classes) + " training identities");
  }
  return softmax_xent(g, linear(g, embedding, clf_weight, clf_bias), label);
}

template <typename T>
LossBreakdown pair_loss(const PairSample<T>& pair, ParamStore<T>& params, const ModelConfig& cfg, T margin,
                        bool accumulate_grads, std::size_t workers) {
  if (pair.first.empty() || pair.second.empty()) throw std::invalid_argument("pair_loss: empty sequence");

  const std::span<const Tensor<T>> seqs[2] = {pair.first, pair.second};
  std::vector<FeatureBundle<T>> bundles[2];
  std::vector<std::unique_ptr<FrameForward<T>>> frames[2];

  if (accumulate_grads) {
    for (int s = 0; s < 2; ++s) {
      frames[s].resize(seqs[s].size());
      parallel_for(seqs[s].size(), workers, [&](std::size_t i) {
        frames[s][i] = std::make_unique<FrameForward<T>>(seqs[s][i], params, cfg.feature);
      });
      for (const auto& f : frames[s]) bundles[s].push_back({f->conv_map(), f->feature()});
    }
  } else {
    for (int s = 0; s < 2; ++s) bundles[s] = extract_sequence(seqs[s], params, cfg.feature, workers);
  }

  Graph<T> g(accumulate_grads);
  const auto a = branch_on_graph(g, bundles[0], params, cfg, accumulate_grads);
  const auto b = branch_on_graph(g, bundles[1], params, cfg, accumulate_grads);
  Var clf_w = g.parameter(params, "clf.w");
  Var clf_b = g.parameter(params, "clf.b");
  Var id1 = identity_loss(g, a.attention.embedding, pair.label_first, clf_w, clf_b);
  Var hinge = squared_hinge(g, a.attention.embedding, b.attention.embedding, pair.same, margin);
  Var id2 = identity_loss(g, b.attention.embedding, pair.label_second, clf_w, clf_b);
  Var total = add_n(g, {id1, hinge, id2});

  LossBreakdown out{g.value(id1)[0], g.value(hinge)[0], g.value(id2)[0], g.value(total)[0]};
  if (!accumulate_grads) return out;

  g.backward(total);
  const BranchVars<T>* branches[2] = {&a, &b};
  for (int s = 0; s < 2; ++s) {
    parallel_for(frames[s].size(), workers, [&](std::size_t i) {
      frames[s][i]->backward(g.grad(branches[s]->conv_maps[i]), g.grad(branches[s]->features[i]));
    });
  }
  // Fixed reduction order keeps updates bitwise reproducible for any worker count.
  g.accumulate_param_grads(params);
  for (int s = 0; s < 2; ++s)
    for (const auto& f : frames[s]) f->accumulate_into(params);
  return out;
}

#define REID_INSTANTIATE_SIAMESE(T)                                                                         \
  template ParamStore<T> init_model<T>(const ModelConfig&, std::uint64_t);                                  \
  template void init_classifier<T>(ParamStore<T>&, std::size_t, std::mt19937_64&);                          \
  template VideoEmbedding<T> embed_frames<T>(std::span<const Tensor<T>>, const ParamStore<T>&,              \
                                             const ModelConfig&, std::size_t);                              \
  template Var squared_hinge<T>(Graph<T>&, Var, Var, bool, T);                                              \
  template Var identity_loss<T>(Graph<T>&, Var, std::size_t, Var, Var);                                     \
  template LossBreakdown pair_loss<T>(const PairSample<T>&, ParamStore<T>&, const ModelConfig&, T, bool,    \
                                      std::size_t);

REID_INSTANTIATE_SIAMESE(float)
REID_INSTANTIATE_SIAMESE(double)

}  // namespace reid
