#include "reid/gradcheck.hpp"

#include <chrono>
#include <functional>

#include "reid/attention.hpp"
#include "reid/autograd.hpp"
#include "reid/siamese.hpp"

namespace reid {

namespace {

using Builder = std::function<Var(Graph<double>&, const std::vector<Var>&)>;

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = d(rng);
  return t;
}

// Compares backprop against central differences for every input of one
// operation. The scalar under test is <output, R> for a fixed random R.
double check_case(std::vector<Tensor<double>> inputs, const Builder& build, std::mt19937_64& rng,
                  std::size_t max_coords = 96) {
  auto evaluate_output = [&]() {
    Graph<double> g(false);
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.constant(t));
    return g.value(build(g, vars));
  };
  const auto projection = random_tensor(evaluate_output().shape(), rng);
  auto scalar = [&]() {
    const auto out = evaluate_output();
    double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * projection[i];
    return s;
  };

  Graph<double> g(true);
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.input(t));
  Var out = build(g, vars);
  g.backward(dot(g, out, g.constant(projection)));

  double worst = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto analytic_full = g.grad(vars[i]);
    std::vector<double> analytic, numeric;
    for (auto k : probe_indices(inputs[i].size(), max_coords, rng)) {
      analytic.push_back(analytic_full[k]);
      numeric.push_back(central_difference(scalar, inputs[i][k], kFiniteDifferenceStep));
    }
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

template <typename Fn>
GradCheckReport timed(const std::string& name, double threshold, Fn&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckReport r{name, 0.0, threshold, 0, 0.0};
  body(r);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

void record(GradCheckReport& r, double err) {
  r.max_relative_error = std::max(r.max_relative_error, err);
  ++r.cases;
}

}  // namespace

std::vector<GradCheckReport> run_op_gradchecks(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckReport> out;

  out.push_back(timed("conv2d", kOpTolerance, [&](GradCheckReport& r) {
    struct Case {
      std::size_t c, h, w, o, k;
      Conv2dOptions opt;
    };
    const Case cases[] = {{2, 8, 8, 3, 3, {1, 1, 1, 1}}, {3, 7, 9, 2, 5, {1, 1, 4, 4}}, {1, 6, 5, 2, 3, {2, 2, 0, 0}}};
    for (const auto& c : cases) {
      record(r, check_case({random_tensor({c.c, c.h, c.w}, rng), random_tensor({c.o, c.c, c.k, c.k}, rng),
                            random_tensor({c.o}, rng)},
                           [opt = c.opt](Graph<double>& g, const std::vector<Var>& v) {
                             return conv2d(g, v[0], v[1], v[2], opt);
                           },
                           rng));
    }
  }));

  out.push_back(timed("maxpool2d", kOpTolerance, [&](GradCheckReport& r) {
    const std::pair<Shape, Pool2dOptions> cases[] = {
        {{1, 6, 6}, {2, 2, 2, 2}}, {{2, 7, 5}, {2, 2, 2, 2}}, {{3, 6, 6}, {3, 3, 3, 3}}};
    for (const auto& [shape, opt] : cases) {
      record(r, check_case({random_tensor(shape, rng)},
                           [opt = opt](Graph<double>& g, const std::vector<Var>& v) { return maxpool2d(g, v[0], opt); },
                           rng));
    }
  }));

  out.push_back(timed("linear", kOpTolerance, [&](GradCheckReport& r) {
    const std::pair<std::size_t, std::size_t> cases[] = {{8, 4}, {5, 3}, {16, 7}};
    for (auto [n, m] : cases) {
      record(r, check_case({random_tensor({n}, rng), random_tensor({m, n}, rng), random_tensor({m}, rng)},
                           [](Graph<double>& g, const std::vector<Var>& v) { return linear(g, v[0], v[1], v[2]); },
                           rng));
    }
  }));

  for (auto kind : {Activation::kTanh, Activation::kSigmoid}) {
    out.push_back(timed(kind == Activation::kTanh ? "tanh" : "sigmoid", kOpTolerance, [&](GradCheckReport& r) {
      for (std::size_t n : {7, 13, 24}) {
        record(r, check_case({random_tensor({n}, rng, 2.0)},
                             [kind](Graph<double>& g, const std::vector<Var>& v) { return activate(g, v[0], kind); },
                             rng));
      }
    }));
  }

  out.push_back(timed("softmax_xent", kOpTolerance, [&](GradCheckReport& r) {
    const std::pair<std::size_t, std::size_t> cases[] = {{5, 2}, {3, 0}, {10, 9}};
    for (auto [c, label] : cases) {
      record(r, check_case({random_tensor({c}, rng, 2.0)},
                           [label = label](Graph<double>& g, const std::vector<Var>& v) {
                             return softmax_xent(g, v[0], label);
                           },
                           rng));
    }
  }));

  out.push_back(timed("elementwise (add/sub/scale/scale_by/dot/sum/reshape/mul_channels)", kOpTolerance,
                      [&](GradCheckReport& r) {
                        const Shape shapes[] = {{2, 3, 4}, {1, 5, 2}, {4, 2, 3}};
                        for (const auto& s : shapes) {
                          record(r, check_case({random_tensor(s, rng), random_tensor(s, rng),
                                                random_tensor({1, s[1], s[2]}, rng), random_tensor({1}, rng)},
                                               [](Graph<double>& g, const std::vector<Var>& v) {
                                                 Var a = add(g, v[0], scale(g, v[1], 0.5));
                                                 Var b = sub(g, mul_channels(g, a, v[2]), v[1]);
                                                 Var c = scale_by(g, b, v[3]);
                                                 Var flat = reshape(g, c, Shape{g.value(c).size()});
                                                 Var d = dot(g, flat, reshape(g, v[0], Shape{g.value(v[0]).size()}));
                                                 return add_n(g, {scale_by(g, flat, d), scale_by(g, flat, sum(g, v[1]))});
                                               },
                                               rng));
                        }
                      }));

  out.push_back(timed("squared_hinge", kOpTolerance, [&](GradCheckReport& r) {
    // Same pair; different pair inside the margin; different pair outside it.
    const std::tuple<bool, double, double> cases[] = {{true, 1.0, 2.0}, {false, 0.2, 2.0}, {false, 3.0, 2.0}};
    for (auto [same, scale, margin] : cases) {
      record(r, check_case({random_tensor({6}, rng, scale), random_tensor({6}, rng, scale)},
                           [same = same, margin = margin](Graph<double>& g, const std::vector<Var>& v) {
                             return squared_hinge(g, v[0], v[1], same, margin);
                           },
                           rng));
    }
  }));

  out.push_back(timed("temporal attention (scores + weighted sum)", kOpTolerance, [&](GradCheckReport& r) {
    const std::pair<std::size_t, std::size_t> cases[] = {{6, 1}, {16, 3}, {128, 5}};
    for (auto [dim, frames] : cases) {
      std::vector<Tensor<double>> inputs{random_tensor({dim}, rng, 0.3)};
      for (std::size_t i = 0; i < frames; ++i) inputs.push_back(random_tensor({dim}, rng));
      record(r, check_case(std::move(inputs),
                           [](Graph<double>& g, const std::vector<Var>& v) {
                             std::vector<Var> feats(v.begin() + 1, v.end());
                             return temporal_feature(g, feats, temporal_scores(g, feats, v[0]));
                           },
                           rng));
    }
  }));

  out.push_back(timed("spatial attention (conv + sigmoid + masked projection)", kOpTolerance,
                      [&](GradCheckReport& r) {
                        struct Case {
                          std::size_t c, h, w, m, frames;
                        };
                        const Case cases[] = {{4, 5, 4, 6, 2}, {8, 6, 5, 9, 3}, {32, 10, 8, 128, 2}};
                        for (const auto& c : cases) {
                          std::vector<Tensor<double>> inputs{random_tensor({1, c.c, 5, 5}, rng, 0.2),
                                                             random_tensor({1}, rng),
                                                             random_tensor({c.m, c.c * c.h * c.w}, rng, 0.05),
                                                             random_tensor({c.m}, rng)};
                          for (std::size_t i = 0; i < c.frames; ++i) inputs.push_back(random_tensor({c.c, c.h, c.w}, rng));
                          record(r, check_case(std::move(inputs),
                                               [](Graph<double>& g, const std::vector<Var>& v) {
                                                 std::vector<Var> maps(v.begin() + 4, v.end());
                                                 auto scores = spatial_scores(g, maps, v[0], v[1]);
                                                 return spatial_feature(g, maps, scores, v[2], v[3]);
                                               },
                                               rng));
                        }
                      }));

  out.push_back(timed("fuse", kOpTolerance, [&](GradCheckReport& r) {
    const std::pair<std::size_t, Fusion> cases[] = {{1, Fusion::kLiteral}, {3, Fusion::kLiteral}, {2, Fusion::kSingleFt}};
    for (auto [hops, fusion] : cases) {
      std::vector<Tensor<double>> inputs;
      for (std::size_t j = 0; j <= hops; ++j) inputs.push_back(random_tensor({7}, rng));
      record(r, check_case(std::move(inputs),
                           [fusion = fusion](Graph<double>& g, const std::vector<Var>& v) {
                             return fuse(g, v[0], std::vector<Var>(v.begin() + 1, v.end()), fusion);
                           },
                           rng));
    }
  }));

  return out;
}

GradCheckReport run_end_to_end_gradcheck(std::uint64_t seed, std::size_t coords_per_tensor) {
  return timed("end-to-end L_id1 + L_hinge + L_id2 (2-frame pair, every parameter tensor)", kEndToEndTolerance,
               [&](GradCheckReport& r) {
                 std::mt19937_64 rng(seed);
                 ModelConfig cfg;
                 auto params = init_model<double>(cfg, seed);
                 init_classifier(params, 4, rng);

                 PairSample<double> pair;
                 for (int i = 0; i < 2; ++i) {
                   pair.first.push_back(random_tensor({5, 56, 40}, rng));
                   pair.second.push_back(random_tensor({5, 56, 40}, rng));
                 }
                 pair.label_first = 1;
                 pair.label_second = 3;
                 pair.same = false;
                 // A wide margin keeps the hinge term active so it contributes gradient.
                 const double margin = 1e3;

                 params.zero_grad();
                 pair_loss<double>(pair, params, cfg, margin, true);
                 auto loss = [&]() { return pair_loss<double>(pair, params, cfg, margin, false).total; };
                 for (std::size_t t = 0; t < params.size(); ++t) {
                   std::vector<double> analytic, numeric;
                   for (auto k : probe_indices(params.value_at(t).size(), coords_per_tensor, rng)) {
                     analytic.push_back(params.grad_at(t)[k]);
                     numeric.push_back(central_difference(loss, params.value_at(t)[k], kEndToEndStep));
                   }
                   record(r, relative_error(analytic, numeric));
                 }
               });
}

}  // namespace reid
