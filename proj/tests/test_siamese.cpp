#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "reid/gradcheck.hpp"
#include "reid/siamese.hpp"
#include "support.hpp"

using namespace reid;

namespace {

constexpr std::size_t kClasses = 3;

ModelConfig small_model(std::size_t hops = 1) {
  ModelConfig m;
  m.attention.hops = hops;
  return m;
}

ParamStore<double> model_with_classifier(const ModelConfig& m, std::uint64_t seed) {
  auto p = init_model<double>(m, seed);
  std::mt19937_64 rng(seed + 100);
  init_classifier(p, kClasses, rng);
  return p;
}

std::vector<Tensor<double>> frames(std::size_t n, std::mt19937_64& rng) {
  std::vector<Tensor<double>> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::random_tensor<double>(Shape{5, 56, 40}, rng));
  return out;
}

double hinge_value(const Tensor<double>& a, const Tensor<double>& b, bool same, double margin,
                   Tensor<double>* grad_a = nullptr) {
  Graph<double> g;
  auto va = g.input(a), vb = g.input(b);
  auto loss = squared_hinge(g, va, vb, same, margin);
  const double v = g.value(loss).item();
  g.backward(loss);
  if (grad_a) *grad_a = g.has_grad(va) ? g.grad(va) : Tensor<double>(a.shape());
  return v;
}

double distance(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("squared hinge: worked values") {
  std::mt19937_64 rng(1);
  auto a = testing::random_tensor<double>(Shape{128}, rng);
  CHECK(hinge_value(a, a, true, 2.0) == 0.0);
  CHECK(hinge_value(a, a, false, 2.0) == 2.0);

  Tensor<double> z(Shape{128}), e(Shape{128});
  e[7] = 1.0;
  CHECK(hinge_value(z, e, true, 2.0) == doctest::Approx(0.5));
  CHECK(hinge_value(z, e, false, 2.0) == doctest::Approx(0.5));

  Tensor<double> far(Shape{128});
  far[0] = 3.0;
  Tensor<double> grad;
  CHECK(hinge_value(z, far, false, 2.0, &grad) == 0.0);
  for (auto v : grad.values()) CHECK(v == 0.0);
  far[0] = 2.0;  // exactly at the margin
  CHECK(hinge_value(z, far, false, 2.0, &grad) == 0.0);
  for (auto v : grad.values()) CHECK(v == 0.0);
}

TEST_CASE("squared hinge: a same pair is pulled together") {
  std::mt19937_64 rng(2);
  auto a = testing::random_tensor<double>(Shape{128}, rng);
  auto b = testing::random_tensor<double>(Shape{128}, rng);
  Tensor<double> grad;
  hinge_value(a, b, true, 2.0, &grad);
  auto moved = a;
  for (std::size_t i = 0; i < 128; ++i) moved[i] -= 0.01 * grad[i];
  CHECK(distance(moved, b) < distance(a, b));
}

TEST_CASE("identity loss: uniform classifier, saturation and unknown labels") {
  for (std::size_t n : {2u, 5u, 150u}) {
    Graph<double> g;
    auto f = g.input(Tensor<double>(Shape{128}, 0.3));
    auto w = g.input(Tensor<double>(Shape{n, 128}));
    auto b = g.input(Tensor<double>(Shape{n}));
    CHECK(g.value(identity_loss(g, f, n - 1, w, b)).item() == doctest::Approx(std::log(static_cast<double>(n))));
    CHECK_THROWS_AS(identity_loss(g, f, n, w, b), std::invalid_argument);
  }
  Graph<double> g;
  Tensor<double> bias(Shape{4});
  bias[2] = 60.0;
  auto loss = identity_loss(g, g.input(Tensor<double>(Shape{128})), 2, g.input(Tensor<double>(Shape{4, 128})),
                            g.input(bias));
  CHECK(g.value(loss).item() < 1e-20);
}

TEST_CASE("identity loss: classifier gradient matches finite differences") {
  std::mt19937_64 rng(3);
  auto f = testing::random_tensor<double>(Shape{128}, rng);
  auto w = testing::random_tensor<double>(Shape{4, 128}, rng, 0.1);
  auto b = testing::random_tensor<double>(Shape{4}, rng, 0.1);
  auto value = [&](const Tensor<double>& wv) {
    Graph<double> g(false);
    return g.value(identity_loss(g, g.input(f), 1, g.input(wv), g.input(b))).item();
  };
  Graph<double> g;
  auto vw = g.input(w);
  g.backward(identity_loss(g, g.input(f), 1, vw, g.input(b)));
  const auto analytic = g.grad(vw);
  double num2 = 0, diff2 = 0, ana2 = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto plus = w, minus = w;
    plus[i] += 1e-5;
    minus[i] -= 1e-5;
    const double numeric = (value(plus) - value(minus)) / 2e-5;
    num2 += numeric * numeric;
    ana2 += analytic[i] * analytic[i];
    diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
  }
  CHECK(std::sqrt(diff2) / std::max(std::sqrt(num2), std::sqrt(ana2)) < 1e-4);
}

TEST_CASE("pair loss: total is the sum of its terms and symmetric under swapping") {
  auto m = small_model(2);
  auto p = model_with_classifier(m, 4);
  std::mt19937_64 rng(5);
  PairSample<double> pair{frames(2, rng), frames(3, rng), 0, 2, false};
  auto l = pair_loss(pair, p, m, 2.0, false);
  CHECK(l.total == doctest::Approx(l.id_first + l.hinge + l.id_second).epsilon(1e-12));
  PairSample<double> swapped{pair.second, pair.first, 2, 0, false};
  auto s = pair_loss(swapped, p, m, 2.0, false);
  CHECK(s.total == doctest::Approx(l.total).epsilon(1e-12));
  CHECK(s.id_first == doctest::Approx(l.id_second).epsilon(1e-12));

  PairSample<double> bad{pair.first, pair.second, 0, kClasses, false};
  CHECK_THROWS_AS(pair_loss(bad, p, m, 2.0, false), std::invalid_argument);
}

TEST_CASE("pair loss: identical sequences with a confident classifier cost nothing") {
  auto m = small_model(1);
  auto p = model_with_classifier(m, 6);
  p.value("clf.w").fill(0.0);
  p.value("clf.b").fill(0.0);
  p.value("clf.b")[1] = 80.0;
  std::mt19937_64 rng(7);
  auto seq = frames(2, rng);
  PairSample<double> pair{seq, seq, 1, 1, true};
  auto l = pair_loss(pair, p, m, 2.0, false);
  CHECK(l.hinge == 0.0);
  CHECK(l.total < 1e-20);
}

TEST_CASE("pair loss: gradients are deterministic and independent of worker count") {
  auto m = small_model(2);
  std::mt19937_64 rng(8);
  PairSample<double> pair{frames(3, rng), frames(3, rng), 1, 1, true};
  auto p1 = model_with_classifier(m, 9);
  auto p2 = model_with_classifier(m, 9);
  p1.zero_grad();
  p2.zero_grad();
  pair_loss(pair, p1, m, 2.0, true, 1);
  pair_loss(pair, p2, m, 2.0, true, 3);
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1.grad_at(i).storage() == p2.grad_at(i).storage());
}

TEST_CASE("pair loss: full network matches finite differences") {
  const auto r = run_end_to_end_gradcheck(10, 4);
  INFO(r.name, " ", r.max_relative_error);
  CHECK(r.max_relative_error < 1e-3);
}

TEST_CASE("sgd: zero learning rate leaves parameters unchanged") {
  auto m = small_model(1);
  auto p = model_with_classifier(m, 11);
  const auto before = p.cast<double>();
  std::mt19937_64 rng(12);
  PairSample<double> pair{frames(2, rng), frames(2, rng), 0, 1, false};
  p.zero_grad();
  pair_loss(pair, p, m, 2.0, true);
  sgd_step(p, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p.value_at(i).storage() == before.value_at(i).storage());
}

TEST_CASE("sgd: a small step on a positive pair does not push the embeddings apart") {
  auto m = small_model(1);
  int closer = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = model_with_classifier(m, 20 + seed);
    std::mt19937_64 rng(30 + seed);
    PairSample<double> pair{frames(2, rng), frames(2, rng), 0, 0, true};
    auto dist = [&] {
      auto a = embed_frames<double>(pair.first, p, m).embedding;
      auto b = embed_frames<double>(pair.second, p, m).embedding;
      return distance(a, b);
    };
    const double d0 = dist();
    // With clf.w zero the identity losses send no gradient into the embedding path.
    p.value("clf.w").fill(0.0);
    p.zero_grad();
    pair_loss(pair, p, m, 2.0, true);
    const double gnorm = [&] {
      double s = 0;
      for (std::size_t i = 0; i < p.size(); ++i)
        for (auto v : p.grad_at(i).values()) s += v * v;
      return std::sqrt(s);
    }();
    sgd_step(p, 1e-3 / gnorm);
    if (dist() <= d0) ++closer;
  }
  CHECK(closer == 5);
}

TEST_CASE("embedding never reads the classifier") {
  auto m = small_model(2);
  auto with = model_with_classifier(m, 13);
  auto without = init_model<double>(m, 13);
  with.value("clf.w").fill(std::numeric_limits<double>::quiet_NaN());
  std::mt19937_64 rng(14);
  auto seq = frames(3, rng);
  auto a = embed_frames<double>(seq, with, m);
  auto b = embed_frames<double>(seq, without, m);
  CHECK(a.embedding.storage() == b.embedding.storage());
  CHECK(a.temporal.size() == 3);
  CHECK(a.spatial.size() == 2);
  CHECK(a.spatial[1].size() == 3);
  CHECK_FALSE(without.contains("clf.w"));
}

TEST_CASE("init_model: deterministic by seed") {
  auto m = small_model(3);
  auto a = init_model<float>(m, 5), b = init_model<float>(m, 5), c = init_model<float>(m, 6);
  REQUIRE(a.size() == b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.name_at(i) == b.name_at(i));
    CHECK(a.value_at(i).storage() == b.value_at(i).storage());
    differs = differs || a.value_at(i).storage() != c.value_at(i).storage();
  }
  CHECK(differs);
}
