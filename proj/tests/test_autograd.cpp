#include <doctest.h>

#include <bit>
#include <cmath>
#include <numeric>

#include "reid/autograd.hpp"
#include "reid/gradcheck.hpp"
#include "reid/param_store.hpp"
#include "support.hpp"

using namespace reid;
using reid::testing::random_tensor;

TEST_CASE("tensor shape bookkeeping") {
  Tensor<float> t(Shape{2, 3, 4}, 1.5f);
  CHECK(t.size() == 24);
  CHECK(t.rank() == 3);
  CHECK(t.at(1, 2, 3) == 1.5f);
  CHECK_THROWS_AS(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor<float>(Shape{1, 1, 1, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(t.reshaped(Shape{5, 5}), std::invalid_argument);
  CHECK(t.reshaped(Shape{24}).rank() == 1);
}

TEST_CASE("conv2d: ones kernel over ones input sums to 9") {
  Graph<double> g(false);
  auto x = g.constant(Tensor<double>(Shape{1, 3, 3}, 1.0));
  auto w = g.constant(Tensor<double>(Shape{1, 1, 3, 3}, 1.0));
  auto b = g.constant(Tensor<double>(Shape{1}, 0.0));
  auto y = conv2d(g, x, w, b, {});
  CHECK(g.value(y).shape() == Shape{1, 1, 1});
  CHECK(g.value(y)[0] == 9.0);
}

TEST_CASE("conv2d: 56x40 input with 5x5 kernel and padding 4 gives 60x44") {
  std::mt19937_64 rng(1);
  Graph<float> g(false);
  auto x = g.constant(random_tensor<float>({5, 56, 40}, rng));
  auto w = g.constant(random_tensor<float>({16, 5, 5, 5}, rng));
  auto b = g.constant(Tensor<float>(Shape{16}));
  auto y = conv2d(g, x, w, b, {1, 1, 4, 4});
  CHECK(g.value(y).shape() == Shape{16, 60, 44});
}

TEST_CASE("conv2d: cross-correlation, not convolution") {
  // A kernel with a single 1 at the top-left picks the input at offset (0,0).
  Tensor<double> in(Shape{1, 3, 3});
  std::iota(in.values().begin(), in.values().end(), 1.0);
  Tensor<double> k(Shape{1, 1, 2, 2});
  k[0] = 1.0;
  Graph<double> g(false);
  auto y = conv2d(g, g.constant(in), g.constant(k), g.constant(Tensor<double>(Shape{1})), {});
  CHECK(g.value(y).values()[0] == 1.0);
  CHECK(g.value(y).values()[3] == 5.0);
}

TEST_CASE("conv2d: zero input and zero bias give zeros for any weights") {
  std::mt19937_64 rng(2);
  Graph<double> g(false);
  auto y = conv2d(g, g.constant(Tensor<double>(Shape{3, 7, 6})), g.constant(random_tensor<double>({4, 3, 3, 3}, rng)),
                  g.constant(Tensor<double>(Shape{4})), {1, 1, 1, 1});
  for (auto v : g.value(y).values()) CHECK(v == 0.0);
}

TEST_CASE("conv2d: channel mismatch is rejected") {
  Graph<double> g(false);
  auto x = g.constant(Tensor<double>(Shape{2, 5, 5}));
  auto w = g.constant(Tensor<double>(Shape{1, 3, 3, 3}));
  auto b = g.constant(Tensor<double>(Shape{1}));
  CHECK_THROWS_AS(conv2d(g, x, w, b, {}), std::invalid_argument);
}

TEST_CASE("maxpool2d: 2x2 window") {
  Graph<double> g(true);
  auto x = g.input(Tensor<double>(Shape{1, 2, 2}, std::vector<double>{1, 2, 3, 4}));
  auto y = maxpool2d(g, x, {});
  CHECK(g.value(y).size() == 1);
  CHECK(g.value(y)[0] == 4.0);
}

TEST_CASE("maxpool2d: ties route gradient to the first maximum") {
  Graph<double> g(true);
  auto x = g.input(Tensor<double>(Shape{1, 4, 4}, 3.0));
  auto y = maxpool2d(g, x, {});
  for (auto v : g.value(y).values()) CHECK(v == 3.0);
  g.backward(sum(g, y));
  const auto gx = g.grad(x);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const bool first_of_window = (i % 2 == 0) && (j % 2 == 0);
      CHECK(gx.at(0, i, j) == (first_of_window ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("maxpool2d: window larger than input is rejected") {
  Graph<double> g(false);
  auto x = g.constant(Tensor<double>(Shape{1, 1, 3}));
  CHECK_THROWS_AS(maxpool2d(g, x, {}), std::invalid_argument);
}

TEST_CASE("linear: identity weight and zero weight") {
  Graph<double> g(false);
  auto x = g.constant(Tensor<double>::vector({1.0, -2.0, 3.0}));
  Tensor<double> eye(Shape{3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  auto y = linear(g, x, g.constant(eye), g.constant(Tensor<double>(Shape{3})));
  CHECK(g.value(y).storage() == g.value(x).storage());

  auto b = Tensor<double>::vector({0.5, 0.25});
  auto z = linear(g, x, g.constant(Tensor<double>(Shape{2, 3})), g.constant(b));
  CHECK(g.value(z).storage() == b.storage());
  CHECK_THROWS_AS(linear(g, x, g.constant(Tensor<double>(Shape{2, 4})), g.constant(b)), std::invalid_argument);
}

TEST_CASE("activations at zero") {
  Graph<double> g(true);
  auto x = g.input(Tensor<double>::vector({0.0}));
  auto s = activate(g, x, Activation::kSigmoid);
  CHECK(g.value(s)[0] == 0.5);
  CHECK(g.value(activate(g, x, Activation::kTanh))[0] == 0.0);
  g.backward(s);
  CHECK(g.grad(x)[0] == doctest::Approx(0.25).epsilon(1e-12));

  double x0 = 0.0;
  auto f = [&] { return 1.0 / (1.0 + std::exp(-x0)); };
  CHECK(central_difference(f, x0, 1e-5) == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("activations stay inside their open ranges, even when saturated") {
  Graph<float> g(false);
  auto x = g.constant(Tensor<float>::vector({-1e4f, -50.f, 0.f, 50.f, 1e4f}));
  for (auto v : g.value(activate(g, x, Activation::kSigmoid)).values()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
  for (auto v : g.value(activate(g, x, Activation::kTanh)).values()) {
    CHECK(v >= -1.0f);
    CHECK(v <= 1.0f);
    CHECK(std::isfinite(v));
  }
}

TEST_CASE("softmax cross-entropy") {
  Graph<double> g(true);
  auto eq = g.input(Tensor<double>(Shape{7}, 0.3));
  auto l = softmax_xent(g, eq, 2);
  CHECK(g.value(l)[0] == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  g.backward(l);
  // softmax - onehot
  const auto gr = g.grad(eq);
  for (std::size_t i = 0; i < 7; ++i) CHECK(gr[i] == doctest::Approx(1.0 / 7 - (i == 2 ? 1.0 : 0.0)).epsilon(1e-12));

  auto sat = g.constant(Tensor<double>::vector({20.0, -20.0}));
  CHECK(g.value(softmax_xent(g, sat, 0))[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g.value(softmax_xent(g, sat, 0))[0] < 1e-15);
  CHECK_THROWS_AS(softmax_xent(g, sat, 2), std::invalid_argument);
}

TEST_CASE("backward: root is the parameter itself") {
  ParamStore<double> ps;
  ps.add("p", Tensor<double>::vector({3.0}));
  Graph<double> g(true);
  auto p = g.parameter(ps, "p");
  g.backward(p);
  CHECK(g.grad(p)[0] == 1.0);
  g.accumulate_param_grads(ps);
  CHECK(ps.grad("p")[0] == 1.0);
}

TEST_CASE("backward: non-scalar root is rejected") {
  Graph<double> g(true);
  auto x = g.input(Tensor<double>(Shape{3}, 1.0));
  CHECK_THROWS_AS(g.backward(activate(g, x, Activation::kTanh)), std::invalid_argument);
}

TEST_CASE("backward: disjoint subgraphs get independent gradients; unreached parameters stay zero") {
  ParamStore<double> ps;
  ps.add("a", Tensor<double>::vector({2.0}));
  ps.add("b", Tensor<double>::vector({5.0}));
  ps.add("unused", Tensor<double>::vector({1.0}));
  Graph<double> g(true);
  auto a = g.parameter(ps, "a");
  auto b = g.parameter(ps, "b");
  g.parameter(ps, "unused");
  auto root = add(g, dot(g, a, a), scale(g, b, 3.0));
  g.backward(root);
  g.accumulate_param_grads(ps);
  CHECK(ps.grad("a")[0] == 4.0);
  CHECK(ps.grad("b")[0] == 3.0);
  CHECK(ps.grad("unused")[0] == 0.0);
}

TEST_CASE("backward: each recorded node runs once, in a repeatable sweep") {
  Graph<double> g(true);
  auto x = g.input(Tensor<double>::vector({0.3, -0.2}));
  auto t = activate(g, x, Activation::kTanh);
  auto d = dot(g, t, t);
  // Diamond: t is consumed twice by dot, yet x, t and d are visited once each.
  CHECK(g.backward(d) == 3);
  const auto first = g.grad(x);
  CHECK(g.backward(d) == 3);
  CHECK(g.grad(x).storage() == first.storage());
}

TEST_CASE("inputs precede consumers on the tape") {
  Graph<double> g(true);
  auto a = g.input(Tensor<double>::vector({1.0}));
  auto b = activate(g, a, Activation::kSigmoid);
  auto c = add(g, a, b);
  CHECK(a.id < b.id);
  CHECK(b.id < c.id);
  CHECK(g.node_count() == 3);
}

TEST_CASE("sgd_step") {
  ParamStore<double> ps;
  ps.add("p", Tensor<double>::vector({1.0}));
  ps.grad("p")[0] = 2.0;
  sgd_step(ps, 0.1);
  CHECK(ps.value("p")[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(ps.grad("p")[0] == 0.0);

  ps.grad("p")[0] = 7.0;
  sgd_step(ps, 0.0);
  CHECK(ps.value("p")[0] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("sgd_step descends a quadratic for small lr") {
  std::mt19937_64 rng(9);
  ParamStore<double> ps;
  ps.add("w", random_tensor<double>({6}, rng));
  const auto target = random_tensor<double>({6}, rng);
  auto loss = [&] {
    Graph<double> g(true);
    auto d = sub(g, g.parameter(ps, "w"), g.constant(target));
    auto l = dot(g, d, d);
    g.backward(l);
    g.accumulate_param_grads(ps);
    return g.value(l)[0];
  };
  for (double lr : {1e-1, 1e-2, 1e-4}) {
    ps.zero_grad();
    const double before = loss();
    sgd_step(ps, lr);
    ps.zero_grad();
    CHECK(loss() < before);
  }
}

TEST_CASE("forward passes are bit-deterministic") {
  std::mt19937_64 rng(4);
  const auto x = random_tensor<float>({3, 12, 10}, rng);
  const auto w = random_tensor<float>({4, 3, 5, 5}, rng);
  const auto b = random_tensor<float>({4}, rng);
  auto run = [&] {
    Graph<float> g(false);
    auto y = conv2d(g, g.constant(x), g.constant(w), g.constant(b), {1, 1, 4, 4});
    return g.value(activate(g, maxpool2d(g, y, {}), Activation::kTanh));
  };
  CHECK(run().storage() == run().storage());
}

TEST_CASE("finite-difference suite: every differentiable op within 1e-4 on three shapes") {
  const auto reports = run_op_gradchecks(11);
  CHECK(reports.size() >= 10);
  for (const auto& r : reports) {
    INFO(r.name << " max rel err " << r.max_relative_error);
    CHECK(r.cases >= 3);
    CHECK(r.threshold == kOpTolerance);
    CHECK(r.passed());
  }
}

TEST_CASE("relative_error and probe_indices") {
  const std::vector<double> a{1.0, 2.0}, n{1.0, 2.0}, z{0.0, 0.0};
  CHECK(relative_error(a, n) == 0.0);
  CHECK(relative_error(z, z) == 0.0);
  CHECK(relative_error(a, z) == 1.0);
  std::mt19937_64 rng(1);
  CHECK(probe_indices(5, 10, rng).size() == 5);
  const auto idx = probe_indices(1000, 10, rng);
  CHECK(idx.size() == 10);
  for (auto i : idx) CHECK(i < 1000);
}

TEST_CASE("checkpoint round trip is bit exact") {
  std::mt19937_64 rng(5);
  Checkpoint c;
  c.set("a.w", random_tensor<float>({2, 3, 4, 5}, rng));
  c.set("b", Tensor<float>::vector({-0.0f, 1e-38f, 3.4e38f, 1.0f / 3.0f}));
  const auto bytes = encode_checkpoint(c);
  const auto back = decode_checkpoint(bytes);
  REQUIRE(back.entries.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.entries[i].first == c.entries[i].first);
    CHECK(back.entries[i].second.shape() == c.entries[i].second.shape());
    for (std::size_t k = 0; k < c.entries[i].second.size(); ++k) {
      CHECK(std::bit_cast<std::uint32_t>(back.entries[i].second[k]) ==
            std::bit_cast<std::uint32_t>(c.entries[i].second[k]));
    }
  }
  CHECK(encode_checkpoint(back) == bytes);

  // Header: magic, version 1, count 2, then the first name length.
  REQUIRE(bytes.size() > 16);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "RIDP");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 2);
  CHECK(bytes[12] == 3);
}

TEST_CASE("checkpoint decoding rejects damage") {
  Checkpoint c;
  c.set("x", Tensor<float>::vector({1.0f, 2.0f}));
  auto bytes = encode_checkpoint(c);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 1);
  CHECK_THROWS(decode_checkpoint(truncated));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS(decode_checkpoint(bad_magic));
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS(decode_checkpoint(bad_version));
}

TEST_CASE("param store gradients mirror value shapes") {
  std::mt19937_64 rng(3);
  ParamStore<float> ps;
  ps.add("a", random_tensor<float>({2, 3}, rng));
  ps.add("b", random_tensor<float>({4}, rng));
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(ps.grad_at(i).shape() == ps.value_at(i).shape());
  CHECK(ps.scalar_count() == 10);
  CHECK_THROWS(ps.add("a", Tensor<float>(Shape{1})));
  CHECK_THROWS(ps.value("missing"));
  const auto d = ps.cast<double>();
  CHECK(d.value("a")[1] == static_cast<double>(ps.value("a")[1]));
}
