#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reid/param_store.hpp"
#include "reid/tensor.hpp"

namespace reid {

/// Handle to a node of a Graph.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

/// Tape of operation records for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the tape is topologically sorted
/// by construction: every input id is smaller than the id of its consumer.
/// Parameters are referenced, not copied; the referenced store must outlive
/// the graph and must not be modified while the graph is alive.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  /// With `record == false` no backward closures are kept (inference mode).
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  /// Leaf that never receives a gradient.
  Var constant(Tensor<T> value);
  /// Leaf that receives a gradient (read it back with grad()).
  Var input(Tensor<T> value);
  /// Leaf bound to a named parameter of `store`.
  Var parameter(const ParamStore<T>& store, const std::string& name);

  const Tensor<T>& value(Var v) const { return node(v.id).get(); }
  bool requires_grad(Var v) const { return node(v.id).requires_grad; }
  bool has_grad(Var v) const { return !node(v.id).grad.empty(); }
  /// Gradient of the last backward root w.r.t. `v`; zeros if `v` was not reached.
  Tensor<T> grad(Var v) const;

  /// Reverse sweep from a scalar root. Returns the number of nodes reached,
  /// each visited once. Gradients from previous sweeps are discarded.
  std::size_t backward(Var root);
  /// Reverse sweep seeded with explicit output gradients.
  std::size_t backward(const std::vector<std::pair<Var, Tensor<T>>>& seeds);

  /// Adds the gradients of every parameter leaf into the matching store entry.
  void accumulate_param_grads(ParamStore<T>& store) const;

  std::size_t node_count() const { return nodes_.size(); }
  std::string_view op_name(Var v) const { return node(v.id).op; }
  bool recording() const { return record_; }

  // Interface for operation implementations.
  Var record(const char* op, Tensor<T> out, std::vector<std::size_t> inputs, BackwardFn fn);
  const Tensor<T>& value_of(std::size_t id) const { return node(id).get(); }
  const Tensor<T>& grad_of(std::size_t id) const { return node(id).grad; }
  /// Gradient buffer of `id`, zero-allocated on first use; nullptr when `id`
  /// does not require a gradient.
  Tensor<T>* grad_accumulator(std::size_t id);

 private:
  struct Node {
    const char* op = "";
    Tensor<T> owned;
    const Tensor<T>* external = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    std::string param_name;
    Tensor<T> grad;

    const Tensor<T>& get() const { return external ? *external : owned; }
  };

  const Node& node(std::size_t id) const;
  Node& node(std::size_t id);
  std::size_t sweep();

  std::vector<Node> nodes_;
  bool record_ = true;
};

// ---------------------------------------------------------------------------
// Differentiable operations

struct Conv2dOptions {
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 0, pad_w = 0;
};

struct Pool2dOptions {
  std::size_t window_h = 2, window_w = 2;
  std::size_t stride_h = 2, stride_w = 2;
};

enum class Activation { kTanh, kSigmoid };

/// Cross-correlation of a C×H×W input with an O×C×k×k filter bank plus bias.
template <typename T>
Var conv2d(Graph<T>& g, Var input, Var weight, Var bias, const Conv2dOptions& opt);

/// Max pooling; ties route the gradient to the first maximum in row-major order.
template <typename T>
Var maxpool2d(Graph<T>& g, Var input, const Pool2dOptions& opt);

/// weight (m×n) · input (n) + bias (m).
template <typename T>
Var linear(Graph<T>& g, Var input, Var weight, Var bias);

template <typename T>
Var activate(Graph<T>& g, Var input, Activation kind);

/// -log softmax(logits)[label], as a 1-element tensor.
template <typename T>
Var softmax_xent(Graph<T>& g, Var logits, std::size_t label);

template <typename T>
Var reshape(Graph<T>& g, Var input, Shape shape);

template <typename T>
Var add(Graph<T>& g, Var a, Var b);

template <typename T>
Var sub(Graph<T>& g, Var a, Var b);

/// Sum of equally shaped tensors, accumulated left to right.
template <typename T>
Var add_n(Graph<T>& g, const std::vector<Var>& terms);

template <typename T>
Var scale(Graph<T>& g, Var input, T factor);

/// input multiplied by the single value held in `factor`.
template <typename T>
Var scale_by(Graph<T>& g, Var input, Var factor);

/// Inner product of two equally sized tensors, as a 1-element tensor.
template <typename T>
Var dot(Graph<T>& g, Var a, Var b);

/// Sum of all elements, as a 1-element tensor.
template <typename T>
Var sum(Graph<T>& g, Var input);

/// C×H×W input times a 1×H×W map broadcast over channels.
template <typename T>
Var mul_channels(Graph<T>& g, Var input, Var map);

}  // namespace reid
