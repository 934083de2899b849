#include "reid/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gemm.hpp"

namespace reid {

// ---------------------------------------------------------------------------
// Graph

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(std::size_t id) const {
  if (id >= nodes_.size()) throw std::out_of_range("graph: invalid node id " + std::to_string(id));
  return nodes_[id];
}

template <typename T>
typename Graph<T>::Node& Graph<T>::node(std::size_t id) {
  if (id >= nodes_.size()) throw std::out_of_range("graph: invalid node id " + std::to_string(id));
  return nodes_[id];
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  Node n;
  n.op = "constant";
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Graph<T>::input(Tensor<T> value) {
  Node n;
  n.op = "input";
  n.owned = std::move(value);
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Graph<T>::parameter(const ParamStore<T>& store, const std::string& name) {
  Node n;
  n.op = "parameter";
  n.external = &store.value(name);
  n.requires_grad = record_;
  n.param_name = name;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Graph<T>::record(const char* op, Tensor<T> out, std::vector<std::size_t> inputs, BackwardFn fn) {
  Node n;
  n.op = op;
  n.owned = std::move(out);
  if (record_) {
    for (auto id : inputs) {
      if (id >= nodes_.size()) throw std::logic_error("graph: input id must precede its consumer");
      n.requires_grad = n.requires_grad || nodes_[id].requires_grad;
    }
    if (n.requires_grad) {
      n.inputs = std::move(inputs);
      n.backward = std::move(fn);
    }
  }
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Tensor<T>* Graph<T>::grad_accumulator(std::size_t id) {
  Node& n = node(id);
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor<T>(n.get().shape());
  return &n.grad;
}

template <typename T>
Tensor<T> Graph<T>::grad(Var v) const {
  const Node& n = node(v.id);
  return n.grad.empty() ? Tensor<T>(n.get().shape()) : n.grad;
}

template <typename T>
std::size_t Graph<T>::backward(Var root) {
  if (node(root.id).get().size() != 1) {
    throw std::invalid_argument("graph: backward root must be scalar, got shape " +
                                shape_string(node(root.id).get().shape()));
  }
  return backward({{root, Tensor<T>(node(root.id).get().shape(), T{1})}});
}

template <typename T>
std::size_t Graph<T>::backward(const std::vector<std::pair<Var, Tensor<T>>>& seeds) {
  for (auto& n : nodes_) n.grad = Tensor<T>();
  for (const auto& [v, g] : seeds) {
    if (node(v.id).get().shape() != g.shape()) {
      throw std::invalid_argument("graph: seed gradient shape " + shape_string(g.shape()) +
                                  " does not match node shape " + shape_string(node(v.id).get().shape()));
    }
    Tensor<T>* acc = grad_accumulator(v.id);
    if (!acc) throw std::invalid_argument("graph: seed on a node that does not require a gradient");
    for (std::size_t i = 0; i < g.size(); ++i) (*acc)[i] += g[i];
  }
  return sweep();
}

template <typename T>
std::size_t Graph<T>::sweep() {
  std::size_t visited = 0;
  for (std::size_t id = nodes_.size(); id-- > 0;) {
    if (nodes_[id].grad.empty()) continue;
    ++visited;
    if (nodes_[id].backward) nodes_[id].backward(*this, id);
  }
  return visited;
}

template <typename T>
void Graph<T>::accumulate_param_grads(ParamStore<T>& store) const {
  for (const auto& n : nodes_) {
    if (n.param_name.empty() || n.grad.empty()) continue;
    auto& dst = store.grad(n.param_name);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
  }
}

// ---------------------------------------------------------------------------
// Operations

namespace {

template <typename T>
void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

struct ConvGeometry {
  std::size_t c, h, w;     // input
  std::size_t o, kh, kw;   // filters
  std::size_t oh, ow;      // output
  Conv2dOptions opt;

  std::size_t patch() const { return c * kh * kw; }
  std::size_t positions() const { return oh * ow; }
};

template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const std::size_t p_count = g.positions();
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((ci * g.kh + ki) * g.kw + kj) * p_count;
        for (std::size_t y = 0; y < g.oh; ++y) {
          const auto iy = static_cast<std::ptrdiff_t>(y * g.opt.stride_h + ki) -
                          static_cast<std::ptrdiff_t>(g.opt.pad_h);
          T* dst = row + y * g.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.ow, T{0});
            continue;
          }
          const T* src = x + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t xo = 0; xo < g.ow; ++xo) {
            const auto ix = static_cast<std::ptrdiff_t>(xo * g.opt.stride_w + kj) -
                            static_cast<std::ptrdiff_t>(g.opt.pad_w);
            dst[xo] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? T{0}
                                                                         : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* dx) {
  const std::size_t p_count = g.positions();
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((ci * g.kh + ki) * g.kw + kj) * p_count;
        for (std::size_t y = 0; y < g.oh; ++y) {
          const auto iy = static_cast<std::ptrdiff_t>(y * g.opt.stride_h + ki) -
                          static_cast<std::ptrdiff_t>(g.opt.pad_h);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dst = dx + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t xo = 0; xo < g.ow; ++xo) {
            const auto ix = static_cast<std::ptrdiff_t>(xo * g.opt.stride_w + kj) -
                            static_cast<std::ptrdiff_t>(g.opt.pad_w);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ix] += row[y * g.ow + xo];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Var conv2d(Graph<T>& g, Var input, Var weight, Var bias, const Conv2dOptions& opt) {
  const auto& x = g.value(input);
  const auto& w = g.value(weight);
  const auto& b = g.value(bias);
  require<T>(x.rank() == 3, "conv2d: input must be C×H×W, got " + shape_string(x.shape()));
  require<T>(w.rank() == 4, "conv2d: weight must be O×C×k×k, got " + shape_string(w.shape()));
  require<T>(w.dim(1) == x.dim(0), "conv2d: weight expects " + std::to_string(w.dim(1)) +
                                       " input channels but input has " + std::to_string(x.dim(0)));
  require<T>(b.size() == w.dim(0), "conv2d: bias length " + std::to_string(b.size()) +
                                       " does not match " + std::to_string(w.dim(0)) + " filters");
  require<T>(opt.stride_h > 0 && opt.stride_w > 0, "conv2d: stride must be positive");
  require<T>(x.dim(1) + 2 * opt.pad_h >= w.dim(2) && x.dim(2) + 2 * opt.pad_w >= w.dim(3),
             "conv2d: kernel larger than padded input");

  ConvGeometry geo{x.dim(0), x.dim(1), x.dim(2), w.dim(0), w.dim(2), w.dim(3), 0, 0, opt};
  geo.oh = (geo.h + 2 * opt.pad_h - geo.kh) / opt.stride_h + 1;
  geo.ow = (geo.w + 2 * opt.pad_w - geo.kw) / opt.stride_w + 1;

  const std::size_t kdim = geo.patch(), pos = geo.positions();
  std::vector<T> col(kdim * pos);
  im2col(geo, x.data(), col.data());

  Tensor<T> out(Shape{geo.o, geo.oh, geo.ow});
  for (std::size_t o = 0; o < geo.o; ++o) std::fill_n(out.data() + o * pos, pos, b[o]);
  detail::gemm_acc(geo.o, pos, kdim, w.data(), col.data(), out.data());

  return g.record("conv2d", std::move(out), {input.id, weight.id, bias.id},
                  [geo, in = input.id, wt = weight.id, bs = bias.id](Graph<T>& gr, std::size_t self) {
                    const auto& dy = gr.grad_of(self);
                    const std::size_t kdim = geo.patch(), pos = geo.positions();
                    if (auto* db = gr.grad_accumulator(bs)) {
                      for (std::size_t o = 0; o < geo.o; ++o) {
                        T s{0};
                        for (std::size_t p = 0; p < pos; ++p) s += dy[o * pos + p];
                        (*db)[o] += s;
                      }
                    }
                    if (auto* dw = gr.grad_accumulator(wt)) {
                      std::vector<T> col(kdim * pos);
                      im2col(geo, gr.value_of(in).data(), col.data());
                      const auto col_t = detail::transpose(col.data(), kdim, pos);
                      detail::gemm_acc(geo.o, kdim, pos, dy.data(), col_t.data(), dw->data());
                    }
                    if (auto* dx = gr.grad_accumulator(in)) {
                      const auto w_t = detail::transpose(gr.value_of(wt).data(), geo.o, kdim);
                      std::vector<T> dcol(kdim * pos, T{0});
                      detail::gemm_acc(kdim, pos, geo.o, w_t.data(), dy.data(), dcol.data());
                      col2im_add(geo, dcol.data(), dx->data());
                    }
                  });
}

template <typename T>
Var maxpool2d(Graph<T>& g, Var input, const Pool2dOptions& opt) {
  const auto& x = g.value(input);
  require<T>(x.rank() == 3, "maxpool2d: input must be C×H×W, got " + shape_string(x.shape()));
  require<T>(opt.window_h > 0 && opt.window_w > 0 && opt.stride_h > 0 && opt.stride_w > 0,
             "maxpool2d: window and stride must be positive");
  require<T>(opt.window_h <= x.dim(1) && opt.window_w <= x.dim(2),
             "maxpool2d: window " + std::to_string(opt.window_h) + "x" + std::to_string(opt.window_w) +
                 " larger than input " + shape_string(x.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = (h - opt.window_h) / opt.stride_h + 1;
  const std::size_t ow = (w - opt.window_w) / opt.stride_w + 1;

  Tensor<T> out(Shape{c, oh, ow});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xo = 0; xo < ow; ++xo) {
        std::size_t best = (ci * h + y * opt.stride_h) * w + xo * opt.stride_w;
        for (std::size_t i = 0; i < opt.window_h; ++i) {
          for (std::size_t j = 0; j < opt.window_w; ++j) {
            const std::size_t idx = (ci * h + y * opt.stride_h + i) * w + xo * opt.stride_w + j;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (ci * oh + y) * ow + xo;
        out[o] = x[best];
        argmax[o] = best;
      }
    }
  }
  return g.record("maxpool2d", std::move(out), {input.id},
                  [argmax = std::move(argmax), in = input.id](Graph<T>& gr, std::size_t self) {
                    auto* dx = gr.grad_accumulator(in);
                    if (!dx) return;
                    const auto& dy = gr.grad_of(self);
                    for (std::size_t o = 0; o < argmax.size(); ++o) (*dx)[argmax[o]] += dy[o];
                  });
}

template <typename T>
Var linear(Graph<T>& g, Var input, Var weight, Var bias) {
  const auto& x = g.value(input);
  const auto& w = g.value(weight);
  const auto& b = g.value(bias);
  require<T>(w.rank() == 2, "linear: weight must be m×n, got " + shape_string(w.shape()));
  const std::size_t m = w.dim(0), n = w.dim(1);
  require<T>(x.size() == n, "linear: input length " + std::to_string(x.size()) +
                                " does not match weight columns " + std::to_string(n));
  require<T>(b.size() == m, "linear: bias length " + std::to_string(b.size()) +
                                " does not match weight rows " + std::to_string(m));
  Tensor<T> out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = w.data() + i * n;
    T s{0};
    for (std::size_t j = 0; j < n; ++j) s += row[j] * x[j];
    out[i] = s + b[i];
  }
  return g.record("linear", std::move(out), {input.id, weight.id, bias.id},
                  [m, n, in = input.id, wt = weight.id, bs = bias.id](Graph<T>& gr, std::size_t self) {
                    const auto& dy = gr.grad_of(self);
                    if (auto* db = gr.grad_accumulator(bs))
                      for (std::size_t i = 0; i < m; ++i) (*db)[i] += dy[i];
                    if (auto* dw = gr.grad_accumulator(wt)) {
                      const auto& xv = gr.value_of(in);
                      for (std::size_t i = 0; i < m; ++i) {
                        T* row = dw->data() + i * n;
                        const T d = dy[i];
                        for (std::size_t j = 0; j < n; ++j) row[j] += d * xv[j];
                      }
                    }
                    if (auto* dx = gr.grad_accumulator(in)) {
                      const auto& wv = gr.value_of(wt);
                      for (std::size_t i = 0; i < m; ++i) {
                        const T* row = wv.data() + i * n;
                        const T d = dy[i];
                        for (std::size_t j = 0; j < n; ++j) (*dx)[j] += d * row[j];
                      }
                    }
                  });
}

template <typename T>
Var activate(Graph<T>& g, Var input, Activation kind) {
  const auto& x = g.value(input);
  Tensor<T> out(x.shape());
  if (kind == Activation::kTanh) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  } else {
    // Saturated outputs are held inside the open interval (0, 1).
    const T lo = std::numeric_limits<T>::min();
    const T hi = std::nextafter(T{1}, T{0});
    for (std::size_t i = 0; i < x.size(); ++i) {
      const T v = x[i];
      const T s = v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v));
      out[i] = std::clamp(s, lo, hi);
    }
  }
  return g.record(kind == Activation::kTanh ? "tanh" : "sigmoid", std::move(out), {input.id},
                  [kind, in = input.id](Graph<T>& gr, std::size_t self) {
                    auto* dx = gr.grad_accumulator(in);
                    if (!dx) return;
                    const auto& y = gr.value_of(self);
                    const auto& dy = gr.grad_of(self);
                    if (kind == Activation::kTanh) {
                      for (std::size_t i = 0; i < y.size(); ++i) (*dx)[i] += dy[i] * (T{1} - y[i] * y[i]);
                    } else {
                      for (std::size_t i = 0; i < y.size(); ++i) (*dx)[i] += dy[i] * y[i] * (T{1} - y[i]);
                    }
                  });
}

template <typename T>
Var softmax_xent(Graph<T>& g, Var logits, std::size_t label) {
  const auto& z = g.value(logits);
  require<T>(label < z.size(), "softmax_xent: label " + std::to_string(label) + " out of range for " +
                                   std::to_string(z.size()) + " classes");
  const T zmax = *std::max_element(z.values().begin(), z.values().end());
  T denom{0};
  for (auto v : z.values()) denom += std::exp(v - zmax);
  const T log_z = zmax + std::log(denom);
  return g.record("softmax_xent", Tensor<T>::scalar(log_z - z[label]), {logits.id},
                  [label, log_z, in = logits.id](Graph<T>& gr, std::size_t self) {
                    auto* dz = gr.grad_accumulator(in);
                    if (!dz) return;
                    const T d = gr.grad_of(self)[0];
                    const auto& zv = gr.value_of(in);
                    for (std::size_t i = 0; i < zv.size(); ++i) {
                      const T p = std::exp(zv[i] - log_z);
                      (*dz)[i] += d * (p - (i == label ? T{1} : T{0}));
                    }
                  });
}

template <typename T>
Var reshape(Graph<T>& g, Var input, Shape shape) {
  auto out = g.value(input).reshaped(std::move(shape));
  return g.record("reshape", std::move(out), {input.id}, [in = input.id](Graph<T>& gr, std::size_t self) {
    auto* dx = gr.grad_accumulator(in);
    if (!dx) return;
    const auto& dy = gr.grad_of(self);
    for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += dy[i];
  });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  return add_n(g, {a, b});
}

template <typename T>
Var sub(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  require<T>(av.shape() == bv.shape(),
             "sub: shape mismatch " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return g.record("sub", std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Graph<T>& gr, std::size_t self) {
    const auto& dy = gr.grad_of(self);
    if (auto* da = gr.grad_accumulator(ia))
      for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i];
    if (auto* db = gr.grad_accumulator(ib))
      for (std::size_t i = 0; i < dy.size(); ++i) (*db)[i] -= dy[i];
  });
}

template <typename T>
Var add_n(Graph<T>& g, const std::vector<Var>& terms) {
  require<T>(!terms.empty(), "add_n: no terms");
  const auto& first = g.value(terms.front());
  Tensor<T> out(first.shape());
  std::vector<std::size_t> ids;
  for (Var t : terms) {
    const auto& v = g.value(t);
    require<T>(v.shape() == first.shape(),
               "add: shape mismatch " + shape_string(v.shape()) + " vs " + shape_string(first.shape()));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    ids.push_back(t.id);
  }
  return g.record("add", std::move(out), ids, [ids](Graph<T>& gr, std::size_t self) {
    const auto& dy = gr.grad_of(self);
    for (auto id : ids) {
      if (auto* d = gr.grad_accumulator(id))
        for (std::size_t i = 0; i < dy.size(); ++i) (*d)[i] += dy[i];
    }
  });
}

template <typename T>
Var scale(Graph<T>& g, Var input, T factor) {
  const auto& x = g.value(input);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = factor * x[i];
  return g.record("scale", std::move(out), {input.id}, [factor, in = input.id](Graph<T>& gr, std::size_t self) {
    auto* dx = gr.grad_accumulator(in);
    if (!dx) return;
    const auto& dy = gr.grad_of(self);
    for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += factor * dy[i];
  });
}

template <typename T>
Var scale_by(Graph<T>& g, Var input, Var factor) {
  const auto& x = g.value(input);
  const auto& f = g.value(factor);
  require<T>(f.size() == 1, "scale_by: factor must hold a single value, got " + shape_string(f.shape()));
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f[0] * x[i];
  return g.record("scale_by", std::move(out), {input.id, factor.id},
                  [in = input.id, fid = factor.id](Graph<T>& gr, std::size_t self) {
                    const auto& dy = gr.grad_of(self);
                    if (auto* dx = gr.grad_accumulator(in)) {
                      const T s = gr.value_of(fid)[0];
                      for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += s * dy[i];
                    }
                    if (auto* df = gr.grad_accumulator(fid)) {
                      const auto& xv = gr.value_of(in);
                      T s{0};
                      for (std::size_t i = 0; i < dy.size(); ++i) s += dy[i] * xv[i];
                      (*df)[0] += s;
                    }
                  });
}

template <typename T>
Var dot(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  require<T>(av.size() == bv.size(), "dot: length mismatch " + std::to_string(av.size()) + " vs " +
                                         std::to_string(bv.size()));
  T s{0};
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return g.record("dot", Tensor<T>::scalar(s), {a.id, b.id}, [ia = a.id, ib = b.id](Graph<T>& gr, std::size_t self) {
    const T d = gr.grad_of(self)[0];
    if (auto* da = gr.grad_accumulator(ia)) {
      const auto& bv = gr.value_of(ib);
      for (std::size_t i = 0; i < bv.size(); ++i) (*da)[i] += d * bv[i];
    }
    if (auto* db = gr.grad_accumulator(ib)) {
      const auto& av = gr.value_of(ia);
      for (std::size_t i = 0; i < av.size(); ++i) (*db)[i] += d * av[i];
    }
  });
}

template <typename T>
Var sum(Graph<T>& g, Var input) {
  const auto& x = g.value(input);
  T s{0};
  for (auto v : x.values()) s += v;
  return g.record("sum", Tensor<T>::scalar(s), {input.id}, [in = input.id](Graph<T>& gr, std::size_t self) {
    auto* dx = gr.grad_accumulator(in);
    if (!dx) return;
    const T d = gr.grad_of(self)[0];
    for (auto& v : dx->values()) v += d;
  });
}

template <typename T>
Var mul_channels(Graph<T>& g, Var input, Var map) {
  const auto& x = g.value(input);
  const auto& m = g.value(map);
  require<T>(x.rank() == 3, "mul_channels: input must be C×H×W, got " + shape_string(x.shape()));
  const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
  require<T>(m.size() == plane, "mul_channels: map " + shape_string(m.shape()) + " does not cover the " +
                                    std::to_string(x.dim(1)) + "x" + std::to_string(x.dim(2)) + " plane");
  Tensor<T> out(x.shape());
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t p = 0; p < plane; ++p) out[ci * plane + p] = x[ci * plane + p] * m[p];
  return g.record("mul_channels", std::move(out), {input.id, map.id},
                  [c, plane, in = input.id, mid = map.id](Graph<T>& gr, std::size_t self) {
                    const auto& dy = gr.grad_of(self);
                    if (auto* dx = gr.grad_accumulator(in)) {
                      const auto& mv = gr.value_of(mid);
                      for (std::size_t ci = 0; ci < c; ++ci)
                        for (std::size_t p = 0; p < plane; ++p) (*dx)[ci * plane + p] += dy[ci * plane + p] * mv[p];
                    }
                    if (auto* dm = gr.grad_accumulator(mid)) {
                      const auto& xv = gr.value_of(in);
                      for (std::size_t ci = 0; ci < c; ++ci)
                        for (std::size_t p = 0; p < plane; ++p) (*dm)[p] += dy[ci * plane + p] * xv[ci * plane + p];
                    }
                  });
}

#define REID_INSTANTIATE_OPS(T)                                                          \
  template class Graph<T>;                                                               \
  template Var conv2d<T>(Graph<T>&, Var, Var, Var, const Conv2dOptions&);                \
  template Var maxpool2d<T>(Graph<T>&, Var, const Pool2dOptions&);                       \
  template Var linear<T>(Graph<T>&, Var, Var, Var);                                      \
  template Var activate<T>(Graph<T>&, Var, Activation);                                  \
  template Var softmax_xent<T>(Graph<T>&, Var, std::size_t);                             \
  template Var reshape<T>(Graph<T>&, Var, Shape);                                        \
  template Var add<T>(Graph<T>&, Var, Var);                                              \
  template Var sub<T>(Graph<T>&, Var, Var);                                              \
  template Var add_n<T>(Graph<T>&, const std::vector<Var>&);                             \
  template Var scale<T>(Graph<T>&, Var, T);                                              \
  template Var scale_by<T>(Graph<T>&, Var, Var);                                         \
  template Var dot<T>(Graph<T>&, Var, Var);                                              \
  template Var sum<T>(Graph<T>&, Var);                                                   \
  template Var mul_channels<T>(Graph<T>&, Var, Var);

REID_INSTANTIATE_OPS(float)
REID_INSTANTIATE_OPS(double)

}  // namespace reid
