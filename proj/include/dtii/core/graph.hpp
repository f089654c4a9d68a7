#pragma once

// Reverse-mode differentiation over dense arrays.
//
// A Tape records nodes in creation order, so creation order is a topological
// order and backward() is a single reverse sweep. Nodes live in a deque and
// references to them stay valid while the tape grows.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtii/core/array.hpp"
#include "dtii/core/kernels.hpp"

namespace dtii::core {

template <class T>
class Tape;

template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Array<T>& value() const { return tape->node(id).value; }
  const Array<T>& grad() const { return tape->node(id).grad; }
  const Shape& shape() const { return value().shape(); }
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }
  /// Scalar value of a one-element node.
  T item() const { return value()[0]; }
  bool requires_grad() const { return tape->node(id).requires_grad; }
};

template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    Array<T> value;
    Array<T> grad;  // allocated on first accumulation
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Array<T> value, bool requires_grad = true) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  Var<T> constant(Array<T> value) { return leaf(std::move(value), false); }

  /// Record an op output. The rule is kept only if some parent carries gradient.
  Var<T> push(Array<T> value, std::initializer_list<Var<T>> parents, BackwardFn rule) {
    return push(std::move(value), std::vector<Var<T>>(parents), std::move(rule));
  }

  Var<T> push(Array<T> value, const std::vector<Var<T>>& parents, BackwardFn rule) {
    Node n;
    n.value = std::move(value);
    for (const auto& p : parents) {
      if (p.tape != this) throw std::invalid_argument("op mixes nodes from different tapes");
      n.parents.push_back(p.id);
      n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(rule);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  /// Drop every node created after the first `n`, keeping earlier leaves alive
  /// for reuse in the next graph.
  void truncate(std::size_t n) {
    if (n < nodes_.size()) nodes_.resize(n);
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of a node, zero-filled on first use.
  Array<T>& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad = Array<T>(n.value.shape(), T{0});
    return n.grad;
  }

  /// Populate gradients of every node reachable from `loss`. Previous
  /// gradients are cleared first; contributions from multiple paths add up.
  void backward(Var<T> loss) {
    if (loss.tape != this) throw std::invalid_argument("loss belongs to another tape");
    if (nodes_[loss.id].value.size() != 1)
      throw ShapeError("backward needs a scalar loss, got shape " + shape_str(nodes_[loss.id].value.shape()));
    for (auto& n : nodes_) n.grad = Array<T>();
    if (!nodes_[loss.id].requires_grad) return;
    grad_buffer(loss.id).fill(T{1});
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.grad.size() == n.value.size()) n.backward(*this, i);
    }
  }

 private:
  std::deque<Node> nodes_;
};

namespace detail {

template <class T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.value().size() != b.value().size() || a.rows() != b.rows())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <class T>
Shape as_matrix(const Array<T>& a) {
  return {a.rows(), a.cols()};
}

/// Elementwise unary op with derivative expressed through input x and output y.
template <class T, class F, class D>
Var<T> unary(Var<T> x, F f, D dydx) {
  const Array<T>& xv = x.value();
  Array<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
  return x.tape->push(std::move(y), {x}, [xid = x.id, dydx](Tape<T>& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    const auto& n = t.node(self);
    const auto& xv = t.node(xid).value;
    auto& gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i] * dydx(xv[i], n.value[i]);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const int m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
  if (k != k2)
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Array<T> out({m, n});
  kernels::gemm_nn(m, n, k, a.value().data(), b.value().data(), out.data(), false);
  return a.tape->push(std::move(out), {a, b}, [aid = a.id, bid = b.id, m, n, k](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    if (t.requires_grad(aid))
      kernels::gemm_nt(m, n, k, g.data(), t.node(bid).value.data(), t.grad_buffer(aid).data(), true);
    if (t.requires_grad(bid))
      kernels::gemm_tn(m, n, k, t.node(aid).value.data(), g.data(), t.grad_buffer(bid).data(), true);
  });
}

/// input[m,k] * weight[k,n] + bias[n], bias broadcast over rows.
template <class T>
Var<T> affine(Var<T> input, Var<T> weight, Var<T> bias) {
  const int m = input.rows(), k = input.cols(), n = weight.cols();
  if (weight.rows() != k)
    throw ShapeError("affine: input " + shape_str(input.shape()) + " incompatible with weight " +
                     shape_str(weight.shape()));
  if (static_cast<int>(bias.value().size()) != n)
    throw ShapeError("affine: bias " + shape_str(bias.shape()) + " does not match output width " + std::to_string(n));
  Array<T> out({m, n});
  const T* bv = bias.value().data();
  for (int i = 0; i < m; ++i) std::copy(bv, bv + n, out.data() + static_cast<std::size_t>(i) * n);
  kernels::gemm_nn(m, n, k, input.value().data(), weight.value().data(), out.data(), true);
  return input.tape->push(
      std::move(out), {input, weight, bias},
      [xid = input.id, wid = weight.id, bid = bias.id, m, n, k](Tape<T>& t, std::size_t self) {
        const auto& g = t.node(self).grad;
        if (t.requires_grad(xid))
          kernels::gemm_nt(m, n, k, g.data(), t.node(wid).value.data(), t.grad_buffer(xid).data(), true);
        if (t.requires_grad(wid))
          kernels::gemm_tn(m, n, k, t.node(xid).value.data(), g.data(), t.grad_buffer(wid).data(), true);
        if (t.requires_grad(bid)) {
          auto& gb = t.grad_buffer(bid);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) gb[j] += g[static_cast<std::size_t>(i) * n + j];
        }
      });
}

// ---------------------------------------------------------------------------
// Elementwise binary

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::require_same_shape(a, b, "add");
  Array<T> out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return a.tape->push(std::move(out), {a, b}, [aid = a.id, bid = b.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    for (std::size_t pid : {aid, bid}) {
      if (!t.requires_grad(pid)) continue;
      auto& gp = t.grad_buffer(pid);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::require_same_shape(a, b, "sub");
  Array<T> out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return a.tape->push(std::move(out), {a, b}, [aid = a.id, bid = b.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    if (t.requires_grad(aid)) {
      auto& ga = t.grad_buffer(aid);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(bid)) {
      auto& gb = t.grad_buffer(bid);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::require_same_shape(a, b, "mul");
  Array<T> out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return a.tape->push(std::move(out), {a, b}, [aid = a.id, bid = b.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    const auto& av = t.node(aid).value;
    const auto& bv = t.node(bid).value;
    if (t.requires_grad(aid)) {
      auto& ga = t.grad_buffer(aid);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(bid)) {
      auto& gb = t.grad_buffer(bid);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise unary

template <class T>
Var<T> scale(Var<T> x, T c) {
  return detail::unary(x, [c](T v) { return c * v; }, [c](T, T) { return c; });
}

template <class T>
Var<T> add_scalar(Var<T> x, T c) {
  return detail::unary(x, [c](T v) { return v + c; }, [](T, T) { return T{1}; });
}

template <class T>
Var<T> tanh(Var<T> x) {
  return detail::unary(x, [](T v) { return std::tanh(v); }, [](T, T y) { return T{1} - y * y; });
}

template <class T>
Var<T> sigmoid(Var<T> x) {
  return detail::unary(
      x,
      [](T v) {
        if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
        const T e = std::exp(v);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <class T>
Var<T> silu(Var<T> x) {
  return detail::unary(
      x, [](T v) { return v / (T{1} + std::exp(-v)); },
      [](T v, T) {
        const T s = T{1} / (T{1} + std::exp(-v));
        return s * (T{1} + v * (T{1} - s));
      });
}

template <class T>
Var<T> exp(Var<T> x) {
  return detail::unary(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Var<T> log(Var<T> x) {
  return detail::unary(x, [](T v) { return std::log(v); }, [](T v, T) { return T{1} / v; });
}

template <class T>
Var<T> square(Var<T> x) {
  return detail::unary(x, [](T v) { return v * v; }, [](T v, T) { return T{2} * v; });
}

/// max(x, floor); gradient flows only where x > floor.
template <class T>
Var<T> clamp_min(Var<T> x, T floor) {
  return detail::unary(
      x, [floor](T v) { return v > floor ? v : floor; }, [floor](T v, T) { return v > floor ? T{1} : T{0}; });
}

/// log(1 + exp(x)), stable for large |x|.
template <class T>
Var<T> softplus(Var<T> x) {
  return detail::unary(
      x, [](T v) { return v > T{0} ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](T v, T) { return T{1} / (T{1} + std::exp(-v)); });
}

template <class T>
Var<T> stop_gradient(Var<T> x) {
  return x.tape->constant(x.value());
}

/// Forward value `forward`, backward routed unchanged to `target`.
template <class T>
Var<T> straight_through(Array<T> forward, Var<T> target) {
  if (forward.size() != target.value().size())
    throw ShapeError("straight_through: forward " + shape_str(forward.shape()) + " vs target " +
                     shape_str(target.shape()));
  return target.tape->push(std::move(forward), {target}, [tid = target.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    auto& gt = t.grad_buffer(tid);
    for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
  });
}

// ---------------------------------------------------------------------------
// Grouped softmax over consecutive blocks of `classes` columns in each row.

template <class T>
Var<T> softmax_groups(Var<T> x, int classes) {
  const Array<T>& xv = x.value();
  if (classes < 1 || xv.size() % static_cast<std::size_t>(classes) != 0)
    throw ShapeError("softmax_groups: " + shape_str(xv.shape()) + " not divisible into groups of " +
                     std::to_string(classes));
  Array<T> y(xv.shape());
  const std::size_t blocks = xv.size() / classes;
  for (std::size_t b = 0; b < blocks; ++b) {
    const T* in = xv.data() + b * classes;
    T* out = y.data() + b * classes;
    const T mx = *std::max_element(in, in + classes);
    double z = 0.0;
    for (int c = 0; c < classes; ++c) {
      out[c] = std::exp(in[c] - mx);
      z += out[c];
    }
    for (int c = 0; c < classes; ++c) out[c] = static_cast<T>(out[c] / z);
  }
  return x.tape->push(std::move(y), {x}, [xid = x.id, classes](Tape<T>& t, std::size_t self) {
    const auto& n = t.node(self);
    auto& gx = t.grad_buffer(xid);
    const std::size_t blocks = gx.size() / classes;
    for (std::size_t b = 0; b < blocks; ++b) {
      const T* g = n.grad.data() + b * classes;
      const T* y = n.value.data() + b * classes;
      double dot = 0.0;
      for (int c = 0; c < classes; ++c) dot += static_cast<double>(g[c]) * y[c];
      for (int c = 0; c < classes; ++c) gx[b * classes + c] += y[c] * (g[c] - static_cast<T>(dot));
    }
  });
}

template <class T>
Var<T> log_softmax_groups(Var<T> x, int classes) {
  const Array<T>& xv = x.value();
  if (classes < 1 || xv.size() % static_cast<std::size_t>(classes) != 0)
    throw ShapeError("log_softmax_groups: " + shape_str(xv.shape()) + " not divisible into groups of " +
                     std::to_string(classes));
  Array<T> y(xv.shape());
  const std::size_t blocks = xv.size() / classes;
  for (std::size_t b = 0; b < blocks; ++b) {
    const T* in = xv.data() + b * classes;
    const T mx = *std::max_element(in, in + classes);
    double z = 0.0;
    for (int c = 0; c < classes; ++c) z += std::exp(static_cast<double>(in[c] - mx));
    const T lse = mx + static_cast<T>(std::log(z));
    for (int c = 0; c < classes; ++c) y[b * classes + c] = in[c] - lse;
  }
  return x.tape->push(std::move(y), {x}, [xid = x.id, classes](Tape<T>& t, std::size_t self) {
    const auto& n = t.node(self);
    auto& gx = t.grad_buffer(xid);
    const std::size_t blocks = gx.size() / classes;
    for (std::size_t b = 0; b < blocks; ++b) {
      double gsum = 0.0;
      for (int c = 0; c < classes; ++c) gsum += n.grad[b * classes + c];
      for (int c = 0; c < classes; ++c) {
        const std::size_t i = b * classes + c;
        gx[i] += n.grad[i] - std::exp(n.value[i]) * static_cast<T>(gsum);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions (double accumulation)

template <class T>
Var<T> sum(Var<T> x) {
  Array<T> out = Array<T>::scalar(static_cast<T>(sum_wide(x.value().span())));
  return x.tape->push(std::move(out), {x}, [xid = x.id](Tape<T>& t, std::size_t self) {
    const T g = t.node(self).grad[0];
    auto& gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

template <class T>
Var<T> mean(Var<T> x) {
  const double n = static_cast<double>(x.value().size());
  Array<T> out = Array<T>::scalar(static_cast<T>(sum_wide(x.value().span()) / n));
  return x.tape->push(std::move(out), {x}, [xid = x.id, n](Tape<T>& t, std::size_t self) {
    const T g = static_cast<T>(t.node(self).grad[0] / n);
    auto& gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

/// Sum each block of `width` consecutive entries: [m, G*width] -> [m, G].
template <class T>
Var<T> sum_groups(Var<T> x, int width) {
  const Array<T>& xv = x.value();
  if (width < 1 || xv.cols() % width != 0)
    throw ShapeError("sum_groups: " + shape_str(xv.shape()) + " not divisible by " + std::to_string(width));
  const int m = xv.rows(), groups = xv.cols() / width;
  Array<T> out({m, groups});
  for (std::size_t b = 0; b < out.size(); ++b) {
    double acc = 0.0;
    for (int c = 0; c < width; ++c) acc += xv[b * width + c];
    out[b] = static_cast<T>(acc);
  }
  return x.tape->push(std::move(out), {x}, [xid = x.id, width](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    auto& gx = t.grad_buffer(xid);
    for (std::size_t b = 0; b < g.size(); ++b)
      for (int c = 0; c < width; ++c) gx[b * width + c] += g[b];
  });
}

template <class T>
Var<T> sum_cols(Var<T> x) {
  return sum_groups(x, x.cols());
}

/// Mean over rows: [m, n] -> [1, n].
template <class T>
Var<T> mean_rows(Var<T> x) {
  const int m = x.rows(), n = x.cols();
  Array<T> out({1, n});
  const auto& xv = x.value();
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i) acc += xv.at(i, j);
    out[j] = static_cast<T>(acc / m);
  }
  return x.tape->push(std::move(out), {x}, [xid = x.id, m, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    auto& gx = t.grad_buffer(xid);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) gx[static_cast<std::size_t>(i) * n + j] += g[j] / static_cast<T>(m);
  });
}

// ---------------------------------------------------------------------------
// Structural

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int m = parts.front().rows();
  int n = 0;
  for (const auto& p : parts) {
    if (p.rows() != m)
      throw ShapeError("concat_cols: row count " + std::to_string(p.rows()) + " differs from " + std::to_string(m));
    n += p.cols();
  }
  Array<T> out({m, n});
  std::vector<int> offsets;
  int off = 0;
  for (const auto& p : parts) {
    const int w = p.cols();
    const auto& pv = p.value();
    for (int i = 0; i < m; ++i)
      std::copy(pv.data() + static_cast<std::size_t>(i) * w, pv.data() + static_cast<std::size_t>(i + 1) * w,
                out.data() + static_cast<std::size_t>(i) * n + off);
    offsets.push_back(off);
    off += w;
  }
  std::vector<std::size_t> ids;
  std::vector<int> widths;
  for (const auto& p : parts) {
    ids.push_back(p.id);
    widths.push_back(p.cols());
  }
  return parts.front().tape->push(
      std::move(out), parts, [ids, widths, offsets, m, n](Tape<T>& t, std::size_t self) {
        const auto& g = t.node(self).grad;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.requires_grad(ids[k])) continue;
          auto& gp = t.grad_buffer(ids[k]);
          const int w = widths[k];
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j)
              gp[static_cast<std::size_t>(i) * w + j] += g[static_cast<std::size_t>(i) * n + offsets[k] + j];
        }
      });
}

template <class T>
Var<T> slice_cols(Var<T> x, int begin, int end) {
  const int m = x.rows(), n = x.cols();
  if (begin < 0 || end > n || begin >= end)
    throw ShapeError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) + ") outside " +
                     shape_str(x.shape()));
  const int w = end - begin;
  Array<T> out({m, w});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < w; ++j) out[static_cast<std::size_t>(i) * w + j] = x.value().at(i, begin + j);
  return x.tape->push(std::move(out), {x}, [xid = x.id, m, n, w, begin](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    auto& gx = t.grad_buffer(xid);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j) gx[static_cast<std::size_t>(i) * n + begin + j] += g[static_cast<std::size_t>(i) * w + j];
  });
}

/// Stack `times` copies of a single-row node: [1, n] -> [times, n].
template <class T>
Var<T> repeat_rows(Var<T> x, int times) {
  if (x.rows() != 1) throw ShapeError("repeat_rows: expects one row, got " + shape_str(x.shape()));
  const int n = x.cols();
  Array<T> out({times, n});
  for (int i = 0; i < times; ++i) std::copy(x.value().data(), x.value().data() + n, out.data() + static_cast<std::size_t>(i) * n);
  return x.tape->push(std::move(out), {x}, [xid = x.id, times, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    auto& gx = t.grad_buffer(xid);
    for (int i = 0; i < times; ++i)
      for (int j = 0; j < n; ++j) gx[j] += g[static_cast<std::size_t>(i) * n + j];
  });
}

template <class T>
Var<T> reshape(Var<T> x, Shape shape) {
  Array<T> out = x.value().reshaped(std::move(shape));
  return x.tape->push(std::move(out), {x}, [xid = x.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    auto& gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

// ---------------------------------------------------------------------------
// Recurrent cell

template <class T>
struct GruParams {
  Var<T> w_in;   // [input, 3H]: reset, update, candidate
  Var<T> b_in;   // [3H]
  Var<T> w_ru;   // [H, 2H]
  Var<T> w_c;    // [H, H]
};

/// Gated recurrent update. r and u gate on (input, h); the candidate sees the
/// reset-scaled state. h' = h + u * (c - h) stays in (-1, 1) when h does.
template <class T>
Var<T> gated_recurrent_cell(Var<T> h_prev, Var<T> input, const GruParams<T>& p) {
  const int hw = h_prev.cols();
  if (p.w_ru.rows() != hw || p.w_ru.cols() != 2 * hw || p.w_c.rows() != hw || p.w_c.cols() != hw ||
      p.w_in.cols() != 3 * hw)
    throw ShapeError("gated_recurrent_cell: recurrent width " + std::to_string(hw) + " does not match params");
  if (p.w_in.rows() != input.cols())
    throw ShapeError("gated_recurrent_cell: input width " + std::to_string(input.cols()) + " vs weight rows " +
                     std::to_string(p.w_in.rows()));
  if (h_prev.rows() != input.rows()) throw ShapeError("gated_recurrent_cell: batch rows differ");
  auto gx = affine(input, p.w_in, p.b_in);
  auto gh = matmul(h_prev, p.w_ru);
  auto r = sigmoid(add(slice_cols(gx, 0, hw), slice_cols(gh, 0, hw)));
  auto u = sigmoid(add(slice_cols(gx, hw, 2 * hw), slice_cols(gh, hw, 2 * hw)));
  auto c = tanh(add(slice_cols(gx, 2 * hw, 3 * hw), matmul(mul(r, h_prev), p.w_c)));
  return add(h_prev, mul(u, sub(c, h_prev)));
}

}  // namespace dtii::core
