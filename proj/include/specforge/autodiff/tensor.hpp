#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "specforge/core/errors.hpp"

namespace specforge::ad {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out + "]";
}

// Persistent trainable tensor; lives outside any tape. Gradients accumulate
// here across a batch and are consumed by the optimizer.
template <class Real>
struct Param {
  std::string name;
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;

  Param() = default;
  Param(std::string n, Shape s) : name(std::move(n)), shape(std::move(s)) {
    value.assign(numel(shape), Real(0));
    grad.assign(numel(shape), Real(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), Real(0)); }
};

template <class Real>
struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // allocated on first touch
  bool requires_grad = false;
  std::function<void(Node<Real>&)> backward;  // consumes this->grad

  std::vector<Real>& g() {
    if (grad.empty()) grad.assign(value.size(), Real(0));
    return grad;
  }
};

template <class Real>
class Tape;

// Cheap handle into a tape.
template <class Real>
class Var {
 public:
  Var() = default;
  Var(Node<Real>* n, Tape<Real>* t) : node_(n), tape_(t) {}

  const Shape& shape() const { return node_->shape; }
  const std::vector<Real>& value() const { return node_->value; }
  const std::vector<Real>& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  Node<Real>* node() const { return node_; }
  Tape<Real>* tape() const { return tape_; }
  Real scalar() const {
    if (node_->value.size() != 1) throw ShapeError("scalar() on non-scalar tensor");
    return node_->value[0];
  }
  int dim(std::size_t i) const { return node_->shape[i]; }

 private:
  Node<Real>* node_ = nullptr;
  Tape<Real>* tape_ = nullptr;
};

// Reverse-mode tape. Nodes are recorded in creation order, which is a
// topological order of the graph, so the backward pass is a single reverse
// sweep visiting each node exactly once.
template <class Real>
class Tape {
 public:
  Var<Real> make(Shape shape, bool requires_grad) {
    nodes_.emplace_back();
    Node<Real>& n = nodes_.back();
    n.shape = std::move(shape);
    n.value.assign(numel(n.shape), Real(0));
    n.requires_grad = requires_grad;
    return {&n, this};
  }

  Var<Real> input(Shape shape, const std::vector<Real>& data, bool requires_grad = false) {
    if (numel(shape) != data.size()) throw ShapeError("input: data does not match shape");
    Var<Real> v = make(std::move(shape), requires_grad);
    v.node()->value = data;
    return v;
  }

  // Leaf bound to a persistent Param; collect_param_grads() moves the
  // accumulated leaf gradient into Param::grad afterwards.
  Var<Real> param(Param<Real>& p) {
    Var<Real> v = input(p.shape, p.value, /*requires_grad=*/true);
    bindings_.push_back({&p, v.node()});
    return v;
  }

  // Seed an arbitrary node with an upstream gradient before sweep().
  void seed(const Var<Real>& v, Real g) {
    auto& gr = v.node()->g();
    for (auto& x : gr) x += g;
  }
  void seed(const Var<Real>& v, const std::vector<Real>& g) {
    if (g.size() != v.value().size()) throw ShapeError("seed: gradient shape mismatch");
    auto& gr = v.node()->g();
    for (std::size_t i = 0; i < g.size(); ++i) gr[i] += g[i];
  }

  // Reverse sweep over every recorded node.
  void sweep() {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->backward && !it->grad.empty()) it->backward(*it);
    }
  }

  void backward(const Var<Real>& root) {
    if (root.value().size() != 1) throw NonScalarRoot("backward root must be scalar");
    seed(root, Real(1));
    sweep();
  }

  // Param::grad += leaf grad, in binding (creation) order; deterministic.
  void collect_param_grads(Real scale = Real(1)) {
    for (auto& [p, node] : bindings_) {
      if (node->grad.empty()) continue;
      for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += scale * node->grad[i];
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node<Real>> nodes_;  // stable addresses
  std::vector<std::pair<Param<Real>*, Node<Real>*>> bindings_;
};

namespace detail {

template <class Real>
void check_finite(const Var<Real>& v, const char* op) {
#ifndef NDEBUG
  for (Real x : v.value())
    if (!std::isfinite(static_cast<double>(x))) throw NonFinite(std::string(op));
#else
  (void)v;
  (void)op;
#endif
}

template <class Real>
Var<Real> unary(Tape<Real>& tape, const Var<Real>& a, Shape out_shape,
                const std::function<void(const std::vector<Real>&, std::vector<Real>&)>& fwd,
                std::function<void(Node<Real>&, Node<Real>&)> bwd, const char* name) {
  Var<Real> out = tape.make(std::move(out_shape), a.requires_grad());
  fwd(a.value(), out.node()->value);
  if (a.requires_grad()) {
    Node<Real>* an = a.node();
    out.node()->backward = [an, bwd](Node<Real>& self) { bwd(self, *an); };
  }
  check_finite(out, name);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// arithmetic

template <class Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  if (a.shape() != b.shape()) throw ShapeError("add: shape mismatch");
  Tape<Real>& tape = *a.tape();
  Var<Real> out = tape.make(a.shape(), a.requires_grad() || b.requires_grad());
  const auto& av = a.value();
  const auto& bv = b.value();
  auto& ov = out.node()->value;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  if (out.requires_grad()) {
    Node<Real>*an = a.node(), *bn = b.node();
    out.node()->backward = [an, bn](Node<Real>& self) {
      if (an->requires_grad) {
        auto& g = an->g();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->g();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    };
  }
  detail::check_finite(out, "add");
  return out;
}

template <class Real>
Var<Real> sub(const Var<Real>& a, const Var<Real>& b) {
  if (a.shape() != b.shape()) throw ShapeError("sub: shape mismatch");
  Tape<Real>& tape = *a.tape();
  Var<Real> out = tape.make(a.shape(), a.requires_grad() || b.requires_grad());
  const auto& av = a.value();
  const auto& bv = b.value();
  auto& ov = out.node()->value;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  if (out.requires_grad()) {
    Node<Real>*an = a.node(), *bn = b.node();
    out.node()->backward = [an, bn](Node<Real>& self) {
      if (an->requires_grad) {
        auto& g = an->g();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->g();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
      }
    };
  }
  detail::check_finite(out, "sub");
  return out;
}

template <class Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
  if (a.shape() != b.shape()) throw ShapeError("mul: shape mismatch");
  Tape<Real>& tape = *a.tape();
  Var<Real> out = tape.make(a.shape(), a.requires_grad() || b.requires_grad());
  const auto& av = a.value();
  const auto& bv = b.value();
  auto& ov = out.node()->value;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  if (out.requires_grad()) {
    Node<Real>*an = a.node(), *bn = b.node();
    out.node()->backward = [an, bn](Node<Real>& self) {
      if (an->requires_grad) {
        auto& g = an->g();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->value[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->g();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->value[i];
      }
    };
  }
  detail::check_finite(out, "mul");
  return out;
}

template <class Real>
Var<Real> scale(const Var<Real>& a, Real c) {
  return detail::unary<Real>(
      *a.tape(), a, a.shape(),
      [c](const std::vector<Real>& in, std::vector<Real>& out) {
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = c * in[i];
      },
      [c](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
      },
      "scale");
}

template <class Real>
Var<Real> add_scalar(const Var<Real>& a, Real c) {
  return detail::unary<Real>(
      *a.tape(), a, a.shape(),
      [c](const std::vector<Real>& in, std::vector<Real>& out) {
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + c;
      },
      [](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      },
      "add_scalar");
}

// ---------------------------------------------------------------------------
// matmul and layout ops

template <class Real>
Var<Real> matmul(const Var<Real>& a, const Var<Real>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
    throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tape<Real>& tape = *a.tape();
  Var<Real> out = tape.make({m, n}, a.requires_grad() || b.requires_grad());
  {
    const Real* av = a.value().data();
    const Real* bv = b.value().data();
    Real* ov = out.node()->value.data();
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        const Real aik = av[i * k + p];
        const Real* brow = bv + p * n;
        Real* orow = ov + i * n;
        for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
      }
  }
  if (out.requires_grad()) {
    Node<Real>*an = a.node(), *bn = b.node();
    out.node()->backward = [an, bn, m, k, n](Node<Real>& self) {
      const Real* gv = self.grad.data();
      if (an->requires_grad) {  // dA = dC * B^T, via a transposed copy of B
        Real* ga = an->g().data();
        const Real* bv = bn->value.data();
        std::vector<Real> bt(static_cast<std::size_t>(n) * k);
        for (int p = 0; p < k; ++p)
          for (int j = 0; j < n; ++j) bt[j * k + p] = bv[p * n + j];
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            const Real gij = gv[i * n + j];
            const Real* btrow = bt.data() + j * k;
            Real* garow = ga + i * k;
            for (int p = 0; p < k; ++p) garow[p] += gij * btrow[p];
          }
      }
      if (bn->requires_grad) {  // dB = A^T * dC
        Real* gb = bn->g().data();
        const Real* av = an->value.data();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            const Real aik = av[i * k + p];
            const Real* grow = gv + i * n;
            Real* gbrow = gb + p * n;
            for (int j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
          }
      }
    };
  }
  detail::check_finite(out, "matmul");
  return out;
}

template <class Real>
Var<Real> transpose(const Var<Real>& a) {
  if (a.shape().size() != 2) throw ShapeError("transpose: expects 2-D");
  const int m = a.shape()[0], n = a.shape()[1];
  return detail::unary<Real>(
      *a.tape(), a, {n, m},
      [m, n](const std::vector<Real>& in, std::vector<Real>& out) {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
      },
      [m, n](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
      },
      "transpose");
}

template <class Real>
Var<Real> reshape(const Var<Real>& a, Shape s) {
  if (numel(s) != a.value().size()) throw ShapeError("reshape: element count mismatch");
  return detail::unary<Real>(
      *a.tape(), a, std::move(s),
      [](const std::vector<Real>& in, std::vector<Real>& out) { out = in; },
      [](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      },
      "reshape");
}

// Column-wise concatenation of 2-D blocks with equal row counts.
template <class Real>
Var<Real> concat_cols(const std::vector<Var<Real>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int m = parts[0].shape()[0];
  int n = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.shape().size() != 2 || p.shape()[0] != m) throw ShapeError("concat_cols: row mismatch");
    n += p.shape()[1];
    rg = rg || p.requires_grad();
  }
  Tape<Real>& tape = *parts[0].tape();
  Var<Real> out = tape.make({m, n}, rg);
  auto& ov = out.node()->value;
  int col = 0;
  for (const auto& p : parts) {
    const int pn = p.shape()[1];
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < pn; ++j) ov[i * n + (col + j)] = p.value()[i * pn + j];
    col += pn;
  }
  if (rg) {
    std::vector<Node<Real>*> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    out.node()->backward = [nodes, m, n](Node<Real>& self) {
      int col = 0;
      for (Node<Real>* pn_node : nodes) {
        const int pn = pn_node->shape[1];
        if (pn_node->requires_grad) {
          auto& g = pn_node->g();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < pn; ++j) g[i * pn + j] += self.grad[i * n + (col + j)];
        }
        col += pn;
      }
    };
  }
  detail::check_finite(out, "concat_cols");
  return out;
}

template <class Real>
Var<Real> slice_cols(const Var<Real>& a, int j0, int j1) {
  if (a.shape().size() != 2 || j0 < 0 || j1 > a.shape()[1] || j0 >= j1)
    throw ShapeError("slice_cols: bad range");
  const int m = a.shape()[0], n = a.shape()[1], w = j1 - j0;
  return detail::unary<Real>(
      *a.tape(), a, {m, w},
      [m, n, j0, w](const std::vector<Real>& in, std::vector<Real>& out) {
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < w; ++j) out[i * w + j] = in[i * n + j0 + j];
      },
      [m, n, j0, w](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < w; ++j) g[i * n + j0 + j] += self.grad[i * w + j];
      },
      "slice_cols");
}

template <class Real>
Var<Real> slice_rows(const Var<Real>& a, int r0, int r1) {
  if (a.shape().size() != 2 || r0 < 0 || r1 > a.shape()[0] || r0 >= r1)
    throw ShapeError("slice_rows: bad range");
  const int n = a.shape()[1], h = r1 - r0;
  return detail::unary<Real>(
      *a.tape(), a, {h, n},
      [n, r0, h](const std::vector<Real>& in, std::vector<Real>& out) {
        std::copy(in.begin() + static_cast<std::ptrdiff_t>(r0) * n,
                  in.begin() + static_cast<std::ptrdiff_t>(r0 + h) * n, out.begin());
      },
      [n, r0, h](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < n; ++j) g[(r0 + i) * n + j] += self.grad[i * n + j];
      },
      "slice_rows");
}

// Row gather; duplicate indices accumulate gradient additively. This is the
// masked_select of the op set.
template <class Real>
Var<Real> gather_rows(const Var<Real>& a, const std::vector<std::size_t>& idx) {
  if (a.shape().size() != 2) throw ShapeError("gather_rows: expects 2-D");
  const int m = a.shape()[0], n = a.shape()[1];
  for (auto i : idx)
    if (i >= static_cast<std::size_t>(m)) throw IndexError("gather_rows: index out of range");
  return detail::unary<Real>(
      *a.tape(), a, {static_cast<int>(idx.size()), n},
      [&idx, n](const std::vector<Real>& in, std::vector<Real>& out) {
        for (std::size_t r = 0; r < idx.size(); ++r)
          std::copy(in.begin() + static_cast<std::ptrdiff_t>(idx[r] * n),
                    in.begin() + static_cast<std::ptrdiff_t>(idx[r] * n + n),
                    out.begin() + static_cast<std::ptrdiff_t>(r * n));
      },
      [idx, n](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (std::size_t r = 0; r < idx.size(); ++r)
          for (int j = 0; j < n; ++j) g[idx[r] * n + j] += self.grad[r * n + j];
      },
      "gather_rows");
}

// Replace rows in `idx` with the shared token row [1 x n]; all other rows
// pass through bitwise.
template <class Real>
Var<Real> mask_rows(const Var<Real>& a, const std::vector<std::size_t>& idx,
                    const Var<Real>& token) {
  if (a.shape().size() != 2 || token.value().size() != static_cast<std::size_t>(a.shape()[1]))
    throw ShapeError("mask_rows: token width mismatch");
  const int m = a.shape()[0], n = a.shape()[1];
  std::vector<char> masked(static_cast<std::size_t>(m), 0);
  for (auto i : idx) {
    if (i >= static_cast<std::size_t>(m)) throw IndexError("mask_rows: index out of range");
    masked[i] = 1;
  }
  Tape<Real>& tape = *a.tape();
  Var<Real> out = tape.make({m, n}, a.requires_grad() || token.requires_grad());
  auto& ov = out.node()->value;
  const auto& av = a.value();
  const auto& tv = token.value();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) ov[i * n + j] = masked[i] ? tv[j] : av[i * n + j];
  if (out.requires_grad()) {
    Node<Real>*an = a.node(), *tn = token.node();
    out.node()->backward = [an, tn, masked, m, n](Node<Real>& self) {
      if (an->requires_grad) {
        auto& g = an->g();
        for (int i = 0; i < m; ++i)
          if (!masked[i])
            for (int j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j];
      }
      if (tn->requires_grad) {
        auto& g = tn->g();
        for (int i = 0; i < m; ++i)
          if (masked[i])
            for (int j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
      }
    };
  }
  detail::check_finite(out, "mask_rows");
  return out;
}

// Repeat a [1 x n] row `times` times; gradient sums over copies.
template <class Real>
Var<Real> repeat_rows(const Var<Real>& a, int times) {
  if (a.shape().size() != 2 || a.shape()[0] != 1) throw ShapeError("repeat_rows: expects [1 x n]");
  const int n = a.shape()[1];
  return detail::unary<Real>(
      *a.tape(), a, {times, n},
      [times, n](const std::vector<Real>& in, std::vector<Real>& out) {
        for (int r = 0; r < times; ++r)
          std::copy(in.begin(), in.end(), out.begin() + static_cast<std::ptrdiff_t>(r) * n);
      },
      [times, n](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (int r = 0; r < times; ++r)
          for (int j = 0; j < n; ++j) g[j] += self.grad[r * n + j];
      },
      "repeat_rows");
}

// Add a row bias b [1 x n] (or [n]) to every row of a [m x n]. The one
// sanctioned broadcast form.
template <class Real>
Var<Real> add_rowbias(const Var<Real>& a, const Var<Real>& b) {
  if (a.shape().size() != 2 || b.value().size() != static_cast<std::size_t>(a.shape()[1]))
    throw ShapeError("add_rowbias: width mismatch");
  const int m = a.shape()[0], n = a.shape()[1];
  Tape<Real>& tape = *a.tape();
  Var<Real> out = tape.make(a.shape(), a.requires_grad() || b.requires_grad());
  const auto& av = a.value();
  const auto& bv = b.value();
  auto& ov = out.node()->value;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) ov[i * n + j] = av[i * n + j] + bv[j];
  if (out.requires_grad()) {
    Node<Real>*an = a.node(), *bn = b.node();
    out.node()->backward = [an, bn, m, n](Node<Real>& self) {
      if (an->requires_grad) {
        auto& g = an->g();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (bn->requires_grad) {
        auto& g = bn->g();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
      }
    };
  }
  detail::check_finite(out, "add_rowbias");
  return out;
}

// ---------------------------------------------------------------------------
// reductions

template <class Real>
Var<Real> sum_all(const Var<Real>& a) {
  return detail::unary<Real>(
      *a.tape(), a, {1},
      [](const std::vector<Real>& in, std::vector<Real>& out) {
        Real acc = 0;
        for (Real v : in) acc += v;
        out[0] = acc;
      },
      [](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (auto& x : g) x += self.grad[0];
      },
      "sum_all");
}

template <class Real>
Var<Real> mean_all(const Var<Real>& a) {
  const Real inv = Real(1) / static_cast<Real>(a.value().size());
  return detail::unary<Real>(
      *a.tape(), a, {1},
      [inv](const std::vector<Real>& in, std::vector<Real>& out) {
        Real acc = 0;
        for (Real v : in) acc += v;
        out[0] = acc * inv;
      },
      [inv](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (auto& x : g) x += self.grad[0] * inv;
      },
      "mean_all");
}

// Mean over rows of [m x n] -> [1 x n].
template <class Real>
Var<Real> mean_rows(const Var<Real>& a) {
  if (a.shape().size() != 2) throw ShapeError("mean_rows: expects 2-D");
  const int m = a.shape()[0], n = a.shape()[1];
  const Real inv = Real(1) / static_cast<Real>(m);
  return detail::unary<Real>(
      *a.tape(), a, {1, n},
      [m, n, inv](const std::vector<Real>& in, std::vector<Real>& out) {
        for (int j = 0; j < n; ++j) {
          Real acc = 0;
          for (int i = 0; i < m; ++i) acc += in[i * n + j];
          out[j] = acc * inv;
        }
      },
      [m, n, inv](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) g[i * n + j] += self.grad[j] * inv;
      },
      "mean_rows");
}

// Row sums of [m x n] -> [m x 1].
template <class Real>
Var<Real> sum_cols(const Var<Real>& a) {
  if (a.shape().size() != 2) throw ShapeError("sum_cols: expects 2-D");
  const int m = a.shape()[0], n = a.shape()[1];
  return detail::unary<Real>(
      *a.tape(), a, {m, 1},
      [m, n](const std::vector<Real>& in, std::vector<Real>& out) {
        for (int i = 0; i < m; ++i) {
          Real acc = 0;
          for (int j = 0; j < n; ++j) acc += in[i * n + j];
          out[i] = acc;
        }
      },
      [m, n](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) g[i * n + j] += self.grad[i];
      },
      "sum_cols");
}

// ---------------------------------------------------------------------------
// nonlinearities

template <class Real>
Var<Real> relu(const Var<Real>& a) {
  return detail::unary<Real>(
      *a.tape(), a, a.shape(),
      [](const std::vector<Real>& in, std::vector<Real>& out) {
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > Real(0) ? in[i] : Real(0);
      },
      [](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (std::size_t i = 0; i < g.size(); ++i)
          if (an.value[i] > Real(0)) g[i] += self.grad[i];
      },
      "relu");
}

// Exact (erf) GELU.
template <class Real>
Var<Real> gelu(const Var<Real>& a) {
  return detail::unary<Real>(
      *a.tape(), a, a.shape(),
      [](const std::vector<Real>& in, std::vector<Real>& out) {
        for (std::size_t i = 0; i < in.size(); ++i) {
          const double x = static_cast<double>(in[i]);
          out[i] = static_cast<Real>(0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))));
        }
      },
      [](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double x = static_cast<double>(an.value[i]);
          const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
          const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
          g[i] += self.grad[i] * static_cast<Real>(cdf + x * pdf);
        }
      },
      "gelu");
}

template <class Real>
Var<Real> exp(const Var<Real>& a) {
  return detail::unary<Real>(
      *a.tape(), a, a.shape(),
      [](const std::vector<Real>& in, std::vector<Real>& out) {
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::exp(in[i]);
      },
      [](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] += self.grad[i] * std::exp(an.value[i]);
      },
      "exp");
}

template <class Real>
Var<Real> log(const Var<Real>& a) {
  return detail::unary<Real>(
      *a.tape(), a, a.shape(),
      [](const std::vector<Real>& in, std::vector<Real>& out) {
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::log(in[i]);
      },
      [](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / an.value[i];
      },
      "log");
}

template <class Real>
Var<Real> sqrt(const Var<Real>& a) {
  return detail::unary<Real>(
      *a.tape(), a, a.shape(),
      [](const std::vector<Real>& in, std::vector<Real>& out) {
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::sqrt(in[i]);
      },
      [](Node<Real>& self, Node<Real>& an) {
        auto& g = an.g();
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] += self.grad[i] / (Real(2) * std::sqrt(an.value[i]));
      },
      "sqrt");
}

// ---------------------------------------------------------------------------
// row-structured ops

template <class Real>
Var<Real> softmax_rows(const Var<Real>& a) {
  if (a.shape().size() != 2) throw ShapeError("softmax_rows: expects 2-D");
  const int m = a.shape()[0], n = a.shape()[1];
  Tape<Real>& tape = *a.tape();
  Var<Real> out = tape.make(a.shape(), a.requires_grad());
  const auto& av = a.value();
  auto& ov = out.node()->value;
  for (int i = 0; i < m; ++i) {
    Real mx = av[i * n];
    for (int j = 1; j < n; ++j) mx = std::max(mx, av[i * n + j]);
    Real z = 0;
    for (int j = 0; j < n; ++j) {
      const Real e = std::exp(av[i * n + j] - mx);
      ov[i * n + j] = e;
      z += e;
    }
    const Real inv = Real(1) / z;
    for (int j = 0; j < n; ++j) ov[i * n + j] *= inv;
  }
  if (a.requires_grad()) {
    Node<Real>* an = a.node();
    Node<Real>* on = out.node();
    out.node()->backward = [an, on, m, n](Node<Real>& self) {
      auto& g = an->g();
      for (int i = 0; i < m; ++i) {
        Real dot = 0;
        for (int j = 0; j < n; ++j) dot += self.grad[i * n + j] * on->value[i * n + j];
        for (int j = 0; j < n; ++j)
          g[i * n + j] += on->value[i * n + j] * (self.grad[i * n + j] - dot);
      }
    };
  }
  detail::check_finite(out, "softmax_rows");
  return out;
}

template <class Real>
Var<Real> log_softmax_rows(const Var<Real>& a) {
  if (a.shape().size() != 2) throw ShapeError("log_softmax_rows: expects 2-D");
  const int m = a.shape()[0], n = a.shape()[1];
  Tape<Real>& tape = *a.tape();
  Var<Real> out = tape.make(a.shape(), a.requires_grad());
  const auto& av = a.value();
  auto& ov = out.node()->value;
  for (int i = 0; i < m; ++i) {
    Real mx = av[i * n];
    for (int j = 1; j < n; ++j) mx = std::max(mx, av[i * n + j]);
    Real z = 0;
    for (int j = 0; j < n; ++j) z += std::exp(av[i * n + j] - mx);
    const Real lse = mx + std::log(z);
    for (int j = 0; j < n; ++j) ov[i * n + j] = av[i * n + j] - lse;
  }
  if (a.requires_grad()) {
    Node<Real>* an = a.node();
    Node<Real>* on = out.node();
    out.node()->backward = [an, on, m, n](Node<Real>& self) {
      auto& g = an->g();
      for (int i = 0; i < m; ++i) {
        Real gsum = 0;
        for (int j = 0; j < n; ++j) gsum += self.grad[i * n + j];
        for (int j = 0; j < n; ++j)
          g[i * n + j] += self.grad[i * n + j] - std::exp(on->value[i * n + j]) * gsum;
      }
    };
  }
  detail::check_finite(out, "log_softmax_rows");
  return out;
}

// Per-row layer normalization with affine gamma/beta [n].
template <class Real>
Var<Real> layer_norm_rows(const Var<Real>& a, const Var<Real>& gamma, const Var<Real>& beta,
                          Real eps = Real(1e-5)) {
  if (a.shape().size() != 2) throw ShapeError("layer_norm_rows: expects 2-D");
  const int m = a.shape()[0], n = a.shape()[1];
  if (gamma.value().size() != static_cast<std::size_t>(n) ||
      beta.value().size() != static_cast<std::size_t>(n))
    throw ShapeError("layer_norm_rows: affine width mismatch");
  Tape<Real>& tape = *a.tape();
  const bool rg = a.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  Var<Real> out = tape.make(a.shape(), rg);
  // cache per-row mean and inverse stddev for the backward pass
  auto mu = std::make_shared<std::vector<Real>>(m);
  auto rstd = std::make_shared<std::vector<Real>>(m);
  const auto& av = a.value();
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  auto& ov = out.node()->value;
  const Real invn = Real(1) / static_cast<Real>(n);
  for (int i = 0; i < m; ++i) {
    Real mean = 0;
    for (int j = 0; j < n; ++j) mean += av[i * n + j];
    mean *= invn;
    Real var = 0;
    for (int j = 0; j < n; ++j) {
      const Real d = av[i * n + j] - mean;
      var += d * d;
    }
    var *= invn;
    const Real r = Real(1) / std::sqrt(var + eps);
    (*mu)[i] = mean;
    (*rstd)[i] = r;
    for (int j = 0; j < n; ++j) ov[i * n + j] = (av[i * n + j] - mean) * r * gv[j] + bv[j];
  }
  if (rg) {
    Node<Real>*an = a.node(), *gn = gamma.node(), *bn = beta.node();
    out.node()->backward = [an, gn, bn, mu, rstd, m, n, invn](Node<Real>& self) {
      Real* gg = gn->requires_grad ? gn->g().data() : nullptr;
      Real* gb = bn->requires_grad ? bn->g().data() : nullptr;
      Real* ga = an->requires_grad ? an->g().data() : nullptr;
      const Real* gv = gn->value.data();
      const Real* av = an->value.data();
      const Real* dy = self.grad.data();
      for (int i = 0; i < m; ++i) {
        const Real mean = (*mu)[i], r = (*rstd)[i];
        if (gg || gb) {
          for (int j = 0; j < n; ++j) {
            const Real xhat = (av[i * n + j] - mean) * r;
            if (gg) gg[j] += dy[i * n + j] * xhat;
            if (gb) gb[j] += dy[i * n + j];
          }
        }
        if (ga) {
          // d xhat_j = gamma_j * dy_j; dx = r * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
          Real s1 = 0, s2 = 0;
          for (int j = 0; j < n; ++j) {
            const Real dxh = dy[i * n + j] * gv[j];
            const Real xhat = (av[i * n + j] - mean) * r;
            s1 += dxh;
            s2 += dxh * xhat;
          }
          s1 *= invn;
          s2 *= invn;
          for (int j = 0; j < n; ++j) {
            const Real dxh = dy[i * n + j] * gv[j];
            const Real xhat = (av[i * n + j] - mean) * r;
            ga[i * n + j] += r * (dxh - s1 - xhat * s2);
          }
        }
      }
    };
  }
  detail::check_finite(out, "layer_norm_rows");
  return out;
}

// Row-wise L2 normalization onto the unit sphere.
template <class Real>
Var<Real> l2_normalize_rows(const Var<Real>& a, Real tiny = Real(1e-30)) {
  if (a.shape().size() != 2) throw ShapeError("l2_normalize_rows: expects 2-D");
  const int m = a.shape()[0], n = a.shape()[1];
  Tape<Real>& tape = *a.tape();
  Var<Real> out = tape.make(a.shape(), a.requires_grad());
  auto norms = std::make_shared<std::vector<Real>>(m);
  const auto& av = a.value();
  auto& ov = out.node()->value;
  for (int i = 0; i < m; ++i) {
    Real sq = 0;
    for (int j = 0; j < n; ++j) sq += av[i * n + j] * av[i * n + j];
    const Real norm = std::sqrt(sq);
    if (!(norm > tiny)) throw DegenerateProjection("zero vector cannot be normalized");
    (*norms)[i] = norm;
    const Real inv = Real(1) / norm;
    for (int j = 0; j < n; ++j) ov[i * n + j] = av[i * n + j] * inv;
  }
  if (a.requires_grad()) {
    Node<Real>* an = a.node();
    Node<Real>* on = out.node();
    out.node()->backward = [an, on, norms, m, n](Node<Real>& self) {
      auto& g = an->g();
      for (int i = 0; i < m; ++i) {
        const Real inv = Real(1) / (*norms)[i];
        Real dot = 0;
        for (int j = 0; j < n; ++j) dot += self.grad[i * n + j] * on->value[i * n + j];
        for (int j = 0; j < n; ++j)
          g[i * n + j] += inv * (self.grad[i * n + j] - on->value[i * n + j] * dot);
      }
    };
  }
  detail::check_finite(out, "l2_normalize_rows");
  return out;
}

// 1-D convolution, same padding. x: [C_in x L], w: [C_out x C_in x K], b: [C_out].
template <class Real>
Var<Real> conv1d(const Var<Real>& x, const Var<Real>& w, const Var<Real>& b) {
  if (x.shape().size() != 2 || w.shape().size() != 3) throw ShapeError("conv1d: bad ranks");
  const int c_in = x.shape()[0], len = x.shape()[1];
  const int c_out = w.shape()[0], kc_in = w.shape()[1], k = w.shape()[2];
  if (kc_in != c_in || b.value().size() != static_cast<std::size_t>(c_out))
    throw ShapeError("conv1d: channel mismatch");
  if (k % 2 == 0) throw ShapeError("conv1d: kernel must be odd for same padding");
  const int pad = k / 2;
  Tape<Real>& tape = *x.tape();
  const bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
  Var<Real> out = tape.make({c_out, len}, rg);
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = b.value();
  auto& ov = out.node()->value;
  for (int co = 0; co < c_out; ++co)
    for (int t = 0; t < len; ++t) {
      Real acc = bv[co];
      for (int ci = 0; ci < c_in; ++ci)
        for (int dk = 0; dk < k; ++dk) {
          const int src = t + dk - pad;
          if (src >= 0 && src < len)
            acc += wv[(co * c_in + ci) * k + dk] * xv[ci * len + src];
        }
      ov[co * len + t] = acc;
    }
  if (rg) {
    Node<Real>*xn = x.node(), *wn = w.node(), *bn = b.node();
    out.node()->backward = [xn, wn, bn, c_in, c_out, len, k, pad](Node<Real>& self) {
      Real* gb = bn->requires_grad ? bn->g().data() : nullptr;
      Real* gw = wn->requires_grad ? wn->g().data() : nullptr;
      Real* gx = xn->requires_grad ? xn->g().data() : nullptr;
      for (int co = 0; co < c_out; ++co)
        for (int t = 0; t < len; ++t) {
          const Real gy = self.grad[co * len + t];
          if (gb) gb[co] += gy;
          for (int ci = 0; ci < c_in; ++ci)
            for (int dk = 0; dk < k; ++dk) {
              const int src = t + dk - pad;
              if (src < 0 || src >= len) continue;
              if (gw) gw[(co * c_in + ci) * k + dk] += gy * xn->value[ci * len + src];
              if (gx) gx[ci * len + src] += gy * wn->value[(co * c_in + ci) * k + dk];
            }
        }
    };
  }
  detail::check_finite(out, "conv1d");
  return out;
}

}  // namespace specforge::ad
