#pragma once

// Reverse-mode automatic differentiation on a tape of 2-D tensor operations.
//
// A Graph records operations eagerly: creating a node computes its value
// immediately. backward() sweeps the tape in reverse creation order (a valid
// reverse topological order, since inputs always precede outputs) and
// accumulates exact gradients for every leaf that was registered with a slot
// index. Node values stay readable after backward; calling backward again
// re-runs the sweep from scratch and adds the full gradient into the output
// table a second time.
//
// Node buffers come from a slab arena that is recycled between graphs on the
// same thread, so steady-state training does not touch the system allocator.
// Leaves over parameter tensors alias the caller's storage and must outlive
// the graph; parameters are treated as immutable while a graph is alive.

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cgdlab/errors.hpp"
#include "cgdlab/tensor.hpp"

namespace cgd::engine {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;
using EArrMap = Eigen::Map<Eigen::ArrayXd>;
using ECArrMap = Eigen::Map<const Eigen::ArrayXd>;

// Gradient slots, shape-matched to the leaves they correspond to.
struct GradTable {
  std::vector<Tensor> slots;

  void zero() {
    for (Tensor& t : slots) std::fill(t.data.begin(), t.data.end(), 0.0);
  }

  bool all_finite() const {
    for (const Tensor& t : slots) {
      if (!t.all_finite()) return false;
    }
    return true;
  }
};

// Total L2 norm across all gradient slots: sqrt(sum of squares of every
// coordinate), a single scalar.
inline double grad_l2_norm(const GradTable& grads) {
  double ss = 0.0;
  for (const Tensor& t : grads.slots) {
    for (double v : t.data) ss += v * v;
  }
  return std::sqrt(ss);
}

namespace detail {

// Bump allocator over large slabs. Retired slabs are parked in a
// thread-local freelist so consecutive graphs reuse the same memory.
class BufferArena {
 public:
  static constexpr std::size_t kSlabDoubles = std::size_t{1} << 20;  // 8 MiB

  BufferArena() = default;
  BufferArena(const BufferArena&) = delete;
  BufferArena& operator=(const BufferArena&) = delete;

  ~BufferArena() {
    auto& pool = freelist();
    for (auto& slab : slabs_) pool.push_back(std::move(slab));
  }

  double* alloc(std::size_t n) {
    if (n > remaining_) new_slab(std::max(n, kSlabDoubles));
    double* p = cursor_;
    cursor_ += n;
    remaining_ -= n;
    return p;
  }

 private:
  struct Slab {
    std::unique_ptr<double[]> mem;
    std::size_t capacity = 0;
  };

  static std::vector<Slab>& freelist() {
    thread_local std::vector<Slab> pool;
    return pool;
  }

  void new_slab(std::size_t capacity) {
    auto& pool = freelist();
    for (std::size_t i = pool.size(); i-- > 0;) {
      if (pool[i].capacity >= capacity) {
        slabs_.push_back(std::move(pool[i]));
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
        arm_back();
        return;
      }
    }
    slabs_.push_back({std::make_unique<double[]>(capacity), capacity});
    arm_back();
  }

  void arm_back() {
    cursor_ = slabs_.back().mem.get();
    remaining_ = slabs_.back().capacity;
  }

  std::vector<Slab> slabs_;
  double* cursor_ = nullptr;
  std::size_t remaining_ = 0;
};

}  // namespace detail

class Graph {
 public:
  struct Node {
    std::size_t rows = 0, cols = 0;
    double* val = nullptr;   // arena buffer, or alias of external leaf storage
    double* grad = nullptr;  // arena buffer, allocated on demand in backward
    std::vector<int> ins;
    int slot = -1;           // gradient slot for leaves, -1 otherwise
    bool is_constant = false;
    std::function<void(Graph&, int)> backprop;  // empty for leaves/constants

    std::size_t size() const { return rows * cols; }
  };

  Graph() = default;

  int num_nodes() const { return static_cast<int>(nodes_.size()); }

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  std::span<const double> value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return {n.val, n.size()};
  }

  double scalar_value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.size() != 1) throw ShapeError("scalar_value on non-scalar node");
    return n.val[0];
  }

  std::size_t rows(int id) const { return nodes_[static_cast<std::size_t>(id)].rows; }
  std::size_t cols(int id) const { return nodes_[static_cast<std::size_t>(id)].cols; }

  // ----- leaves --------------------------------------------------------

  // Differentiable leaf aliasing `t`; gradients accumulate into slot `slot`.
  int leaf(const Tensor& t, int slot) {
    Node n;
    n.rows = t.rows();
    n.cols = t.cols();
    n.val = const_cast<double*>(t.data.data());
    n.slot = slot;
    return push(std::move(n));
  }

  // Non-differentiable input.
  int constant(std::size_t rows, std::size_t cols, std::span<const double> data) {
    if (rows * cols != data.size()) throw ShapeError("constant: data size mismatch");
    Node n = fresh(rows, cols, {});
    n.is_constant = true;
    std::memcpy(n.val, data.data(), data.size() * sizeof(double));
    return push(std::move(n));
  }

  int scalar_constant(double v) {
    const double d[1] = {v};
    return constant(1, 1, d);
  }

  // ----- elementwise / linear ops --------------------------------------

  int add(int a, int b) {
    check_same_shape(a, b, "add");
    Node n = fresh_like(a, {a, b});
    arr(n) = carr(a) + carr(b);
    n.backprop = [](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      g.garr(self.ins[0]) += g.grad_arr(self);
      g.garr(self.ins[1]) += g.grad_arr(self);
    };
    return push(std::move(n));
  }

  int sub(int a, int b) {
    check_same_shape(a, b, "sub");
    Node n = fresh_like(a, {a, b});
    arr(n) = carr(a) - carr(b);
    n.backprop = [](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      g.garr(self.ins[0]) += g.grad_arr(self);
      g.garr(self.ins[1]) -= g.grad_arr(self);
    };
    return push(std::move(n));
  }

  // Hadamard product.
  int mul(int a, int b) {
    check_same_shape(a, b, "mul");
    Node n = fresh_like(a, {a, b});
    arr(n) = carr(a) * carr(b);
    n.backprop = [](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      g.garr(self.ins[0]) += g.grad_arr(self) * g.carr(self.ins[1]);
      g.garr(self.ins[1]) += g.grad_arr(self) * g.carr(self.ins[0]);
    };
    return push(std::move(n));
  }

  int scale(int a, double s) {
    Node n = fresh_like(a, {a});
    arr(n) = carr(a) * s;
    n.backprop = [s](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      g.garr(self.ins[0]) += g.grad_arr(self) * s;
    };
    return push(std::move(n));
  }

  int sum(int a) {
    Node n = fresh(1, 1, {a});
    n.val[0] = carr(a).sum();
    n.backprop = [](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      g.garr(self.ins[0]) += self.grad[0];
    };
    return push(std::move(n));
  }

  // Matrix product of optionally transposed operands.
  int matmul(int a, int b, bool trans_a = false, bool trans_b = false) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    const std::size_t m = trans_a ? na.cols : na.rows;
    const std::size_t k = trans_a ? na.rows : na.cols;
    const std::size_t kb = trans_b ? nb.cols : nb.rows;
    const std::size_t ncols = trans_b ? nb.rows : nb.cols;
    if (k != kb) throw ShapeError("matmul: inner dimensions disagree");
    Node n = fresh(m, ncols, {a, b});
    {
      ECMap A(na.val, na.rows, na.cols);
      ECMap B(nb.val, nb.rows, nb.cols);
      EMap C(n.val, m, ncols);
      if (!trans_a && !trans_b) C.noalias() = A * B;
      else if (!trans_a && trans_b) C.noalias() = A * B.transpose();
      else if (trans_a && !trans_b) C.noalias() = A.transpose() * B;
      else C.noalias() = A.transpose() * B.transpose();
    }
    n.backprop = [trans_a, trans_b](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      const Node& na = g.nodes_[self.ins[0]];
      const Node& nb = g.nodes_[self.ins[1]];
      ECMap A(na.val, na.rows, na.cols);
      ECMap B(nb.val, nb.rows, nb.cols);
      ECMap G(self.grad, self.rows, self.cols);
      EMap GA(g.grad_of(self.ins[0]), na.rows, na.cols);
      EMap GB(g.grad_of(self.ins[1]), nb.rows, nb.cols);
      // dA' = G * B'^T, dB' = A'^T * G, transposed back into operand layout.
      if (!trans_a) {
        if (!trans_b) GA.noalias() += G * B.transpose();
        else GA.noalias() += G * B;
      } else {
        if (!trans_b) GA.noalias() += B * G.transpose();
        else GA.noalias() += B.transpose() * G.transpose();
      }
      if (!trans_b) {
        if (!trans_a) GB.noalias() += A.transpose() * G;
        else GB.noalias() += A * G;
      } else {
        if (!trans_a) GB.noalias() += G.transpose() * A;
        else GB.noalias() += G.transpose() * A.transpose();
      }
    };
    return push(std::move(n));
  }

  // Broadcast add of a [1 x C] row vector to every row of a [R x C] matrix.
  int add_rowvec(int a, int v) {
    const Node& na = nodes_[a];
    const Node& nv = nodes_[v];
    if (nv.rows != 1 || nv.cols != na.cols) throw ShapeError("add_rowvec: bias shape mismatch");
    Node n = fresh_like(a, {a, v});
    {
      ECMap A(na.val, na.rows, na.cols);
      ECMap V(nv.val, 1, nv.cols);
      EMap Y(n.val, n.rows, n.cols);
      Y = A.rowwise() + V.row(0);
    }
    n.backprop = [](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      g.garr(self.ins[0]) += g.grad_arr(self);
      ECMap G(self.grad, self.rows, self.cols);
      EMap GV(g.grad_of(self.ins[1]), 1, self.cols);
      GV.row(0) += G.colwise().sum();
    };
    return push(std::move(n));
  }

  // Exact GELU: x * Phi(x) with the Gaussian CDF.
  int gelu(int a) {
    Node n = fresh_like(a, {a});
    const double* pa = nodes_[a].val;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const double x = pa[i];
      n.val[i] = 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244));
    }
    n.backprop = [](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      const double* pa = g.nodes_[self.ins[0]].val;
      double* ga = g.grad_of(self.ins[0]);
      constexpr double inv_sqrt2 = 0.7071067811865475244;
      constexpr double inv_sqrt2pi = 0.3989422804014326779;
      for (std::size_t i = 0; i < self.size(); ++i) {
        const double x = pa[i];
        const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
        ga[i] += self.grad[i] * (cdf + x * pdf);
      }
    };
    return push(std::move(n));
  }

  // Row-wise layer normalization with learned gain and bias.
  int layer_norm(int x, int gain, int bias, double eps = 1e-5) {
    const Node& nx = nodes_[x];
    const Node& ng = nodes_[gain];
    const Node& nb = nodes_[bias];
    if (ng.rows != 1 || ng.cols != nx.cols || nb.rows != 1 || nb.cols != nx.cols)
      throw ShapeError("layer_norm: gain/bias shape mismatch");
    const std::size_t R = nx.rows, C = nx.cols;
    Node n = fresh_like(x, {x, gain, bias});
    double* xhat = arena_.alloc(R * C);
    double* rstd = arena_.alloc(R);
    const double* px = nx.val;
    const double* pg = ng.val;
    const double* pb = nb.val;
    for (std::size_t r = 0; r < R; ++r) {
      double mean = 0.0;
      for (std::size_t c = 0; c < C; ++c) mean += px[r * C + c];
      mean /= static_cast<double>(C);
      double var = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double d = px[r * C + c] - mean;
        var += d * d;
      }
      var /= static_cast<double>(C);
      const double rs = 1.0 / std::sqrt(var + eps);
      rstd[r] = rs;
      for (std::size_t c = 0; c < C; ++c) {
        const double h = (px[r * C + c] - mean) * rs;
        xhat[r * C + c] = h;
        n.val[r * C + c] = h * pg[c] + pb[c];
      }
    }
    n.backprop = [xhat, rstd](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      const std::size_t R = self.rows, C = self.cols;
      const double* pg = g.nodes_[self.ins[1]].val;
      double* gx = g.grad_of(self.ins[0]);
      double* gg = g.grad_of(self.ins[1]);
      double* gb = g.grad_of(self.ins[2]);
      for (std::size_t r = 0; r < R; ++r) {
        double sum_dh = 0.0, sum_dh_h = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
          const double go = self.grad[r * C + c];
          const double h = xhat[r * C + c];
          gg[c] += go * h;
          gb[c] += go;
          const double dh = go * pg[c];
          sum_dh += dh;
          sum_dh_h += dh * h;
        }
        const double rs = rstd[r];
        const double invC = 1.0 / static_cast<double>(C);
        for (std::size_t c = 0; c < C; ++c) {
          const double h = xhat[r * C + c];
          const double dh = self.grad[r * C + c] * pg[c];
          gx[r * C + c] += rs * (dh - invC * sum_dh - h * invC * sum_dh_h);
        }
      }
    };
    return push(std::move(n));
  }

  // Row-wise softmax of `scale * scores` over the causal support j <= i of a
  // square score matrix. Entries above the diagonal are exactly zero.
  int causal_softmax(int s, double scale = 1.0) {
    const Node& ns = nodes_[s];
    if (ns.rows != ns.cols) throw ShapeError("causal_softmax: matrix must be square");
    const std::size_t L = ns.rows;
    Node n = fresh_like(s, {s});
    const double* ps = ns.val;
    for (std::size_t i = 0; i < L; ++i) {
      ECArrMap row(ps + i * L, static_cast<Eigen::Index>(i + 1));
      EArrMap out(n.val + i * L, static_cast<Eigen::Index>(i + 1));
      const double m = (row * scale).maxCoeff();
      out = (row * scale - m).exp();
      out /= out.sum();
      std::fill(n.val + i * L + i + 1, n.val + (i + 1) * L, 0.0);
    }
    n.backprop = [scale](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      const std::size_t L = self.rows;
      const double* p = self.val;
      double* gs = g.grad_of(self.ins[0]);
      for (std::size_t i = 0; i < L; ++i) {
        ECArrMap prow(p + i * L, static_cast<Eigen::Index>(i + 1));
        ECArrMap grow(self.grad + i * L, static_cast<Eigen::Index>(i + 1));
        EArrMap gsrow(gs + i * L, static_cast<Eigen::Index>(i + 1));
        const double inner = (prow * grow).sum();
        gsrow += scale * prow * (grow - inner);
      }
    };
    return push(std::move(n));
  }

  // Gather rows of an embedding table by token id.
  int embed_rows(int emb, const std::vector<int>& ids) {
    const Node& ne = nodes_[emb];
    for (int id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= ne.rows)
        throw TokenOutOfVocab("embed_rows: index " + std::to_string(id) + " out of range " +
                              std::to_string(ne.rows));
    }
    Node n = fresh(ids.size(), ne.cols, {emb});
    const double* pe = ne.val;
    for (std::size_t i = 0; i < ids.size(); ++i)
      std::memcpy(n.val + i * ne.cols, pe + static_cast<std::size_t>(ids[i]) * ne.cols,
                  ne.cols * sizeof(double));
    n.backprop = [ids](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      double* ge = g.grad_of(self.ins[0]);
      const std::size_t C = self.cols;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::size_t row = static_cast<std::size_t>(ids[i]);
        for (std::size_t c = 0; c < C; ++c) ge[row * C + c] += self.grad[i * C + c];
      }
    };
    return push(std::move(n));
  }

  // Gather a subset of rows of a computed node.
  int gather_rows(int x, const std::vector<int>& rows_idx) {
    const Node& nx = nodes_[x];
    for (int r : rows_idx) {
      if (r < 0 || static_cast<std::size_t>(r) >= nx.rows)
        throw ShapeError("gather_rows: row index out of range");
    }
    Node n = fresh(rows_idx.size(), nx.cols, {x});
    const double* px = nx.val;
    for (std::size_t i = 0; i < rows_idx.size(); ++i)
      std::memcpy(n.val + i * nx.cols, px + static_cast<std::size_t>(rows_idx[i]) * nx.cols,
                  nx.cols * sizeof(double));
    n.backprop = [rows_idx](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      double* gx = g.grad_of(self.ins[0]);
      const std::size_t C = self.cols;
      for (std::size_t i = 0; i < rows_idx.size(); ++i) {
        const std::size_t row = static_cast<std::size_t>(rows_idx[i]);
        for (std::size_t c = 0; c < C; ++c) gx[row * C + c] += self.grad[i * C + c];
      }
    };
    return push(std::move(n));
  }

  int slice_cols(int x, std::size_t c0, std::size_t len) {
    const Node& nx = nodes_[x];
    if (c0 + len > nx.cols) throw ShapeError("slice_cols: range out of bounds");
    Node n = fresh(nx.rows, len, {x});
    const double* px = nx.val;
    for (std::size_t r = 0; r < nx.rows; ++r)
      std::memcpy(n.val + r * len, px + r * nx.cols + c0, len * sizeof(double));
    n.backprop = [c0, len](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      const Node& nx = g.nodes_[self.ins[0]];
      double* gx = g.grad_of(self.ins[0]);
      for (std::size_t r = 0; r < self.rows; ++r)
        for (std::size_t c = 0; c < len; ++c)
          gx[r * nx.cols + c0 + c] += self.grad[r * len + c];
    };
    return push(std::move(n));
  }

  int concat_cols(const std::vector<int>& xs) {
    if (xs.empty()) throw ShapeError("concat_cols: empty input list");
    const std::size_t R = nodes_[xs[0]].rows;
    std::size_t total = 0;
    for (int x : xs) {
      if (nodes_[x].rows != R) throw ShapeError("concat_cols: row counts disagree");
      total += nodes_[x].cols;
    }
    Node n = fresh(R, total, xs);
    std::size_t off = 0;
    for (int x : xs) {
      const Node& nx = nodes_[x];
      for (std::size_t r = 0; r < R; ++r)
        std::memcpy(n.val + r * total + off, nx.val + r * nx.cols, nx.cols * sizeof(double));
      off += nx.cols;
    }
    n.backprop = [](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      std::size_t off = 0;
      for (int x : self.ins) {
        const Node& nx = g.nodes_[x];
        double* gx = g.grad_of(x);
        for (std::size_t r = 0; r < self.rows; ++r)
          for (std::size_t c = 0; c < nx.cols; ++c)
            gx[r * nx.cols + c] += self.grad[r * self.cols + off + c];
        off += nx.cols;
      }
    };
    return push(std::move(n));
  }

  // Sum of next-token negative log-likelihoods: sum_i -log softmax(row_i)[t_i].
  int nll_sum(int logits, const std::vector<int>& targets) {
    const Node& nl = nodes_[logits];
    if (nl.rows != targets.size()) throw ShapeError("nll_sum: one target per logit row required");
    const std::size_t R = nl.rows, V = nl.cols;
    for (int t : targets) {
      if (t < 0 || static_cast<std::size_t>(t) >= V)
        throw TokenOutOfVocab("nll_sum: target id out of vocabulary");
    }
    Node n = fresh(1, 1, {logits});
    double* probs = arena_.alloc(R * V);
    const double* pl = nl.val;
    double loss = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      ECArrMap row(pl + r * V, static_cast<Eigen::Index>(V));
      EArrMap prow(probs + r * V, static_cast<Eigen::Index>(V));
      const double m = row.maxCoeff();
      prow = (row - m).exp();
      const double z = prow.sum();
      prow /= z;
      loss += m + std::log(z) - pl[r * V + static_cast<std::size_t>(targets[r])];
    }
    n.val[0] = loss;
    n.backprop = [probs, targets](Graph& g, int id) {
      const Node& self = g.nodes_[id];
      const double go = self.grad[0];
      const Node& nl = g.nodes_[self.ins[0]];
      const std::size_t V = nl.cols;
      double* gl = g.grad_of(self.ins[0]);
      for (std::size_t r = 0; r < nl.rows; ++r) {
        EArrMap grow(gl + r * V, static_cast<Eigen::Index>(V));
        ECArrMap prow(probs + r * V, static_cast<Eigen::Index>(V));
        grow += go * prow;
        gl[r * V + static_cast<std::size_t>(targets[r])] -= go;
      }
    };
    return push(std::move(n));
  }

  // ----- backward -------------------------------------------------------

  // Reverse sweep from a scalar loss node. Gradients of leaves with slot s
  // are added into out.slots[s]; the caller owns zeroing between uses.
  void backward(int loss, GradTable& out) {
    if (loss < 0 || loss >= num_nodes()) throw ShapeError("backward: unknown node");
    Node& ln = nodes_[static_cast<std::size_t>(loss)];
    if (ln.size() != 1) throw ShapeError("backward: loss must be a scalar node");
    if (ln.is_constant)
      throw DetachedValueError("backward through a detached value: constants record no operations");
    for (Node& n : nodes_) {
      if (n.grad) std::memset(n.grad, 0, n.size() * sizeof(double));
    }
    grad_of(loss)[0] = 1.0;
    for (int id = loss; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.grad) continue;
      if (n.backprop) n.backprop(*this, id);
    }
    for (const Node& n : nodes_) {
      if (n.slot >= 0 && n.grad) {
        Tensor& dst = out.slots[static_cast<std::size_t>(n.slot)];
        if (dst.numel() != n.size()) throw ShapeError("backward: gradient slot shape mismatch");
        for (std::size_t i = 0; i < n.size(); ++i) dst.data[i] += n.grad[i];
      }
    }
  }

 private:
  std::vector<Node> nodes_;
  detail::BufferArena arena_;

  int push(Node&& n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size() - 1);
  }

  Node fresh(std::size_t rows, std::size_t cols, std::vector<int> ins) {
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.ins = std::move(ins);
    n.val = arena_.alloc(rows * cols);
    return n;
  }

  Node fresh_like(int a, std::vector<int> ins) {
    return fresh(nodes_[a].rows, nodes_[a].cols, std::move(ins));
  }

  double* grad_of(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad) {
      n.grad = arena_.alloc(n.size());
      std::memset(n.grad, 0, n.size() * sizeof(double));
    }
    return n.grad;
  }

  // Eigen array views over values and gradients.
  ECArrMap carr(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return ECArrMap(n.val, static_cast<Eigen::Index>(n.size()));
  }
  static EArrMap arr(Node& n) { return EArrMap(n.val, static_cast<Eigen::Index>(n.size())); }
  static ECArrMap grad_arr(const Node& n) {
    return ECArrMap(n.grad, static_cast<Eigen::Index>(n.size()));
  }
  EArrMap garr(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    grad_of(id);
    return EArrMap(n.grad, static_cast<Eigen::Index>(n.size()));
  }

  void check_same_shape(int a, int b, const char* op) const {
    if (nodes_[a].rows != nodes_[b].rows || nodes_[a].cols != nodes_[b].cols)
      throw ShapeError(std::string(op) + ": operand shapes disagree");
  }
};

}  // namespace cgd::engine
