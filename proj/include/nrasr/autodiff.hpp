// nrasr/autodiff.hpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode automatic differentiation over dense double tensors.
//
// A Graph owns nodes in creation order; creation order is a topological order
// by construction, so backward() walks the node list in reverse and never
// needs an explicit sort. Gradients accumulate additively across fan-out.
// A graph is single-writer: build and run backward on one logical thread.

#ifndef NRASR_AUTODIFF_HPP_
#define NRASR_AUTODIFF_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "nrasr/tensor.hpp"

namespace nrasr {

class Graph;

struct Node {
  Tensor value;
  Tensor grad;  // same shape as value, zero until backward touches it
  std::vector<Node*> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents
  const char* op = "";
};

// Lightweight handle into a Graph; cheap to copy, invalid once the graph dies.
struct Var {
  Graph* graph = nullptr;
  Node* node = nullptr;

  const Tensor& value() const { return node->value; }
  const Tensor& grad() const { return node->grad; }
  const Shape& shape() const { return node->value.shape; }
  double scalar() const {
    NRASR_REQUIRE(node->value.size() == 1, "scalar() on tensor of shape "
                                               << shape_str(node->value.shape));
    return node->value.data[0];
  }
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf holding a value; gradients accumulate into it like any other node.
  Var input(Tensor v) { return make(std::move(v), {}, nullptr, "input"); }

  Var make(Tensor value, std::vector<Node*> parents,
           std::function<void(Node&)> backward_fn, const char* op) {
    NRASR_REQUIRE(value.all_finite(), op << ": non-finite value produced");
    auto node = std::make_unique<Node>();
    node->grad = Tensor::zeros(value.shape);
    node->value = std::move(value);
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
    node->op = op;
    Node* raw = node.get();
    nodes_.push_back(std::move(node));
    return Var{this, raw};
  }

  // Populates grad(p) = d(root)/d(p) for every node p reachable from root.
  void backward(Var root) {
    NRASR_REQUIRE(root.node != nullptr && root.graph == this, "backward: foreign root");
    NRASR_REQUIRE(root.node->value.size() == 1,
                  "backward: root must be scalar, got shape "
                      << shape_str(root.node->value.shape));
    root.node->grad.data[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node& n = **it;
      if (n.backward_fn) n.backward_fn(n);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
};

namespace detail {
inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  NRASR_REQUIRE(a.value().same_shape(b.value()),
                op << ": shape mismatch " << shape_str(a.shape()) << " vs "
                   << shape_str(b.shape()));
}
inline void require_2d(const Var& a, const char* op) {
  NRASR_REQUIRE(a.shape().size() == 2,
                op << ": expected rank-2 tensor, got " << shape_str(a.shape()));
}
}  // namespace detail

inline Var add(Var a, Var b) {
  detail::require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i];
  return a.graph->make(std::move(out), {a.node, b.node},
                       [](Node& self) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           self.parents[0]->grad.data[i] += self.grad.data[i];
                           self.parents[1]->grad.data[i] += self.grad.data[i];
                         }
                       },
                       "add");
}

inline Var mul(Var a, Var b) {
  detail::require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.value().data[i];
  return a.graph->make(std::move(out), {a.node, b.node},
                       [](Node& self) {
                         const auto& av = self.parents[0]->value.data;
                         const auto& bv = self.parents[1]->value.data;
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           self.parents[0]->grad.data[i] += self.grad.data[i] * bv[i];
                           self.parents[1]->grad.data[i] += self.grad.data[i] * av[i];
                         }
                       },
                       "mul");
}

inline Var scale(Var a, double c) {
  Tensor out = a.value();
  for (double& v : out.data) v *= c;
  return a.graph->make(std::move(out), {a.node},
                       [c](Node& self) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           self.parents[0]->grad.data[i] += c * self.grad.data[i];
                       },
                       "scale");
}

// m: [R,C] plus v broadcast over rows; v: [1,C].
inline Var add_rowvec(Var m, Var v) {
  detail::require_2d(m, "add_rowvec");
  NRASR_REQUIRE(v.value().size() == m.value().cols(),
                "add_rowvec: vector " << shape_str(v.shape()) << " vs matrix "
                                      << shape_str(m.shape()));
  Tensor out = m.value();
  std::size_t rows = out.rows(), cols = out.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.data[r * cols + c] += v.value().data[c];
  return m.graph->make(std::move(out), {m.node, v.node},
                       [rows, cols](Node& self) {
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < cols; ++c) {
                             double g = self.grad.data[r * cols + c];
                             self.parents[0]->grad.data[r * cols + c] += g;
                             self.parents[1]->grad.data[c] += g;
                           }
                       },
                       "add_rowvec");
}

inline Var matmul(Var a, Var b) {
  detail::require_2d(a, "matmul");
  detail::require_2d(b, "matmul");
  std::size_t m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
  NRASR_REQUIRE(k == k2, "matmul: shape mismatch " << shape_str(a.shape()) << " vs "
                                                   << shape_str(b.shape()));
  Tensor out = Tensor::zeros({m, n});
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] += aip * bv[p * n + j];
    }
  return a.graph->make(
      std::move(out), {a.node, b.node},
      [m, k, n](Node& self) {
        const auto& g = self.grad.data;
        const auto& av = self.parents[0]->value.data;
        const auto& bv = self.parents[1]->value.data;
        auto& ga = self.parents[0]->grad.data;
        auto& gb = self.parents[1]->grad.data;
        // dA = G * B^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            double gij = g[i * n + j];
            if (gij == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gij * bv[p * n + j];
          }
        // dB = A^T * G
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double aip = av[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
          }
      },
      "matmul");
}

inline Var concat_cols(Var a, Var b) {
  detail::require_2d(a, "concat_cols");
  detail::require_2d(b, "concat_cols");
  NRASR_REQUIRE(a.shape()[0] == b.shape()[0],
                "concat_cols: row mismatch " << shape_str(a.shape()) << " vs "
                                             << shape_str(b.shape()));
  std::size_t rows = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
  Tensor out = Tensor::zeros({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ca; ++c) out.data[r * (ca + cb) + c] = a.value().data[r * ca + c];
    for (std::size_t c = 0; c < cb; ++c)
      out.data[r * (ca + cb) + ca + c] = b.value().data[r * cb + c];
  }
  return a.graph->make(std::move(out), {a.node, b.node},
                       [rows, ca, cb](Node& self) {
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t c = 0; c < ca; ++c)
                             self.parents[0]->grad.data[r * ca + c] +=
                                 self.grad.data[r * (ca + cb) + c];
                           for (std::size_t c = 0; c < cb; ++c)
                             self.parents[1]->grad.data[r * cb + c] +=
                                 self.grad.data[r * (ca + cb) + ca + c];
                         }
                       },
                       "concat_cols");
}

// Stacks k equally-shaped pieces (each of numel C) into a [k, C] matrix.
inline Var stack_rows(const std::vector<Var>& rows) {
  NRASR_REQUIRE(!rows.empty(), "stack_rows: no rows");
  std::size_t c = rows[0].value().size();
  Tensor out = Tensor::zeros({rows.size(), c});
  std::vector<Node*> parents;
  parents.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    NRASR_REQUIRE(rows[r].value().size() == c,
                  "stack_rows: piece " << r << " has shape " << shape_str(rows[r].shape())
                                       << ", expected numel " << c);
    for (std::size_t i = 0; i < c; ++i) out.data[r * c + i] = rows[r].value().data[i];
    parents.push_back(rows[r].node);
  }
  return rows[0].graph->make(std::move(out), std::move(parents),
                             [c](Node& self) {
                               for (std::size_t r = 0; r < self.parents.size(); ++r)
                                 for (std::size_t i = 0; i < c; ++i)
                                   self.parents[r]->grad.data[i] += self.grad.data[r * c + i];
                             },
                             "stack_rows");
}

inline Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
  detail::require_2d(a, "slice_cols");
  std::size_t rows = a.shape()[0], cols = a.shape()[1];
  NRASR_REQUIRE(c0 < c1 && c1 <= cols, "slice_cols: [" << c0 << "," << c1 << ") of "
                                                       << shape_str(a.shape()));
  std::size_t w = c1 - c0;
  Tensor out = Tensor::zeros({rows, w});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c) out.data[r * w + c] = a.value().data[r * cols + c0 + c];
  return a.graph->make(std::move(out), {a.node},
                       [rows, cols, c0, w](Node& self) {
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < w; ++c)
                             self.parents[0]->grad.data[r * cols + c0 + c] +=
                                 self.grad.data[r * w + c];
                       },
                       "slice_cols");
}

inline Var row(Var a, std::size_t r) {
  detail::require_2d(a, "row");
  std::size_t rows = a.shape()[0], cols = a.shape()[1];
  NRASR_REQUIRE(r < rows, "row: index " << r << " of " << shape_str(a.shape()));
  Tensor out = Tensor::zeros({1, cols});
  for (std::size_t c = 0; c < cols; ++c) out.data[c] = a.value().data[r * cols + c];
  return a.graph->make(std::move(out), {a.node},
                       [r, cols](Node& self) {
                         for (std::size_t c = 0; c < cols; ++c)
                           self.parents[0]->grad.data[r * cols + c] += self.grad.data[c];
                       },
                       "row");
}

inline Var cell(Var a, std::size_t r, std::size_t c) {
  detail::require_2d(a, "cell");
  std::size_t rows = a.shape()[0], cols = a.shape()[1];
  NRASR_REQUIRE(r < rows && c < cols,
                "cell: (" << r << "," << c << ") of " << shape_str(a.shape()));
  Tensor out = Tensor::scalar(a.value().data[r * cols + c]);
  return a.graph->make(std::move(out), {a.node},
                       [r, c, cols](Node& self) {
                         self.parents[0]->grad.data[r * cols + c] += self.grad.data[0];
                       },
                       "cell");
}

inline Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  std::vector<double> saved = out.data;
  return a.graph->make(std::move(out), {a.node},
                       [saved = std::move(saved)](Node& self) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           self.parents[0]->grad.data[i] +=
                               self.grad.data[i] * saved[i] * (1.0 - saved[i]);
                       },
                       "sigmoid");
}

inline Var tanh(Var a) {
  Tensor out = a.value();
  for (double& v : out.data) v = std::tanh(v);
  std::vector<double> saved = out.data;
  return a.graph->make(std::move(out), {a.node},
                       [saved = std::move(saved)](Node& self) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           self.parents[0]->grad.data[i] +=
                               self.grad.data[i] * (1.0 - saved[i] * saved[i]);
                       },
                       "tanh");
}

// Hard-clipped linear unit; the DS2-style nonlinearity min(max(x, lo), hi).
inline Var clipped_relu(Var a, double lo = 0.0, double hi = 20.0) {
  Tensor out = a.value();
  std::vector<char> open(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = out.data[i];
    open[i] = (v > lo && v < hi) ? 1 : 0;
    out.data[i] = std::min(std::max(v, lo), hi);
  }
  return a.graph->make(std::move(out), {a.node},
                       [open = std::move(open)](Node& self) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           if (open[i]) self.parents[0]->grad.data[i] += self.grad.data[i];
                       },
                       "clipped_relu");
}

// Log-softmax along the given axis of a 2D tensor (axis 1 = within each row).
inline Var log_softmax(Var a, int axis) {
  detail::require_2d(a, "log_softmax");
  NRASR_REQUIRE(axis == 0 || axis == 1, "log_softmax: axis must be 0 or 1, got " << axis);
  std::size_t rows = a.shape()[0], cols = a.shape()[1];
  std::size_t lines = (axis == 1) ? rows : cols;
  std::size_t len = (axis == 1) ? cols : rows;
  auto idx = [axis, cols](std::size_t line, std::size_t k) {
    return axis == 1 ? line * cols + k : k * cols + line;
  };
  Tensor out = a.value();
  for (std::size_t l = 0; l < lines; ++l) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) m = std::max(m, out.data[idx(l, k)]);
    double sum = 0;
    for (std::size_t k = 0; k < len; ++k) sum += std::exp(out.data[idx(l, k)] - m);
    double lse = m + std::log(sum);
    for (std::size_t k = 0; k < len; ++k) out.data[idx(l, k)] -= lse;
  }
  std::vector<double> saved = out.data;
  return a.graph->make(
      std::move(out), {a.node},
      [saved = std::move(saved), lines, len, idx](Node& self) {
        for (std::size_t l = 0; l < lines; ++l) {
          double gsum = 0;
          for (std::size_t k = 0; k < len; ++k) gsum += self.grad.data[idx(l, k)];
          for (std::size_t k = 0; k < len; ++k) {
            std::size_t i = idx(l, k);
            self.parents[0]->grad.data[i] +=
                self.grad.data[i] - std::exp(saved[i]) * gsum;
          }
        }
      },
      "log_softmax");
}

inline Var reduce_sum(Var a) {
  double s = 0;
  for (double v : a.value().data) s += v;
  return a.graph->make(Tensor::scalar(s), {a.node},
                       [](Node& self) {
                         double g = self.grad.data[0];
                         for (double& pg : self.parents[0]->grad.data) pg += g;
                       },
                       "reduce_sum");
}

inline Var reduce_mean(Var a) {
  double s = 0;
  for (double v : a.value().data) s += v;
  std::size_t n = a.value().size();
  return a.graph->make(Tensor::scalar(s / static_cast<double>(n)), {a.node},
                       [n](Node& self) {
                         double g = self.grad.data[0] / static_cast<double>(n);
                         for (double& pg : self.parents[0]->grad.data) pg += g;
                       },
                       "reduce_mean");
}

// Temporal mean pooling: [T,C] -> [1,C].
inline Var mean_over_rows(Var a) {
  detail::require_2d(a, "mean_over_rows");
  std::size_t rows = a.shape()[0], cols = a.shape()[1];
  Tensor out = Tensor::zeros({1, cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.data[c] += a.value().data[r * cols + c];
  for (double& v : out.data) v /= static_cast<double>(rows);
  return a.graph->make(std::move(out), {a.node},
                       [rows, cols](Node& self) {
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < cols; ++c)
                             self.parents[0]->grad.data[r * cols + c] +=
                                 self.grad.data[c] / static_cast<double>(rows);
                       },
                       "mean_over_rows");
}

// Identity forward; backward propagates -coef times the upstream gradient.
inline Var grad_reverse(Var a, double coef = 1.0) {
  NRASR_REQUIRE(coef > 0, "grad_reverse: coef must be positive, got " << coef);
  Tensor out = a.value();
  return a.graph->make(std::move(out), {a.node},
                       [coef](Node& self) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           self.parents[0]->grad.data[i] += -coef * self.grad.data[i];
                       },
                       "grad_reverse");
}

inline Var reshape(Var a, Shape s) {
  NRASR_REQUIRE(shape_numel(s) == a.value().size(),
                "reshape: " << shape_str(a.shape()) << " to " << shape_str(s));
  Tensor out(std::move(s), a.value().data);
  return a.graph->make(std::move(out), {a.node},
                       [](Node& self) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           self.parents[0]->grad.data[i] += self.grad.data[i];
                       },
                       "reshape");
}

// x: [Cin,F,T], w: [Cout,Cin,KF,KT], b: [Cout]; valid convolution with the
// given frequency/time strides. Output [Cout,F',T'].
inline Var conv2d(Var x, Var w, Var b, std::size_t stride_f, std::size_t stride_t) {
  NRASR_REQUIRE(x.shape().size() == 3, "conv2d: input shape " << shape_str(x.shape()));
  NRASR_REQUIRE(w.shape().size() == 4, "conv2d: kernel shape " << shape_str(w.shape()));
  std::size_t cin = x.shape()[0], f = x.shape()[1], t = x.shape()[2];
  std::size_t cout = w.shape()[0], kf = w.shape()[2], kt = w.shape()[3];
  NRASR_REQUIRE(w.shape()[1] == cin, "conv2d: kernel expects " << w.shape()[1]
                                                               << " channels, input has " << cin);
  NRASR_REQUIRE(b.value().size() == cout, "conv2d: bias size " << b.value().size()
                                                               << " for " << cout << " channels");
  NRASR_REQUIRE(f >= kf && t >= kt, "conv2d: input " << shape_str(x.shape())
                                                     << " smaller than kernel "
                                                     << shape_str(w.shape()));
  NRASR_REQUIRE(stride_f > 0 && stride_t > 0, "conv2d: zero stride");
  std::size_t fo = (f - kf) / stride_f + 1;
  std::size_t to = (t - kt) / stride_t + 1;
  Tensor out = Tensor::zeros({cout, fo, to});
  const auto& xv = x.value().data;
  const auto& wv = w.value().data;
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t yf = 0; yf < fo; ++yf)
      for (std::size_t yt = 0; yt < to; ++yt) {
        double acc = b.value().data[co];
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t pf = 0; pf < kf; ++pf)
            for (std::size_t pt = 0; pt < kt; ++pt)
              acc += wv[((co * cin + ci) * kf + pf) * kt + pt] *
                     xv[(ci * f + yf * stride_f + pf) * t + yt * stride_t + pt];
        out.data[(co * fo + yf) * to + yt] = acc;
      }
  return x.graph->make(
      std::move(out), {x.node, w.node, b.node},
      [cin, f, t, cout, kf, kt, stride_f, stride_t, fo, to](Node& self) {
        const auto& g = self.grad.data;
        const auto& xv = self.parents[0]->value.data;
        const auto& wv = self.parents[1]->value.data;
        auto& gx = self.parents[0]->grad.data;
        auto& gw = self.parents[1]->grad.data;
        auto& gb = self.parents[2]->grad.data;
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t yf = 0; yf < fo; ++yf)
            for (std::size_t yt = 0; yt < to; ++yt) {
              double go = g[(co * fo + yf) * to + yt];
              if (go == 0.0) continue;
              gb[co] += go;
              for (std::size_t ci = 0; ci < cin; ++ci)
                for (std::size_t pf = 0; pf < kf; ++pf)
                  for (std::size_t pt = 0; pt < kt; ++pt) {
                    std::size_t wi = ((co * cin + ci) * kf + pf) * kt + pt;
                    std::size_t xi = (ci * f + yf * stride_f + pf) * t + yt * stride_t + pt;
                    gw[wi] += go * xv[xi];
                    gx[xi] += go * wv[wi];
                  }
            }
      },
      "conv2d");
}

// [C,F,T] -> [T, C*F]: turns a conv feature map into a time-major sequence.
inline Var seq_from_chw(Var x) {
  NRASR_REQUIRE(x.shape().size() == 3, "seq_from_chw: input shape " << shape_str(x.shape()));
  std::size_t c = x.shape()[0], f = x.shape()[1], t = x.shape()[2];
  Tensor out = Tensor::zeros({t, c * f});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t fi = 0; fi < f; ++fi)
      for (std::size_t ti = 0; ti < t; ++ti)
        out.data[ti * (c * f) + ci * f + fi] = x.value().data[(ci * f + fi) * t + ti];
  return x.graph->make(std::move(out), {x.node},
                       [c, f, t](Node& self) {
                         for (std::size_t ci = 0; ci < c; ++ci)
                           for (std::size_t fi = 0; fi < f; ++fi)
                             for (std::size_t ti = 0; ti < t; ++ti)
                               self.parents[0]->grad.data[(ci * f + fi) * t + ti] +=
                                   self.grad.data[ti * (c * f) + ci * f + fi];
                       },
                       "seq_from_chw");
}

// Mean of a set of scalar nodes (batch loss reduction).
inline Var mean_of(const std::vector<Var>& scalars) {
  return reduce_mean(stack_rows(scalars));
}

// Max over coordinates of |analytic - central difference| relative error.
// f is evaluated at p0 +/- h per coordinate; analytic_grad is the gradient
// produced by backward() at p0.
inline double finite_diff_check(const std::function<double(const std::vector<double>&)>& f,
                                const std::vector<double>& p0,
                                const std::vector<double>& analytic_grad, double h) {
  NRASR_REQUIRE(h > 0, "finite_diff_check: h must be positive");
  NRASR_REQUIRE(p0.size() == analytic_grad.size(),
                "finite_diff_check: " << p0.size() << " parameters vs "
                                      << analytic_grad.size() << " gradients");
  std::vector<double> p = p0;
  double max_rel = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = p0[i] + h;
    double fp = f(p);
    p[i] = p0[i] - h;
    double fm = f(p);
    p[i] = p0[i];
    double numeric = (fp - fm) / (2.0 * h);
    double denom = std::max(1e-8, std::fabs(analytic_grad[i]) + std::fabs(numeric));
    max_rel = std::max(max_rel, std::fabs(analytic_grad[i] - numeric) / denom);
  }
  return max_rel;
}

}  // namespace nrasr

#endif  // NRASR_AUTODIFF_HPP_
