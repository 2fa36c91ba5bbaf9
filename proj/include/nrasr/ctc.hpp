// nrasr/ctc.hpp

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

// Connectionist temporal classification.
//
// ctc_loss runs the forward-backward recursion in log space over the
// extended label sequence (blank, l1, blank, ..., lL, blank) and registers
// an analytic gradient with respect to the per-frame log-probabilities:
//
//   dL/dlp(t,k) = -exp( LSE_{s: ext_s = k} (alpha(t,s) + beta(t,s))
//                       - lp(t,k) - logP )
//
// where beta includes the frame-t emission (mirrored recursion of alpha).
// ctc_brute_force enumerates all V^T paths and is the test oracle;
// greedy_decode is best-path decoding with repeats collapsed.

#ifndef NRASR_CTC_HPP_
#define NRASR_CTC_HPP_

#include <cmath>
#include <limits>
#include <vector>

#include "nrasr/autodiff.hpp"
#include "nrasr/common.hpp"
#include "nrasr/tensor.hpp"

namespace nrasr {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Collapse repeats, then drop blanks: the CTC many-to-one path mapping.
inline std::vector<int> collapse_path(const std::vector<int>& path, int blank_index) {
  std::vector<int> out;
  int prev = -1;
  for (int sym : path) {
    if (sym != prev && sym != blank_index) out.push_back(sym);
    prev = sym;
  }
  return out;
}

namespace detail {

inline void validate_ctc_args(const Tensor& log_probs, const std::vector<int>& target,
                              int blank_index) {
  NRASR_REQUIRE(log_probs.shape.size() == 2,
                "ctc: log_probs must be [T,V], got " << shape_str(log_probs.shape));
  std::size_t v = log_probs.cols();
  NRASR_REQUIRE(blank_index >= 0 && static_cast<std::size_t>(blank_index) < v,
                "ctc: blank index " << blank_index << " outside vocab of " << v);
  NRASR_REQUIRE(!target.empty(), "ctc: empty target");
  for (std::size_t i = 0; i < target.size(); ++i) {
    NRASR_REQUIRE(target[i] >= 0 && static_cast<std::size_t>(target[i]) < v,
                  "ctc: target symbol " << target[i] << " at position " << i
                                        << " outside vocab of " << v);
    NRASR_REQUIRE(target[i] != blank_index,
                  "ctc: target contains blank symbol at position " << i);
  }
}

inline std::size_t min_frames_for(const std::vector<int>& target) {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++repeats;
  return target.size() + repeats;
}

}  // namespace detail

struct CtcResult {
  double loss = 0.0;
  Tensor grad;  // dL/d(log_probs), shape [T,V]
};

inline CtcResult ctc_forward_backward(const Tensor& log_probs, const std::vector<int>& target,
                                      int blank_index = 0) {
  detail::validate_ctc_args(log_probs, target, blank_index);
  const std::size_t t_len = log_probs.rows();
  const std::size_t v = log_probs.cols();
  std::size_t need = detail::min_frames_for(target);
  NRASR_REQUIRE(t_len >= need, "ctc: target of length " << target.size() << " (with repeats) "
                                                        << "needs at least " << need
                                                        << " frames, got " << t_len);

  // Extended sequence: blank, l1, blank, l2, ..., lL, blank.
  const std::size_t s_len = 2 * target.size() + 1;
  auto ext = [&](std::size_t s) -> int {
    return (s % 2 == 0) ? blank_index : target[s / 2];
  };
  auto lp = [&](std::size_t t, std::size_t s) { return log_probs.at(t, ext(s)); };
  // A skip s-2 -> s is legal when ext(s) is a label different from ext(s-2).
  auto can_skip = [&](std::size_t s) {
    return s >= 2 && s % 2 == 1 && ext(s) != ext(s - 2);
  };

  std::vector<double> alpha(t_len * s_len, kLogZero);
  std::vector<double> beta(t_len * s_len, kLogZero);

  alpha[0 * s_len + 0] = lp(0, 0);
  if (s_len > 1) alpha[0 * s_len + 1] = lp(0, 1);
  for (std::size_t t = 1; t < t_len; ++t)
    for (std::size_t s = 0; s < s_len; ++s) {
      double acc = alpha[(t - 1) * s_len + s];
      if (s >= 1) acc = log_add(acc, alpha[(t - 1) * s_len + s - 1]);
      if (can_skip(s)) acc = log_add(acc, alpha[(t - 1) * s_len + s - 2]);
      alpha[t * s_len + s] = (acc == kLogZero) ? kLogZero : acc + lp(t, s);
    }

  beta[(t_len - 1) * s_len + (s_len - 1)] = lp(t_len - 1, s_len - 1);
  if (s_len > 1) beta[(t_len - 1) * s_len + (s_len - 2)] = lp(t_len - 1, s_len - 2);
  for (std::size_t ti = t_len - 1; ti-- > 0;)
    for (std::size_t s = 0; s < s_len; ++s) {
      double acc = beta[(ti + 1) * s_len + s];
      if (s + 1 < s_len) acc = log_add(acc, beta[(ti + 1) * s_len + s + 1]);
      if (s + 2 < s_len && can_skip(s + 2)) acc = log_add(acc, beta[(ti + 1) * s_len + s + 2]);
      beta[ti * s_len + s] = (acc == kLogZero) ? kLogZero : acc + lp(ti, s);
    }

  double log_p = alpha[(t_len - 1) * s_len + (s_len - 1)];
  if (s_len > 1) log_p = log_add(log_p, alpha[(t_len - 1) * s_len + (s_len - 2)]);
  NRASR_REQUIRE(log_p != kLogZero, "ctc: target has zero probability under the model");

  CtcResult res;
  res.loss = -log_p;
  res.grad = Tensor::zeros(log_probs.shape);
  std::vector<double> acc(v, kLogZero);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (double& a : acc) a = kLogZero;
    for (std::size_t s = 0; s < s_len; ++s) {
      double ab = alpha[t * s_len + s];
      if (ab == kLogZero) continue;
      double b = beta[t * s_len + s];
      if (b == kLogZero) continue;
      int k = ext(s);
      acc[k] = log_add(acc[k], ab + b);
    }
    for (std::size_t k = 0; k < v; ++k) {
      if (acc[k] == kLogZero) continue;
      res.grad.at(t, k) = -std::exp(acc[k] - log_probs.at(t, k) - log_p);
    }
  }
  return res;
}

// Differentiable wrapper: scalar loss node whose backward adds the analytic
// gradient (scaled by the upstream gradient) into the log-prob node.
inline Var ctc_loss(Var log_probs, const std::vector<int>& target, int blank_index = 0) {
  CtcResult res = ctc_forward_backward(log_probs.value(), target, blank_index);
  Tensor grad = std::move(res.grad);
  return log_probs.graph->make(Tensor::scalar(res.loss), {log_probs.node},
                               [grad = std::move(grad)](Node& self) {
                                 double g = self.grad.data[0];
                                 for (std::size_t i = 0; i < grad.size(); ++i)
                                   self.parents[0]->grad.data[i] += g * grad.data[i];
                               },
                               "ctc_loss");
}

// Enumerates every V^T path; sums the probability of those that collapse to
// the target. Only valid for tiny instances.
inline double ctc_brute_force(const Tensor& log_probs, const std::vector<int>& target,
                              int blank_index = 0) {
  detail::validate_ctc_args(log_probs, target, blank_index);
  const std::size_t t_len = log_probs.rows();
  const std::size_t v = log_probs.cols();
  NRASR_REQUIRE(t_len <= 6 && v <= 4, "ctc_brute_force: instance T=" << t_len << ", V=" << v
                                                                     << " beyond the T<=6, V<=4 "
                                                                     << "enumeration bound");
  std::vector<int> path(t_len, 0);
  double total = 0.0;
  while (true) {
    if (collapse_path(path, blank_index) == target) {
      double p = 1.0;
      for (std::size_t t = 0; t < t_len; ++t)
        p *= std::exp(log_probs.at(t, static_cast<std::size_t>(path[t])));
      total += p;
    }
    std::size_t pos = 0;
    while (pos < t_len && path[pos] == static_cast<int>(v) - 1) path[pos++] = 0;
    if (pos == t_len) break;
    ++path[pos];
  }
  NRASR_REQUIRE(total > 0.0, "ctc_brute_force: target has probability zero (unreachable)");
  return -std::log(total);
}

// Best-path decoding: per-frame argmax (ties break toward the lowest index),
// collapse repeats, drop blanks.
inline std::vector<int> greedy_decode(const Tensor& log_probs, int blank_index = 0) {
  NRASR_REQUIRE(log_probs.shape.size() == 2,
                "greedy_decode: log_probs must be [T,V], got " << shape_str(log_probs.shape));
  std::vector<int> path(log_probs.rows());
  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < log_probs.cols(); ++k)
      if (log_probs.at(t, k) > log_probs.at(t, best)) best = k;
    path[t] = static_cast<int>(best);
  }
  return collapse_path(path, blank_index);
}

}  // namespace nrasr

#endif  // NRASR_CTC_HPP_
