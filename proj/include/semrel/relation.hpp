// Copyright 2026 The semrel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Patch-wise similarity distributions and the semantic relation consistency
// (SRC) loss: sum over k of JSD(P_k || Q_k), where P_k is the softmax of
// z_k . z_j / tau_rel over the sampled patches j of the input image and Q_k the
// same for w on the output image.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "semrel/error.hpp"
#include "semrel/numerics.hpp"

namespace semrel {

enum class DetachSide { kNone, kInput, kOutput };

struct RelationConfig {
  bool include_self = true;
  double tau_rel = 1.0;
  DetachSide detach = DetachSide::kNone;
};

struct SimilarityDistribution {
  Matrix probs;  // K x M
  bool include_self = true;
  double tau_rel = 1.0;

  /// Patch index referred to by column `col` of row `k`.
  std::size_t patch_of(std::size_t k, std::size_t col) const noexcept {
    return include_self || col < k ? col : col + 1;
  }
};

struct SrcResult {
  double loss = 0.0;
  Matrix grad_z;
  Matrix grad_w;
};

namespace detail {

inline void check_relation_args(std::size_t k, const RelationConfig& cfg, const char* who) {
  std::size_t min_k = cfg.include_self ? 2 : 3;
  if (k < min_k)
    throw PreconditionError(std::string(who) + ": need K >= " + std::to_string(min_k) + ", got " + std::to_string(k));
  if (!(cfg.tau_rel > 0.0)) throw PreconditionError(std::string(who) + ": tau_rel must be > 0");
}

/// Row k of the log-distribution over the columns of `gram` (scaled logits).
inline Vector relation_logits(const Matrix& gram, std::size_t k, bool include_self, double tau_rel) {
  Vector v;
  v.reserve(gram.cols());
  for (std::size_t j = 0; j < gram.cols(); ++j)
    if (include_self || j != k) v.push_back(gram(k, j) / tau_rel);
  return v;
}

}  // namespace detail

inline SimilarityDistribution similarity_distribution(const Matrix& e, bool include_self = true, double tau_rel = 1.0) {
  detail::check_relation_args(e.rows(), {include_self, tau_rel, DetachSide::kNone}, "similarity_distribution");
  const std::size_t k_total = e.rows();
  const std::size_t m = include_self ? k_total : k_total - 1;
  Matrix gram = matmul_nt(e, e);
  SimilarityDistribution out{Matrix(k_total, m), include_self, tau_rel};
  for (std::size_t k = 0; k < k_total; ++k) {
    Vector p = softmax(detail::relation_logits(gram, k, include_self, tau_rel));
    std::copy(p.begin(), p.end(), out.probs.row(k).begin());
  }
  return out;
}

/// Jensen-Shannon divergence with natural log; 0 log 0 := 0.
inline double jsd(std::span<const double> p, std::span<const double> q) {
  require_shape(p.size() == q.size(), "jsd: length mismatch " + std::to_string(p.size()) + " vs " +
                                          std::to_string(q.size()));
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    require(p[i] >= 0.0 && q[i] >= 0.0, "jsd: negative probability at index " + std::to_string(i));
    sp += p[i];
    sq += q[i];
  }
  require(std::abs(sp - 1.0) <= 1e-9 && std::abs(sq - 1.0) <= 1e-9, "jsd: inputs must each sum to 1");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) s += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) s += 0.5 * q[i] * std::log(q[i] / m);
  }
  return s;
}

/// L_SRC with gradients w.r.t. the rows of z and w as given (no chain through
/// normalization; the head handles that).
inline SrcResult src_loss(const Matrix& z, const Matrix& w, const RelationConfig& cfg = {}) {
  require_shape(z.same_shape(w), "src_loss: z is " + shape_str(z) + " but w is " + shape_str(w));
  detail::check_relation_args(z.rows(), cfg, "src_loss");
  const std::size_t k_total = z.rows();
  const double ln2 = std::numbers::ln2;

  Matrix gram_z = matmul_nt(z, z);
  Matrix gram_w = matmul_nt(w, w);
  // dL/d(gram) entries, already divided by tau_rel; zero on the diagonal
  // when self-similarity is excluded.
  Matrix gz(k_total, k_total);
  Matrix gw(k_total, k_total);

  SrcResult res;
  for (std::size_t k = 0; k < k_total; ++k) {
    Vector p = detail::relation_logits(gram_z, k, cfg.include_self, cfg.tau_rel);
    Vector q = detail::relation_logits(gram_w, k, cfg.include_self, cfg.tau_rel);
    Vector lp = p, lq = q;
    const double lse_p = softmax_inplace(p);
    const double lse_q = softmax_inplace(q);
    const std::size_t m = p.size();
    Vector dp(m), dq(m);
    double row = 0.0, mean_p = 0.0, mean_q = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      lp[i] -= lse_p;
      lq[i] -= lse_q;
      // dJSD/dP_i = 0.5 log(P_i / M_i), likewise for Q; exactly 0 when P_i == Q_i.
      if (lp[i] != lq[i]) {
        const double pq = p[i] + q[i];
        const double lm = pq > 0.0 ? std::log(0.5 * pq) : logaddexp(lp[i], lq[i]) - ln2;
        dp[i] = 0.5 * (lp[i] - lm);
        dq[i] = 0.5 * (lq[i] - lm);
      }
      row += p[i] * dp[i] + q[i] * dq[i];
      mean_p += p[i] * dp[i];
      mean_q += q[i] * dq[i];
    }
    res.loss += row;
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t j = cfg.include_self || i < k ? i : i + 1;
      gz(k, j) = p[i] * (dp[i] - mean_p) / cfg.tau_rel;
      gw(k, j) = q[i] * (dq[i] - mean_q) / cfg.tau_rel;
    }
  }

  // logit_kj = e_k . e_j, so dL/de = (G + G^T) e.
  auto symmetrized = [](const Matrix& g) {
    Matrix s = g;
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) s(i, j) += g(j, i);
    return s;
  };
  res.grad_z = cfg.detach == DetachSide::kInput ? Matrix(z.rows(), z.cols()) : matmul(symmetrized(gz), z);
  res.grad_w = cfg.detach == DetachSide::kOutput ? Matrix(w.rows(), w.cols()) : matmul(symmetrized(gw), w);
  return res;
}

}  // namespace semrel
