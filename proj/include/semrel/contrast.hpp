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

// Patch-wise contrastive losses. For positive pair k the query is w_k, the
// positive is z_k and the negatives are the other input-side embeddings
// {z_j : j != k}. With s_jk = z_j . w_k / tau and N = K - 1:
//
//   InfoNCE  : -s_kk + log(exp(s_kk) + sum_j exp(s_jk))
//   DCE      : -s_kk + log(sum_j exp(s_jk))
//   hDCE     : -s_kk + log(N * E_k)
//
// where E_k is the self-normalized importance estimate of the expectation of
// exp(s_jk) under the von Mises-Fisher tilted negative distribution:
//
//   E_k = sum_j u_jk exp(s_jk) / sum_j u_jk,   u_jk = exp(gamma z_k . z_j).
//
// With gamma = 0 the weights are uniform and N * E_k is the plain negative
// sum, so hDCE reduces to DCE. The same tilt applied inside the InfoNCE
// denominator gives the hard-negative InfoNCE variant. Losses are averaged
// over k.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "semrel/error.hpp"
#include "semrel/numerics.hpp"

namespace semrel {

struct ContrastConfig {
  double tau = 0.07;
  double gamma = 0.0;
  /// Treat the importance weights exp(gamma z_k . z_j) as constants.
  bool detach_weights = false;
};

enum class ContrastKind {
  kDecoupled,  // positive term removed from the denominator (DCE / hDCE)
  kInfoNce,    // positive term kept (InfoNCE / hard InfoNCE)
};

struct ContrastResult {
  double loss = 0.0;
  Matrix grad_z;
  Matrix grad_w;
  Vector per_positive;
  /// 1 - exp(s_kk) / (exp(s_kk) + N E_k): the exact negative-positive
  /// coupling coefficient. Reported for every kind; it only multiplies the
  /// gradient for the InfoNCE kind.
  Vector npc;
  /// log E_k
  Vector log_neg_mean;
};

namespace detail {

inline void check_contrast_args(const Matrix& z, const Matrix& w, const ContrastConfig& cfg, const char* who) {
  require_shape(z.same_shape(w), std::string(who) + ": z is " + shape_str(z) + " but w is " + shape_str(w));
  if (z.rows() < 2) throw PreconditionError(std::string(who) + ": need K >= 2, got " + std::to_string(z.rows()));
  if (!(cfg.tau > 0.0)) throw PreconditionError(std::string(who) + ": tau must be > 0");
  if (!(cfg.gamma >= 0.0)) throw PreconditionError(std::string(who) + ": gamma must be >= 0");
}

inline ContrastResult contrast_kernel(const Matrix& z, const Matrix& w, double tau, double gamma, bool detach_weights,
                                      ContrastKind kind) {
  const std::size_t k_total = z.rows();
  const std::size_t n_neg = k_total - 1;
  const double log_n = std::log(static_cast<double>(n_neg));
  const bool tilted = gamma != 0.0;

  Matrix sim = matmul_nt(z, w);  // sim(j, k) = z_j . w_k
  Matrix zz = tilted ? matmul_nt(z, z) : Matrix();

  Matrix gs(k_total, k_total);  // dL/ds, s = sim / tau
  Matrix ga(tilted ? k_total : 0, tilted ? k_total : 0);

  ContrastResult res;
  res.per_positive.resize(k_total);
  res.npc.resize(k_total);
  res.log_neg_mean.resize(k_total);

  Vector s(n_neg), a(n_neg), pi(n_neg), rho(n_neg);
  for (std::size_t k = 0; k < k_total; ++k) {
    const double s_pos = sim(k, k) / tau;
    for (std::size_t i = 0, j = 0; j < k_total; ++j) {
      if (j == k) continue;
      s[i] = sim(j, k) / tau;
      if (tilted) a[i] = gamma * zz(k, j);
      pi[i] = tilted ? a[i] + s[i] : s[i];
      ++i;
    }
    // pi: softmax of (a + s) over the negatives, rho: softmax of a.
    const double lse_as = softmax_inplace(pi);
    double lse_a = log_n;
    if (tilted) {
      rho = a;
      lse_a = softmax_inplace(rho);
    }
    // log(N E_k)
    const double log_neg = tilted ? lse_as - (lse_a - log_n) : lse_as;
    res.log_neg_mean[k] = log_neg - log_n;

    const double total = logaddexp(s_pos, log_neg);
    const double npc = std::exp(log_neg - total);
    res.npc[k] = npc;

    double d_neg;
    if (kind == ContrastKind::kInfoNce) {
      res.per_positive[k] = total - s_pos;
      d_neg = npc;
    } else {
      res.per_positive[k] = log_neg - s_pos;
      d_neg = 1.0;
    }

    gs(k, k) = -d_neg;
    for (std::size_t i = 0, j = 0; j < k_total; ++j) {
      if (j == k) continue;
      gs(j, k) = d_neg * pi[i];
      if (tilted && !detach_weights) ga(k, j) = d_neg * (pi[i] - rho[i]);
      ++i;
    }
  }

  double sum = 0.0;
  for (double v : res.per_positive) sum += v;
  res.loss = sum / static_cast<double>(k_total);

  const double scale = 1.0 / (static_cast<double>(k_total) * tau);
  // s_jk = z_j . w_k / tau: dL/dw_k = sum_j gs(j,k) z_j, dL/dz_j = sum_k gs(j,k) w_k.
  res.grad_w = matmul_tn(gs, z);
  res.grad_w *= scale;
  res.grad_z = matmul(gs, w);
  res.grad_z *= scale;
  if (tilted && !detach_weights) {
    // a_kj = gamma z_k . z_j is symmetric in its two arguments.
    Matrix sym = ga;
    for (std::size_t i = 0; i < k_total; ++i)
      for (std::size_t j = 0; j < k_total; ++j) sym(i, j) += ga(j, i);
    axpy(gamma / static_cast<double>(k_total), matmul(sym, z), res.grad_z);
  }
  return res;
}

}  // namespace detail

/// Hard-negative contrastive loss of the given kind at cfg.gamma.
inline ContrastResult contrastive_loss(const Matrix& z, const Matrix& w, const ContrastConfig& cfg, ContrastKind kind) {
  detail::check_contrast_args(z, w, cfg, "contrastive_loss");
  return detail::contrast_kernel(z, w, cfg.tau, cfg.gamma, cfg.detach_weights, kind);
}

/// InfoNCE (cfg.gamma ignored).
inline ContrastResult infonce(const Matrix& z, const Matrix& w, const ContrastConfig& cfg) {
  detail::check_contrast_args(z, w, cfg, "infonce");
  return detail::contrast_kernel(z, w, cfg.tau, 0.0, false, ContrastKind::kInfoNce);
}

/// Decoupled InfoNCE (cfg.gamma ignored).
inline ContrastResult dce(const Matrix& z, const Matrix& w, const ContrastConfig& cfg) {
  detail::check_contrast_args(z, w, cfg, "dce");
  return detail::contrast_kernel(z, w, cfg.tau, 0.0, false, ContrastKind::kDecoupled);
}

/// Decoupled InfoNCE with vMF-weighted hard negatives.
inline ContrastResult hdce(const Matrix& z, const Matrix& w, const ContrastConfig& cfg) {
  detail::check_contrast_args(z, w, cfg, "hdce");
  return detail::contrast_kernel(z, w, cfg.tau, cfg.gamma, cfg.detach_weights, ContrastKind::kDecoupled);
}

/// InfoNCE with the same hard-negative tilt in its negative term.
inline ContrastResult hard_infonce(const Matrix& z, const Matrix& w, const ContrastConfig& cfg) {
  detail::check_contrast_args(z, w, cfg, "hard_infonce");
  return detail::contrast_kernel(z, w, cfg.tau, cfg.gamma, cfg.detach_weights, ContrastKind::kInfoNce);
}

/// The common approximation of the coupling coefficient that replaces
/// z_j . w_k by z_j . z_k in the negative sum. Exact when w == z.
inline Vector npc_approx(const Matrix& z, const Matrix& w, const ContrastConfig& cfg) {
  detail::check_contrast_args(z, w, cfg, "npc_approx");
  const std::size_t k_total = z.rows();
  Vector out(k_total);
  Vector s(k_total - 1);
  for (std::size_t k = 0; k < k_total; ++k) {
    double s_pos = dot(z.row(k), w.row(k)) / cfg.tau;
    for (std::size_t i = 0, j = 0; j < k_total; ++j)
      if (j != k) s[i++] = dot(z.row(j), z.row(k)) / cfg.tau;
    double log_neg = logsumexp(s);
    out[k] = std::exp(log_neg - logaddexp(s_pos, log_neg));
  }
  return out;
}

}  // namespace semrel
