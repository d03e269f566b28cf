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

// Central finite-difference checks of every analytic gradient in the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "semrel/contrast.hpp"
#include "semrel/embedding.hpp"
#include "semrel/numerics.hpp"
#include "semrel/relation.hpp"
#include "semrel/rng.hpp"
#include "semrel/semantic.hpp"

namespace semrel {

inline constexpr double kFdStep = 1e-6;

/// Gradient of `f` at `x` by central differences. `x` is perturbed in place
/// and restored.
template <class F>
Vector central_difference(F&& f, std::span<double> x, double step = kFdStep) {
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = f();
    x[i] = orig - step;
    const double down = f();
    x[i] = orig;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

/// max_i |a_i - n_i| / max(|a|_inf, |n|_inf, 1e-8): error relative to the
/// gradient's own scale, so near-zero entries do not dominate.
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  require_shape(analytic.size() == numeric.size(), "relative_error: length mismatch");
  double diff = 0.0, scale = 1e-8;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return diff / scale;
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double sigma = 1.0) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = sigma * rng.normal();
  return m;
}

inline Matrix random_unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
  for (;;) {
    Matrix m = random_matrix(rng, rows, cols);
    bool ok = true;
    for (std::size_t r = 0; r < rows; ++r) ok = ok && norm2(m.row(r)) > 1e-6;
    if (ok) return l2_normalize_rows(m);
  }
}

enum class LossFamily { kSrc, kInfoNce, kDce, kHdce, kHead, kComposite };

inline const char* family_name(LossFamily f) {
  switch (f) {
    case LossFamily::kSrc: return "src";
    case LossFamily::kInfoNce: return "infonce";
    case LossFamily::kDce: return "dce";
    case LossFamily::kHdce: return "hdce";
    case LossFamily::kHead: return "head";
    case LossFamily::kComposite: return "composite";
  }
  return "?";
}

inline constexpr LossFamily kAllFamilies[] = {LossFamily::kSrc,  LossFamily::kInfoNce, LossFamily::kDce,
                                              LossFamily::kHdce, LossFamily::kHead,    LossFamily::kComposite};

struct GradcheckOptions {
  std::size_t trials = 100;
  std::size_t max_k = 8;
  std::size_t max_dim = 8;
  double step = kFdStep;
  double hdce_gamma = 1.0;
  /// Test fixture: flip the sign of this family's analytic gradient.
  std::vector<LossFamily> corrupt{};
};

struct GradcheckEntry {
  LossFamily family;
  std::size_t trials = 0;
  double max_rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;

  double worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_error);
    return w;
  }
  bool passed(double threshold) const { return worst() < threshold; }

  void print(std::ostream& os) const {
    for (const auto& e : entries)
      os << family_name(e.family) << " trials=" << e.trials << " max_rel_error=" << e.max_rel_error << "\n";
  }
};

namespace detail {

inline std::size_t uniform_count(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + rng.below(static_cast<std::uint32_t>(hi - lo + 1));
}

/// Relative error of a loss over (z, w) against finite differences in both.
template <class LossFn>
double check_pair_loss(LossFn&& fn, Matrix z, Matrix w, bool corrupt, double step) {
  auto [gz, gw] = fn(z, w);
  if (corrupt) {
    gz *= -1.0;
    gw *= -1.0;
  }
  auto value = [&] { return fn.value(z, w); };
  Vector nz = central_difference(value, z.data(), step);
  Vector nw = central_difference(value, w.data(), step);
  std::vector<double> a(gz.data()), n(nz);
  a.insert(a.end(), gw.data().begin(), gw.data().end());
  n.insert(n.end(), nw.begin(), nw.end());
  return relative_error(a, n);
}

template <class V, class G>
struct PairLoss {
  V value_fn;
  G grad_fn;
  std::pair<Matrix, Matrix> operator()(const Matrix& z, const Matrix& w) const { return grad_fn(z, w); }
  double value(const Matrix& z, const Matrix& w) const { return value_fn(z, w); }
};

template <class V, class G>
PairLoss<V, G> pair_loss(V v, G g) {
  return {std::move(v), std::move(g)};
}

/// Random head whose hidden pre-activations on `inputs` stay away from the
/// rectifier kink by at least 1e-4.
inline ProjectionHead smooth_random_head(Rng& rng, std::size_t in_dim, std::size_t embed_dim,
                                         const std::vector<const Matrix*>& inputs) {
  for (;;) {
    ProjectionHead head = ProjectionHead::random(rng, in_dim, embed_dim);
    for (double& b : head.params.b1) b = 0.1 * rng.normal();
    for (double& b : head.params.b2) b = 0.1 * rng.normal();
    bool ok = true;
    for (const Matrix* x : inputs) {
      ForwardCache c = head_forward_cached(head, *x);
      for (double v : c.pre1.data()) ok = ok && std::abs(v) >= 1e-4;
      for (double n : c.norms) ok = ok && n > 1e-3;
    }
    if (ok) return head;
  }
}

inline std::vector<std::span<double>> param_spans(HeadParams& p) {
  auto t = p.tensors();
  return {t.begin(), t.end()};
}

/// Flattened head-parameter gradient checked against finite differences of
/// `value` (which reads `head` by reference).
template <class ValueFn>
double check_head_params(ProjectionHead& head, const HeadParams& analytic, ValueFn&& value, bool corrupt, double step) {
  std::vector<double> a, n;
  auto an = analytic.tensors();
  auto spans = param_spans(head.params);
  for (std::size_t t = 0; t < spans.size(); ++t) {
    for (double v : an[t]) a.push_back(corrupt ? -v : v);
    Vector g = central_difference(value, spans[t], step);
    n.insert(n.end(), g.begin(), g.end());
  }
  return relative_error(a, n);
}

}  // namespace detail

/// Max relative error of one loss family over `opts.trials` random instances.
inline GradcheckEntry gradcheck_family(LossFamily fam, Rng& rng, const GradcheckOptions& opts) {
  GradcheckEntry entry{fam, opts.trials, 0.0};
  const bool corrupt = std::find(opts.corrupt.begin(), opts.corrupt.end(), fam) != opts.corrupt.end();
  for (std::size_t t = 0; t < opts.trials; ++t) {
    const std::size_t k = detail::uniform_count(rng, 3, std::max<std::size_t>(3, opts.max_k));
    const std::size_t d = detail::uniform_count(rng, 2, std::max<std::size_t>(2, opts.max_dim));
    const double tau = rng.uniform(0.1, 1.0);
    double err = 0.0;
    switch (fam) {
      case LossFamily::kSrc: {
        RelationConfig rc{rng.uniform() < 0.5, rng.uniform(0.2, 1.5), DetachSide::kNone};
        auto fn = detail::pair_loss([rc](const Matrix& z, const Matrix& w) { return src_loss(z, w, rc).loss; },
                                    [rc](const Matrix& z, const Matrix& w) {
                                      auto r = src_loss(z, w, rc);
                                      return std::pair{r.grad_z, r.grad_w};
                                    });
        err = detail::check_pair_loss(fn, random_unit_rows(rng, k, d), random_unit_rows(rng, k, d), corrupt, opts.step);
        break;
      }
      case LossFamily::kInfoNce:
      case LossFamily::kDce:
      case LossFamily::kHdce: {
        ContrastConfig cc{tau, fam == LossFamily::kHdce ? opts.hdce_gamma : 0.0, false};
        auto run = [fam, cc](const Matrix& z, const Matrix& w) {
          if (fam == LossFamily::kInfoNce) return infonce(z, w, cc);
          if (fam == LossFamily::kDce) return dce(z, w, cc);
          return hdce(z, w, cc);
        };
        auto fn = detail::pair_loss([run](const Matrix& z, const Matrix& w) { return run(z, w).loss; },
                                    [run](const Matrix& z, const Matrix& w) {
                                      auto r = run(z, w);
                                      return std::pair{r.grad_z, r.grad_w};
                                    });
        err = detail::check_pair_loss(fn, random_unit_rows(rng, k, d), random_unit_rows(rng, k, d), corrupt, opts.step);
        break;
      }
      case LossFamily::kHead: {
        const std::size_t c = detail::uniform_count(rng, 2, std::max<std::size_t>(2, opts.max_dim));
        Matrix x = random_matrix(rng, k, c);
        ProjectionHead head = detail::smooth_random_head(rng, c, d, {&x});
        Matrix proj = random_matrix(rng, k, d);
        // Scalarize as <proj, head(x)> so the VJP with grad_out = proj is its gradient.
        auto value = [&] { return dot(head_forward_cached(head, x).output.data(), proj.data()); };
        HeadBackward hb = head_backward(head, head_forward_cached(head, x), proj);
        err = detail::check_head_params(head, hb.grad_params, value, corrupt, opts.step);
        if (!corrupt) {
          Vector nx = central_difference(value, x.data(), opts.step);
          err = std::max(err, relative_error(hb.grad_input.data(), nx));
        }
        break;
      }
      case LossFamily::kComposite: {
        const std::size_t c = detail::uniform_count(rng, 2, std::max<std::size_t>(2, opts.max_dim));
        Matrix x_in = random_matrix(rng, k, c);
        Matrix x_out = random_matrix(rng, k, c);
        ProjectionHead head = detail::smooth_random_head(rng, c, d, {&x_in, &x_out});
        SemanticLossConfig cfg;
        cfg.contrast.tau = tau;
        cfg.schedule = CurriculumSchedule::constant(opts.hdce_gamma);
        cfg.relation.include_self = rng.uniform() < 0.5;
        cfg.diagnostics = false;
        auto value = [&] {
          return semantic_loss(head_forward_cached(head, x_in).output, head_forward_cached(head, x_out).output, cfg, 0)
              .loss;
        };
        ForwardCache ci = head_forward_cached(head, x_in);
        ForwardCache co = head_forward_cached(head, x_out);
        SemanticResult sr = semantic_loss(ci.output, co.output, cfg, 0);
        HeadParams g = head_backward(head, ci, sr.grad_z).grad_params;
        accumulate(g, head_backward(head, co, sr.grad_w).grad_params);
        err = detail::check_head_params(head, g, value, corrupt, opts.step);
        break;
      }
    }
    entry.max_rel_error = std::max(entry.max_rel_error, err);
  }
  return entry;
}

/// Runs every family with generators derived from `seed`.
inline GradcheckReport gradcheck_all(std::uint64_t seed, const GradcheckOptions& opts = {}) {
  GradcheckReport report;
  std::uint64_t stream = 0;
  for (LossFamily fam : kAllFamilies) {
    Rng rng = Rng::child(seed, stream++);
    report.entries.push_back(gradcheck_family(fam, rng, opts));
  }
  return report;
}

}  // namespace semrel
