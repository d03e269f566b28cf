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

// Composite objective lambda_src * L_SRC + lambda_hdce * L_hDCE(gamma(t), tau)
// with a curriculum on the hardness gamma.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>

#include "semrel/contrast.hpp"
#include "semrel/error.hpp"
#include "semrel/numerics.hpp"
#include "semrel/relation.hpp"

namespace semrel {

enum class ScheduleShape { kLinear, kCosine };

struct CurriculumSchedule {
  double gamma_min = 0.0;
  double gamma_max = 2.0;
  std::size_t warmup_steps = 1000;
  ScheduleShape shape = ScheduleShape::kLinear;

  static CurriculumSchedule constant(double gamma) { return {gamma, gamma, 0, ScheduleShape::kLinear}; }

  void validate() const {
    require(gamma_min >= 0.0, "schedule: gamma_min must be >= 0");
    require(gamma_max >= gamma_min, "schedule: gamma_max must be >= gamma_min");
  }
};

/// Hardness at step t. Saturates at gamma_max once t >= warmup_steps.
inline double gamma_at(const CurriculumSchedule& s, std::size_t t) {
  double frac = s.warmup_steps == 0
                    ? 1.0
                    : std::min(1.0, static_cast<double>(t) / static_cast<double>(s.warmup_steps));
  double span = s.gamma_max - s.gamma_min;
  if (frac >= 1.0) return s.gamma_max;
  if (s.shape == ScheduleShape::kCosine) return s.gamma_min + span * 0.5 * (1.0 - std::cos(std::numbers::pi * frac));
  return s.gamma_min + span * frac;
}

struct SemanticLossConfig {
  double lambda_src = 1.0;
  double lambda_hdce = 1.0;
  ContrastKind kind = ContrastKind::kDecoupled;
  ContrastConfig contrast{};  // contrast.gamma is overwritten by the schedule
  RelationConfig relation{};
  CurriculumSchedule schedule{};
  /// Side InfoNCE evaluation for npc statistics; never contributes gradients.
  bool diagnostics = true;

  void validate() const {
    require(lambda_src >= 0.0 && lambda_hdce >= 0.0, "semantic loss: lambdas must be >= 0");
    require(lambda_src > 0.0 || lambda_hdce > 0.0, "semantic loss: at least one lambda must be > 0");
    require(contrast.tau > 0.0, "semantic loss: tau must be > 0");
    require(relation.tau_rel > 0.0, "semantic loss: tau_rel must be > 0");
    schedule.validate();
  }
};

struct SemanticDiagnostics {
  double l_src = 0.0;
  double l_contrast = 0.0;  // the configured contrastive term (hDCE or hard InfoNCE)
  double gamma = 0.0;
  double l_infonce = 0.0;   // plain InfoNCE, reporting only
  double npc_mean = 0.0;
  double npc_min = 0.0;
};

struct SemanticResult {
  double loss = 0.0;
  Matrix grad_z;
  Matrix grad_w;
  SemanticDiagnostics diag;
};

inline SemanticResult semantic_loss(const Matrix& z, const Matrix& w, const SemanticLossConfig& cfg, std::size_t step) {
  cfg.validate();
  ContrastConfig cc = cfg.contrast;
  cc.gamma = gamma_at(cfg.schedule, step);

  SrcResult src = src_loss(z, w, cfg.relation);
  ContrastResult con = contrastive_loss(z, w, cc, cfg.kind);

  SemanticResult r;
  r.loss = cfg.lambda_src * src.loss + cfg.lambda_hdce * con.loss;
  r.grad_z = con.grad_z;
  r.grad_z *= cfg.lambda_hdce;
  axpy(cfg.lambda_src, src.grad_z, r.grad_z);
  r.grad_w = con.grad_w;
  r.grad_w *= cfg.lambda_hdce;
  axpy(cfg.lambda_src, src.grad_w, r.grad_w);

  r.diag.l_src = src.loss;
  r.diag.l_contrast = con.loss;
  r.diag.gamma = cc.gamma;
  if (cfg.diagnostics) {
    const bool reuse = cfg.kind == ContrastKind::kInfoNce && cc.gamma == 0.0;
    ContrastResult side = reuse ? con : infonce(z, w, cc);
    r.diag.l_infonce = side.loss;
    double sum = 0.0, mn = 1.0;
    for (double v : side.npc) {
      sum += v;
      mn = std::min(mn, v);
    }
    r.diag.npc_mean = sum / static_cast<double>(side.npc.size());
    r.diag.npc_min = mn;
  }
  return r;
}

}  // namespace semrel
