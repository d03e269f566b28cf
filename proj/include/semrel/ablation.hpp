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

// Seven-configuration ablation over {InfoNCE, DCE} x {SRC} x {hard negatives},
// run over paired seeds, plus the summary statistics used to compare rows.

#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "semrel/io.hpp"
#include "semrel/train.hpp"

namespace semrel {

struct AblationSetting {
  const char* name;
  ContrastKind kind;
  bool src;
  bool hard_negatives;
};

inline constexpr std::array<AblationSetting, 7> kAblationGrid{{
    {"InfoNCE", ContrastKind::kInfoNce, false, false},
    {"InfoNCE+SRC", ContrastKind::kInfoNce, true, false},
    {"InfoNCE+SRC+HNeg", ContrastKind::kInfoNce, true, true},
    {"DCE", ContrastKind::kDecoupled, false, false},
    {"DCE+HNeg", ContrastKind::kDecoupled, false, true},
    {"DCE+SRC", ContrastKind::kDecoupled, true, false},
    {"DCE+SRC+HNeg", ContrastKind::kDecoupled, true, true},
}};

/// `base` specialized to one grid row: SRC off sets lambda_src to 0 and hard
/// negatives off pins gamma to 0; everything else is inherited.
inline TrainConfig ablation_variant(const TrainConfig& base, const AblationSetting& s) {
  TrainConfig cfg = base;
  cfg.loss.kind = s.kind;
  if (!s.src) cfg.loss.lambda_src = 0.0;
  if (!s.hard_negatives) cfg.loss.schedule = CurriculumSchedule::constant(0.0);
  return cfg;
}

/// Seed of the i-th run. Shared by every grid row, so rows are paired.
inline std::uint64_t ablation_seed(const TrainConfig& base, std::size_t i) { return base.seed + i; }

struct AblationRow {
  AblationSetting setting;
  std::vector<FinalMetrics> per_seed;
};

struct AblationTable {
  std::vector<AblationRow> rows;

  const AblationRow& row(std::string_view name) const {
    for (const auto& r : rows)
      if (name == r.setting.name) return r;
    throw PreconditionError("ablation table has no row '" + std::string(name) + "'");
  }
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

template <class Proj>
std::vector<double> column(const AblationRow& row, Proj proj) {
  std::vector<double> v;
  for (const auto& m : row.per_seed) v.push_back(proj(m));
  return v;
}

struct SignTest {
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  double p_value = 1.0;  // P(X >= wins), X ~ Binomial(wins + losses, 1/2)
};

/// One-sided paired sign test of H1: a tends to exceed b. Ties are dropped.
inline SignTest sign_test_greater(const std::vector<double>& a, const std::vector<double>& b) {
  require_shape(a.size() == b.size(), "sign_test_greater: unpaired samples");
  SignTest t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i])
      ++t.wins;
    else if (a[i] < b[i])
      ++t.losses;
    else
      ++t.ties;
  }
  const std::size_t n = t.wins + t.losses;
  // Upper binomial tail in log space.
  double tail = 0.0;
  for (std::size_t k = t.wins; k <= n; ++k) {
    double log_c = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
                   std::lgamma(static_cast<double>(n - k) + 1);
    tail += std::exp(log_c - static_cast<double>(n) * std::log(2.0));
  }
  t.p_value = std::min(1.0, tail);
  return t;
}

/// Trains every (grid row, seed) pair. Runs are independent and may use up to
/// `workers` threads; results are stored by (row, seed) index.
inline AblationTable run_ablation(const TrainConfig& base, std::size_t seeds, std::size_t workers = 1) {
  require(seeds >= 2, "run_ablation: need at least 2 seeds");
  AblationTable table;
  for (const auto& s : kAblationGrid) table.rows.push_back({s, std::vector<FinalMetrics>(seeds)});
  // Validate every variant up front so errors surface before any training.
  for (const auto& s : kAblationGrid) ablation_variant(base, s).loss.validate();

  const std::size_t jobs = kAblationGrid.size() * seeds;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t job; (job = next.fetch_add(1)) < jobs;) {
      const std::size_t row = job / seeds, i = job % seeds;
      try {
        TrainConfig cfg = ablation_variant(base, kAblationGrid[row]);
        cfg.seed = ablation_seed(base, i);
        table.rows[row].per_seed[i] = train(cfg).metrics.final;
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, jobs));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return table;
}

/// One line per grid row: mean and sample standard deviation of each metric.
inline void write_ablation_csv(std::ostream& os, const AblationTable& t) {
  os << "config,seeds,top1_retrieval_mean,top1_retrieval_std,src_div_mean,src_div_std,"
        "cluster_consistency_mean,cluster_consistency_std\r\n";
  for (const auto& row : t.rows) {
    auto top1 = mean_std(column(row, [](const FinalMetrics& m) { return m.top1_retrieval; }));
    auto src = mean_std(column(row, [](const FinalMetrics& m) { return m.src_div; }));
    auto cc = mean_std(column(row, [](const FinalMetrics& m) { return m.cluster_consistency; }));
    os << csv_field(row.setting.name) << ',' << row.per_seed.size() << ',' << format_double(top1.mean) << ','
       << format_double(top1.stddev) << ',' << format_double(src.mean) << ',' << format_double(src.stddev) << ','
       << format_double(cc.mean) << ',' << format_double(cc.stddev) << "\r\n";
  }
}

/// Every individual run: config, seed, metrics.
inline void write_ablation_runs_csv(std::ostream& os, const AblationTable& t, const TrainConfig& base) {
  os << "config,seed,top1_retrieval,src_div,cluster_consistency\r\n";
  for (const auto& row : t.rows)
    for (std::size_t i = 0; i < row.per_seed.size(); ++i) {
      const auto& m = row.per_seed[i];
      os << csv_field(row.setting.name) << ',' << ablation_seed(base, i) << ',' << format_double(m.top1_retrieval)
         << ',' << format_double(m.src_div) << ',' << format_double(m.cluster_consistency) << "\r\n";
    }
}

inline void write_step_csv(std::ostream& os, const RunMetrics& m) {
  os << "step,l_semantic,l_src,l_contrast,l_infonce,gamma,npc_mean\r\n";
  for (const auto& r : m.steps)
    os << r.step << ',' << format_double(r.l_semantic) << ',' << format_double(r.l_src) << ','
       << format_double(r.l_contrast) << ',' << format_double(r.l_infonce) << ',' << format_double(r.gamma) << ','
       << format_double(r.npc_mean) << "\r\n";
}

}  // namespace semrel
