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

// Training loop for the projection model on synthetic translation pairs, and
// the retrieval / relation metrics reported at the end of a run.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "semrel/embedding.hpp"
#include "semrel/numerics.hpp"
#include "semrel/relation.hpp"
#include "semrel/rng.hpp"
#include "semrel/semantic.hpp"
#include "semrel/synthetic.hpp"

namespace semrel {

struct ModelConfig {
  std::size_t embed_dim = 64;
  bool normalize = true;
  /// One head embeds both sides; otherwise the output side gets its own.
  bool shared_head = true;
  /// Learnable C x C linear map applied to output-side features before the
  /// head, initialized to the identity.
  bool translator = false;
};

struct OptimizerConfig {
  std::size_t steps = 150;
  double lr = 0.02;
  double momentum = 0.9;
  std::size_t patches = 256;  // K, clamped to H*W
  /// Number of training pairs generated up front and cycled through; 0 draws
  /// a fresh pair every step.
  std::size_t pair_pool = 4;
};

struct TrainConfig {
  SyntheticTaskSpec task{};
  ModelConfig model{};
  SemanticLossConfig loss{};
  OptimizerConfig optim{};
  std::uint64_t seed = 0;
};

/// Everything that gets trained.
struct TranslationModel {
  ProjectionHead input_head;
  std::optional<ProjectionHead> output_head;
  std::optional<Matrix> translator;

  const ProjectionHead& out_head() const { return output_head ? *output_head : input_head; }

  static TranslationModel init(Rng& rng, std::size_t channels, const ModelConfig& cfg) {
    TranslationModel m{ProjectionHead::random(rng, channels, cfg.embed_dim, cfg.normalize), std::nullopt,
                       std::nullopt};
    if (!cfg.shared_head) m.output_head = ProjectionHead::random(rng, channels, cfg.embed_dim, cfg.normalize);
    if (cfg.translator) m.translator = Matrix::identity(channels);
    return m;
  }

  Matrix translate(const Matrix& out_patches) const {
    return translator ? matmul(out_patches, *translator) : out_patches;
  }

  Matrix embed_input(const Matrix& patches) const { return head_forward(input_head, patches).vectors; }
  Matrix embed_output(const Matrix& patches) const { return head_forward(out_head(), translate(patches)).vectors; }

  /// Flat views of all trainable tensors in a fixed order.
  std::vector<std::span<double>> tensors() {
    std::vector<std::span<double>> out;
    for (auto t : input_head.params.tensors()) out.push_back(t);
    if (output_head)
      for (auto t : output_head->params.tensors()) out.push_back(t);
    if (translator) out.push_back(translator->data());
    return out;
  }

  friend bool operator==(const TranslationModel& a, const TranslationModel& b) {
    return a.input_head.params == b.input_head.params && a.input_head.normalize == b.input_head.normalize &&
           a.output_head.has_value() == b.output_head.has_value() &&
           (!a.output_head || a.output_head->params == b.output_head->params) && a.translator == b.translator;
  }
};

/// Gradients for a TranslationModel, same tensor order as tensors().
struct ModelGrads {
  HeadParams input_head;
  std::optional<HeadParams> output_head;
  std::optional<Matrix> translator;

  std::vector<std::span<const double>> tensors() const {
    std::vector<std::span<const double>> out;
    for (auto t : input_head.tensors()) out.push_back(t);
    if (output_head)
      for (auto t : output_head->tensors()) out.push_back(t);
    if (translator) out.push_back(translator->data());
    return out;
  }
};

struct ModelForward {
  ForwardCache input;
  ForwardCache output;
  Matrix output_patches;  // before the translator
};

inline ModelForward model_forward(const TranslationModel& m, const Matrix& in_patches, const Matrix& out_patches) {
  return {head_forward_cached(m.input_head, in_patches), head_forward_cached(m.out_head(), m.translate(out_patches)),
          out_patches};
}

inline ModelGrads model_backward(const TranslationModel& m, const ModelForward& f, const Matrix& grad_z,
                                 const Matrix& grad_w) {
  ModelGrads g;
  HeadBackward bi = head_backward(m.input_head, f.input, grad_z);
  HeadBackward bo = head_backward(m.out_head(), f.output, grad_w);
  g.input_head = std::move(bi.grad_params);
  if (m.output_head)
    g.output_head = std::move(bo.grad_params);
  else
    accumulate(g.input_head, bo.grad_params);
  if (m.translator) g.translator = matmul_tn(f.output_patches, bo.grad_input);
  return g;
}

/// Stochastic gradient descent with heavy-ball momentum: v = mu v + g, p -= lr v.
class MomentumSgd {
 public:
  MomentumSgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  void step(TranslationModel& m, const ModelGrads& g) {
    auto params = m.tensors();
    auto grads = g.tensors();
    require_shape(params.size() == grads.size(), "MomentumSgd: parameter/gradient count mismatch");
    if (velocity_.empty())
      for (auto p : params) velocity_.emplace_back(p.size(), 0.0);
    for (std::size_t t = 0; t < params.size(); ++t) {
      auto& v = velocity_[t];
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = momentum_ * v[i] + grads[t][i];
        params[t][i] -= lr_ * v[i];
      }
    }
  }

 private:
  double lr_;
  double momentum_;
  std::vector<Vector> velocity_;
};

struct StepRecord {
  std::size_t step = 0;
  double l_semantic = 0.0;
  double l_src = 0.0;
  double l_contrast = 0.0;
  double l_infonce = 0.0;
  double gamma = 0.0;
  double npc_mean = 0.0;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct FinalMetrics {
  double top1_retrieval = 0.0;       // fraction of k with argmax_j z_j . w_k == k
  double src_div = 0.0;              // L_SRC on the evaluation patches
  double cluster_consistency = 0.0;  // fraction of k whose nearest other patch in Q_k shares its cluster

  friend bool operator==(const FinalMetrics&, const FinalMetrics&) = default;
};

struct RunMetrics {
  std::vector<StepRecord> steps;
  FinalMetrics final{};

  friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

struct TrainResult {
  RunMetrics metrics;
  TranslationModel model;
};

inline std::size_t argmax_first(std::span<const double> v, std::size_t skip = static_cast<std::size_t>(-1)) {
  std::size_t best = skip == 0 ? 1 : 0;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (j != skip && v[j] > v[best]) best = j;
  return best;
}

/// Metrics of embeddings z (input side) and w (output side) of the same K
/// locations, whose ground-truth cluster ids are `labels`.
inline FinalMetrics evaluate_embeddings(const Matrix& z, const Matrix& w, std::span<const std::size_t> labels,
                                        const RelationConfig& relation) {
  require_shape(z.same_shape(w) && labels.size() == z.rows(), "evaluate_embeddings: shape mismatch");
  const std::size_t k_total = z.rows();
  Matrix zw = matmul_nt(w, z);  // zw(k, j) = w_k . z_j
  Matrix ww = matmul_nt(w, w);
  std::size_t hits = 0, consistent = 0;
  for (std::size_t k = 0; k < k_total; ++k) {
    if (argmax_first(zw.row(k)) == k) ++hits;
    // Q_k is monotone in w_k . w_j, so its argmax over j != k is this one.
    if (k_total > 1 && labels[argmax_first(ww.row(k), k)] == labels[k]) ++consistent;
  }
  FinalMetrics m;
  m.top1_retrieval = static_cast<double>(hits) / static_cast<double>(k_total);
  m.cluster_consistency = static_cast<double>(consistent) / static_cast<double>(k_total);
  RelationConfig rc = relation;
  rc.detach = DetachSide::kNone;
  std::size_t min_k = rc.include_self ? 2 : 3;
  m.src_div = k_total >= min_k ? src_loss(z, w, rc).loss : 0.0;
  return m;
}

struct RngStreams {
  static constexpr std::uint64_t kInit = 1, kData = 2, kSample = 3, kEval = 4;
};

inline FinalMetrics evaluate_model(const TranslationModel& model, const TrainConfig& cfg, const Matrix& rotation) {
  Rng eval = Rng::child(cfg.seed, RngStreams::kEval);
  SyntheticPair pair = generate_pair(eval, cfg.task, rotation);
  const std::size_t k = std::min(cfg.optim.patches, pair.input.locations());
  PatchIndexSet idx = sample_patch_indices(eval, cfg.task.height, cfg.task.width, k);
  Matrix z = model.embed_input(gather_patches(pair.input, idx));
  Matrix w = model.embed_output(gather_patches(pair.output, idx));
  std::vector<std::size_t> labels(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) labels[r] = pair.labels[idx.indices[r]];
  return evaluate_embeddings(z, w, labels, cfg.loss.relation);
}

/// Trains from scratch. Deterministic in cfg (including cfg.seed).
inline TrainResult train(const TrainConfig& cfg) {
  cfg.task.validate();
  cfg.loss.validate();
  require(cfg.optim.steps >= 1, "train: steps must be >= 1");
  require(cfg.optim.lr >= 0.0, "train: lr must be >= 0");
  require(cfg.optim.patches >= 2, "train: need at least 2 patches");

  Rng init = Rng::child(cfg.seed, RngStreams::kInit);
  Rng data = Rng::child(cfg.seed, RngStreams::kData);
  Rng sampler = Rng::child(cfg.seed, RngStreams::kSample);
  const Matrix rotation = task_rotation(cfg.task);

  TrainResult res{{}, TranslationModel::init(init, cfg.task.channels, cfg.model)};
  MomentumSgd opt(cfg.optim.lr, cfg.optim.momentum);
  std::vector<SyntheticPair> pool;
  for (std::size_t i = 0; i < cfg.optim.pair_pool; ++i) pool.push_back(generate_pair(data, cfg.task, rotation));
  const std::size_t k = std::min(cfg.optim.patches, cfg.task.height * cfg.task.width);

  res.metrics.steps.reserve(cfg.optim.steps);
  for (std::size_t t = 0; t < cfg.optim.steps; ++t) {
    SyntheticPair fresh;
    if (pool.empty()) fresh = generate_pair(data, cfg.task, rotation);
    const SyntheticPair& pair = pool.empty() ? fresh : pool[t % pool.size()];

    // One index set for both maps: rows of z and w are positive pairs.
    const PatchIndexSet idx = sample_patch_indices(sampler, cfg.task.height, cfg.task.width, k);
    ModelForward fwd = model_forward(res.model, gather_patches(pair.input, idx), gather_patches(pair.output, idx));
    SemanticResult sr = semantic_loss(fwd.input.output, fwd.output.output, cfg.loss, t);
    opt.step(res.model, model_backward(res.model, fwd, sr.grad_z, sr.grad_w));

    res.metrics.steps.push_back(
        {t, sr.loss, sr.diag.l_src, sr.diag.l_contrast, sr.diag.l_infonce, sr.diag.gamma, sr.diag.npc_mean});
  }
  res.metrics.final = evaluate_model(res.model, cfg, rotation);
  return res;
}

}  // namespace semrel
