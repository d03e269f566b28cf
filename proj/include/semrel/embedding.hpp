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

// Patch sampling and the two-layer projection head that maps raw per-location
// features to embedding vectors.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "semrel/error.hpp"
#include "semrel/numerics.hpp"
#include "semrel/rng.hpp"

namespace semrel {

/// H x W x C feature grid, values stored [h][w][c].
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels), values_(height * width * channels, fill) {}
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> values)
      : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
    require_shape(values_.size() == height_ * width_ * channels_, "FeatureMap: value count does not match H*W*C");
    for (std::size_t i = 0; i < values_.size(); ++i)
      require(std::isfinite(values_[i]), "FeatureMap: non-finite value at flat index " + std::to_string(i));
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t locations() const noexcept { return height_ * width_; }

  std::span<double> at(std::size_t flat) noexcept { return {values_.data() + flat * channels_, channels_}; }
  std::span<const double> at(std::size_t flat) const noexcept { return {values_.data() + flat * channels_, channels_}; }
  std::span<const double> at(std::size_t h, std::size_t w) const noexcept { return at(h * width_ + w); }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> values_;
};

/// K distinct flat spatial indices. The same set indexes both the input and
/// the output map, which is what makes (z_k, w_k) a positive pair.
struct PatchIndexSet {
  std::vector<std::size_t> indices;
  std::size_t size() const noexcept { return indices.size(); }
};

/// Uniform sample of K locations without replacement (partial Fisher-Yates).
inline PatchIndexSet sample_patch_indices(Rng& rng, std::size_t height, std::size_t width, std::size_t k) {
  const std::size_t n = height * width;
  if (k > n)
    throw PreconditionError("sample_patch_indices: K=" + std::to_string(k) + " exceeds H*W=" + std::to_string(n));
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + rng.below(static_cast<std::uint32_t>(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return PatchIndexSet{std::move(pool)};
}

/// Every location in row-major order.
inline PatchIndexSet all_patch_indices(const FeatureMap& fm) {
  std::vector<std::size_t> idx(fm.locations());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return PatchIndexSet{std::move(idx)};
}

/// Row r of the result is the C-vector at location idx[r].
inline Matrix gather_patches(const FeatureMap& fm, const PatchIndexSet& idx) {
  Matrix out(idx.size(), fm.channels());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::size_t flat = idx.indices[r];
    if (flat >= fm.locations())
      throw PreconditionError("gather_patches: index " + std::to_string(flat) + " out of range for " +
                              std::to_string(fm.locations()) + " locations");
    auto src = fm.at(flat);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

enum class Side { kInput, kOutput };

/// K embedding rows; unit-norm when produced by a normalizing head.
struct EmbeddingSet {
  Matrix vectors;
  Side side = Side::kInput;

  std::size_t size() const noexcept { return vectors.rows(); }
  std::size_t dim() const noexcept { return vectors.cols(); }

  bool rows_unit_norm(double tol = 1e-9) const {
    for (std::size_t r = 0; r < vectors.rows(); ++r)
      if (std::abs(norm2(vectors.row(r)) - 1.0) > tol) return false;
    return true;
  }
};

/// Parameters of x -> relu(x W1 + b1) W2 + b2. Gradients share this layout.
struct HeadParams {
  Matrix w1;  // C x D
  Vector b1;  // D
  Matrix w2;  // D x D
  Vector b2;  // D

  static HeadParams zeros(std::size_t in_dim, std::size_t embed_dim) {
    return {Matrix(in_dim, embed_dim), Vector(embed_dim, 0.0), Matrix(embed_dim, embed_dim), Vector(embed_dim, 0.0)};
  }

  std::size_t in_dim() const noexcept { return w1.rows(); }
  std::size_t embed_dim() const noexcept { return w2.cols(); }

  std::array<std::span<double>, 4> tensors() noexcept { return {w1.data(), b1, w2.data(), b2}; }
  std::array<std::span<const double>, 4> tensors() const noexcept { return {w1.data(), b1, w2.data(), b2}; }

  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

struct ProjectionHead {
  HeadParams params;
  bool normalize = true;

  /// He-style gaussian initialization for W1, W2; zero biases.
  static ProjectionHead random(Rng& rng, std::size_t in_dim, std::size_t embed_dim, bool normalize = true) {
    ProjectionHead h{HeadParams::zeros(in_dim, embed_dim), normalize};
    double s1 = std::sqrt(2.0 / static_cast<double>(in_dim));
    double s2 = std::sqrt(2.0 / static_cast<double>(embed_dim));
    for (double& x : h.params.w1.data()) x = s1 * rng.normal();
    for (double& x : h.params.w2.data()) x = s2 * rng.normal();
    return h;
  }
};

struct ForwardCache {
  Matrix input;   // K x C
  Matrix pre1;    // x W1 + b1
  Matrix act1;    // relu(pre1)
  Matrix pre2;    // act1 W2 + b2
  Vector norms;   // row norms of pre2 (empty when not normalizing)
  Matrix output;  // normalized pre2, or pre2
  bool normalize = true;
};

inline Matrix add_row_bias(Matrix m, std::span<const double> bias) {
  require_shape(bias.size() == m.cols(), "add_row_bias: bias length mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
  }
  return m;
}

inline ForwardCache head_forward_cached(const ProjectionHead& head, const Matrix& patches) {
  const auto& p = head.params;
  require_shape(patches.cols() == p.w1.rows(), "head_forward: patch width " + std::to_string(patches.cols()) +
                                                   " != head input dim " + std::to_string(p.w1.rows()));
  require_shape(p.w1.cols() == p.b1.size() && p.w2.rows() == p.w1.cols() && p.w2.cols() == p.b2.size(),
                "head_forward: inconsistent head parameter shapes");
  ForwardCache c;
  c.normalize = head.normalize;
  c.input = patches;
  c.pre1 = add_row_bias(matmul(patches, p.w1), p.b1);
  c.act1 = c.pre1;
  for (double& x : c.act1.data()) x = x > 0.0 ? x : 0.0;
  c.pre2 = add_row_bias(matmul(c.act1, p.w2), p.b2);
  if (head.normalize)
    c.output = l2_normalize_rows(c.pre2, &c.norms);
  else
    c.output = c.pre2;
  return c;
}

inline EmbeddingSet head_forward(const ProjectionHead& head, const Matrix& patches, Side side = Side::kInput) {
  return {head_forward_cached(head, patches).output, side};
}

struct HeadBackward {
  HeadParams grad_params;
  Matrix grad_input;  // K x C
};

/// Exact VJP of the head. The rectifier's derivative at 0 is taken as 0.
inline HeadBackward head_backward(const ProjectionHead& head, const ForwardCache& cache, const Matrix& grad_out) {
  require_shape(grad_out.same_shape(cache.output),
                "head_backward: grad_out " + shape_str(grad_out) + " vs output " + shape_str(cache.output));
  const auto& p = head.params;
  Matrix g2 = cache.normalize ? l2_normalize_rows_vjp(cache.output, cache.norms, grad_out) : grad_out;

  HeadBackward out;
  out.grad_params.w2 = matmul_tn(cache.act1, g2);
  out.grad_params.b2.assign(g2.cols(), 0.0);
  for (std::size_t r = 0; r < g2.rows(); ++r)
    for (std::size_t c = 0; c < g2.cols(); ++c) out.grad_params.b2[c] += g2(r, c);

  Matrix g1 = matmul_nt(g2, p.w2);
  for (std::size_t i = 0; i < g1.size(); ++i)
    if (!(cache.pre1.data()[i] > 0.0)) g1.data()[i] = 0.0;

  out.grad_params.w1 = matmul_tn(cache.input, g1);
  out.grad_params.b1.assign(g1.cols(), 0.0);
  for (std::size_t r = 0; r < g1.rows(); ++r)
    for (std::size_t c = 0; c < g1.cols(); ++c) out.grad_params.b1[c] += g1(r, c);

  out.grad_input = matmul_nt(g1, p.w1);
  return out;
}

inline void accumulate(HeadParams& acc, const HeadParams& g) {
  auto dst = acc.tensors();
  auto src = g.tensors();
  for (std::size_t t = 0; t < dst.size(); ++t) {
    require_shape(dst[t].size() == src[t].size(), "accumulate: parameter shape mismatch");
    for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += src[t][i];
  }
}

}  // namespace semrel
