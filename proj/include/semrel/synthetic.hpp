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

// Synthetic paired feature maps with known semantic structure. Each location
// belongs to one of G clusters; the input feature is the cluster prototype
// plus gaussian noise and the output feature is a fixed orthogonal map R
// applied to the input feature, so every output location is the translation
// of the corresponding input location and locations share semantics exactly
// when they share a cluster label.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "semrel/embedding.hpp"
#include "semrel/error.hpp"
#include "semrel/numerics.hpp"
#include "semrel/rng.hpp"

namespace semrel {

enum class Layout { kBlocks, kVoronoi };

struct SyntheticTaskSpec {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 32;
  std::size_t clusters = 8;
  double noise_sigma = 0.3;
  std::uint64_t rotation_seed = 7;
  Layout layout = Layout::kBlocks;

  void validate() const {
    require(height > 0 && width > 0, "task: height and width must be positive");
    require(channels >= 2, "task: channels must be >= 2");
    require(clusters >= 1 && clusters <= height * width, "task: clusters must be in [1, H*W]");
    require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "task: noise_sigma must be >= 0");
  }
};

struct SyntheticPair {
  FeatureMap input;
  FeatureMap output;
  std::vector<std::size_t> labels;  // H*W cluster ids, row-major
};

/// Haar-distributed orthogonal matrix: the Q factor of a gaussian matrix via
/// modified Gram-Schmidt with reorthogonalization. Gram-Schmidt yields
/// diag(R_qr) > 0, which is the sign convention that makes Q Haar.
inline Matrix random_orthogonal(Rng& rng, std::size_t n) {
  Matrix a(n, n);
  for (double& x : a.data()) x = rng.normal();
  Matrix q(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a(i, j);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t p = 0; p < j; ++p) {
        double proj = 0.0;
        for (std::size_t i = 0; i < n; ++i) proj += q(i, p) * v[i];
        for (std::size_t i = 0; i < n; ++i) v[i] -= proj * q(i, p);
      }
    }
    double nv = norm2(v);
    for (std::size_t i = 0; i < n; ++i) q(i, j) = v[i] / nv;
  }
  return q;
}

/// Cluster id per location.
inline std::vector<std::size_t> layout_labels(Rng& rng, const SyntheticTaskSpec& spec) {
  const std::size_t h = spec.height, w = spec.width, g = spec.clusters, n = h * w;
  std::vector<std::size_t> labels(n);
  if (spec.layout == Layout::kBlocks) {
    // gy x gx block grid with gy the largest divisor of G not above sqrt(G);
    // row-major strips when that grid does not fit.
    std::size_t gy = 1;
    for (std::size_t d = 1; d * d <= g; ++d)
      if (g % d == 0) gy = d;
    std::size_t gx = g / gy;
    if (gy > h || gx > w) std::swap(gy, gx);
    if (gy <= h && gx <= w) {
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) labels[r * w + c] = (r * gy / h) * gx + (c * gx / w);
    } else {
      for (std::size_t i = 0; i < n; ++i) labels[i] = i * g / n;
    }
    return labels;
  }
  // Voronoi: G distinct seed cells, each location joins its nearest seed
  // (squared grid distance, ties to the lower cluster id).
  PatchIndexSet seeds = sample_patch_indices(rng, h, w, g);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < g; ++s) {
      double dr = static_cast<double>(i / w) - static_cast<double>(seeds.indices[s] / w);
      double dc = static_cast<double>(i % w) - static_cast<double>(seeds.indices[s] % w);
      double d = dr * dr + dc * dc;
      if (d < best) {
        best = d;
        labels[i] = s;
      }
    }
  }
  return labels;
}

/// The task's fixed orthogonal map, determined by spec.rotation_seed alone.
inline Matrix task_rotation(const SyntheticTaskSpec& spec) {
  Rng rot(spec.rotation_seed, 0x5eed);
  return random_orthogonal(rot, spec.channels);
}

inline SyntheticPair generate_pair(Rng& rng, const SyntheticTaskSpec& spec, const Matrix& rotation) {
  spec.validate();
  require_shape(rotation.rows() == spec.channels && rotation.cols() == spec.channels,
                "generate_pair: rotation must be C x C");
  const std::size_t c = spec.channels;
  Matrix protos(spec.clusters, c);
  for (std::size_t g = 0; g < spec.clusters; ++g) {
    auto row = protos.row(g);
    double n;
    do {
      for (double& x : row) x = rng.normal();
      n = norm2(row);
    } while (n < 1e-12);
    for (double& x : row) x /= n;
  }

  SyntheticPair pair;
  pair.labels = layout_labels(rng, spec);
  pair.input = FeatureMap(spec.height, spec.width, c);
  pair.output = FeatureMap(spec.height, spec.width, c);
  for (std::size_t i = 0; i < pair.labels.size(); ++i) {
    auto in = pair.input.at(i);
    auto proto = protos.row(pair.labels[i]);
    for (std::size_t ch = 0; ch < c; ++ch) in[ch] = proto[ch] + spec.noise_sigma * rng.normal();
    // output = R * input (column-vector convention)
    auto out = pair.output.at(i);
    for (std::size_t r = 0; r < c; ++r) out[r] = dot(rotation.row(r), in);
  }
  return pair;
}

inline SyntheticPair generate_pair(Rng& rng, const SyntheticTaskSpec& spec) {
  spec.validate();
  return generate_pair(rng, spec, task_rotation(spec));
}

}  // namespace semrel
