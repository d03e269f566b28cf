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


#include <gtest/gtest.h>

#include <set>

#include "semrel/synthetic.hpp"

using namespace semrel;

namespace {

bool same_cell(const FeatureMap& fm, std::size_t a, std::size_t b) {
  auto x = fm.at(a), y = fm.at(b);
  return std::equal(x.begin(), x.end(), y.begin());
}

}  // namespace

TEST(Synthetic, SingleNoiselessClusterIsConstant) {
  SyntheticTaskSpec spec;
  spec.clusters = 1;
  spec.noise_sigma = 0;
  Rng rng(1);
  SyntheticPair p = generate_pair(rng, spec);
  for (std::size_t i = 1; i < p.labels.size(); ++i) {
    EXPECT_TRUE(same_cell(p.input, 0, i));
    EXPECT_TRUE(same_cell(p.output, 0, i));
  }
}

TEST(Synthetic, NoiselessCellsEqualIffLabelsEqual) {
  for (Layout layout : {Layout::kBlocks, Layout::kVoronoi}) {
    SyntheticTaskSpec spec;
    spec.height = 8;
    spec.width = 6;
    spec.clusters = 5;
    spec.noise_sigma = 0;
    spec.layout = layout;
    Rng rng(2);
    SyntheticPair p = generate_pair(rng, spec);
    EXPECT_EQ(std::set<std::size_t>(p.labels.begin(), p.labels.end()).size(), 5u);
    for (std::size_t a = 0; a < p.labels.size(); ++a)
      for (std::size_t b = 0; b < p.labels.size(); ++b) {
        EXPECT_EQ(same_cell(p.input, a, b), p.labels[a] == p.labels[b]);
        EXPECT_EQ(same_cell(p.output, a, b), p.labels[a] == p.labels[b]);
      }
  }
}

TEST(Synthetic, RotationIsOrthogonal) {
  for (std::uint64_t seed : {0ull, 7ull, 99ull}) {
    for (std::size_t n : {2u, 5u, 32u, 64u}) {
      Rng rng(seed);
      Matrix r = random_orthogonal(rng, n);
      Matrix rtr = matmul_tn(r, r);
      EXPECT_LT(max_abs_diff(rtr, Matrix::identity(n)), 1e-10);
    }
  }
}

TEST(Synthetic, OutputIsRotatedInput) {
  SyntheticTaskSpec spec;
  spec.height = spec.width = 4;
  spec.channels = 6;
  spec.clusters = 3;
  Rng rng(3);
  Matrix rot = task_rotation(spec);
  SyntheticPair p = generate_pair(rng, spec, rot);
  for (std::size_t i = 0; i < 16; ++i) {
    auto in = p.input.at(i), out = p.output.at(i);
    EXPECT_NEAR(norm2(in), norm2(out), 1e-12);
    for (std::size_t r = 0; r < 6; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 6; ++c) s += rot(r, c) * in[c];
      EXPECT_NEAR(out[r], s, 1e-14);
    }
  }
}

TEST(Synthetic, Deterministic) {
  SyntheticTaskSpec spec;
  Rng a(5), b(5);
  SyntheticPair x = generate_pair(a, spec), y = generate_pair(b, spec);
  EXPECT_EQ(x.input, y.input);
  EXPECT_EQ(x.output, y.output);
  EXPECT_EQ(x.labels, y.labels);
}

TEST(Synthetic, BlocksLayoutDefaultGrid) {
  SyntheticTaskSpec spec;  // 16x16, 8 clusters: 2 x 4 blocks of 8 x 4 cells
  Rng rng(6);
  auto labels = layout_labels(rng, spec);
  EXPECT_EQ(labels[0], 0u);
  EXPECT_EQ(labels[3], 0u);
  EXPECT_EQ(labels[4], 1u);
  EXPECT_EQ(labels[15], 3u);
  EXPECT_EQ(labels[8 * 16], 4u);
  EXPECT_EQ(labels[255], 7u);
  std::vector<int> count(8, 0);
  for (auto l : labels) ++count[l];
  for (int c : count) EXPECT_EQ(c, 32);
}

TEST(Synthetic, InvalidSpecThrows) {
  Rng rng(7);
  SyntheticTaskSpec s;
  s.clusters = 300;
  EXPECT_THROW(generate_pair(rng, s), PreconditionError);
  s = {};
  s.channels = 1;
  EXPECT_THROW(generate_pair(rng, s), PreconditionError);
  s = {};
  s.noise_sigma = -0.1;
  EXPECT_THROW(generate_pair(rng, s), PreconditionError);
  s = {};
  s.height = 0;
  EXPECT_THROW(generate_pair(rng, s), PreconditionError);
}
