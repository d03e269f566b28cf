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
#include <sstream>
#include <string>

#include "semrel/gradcheck.hpp"

using namespace semrel;

TEST(Gradcheck, CentralDifferenceOfQuadratic) {
  Vector x{1.0, -2.0, 0.5};
  auto f = [&] { return x[0] * x[0] + 3 * x[1] + x[0] * x[2]; };
  Vector g = central_difference(f, x, kFdStep);
  EXPECT_NEAR(g[0], 2 * 1.0 + 0.5, 1e-8);
  EXPECT_NEAR(g[1], 3.0, 1e-8);
  EXPECT_NEAR(g[2], 1.0, 1e-8);
  EXPECT_EQ(x, (Vector{1.0, -2.0, 0.5}));  // restored
}

TEST(Gradcheck, RelativeError) {
  EXPECT_EQ(relative_error(Vector{1, 2}, Vector{1, 2}), 0.0);
  EXPECT_NEAR(relative_error(Vector{1, 2}, Vector{1, 2.2}), 0.2 / 2.2, 1e-15);
  EXPECT_EQ(relative_error(Vector{0, 0}, Vector{0, 0}), 0.0);
}

TEST(Gradcheck, AllFamiliesPassAndAreListed) {
  for (std::uint64_t seed : {0ull, 1ull, 123456789ull}) {
    GradcheckOptions opts;
    opts.trials = 30;
    GradcheckReport rep = gradcheck_all(seed, opts);
    std::set<LossFamily> seen;
    for (const auto& e : rep.entries) seen.insert(e.family);
    EXPECT_EQ(seen.size(), std::size(kAllFamilies));
    EXPECT_TRUE(rep.passed(1e-5)) << "seed " << seed << " worst " << rep.worst();
    std::ostringstream os;
    rep.print(os);
    for (LossFamily f : kAllFamilies) EXPECT_NE(os.str().find(family_name(f)), std::string::npos);
  }
}

TEST(Gradcheck, CorruptedGradientIsCaught) {
  for (LossFamily f : kAllFamilies) {
    GradcheckOptions opts;
    opts.trials = 3;
    opts.corrupt = {f};
    Rng rng(9);
    EXPECT_GT(gradcheck_family(f, rng, opts).max_rel_error, 1e-5) << family_name(f);
  }
}
