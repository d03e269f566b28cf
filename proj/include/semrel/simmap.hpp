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

// Similarity maps for one query location: grid A holds z_q . z_j over every
// input location j and grid B holds z_q . w_j over every output location.

#include <cstddef>
#include <sstream>
#include <string>

#include "semrel/embedding.hpp"
#include "semrel/io.hpp"
#include "semrel/train.hpp"

namespace semrel {

struct SimilarityMaps {
  Matrix input;   // grid A, H x W
  Matrix output;  // grid B, H x W
};

inline SimilarityMaps export_simmap(const TranslationModel& model, const FeatureMap& fm_in, const FeatureMap& fm_out,
                                    std::size_t query_h, std::size_t query_w) {
  require_shape(fm_in.height() == fm_out.height() && fm_in.width() == fm_out.width() &&
                    fm_in.channels() == fm_out.channels(),
                "export_simmap: input and output maps differ in shape");
  if (query_h >= fm_in.height() || query_w >= fm_in.width())
    throw PreconditionError("export_simmap: query (" + std::to_string(query_h) + "," + std::to_string(query_w) +
                            ") outside " + std::to_string(fm_in.height()) + "x" + std::to_string(fm_in.width()));
  const PatchIndexSet all = all_patch_indices(fm_in);
  const Matrix z = model.embed_input(gather_patches(fm_in, all));
  const Matrix w = model.embed_output(gather_patches(fm_out, all));
  const auto q = z.row(query_h * fm_in.width() + query_w);
  SimilarityMaps maps{Matrix(fm_in.height(), fm_in.width()), Matrix(fm_in.height(), fm_in.width())};
  for (std::size_t j = 0; j < all.size(); ++j) {
    maps.input.data()[j] = dot(q, z.row(j));
    maps.output.data()[j] = dot(q, w.row(j));
  }
  return maps;
}

/// Writes <prefix>_A.csv, <prefix>_A.pgm, <prefix>_B.csv, <prefix>_B.pgm.
inline void write_simmap(const std::string& prefix, const SimilarityMaps& maps) {
  auto emit = [&](const std::string& tag, const Matrix& grid) {
    std::ostringstream csv;
    write_grid_csv(csv, grid);
    detail::write_file(prefix + "_" + tag + ".csv", csv.str());
    detail::write_file(prefix + "_" + tag + ".pgm", encode_pgm(grid));
  };
  emit("A", maps.input);
  emit("B", maps.output);
}

}  // namespace semrel
