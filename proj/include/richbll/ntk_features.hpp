/*
 * Copyright 2026 The richbll Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef RICHBLL_NTK_FEATURES_HPP_
#define RICHBLL_NTK_FEATURES_HPP_

#include "richbll/backbone.hpp"
#include "richbll/densela.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

namespace richbll {

struct MemoryBudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Gaussian random projection P with N(0, 1/q) entries, streamed in column blocks.
struct SketchConfig {
  Eigen::Index q = 512;
  std::uint64_t seed = 0;
  Eigen::Index block_size = 4096;
  bool debug_identity = false;  // P = I (requires q == m); test hook

  void validate(Eigen::Index m) const;
};

/// Columns [col_begin, col_begin + count) of P for hidden dimension m. Column j
/// depends only on (seed, j), so the block size never changes the sketch.
DenseMatrix sketch_block(const SketchConfig& sketch, Eigen::Index m, Eigen::Index col_begin,
                         Eigen::Index count);

struct ExactHidden {
  DenseMatrix phi_m;  // N x m
};

struct SketchedHidden {
  DenseMatrix phi_m_p;  // N x q
  SketchConfig sketch;
};

struct FeatureBundle {
  DenseMatrix phi_r;  // N x r, last column all ones
  std::variant<ExactHidden, SketchedHidden> hidden;
  std::vector<Eigen::Index> source_rows;

  Eigen::Index rows() const { return phi_r.rows(); }
  const DenseMatrix& hidden_matrix() const;
  bool is_sketched() const { return std::holds_alternative<SketchedHidden>(hidden); }
  void validate() const;
};

/// Default ceiling on N * m doubles for exact hidden extraction (512 MiB).
inline constexpr std::size_t kDefaultHiddenBudget = std::size_t{64} << 20;

/// (penultimate(x_i), 1) per row.
DenseMatrix extract_last_layer(const BackboneModel& model, const DenseMatrix& inputs);

DenseMatrix extract_hidden_exact(const BackboneModel& model, const DenseMatrix& inputs,
                                 std::size_t budget_doubles = kDefaultHiddenBudget,
                                 Eigen::Index output_index = 0);

/// Phi^m P, computed in row chunks so the full N x m Jacobian is never held.
DenseMatrix extract_hidden_sketched(const BackboneModel& model, const DenseMatrix& inputs,
                                    const SketchConfig& sketch, Eigen::Index output_index = 0);

struct FeatureOptions {
  std::optional<SketchConfig> sketch;
  std::size_t budget_doubles = kDefaultHiddenBudget;
  Eigen::Index output_index = 0;
};

/// Extracts a bundle for the given dataset rows (all rows when `rows` is empty).
FeatureBundle extract_features(const BackboneModel& model, const DenseMatrix& inputs,
                               const FeatureOptions& options = {},
                               std::vector<Eigen::Index> rows = {});

/// hidden * hidden^T for whichever hidden representation the bundle stores.
DenseMatrix sketch_gram(const FeatureBundle& bundle);

void save_bundle(const FeatureBundle& bundle, const std::filesystem::path& path);
FeatureBundle load_bundle(const std::filesystem::path& path);

}  // namespace richbll

#endif  // RICHBLL_NTK_FEATURES_HPP_
