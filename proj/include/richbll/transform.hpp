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

#ifndef RICHBLL_TRANSFORM_HPP_
#define RICHBLL_TRANSFORM_HPP_

#include "richbll/backbone.hpp"
#include "richbll/densela.hpp"
#include "richbll/ntk_features.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace richbll {

struct RankDeficient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Uniform subsample of k rows without replacement.
struct SubsampleSpec {
  Eigen::Index k = 1;
  std::uint64_t seed = 0;
};

/// k distinct indices from [0, n) by a seeded partial Fisher-Yates shuffle.
std::vector<Eigen::Index> subsample_rows(Eigen::Index n, const SubsampleSpec& spec);

/// Least-squares map A (m x r) with phi_m(x) ~ A phi_r(x):
/// A = Phi_m^T Phi_r (Phi_r^T Phi_r + ridge I)^{-1}.
DenseMatrix fit_A_exact(const DenseMatrix& phi_m, const DenseMatrix& phi_r, double ridge = 0.0);

/// The r x r factor L with L L^T = B^T B = A^T A + I_r, plus how it was fitted.
struct RichTransform {
  LowerTriangularFactor<double> L;
  double ridge = 0.0;
  std::vector<Eigen::Index> fit_rows;
  std::optional<SketchConfig> sketch;
  DenseMatrix gram_btb;

  Eigen::Index dim() const { return L.dim(); }

  /// L = I, which turns the Rich-BLL posterior into the plain last-layer one.
  static RichTransform identity(Eigen::Index r);
};

/// Projection of the hidden block through M = Phi_r (Phi_r^T Phi_r + ridge I)^{-1}:
/// B^T B = (M^T H)(M^T H)^T + I_r where H is the exact or sketched hidden block.
/// With a subsample, only the selected rows enter. The m x r map A is never formed.
RichTransform fit_transform(const FeatureBundle& bundle, double ridge = 0.0,
                            const std::optional<SubsampleSpec>& subsample = std::nullopt);

/// Same estimate computed straight from the backbone: hidden Jacobian rows are
/// produced in chunks and contracted against M immediately, so Phi_m is never
/// held in full. `rows` selects dataset rows (all when empty).
RichTransform fit_transform_streamed(const BackboneModel& model, const DenseMatrix& inputs,
                                     double ridge = 0.0, std::vector<Eigen::Index> rows = {},
                                     Eigen::Index output_index = 0);

nlohmann::json to_json(const RichTransform& t);
RichTransform rich_transform_from_json(const nlohmann::json& j);

}  // namespace richbll

#endif  // RICHBLL_TRANSFORM_HPP_
