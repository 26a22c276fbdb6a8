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

#ifndef RICHBLL_GP_POSTERIOR_HPP_
#define RICHBLL_GP_POSTERIOR_HPP_

#include "richbll/densela.hpp"
#include "richbll/transform.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace richbll {

enum class PosteriorVariant { Bll, RichBll, RichBllSub };

std::string to_string(PosteriorVariant v);

struct PosteriorOptions {
  bool allow_k_below_r = false;  // rate experiments only
  bool allow_empty = false;      // zero training rows gives the prior
};

/// Gaussian posterior over the r transformed last-layer weights.
///
/// Features phi_L = L^T phi_r; the inner factor C satisfies
/// C C^T = scale / sigma^2 * Phi_L^T Phi_L + I_r, with scale = N / k for the
/// subsampled variant and 1 otherwise.
struct PosteriorModel {
  PosteriorVariant variant = PosteriorVariant::Bll;
  LowerTriangularFactor<double> L;
  double noise_var = 1.0;
  LowerTriangularFactor<double> inner_factor;
  Eigen::Index n_train = 0;
  Eigen::Index k_used = 0;

  Eigen::Index dim() const { return L.dim(); }
};

/// Fits on the training features; with `subsample`, only k uniformly chosen rows
/// enter and the second-moment matrix is rescaled by N / k.
PosteriorModel fit_posterior(const DenseMatrix& phi_r_train, const RichTransform& transform,
                             double noise_var,
                             const std::optional<SubsampleSpec>& subsample = std::nullopt,
                             const PosteriorOptions& options = {});

/// Same, when the caller already holds only the selected rows of an N-row training set.
PosteriorModel fit_posterior_selected(const DenseMatrix& phi_r_selected, Eigen::Index n_train,
                                      const RichTransform& transform, double noise_var,
                                      const PosteriorOptions& options = {});

/// Posterior predictive covariance S = Phi_L' C^{-T} C^{-1} Phi_L'^T, symmetrized.
DenseMatrix predictive_cov(const PosteriorModel& model, const DenseMatrix& phi_r_test);

/// Diagonal of predictive_cov without forming the N' x N' block.
DenseVector predictive_variance(const PosteriorModel& model, const DenseMatrix& phi_r_test);

struct PredictiveDist {
  double mean = 0.0;
  double variance = 0.0;
};

PredictiveDist predict(const PosteriorModel& model, double backbone_mean,
                       const DenseVector& phi_r_test_row, bool include_noise);

struct SizeCapExceeded : std::length_error {
  using std::length_error::length_error;
};

inline constexpr Eigen::Index kOracleMaxTrain = 2000;

/// Kernel-space GP covariance k'' - k'x (kxx + sigma^2 I)^{-1} kx'.
template <typename Scalar>
Matrix<Scalar> gp_cov_from_kernels(const Matrix<Scalar>& k_train, const Matrix<Scalar>& k_test_train,
                                   const Matrix<Scalar>& k_test, Scalar noise_var) {
  if (k_train.rows() == 0) return symmetrized(k_test);
  Matrix<Scalar> shifted = k_train;
  shifted.diagonal().array() += noise_var;
  const auto chol = cholesky(symmetrized(shifted));
  const Matrix<Scalar> v = tri_solve(chol, k_test_train.transpose(), TriSide::Lower);
  Matrix<Scalar> s = k_test;
  s.noalias() -= v.transpose() * v;
  return symmetrized(s);
}

/// Exact GP predictive covariance with explicit features (e.g. the full NTK
/// gradients). Dense N x N solve, capped at kOracleMaxTrain rows.
template <typename Scalar>
Matrix<Scalar> ntk_gp_oracle(const Matrix<Scalar>& phi_train, const Matrix<Scalar>& phi_test,
                             Scalar noise_var) {
  if (phi_train.rows() > kOracleMaxTrain) {
    throw SizeCapExceeded("ntk_gp_oracle: " + std::to_string(phi_train.rows()) +
                          " training rows exceeds the cap of " + std::to_string(kOracleMaxTrain));
  }
  if (phi_train.rows() > 0 && phi_train.cols() != phi_test.cols()) {
    throw DimensionMismatch("ntk_gp_oracle: feature dimensions differ");
  }
  if (!(noise_var > Scalar(0))) throw std::invalid_argument("ntk_gp_oracle: noise_var must be > 0");
  const Matrix<Scalar> k_train = phi_train * phi_train.transpose();
  const Matrix<Scalar> k_cross = phi_test * phi_train.transpose();
  const Matrix<Scalar> k_test = phi_test * phi_test.transpose();
  return gp_cov_from_kernels<Scalar>(k_train, k_cross, k_test, noise_var);
}

nlohmann::json to_json(const PosteriorModel& model);
PosteriorModel posterior_model_from_json(const nlohmann::json& j);

}  // namespace richbll

#endif  // RICHBLL_GP_POSTERIOR_HPP_
