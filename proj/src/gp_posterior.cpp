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

#include "richbll/gp_posterior.hpp"

namespace richbll {

std::string to_string(PosteriorVariant v) {
  switch (v) {
    case PosteriorVariant::Bll:
      return "bll";
    case PosteriorVariant::RichBll:
      return "rich";
    case PosteriorVariant::RichBllSub:
      return "rich-sub";
  }
  return "unknown";
}

namespace {

PosteriorVariant variant_from_string(const std::string& s) {
  if (s == "bll") return PosteriorVariant::Bll;
  if (s == "rich") return PosteriorVariant::RichBll;
  if (s == "rich-sub") return PosteriorVariant::RichBllSub;
  throw std::invalid_argument("unknown posterior variant '" + s + "'");
}

bool is_identity(const LowerTriangularFactor<double>& l) {
  return l.matrix() == DenseMatrix::Identity(l.dim(), l.dim());
}

PosteriorModel build(const DenseMatrix& phi_r_rows, Eigen::Index n_train, const RichTransform& transform,
                     double noise_var, bool subsampled, const PosteriorOptions& options) {
  if (!(noise_var > 0.0) || !std::isfinite(noise_var)) {
    throw std::invalid_argument("fit_posterior: noise variance must be > 0");
  }
  const Eigen::Index r = transform.dim();
  if (phi_r_rows.cols() != r) {
    throw DimensionMismatch("fit_posterior: features have " + std::to_string(phi_r_rows.cols()) +
                            " columns, transform expects " + std::to_string(r));
  }
  const Eigen::Index k = phi_r_rows.rows();
  if (k > n_train) throw std::invalid_argument("fit_posterior: k > N");
  if (k == 0 && !options.allow_empty) {
    throw std::invalid_argument("fit_posterior: no training rows (set allow_empty for the prior)");
  }
  if (subsampled && k < r && !options.allow_k_below_r) {
    throw std::invalid_argument("fit_posterior: subsample size " + std::to_string(k) +
                                " is below the feature dimension " + std::to_string(r));
  }

  PosteriorModel model;
  model.L = transform.L;
  model.noise_var = noise_var;
  model.n_train = n_train;
  model.k_used = k;
  if (subsampled) {
    model.variant = PosteriorVariant::RichBllSub;
  } else {
    model.variant = is_identity(transform.L) ? PosteriorVariant::Bll : PosteriorVariant::RichBll;
  }

  DenseMatrix inner = DenseMatrix::Identity(r, r);
  if (k > 0) {  // Eigen's blocked GEMM divides by the inner dimension
    const DenseMatrix phi_l = phi_r_rows * transform.L.matrix();
    const double scale = static_cast<double>(n_train) / static_cast<double>(k) / noise_var;
    inner.selfadjointView<Eigen::Lower>().rankUpdate(phi_l.transpose(), scale);
    inner = DenseMatrix(inner.selfadjointView<Eigen::Lower>());
  }
  model.inner_factor = cholesky(inner);
  return model;
}

// C^{-1} L^T Phi'^T, whose column norms are predictive variances.
DenseMatrix whitened_test(const PosteriorModel& model, const DenseMatrix& phi_r_test) {
  if (phi_r_test.cols() != model.dim()) {
    throw DimensionMismatch("predictive_cov: test features have " + std::to_string(phi_r_test.cols()) +
                            " columns, model expects " + std::to_string(model.dim()));
  }
  const DenseMatrix phi_lt = model.L.matrix().transpose() * phi_r_test.transpose();
  return tri_solve(model.inner_factor, phi_lt, TriSide::Lower);
}

}  // namespace

PosteriorModel fit_posterior(const DenseMatrix& phi_r_train, const RichTransform& transform,
                             double noise_var, const std::optional<SubsampleSpec>& subsample,
                             const PosteriorOptions& options) {
  if (!subsample) {
    return build(phi_r_train, phi_r_train.rows(), transform, noise_var, false, options);
  }
  const auto idx = subsample_rows(phi_r_train.rows(), *subsample);
  DenseMatrix rows(static_cast<Eigen::Index>(idx.size()), phi_r_train.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = phi_r_train.row(idx[i]);
  return build(rows, phi_r_train.rows(), transform, noise_var, true, options);
}

PosteriorModel fit_posterior_selected(const DenseMatrix& phi_r_selected, Eigen::Index n_train,
                                      const RichTransform& transform, double noise_var,
                                      const PosteriorOptions& options) {
  return build(phi_r_selected, n_train, transform, noise_var, phi_r_selected.rows() < n_train, options);
}

DenseMatrix predictive_cov(const PosteriorModel& model, const DenseMatrix& phi_r_test) {
  const DenseMatrix v = whitened_test(model, phi_r_test);
  DenseMatrix s(v.cols(), v.cols());
  s.noalias() = v.transpose() * v;
  return symmetrized(s);
}

DenseVector predictive_variance(const PosteriorModel& model, const DenseMatrix& phi_r_test) {
  return whitened_test(model, phi_r_test).colwise().squaredNorm().transpose();
}

PredictiveDist predict(const PosteriorModel& model, double backbone_mean,
                       const DenseVector& phi_r_test_row, bool include_noise) {
  const DenseMatrix row = phi_r_test_row.transpose();
  double var = predictive_variance(model, row)(0);
  if (include_noise) var += model.noise_var;
  return {backbone_mean, var};
}

namespace {

nlohmann::json factor_json(const LowerTriangularFactor<double>& f) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < f.dim(); ++i)
    for (Eigen::Index j = 0; j < f.dim(); ++j) v.push_back(f.matrix()(i, j));
  return {{"dim", f.dim()}, {"jitter_used", f.jitter_used()}, {"data", v}};
}

LowerTriangularFactor<double> factor_from_json(const nlohmann::json& j) {
  const Eigen::Index n = j.at("dim").get<Eigen::Index>();
  const auto v = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != n * n) throw DimensionMismatch("factor: wrong size");
  DenseMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) m(i, k) = v[static_cast<std::size_t>(i * n + k)];
  return LowerTriangularFactor<double>(m, j.value("jitter_used", 0.0));
}

}  // namespace

nlohmann::json to_json(const PosteriorModel& model) {
  return {{"format", "richbll-posterior-v1"},
          {"variant", to_string(model.variant)},
          {"noise_var", model.noise_var},
          {"n_train", model.n_train},
          {"k_used", model.k_used},
          {"L", factor_json(model.L)},
          {"inner_factor", factor_json(model.inner_factor)}};
}

PosteriorModel posterior_model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "richbll-posterior-v1") {
    throw std::invalid_argument("posterior: unrecognized format");
  }
  PosteriorModel m;
  m.variant = variant_from_string(j.at("variant").get<std::string>());
  m.noise_var = j.at("noise_var").get<double>();
  m.n_train = j.at("n_train").get<Eigen::Index>();
  m.k_used = j.at("k_used").get<Eigen::Index>();
  m.L = factor_from_json(j.at("L"));
  m.inner_factor = factor_from_json(j.at("inner_factor"));
  return m;
}

}  // namespace richbll
