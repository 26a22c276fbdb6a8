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

#include "richbll/transform.hpp"

#include <numeric>
#include <random>

namespace richbll {

std::vector<Eigen::Index> subsample_rows(Eigen::Index n, const SubsampleSpec& spec) {
  if (spec.k < 1 || spec.k > n) {
    throw std::invalid_argument("subsample_rows: need 1 <= k <= n (k=" + std::to_string(spec.k) +
                                ", n=" + std::to_string(n) + ")");
  }
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});
  std::mt19937_64 rng(spec.seed);
  for (Eigen::Index i = 0; i < spec.k; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(spec.k));
  return pool;
}

namespace {

void check_rank(Eigen::Index rows, Eigen::Index r, double ridge, const char* what) {
  if (ridge < 0.0) throw std::invalid_argument(std::string(what) + ": ridge must be >= 0");
  if (rows < r && ridge == 0.0) {
    throw RankDeficient(std::string(what) + ": " + std::to_string(rows) + " rows < r = " +
                        std::to_string(r) + " with zero ridge");
  }
}

LowerTriangularFactor<double> normal_factor(const DenseMatrix& phi_r, double ridge) {
  DenseMatrix normal = DenseMatrix::Zero(phi_r.cols(), phi_r.cols());
  normal.selfadjointView<Eigen::Lower>().rankUpdate(phi_r.transpose());
  normal = DenseMatrix(normal.selfadjointView<Eigen::Lower>());
  normal.diagonal().array() += ridge;
  return cholesky(normal);
}

// M^T = (Phi_r^T Phi_r + ridge I)^{-1} Phi_r^T, r x N, by two triangular solves.
DenseMatrix projector_transpose(const DenseMatrix& phi_r, double ridge) {
  const auto chol = normal_factor(phi_r, ridge);
  return tri_solve(chol, tri_solve(chol, phi_r.transpose(), TriSide::Lower), TriSide::LowerTranspose);
}

DenseMatrix select_rows(const DenseMatrix& m, const std::vector<Eigen::Index>& rows) {
  DenseMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

RichTransform finish(const DenseMatrix& projected, double ridge) {
  RichTransform t;
  t.gram_btb = DenseMatrix::Identity(projected.rows(), projected.rows());
  t.gram_btb.selfadjointView<Eigen::Lower>().rankUpdate(projected);
  t.gram_btb = DenseMatrix(t.gram_btb.selfadjointView<Eigen::Lower>());
  t.L = cholesky(t.gram_btb);
  t.ridge = ridge;
  return t;
}

}  // namespace

DenseMatrix fit_A_exact(const DenseMatrix& phi_m, const DenseMatrix& phi_r, double ridge) {
  if (phi_m.rows() != phi_r.rows()) {
    throw DimensionMismatch("fit_A_exact: phi_m and phi_r row counts differ");
  }
  check_rank(phi_r.rows(), phi_r.cols(), ridge, "fit_A_exact");
  // A^T = (Phi_r^T Phi_r + ridge I)^{-1} Phi_r^T Phi_m.
  const auto chol = normal_factor(phi_r, ridge);
  const DenseMatrix rhs = phi_r.transpose() * phi_m;
  return tri_solve(chol, tri_solve(chol, rhs, TriSide::Lower), TriSide::LowerTranspose).transpose();
}

RichTransform RichTransform::identity(Eigen::Index r) {
  RichTransform t;
  t.L = LowerTriangularFactor<double>::identity(r);
  t.gram_btb = DenseMatrix::Identity(r, r);
  return t;
}

RichTransform fit_transform(const FeatureBundle& bundle, double ridge,
                            const std::optional<SubsampleSpec>& subsample) {
  bundle.validate();
  std::vector<Eigen::Index> local(static_cast<std::size_t>(bundle.rows()));
  std::iota(local.begin(), local.end(), Eigen::Index{0});
  if (subsample) local = subsample_rows(bundle.rows(), *subsample);

  const DenseMatrix phi_r = select_rows(bundle.phi_r, local);
  const DenseMatrix hidden = select_rows(bundle.hidden_matrix(), local);
  check_rank(phi_r.rows(), phi_r.cols(), ridge, "fit_transform");

  const DenseMatrix projected = projector_transpose(phi_r, ridge) * hidden;  // r x (m or q)
  RichTransform t = finish(projected, ridge);
  for (auto i : local) t.fit_rows.push_back(bundle.source_rows[static_cast<std::size_t>(i)]);
  if (bundle.is_sketched()) t.sketch = std::get<SketchedHidden>(bundle.hidden).sketch;
  return t;
}

RichTransform fit_transform_streamed(const BackboneModel& model, const DenseMatrix& inputs,
                                     double ridge, std::vector<Eigen::Index> rows,
                                     Eigen::Index output_index) {
  if (rows.empty()) {
    rows.resize(static_cast<std::size_t>(inputs.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  }
  const DenseMatrix x = select_rows(inputs, rows);
  const DenseMatrix phi_r = extract_last_layer(model, x);
  check_rank(phi_r.rows(), phi_r.cols(), ridge, "fit_transform_streamed");
  const DenseMatrix mt = projector_transpose(phi_r, ridge);

  constexpr Eigen::Index kChunk = 256;
  DenseMatrix projected = DenseMatrix::Zero(phi_r.cols(), model.hidden_param_count());
  for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, x.rows() - start);
    const DenseMatrix jac = hidden_jacobian(model, x.middleRows(start, len), output_index);
    projected.noalias() += mt.middleCols(start, len) * jac;
  }
  RichTransform t = finish(projected, ridge);
  t.fit_rows = std::move(rows);
  return t;
}

nlohmann::json to_json(const RichTransform& t) {
  const Eigen::Index r = t.dim();
  std::vector<double> l, g;
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) {
      l.push_back(t.L.matrix()(i, j));
      g.push_back(t.gram_btb(i, j));
    }
  nlohmann::json j = {{"format", "richbll-transform-v1"},
                      {"r", r},
                      {"ridge", t.ridge},
                      {"jitter_used", t.L.jitter_used()},
                      {"L", l},
                      {"gram_btb", g},
                      {"fit_rows", t.fit_rows}};
  if (t.sketch) {
    j["sketch"] = {{"q", t.sketch->q}, {"seed", t.sketch->seed}, {"block_size", t.sketch->block_size}};
  }
  return j;
}

RichTransform rich_transform_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "richbll-transform-v1") {
    throw std::invalid_argument("transform: unrecognized format");
  }
  const Eigen::Index r = j.at("r").get<Eigen::Index>();
  const auto l = j.at("L").get<std::vector<double>>();
  const auto g = j.at("gram_btb").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(l.size()) != r * r || static_cast<Eigen::Index>(g.size()) != r * r) {
    throw DimensionMismatch("transform: L or gram_btb has the wrong size");
  }
  DenseMatrix lm(r, r), gm(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < r; ++k) {
      lm(i, k) = l[static_cast<std::size_t>(i * r + k)];
      gm(i, k) = g[static_cast<std::size_t>(i * r + k)];
    }
  RichTransform t;
  t.L = LowerTriangularFactor<double>(lm, j.value("jitter_used", 0.0));
  t.gram_btb = gm;
  t.ridge = j.value("ridge", 0.0);
  t.fit_rows = j.value("fit_rows", std::vector<Eigen::Index>{});
  if (j.contains("sketch")) {
    SketchConfig s;
    s.q = j["sketch"].at("q").get<Eigen::Index>();
    s.seed = j["sketch"].at("seed").get<std::uint64_t>();
    s.block_size = j["sketch"].value("block_size", s.block_size);
    t.sketch = s;
  }
  return t;
}

}  // namespace richbll
