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

#include "richbll/ntk_features.hpp"
#include "richbll/seed.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace richbll {

namespace {

constexpr Eigen::Index kRowChunk = 256;

DenseMatrix select_rows(const DenseMatrix& m, const std::vector<Eigen::Index>& rows) {
  DenseMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

void SketchConfig::validate(Eigen::Index m) const {
  if (q < 1 || q > m) {
    throw std::invalid_argument("SketchConfig: q must satisfy 1 <= q <= m (q=" +
                                std::to_string(q) + ", m=" + std::to_string(m) + ")");
  }
  if (block_size < 1) throw std::invalid_argument("SketchConfig: block_size must be >= 1");
  if (debug_identity && q != m) {
    throw std::invalid_argument("SketchConfig: identity debug sketch requires q == m");
  }
}

DenseMatrix sketch_block(const SketchConfig& sketch, Eigen::Index m, Eigen::Index col_begin,
                         Eigen::Index count) {
  DenseMatrix block(m, count);
  if (sketch.debug_identity) {
    block.setZero();
    for (Eigen::Index j = 0; j < count; ++j) block(col_begin + j, j) = 1.0;
    return block;
  }
  const double stddev = 1.0 / std::sqrt(static_cast<double>(sketch.q));
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index j = 0; j < count; ++j) {
    const auto col = static_cast<std::uint64_t>(col_begin + j);
    std::mt19937_64 rng(derive_seed(sketch.seed, static_cast<std::uint64_t>(col)));
    for (Eigen::Index i = 0; i < m; ++i) block(i, j) = normal(rng);
  }
  return block;
}

const DenseMatrix& FeatureBundle::hidden_matrix() const {
  return std::visit(
      [](const auto& h) -> const DenseMatrix& {
        if constexpr (std::is_same_v<std::decay_t<decltype(h)>, ExactHidden>) {
          return h.phi_m;
        } else {
          return h.phi_m_p;
        }
      },
      hidden);
}

void FeatureBundle::validate() const {
  if (phi_r.cols() < 1) throw std::invalid_argument("FeatureBundle: phi_r has no columns");
  if (hidden_matrix().rows() != phi_r.rows()) {
    throw DimensionMismatch("FeatureBundle: hidden rows differ from phi_r rows");
  }
  if (static_cast<Eigen::Index>(source_rows.size()) != phi_r.rows()) {
    throw DimensionMismatch("FeatureBundle: source_rows length differs from row count");
  }
  if (phi_r.rows() > 0 && !(phi_r.col(phi_r.cols() - 1).array() == 1.0).all()) {
    throw std::invalid_argument("FeatureBundle: bias column of phi_r is not all ones");
  }
}

DenseMatrix extract_last_layer(const BackboneModel& model, const DenseMatrix& inputs) {
  const Eigen::Index width = model.penultimate_width();
  DenseMatrix phi(inputs.rows(), width + 1);
  if (inputs.rows() > 0) phi.leftCols(width) = penultimate_batch(model, inputs);
  phi.col(width).setOnes();
  return phi;
}

DenseMatrix extract_hidden_exact(const BackboneModel& model, const DenseMatrix& inputs,
                                 std::size_t budget_doubles, Eigen::Index output_index) {
  const auto n = static_cast<std::size_t>(inputs.rows());
  const auto m = static_cast<std::size_t>(model.hidden_param_count());
  if (n * m > budget_doubles) {
    throw MemoryBudgetExceeded("extract_hidden_exact: " + std::to_string(n) + " x " +
                               std::to_string(m) + " exceeds the budget of " +
                               std::to_string(budget_doubles) +
                               " doubles; use a random-projection sketch instead");
  }
  DenseMatrix out(inputs.rows(), model.hidden_param_count());
  for (Eigen::Index start = 0; start < inputs.rows(); start += kRowChunk) {
    const Eigen::Index len = std::min(kRowChunk, inputs.rows() - start);
    out.middleRows(start, len) = hidden_jacobian(model, inputs.middleRows(start, len), output_index);
  }
  return out;
}

DenseMatrix extract_hidden_sketched(const BackboneModel& model, const DenseMatrix& inputs,
                                    const SketchConfig& sketch, Eigen::Index output_index) {
  const Eigen::Index m = model.hidden_param_count();
  sketch.validate(m);
  DenseMatrix out(inputs.rows(), sketch.q);
  for (Eigen::Index col = 0; col < sketch.q; col += sketch.block_size) {
    const Eigen::Index count = std::min(sketch.block_size, sketch.q - col);
    const DenseMatrix p = sketch_block(sketch, m, col, count);
    for (Eigen::Index start = 0; start < inputs.rows(); start += kRowChunk) {
      const Eigen::Index len = std::min(kRowChunk, inputs.rows() - start);
      // With several blocks the Jacobian chunk is recomputed per block, trading
      // time for never holding more than one block of P.
      const DenseMatrix jac = hidden_jacobian(model, inputs.middleRows(start, len), output_index);
      out.block(start, col, len, count).noalias() = jac * p;
    }
  }
  return out;
}

FeatureBundle extract_features(const BackboneModel& model, const DenseMatrix& inputs,
                               const FeatureOptions& options, std::vector<Eigen::Index> rows) {
  if (rows.empty()) {
    rows.resize(static_cast<std::size_t>(inputs.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  }
  const DenseMatrix selected = select_rows(inputs, rows);
  FeatureBundle bundle;
  bundle.phi_r = extract_last_layer(model, selected);
  if (options.sketch) {
    bundle.hidden = SketchedHidden{
        extract_hidden_sketched(model, selected, *options.sketch, options.output_index),
        *options.sketch};
  } else {
    bundle.hidden =
        ExactHidden{extract_hidden_exact(model, selected, options.budget_doubles, options.output_index)};
  }
  bundle.source_rows = std::move(rows);
  return bundle;
}

DenseMatrix sketch_gram(const FeatureBundle& bundle) {
  const DenseMatrix& h = bundle.hidden_matrix();
  DenseMatrix gram(h.rows(), h.rows());
  gram.setZero();
  gram.selfadjointView<Eigen::Lower>().rankUpdate(h);
  return gram.selfadjointView<Eigen::Lower>();
}

namespace {

constexpr char kBundleMagic[8] = {'R', 'B', 'L', 'L', 'F', 'B', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("feature bundle: truncated file");
  return v;
}

void write_matrix(std::ostream& out, const DenseMatrix& m) {
  // Eigen storage is column-major, which is the on-disk layout.
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

DenseMatrix read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  DenseMatrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  if (!in) throw std::runtime_error("feature bundle: truncated file");
  return m;
}

}  // namespace

void save_bundle(const FeatureBundle& bundle, const std::filesystem::path& path) {
  bundle.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write feature bundle " + path.string());
  const DenseMatrix& h = bundle.hidden_matrix();
  out.write(kBundleMagic, sizeof(kBundleMagic));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(bundle.rows()));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(bundle.phi_r.cols()));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(h.cols()));
  write_pod<std::uint8_t>(out, bundle.is_sketched() ? 1 : 0);
  SketchConfig sk;
  if (bundle.is_sketched()) sk = std::get<SketchedHidden>(bundle.hidden).sketch;
  write_pod<std::uint64_t>(out, sk.seed);
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(sk.block_size));
  write_pod<std::uint8_t>(out, sk.debug_identity ? 1 : 0);
  for (auto row : bundle.source_rows) write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(row));
  write_matrix(out, bundle.phi_r);
  write_matrix(out, h);
  if (!out) throw std::runtime_error("failed writing feature bundle " + path.string());
}

FeatureBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read feature bundle " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kBundleMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("feature bundle: bad magic in " + path.string());
  }
  const auto n = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
  const auto r = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
  const auto hcols = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
  const bool sketched = read_pod<std::uint8_t>(in) != 0;
  SketchConfig sk;
  sk.seed = read_pod<std::uint64_t>(in);
  sk.block_size = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
  sk.debug_identity = read_pod<std::uint8_t>(in) != 0;
  sk.q = hcols;

  FeatureBundle bundle;
  bundle.source_rows.resize(static_cast<std::size_t>(n));
  for (auto& row : bundle.source_rows) row = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
  bundle.phi_r = read_matrix(in, n, r);
  DenseMatrix h = read_matrix(in, n, hcols);
  if (sketched) {
    bundle.hidden = SketchedHidden{std::move(h), sk};
  } else {
    bundle.hidden = ExactHidden{std::move(h)};
  }
  bundle.validate();
  return bundle;
}

}  // namespace richbll
