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

#include "richbll/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace richbll {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

struct RawCsv {
  std::vector<std::string> header;
  std::size_t target = 0;
};

RawCsv read_header(std::ifstream& in, const std::filesystem::path& path, const std::string& target_column) {
  RawCsv raw;
  std::string line;
  if (!std::getline(in, line)) throw CsvError(path.string() + ": empty file");
  raw.header = split_line(line);
  const auto it = std::find(raw.header.begin(), raw.header.end(), target_column);
  if (it == raw.header.end()) {
    std::string names;
    for (const auto& h : raw.header) names += (names.empty() ? "" : ", ") + h;
    throw CsvError(path.string() + ": no column '" + target_column + "'; available: " + names);
  }
  raw.target = static_cast<std::size_t>(it - raw.header.begin());
  return raw;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());
  return in;
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path, const std::string& target_column) {
  auto in = open(path);
  const RawCsv raw = read_header(in, path, target_column);
  const std::size_t width = raw.header.size();

  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> bad;
  std::string line;
  std::size_t row_index = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_line(line);
    std::vector<double> values(width);
    bool ok = cells.size() == width;
    for (std::size_t c = 0; ok && c < width; ++c) ok = parse_double(cells[c], values[c]);
    if (ok) {
      rows.push_back(std::move(values));
    } else {
      bad.push_back(row_index);
    }
    ++row_index;
  }
  if (!bad.empty()) {
    std::string list;
    for (std::size_t i = 0; i < std::min<std::size_t>(bad.size(), 20); ++i) list += (i ? ", " : "") + std::to_string(bad[i]);
    if (bad.size() > 20) list += ", ...";
    throw CsvError(path.string() + ": non-numeric or malformed data rows (0-based, excluding header): " + list);
  }
  if (rows.empty()) throw CsvError(path.string() + ": no data rows");

  LabeledDataset d;
  d.inputs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
  d.targets.resize(static_cast<Eigen::Index>(rows.size()), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Eigen::Index col = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == raw.target) {
        d.targets(static_cast<Eigen::Index>(i), 0) = rows[i][c];
      } else {
        d.inputs(static_cast<Eigen::Index>(i), col++) = rows[i][c];
      }
    }
  }
  return d;
}

std::vector<std::string> csv_input_columns(const std::filesystem::path& path, const std::string& target_column) {
  auto in = open(path);
  RawCsv raw = read_header(in, path, target_column);
  raw.header.erase(raw.header.begin() + static_cast<std::ptrdiff_t>(raw.target));
  return raw.header;
}

void SplitFractions::validate() const {
  if (train <= 0.0 || val < 0.0 || test <= 0.0) throw std::invalid_argument("split fractions must be positive");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
}

bool StandardizationStats::any_constant() const {
  return std::find(constant.begin(), constant.end(), true) != constant.end();
}

LabeledDataset StandardizationStats::apply(const LabeledDataset& data) const {
  LabeledDataset out;
  out.inputs = (data.inputs.rowwise() - input_mean.transpose()).array().rowwise() / input_std.transpose().array();
  out.targets = data.targets.array() - target_mean;
  return out;
}

StandardizationStats fit_standardization(const LabeledDataset& train) {
  if (train.size() == 0) throw std::invalid_argument("fit_standardization: empty training split");
  StandardizationStats s;
  const double n = static_cast<double>(train.size());
  s.input_mean = train.inputs.colwise().mean().transpose();
  s.input_std.resize(train.inputs.cols());
  s.constant.assign(static_cast<std::size_t>(train.inputs.cols()), false);
  for (Eigen::Index c = 0; c < train.inputs.cols(); ++c) {
    const double var = (train.inputs.col(c).array() - s.input_mean(c)).square().sum() / n;
    const double sd = std::sqrt(var);
    if (sd <= 1e-12 * std::max(1.0, std::abs(s.input_mean(c)))) {
      s.input_std(c) = 1.0;
      s.constant[static_cast<std::size_t>(c)] = true;
    } else {
      s.input_std(c) = sd;
    }
  }
  s.target_mean = train.targets.col(0).mean();
  return s;
}

Split split_standardize(const LabeledDataset& data, const SplitFractions& fractions, std::uint64_t seed) {
  fractions.validate();
  data.validate();
  const Eigen::Index n = data.size();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const auto n_train = static_cast<Eigen::Index>(std::llround(fractions.train * static_cast<double>(n)));
  const auto n_val = static_cast<Eigen::Index>(std::llround(fractions.val * static_cast<double>(n)));
  const Eigen::Index n_test = n - n_train - n_val;
  if (n_train < 1 || n_test < 1 || (fractions.val > 0.0 && n_val < 1)) {
    throw std::invalid_argument("split_standardize: a split is empty for N = " + std::to_string(n));
  }

  Split s;
  s.train_index.assign(perm.begin(), perm.begin() + n_train);
  s.val_index.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  s.test_index.assign(perm.begin() + n_train + n_val, perm.end());
  const LabeledDataset raw_train = data.rows(s.train_index);
  s.stats = fit_standardization(raw_train);
  s.train = s.stats.apply(raw_train);
  s.val = s.stats.apply(data.rows(s.val_index));
  s.test = s.stats.apply(data.rows(s.test_index));
  return s;
}

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.inputs.cols() != b.inputs.cols() || a.targets.cols() != b.targets.cols()) {
    throw DimensionMismatch("concat: datasets have different widths");
  }
  LabeledDataset out;
  out.inputs.resize(a.size() + b.size(), a.inputs.cols());
  out.inputs << a.inputs, b.inputs;
  out.targets.resize(a.size() + b.size(), a.targets.cols());
  out.targets << a.targets, b.targets;
  return out;
}

LabeledDataset make_linear(Eigen::Index n, Eigen::Index d, double noise_std, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  DenseVector w(d);
  for (Eigen::Index j = 0; j < d; ++j) w(j) = z(rng);
  LabeledDataset out;
  out.inputs.resize(n, d);
  out.targets.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out.inputs(i, j) = z(rng);
    out.targets(i, 0) = out.inputs.row(i).dot(w) + noise_std * z(rng);
  }
  return out;
}

LabeledDataset make_sinusoid_gap(Eigen::Index n, double gap, double noise_std, std::uint64_t seed) {
  if (!(gap >= 0.0 && gap < 1.0)) throw std::invalid_argument("make_sinusoid_gap: gap must be in [0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(gap, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  LabeledDataset out;
  out.inputs.resize(n, 1);
  out.targets.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = (i % 2 == 0 ? -1.0 : 1.0) * u(rng);
    out.inputs(i, 0) = x;
    out.targets(i, 0) = std::sin(3.0 * x) + noise_std * z(rng);
  }
  return out;
}

ClusterShiftData make_cluster_shift(Eigen::Index n_id, Eigen::Index n_ood, Eigen::Index d, double shift,
                                    double noise_std, std::uint64_t seed) {
  constexpr int kClusters = 3;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);

  DenseMatrix centers(kClusters, d);
  for (Eigen::Index c = 0; c < kClusters; ++c)
    for (Eigen::Index j = 0; j < d; ++j) centers(c, j) = 1.5 * z(rng);
  DenseVector direction(d);
  for (Eigen::Index j = 0; j < d; ++j) direction(j) = z(rng);
  direction.normalize();
  DenseVector w(d);
  for (Eigen::Index j = 0; j < d; ++j) w(j) = z(rng) / std::sqrt(static_cast<double>(d));

  auto sample = [&](Eigen::Index n, double offset) {
    LabeledDataset out;
    out.inputs.resize(n, d);
    out.targets.resize(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index c = i % kClusters;
      for (Eigen::Index j = 0; j < d; ++j) {
        out.inputs(i, j) = centers(c, j) + 0.5 * z(rng) + offset * direction(j);
      }
      const double t = out.inputs.row(i).dot(w);
      out.targets(i, 0) = std::sin(2.0 * t) + 0.5 * t + noise_std * z(rng);
    }
    return out;
  };
  ClusterShiftData data;
  data.in_distribution = sample(n_id, 0.0);
  data.out_of_distribution = sample(n_ood, shift);
  return data;
}

void write_csv(const LabeledDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) out << 'x' << j << ',';
  out << "y\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) out << data.inputs(i, j) << ',';
    out << data.targets(i, 0) << '\n';
  }
}

}  // namespace richbll
