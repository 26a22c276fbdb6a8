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

#ifndef RICHBLL_DATA_HPP_
#define RICHBLL_DATA_HPP_

#include "richbll/backbone.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace richbll {

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numeric CSV with a header row. Every column except `target_column` becomes an input.
LabeledDataset load_csv(const std::filesystem::path& path, const std::string& target_column);

/// Column names of the inputs returned by load_csv, in order.
std::vector<std::string> csv_input_columns(const std::filesystem::path& path, const std::string& target_column);

struct SplitFractions {
  double train = 0.72;
  double val = 0.18;
  double test = 0.10;

  void validate() const;
};

struct StandardizationStats {
  DenseVector input_mean;
  DenseVector input_std;  // constant columns get 1
  double target_mean = 0.0;
  std::vector<bool> constant;

  bool any_constant() const;
  /// Standardizes inputs and centers targets.
  LabeledDataset apply(const LabeledDataset& data) const;
};

StandardizationStats fit_standardization(const LabeledDataset& train);

struct Split {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
  StandardizationStats stats;
  std::vector<Eigen::Index> train_index;
  std::vector<Eigen::Index> val_index;
  std::vector<Eigen::Index> test_index;
};

/// Seeded shuffle, contiguous split, then standardization with train-split statistics.
Split split_standardize(const LabeledDataset& data, const SplitFractions& fractions, std::uint64_t seed);

/// Concatenates rows of two datasets with equal widths.
LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

// Synthetic generators. All are deterministic in their seed.

/// y = w . x + noise with x ~ N(0, I_d).
LabeledDataset make_linear(Eigen::Index n, Eigen::Index d, double noise_std, std::uint64_t seed);

/// 1D y = sin(3x) + noise, x uniform on [-1, -gap] U [gap, 1].
LabeledDataset make_sinusoid_gap(Eigen::Index n, double gap, double noise_std, std::uint64_t seed);

struct ClusterShiftData {
  LabeledDataset in_distribution;
  LabeledDataset out_of_distribution;
};

/// Gaussian clusters in d dimensions with a smooth nonlinear target; the OOD
/// clusters sit `shift` units away along a random direction.
ClusterShiftData make_cluster_shift(Eigen::Index n_id, Eigen::Index n_ood, Eigen::Index d, double shift,
                                    double noise_std, std::uint64_t seed);

void write_csv(const LabeledDataset& data, const std::filesystem::path& path);

}  // namespace richbll

#endif  // RICHBLL_DATA_HPP_
