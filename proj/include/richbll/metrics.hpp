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

#ifndef RICHBLL_METRICS_HPP_
#define RICHBLL_METRICS_HPP_

#include "richbll/gp_posterior.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace richbll {

/// 0.5 log(2 pi var) + (y - mean)^2 / (2 var).
double gaussian_nll(double y, const PredictiveDist& dist);

/// Mean per-point NLL.
double mean_gaussian_nll(const DenseVector& y, const DenseVector& mean, const DenseVector& variance);

double rmse(const DenseVector& y, const DenseVector& mean);

/// P(ood score > id score) with ties counted 1/2, from average ranks.
double auroc(const std::vector<double>& scores_id, const std::vector<double>& scores_ood);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // sample std / sqrt(n); 0 for a single value
  std::size_t n = 0;
};

MeanSe mean_se(const std::vector<double>& values);

struct SeedRow {
  std::uint64_t seed = 0;
  std::string variant;
  double nll = 0.0;
  double rmse = 0.0;
  std::optional<double> auroc;
  double runtime_s = 0.0;
  double noise_var = 0.0;
  double ratio = 1.0;
};

struct MetricReport {
  nlohmann::json config;
  std::vector<SeedRow> rows;

  std::vector<std::string> variants() const;
  std::vector<SeedRow> rows_for(const std::string& variant) const;
  MeanSe aggregate(const std::string& variant, const std::string& metric) const;

  nlohmann::json to_json() const;
  void write_csv(const std::filesystem::path& path) const;
};

}  // namespace richbll

#endif  // RICHBLL_METRICS_HPP_
