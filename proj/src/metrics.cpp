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

#include "richbll/metrics.hpp"

#include "richbll/version.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace richbll {

double gaussian_nll(double y, const PredictiveDist& dist) {
  if (!(dist.variance > 0.0)) throw std::invalid_argument("gaussian_nll: variance must be > 0");
  const double e = y - dist.mean;
  return 0.5 * std::log(2.0 * std::numbers::pi * dist.variance) + e * e / (2.0 * dist.variance);
}

double mean_gaussian_nll(const DenseVector& y, const DenseVector& mean, const DenseVector& variance) {
  if (y.size() != mean.size() || y.size() != variance.size()) throw DimensionMismatch("mean_gaussian_nll");
  if (y.size() == 0) throw std::invalid_argument("mean_gaussian_nll: empty");
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) total += gaussian_nll(y(i), {mean(i), variance(i)});
  return total / static_cast<double>(y.size());
}

double rmse(const DenseVector& y, const DenseVector& mean) {
  if (y.size() != mean.size() || y.size() == 0) throw DimensionMismatch("rmse");
  return std::sqrt((y - mean).squaredNorm() / static_cast<double>(y.size()));
}

double auroc(const std::vector<double>& scores_id, const std::vector<double>& scores_ood) {
  if (scores_id.empty() || scores_ood.empty()) throw std::invalid_argument("auroc: empty score list");
  struct Item {
    double score;
    bool ood;
  };
  std::vector<Item> all;
  all.reserve(scores_id.size() + scores_ood.size());
  for (double s : scores_id) all.push_back({s, false});
  for (double s : scores_ood) all.push_back({s, true});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  double rank_sum_ood = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k)
      if (all[k].ood) rank_sum_ood += avg_rank;
    i = j;
  }
  const double n_ood = static_cast<double>(scores_ood.size());
  const double n_id = static_cast<double>(scores_id.size());
  return (rank_sum_ood - n_ood * (n_ood + 1.0) / 2.0) / (n_ood * n_id);
}

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe r;
  r.n = values.size();
  if (values.empty()) return r;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(r.n);
  if (r.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.se = std::sqrt(ss / static_cast<double>(r.n - 1)) / std::sqrt(static_cast<double>(r.n));
  }
  return r;
}

std::vector<std::string> MetricReport::variants() const {
  std::vector<std::string> out;
  for (const auto& row : rows)
    if (std::find(out.begin(), out.end(), row.variant) == out.end()) out.push_back(row.variant);
  return out;
}

std::vector<SeedRow> MetricReport::rows_for(const std::string& variant) const {
  std::vector<SeedRow> out;
  std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
               [&](const SeedRow& r) { return r.variant == variant; });
  return out;
}

MeanSe MetricReport::aggregate(const std::string& variant, const std::string& metric) const {
  std::vector<double> v;
  for (const auto& row : rows_for(variant)) {
    if (metric == "nll") {
      v.push_back(row.nll);
    } else if (metric == "rmse") {
      v.push_back(row.rmse);
    } else if (metric == "auroc") {
      if (row.auroc) v.push_back(*row.auroc);
    } else if (metric == "runtime_s") {
      v.push_back(row.runtime_s);
    } else {
      throw std::invalid_argument("MetricReport: unknown metric '" + metric + "'");
    }
  }
  return mean_se(v);
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = {{"seed", r.seed},       {"variant", r.variant},     {"nll", r.nll},
                        {"rmse", r.rmse},       {"runtime_s", r.runtime_s}, {"noise_var", r.noise_var},
                        {"ratio", r.ratio}};
    j["auroc"] = r.auroc ? nlohmann::json(*r.auroc) : nlohmann::json();
    per_seed.push_back(j);
  }
  nlohmann::json agg = nlohmann::json::object();
  for (const auto& v : variants()) {
    nlohmann::json a = nlohmann::json::object();
    for (const char* metric : {"nll", "rmse", "auroc", "runtime_s"}) {
      const MeanSe m = aggregate(v, metric);
      if (m.n > 0) a[metric] = {{"mean", m.mean}, {"se", m.se}, {"n", m.n}};
    }
    agg[v] = a;
  }
  return {{"library_version", kVersion}, {"config", config}, {"per_seed", per_seed}, {"aggregate", agg}};
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(10);
  out << "seed,variant,ratio,nll,rmse,auroc,runtime_s,noise_var\n";
  for (const auto& r : rows) {
    out << r.seed << ',' << r.variant << ',' << r.ratio << ',' << r.nll << ',' << r.rmse << ',';
    if (r.auroc) out << *r.auroc;
    out << ',' << r.runtime_s << ',' << r.noise_var << '\n';
  }
}

}  // namespace richbll
