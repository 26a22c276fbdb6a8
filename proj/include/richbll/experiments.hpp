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

#ifndef RICHBLL_EXPERIMENTS_HPP_
#define RICHBLL_EXPERIMENTS_HPP_

#include "richbll/backbone.hpp"
#include "richbll/bandit.hpp"
#include "richbll/data.hpp"
#include "richbll/gp_posterior.hpp"
#include "richbll/metrics.hpp"
#include "richbll/ntk_features.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace richbll {

enum class ExperimentKind { Regress, Ood, Bandit, Ablate, Toy1d, Verify };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);
PosteriorVariant posterior_variant_from_string(const std::string& s);

enum class NoisePolicy { Auto, Grid, Fixed };

/// How sigma^2 is chosen: validation MSE (auto), best validation NLL over a grid, or a fixed value.
struct NoiseSelection {
  NoisePolicy policy = NoisePolicy::Auto;
  double value = 0.1;
  std::vector<double> grid{0.01, 0.05, 0.1, 0.5, 1.0};

  static NoiseSelection parse(const std::string& text);
  std::string describe() const;
};

struct SyntheticSpec {
  std::string generator = "linear";  // linear | sinusoid-gap | cluster-shift
  Eigen::Index n = 600;
  Eigen::Index d = 4;
  double noise_std = 0.1;
  double gap = 0.35;     // sinusoid-gap
  double shift = 1.5;    // cluster-shift; last-layer AUROC near 0.9, not saturated
  Eigen::Index n_ood = 200;
  std::uint64_t seed = 0;
};

/// Published mean test NLL per variant, used only for distance-to-target reports.
struct ReferenceNll {
  double rich = 0.0;
  double rich_sub = 0.0;
  double bll = 0.0;
};

/// Epoch and batch defaults for the tabular benchmarks.
struct DatasetProfile {
  std::string name;
  int epochs = 0;
  Eigen::Index batch_size = 32;
  ReferenceNll reference_nll;
};

const std::vector<DatasetProfile>& dataset_profiles();
std::optional<DatasetProfile> find_dataset_profile(const std::string& name);

/// Measured minus reference mean NLL per variant; null for unknown profiles.
nlohmann::json distance_to_target(const MetricReport& report, const std::string& profile);

struct BanditSettings {
  WheelConfig wheel;
  int horizon = 2000;
  PhaseConfig phases;
  std::optional<Eigen::Index> buffer_subsample;
  EmpiricalNoise empirical_noise;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Regress;
  std::string dataset_path;  // empty: use the synthetic generator
  std::string target_column = "y";
  std::string ood_path;
  std::string profile;
  SyntheticSpec synthetic;
  SplitFractions split;
  std::vector<std::uint64_t> seeds{0};
  BackboneConfig backbone;
  TrainConfig train;
  PosteriorVariant variant = PosteriorVariant::RichBll;
  NoiseSelection sigma2;
  double ridge = 0.0;
  double subsample_ratio = 0.4;  // rich-sub only
  std::optional<SketchConfig> sketch;
  int eval_every = 10;
  std::vector<double> ablation_ratios{0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  BanditSettings bandit;
  std::filesystem::path output_dir;

  /// Synthetic defaults sized for a single core: width 50, 200 epochs.
  static ExperimentConfig defaults(ExperimentKind kind);
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Missing fields keep the defaults for the given kind.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentKind kind);

/// Backbone trained with validation-epoch selection and retrained on train + val.
struct TrainedBackbone {
  BackboneModel model;
  Split split;
  LabeledDataset fit_data;  // train + val, standardized
  int selected_epochs = 0;
  double val_mse = 0.0;
  std::vector<std::pair<int, double>> val_rmse_curve;
  BackboneModel selection_model;  // trained on train only, at the selected epoch
};

TrainedBackbone train_with_selection(const LabeledDataset& data, const ExperimentConfig& cfg,
                                     std::uint64_t seed);

/// Transform + posterior for one variant on the fit inputs; rich-sub uses
/// max(r, round(ratio * N)) shared rows for both.
struct VariantFit {
  PosteriorModel posterior;
  RichTransform transform;
  double build_seconds = 0.0;
};

VariantFit fit_variant(const BackboneModel& model, const DenseMatrix& fit_inputs, PosteriorVariant variant,
                       double noise_var, const ExperimentConfig& cfg, double ratio, std::uint64_t seed);

/// Predictive mean / function variance on a batch.
struct BatchPrediction {
  DenseVector mean;
  DenseVector variance;  // posterior variance of f, without observation noise
};

BatchPrediction predict_batch(const BackboneModel& model, const PosteriorModel& posterior,
                              const DenseMatrix& inputs);

LabeledDataset load_experiment_data(const ExperimentConfig& cfg);

MetricReport run_regression_experiment(const ExperimentConfig& cfg);
MetricReport run_ood_experiment(const ExperimentConfig& cfg);
MetricReport run_ablation(const ExperimentConfig& cfg, const std::vector<double>& ratios);

/// Mean predictive std bands on a 1D grid, per seed and variant, plus the
/// NTK-GP oracle computed from the full parameter gradient.
struct Toy1dReport {
  nlohmann::json config;
  DenseVector grid;
  std::vector<std::string> variants;  // bll, rich, rich-sub, oracle
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<DenseVector>> std_bands;  // [seed][variant] over grid
  std::vector<DenseVector> means;                   // [seed]
  std::vector<std::vector<double>> gap_mean_std;    // [seed][variant]
  DenseMatrix train_inputs;

  double seed_mean_gap_std(const std::string& variant) const;
  nlohmann::json to_json() const;
  void write_csv(const std::filesystem::path& path) const;
};

Toy1dReport run_toy1d(const ExperimentConfig& cfg);

struct BanditRun {
  std::uint64_t seed = 0;
  std::string policy;
  RegretTrace trace;
  double seconds = 0.0;
};

/// Thompson agent for cfg.variant plus the uniform reference, per seed.
std::vector<BanditRun> run_bandit_sweep(const ExperimentConfig& cfg, bool include_uniform = true);
nlohmann::json bandit_sweep_summary(const ExperimentConfig& cfg, const std::vector<BanditRun>& runs);

}  // namespace richbll

#endif  // RICHBLL_EXPERIMENTS_HPP_
