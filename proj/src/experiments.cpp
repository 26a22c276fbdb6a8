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

#include "richbll/experiments.hpp"

#include "richbll/seed.hpp"
#include "richbll/transform.hpp"
#include "richbll/version.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

namespace richbll {

namespace {

constexpr std::uint64_t kSubsampleStream = 11;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

DenseMatrix select_rows(const DenseMatrix& m, const std::vector<Eigen::Index>& rows) {
  DenseMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Regress:
      return "regress";
    case ExperimentKind::Ood:
      return "ood";
    case ExperimentKind::Bandit:
      return "bandit";
    case ExperimentKind::Ablate:
      return "ablate";
    case ExperimentKind::Toy1d:
      return "toy1d";
    case ExperimentKind::Verify:
      return "verify";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::Regress, ExperimentKind::Ood, ExperimentKind::Bandit, ExperimentKind::Ablate,
                 ExperimentKind::Toy1d, ExperimentKind::Verify})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown experiment kind '" + s + "'");
}

PosteriorVariant posterior_variant_from_string(const std::string& s) {
  for (auto v : {PosteriorVariant::Bll, PosteriorVariant::RichBll, PosteriorVariant::RichBllSub})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown variant '" + s + "' (expected bll, rich or rich-sub)");
}

NoiseSelection NoiseSelection::parse(const std::string& text) {
  NoiseSelection n;
  if (text == "auto") {
    n.policy = NoisePolicy::Auto;
  } else if (text == "grid") {
    n.policy = NoisePolicy::Grid;
  } else {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || !(v > 0.0)) {
      throw std::invalid_argument("sigma2 must be auto, grid or a positive number, got '" + text + "'");
    }
    n.policy = NoisePolicy::Fixed;
    n.value = v;
  }
  return n;
}

namespace {

NoiseSelection fixed_noise(double value) {
  if (!(value > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  NoiseSelection n;
  n.policy = NoisePolicy::Fixed;
  n.value = value;
  return n;
}

}  // namespace

std::string NoiseSelection::describe() const {
  switch (policy) {
    case NoisePolicy::Auto:
      return "auto";
    case NoisePolicy::Grid:
      return "grid";
    case NoisePolicy::Fixed: {
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof(buf), value);  // shortest round-trip form
      return std::string(buf, res.ptr);
    }
  }
  return "unknown";
}

const std::vector<DatasetProfile>& dataset_profiles() {
  static const std::vector<DatasetProfile> profiles = {
      {"boston", 3000, 32, {2.61, 2.62, 2.78}},   {"concrete", 3000, 32, {3.10, 3.10, 3.39}},
      {"power", 3000, 256, {2.78, 2.78, 2.82}},   {"energy", 2000, 32, {0.75, 0.78, 0.92}},
      {"wine", 1000, 32, {1.00, 1.01, 1.03}},
  };
  return profiles;
}

std::optional<DatasetProfile> find_dataset_profile(const std::string& name) {
  for (const auto& p : dataset_profiles())
    if (p.name == name) return p;
  return std::nullopt;
}

nlohmann::json distance_to_target(const MetricReport& report, const std::string& profile) {
  const auto p = find_dataset_profile(profile);
  if (!p) return nullptr;
  nlohmann::json out = nlohmann::json::object();
  const std::vector<std::pair<std::string, double>> targets{
      {"rich", p->reference_nll.rich}, {"rich-sub", p->reference_nll.rich_sub}, {"bll", p->reference_nll.bll}};
  for (const auto& [variant, target] : targets) {
    const MeanSe m = report.aggregate(variant, "nll");
    if (m.n == 0) continue;
    out[variant] = {{"reference_nll", target}, {"measured_nll", m.mean}, {"distance", m.mean - target}};
  }
  return out;
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.backbone.hidden_widths = {50, 50};
  c.train.epochs = 200;
  c.train.batch_size = 32;
  c.train.learning_rate = 1e-3;
  switch (kind) {
    case ExperimentKind::Toy1d:
      c.synthetic.generator = "sinusoid-gap";
      c.synthetic.n = 200;
      c.synthetic.d = 1;
      c.synthetic.noise_std = 0.1;
      // ReLU units with kinks outside [-1, 1] are affine in x and make Phi_r collinear.
      c.backbone.activation = Activation::Tanh;
      c.train.epochs = 400;
      c.train.learning_rate = 3e-3;
      c.sigma2 = NoiseSelection::parse("0.01");
      c.seeds = {0, 1, 2, 3, 4};
      break;
    case ExperimentKind::Ood:
      c.synthetic.generator = "cluster-shift";
      break;
    case ExperimentKind::Bandit:
      c.seeds = {0, 1, 2, 3, 4};
      break;
    default:
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  split.validate();
  if (seeds.empty()) throw std::invalid_argument("ExperimentConfig: seeds must be nonempty");
  train.validate();
  if (!(subsample_ratio > 0.0 && subsample_ratio <= 1.0)) {
    throw std::invalid_argument("ExperimentConfig: subsample_ratio must be in (0, 1]");
  }
  if (ridge < 0.0) throw std::invalid_argument("ExperimentConfig: ridge must be >= 0");
  if (eval_every < 1) throw std::invalid_argument("ExperimentConfig: eval_every must be >= 1");
  for (double r : ablation_ratios)
    if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("ExperimentConfig: ablation ratios must be in (0, 1]");
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = {
      {"kind", to_string(c.kind)},
      {"dataset_path", c.dataset_path},
      {"target_column", c.target_column},
      {"ood_path", c.ood_path},
      {"profile", c.profile},
      {"synthetic",
       {{"generator", c.synthetic.generator},
        {"n", c.synthetic.n},
        {"d", c.synthetic.d},
        {"noise_std", c.synthetic.noise_std},
        {"gap", c.synthetic.gap},
        {"shift", c.synthetic.shift},
        {"n_ood", c.synthetic.n_ood},
        {"seed", c.synthetic.seed}}},
      {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}},
      {"seeds", c.seeds},
      {"backbone", to_json(c.backbone)},
      {"train", to_json(c.train)},
      {"variant", to_string(c.variant)},
      {"sigma2", {{"policy", c.sigma2.describe()}, {"grid", c.sigma2.grid}}},
      {"ridge", c.ridge},
      {"subsample_ratio", c.subsample_ratio},
      {"eval_every", c.eval_every},
      {"ablation_ratios", c.ablation_ratios},
      {"bandit",
       {{"wheel", to_json(c.bandit.wheel)},
        {"horizon", c.bandit.horizon},
        {"env_steps_per_phase", c.bandit.phases.env_steps_per_phase},
        {"grad_steps_per_phase", c.bandit.phases.grad_steps_per_phase},
        {"empirical_noise", c.bandit.empirical_noise.enabled},
        {"noise_window", c.bandit.empirical_noise.window}}},
      {"output_dir", c.output_dir.string()},
  };
  j["bandit"]["buffer_subsample"] =
      c.bandit.buffer_subsample ? nlohmann::json(*c.bandit.buffer_subsample) : nlohmann::json();
  if (c.sketch) {
    j["sketch"] = {{"q", c.sketch->q}, {"seed", c.sketch->seed}, {"block_size", c.sketch->block_size}};
  } else {
    j["sketch"] = nullptr;
  }
  return j;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentKind kind) {
  ExperimentConfig c = ExperimentConfig::defaults(j.contains("kind") ? experiment_kind_from_string(j["kind"]) : kind);
  c.dataset_path = j.value("dataset_path", c.dataset_path);
  c.target_column = j.value("target_column", c.target_column);
  c.ood_path = j.value("ood_path", c.ood_path);
  c.profile = j.value("profile", c.profile);
  if (j.contains("synthetic")) {
    const auto& s = j["synthetic"];
    c.synthetic.generator = s.value("generator", c.synthetic.generator);
    c.synthetic.n = s.value("n", c.synthetic.n);
    c.synthetic.d = s.value("d", c.synthetic.d);
    c.synthetic.noise_std = s.value("noise_std", c.synthetic.noise_std);
    c.synthetic.gap = s.value("gap", c.synthetic.gap);
    c.synthetic.shift = s.value("shift", c.synthetic.shift);
    c.synthetic.n_ood = s.value("n_ood", c.synthetic.n_ood);
    c.synthetic.seed = s.value("seed", c.synthetic.seed);
  }
  if (j.contains("split")) {
    c.split.train = j["split"].value("train", c.split.train);
    c.split.val = j["split"].value("val", c.split.val);
    c.split.test = j["split"].value("test", c.split.test);
  }
  c.seeds = j.value("seeds", c.seeds);
  if (j.contains("backbone")) {
    nlohmann::json b = to_json(c.backbone);
    b.update(j["backbone"]);
    c.backbone = backbone_config_from_json(b);
  }
  if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
  if (j.contains("variant")) c.variant = posterior_variant_from_string(j["variant"]);
  if (j.contains("sigma2")) {
    const auto& s = j["sigma2"];
    if (s.is_string()) {
      c.sigma2 = NoiseSelection::parse(s.get<std::string>());
    } else if (s.is_number()) {
      c.sigma2 = fixed_noise(s.get<double>());
    } else {
      if (s.contains("policy")) {
        const auto& p = s["policy"];
        c.sigma2 = p.is_number() ? fixed_noise(p.get<double>()) : NoiseSelection::parse(p.get<std::string>());
      }
      c.sigma2.grid = s.value("grid", c.sigma2.grid);
    }
  }
  c.ridge = j.value("ridge", c.ridge);
  c.subsample_ratio = j.value("subsample_ratio", c.subsample_ratio);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.ablation_ratios = j.value("ablation_ratios", c.ablation_ratios);
  if (j.contains("sketch") && !j["sketch"].is_null()) {
    SketchConfig s;
    s.q = j["sketch"].value("q", s.q);
    s.seed = j["sketch"].value("seed", s.seed);
    s.block_size = j["sketch"].value("block_size", s.block_size);
    c.sketch = s;
  }
  if (j.contains("bandit")) {
    const auto& b = j["bandit"];
    if (b.contains("wheel")) c.bandit.wheel = wheel_config_from_json(b["wheel"]);
    c.bandit.horizon = b.value("horizon", c.bandit.horizon);
    c.bandit.phases.env_steps_per_phase = b.value("env_steps_per_phase", c.bandit.phases.env_steps_per_phase);
    c.bandit.phases.grad_steps_per_phase = b.value("grad_steps_per_phase", c.bandit.phases.grad_steps_per_phase);
    c.bandit.empirical_noise.enabled = b.value("empirical_noise", c.bandit.empirical_noise.enabled);
    c.bandit.empirical_noise.window = b.value("noise_window", c.bandit.empirical_noise.window);
    if (b.contains("buffer_subsample") && !b["buffer_subsample"].is_null()) {
      c.bandit.buffer_subsample = b["buffer_subsample"].get<Eigen::Index>();
    }
  }
  c.output_dir = j.value("output_dir", c.output_dir.string());
  if (!c.profile.empty()) {
    const auto p = find_dataset_profile(c.profile);
    if (!p) throw std::invalid_argument("unknown dataset profile '" + c.profile + "'");
    if (!j.contains("train") || !j["train"].contains("epochs")) c.train.epochs = p->epochs;
    if (!j.contains("train") || !j["train"].contains("batch_size")) c.train.batch_size = p->batch_size;
  }
  c.validate();
  return c;
}

LabeledDataset load_experiment_data(const ExperimentConfig& cfg) {
  if (!cfg.dataset_path.empty()) return load_csv(cfg.dataset_path, cfg.target_column);
  const auto& s = cfg.synthetic;
  if (s.generator == "linear") return make_linear(s.n, s.d, s.noise_std, s.seed);
  if (s.generator == "sinusoid-gap") return make_sinusoid_gap(s.n, s.gap, s.noise_std, s.seed);
  if (s.generator == "cluster-shift") {
    return make_cluster_shift(s.n, s.n_ood, s.d, s.shift, s.noise_std, s.seed).in_distribution;
  }
  throw std::invalid_argument("unknown synthetic generator '" + s.generator + "'");
}

namespace {

BackboneConfig seeded_backbone(const ExperimentConfig& cfg, Eigen::Index input_dim, std::uint64_t seed) {
  BackboneConfig b = cfg.backbone;
  b.input_dim = input_dim;
  b.output_dim = 1;
  b.seed = seed;
  return b;
}

TrainConfig seeded_train(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainConfig t = cfg.train;
  t.seed = seed;
  return t;
}

double val_rmse(const BackboneModel& model, const LabeledDataset& val) {
  return std::sqrt(mse(model, val));
}

}  // namespace

TrainedBackbone train_with_selection(const LabeledDataset& data, const ExperimentConfig& cfg,
                                     std::uint64_t seed) {
  TrainedBackbone out;
  out.split = split_standardize(data, cfg.split, seed);
  const BackboneConfig bcfg = seeded_backbone(cfg, data.inputs.cols(), seed);
  const TrainConfig tcfg = seeded_train(cfg, seed);

  BackboneModel model = init_model(bcfg);
  Trainer trainer(model, tcfg);
  double best = std::numeric_limits<double>::infinity();
  out.selection_model = model;
  out.selected_epochs = 0;
  if (out.split.val.size() == 0) {
    for (int e = 0; e < tcfg.epochs; ++e) trainer.epoch(model, out.split.train);
    out.selected_epochs = tcfg.epochs;
    out.selection_model = model;
    out.val_mse = mse(model, out.split.train);
  } else {
    for (int e = 1; e <= tcfg.epochs; ++e) {
      trainer.epoch(model, out.split.train);
      if (e % cfg.eval_every != 0 && e != tcfg.epochs) continue;
      const double v = val_rmse(model, out.split.val);
      out.val_rmse_curve.emplace_back(e, v);
      if (v < best) {  // strict: ties keep the earlier epoch
        best = v;
        out.selected_epochs = e;
        out.selection_model = model;
      }
    }
    out.val_mse = best * best;
  }

  out.fit_data = out.split.val.size() > 0 ? concat(out.split.train, out.split.val) : out.split.train;
  TrainConfig retrain = tcfg;
  retrain.epochs = out.selected_epochs;
  out.model = train(init_model(bcfg), out.fit_data, retrain).model;
  return out;
}

VariantFit fit_variant(const BackboneModel& model, const DenseMatrix& fit_inputs, PosteriorVariant variant,
                       double noise_var, const ExperimentConfig& cfg, double ratio, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const Eigen::Index n = fit_inputs.rows();
  const Eigen::Index r = model.last_layer_feature_dim();

  std::vector<Eigen::Index> rows;
  if (variant == PosteriorVariant::RichBllSub) {
    const Eigen::Index k = std::max(r, static_cast<Eigen::Index>(std::llround(ratio * static_cast<double>(n))));
    if (k < n) rows = subsample_rows(n, {k, derive_seed(seed, kSubsampleStream)});
  }
  if (rows.empty()) {
    rows.resize(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  }

  VariantFit fit;
  if (variant == PosteriorVariant::Bll) {
    fit.transform = RichTransform::identity(r);
  } else if (cfg.sketch) {
    FeatureOptions opts;
    opts.sketch = cfg.sketch;
    fit.transform = fit_transform(extract_features(model, fit_inputs, opts, rows), cfg.ridge);
  } else {
    fit.transform = fit_transform_streamed(model, fit_inputs, cfg.ridge, rows);
  }
  const DenseMatrix phi = extract_last_layer(model, select_rows(fit_inputs, rows));
  fit.posterior = fit_posterior_selected(phi, n, fit.transform, noise_var);
  fit.build_seconds = seconds_since(t0);
  return fit;
}

BatchPrediction predict_batch(const BackboneModel& model, const PosteriorModel& posterior,
                              const DenseMatrix& inputs) {
  BatchPrediction p;
  p.mean = forward_batch(model, inputs).col(0);
  p.variance = predictive_variance(posterior, extract_last_layer(model, inputs));
  return p;
}

namespace {

double ratio_for(PosteriorVariant v, const ExperimentConfig& cfg) {
  return v == PosteriorVariant::RichBllSub ? cfg.subsample_ratio : 1.0;
}

double choose_noise(const TrainedBackbone& tb, PosteriorVariant v, const ExperimentConfig& cfg,
                    std::uint64_t seed) {
  switch (cfg.sigma2.policy) {
    case NoisePolicy::Fixed:
      return cfg.sigma2.value;
    case NoisePolicy::Auto:
      return std::max(tb.val_mse, 1e-6);
    case NoisePolicy::Grid:
      break;
  }
  if (tb.split.val.size() == 0) throw std::invalid_argument("sigma2 grid needs a validation split");
  double best_nll = std::numeric_limits<double>::infinity();
  double best = cfg.sigma2.grid.front();
  for (double s2 : cfg.sigma2.grid) {  // first grid value wins ties
    const VariantFit fit = fit_variant(tb.selection_model, tb.split.train.inputs, v, s2, cfg, ratio_for(v, cfg), seed);
    const BatchPrediction p = predict_batch(tb.selection_model, fit.posterior, tb.split.val.inputs);
    const double nll = mean_gaussian_nll(tb.split.val.targets.col(0), p.mean, (p.variance.array() + s2).matrix());
    if (nll < best_nll) {
      best_nll = nll;
      best = s2;
    }
  }
  return best;
}

std::vector<PosteriorVariant> reported_variants(PosteriorVariant configured) {
  if (configured == PosteriorVariant::Bll) return {PosteriorVariant::Bll};
  return {PosteriorVariant::Bll, configured};
}

SeedRow evaluate(const TrainedBackbone& tb, PosteriorVariant v, const ExperimentConfig& cfg, std::uint64_t seed,
                 double ratio, VariantFit* fit_out = nullptr) {
  const double s2 = choose_noise(tb, v, cfg, seed);
  VariantFit fit = fit_variant(tb.model, tb.fit_data.inputs, v, s2, cfg, ratio, seed);
  const BatchPrediction p = predict_batch(tb.model, fit.posterior, tb.split.test.inputs);
  const DenseVector y = tb.split.test.targets.col(0);
  SeedRow row;
  row.seed = seed;
  row.variant = to_string(v);
  row.nll = mean_gaussian_nll(y, p.mean, (p.variance.array() + s2).matrix());
  row.rmse = rmse(y, p.mean);
  row.runtime_s = fit.build_seconds;
  row.noise_var = s2;
  row.ratio = ratio;
  if (fit_out) *fit_out = std::move(fit);
  return row;
}

}  // namespace

MetricReport run_regression_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const LabeledDataset data = load_experiment_data(cfg);
  MetricReport report;
  report.config = to_json(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const TrainedBackbone tb = train_with_selection(data, cfg, seed);
    for (PosteriorVariant v : reported_variants(cfg.variant)) {
      report.rows.push_back(evaluate(tb, v, cfg, seed, ratio_for(v, cfg)));
    }
  }
  return report;
}

MetricReport run_ood_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  LabeledDataset id, ood;
  if (!cfg.dataset_path.empty() || !cfg.ood_path.empty()) {
    if (cfg.dataset_path.empty() || cfg.ood_path.empty()) {
      throw std::invalid_argument("ood: both dataset_path and ood_path are required");
    }
    if (csv_input_columns(cfg.dataset_path, cfg.target_column) != csv_input_columns(cfg.ood_path, cfg.target_column)) {
      throw std::invalid_argument("ood: in-distribution and OOD files have different columns");
    }
    id = load_csv(cfg.dataset_path, cfg.target_column);
    ood = load_csv(cfg.ood_path, cfg.target_column);
  } else {
    const auto& s = cfg.synthetic;
    auto pair = make_cluster_shift(s.n, s.n_ood, s.d, s.shift, s.noise_std, s.seed);
    id = std::move(pair.in_distribution);
    ood = std::move(pair.out_of_distribution);
  }

  MetricReport report;
  report.config = to_json(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const TrainedBackbone tb = train_with_selection(id, cfg, seed);
    const LabeledDataset ood_std = tb.split.stats.apply(ood);
    for (PosteriorVariant v : reported_variants(cfg.variant)) {
      VariantFit fit;
      SeedRow row = evaluate(tb, v, cfg, seed, ratio_for(v, cfg), &fit);
      const DenseVector s_id = predict_batch(tb.model, fit.posterior, tb.split.test.inputs).variance;
      const DenseVector s_ood = predict_batch(tb.model, fit.posterior, ood_std.inputs).variance;
      row.auroc = auroc(std::vector<double>(s_id.data(), s_id.data() + s_id.size()),
                        std::vector<double>(s_ood.data(), s_ood.data() + s_ood.size()));
      report.rows.push_back(row);
    }
  }
  return report;
}

MetricReport run_ablation(const ExperimentConfig& cfg, const std::vector<double>& ratios) {
  cfg.validate();
  if (ratios.empty()) throw std::invalid_argument("run_ablation: no ratios");
  const LabeledDataset data = load_experiment_data(cfg);
  MetricReport report;
  report.config = to_json(cfg);
  report.config["ablation_ratios"] = ratios;
  for (std::uint64_t seed : cfg.seeds) {
    const TrainedBackbone tb = train_with_selection(data, cfg, seed);
    for (double ratio : ratios) {
      if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("run_ablation: ratio outside (0, 1]");
      report.rows.push_back(evaluate(tb, PosteriorVariant::RichBllSub, cfg, seed, ratio));
    }
  }
  return report;
}

double Toy1dReport::seed_mean_gap_std(const std::string& variant) const {
  const auto it = std::find(variants.begin(), variants.end(), variant);
  if (it == variants.end()) throw std::invalid_argument("toy1d: unknown variant " + variant);
  const auto v = static_cast<std::size_t>(it - variants.begin());
  double total = 0.0;
  for (const auto& per_seed : gap_mean_std) total += per_seed[v];
  return total / static_cast<double>(gap_mean_std.size());
}

nlohmann::json Toy1dReport::to_json() const {
  nlohmann::json per_seed = nlohmann::json::array();
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    nlohmann::json row = {{"seed", seeds[s]}};
    for (std::size_t v = 0; v < variants.size(); ++v) row["gap_mean_std_" + variants[v]] = gap_mean_std[s][v];
    per_seed.push_back(row);
  }
  nlohmann::json agg = nlohmann::json::object();
  for (const auto& v : variants) agg[v] = seed_mean_gap_std(v);
  return {{"library_version", kVersion}, {"config", config}, {"per_seed", per_seed}, {"gap_mean_std", agg}};
}

void Toy1dReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(10);
  out << "seed,x,mean";
  for (const auto& v : variants) out << ",std_" << v;
  out << '\n';
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      out << seeds[s] << ',' << grid(i) << ',' << means[s](i);
      for (std::size_t v = 0; v < variants.size(); ++v) out << ',' << std_bands[s][v](i);
      out << '\n';
    }
  }
}

Toy1dReport run_toy1d(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& syn = cfg.synthetic;
  const LabeledDataset data = make_sinusoid_gap(syn.n, syn.gap, syn.noise_std, syn.seed);

  Toy1dReport report;
  report.config = to_json(cfg);
  report.variants = {"bll", "rich", "rich-sub", "oracle"};
  report.grid = DenseVector::LinSpaced(241, -1.5, 1.5);
  report.train_inputs = data.inputs;
  const DenseMatrix grid_inputs = report.grid;

  for (std::uint64_t seed : cfg.seeds) {
    const BackboneModel model =
        train(init_model(seeded_backbone(cfg, 1, seed)), data, seeded_train(cfg, seed)).model;
    const double s2 = cfg.sigma2.policy == NoisePolicy::Fixed ? cfg.sigma2.value : std::max(mse(model, data), 1e-6);

    std::vector<DenseVector> bands;
    for (PosteriorVariant v : {PosteriorVariant::Bll, PosteriorVariant::RichBll, PosteriorVariant::RichBllSub}) {
      const VariantFit fit = fit_variant(model, data.inputs, v, s2, cfg, cfg.subsample_ratio, seed);
      bands.push_back(predict_batch(model, fit.posterior, grid_inputs).variance.cwiseMax(0.0).cwiseSqrt());
    }
    DenseMatrix phi_train(data.size(), model.param_count());
    phi_train << extract_hidden_exact(model, data.inputs), extract_last_layer(model, data.inputs);
    DenseMatrix phi_grid(grid_inputs.rows(), model.param_count());
    phi_grid << extract_hidden_exact(model, grid_inputs), extract_last_layer(model, grid_inputs);
    bands.push_back(ntk_gp_oracle<double>(phi_train, phi_grid, s2).diagonal().cwiseMax(0.0).cwiseSqrt());

    std::vector<double> gap_std;
    for (const auto& band : bands) {
      double total = 0.0;
      int count = 0;
      for (Eigen::Index i = 0; i < report.grid.size(); ++i) {
        if (std::abs(report.grid(i)) < syn.gap) {
          total += band(i);
          ++count;
        }
      }
      gap_std.push_back(count ? total / count : 0.0);
    }
    report.seeds.push_back(seed);
    report.means.push_back(forward_batch(model, grid_inputs).col(0));
    report.std_bands.push_back(std::move(bands));
    report.gap_mean_std.push_back(std::move(gap_std));
  }
  return report;
}

std::vector<BanditRun> run_bandit_sweep(const ExperimentConfig& cfg, bool include_uniform) {
  cfg.validate();
  std::vector<BanditRun> runs;
  for (std::uint64_t seed : cfg.seeds) {
    WheelConfig wheel = cfg.bandit.wheel;
    wheel.seed = seed;
    AgentConfig agent = AgentConfig::defaults(wheel.n_actions);
    agent.variant = cfg.variant;
    agent.seed = seed;
    agent.buffer_subsample = cfg.bandit.buffer_subsample;
    agent.empirical_noise = cfg.bandit.empirical_noise;
    if (cfg.sigma2.policy == NoisePolicy::Fixed) {
      agent.noise_var = cfg.sigma2.value;
      agent.empirical_noise.enabled = false;
    }

    std::vector<std::pair<BanditPolicy, std::string>> policies = {{BanditPolicy::Thompson, to_string(cfg.variant)}};
    if (include_uniform) policies.emplace_back(BanditPolicy::Uniform, "uniform");
    for (const auto& [policy, name] : policies) {
      agent.policy = policy;
      const auto t0 = Clock::now();
      BanditRun run;
      run.seed = seed;
      run.policy = name;
      run.trace = run_bandit(wheel, agent, cfg.bandit.horizon, cfg.bandit.phases);
      run.seconds = seconds_since(t0);
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

nlohmann::json bandit_sweep_summary(const ExperimentConfig& cfg, const std::vector<BanditRun>& runs) {
  nlohmann::json per_seed = nlohmann::json::array();
  std::map<std::string, std::vector<double>> finals;
  for (const auto& r : runs) {
    per_seed.push_back({{"seed", r.seed},
                        {"policy", r.policy},
                        {"final_normalized_regret", r.trace.final_normalized()},
                        {"final_cumulative_regret", r.trace.cumulative_regret.back()},
                        {"seconds", r.seconds}});
    finals[r.policy].push_back(r.trace.final_normalized());
  }
  nlohmann::json agg = nlohmann::json::object();
  for (const auto& [policy, values] : finals) {
    const MeanSe m = mean_se(values);
    agg[policy] = {{"mean", m.mean}, {"se", m.se}, {"n", m.n}};
  }
  return {{"library_version", kVersion},
          {"config", to_json(cfg)},
          {"per_seed", per_seed},
          {"final_normalized_regret", agg}};
}

}  // namespace richbll
