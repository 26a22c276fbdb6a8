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


// Command-line driver for the richbll experiments and the verification suite.

#include "richbll/experiments.hpp"
#include "richbll/ntk_features.hpp"
#include "richbll/verify_suite.hpp"
#include "richbll/version.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace richbll;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "richbll_out";
  std::optional<std::string> variant;
  std::optional<double> ratio;
  std::optional<Eigen::Index> sketch_q;
  std::optional<std::string> sigma2;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config mirroring ExperimentConfig field names")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Single seed (overrides the config)");
  cmd->add_option("--seeds", f.seeds, "Comma-separated seeds (overrides the config)")->delimiter(',');
  cmd->add_option("--out", f.out_dir, "Output directory");
  cmd->add_option("--variant", f.variant, "Posterior variant")->check(CLI::IsMember({"bll", "rich", "rich-sub"}));
  cmd->add_option("--ratio", f.ratio, "Subsample ratio for rich-sub, in (0, 1]");
  cmd->add_option("--sketch-q", f.sketch_q, "Sketch the hidden block to q columns");
  cmd->add_option("--sigma2", f.sigma2, "Observation noise: auto, grid, or a positive value");
}

ExperimentConfig build_config(ExperimentKind kind, const CommonFlags& f) {
  ExperimentConfig cfg = ExperimentConfig::defaults(kind);
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    cfg = experiment_config_from_json(nlohmann::json::parse(in), kind);
  }
  if (!f.seeds.empty()) cfg.seeds = f.seeds;
  if (f.seed) cfg.seeds = {*f.seed};
  if (f.variant) cfg.variant = posterior_variant_from_string(*f.variant);
  if (f.ratio) cfg.subsample_ratio = *f.ratio;
  if (f.sketch_q) {
    SketchConfig sk;
    sk.q = *f.sketch_q;
    sk.seed = cfg.seeds.front();
    cfg.sketch = sk;
  }
  if (f.sigma2) cfg.sigma2 = NoiseSelection::parse(*f.sigma2);
  cfg.output_dir = f.out_dir;
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  return cfg;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void print_aggregate(const MetricReport& report, const char* metric) {
  for (const auto& v : report.variants()) {
    const MeanSe m = report.aggregate(v, metric);
    if (m.n > 0) std::cout << "  " << v << " " << metric << " " << m.mean << " +- " << m.se << '\n';
  }
}

int cmd_regress(const CommonFlags& f) {
  const ExperimentConfig cfg = build_config(ExperimentKind::Regress, f);
  const MetricReport report = run_regression_experiment(cfg);
  nlohmann::json j = report.to_json();
  if (!cfg.profile.empty()) j["distance_to_target"] = distance_to_target(report, cfg.profile);
  write_json(cfg.output_dir / "regress.json", j);
  report.write_csv(cfg.output_dir / "regress.csv");
  std::cout << "regress:\n";
  print_aggregate(report, "nll");
  print_aggregate(report, "rmse");
  return 0;
}

int cmd_ood(const CommonFlags& f) {
  const ExperimentConfig cfg = build_config(ExperimentKind::Ood, f);
  const MetricReport report = run_ood_experiment(cfg);
  write_json(cfg.output_dir / "ood.json", report.to_json());
  report.write_csv(cfg.output_dir / "ood.csv");
  std::cout << "ood:\n";
  print_aggregate(report, "auroc");
  return 0;
}

int cmd_ablate(const CommonFlags& f) {
  const ExperimentConfig cfg = build_config(ExperimentKind::Ablate, f);
  const std::vector<double> ratios = f.ratio ? std::vector<double>{*f.ratio} : cfg.ablation_ratios;
  const MetricReport report = run_ablation(cfg, ratios);
  write_json(cfg.output_dir / "ablate.json", report.to_json());
  report.write_csv(cfg.output_dir / "ablate.csv");
  std::cout << "ablate: " << report.rows.size() << " rows written\n";
  return 0;
}

int cmd_toy1d(const CommonFlags& f) {
  const ExperimentConfig cfg = build_config(ExperimentKind::Toy1d, f);
  const Toy1dReport report = run_toy1d(cfg);
  write_json(cfg.output_dir / "toy1d.json", report.to_json());
  report.write_csv(cfg.output_dir / "toy1d_bands.csv");
  std::cout << "toy1d gap mean std:\n";
  for (const auto& v : report.variants) std::cout << "  " << v << " " << report.seed_mean_gap_std(v) << '\n';
  return 0;
}

int cmd_bandit(const CommonFlags& f) {
  const ExperimentConfig cfg = build_config(ExperimentKind::Bandit, f);
  const std::vector<BanditRun> runs = run_bandit_sweep(cfg, true);
  const nlohmann::json summary = bandit_sweep_summary(cfg, runs);
  write_json(cfg.output_dir / "bandit.json", summary);
  for (const auto& r : runs) {
    r.trace.write_csv(cfg.output_dir / ("bandit_" + r.policy + "_seed" + std::to_string(r.seed) + ".csv"));
  }
  std::cout << "bandit final normalized regret:\n";
  for (const auto& [policy, agg] : summary["final_normalized_regret"].items())
    std::cout << "  " << policy << " " << agg["mean"].get<double>() << " +- " << agg["se"].get<double>() << '\n';
  return 0;
}

int cmd_verify(const CommonFlags& f) {
  SuiteOptions opts;
  if (f.seed) opts.seed = *f.seed;
  fs::create_directories(f.out_dir);
  const SuiteReport report = run_verify_suite(opts);
  write_json(fs::path(f.out_dir) / "verify.json", report.to_json());
  std::ofstream csv(fs::path(f.out_dir) / "verify.csv");
  csv << "gate,hard,passed,seconds,summary\n";
  for (const auto& g : report.gates) {
    csv << g.name << ',' << g.hard << ',' << g.passed << ',' << g.seconds << ",\"" << g.summary << "\"\n";
    std::cout << (g.passed ? "PASS " : "FAIL ") << (g.hard ? "" : "(info) ") << g.name << ": " << g.summary << '\n';
  }
  const bool ok = report.hard_gates_passed();
  std::cout << (ok ? "all hard gates passed\n" : "hard gate failure\n");
  return ok ? 0 : 1;
}

// Trains the backbone for each seed and caches its features next to a checkpoint.
int cmd_features(const CommonFlags& f) {
  const ExperimentConfig cfg = build_config(ExperimentKind::Regress, f);
  const LabeledDataset data = load_experiment_data(cfg);
  nlohmann::json summary = {{"library_version", kVersion}, {"config", to_json(cfg)}, {"bundles", nlohmann::json::array()}};
  for (std::uint64_t seed : cfg.seeds) {
    const TrainedBackbone tb = train_with_selection(data, cfg, seed);
    FeatureOptions opts;
    opts.sketch = cfg.sketch;
    const FeatureBundle bundle = extract_features(tb.model, tb.fit_data.inputs, opts);
    const std::string stem = "seed" + std::to_string(seed);
    save_bundle(bundle, cfg.output_dir / (stem + ".bundle"));
    save_checkpoint(tb.model, cfg.output_dir / (stem + "_model.json"));
    summary["bundles"].push_back({{"seed", seed},
                                  {"rows", bundle.rows()},
                                  {"r", bundle.phi_r.cols()},
                                  {"hidden_cols", bundle.hidden_matrix().cols()},
                                  {"sketched", bundle.is_sketched()},
                                  {"selected_epochs", tb.selected_epochs}});
    std::cout << "seed " << seed << ": " << bundle.rows() << " rows, hidden " << bundle.hidden_matrix().cols()
              << " columns\n";
  }
  write_json(cfg.output_dir / "features.json", summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"richbll: rich last-layer uncertainty experiments"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const CommonFlags&);
  };
  const std::vector<Entry> entries{
      {"regress", "Tabular regression NLL / RMSE for BLL and the chosen variant", cmd_regress},
      {"ood", "OOD detection AUROC from predictive variance", cmd_ood},
      {"bandit", "Wheel bandit with Thompson sampling", cmd_bandit},
      {"ablate", "Subsample-ratio ablation", cmd_ablate},
      {"toy1d", "1D sinusoid-with-gap uncertainty bands", cmd_toy1d},
      {"verify", "Numerical verification suite; nonzero exit on a hard-gate failure", cmd_verify},
      {"features", "Train backbones and cache feature bundles", cmd_features},
  };
  std::vector<CommonFlags> flags(entries.size());
  std::vector<CLI::App*> cmds;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    cmds.push_back(app.add_subcommand(entries[i].name, entries[i].help));
    add_common(cmds.back(), flags[i]);
  }

  CLI11_PARSE(app, argc, argv);
  try {
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (cmds[i]->parsed()) return entries[i].run(flags[i]);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
