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

#include "doctest.h"
#include "richbll/data.hpp"
#include "richbll/experiments.hpp"
#include "richbll/metrics.hpp"
#include "test_util.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace richbll;

namespace {

std::filesystem::path write_fixture(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / ("richbll_test_" + name + ".csv");
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST_CASE("load_csv") {
  SUBCASE("target column is split out, inputs keep their order") {
    const auto p = write_fixture("ok", "a,y,b\n1,10,2\n3,20,4\n5,30,6\n");
    const LabeledDataset d = load_csv(p, "y");
    REQUIRE(d.inputs.rows() == 3);
    REQUIRE(d.inputs.cols() == 2);
    CHECK(d.inputs(1, 0) == 3.0);
    CHECK(d.inputs(2, 1) == 6.0);
    CHECK(d.targets(0, 0) == 10.0);
    CHECK(csv_input_columns(p, "y") == std::vector<std::string>{"a", "b"});
  }
  SUBCASE("missing target lists the columns") {
    const auto p = write_fixture("notarget", "a,b\n1,2\n");
    try {
      load_csv(p, "y");
      FAIL("expected CsvError");
    } catch (const CsvError& e) {
      CHECK(std::string(e.what()).find("a, b") != std::string::npos);
    }
  }
  SUBCASE("non-numeric rows are reported by index") {
    const auto p = write_fixture("bad", "a,y\n1,2\n3,x\n5,6\n7,\n");
    try {
      load_csv(p, "y");
      FAIL("expected CsvError");
    } catch (const CsvError& e) {
      const std::string msg = e.what();
      CHECK(msg.find('1') != std::string::npos);
      CHECK(msg.find('3') != std::string::npos);
    }
  }
  SUBCASE("header only is an error") {
    CHECK_THROWS_AS(load_csv(write_fixture("empty", "a,y\n"), "y"), CsvError);
  }
}

TEST_CASE("split_standardize") {
  const LabeledDataset d = make_linear(100, 3, 0.1, 4);
  const Split s = split_standardize(d, {}, 9);
  CHECK(s.train.size() == 72);
  CHECK(s.val.size() == 18);
  CHECK(s.test.size() == 10);

  // Train inputs standardized with their own (population) statistics.
  const DenseVector mean = s.train.inputs.colwise().mean();
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-12);
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double var = (s.train.inputs.col(j).array() - mean(j)).square().mean();
    CHECK(var == doctest::Approx(1.0));
  }
  CHECK(std::abs(s.train.targets.mean()) < 1e-12);

  SUBCASE("same seed, same split") {
    const Split again = split_standardize(d, {}, 9);
    CHECK(again.test_index == s.test_index);
    CHECK(again.train.inputs == s.train.inputs);
  }
  SUBCASE("constant columns are flagged and left unscaled") {
    LabeledDataset c = d;
    c.inputs.col(1).setConstant(2.5);
    const Split cs = split_standardize(c, {}, 1);
    CHECK(cs.stats.any_constant());
    CHECK(cs.stats.input_std(1) == 1.0);
    CHECK(cs.train.inputs.col(1).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("bad fractions are rejected") {
    CHECK_THROWS_AS(split_standardize(d, {0.5, 0.2, 0.2}, 0), std::invalid_argument);
  }
}

TEST_CASE("synthetic generators") {
  const LabeledDataset g = make_sinusoid_gap(200, 0.35, 0.0, 2);
  CHECK(g.inputs.cwiseAbs().minCoeff() >= 0.35);
  CHECK(g.inputs.cwiseAbs().maxCoeff() <= 1.0);
  for (Eigen::Index i = 0; i < g.size(); ++i) CHECK(g.targets(i, 0) == doctest::Approx(std::sin(3.0 * g.inputs(i, 0))));

  const ClusterShiftData cs = make_cluster_shift(150, 60, 4, 4.0, 0.1, 3);
  CHECK(cs.in_distribution.size() == 150);
  CHECK(cs.out_of_distribution.size() == 60);
  const double gap = (cs.out_of_distribution.inputs.colwise().mean() - cs.in_distribution.inputs.colwise().mean()).norm();
  CHECK(gap > 2.0);
}

TEST_CASE("metrics") {
  SUBCASE("gaussian nll") {
    CHECK(gaussian_nll(0.0, {0.0, 1.0}) == doctest::Approx(0.5 * std::log(2.0 * std::numbers::pi)));
    CHECK(gaussian_nll(2.0, {0.0, 4.0}) == doctest::Approx(0.5 * std::log(8.0 * std::numbers::pi) + 0.5));
    CHECK_THROWS(gaussian_nll(0.0, {0.0, 0.0}));
  }
  SUBCASE("rmse") {
    DenseVector y(2), m(2);
    y << 1.0, 3.0;
    m << 0.0, 0.0;
    CHECK(rmse(y, m) == doctest::Approx(std::sqrt(5.0)));
  }
  SUBCASE("auroc") {
    CHECK(auroc({1.0, 2.0}, {3.0, 4.0}) == 1.0);
    CHECK(auroc({3.0, 4.0}, {1.0, 2.0}) == 0.0);
    CHECK(auroc({1.0, 2.0}, {1.0, 3.0}) == 0.625);
    CHECK(auroc({1.0}, {1.0}) == 0.5);
  }
  SUBCASE("mean and standard error") {
    const MeanSe m = mean_se({1.0, 2.0, 3.0, 4.0});
    CHECK(m.mean == 2.5);
    CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
    CHECK(mean_se({7.0}).se == 0.0);
  }
  SUBCASE("report aggregation") {
    MetricReport r;
    r.rows.push_back({0, "bll", 1.0, 0.5, std::nullopt, 0.1, 0.2, 1.0});
    r.rows.push_back({1, "bll", 3.0, 0.7, std::nullopt, 0.1, 0.2, 1.0});
    r.rows.push_back({0, "rich", 0.5, 0.5, 0.9, 0.2, 0.2, 1.0});
    CHECK(r.variants() == std::vector<std::string>{"bll", "rich"});
    CHECK(r.aggregate("bll", "nll").mean == 2.0);
    CHECK(r.aggregate("bll", "auroc").n == 0);
    const auto j = r.to_json();
    CHECK(j["aggregate"]["rich"]["auroc"]["mean"] == 0.9);
    CHECK(j["per_seed"].size() == 3);
  }
}

TEST_CASE("experiment configuration") {
  SUBCASE("noise selection parsing") {
    CHECK(NoiseSelection::parse("auto").policy == NoisePolicy::Auto);
    CHECK(NoiseSelection::parse("grid").policy == NoisePolicy::Grid);
    const NoiseSelection f = NoiseSelection::parse("0.25");
    CHECK(f.policy == NoisePolicy::Fixed);
    CHECK(f.value == 0.25);
    CHECK_THROWS(NoiseSelection::parse("-1"));
    CHECK_THROWS(NoiseSelection::parse("sometimes"));
  }
  SUBCASE("json round trip") {
    ExperimentConfig c = ExperimentConfig::defaults(ExperimentKind::Regress);
    c.seeds = {3, 4};
    c.variant = PosteriorVariant::RichBllSub;
    c.subsample_ratio = 0.6;
    c.sigma2 = NoiseSelection::parse("0.05");
    const ExperimentConfig back = experiment_config_from_json(to_json(c), ExperimentKind::Regress);
    CHECK(back.seeds == c.seeds);
    CHECK(back.variant == c.variant);
    CHECK(back.subsample_ratio == 0.6);
    CHECK(back.sigma2.policy == NoisePolicy::Fixed);
    CHECK(back.sigma2.value == 0.05);
    CHECK(back.backbone.hidden_widths == c.backbone.hidden_widths);
  }
  SUBCASE("dataset profiles set epochs unless given") {
    const ExperimentConfig c = experiment_config_from_json({{"profile", "power"}}, ExperimentKind::Regress);
    CHECK(c.train.batch_size == 256);
    const ExperimentConfig d =
        experiment_config_from_json({{"profile", "power"}, {"train", {{"epochs", 7}}}}, ExperimentKind::Regress);
    CHECK(d.train.epochs == 7);
  }
  SUBCASE("variant names") {
    CHECK(posterior_variant_from_string("bll") == PosteriorVariant::Bll);
    CHECK(posterior_variant_from_string("rich") == PosteriorVariant::RichBll);
    CHECK(posterior_variant_from_string("rich-sub") == PosteriorVariant::RichBllSub);
    CHECK_THROWS(posterior_variant_from_string("full"));
  }
}

TEST_CASE("fit_variant") {
  BackboneConfig bc;
  bc.input_dim = 3;
  bc.hidden_widths = {10, 10};
  bc.seed = 2;
  const BackboneModel model = init_model(bc);
  const DenseMatrix x = richbll::testing::random_matrix(80, 3, 5);
  const DenseMatrix x_test = richbll::testing::random_matrix(12, 3, 6);
  const ExperimentConfig cfg = ExperimentConfig::defaults(ExperimentKind::Regress);

  const VariantFit rich = fit_variant(model, x, PosteriorVariant::RichBll, 0.1, cfg, 1.0, 0);
  const VariantFit bll = fit_variant(model, x, PosteriorVariant::Bll, 0.1, cfg, 1.0, 0);
  const BatchPrediction p_rich = predict_batch(model, rich.posterior, x_test);
  const BatchPrediction p_bll = predict_batch(model, bll.posterior, x_test);

  SUBCASE("ratio 1 subsampling reproduces the full posterior") {
    const VariantFit sub = fit_variant(model, x, PosteriorVariant::RichBllSub, 0.1, cfg, 1.0, 0);
    const BatchPrediction p = predict_batch(model, sub.posterior, x_test);
    CHECK((p.variance - p_rich.variance).cwiseAbs().maxCoeff() < 1e-10 * p_rich.variance.maxCoeff());
  }
  SUBCASE("rich variance dominates last-layer variance") {
    CHECK(((p_rich.variance - p_bll.variance).array() >= -1e-10).all());
    CHECK(p_rich.mean == p_bll.mean);
  }
  SUBCASE("small ratios still use at least r rows") {
    const VariantFit sub = fit_variant(model, x, PosteriorVariant::RichBllSub, 0.1, cfg, 0.01, 0);
    CHECK(sub.posterior.k_used == model.last_layer_feature_dim());
  }
}

TEST_CASE("fixed noise survives a json round trip at small values") {
  ExperimentConfig c = ExperimentConfig::defaults(ExperimentKind::Regress);
  c.sigma2 = NoiseSelection::parse("1e-7");
  CHECK(experiment_config_from_json(to_json(c), ExperimentKind::Regress).sigma2.value == 1e-7);
  CHECK(experiment_config_from_json({{"sigma2", 2.5e-8}}, ExperimentKind::Regress).sigma2.value == 2.5e-8);
}
