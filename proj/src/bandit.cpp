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

#include "richbll/bandit.hpp"

#include "richbll/ntk_features.hpp"
#include "richbll/seed.hpp"
#include "richbll/transform.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace richbll {

namespace {

constexpr std::uint64_t kRewardStream = 1;
constexpr std::uint64_t kPolicyStream = 2;
constexpr std::uint64_t kSubsampleStream = 3;

}  // namespace

void WheelConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("WheelConfig: delta must be in (0, 1)");
  if (n_actions != 5) throw std::invalid_argument("WheelConfig: the wheel has exactly 5 actions");
  if (!(reward_noise_std >= 0.0)) throw std::invalid_argument("WheelConfig: reward_noise_std must be >= 0");
}

WheelEnv::WheelEnv(WheelConfig config) : config_(config), rng_(config.seed) { config_.validate(); }

Context WheelEnv::sample_context() {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    const Context c{u(rng_), u(rng_)};
    if (c[0] * c[0] + c[1] * c[1] <= 1.0) return c;
  }
}

int quadrant_arm(const Context& c) {
  if (c[0] >= 0.0) return c[1] >= 0.0 ? 1 : 4;
  return c[1] >= 0.0 ? 2 : 3;
}

double expected_reward(const WheelConfig& cfg, const Context& c, int action) {
  if (action < 0 || action >= cfg.n_actions) throw std::out_of_range("expected_reward: bad action");
  if (action == 0) return cfg.mean_safe;
  const bool outside = std::hypot(c[0], c[1]) > cfg.delta;
  if (outside && action == quadrant_arm(c)) return cfg.mean_jackpot;
  return cfg.mean_low;
}

int optimal_action(const WheelConfig& cfg, const Context& c) {
  int best = 0;
  for (int a = 1; a < cfg.n_actions; ++a)
    if (expected_reward(cfg, c, a) > expected_reward(cfg, c, best)) best = a;
  return best;
}

RewardDraw wheel_reward(const WheelConfig& cfg, const Context& c, int action, std::mt19937_64& rng) {
  RewardDraw d;
  d.reward = expected_reward(cfg, c, action);
  if (cfg.reward_noise_std > 0.0) d.reward += std::normal_distribution<double>(0.0, cfg.reward_noise_std)(rng);
  d.optimal_expected = expected_reward(cfg, c, optimal_action(cfg, c));
  return d;
}

int thompson_select(const std::vector<PredictiveDist>& dists, std::mt19937_64& rng) {
  if (dists.empty()) throw std::invalid_argument("thompson_select: no actions");
  std::normal_distribution<double> z(0.0, 1.0);
  int best = 0;
  double best_draw = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < dists.size(); ++a) {
    const double draw = dists[a].mean + std::sqrt(std::max(dists[a].variance, 0.0)) * z(rng);
    if (draw > best_draw) {
      best_draw = draw;
      best = static_cast<int>(a);
    }
  }
  return best;
}

DenseVector action_input(const Context& c, int action, int n_actions) {
  DenseVector x = DenseVector::Zero(2 + n_actions);
  x(0) = c[0];
  x(1) = c[1];
  x(2 + action) = 1.0;
  return x;
}

AgentConfig AgentConfig::defaults(int n_actions) {
  AgentConfig a;
  a.backbone.input_dim = 2 + n_actions;
  a.backbone.hidden_widths = {100, 100};
  a.train.learning_rate = 3e-3;
  a.train.batch_size = 512;
  a.train.grad_clip = 1.0;
  a.ridge = 1e-3;
  return a;
}

void AgentConfig::validate() const {
  backbone.validate();
  train.validate();
  if (rebuild_cadence < 1) throw std::invalid_argument("AgentConfig: rebuild_cadence must be >= 1");
  if (empirical_noise.window < 1) throw std::invalid_argument("AgentConfig: noise window must be >= 1");
  if (!(noise_var > 0.0)) throw std::invalid_argument("AgentConfig: noise_var must be > 0");
  if (warm_start_pulls < 0) throw std::invalid_argument("AgentConfig: warm_start_pulls must be >= 0");
  if (buffer_subsample && *buffer_subsample < 1) throw std::invalid_argument("AgentConfig: buffer_subsample must be >= 1");
}

void RegretTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(10);
  out << "step,action,reward,cum_regret,norm_regret\n";
  for (std::size_t t = 0; t < action.size(); ++t) {
    out << t << ',' << action[t] << ',' << reward[t] << ',' << cumulative_regret[t] << ','
        << normalized_regret[t] << '\n';
  }
}

namespace {

class Agent {
 public:
  Agent(const WheelConfig& wheel, const AgentConfig& cfg)
      : wheel_(wheel),
        cfg_(cfg),
        model_(init_model(cfg.backbone)),
        trainer_(model_, cfg.train),
        rng_(derive_seed(cfg.seed, kPolicyStream)),
        noise_var_(cfg.noise_var) {
    const Eigen::Index r = model_.last_layer_feature_dim();
    PosteriorOptions prior;
    prior.allow_empty = true;
    posterior_ = fit_posterior(DenseMatrix(0, r), RichTransform::identity(r), noise_var_, std::nullopt, prior);
  }

  DenseMatrix inputs_for(const Context& c) const {
    DenseMatrix x(wheel_.n_actions, 2 + wheel_.n_actions);
    for (int a = 0; a < wheel_.n_actions; ++a) x.row(a) = action_input(c, a, wheel_.n_actions).transpose();
    return x;
  }

  std::vector<PredictiveDist> predictive(const Context& c) const {
    const DenseMatrix x = inputs_for(c);
    const DenseMatrix mean = forward_batch(model_, x);
    const DenseVector var = predictive_variance(posterior_, extract_last_layer(model_, x));
    std::vector<PredictiveDist> out(static_cast<std::size_t>(wheel_.n_actions));
    for (int a = 0; a < wheel_.n_actions; ++a) out[static_cast<std::size_t>(a)] = {mean(a, 0), var(a)};
    return out;
  }

  std::mt19937_64& rng() { return rng_; }
  double noise_var() const { return noise_var_; }

  void observe(double predicted, double reward) {
    if (!cfg_.empirical_noise.enabled) return;
    const double err = reward - predicted;
    window_.push_back(err * err);
    if (window_.size() > cfg_.empirical_noise.window) window_.pop_front();
    const double mean = std::accumulate(window_.begin(), window_.end(), 0.0) / static_cast<double>(window_.size());
    noise_var_ = std::max(cfg_.empirical_noise.floor, mean);
  }

  void train(const ReplayBuffer& buffer, int grad_steps) {
    if (grad_steps <= 0 || buffer.empty()) return;
    trainer_.steps(model_, dataset(buffer), grad_steps);
  }

  void rebuild(const ReplayBuffer& buffer, std::uint64_t epoch) {
    const Eigen::Index n = static_cast<Eigen::Index>(buffer.size());
    const Eigen::Index r = model_.last_layer_feature_dim();
    const DenseMatrix x = dataset(buffer).inputs;

    std::vector<Eigen::Index> rows;
    if (cfg_.buffer_subsample) {
      const Eigen::Index k = std::max(*cfg_.buffer_subsample, r);
      if (n > k) rows = subsample_rows(n, {k, derive_seed(cfg_.seed, kSubsampleStream + 16 * epoch)});
    }
    if (rows.empty()) {
      rows.resize(static_cast<std::size_t>(n));
      std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    }
    DenseMatrix x_sel(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) x_sel.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);

    const RichTransform transform = cfg_.variant == PosteriorVariant::Bll
                                        ? RichTransform::identity(r)
                                        : fit_transform_streamed(model_, x, cfg_.ridge, rows);
    posterior_ = fit_posterior_selected(extract_last_layer(model_, x_sel), n, transform, noise_var_);
  }

 private:
  LabeledDataset dataset(const ReplayBuffer& buffer) const {
    LabeledDataset d;
    d.inputs.resize(static_cast<Eigen::Index>(buffer.size()), 2 + wheel_.n_actions);
    d.targets.resize(static_cast<Eigen::Index>(buffer.size()), 1);
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      d.inputs.row(row) = action_input(buffer[i].context, buffer[i].action, wheel_.n_actions).transpose();
      d.targets(row, 0) = buffer[i].reward;
    }
    return d;
  }

  WheelConfig wheel_;
  AgentConfig cfg_;
  BackboneModel model_;
  Trainer trainer_;
  std::mt19937_64 rng_;
  PosteriorModel posterior_;
  std::deque<double> window_;
  double noise_var_;
};

int argmax_mean(const std::vector<PredictiveDist>& d) {
  int best = 0;
  for (std::size_t a = 1; a < d.size(); ++a)
    if (d[a].mean > d[static_cast<std::size_t>(best)].mean) best = static_cast<int>(a);
  return best;
}

}  // namespace

RegretTrace run_bandit(const WheelConfig& wheel, const AgentConfig& agent_cfg, int horizon,
                       const PhaseConfig& phases) {
  wheel.validate();
  AgentConfig cfg = agent_cfg;
  cfg.backbone.input_dim = 2 + wheel.n_actions;
  cfg.validate();
  const int warm = cfg.warm_start_pulls * wheel.n_actions;
  if (horizon < warm) throw std::invalid_argument("run_bandit: horizon shorter than the warm start");
  if (phases.env_steps_per_phase < 1 || phases.grad_steps_per_phase < 0) {
    throw std::invalid_argument("run_bandit: bad phase configuration");
  }

  WheelEnv env(wheel);
  std::mt19937_64 reward_rng(derive_seed(wheel.seed, kRewardStream));
  Agent agent(wheel, cfg);
  const bool learning = cfg.policy == BanditPolicy::Thompson;

  RegretTrace trace;
  ReplayBuffer buffer;
  double cum_regret = 0.0;
  double cum_uniform = 0.0;
  std::uint64_t rebuilds = 0;

  for (int t = 0; t < horizon; ++t) {
    const Context c = env.sample_context();
    const auto dists = agent.predictive(c);

    int action = 0;
    switch (cfg.policy) {
      case BanditPolicy::Uniform:
        action = std::uniform_int_distribution<int>(0, wheel.n_actions - 1)(agent.rng());
        break;
      case BanditPolicy::Oracle:
        action = optimal_action(wheel, c);
        break;
      case BanditPolicy::Thompson:
        action = t < warm ? t % wheel.n_actions : thompson_select(dists, agent.rng());
        break;
    }

    const RewardDraw draw = wheel_reward(wheel, c, action, reward_rng);
    double mean_reward = 0.0;
    for (int a = 0; a < wheel.n_actions; ++a) mean_reward += expected_reward(wheel, c, a);
    mean_reward /= wheel.n_actions;

    cum_regret += draw.optimal_expected - expected_reward(wheel, c, action);
    cum_uniform += draw.optimal_expected - mean_reward;

    trace.action.push_back(action);
    trace.reward.push_back(draw.reward);
    trace.optimal_expected.push_back(draw.optimal_expected);
    trace.cumulative_regret.push_back(cum_regret);
    trace.normalized_regret.push_back(cum_regret / cum_uniform);
    trace.simple_regret.push_back(draw.optimal_expected - expected_reward(wheel, c, argmax_mean(dists)));
    trace.noise_var.push_back(agent.noise_var());

    agent.observe(dists[static_cast<std::size_t>(action)].mean, draw.reward);
    buffer.push_back({c, action, draw.reward});

    if (!learning) continue;
    const int done = t + 1;
    if (done % phases.env_steps_per_phase == 0) agent.train(buffer, phases.grad_steps_per_phase);
    if (done % cfg.rebuild_cadence == 0) agent.rebuild(buffer, rebuilds++);
  }
  return trace;
}

nlohmann::json to_json(const WheelConfig& c) {
  return {{"delta", c.delta},
          {"n_actions", c.n_actions},
          {"reward_noise_std", c.reward_noise_std},
          {"mean_low", c.mean_low},
          {"mean_safe", c.mean_safe},
          {"mean_jackpot", c.mean_jackpot},
          {"seed", c.seed}};
}

WheelConfig wheel_config_from_json(const nlohmann::json& j) {
  WheelConfig c;
  c.delta = j.value("delta", c.delta);
  c.n_actions = j.value("n_actions", c.n_actions);
  c.reward_noise_std = j.value("reward_noise_std", c.reward_noise_std);
  c.mean_low = j.value("mean_low", c.mean_low);
  c.mean_safe = j.value("mean_safe", c.mean_safe);
  c.mean_jackpot = j.value("mean_jackpot", c.mean_jackpot);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

namespace {

std::string policy_name(BanditPolicy p) {
  switch (p) {
    case BanditPolicy::Thompson:
      return "thompson";
    case BanditPolicy::Uniform:
      return "uniform";
    case BanditPolicy::Oracle:
      return "oracle";
  }
  return "unknown";
}

}  // namespace

nlohmann::json bandit_summary(const WheelConfig& wheel, const AgentConfig& agent, int horizon,
                              const PhaseConfig& phases, const RegretTrace& trace) {
  const std::size_t n = trace.simple_regret.size();
  const std::size_t tail = std::min<std::size_t>(n, 200);
  double simple = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) simple += trace.simple_regret[i];
  if (tail > 0) simple /= static_cast<double>(tail);

  nlohmann::json a = {{"policy", policy_name(agent.policy)},
                      {"variant", to_string(agent.variant)},
                      {"backbone", to_json(agent.backbone)},
                      {"train", to_json(agent.train)},
                      {"rebuild_cadence", agent.rebuild_cadence},
                      {"empirical_noise",
                       {{"enabled", agent.empirical_noise.enabled},
                        {"window", agent.empirical_noise.window},
                        {"floor", agent.empirical_noise.floor}}},
                      {"noise_var", agent.noise_var},
                      {"ridge", agent.ridge},
                      {"warm_start_pulls", agent.warm_start_pulls},
                      {"seed", agent.seed}};
  a["buffer_subsample"] = agent.buffer_subsample ? nlohmann::json(*agent.buffer_subsample) : nlohmann::json();
  return {{"wheel", to_json(wheel)},
          {"agent", a},
          {"horizon", horizon},
          {"phases", {{"env_steps_per_phase", phases.env_steps_per_phase},
                      {"grad_steps_per_phase", phases.grad_steps_per_phase}}},
          {"final_cumulative_regret", trace.cumulative_regret.empty() ? 0.0 : trace.cumulative_regret.back()},
          {"final_normalized_regret", trace.final_normalized()},
          {"mean_simple_regret_last_200", simple}};
}

}  // namespace richbll
