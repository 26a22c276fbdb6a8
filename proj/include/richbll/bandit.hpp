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

#ifndef RICHBLL_BANDIT_HPP_
#define RICHBLL_BANDIT_HPP_

#include "richbll/backbone.hpp"
#include "richbll/gp_posterior.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

namespace richbll {

/// Wheel bandit: contexts on the unit disk, arm 0 is the safe arm, arms 1..4
/// pay the jackpot in their quadrant outside radius delta.
struct WheelConfig {
  double delta = 0.5;
  int n_actions = 5;
  double reward_noise_std = 0.01;
  double mean_low = 1.0;
  double mean_safe = 1.2;
  double mean_jackpot = 50.0;
  std::uint64_t seed = 0;

  void validate() const;
};

using Context = std::array<double, 2>;

class WheelEnv {
 public:
  explicit WheelEnv(WheelConfig config);

  const WheelConfig& config() const { return config_; }

  /// Uniform on the closed unit disk by rejection from the square.
  Context sample_context();
  std::mt19937_64& rng() { return rng_; }

 private:
  WheelConfig config_;
  std::mt19937_64 rng_;
};

/// Quadrant arm (1..4) for a context: x >= 0, y >= 0 is arm 1, counter-clockwise.
int quadrant_arm(const Context& c);

double expected_reward(const WheelConfig& cfg, const Context& c, int action);
int optimal_action(const WheelConfig& cfg, const Context& c);

struct RewardDraw {
  double reward = 0.0;
  double optimal_expected = 0.0;
};

RewardDraw wheel_reward(const WheelConfig& cfg, const Context& c, int action, std::mt19937_64& rng);

/// One Gaussian draw per action, argmax with ties to the lowest index.
int thompson_select(const std::vector<PredictiveDist>& dists, std::mt19937_64& rng);

struct Transition {
  Context context;
  int action = 0;
  double reward = 0.0;
};

using ReplayBuffer = std::vector<Transition>;

enum class BanditPolicy { Thompson, Uniform, Oracle };

struct EmpiricalNoise {
  bool enabled = true;
  std::size_t window = 200;
  double floor = 1e-4;
};

struct AgentConfig {
  BanditPolicy policy = BanditPolicy::Thompson;
  PosteriorVariant variant = PosteriorVariant::RichBll;
  BackboneConfig backbone;
  TrainConfig train;
  int rebuild_cadence = 20;             // environment steps between posterior rebuilds
  std::optional<Eigen::Index> buffer_subsample;  // k for the subsampled variant
  EmpiricalNoise empirical_noise;
  double noise_var = 1.0;  // initial / fixed observation noise
  double ridge = 0.0;
  int warm_start_pulls = 3;
  std::uint64_t seed = 0;

  /// Defaults: two hidden layers of width 100, lr 3e-3, batch 512, clip 1.
  static AgentConfig defaults(int n_actions = 5);
  void validate() const;
};

struct PhaseConfig {
  int env_steps_per_phase = 20;
  int grad_steps_per_phase = 100;
};

struct RegretTrace {
  std::vector<int> action;
  std::vector<double> reward;
  std::vector<double> optimal_expected;
  std::vector<double> cumulative_regret;
  std::vector<double> normalized_regret;
  std::vector<double> simple_regret;  // regret of the greedy posterior-mean action
  std::vector<double> noise_var;      // sigma^2 in use at each step

  double final_normalized() const { return normalized_regret.empty() ? 0.0 : normalized_regret.back(); }
  void write_csv(const std::filesystem::path& path) const;
};

/// Features fed to the backbone for (context, action): context followed by a one-hot action.
DenseVector action_input(const Context& c, int action, int n_actions);

RegretTrace run_bandit(const WheelConfig& wheel, const AgentConfig& agent, int horizon,
                       const PhaseConfig& phases = {});

nlohmann::json to_json(const WheelConfig& c);
WheelConfig wheel_config_from_json(const nlohmann::json& j);
nlohmann::json bandit_summary(const WheelConfig& wheel, const AgentConfig& agent, int horizon,
                              const PhaseConfig& phases, const RegretTrace& trace);

}  // namespace richbll

#endif  // RICHBLL_BANDIT_HPP_
