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

#ifndef RICHBLL_BACKBONE_HPP_
#define RICHBLL_BACKBONE_HPP_

#include "richbll/densela.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace richbll {

enum class Activation { ReLU, Tanh };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

struct BackboneConfig {
  Eigen::Index input_dim = 1;
  std::vector<Eigen::Index> hidden_widths{50, 50};
  Activation activation = Activation::ReLU;
  Eigen::Index output_dim = 1;
  double init_scale = 1.0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on an empty hidden stack or non-positive sizes/scale.
  void validate() const;
};

struct DenseLayer {
  DenseMatrix weight;  // fan_out x fan_in
  DenseVector bias;
};

/// Multilayer perceptron with a linear output layer.
///
/// Parameters are laid out layer by layer, each layer as its weight matrix in
/// row-major order followed by its bias. The hidden block (size m) covers every
/// layer but the last; the last-layer block for one output has r = width + 1
/// entries (weights, then bias), so its gradient is (penultimate, 1).
class BackboneModel {
 public:
  BackboneModel() = default;
  explicit BackboneModel(BackboneConfig config);

  const BackboneConfig& config() const { return config_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Eigen::Index hidden_param_count() const;      // m
  Eigen::Index last_layer_feature_dim() const;  // r
  Eigen::Index param_count() const;             // p
  Eigen::Index penultimate_width() const { return config_.hidden_widths.back(); }

  DenseVector parameters() const;
  void set_parameters(const DenseVector& flat);

  friend bool operator==(const BackboneModel& a, const BackboneModel& b);

 private:
  BackboneConfig config_;
  std::vector<DenseLayer> layers_;
};

BackboneModel init_model(const BackboneConfig& config);

struct ForwardResult {
  DenseVector output;
  DenseVector penultimate;
};

ForwardResult forward(const BackboneModel& model, const DenseVector& x);

/// Batched forward pass: inputs are N x d, result is N x output_dim.
DenseMatrix forward_batch(const BackboneModel& model, const DenseMatrix& inputs);

/// Last hidden post-activations for a batch, N x width.
DenseMatrix penultimate_batch(const BackboneModel& model, const DenseMatrix& inputs);

struct ParamGradient {
  DenseVector hidden;  // length m
  DenseVector last;    // length r
};

/// Gradient of output `output_index` w.r.t. all parameters, split into blocks.
ParamGradient param_gradient(const BackboneModel& model, const DenseVector& x,
                             Eigen::Index output_index = 0);

/// Row i is the hidden-block gradient at inputs.row(i). N x m.
DenseMatrix hidden_jacobian(const BackboneModel& model, const DenseMatrix& inputs,
                            Eigen::Index output_index = 0);

struct LabeledDataset {
  DenseMatrix inputs;   // N x d
  DenseMatrix targets;  // N x output_dim

  Eigen::Index size() const { return inputs.rows(); }
  void validate() const;
  LabeledDataset rows(const std::vector<Eigen::Index>& index) const;
};

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  Eigen::Index batch_size = 32;
  double grad_clip = 1.0;  // global L2 norm; <= 0 disables clipping
  AdamParams adam;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Adam with global-norm clipping. Holds optimizer state so online training can
/// continue across calls.
class Trainer {
 public:
  Trainer(const BackboneModel& model, TrainConfig config);

  /// One optimizer step on the given batch. Returns the batch MSE before the update.
  double step(BackboneModel& model, const DenseMatrix& inputs, const DenseMatrix& targets);

  /// One pass over `data` in shuffled mini-batches; returns the mean batch loss.
  double epoch(BackboneModel& model, const LabeledDataset& data);

  /// `steps` optimizer steps on random mini-batches drawn without replacement.
  double steps(BackboneModel& model, const LabeledDataset& data, int steps);

 private:
  TrainConfig config_;
  DenseVector m1_;
  DenseVector m2_;
  long long t_ = 0;
  std::mt19937_64 rng_;
};

struct TrainResult {
  BackboneModel model;
  std::vector<double> loss_trace;  // mean loss per epoch
};

TrainResult train(BackboneModel model, const LabeledDataset& data, const TrainConfig& config);

/// Mean squared error of the network on a dataset.
double mse(const BackboneModel& model, const LabeledDataset& data);

nlohmann::json to_json(const BackboneConfig& config);
BackboneConfig backbone_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});

nlohmann::json to_json(const BackboneModel& model);
BackboneModel backbone_model_from_json(const nlohmann::json& j);
void save_checkpoint(const BackboneModel& model, const std::filesystem::path& path);
BackboneModel load_checkpoint(const std::filesystem::path& path);

}  // namespace richbll

#endif  // RICHBLL_BACKBONE_HPP_
