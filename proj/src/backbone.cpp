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

#include "richbll/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace richbll {

std::string to_string(Activation act) { return act == Activation::ReLU ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu" || name == "ReLU") return Activation::ReLU;
  if (name == "tanh" || name == "Tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

void BackboneConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("BackboneConfig: input_dim must be >= 1");
  if (hidden_widths.empty()) {
    throw std::invalid_argument("BackboneConfig: at least one hidden layer is required");
  }
  for (auto w : hidden_widths) {
    if (w < 1) throw std::invalid_argument("BackboneConfig: hidden widths must be >= 1");
  }
  if (output_dim < 1) throw std::invalid_argument("BackboneConfig: output_dim must be >= 1");
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) {
    throw std::invalid_argument("BackboneConfig: init_scale must be > 0");
  }
}

BackboneModel::BackboneModel(BackboneConfig config) : config_(std::move(config)) {
  config_.validate();
  Eigen::Index fan_in = config_.input_dim;
  for (auto width : config_.hidden_widths) {
    layers_.push_back({DenseMatrix::Zero(width, fan_in), DenseVector::Zero(width)});
    fan_in = width;
  }
  layers_.push_back(
      {DenseMatrix::Zero(config_.output_dim, fan_in), DenseVector::Zero(config_.output_dim)});
}

Eigen::Index BackboneModel::hidden_param_count() const {
  Eigen::Index m = 0;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    m += layers_[l].weight.size() + layers_[l].bias.size();
  }
  return m;
}

Eigen::Index BackboneModel::last_layer_feature_dim() const { return penultimate_width() + 1; }

Eigen::Index BackboneModel::param_count() const {
  Eigen::Index p = 0;
  for (const auto& layer : layers_) p += layer.weight.size() + layer.bias.size();
  return p;
}

namespace {

// Weights are flattened row-major so that entry (o, i) sits at o * fan_in + i.
void append_row_major(const DenseMatrix& w, DenseVector& out, Eigen::Index& pos) {
  for (Eigen::Index o = 0; o < w.rows(); ++o) {
    out.segment(pos, w.cols()) = w.row(o).transpose();
    pos += w.cols();
  }
}

void read_row_major(DenseMatrix& w, const DenseVector& in, Eigen::Index& pos) {
  for (Eigen::Index o = 0; o < w.rows(); ++o) {
    w.row(o) = in.segment(pos, w.cols()).transpose();
    pos += w.cols();
  }
}

}  // namespace

DenseVector BackboneModel::parameters() const {
  DenseVector flat(param_count());
  Eigen::Index pos = 0;
  for (const auto& layer : layers_) {
    append_row_major(layer.weight, flat, pos);
    flat.segment(pos, layer.bias.size()) = layer.bias;
    pos += layer.bias.size();
  }
  return flat;
}

void BackboneModel::set_parameters(const DenseVector& flat) {
  if (flat.size() != param_count()) {
    throw DimensionMismatch("set_parameters: expected " + std::to_string(param_count()) +
                            " values, got " + std::to_string(flat.size()));
  }
  Eigen::Index pos = 0;
  for (auto& layer : layers_) {
    read_row_major(layer.weight, flat, pos);
    layer.bias = flat.segment(pos, layer.bias.size());
    pos += layer.bias.size();
  }
}

bool operator==(const BackboneModel& a, const BackboneModel& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const auto& x = a.layers_[l];
    const auto& y = b.layers_[l];
    if (x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols()) return false;
    if (x.weight != y.weight || x.bias != y.bias) return false;
  }
  return true;
}

BackboneModel init_model(const BackboneConfig& config) {
  BackboneModel model(config);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& layer : model.layers()) {
    const double stddev = config.init_scale / std::sqrt(static_cast<double>(layer.weight.cols()));
    for (Eigen::Index o = 0; o < layer.weight.rows(); ++o) {
      for (Eigen::Index i = 0; i < layer.weight.cols(); ++i) {
        layer.weight(o, i) = stddev * normal(rng);
      }
    }
    layer.bias.setZero();
  }
  return model;
}

namespace {

void activate(Activation act, DenseMatrix& h) {
  if (act == Activation::ReLU) {
    h = h.cwiseMax(0.0);
  } else {
    h = h.array().tanh().matrix();
  }
}

// d act / d pre, evaluated from the pre-activation.
DenseMatrix activation_slope(Activation act, const DenseMatrix& pre) {
  if (act == Activation::ReLU) {
    return (pre.array() > 0.0).cast<double>().matrix();
  }
  return (1.0 - pre.array().tanh().square()).matrix();
}

struct BatchCache {
  std::vector<DenseMatrix> pre;   // hidden pre-activations, one per hidden layer
  std::vector<DenseMatrix> post;  // post[0] = inputs, post[l+1] = act(pre[l])
  DenseMatrix output;
};

BatchCache forward_cached(const BackboneModel& model, const DenseMatrix& inputs) {
  const auto& cfg = model.config();
  if (inputs.cols() != cfg.input_dim) {
    throw DimensionMismatch("forward: expected " + std::to_string(cfg.input_dim) +
                            " input columns, got " + std::to_string(inputs.cols()));
  }
  BatchCache cache;
  cache.post.push_back(inputs);
  const auto& layers = model.layers();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    DenseMatrix h(inputs.rows(), layers[l].weight.rows());
    h.noalias() = cache.post.back() * layers[l].weight.transpose();
    h.rowwise() += layers[l].bias.transpose();
    cache.pre.push_back(h);
    activate(cfg.activation, h);
    cache.post.push_back(std::move(h));
  }
  const auto& last = layers.back();
  cache.output.noalias() = cache.post.back() * last.weight.transpose();
  cache.output.rowwise() += last.bias.transpose();
  return cache;
}

// Backpropagates dLoss/dOutput (N x out) to per-layer deltas, deltas[l] is N x width_l
// for every layer including the output layer.
std::vector<DenseMatrix> backward_deltas(const BackboneModel& model, const BatchCache& cache,
                                         const DenseMatrix& grad_output) {
  const auto& layers = model.layers();
  std::vector<DenseMatrix> deltas(layers.size());
  deltas.back() = grad_output;
  for (std::size_t l = layers.size() - 1; l-- > 0;) {
    DenseMatrix back;
    back.noalias() = deltas[l + 1] * layers[l + 1].weight;
    deltas[l] = back.cwiseProduct(activation_slope(model.config().activation, cache.pre[l]));
  }
  return deltas;
}

// Summed-over-batch parameter gradient in the flat layout.
DenseVector flat_gradient(const BackboneModel& model, const BatchCache& cache,
                          const std::vector<DenseMatrix>& deltas) {
  DenseVector g(model.param_count());
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    DenseMatrix gw;
    gw.noalias() = deltas[l].transpose() * cache.post[l];
    append_row_major(gw, g, pos);
    g.segment(pos, gw.rows()) = deltas[l].colwise().sum().transpose();
    pos += gw.rows();
  }
  return g;
}

}  // namespace

ForwardResult forward(const BackboneModel& model, const DenseVector& x) {
  DenseMatrix in = x.transpose();
  auto cache = forward_cached(model, in);
  return {cache.output.row(0).transpose(), cache.post.back().row(0).transpose()};
}

DenseMatrix forward_batch(const BackboneModel& model, const DenseMatrix& inputs) {
  return forward_cached(model, inputs).output;
}

DenseMatrix penultimate_batch(const BackboneModel& model, const DenseMatrix& inputs) {
  return forward_cached(model, inputs).post.back();
}

ParamGradient param_gradient(const BackboneModel& model, const DenseVector& x,
                             Eigen::Index output_index) {
  if (output_index < 0 || output_index >= model.config().output_dim) {
    throw std::out_of_range("param_gradient: output index out of range");
  }
  DenseMatrix in = x.transpose();
  auto cache = forward_cached(model, in);
  DenseMatrix seed = DenseMatrix::Zero(1, model.config().output_dim);
  seed(0, output_index) = 1.0;
  auto deltas = backward_deltas(model, cache, seed);
  DenseVector full = flat_gradient(model, cache, deltas);

  const Eigen::Index m = model.hidden_param_count();
  ParamGradient out;
  out.hidden = full.head(m);
  out.last.resize(model.last_layer_feature_dim());
  const Eigen::Index width = model.penultimate_width();
  // Row `output_index` of the last weight matrix, then its bias.
  out.last.head(width) = full.segment(m + output_index * width, width);
  out.last(width) = full(m + model.layers().back().weight.size() + output_index);
  return out;
}

DenseMatrix hidden_jacobian(const BackboneModel& model, const DenseMatrix& inputs,
                            Eigen::Index output_index) {
  if (output_index < 0 || output_index >= model.config().output_dim) {
    throw std::out_of_range("hidden_jacobian: output index out of range");
  }
  const Eigen::Index n = inputs.rows();
  auto cache = forward_cached(model, inputs);
  DenseMatrix seed = DenseMatrix::Zero(n, model.config().output_dim);
  seed.col(output_index).setOnes();
  auto deltas = backward_deltas(model, cache, seed);

  DenseMatrix jac(n, model.hidden_param_count());
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l + 1 < model.layers().size(); ++l) {
    const DenseMatrix& delta = deltas[l];     // N x fan_out
    const DenseMatrix& act = cache.post[l];   // N x fan_in
    const Eigen::Index fan_in = act.cols();
    for (Eigen::Index o = 0; o < delta.cols(); ++o) {
      jac.middleCols(pos, fan_in) = act.array().colwise() * delta.col(o).array();
      pos += fan_in;
    }
    jac.middleCols(pos, delta.cols()) = delta;
    pos += delta.cols();
  }
  return jac;
}

void LabeledDataset::validate() const {
  if (inputs.rows() != targets.rows()) {
    throw DimensionMismatch("LabeledDataset: inputs and targets have different row counts");
  }
  if (!inputs.allFinite() || !targets.allFinite()) {
    throw std::invalid_argument("LabeledDataset: non-finite entries");
  }
}

LabeledDataset LabeledDataset::rows(const std::vector<Eigen::Index>& index) const {
  LabeledDataset out{DenseMatrix(static_cast<Eigen::Index>(index.size()), inputs.cols()),
                     DenseMatrix(static_cast<Eigen::Index>(index.size()), targets.cols())};
  for (std::size_t i = 0; i < index.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(index[i]);
    out.targets.row(static_cast<Eigen::Index>(i)) = targets.row(index[i]);
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
}

Trainer::Trainer(const BackboneModel& model, TrainConfig config)
    : config_(config),
      m1_(DenseVector::Zero(model.param_count())),
      m2_(DenseVector::Zero(model.param_count())),
      rng_(config.seed) {
  config_.validate();
}

double Trainer::step(BackboneModel& model, const DenseMatrix& inputs, const DenseMatrix& targets) {
  auto cache = forward_cached(model, inputs);
  const DenseMatrix resid = cache.output - targets;
  const double denom = static_cast<double>(resid.size());
  const double loss = resid.squaredNorm() / denom;
  auto deltas = backward_deltas(model, cache, (2.0 / denom) * resid);
  DenseVector g = flat_gradient(model, cache, deltas);

  const double norm = g.norm();
  if (config_.grad_clip > 0.0 && norm > config_.grad_clip) g *= config_.grad_clip / norm;

  const auto& adam = config_.adam;
  ++t_;
  m1_ = adam.beta1 * m1_ + (1.0 - adam.beta1) * g;
  m2_ = adam.beta2 * m2_ + (1.0 - adam.beta2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(t_));
  DenseVector update =
      ((m1_ / c1).array() / ((m2_ / c2).array().sqrt() + adam.epsilon)).matrix();
  model.set_parameters(model.parameters() - config_.learning_rate * update);
  return loss;
}

double Trainer::epoch(BackboneModel& model, const LabeledDataset& data) {
  const Eigen::Index n = data.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng_);
  double total = 0.0;
  int batches = 0;
  for (Eigen::Index start = 0; start < n; start += config_.batch_size) {
    const Eigen::Index len = std::min(config_.batch_size, n - start);
    std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + len);
    auto batch = data.rows(idx);
    total += step(model, batch.inputs, batch.targets);
    ++batches;
  }
  return batches > 0 ? total / batches : 0.0;
}

double Trainer::steps(BackboneModel& model, const LabeledDataset& data, int steps) {
  const Eigen::Index n = data.size();
  if (n == 0 || steps <= 0) return 0.0;
  const Eigen::Index len = std::min(config_.batch_size, n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  double total = 0.0;
  for (int s = 0; s < steps; ++s) {
    // Partial Fisher-Yates for a batch without replacement.
    for (Eigen::Index i = 0; i < len; ++i) {
      std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng_))]);
    }
    std::vector<Eigen::Index> idx(order.begin(), order.begin() + len);
    auto batch = data.rows(idx);
    total += step(model, batch.inputs, batch.targets);
  }
  return total / steps;
}

TrainResult train(BackboneModel model, const LabeledDataset& data, const TrainConfig& config) {
  data.validate();
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  Trainer trainer(model, config);
  TrainResult result;
  for (int e = 0; e < config.epochs; ++e) {
    result.loss_trace.push_back(trainer.epoch(model, data));
  }
  result.model = std::move(model);
  return result;
}

double mse(const BackboneModel& model, const LabeledDataset& data) {
  if (data.size() == 0) return 0.0;
  return (forward_batch(model, data.inputs) - data.targets).squaredNorm() /
         static_cast<double>(data.targets.size());
}

nlohmann::json to_json(const BackboneConfig& c) {
  return {{"input_dim", c.input_dim},
          {"hidden_widths", c.hidden_widths},
          {"activation", to_string(c.activation)},
          {"output_dim", c.output_dim},
          {"init_scale", c.init_scale},
          {"seed", c.seed}};
}

BackboneConfig backbone_config_from_json(const nlohmann::json& j) {
  BackboneConfig c;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.hidden_widths = j.value("hidden_widths", c.hidden_widths);
  c.activation = activation_from_string(j.value("activation", to_string(c.activation)));
  c.output_dim = j.value("output_dim", c.output_dim);
  c.init_scale = j.value("init_scale", c.init_scale);
  c.seed = j.value("seed", c.seed);
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"grad_clip", c.grad_clip},
          {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    c.adam.beta1 = a.value("beta1", c.adam.beta1);
    c.adam.beta2 = a.value("beta2", c.adam.beta2);
    c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
  }
  c.seed = j.value("seed", c.seed);
  return c;
}

nlohmann::json to_json(const BackboneModel& model) {
  const DenseVector p = model.parameters();
  return {{"format", "richbll-mlp-v1"},
          {"config", to_json(model.config())},
          {"parameters", std::vector<double>(p.data(), p.data() + p.size())}};
}

BackboneModel backbone_model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "richbll-mlp-v1") {
    throw std::invalid_argument("checkpoint: unrecognized format");
  }
  BackboneModel model(backbone_config_from_json(j.at("config")));
  const auto values = j.at("parameters").get<std::vector<double>>();
  model.set_parameters(Eigen::Map<const DenseVector>(values.data(),
                                                     static_cast<Eigen::Index>(values.size())));
  return model;
}

void save_checkpoint(const BackboneModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << to_json(model).dump() << '\n';
}

BackboneModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  return backbone_model_from_json(nlohmann::json::parse(in));
}

}  // namespace richbll
