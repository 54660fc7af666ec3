#include "dcfair/model.hpp"

#include "dcfair/errors.hpp"
#include "dcfair/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

namespace dcfair::model {

namespace {

std::atomic<std::uint64_t> g_stamp_counter{1};

constexpr double kScoreUpper = 1.0 - 0x1.0p-53;
constexpr double kScoreLower = 0x1.0p-1022;

double sigmoid(double z) {
  const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(s, kScoreLower, kScoreUpper);
}

template <typename T>
bool contains(std::initializer_list<T> values, T v) {
  return std::find(values.begin(), values.end(), v) != values.end();
}

void check_same_shape(const std::vector<DenseLayer>& a, const std::vector<DenseLayer>& b, const char* what) {
  if (a.size() != b.size()) throw ShapeError(std::string(what) + ": layer count mismatch");
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (a[l].weight.rows() != b[l].weight.rows() || a[l].weight.cols() != b[l].weight.cols() ||
        a[l].bias.size() != b[l].bias.size()) {
      throw ShapeError(std::string(what) + ": shape mismatch in layer " + std::to_string(l));
    }
  }
}

}  // namespace

void MlpConfig::validate() const {
  if (hidden_layers < 1) throw ConfigError("hidden_layers must be >= 1");
  if (hidden_size < 1) throw ConfigError("hidden_size must be >= 1");
  if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) throw ConfigError("dropout_prob must lie in [0, 1)");
  if (!(l2_weight >= 0.0) || !std::isfinite(l2_weight)) throw ConfigError("l2_weight must be finite and >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
}

std::vector<std::string> MlpConfig::off_grid_fields() const {
  std::vector<std::string> out;
  if (!contains({2, 3, 4}, hidden_layers)) out.emplace_back("hidden_layers");
  if (!contains({16, 32, 64, 128}, hidden_size)) out.emplace_back("hidden_size");
  if (!contains({0.0, 0.01, 0.1}, dropout_prob)) out.emplace_back("dropout_prob");
  if (!contains({0.0, 0.01, 0.05}, l2_weight)) out.emplace_back("l2_weight");
  return out;
}

std::size_t MlpConfig::parameter_count(std::size_t input_dim) const {
  std::size_t count = 0;
  std::size_t fan_in = input_dim;
  for (int l = 0; l < hidden_layers; ++l) {
    count += fan_in * static_cast<std::size_t>(hidden_size) + static_cast<std::size_t>(hidden_size);
    fan_in = static_cast<std::size_t>(hidden_size);
  }
  return count + fan_in + 1;
}

std::string describe(const MlpConfig& c) {
  std::ostringstream os;
  os << c.hidden_layers << "x" << c.hidden_size << " dropout=" << c.dropout_prob << " l2=" << c.l2_weight
     << " lr=" << c.learning_rate << " seed=" << c.init_seed;
  return os.str();
}

std::size_t MlpParameters::input_dim() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.rows());
}

bool MlpParameters::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const DenseLayer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

void MlpParameters::refresh_stamp() { stamp = g_stamp_counter.fetch_add(1, std::memory_order_relaxed); }

AdamState AdamState::zeros_like(const MlpParameters& params) {
  AdamState state;
  for (const auto& l : params.layers) {
    DenseLayer z{Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())};
    state.first_moment.push_back(z);
    state.second_moment.push_back(std::move(z));
  }
  return state;
}

MlpParameters init_model(std::size_t input_dim, const MlpConfig& config) {
  config.validate();
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  Rng rng(config.init_seed);
  MlpParameters params;
  std::size_t fan_in = input_dim;
  for (int l = 0; l <= config.hidden_layers; ++l) {
    const std::size_t fan_out = l == config.hidden_layers ? 1 : static_cast<std::size_t>(config.hidden_size);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseLayer layer{Eigen::MatrixXd(fan_in, fan_out), Vector::Zero(static_cast<Eigen::Index>(fan_out))};
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) layer.weight(i, j) = rng.uniform(-bound, bound);
    params.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  params.refresh_stamp();
  return params;
}

ForwardResult forward(const MlpParameters& params, const MlpConfig& config, const Matrix& inputs, bool training,
                      std::uint64_t dropout_seed) {
  if (params.layers.empty()) throw StateError("model has no layers");
  if (static_cast<std::size_t>(inputs.cols()) != params.input_dim()) {
    throw ShapeError("input has " + std::to_string(inputs.cols()) + " columns, model expects " +
                     std::to_string(params.input_dim()));
  }
  if (!inputs.allFinite()) throw ValueError("non-finite model input");

  ForwardResult out;
  ForwardCache& cache = out.cache;
  cache.stamp = params.stamp;
  cache.l2_weight = config.l2_weight;
  const bool use_dropout = training && config.dropout_prob > 0.0;
  const double keep_scale = use_dropout ? 1.0 / (1.0 - config.dropout_prob) : 1.0;
  Rng rng(dropout_seed);

  Matrix activation = inputs;
  const std::size_t hidden = params.layers.size() - 1;
  for (std::size_t l = 0; l < hidden; ++l) {
    const auto& layer = params.layers[l];
    Matrix z = activation * layer.weight;
    z.rowwise() += layer.bias.transpose();
    Matrix h = z.cwiseMax(0.0);
    Matrix scale;
    if (use_dropout) {
      scale.resize(h.rows(), h.cols());
      for (Eigen::Index i = 0; i < scale.rows(); ++i)
        for (Eigen::Index j = 0; j < scale.cols(); ++j)
          scale(i, j) = rng.uniform() < config.dropout_prob ? 0.0 : keep_scale;
      h = h.cwiseProduct(scale);
    }
    cache.layer_inputs.push_back(std::move(activation));
    cache.pre_activation.push_back(std::move(z));
    cache.dropout_scale.push_back(std::move(scale));
    activation = std::move(h);
  }
  const auto& last = params.layers.back();
  Vector logits = activation * last.weight.col(0);
  logits.array() += last.bias(0);
  cache.layer_inputs.push_back(std::move(activation));

  out.scores.resize(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) out.scores(i) = sigmoid(logits(i));
  cache.scores = out.scores;
  return out;
}

Vector predict_scores(const MlpParameters& params, const Matrix& inputs) {
  MlpConfig eval;
  eval.dropout_prob = 0.0;
  return forward(params, eval, inputs, false, 0).scores;
}

MlpGradients backward(const MlpParameters& params, const ForwardCache& cache, const Vector& upstream) {
  if (cache.stamp != params.stamp) throw StateError("forward cache does not belong to these parameters");
  if (cache.layer_inputs.size() != params.layers.size()) throw StateError("forward cache has wrong depth");
  if (upstream.size() != cache.scores.size()) throw ShapeError("upstream gradient length differs from batch");

  MlpGradients grads;
  grads.layers.resize(params.layers.size());
  const double l2 = cache.l2_weight;

  // d loss / d logit
  Vector delta_out = upstream.array() * cache.scores.array() * (1.0 - cache.scores.array());
  const std::size_t last = params.layers.size() - 1;
  grads.layers[last].weight = cache.layer_inputs[last].transpose() * delta_out;
  grads.layers[last].weight += l2 * params.layers[last].weight;
  grads.layers[last].bias = Vector::Constant(1, delta_out.sum());

  Matrix delta = delta_out * params.layers[last].weight.col(0).transpose();
  for (std::size_t l = last; l-- > 0;) {
    if (cache.dropout_scale[l].size() > 0) delta = delta.cwiseProduct(cache.dropout_scale[l]);
    delta = (cache.pre_activation[l].array() > 0.0).select(delta, 0.0);
    grads.layers[l].weight = cache.layer_inputs[l].transpose() * delta;
    grads.layers[l].weight += l2 * params.layers[l].weight;
    grads.layers[l].bias = delta.colwise().sum().transpose();
    if (l > 0) delta = delta * params.layers[l].weight.transpose();
  }
  return grads;
}

void adam_step(MlpParameters& params, const MlpGradients& grads, AdamState& state, double learning_rate) {
  check_same_shape(params.layers, grads.layers, "adam_step gradients");
  check_same_shape(params.layers, state.first_moment, "adam_step state");
  check_same_shape(params.layers, state.second_moment, "adam_step state");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double eps = state.epsilon;

  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    theta.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight, grads.layers[l].weight, state.first_moment[l].weight,
           state.second_moment[l].weight);
    update(params.layers[l].bias, grads.layers[l].bias, state.first_moment[l].bias, state.second_moment[l].bias);
  }
  params.refresh_stamp();
}

}  // namespace dcfair::model
