#include "dcfair/errors.hpp"
#include "dcfair/model.hpp"
#include "dcfair/rng.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dcfair;
using model::MlpConfig;

namespace {

MlpConfig small_config(int layers, int size, double dropout = 0.0, double l2 = 0.0, std::uint64_t seed = 3) {
  MlpConfig c;
  c.hidden_layers = layers;
  c.hidden_size = size;
  c.dropout_prob = dropout;
  c.l2_weight = l2;
  c.init_seed = seed;
  return c;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

// Scalar re-implementation of the evaluation-mode forward pass.
double scalar_score(const model::MlpParameters& p, const Matrix& x, Eigen::Index row) {
  std::vector<double> act(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) act[j] = x(row, j);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& w = p.layers[l].weight;
    std::vector<double> next(w.cols());
    for (Eigen::Index o = 0; o < w.cols(); ++o) {
      double z = p.layers[l].bias(o);
      for (Eigen::Index i = 0; i < w.rows(); ++i) z += act[i] * w(i, o);
      next[o] = l + 1 < p.layers.size() ? std::max(0.0, z) : z;
    }
    act = next;
  }
  return 1.0 / (1.0 + std::exp(-act[0]));
}

std::vector<double*> parameter_slots(model::MlpParameters& p) {
  std::vector<double*> out;
  for (auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) out.push_back(l.weight.data() + i);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) out.push_back(l.bias.data() + i);
  }
  return out;
}

std::vector<double> flatten(const std::vector<model::DenseLayer>& layers) {
  std::vector<double> out;
  for (const auto& l : layers) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

}  // namespace

TEST(Model, InitShapesChain) {
  const auto p = model::init_model(5, small_config(2, 16));
  ASSERT_EQ(p.layers.size(), 3u);
  EXPECT_EQ(p.layers[0].weight.rows(), 5);
  EXPECT_EQ(p.layers[0].weight.cols(), 16);
  EXPECT_EQ(p.layers[1].weight.rows(), 16);
  EXPECT_EQ(p.layers[1].weight.cols(), 16);
  EXPECT_EQ(p.layers[2].weight.rows(), 16);
  EXPECT_EQ(p.layers[2].weight.cols(), 1);
  EXPECT_EQ(p.input_dim(), 5u);
  for (const auto& l : p.layers) EXPECT_TRUE(l.bias.isZero());
  EXPECT_EQ(small_config(2, 16).parameter_count(5), 5u * 16 + 16 + 16 * 16 + 16 + 16 + 1);
}

TEST(Model, InitIsSeededAndBounded) {
  const auto a = model::init_model(4, small_config(2, 8, 0, 0, 1));
  const auto b = model::init_model(4, small_config(2, 8, 0, 0, 1));
  const auto c = model::init_model(4, small_config(2, 8, 0, 0, 2));
  EXPECT_EQ(flatten(a.layers), flatten(b.layers));
  EXPECT_NE(flatten(a.layers), flatten(c.layers));
  EXPECT_LE(a.layers[0].weight.cwiseAbs().maxCoeff(), 0.5);  // 1/sqrt(4)
  EXPECT_LE(a.layers[1].weight.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(8.0));
}

TEST(Model, ConfigValidation) {
  auto c = small_config(2, 16);
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(model::init_model(0, small_config(2, 16)), ConfigError);
  EXPECT_TRUE(small_config(2, 16).off_grid_fields().empty());
  EXPECT_EQ(small_config(5, 16).off_grid_fields(), std::vector<std::string>{"hidden_layers"});
}

TEST(Model, ZeroParametersGiveHalf) {
  auto p = model::init_model(3, small_config(2, 4));
  for (auto& l : p.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  const auto scores = model::predict_scores(p, random_matrix(5, 3, 1));
  for (Eigen::Index i = 0; i < scores.size(); ++i) EXPECT_EQ(scores(i), 0.5);
}

TEST(Model, ForwardMatchesScalarOracle) {
  const auto p = model::init_model(4, small_config(2, 8));
  const Matrix x = random_matrix(3, 4, 9);
  const auto scores = model::predict_scores(p, x);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(scores(i), scalar_score(p, x, i), 1e-12);
}

TEST(Model, EvaluationModeIgnoresDropout) {
  const auto cfg = small_config(2, 8, 0.5);
  const auto p = model::init_model(4, cfg);
  const Matrix x = random_matrix(6, 4, 2);
  const auto a = model::forward(p, cfg, x, false, 1).scores;
  const auto b = model::forward(p, cfg, x, false, 2).scores;
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, model::predict_scores(p, x));
  EXPECT_NE(model::forward(p, cfg, x, true, 1).scores, a);
}

TEST(Model, ScoresStayInsideUnitInterval) {
  auto p = model::init_model(2, small_config(2, 4));
  for (auto& l : p.layers) l.weight *= 1e4;
  const Matrix x = random_matrix(50, 2, 4) * 100.0;
  const auto s = model::predict_scores(p, x);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    EXPECT_GT(s(i), 0.0);
    EXPECT_LT(s(i), 1.0);
  }
}

TEST(Model, ForwardErrors) {
  const auto cfg = small_config(2, 4);
  const auto p = model::init_model(3, cfg);
  EXPECT_THROW(model::forward(p, cfg, random_matrix(2, 4, 1), false, 0), ShapeError);
  Matrix bad = random_matrix(2, 3, 1);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(model::forward(p, cfg, bad, false, 0), ValueError);
}

TEST(Model, BackwardZeroUpstream) {
  const auto cfg = small_config(2, 4);
  const auto p = model::init_model(3, cfg);
  const auto fwd = model::forward(p, cfg, random_matrix(5, 3, 1), true, 0);
  const auto g = model::backward(p, fwd.cache, Vector::Zero(5));
  for (double v : flatten(g.layers)) EXPECT_EQ(v, 0.0);

  const auto cfg_l2 = small_config(2, 4, 0.0, 0.01);
  const auto fwd_l2 = model::forward(p, cfg_l2, random_matrix(5, 3, 1), true, 0);
  const auto g_l2 = model::backward(p, fwd_l2.cache, Vector::Zero(5));
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    EXPECT_TRUE(g_l2.layers[l].weight.isApprox(0.01 * p.layers[l].weight));
    EXPECT_TRUE(g_l2.layers[l].bias.isZero());
  }
}

TEST(Model, BackwardRejectsStaleCache) {
  const auto cfg = small_config(2, 4);
  auto p = model::init_model(3, cfg);
  const auto fwd = model::forward(p, cfg, random_matrix(5, 3, 1), false, 0);
  auto state = model::AdamState::zeros_like(p);
  model::adam_step(p, model::backward(p, fwd.cache, Vector::Ones(5)), state, 0.01);
  EXPECT_THROW(model::backward(p, fwd.cache, Vector::Ones(5)), StateError);
}

// Loss = sum_i w_i * score_i + l2/2 ||W||^2, differentiated numerically.
class ModelGradient : public ::testing::TestWithParam<std::tuple<int, int, double, double>> {};

TEST_P(ModelGradient, MatchesCentralDifferences) {
  const auto [layers, size, dropout, l2] = GetParam();
  const auto cfg = small_config(layers, size, dropout, l2, 17);
  auto p = model::init_model(3, cfg);
  const Matrix x = random_matrix(10, 3, 5);
  const Vector w = random_matrix(10, 1, 6).col(0);
  constexpr std::uint64_t kDropSeed = 42;

  auto loss = [&](const model::MlpParameters& q) {
    const auto s = model::forward(q, cfg, x, true, kDropSeed).scores;
    double reg = 0.0;
    for (const auto& l : q.layers) reg += l.weight.squaredNorm();
    return w.dot(s) + 0.5 * l2 * reg;
  };
  const auto fwd = model::forward(p, cfg, x, true, kDropSeed);
  const auto analytic = flatten(model::backward(p, fwd.cache, w).layers);

  auto slots = parameter_slots(p);
  std::vector<double> theta;
  for (double* s : slots) theta.push_back(*s);
  const auto numeric = oracle::central_difference(
      [&](const std::vector<double>& t) {
        for (std::size_t i = 0; i < t.size(); ++i) *slots[i] = t[i];
        return loss(p);
      },
      theta, 1e-5);
  EXPECT_LT(oracle::max_relative_error(analytic, numeric, 1e-4), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(SmallNets, ModelGradient,
                         ::testing::Values(std::make_tuple(1, 8, 0.0, 0.0), std::make_tuple(2, 8, 0.0, 0.01),
                                           std::make_tuple(2, 6, 0.3, 0.05), std::make_tuple(2, 4, 0.0, 0.0)));

TEST(Model, DropoutPreservesExpectedPreActivation) {
  const auto cfg = small_config(2, 8, 0.1, 0.0, 21);
  const auto p = model::init_model(4, cfg);
  const Matrix x = random_matrix(1, 4, 8);
  const auto reference = model::forward(p, cfg, x, false, 0).cache.pre_activation[1];
  constexpr int kMasks = 20000;
  Matrix sum = Matrix::Zero(1, 8), sum_sq = Matrix::Zero(1, 8);
  for (int k = 0; k < kMasks; ++k) {
    const auto z = model::forward(p, cfg, x, true, static_cast<std::uint64_t>(k) + 1000).cache.pre_activation[1];
    sum += z;
    sum_sq += z.cwiseProduct(z);
  }
  for (Eigen::Index j = 0; j < 8; ++j) {
    const double mean = sum(0, j) / kMasks;
    const double var = sum_sq(0, j) / kMasks - mean * mean;
    const double se = std::sqrt(std::max(var, 0.0) / kMasks);
    EXPECT_LE(std::abs(mean - reference(0, j)), 3.0 * se + 1e-12) << "unit " << j;
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto p = model::init_model(3, small_config(2, 4));
  const auto before = flatten(p.layers);
  auto state = model::AdamState::zeros_like(p);
  model::MlpGradients zero;
  for (const auto& l : p.layers) zero.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  model::adam_step(p, zero, state, 0.01);
  EXPECT_EQ(flatten(p.layers), before);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepClosedForm) {
  model::MlpParameters p;
  p.layers.push_back({Eigen::MatrixXd::Constant(1, 1, 0.3), Vector::Zero(1)});
  auto state = model::AdamState::zeros_like(p);
  model::MlpGradients g;
  g.layers.push_back({Eigen::MatrixXd::Constant(1, 1, 1.0), Vector::Zero(1)});
  model::adam_step(p, g, state, 0.01);
  // m_hat = 1, v_hat = 1 after bias correction.
  EXPECT_NEAR(p.layers[0].weight(0, 0), 0.3 - 0.01 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, ShapeMismatch) {
  auto p = model::init_model(3, small_config(2, 4));
  auto state = model::AdamState::zeros_like(p);
  model::MlpGradients g;
  EXPECT_THROW(model::adam_step(p, g, state, 0.01), ShapeError);
}

TEST(Adam, IdenticalRunsIdenticalTrajectories) {
  auto run = [] {
    const auto cfg = small_config(2, 4, 0.1);
    auto p = model::init_model(3, cfg);
    auto state = model::AdamState::zeros_like(p);
    const Matrix x = random_matrix(8, 3, 3);
    for (int step = 0; step < 5; ++step) {
      const auto fwd = model::forward(p, cfg, x, true, static_cast<std::uint64_t>(step));
      model::adam_step(p, model::backward(p, fwd.cache, Vector::Ones(8)), state, 0.01);
    }
    return flatten(p.layers);
  };
  EXPECT_EQ(run(), run());
}
