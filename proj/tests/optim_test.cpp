#include "phqens/optim.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <thread>

namespace phqens {
namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

LinearSoftmaxModel random_model(int classes, Rng& rng, double scale = 0.5) {
  auto m = LinearSoftmaxModel::zeros(classes);
  for (Eigen::Index i = 0; i < m.weights.size(); ++i) m.weights.data()[i] = rng.normal(0, scale);
  for (Eigen::Index i = 0; i < m.bias.size(); ++i) m.bias(i) = rng.normal(0, scale);
  return m;
}

Eigen::VectorXd random_input(Rng& rng, double scale = 1.0) {
  Eigen::VectorXd x(kEmbeddingDim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal(0, scale);
  return x;
}

TEST(Softmax, UniformForEqualLogits) {
  const auto p = softmax(Eigen::VectorXd::Zero(4));
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(p(i), 0.25);
}

TEST(Softmax, MatchesDirectEvaluation) {
  // exp(x_c) / sum exp(x), evaluated independently.
  const auto p = softmax(vec({1, 2, 3}));
  EXPECT_NEAR(p(0), 0.09003057317038046, 1e-12);
  EXPECT_NEAR(p(1), 0.24472847105479767, 1e-12);
  EXPECT_NEAR(p(2), 0.6652409557748219, 1e-12);
  const auto direct = oracle::softmax_direct({1, 2, 3});
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p(i), direct[static_cast<std::size_t>(i)], 1e-15);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  const auto p = softmax(vec({1000, 0}));
  EXPECT_TRUE(p.allFinite());
  EXPECT_DOUBLE_EQ(p(0), 1.0);
  EXPECT_NEAR(p(1), 0.0, 1e-300);
}

TEST(Softmax, RejectsBadInput) {
  EXPECT_THROW(softmax(vec({1.0})), DomainError);
  EXPECT_THROW(softmax(vec({1.0, std::nan("")})), NumericError);
  EXPECT_THROW(softmax(vec({1.0, INFINITY})), NumericError);
}

TEST(Softmax, PermutationEquivariantAndNormalised) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int c = 2 + static_cast<int>(rng.index(8));
    Eigen::VectorXd x(c);
    for (int i = 0; i < c; ++i) x(i) = rng.normal(0, 5);
    std::vector<int> perm(static_cast<std::size_t>(c));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    Eigen::VectorXd px(c);
    for (int i = 0; i < c; ++i) px(i) = x(perm[static_cast<std::size_t>(i)]);
    const auto p = softmax(x);
    const auto pp = softmax(px);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    EXPECT_TRUE((p.array() > 0).all());
    for (int i = 0; i < c; ++i) EXPECT_NEAR(pp(i), p(perm[static_cast<std::size_t>(i)]), 1e-15);
  }
}

TEST(CrossEntropy, Examples) {
  EXPECT_DOUBLE_EQ(cross_entropy(vec({1, 0}), 0), 0.0);
  EXPECT_NEAR(cross_entropy(vec({0.5, 0.5}), 1), 0.6931471805599453, 1e-15);
  EXPECT_NEAR(cross_entropy(vec({1e-15, 1 - 1e-15}), 0), 27.631021115928547, 1e-12);
  EXPECT_THROW(cross_entropy(vec({0.5, 0.5}), 2), DomainError);
  EXPECT_THROW(cross_entropy(vec({0.5, 0.5}), -1), DomainError);
}

double max_relative_gradient_error(LinearSoftmaxModel& model, const Eigen::VectorXd& x,
                                   int y, double step) {
  const auto analytic = grad(model, x, y);
  double worst = 0.0;
  auto check = [&](double& param, double a) {
    const double saved = param;
    param = saved + step;
    const double up = loss(model, x, y);
    param = saved - step;
    const double down = loss(model, x, y);
    param = saved;
    const double numeric = (up - down) / (2 * step);
    const double scale = std::max(std::abs(a), std::abs(numeric));
    worst = std::max(worst, scale > 1e-8 ? std::abs(a - numeric) / scale : std::abs(a - numeric));
  };
  for (Eigen::Index i = 0; i < model.weights.size(); ++i) {
    check(model.weights.data()[i], analytic.weights.data()[i]);
  }
  for (Eigen::Index i = 0; i < model.bias.size(); ++i) check(model.bias(i), analytic.bias(i));
  return worst;
}

TEST(Grad, MatchesCentralFiniteDifferences) {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int classes = 2 + static_cast<int>(rng.index(4));
    auto model = random_model(classes, rng, 0.1);
    const auto x = random_input(rng);
    const int y = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
    worst = std::max(worst, max_relative_gradient_error(model, x, y, 1e-6));
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
  EXPECT_LT(worst, 1e-4);
}

TEST(Grad, SingleCaseWithinOneEMinusFive) {
  Rng rng(5);
  auto model = random_model(4, rng, 0.2);
  const auto x = random_input(rng, 0.5);
  EXPECT_LT(max_relative_gradient_error(model, x, 2, 1e-6), 1e-5);
}

TEST(Grad, ZeroWhenPredictionIsOneHot) {
  auto model = LinearSoftmaxModel::zeros(3);
  model.bias << 0, 1000, 0;
  const auto g = grad(model, Eigen::VectorXd::Ones(kEmbeddingDim), 1);
  EXPECT_LT(g.weights.cwiseAbs().maxCoeff(), 1e-300);
  EXPECT_LT(g.bias.cwiseAbs().maxCoeff(), 1e-300);
}

TEST(Grad, BiasComponentsSumToZero) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    auto model = random_model(5, rng);
    const auto g = grad(model, random_input(rng), static_cast<int>(rng.index(5)));
    EXPECT_NEAR(g.bias.sum(), 0.0, 1e-12);
  }
}

TEST(Grad, FullBatchDescentNeverIncreasesLoss) {
  Rng rng(99);
  std::vector<LabeledEmbedding> data;
  for (int i = 0; i < 12; ++i) data.push_back({random_input(rng), static_cast<int>(rng.index(3))});
  auto model = random_model(3, rng, 0.1);
  auto mean_loss = [&] {
    double s = 0;
    for (const auto& d : data) s += loss(model, d.x, d.label);
    return s / static_cast<double>(data.size());
  };
  double previous = mean_loss();
  for (int step = 0; step < 100; ++step) {
    auto total = LinearSoftmaxModel::zeros(3);
    for (const auto& d : data) {
      const auto g = grad(model, d.x, d.label);
      total.weights += g.weights;
      total.bias += g.bias;
    }
    const double scale = 1e-3 / static_cast<double>(data.size());
    model.weights -= scale * total.weights;
    model.bias -= scale * total.bias;
    const double current = mean_loss();
    EXPECT_LE(current, previous + 1e-9) << "step " << step;
    previous = current;
  }
}

TEST(AdamStep, ZeroGradientLeavesParametersUnchanged) {
  Rng rng(1);
  auto params = random_model(4, rng);
  const auto before = params;
  auto state = AdamState<double>::for_model(params);
  adam_step(params, LinearSoftmaxModel::zeros(4), state, 0.001);
  EXPECT_EQ(params, before);
  EXPECT_EQ(state.step_count, 1);
}

TEST(AdamStep, FirstStepMovesByLearningRate) {
  // m_hat = g, v_hat = g^2, so the step is lr * |g| / (|g| + eps).
  auto params = LinearSoftmaxModel::zeros(3);
  auto grads = LinearSoftmaxModel::zeros(3);
  grads.weights.setConstant(0.37);
  grads.bias.setConstant(-2.5);
  auto state = AdamState<double>::for_model(params);
  adam_step(params, grads, state, 0.001);
  EXPECT_TRUE(((params.weights.array() + 0.001).abs() < 1e-6).all());
  EXPECT_TRUE(((params.bias.array() - 0.001).abs() < 1e-6).all());
}

TEST(AdamStep, DeterministicAndShapeChecked) {
  Rng rng(3);
  auto a = random_model(4, rng);
  auto b = a;
  const auto g = random_model(4, rng);
  auto sa = AdamState<double>::for_model(a);
  auto sb = AdamState<double>::for_model(b);
  for (int i = 0; i < 5; ++i) {
    adam_step(a, g, sa, 0.01);
    adam_step(b, g, sb, 0.01);
  }
  EXPECT_EQ(a, b);
  EXPECT_EQ(sa.first_moment, sb.first_moment);
  EXPECT_EQ(sa.second_moment, sb.second_moment);
  EXPECT_EQ(sa.step_count, 5);
  EXPECT_THROW(adam_step(a, LinearSoftmaxModel::zeros(3), sa, 0.01), DomainError);
}

std::vector<LabeledEmbedding> separable_2d(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledEmbedding> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    Eigen::VectorXd x = random_input(rng, 0.1);
    x(0) += label ? 2.0 : -2.0;
    x(1) += label ? 2.0 : -2.0;
    out.push_back({x, label});
  }
  return out;
}

TEST(Train, SeparableDataReachesPerfectAccuracy) {
  const auto data = separable_2d(200, 17);
  TrainConfig config;
  config.epochs = 50;
  config.seed = 4;
  const auto model = train(2, data, config);
  EXPECT_DOUBLE_EQ(accuracy(model, data), 1.0);
}

TEST(Train, SameSeedIsBitIdenticalAcrossThreads) {
  const auto data = separable_2d(100, 3);
  TrainConfig config;
  config.seed = 77;
  const auto reference = train(2, data, config);
  std::vector<LinearSoftmaxModel> results(4);
  std::vector<std::thread> threads;
  for (auto& r : results) threads.emplace_back([&] { r = train(2, data, config); });
  for (auto& t : threads) t.join();
  for (const auto& r : results) EXPECT_EQ(r, reference);
}

TEST(Train, SingleClassDataPredictsThatClass) {
  auto data = separable_2d(64, 9);
  for (auto& d : data) d.label = 0;
  TrainConfig config;
  config.epochs = 50;
  const auto model = train(2, data, config);
  for (const auto& d : data) EXPECT_EQ(predict_class(model, d.x), 0);
}

TEST(Train, RejectsInvalidInput) {
  EXPECT_THROW(train(2, std::vector<LabeledEmbedding>{}, TrainConfig{}), DomainError);
  auto data = separable_2d(4, 1);
  data[2].label = 2;
  EXPECT_THROW(train(2, data, TrainConfig{}), DomainError);
  TrainConfig bad;
  bad.epochs = 0;
  EXPECT_THROW(train(2, separable_2d(4, 1), bad), DomainError);
}

TEST(PredictProba, ZeroModelIsUniform) {
  const auto p = predict_proba(LinearSoftmaxModel::zeros(5), Eigen::VectorXd::Ones(kEmbeddingDim));
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(p(i), 0.2);
}

TEST(PredictProba, MatchesManualAffineSoftmax) {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto model = random_model(4, rng);
    const auto x = random_input(rng);
    std::vector<double> logits;
    for (int c = 0; c < 4; ++c) {
      long double z = model.bias(c);
      for (Eigen::Index d = 0; d < kEmbeddingDim; ++d) z += model.weights(c, d) * x(d);
      logits.push_back(static_cast<double>(z));
    }
    const auto expected = oracle::softmax_direct(logits);
    const auto p = predict_proba(model, x);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(p(c), expected[static_cast<std::size_t>(c)], 1e-12);
  }
}

TEST(PredictProba, RejectsNonFiniteInput) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(kEmbeddingDim);
  x(3) = std::nan("");
  EXPECT_THROW(predict_proba(LinearSoftmaxModel::zeros(2), x), NumericError);
  EXPECT_THROW(predict_proba(LinearSoftmaxModel::zeros(2), Eigen::VectorXd::Zero(3)),
               DomainError);
}

TEST(Argmax, TiesGoToSmallestIndex) {
  EXPECT_EQ(argmax(vec({0.2, 0.4, 0.4})), 1);
  EXPECT_EQ(argmax(vec({0.5, 0.5})), 0);
}

}  // namespace
}  // namespace phqens
