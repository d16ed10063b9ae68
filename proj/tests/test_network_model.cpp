#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tebkit/error.hpp"
#include "tebkit/model.hpp"
#include "tebkit/network.hpp"
#include "tebkit/scm.hpp"

using namespace tebkit;

namespace {

RowMatrix random_inputs(Rng& rng, std::size_t n, std::size_t d) {
  RowMatrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal();
  }
  return x;
}

// Max relative error of the analytic gradient against central differences,
// over `probes` coordinates (all if probes >= param_count).
double gradient_error(Network& net, const RowMatrix& x, const std::vector<double>& y, double w,
                      std::size_t probes, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd theta = net.initial_parameters(rng);
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] += 0.05 * rng.normal();
  Eigen::VectorXd grad;
  net.loss_and_gradient(theta, x, y, w, grad);
  const std::size_t p = net.param_count();
  double worst = 0.0;
  for (std::size_t k = 0; k < std::min(probes, p); ++k) {
    const std::size_t i = probes >= p ? k : std::size_t(rng.below(p));
    const double h = 1e-5;
    Eigen::VectorXd a = theta, b = theta;
    a[i] += h;
    b[i] -= h;
    const double fd = (net.loss(a, x, y, w) - net.loss(b, x, y, w)) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
    worst = std::max(worst, std::abs(fd - grad[i]) / denom);
  }
  return worst;
}

std::vector<double> random_labels(Rng& rng, std::size_t n) {
  std::vector<double> y(n);
  for (auto& v : y) v = double(rng.bernoulli(0.5));
  return y;
}

}  // namespace

TEST(Gradient, Logistic) {
  Rng rng(1);
  auto net = build_network({ModelKind::logistic, {1, 1, 5}});
  const auto x = random_inputs(rng, 16, 5);
  const auto y = random_labels(rng, 16);
  EXPECT_LT(gradient_error(net, x, y, 1.0, 1000, 2), 1e-4);
  EXPECT_LT(gradient_error(net, x, y, 2.5, 1000, 3), 1e-4);
}

TEST(Gradient, MlpOneAndTwoHiddenLayers) {
  Rng rng(4);
  const auto x = random_inputs(rng, 8, 6);
  const auto y = random_labels(rng, 8);
  for (int layers : {1, 2}) {
    auto net = build_network({ModelKind::mlp, {1, 1, 6}, layers});
    EXPECT_LT(gradient_error(net, x, y, 1.0, 300, 5), 1e-4) << layers;
  }
}

TEST(Gradient, ConvNet) {
  Rng rng(6);
  // 3 x 28 x 28, the CausalMNIST input shape; probe a random subset.
  auto net = build_network({ModelKind::convnet, {3, 28, 28}});
  const auto x = random_inputs(rng, 3, 3 * 28 * 28);
  const auto y = std::vector<double>{1.0, 0.0, 1.0};
  EXPECT_LT(gradient_error(net, x, y, 1.0, 200, 7), 1e-4);
}

TEST(Gradient, ConvAndPoolLayersOnSmallInput) {
  Rng rng(8);
  std::vector<std::unique_ptr<Layer>> layers;
  const InputShape in{2, 7, 7};
  layers.push_back(make_conv2d(in, 3, 3));
  layers.push_back(make_relu(3 * 5 * 5));
  layers.push_back(make_maxpool2({3, 5, 5}));
  layers.push_back(make_dense(3 * 2 * 2, 1));
  Network net(std::move(layers));
  const auto x = random_inputs(rng, 4, in.size());
  const auto y = random_labels(rng, 4);
  EXPECT_LT(gradient_error(net, x, y, 1.0, 10000, 9), 1e-4);
}

TEST(Network, ConvNetTopology) {
  auto net = build_network({ModelKind::convnet, {3, 28, 28}});
  const std::size_t expected = (3 * 25 * 20 + 20) + (20 * 25 * 50 + 50) + (50 * 4 * 4 * 500 + 500) +
                               (500 + 1);
  EXPECT_EQ(net.param_count(), expected);
  EXPECT_EQ(net.input_size(), 3u * 28 * 28);
}

TEST(Network, LossIsStableAtExtremeLogits) {
  std::vector<std::unique_ptr<Layer>> layers;
  layers.push_back(make_dense(1, 1));
  Network net(std::move(layers));
  Eigen::VectorXd theta(2);
  theta << 1000.0, 0.0;
  RowMatrix x(2, 1);
  x << 1.0, -1.0;
  const std::vector<double> y = {0.0, 1.0};
  const double l = net.loss(theta, x, y, 1.0);
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, 1000.0, 1e-9);
}

TEST(Model, LogisticRecoversCalibratedScores) {
  const auto d = sample_appendix_b({0.5, 1.0, 20000, 3});
  TrainConfig cfg;
  cfg.model_kind = ModelKind::logistic;
  cfg.learning_rate = 0.01;
  cfg.epochs = 10;
  cfg.batch_size = 128;
  const auto model = train(d, cfg);
  for (double x : {-2.0, -0.5, 0.0, 0.7, 1.5}) {
    const std::vector<double> xs = {x};
    const auto p = predict_soft(model, Observations::scalars(xs));
    EXPECT_NEAR(p[0], oracle_conditional_mean(x, 1.0), 0.03) << x;
  }
}

TEST(Model, TrainingIsBitReproducible) {
  const auto d = sample_appendix_b({0.5, 1.0, 3000, 4});
  TrainConfig cfg;
  cfg.model_kind = ModelKind::mlp;
  cfg.epochs = 2;
  cfg.seed = 77;
  const auto a = train(d, cfg);
  const auto b = train(d, cfg);
  ASSERT_EQ(a.parameters.size(), b.parameters.size());
  for (Eigen::Index i = 0; i < a.parameters.size(); ++i) ASSERT_EQ(a.parameters[i], b.parameters[i]);
  EXPECT_EQ(a.training_loss_trace, b.training_loss_trace);
  cfg.seed = 78;
  EXPECT_NE(train(d, cfg).parameters[0], a.parameters[0]);
}

TEST(Model, AutomaticPositiveWeight) {
  std::vector<Sample> s(100);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i].x = double(i) / 100.0;
    s[i].y = i < 20;
  }
  const Dataset d(s, std::monostate{});
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.positive_weight = PositiveWeight::automatic();
  EXPECT_DOUBLE_EQ(train(d, cfg).positive_weight_used, 4.0);
  for (auto& v : s) v.y = 1;
  EXPECT_THROW(train(Dataset(s, std::monostate{}), cfg), TrainingError);
}

TEST(Model, ConfigValidation) {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.model_kind = ModelKind::mlp;
  cfg.mlp_hidden_layers = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Model, ShapeMismatchIsRejected) {
  const auto d = sample_appendix_b({0.5, 1.0, 200, 1});
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto model = train(d, cfg);
  RowMatrix wide(2, 3);
  wide.setZero();
  EXPECT_THROW(predict_soft(model, Observations::features(wide)), ShapeError);
}

TEST(Model, DiscretizeAndMetrics) {
  const std::vector<double> scores = {0.2, 0.5, 0.9, 0.4, 0.0, 1.0};
  const std::vector<std::uint8_t> labels = {0, 1, 1, 1, 0, 1};
  EXPECT_EQ(discretize(scores), (std::vector<std::uint8_t>{0, 1, 1, 0, 0, 1}));
  const auto m = evaluate_predictions(scores, labels);
  EXPECT_NEAR(m.accuracy, 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(m.balanced_accuracy, 0.5 * (1.0 + 0.75), 1e-15);
  const double expected_bce =
      -(std::log(0.8) + std::log(0.5) + std::log(0.9) + std::log(0.4) + std::log(1 - 1e-7) +
        std::log(1 - 1e-7)) / 6.0;
  EXPECT_NEAR(m.bce, expected_bce, 1e-12);
  const std::vector<std::uint8_t> one_class = {1, 1, 1};
  const std::vector<double> s3 = {0.9, 0.2, 0.7};
  EXPECT_NEAR(evaluate_predictions(s3, one_class).balanced_accuracy, 2.0 / 3.0, 1e-15);
}

TEST(Model, SaveLoadRoundTrip) {
  const auto d = sample_appendix_b({0.5, 1.0, 500, 2});
  TrainConfig cfg;
  cfg.model_kind = ModelKind::mlp;
  cfg.epochs = 1;
  const auto model = train(d, cfg);
  const auto path = std::filesystem::temp_directory_path() / "tebkit_model_roundtrip.txt";
  save_predictor(model, path);
  const auto back = load_predictor(path);
  std::filesystem::remove(path);
  const auto idx = d.all_indices();
  EXPECT_EQ(predict_soft(model, Observations::from_dataset(d, idx)),
            predict_soft(back, Observations::from_dataset(d, idx)));
}
