// Worked input/output examples for each operation, checked against
// independent oracles (boost, hand arithmetic) or frozen reference values.
#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "tebkit/analytic.hpp"
#include "tebkit/causal_mnist.hpp"
#include "tebkit/error.hpp"
#include "tebkit/harness.hpp"
#include "tebkit/metrics.hpp"
#include "tebkit/model.hpp"
#include "tebkit/rng.hpp"
#include "tebkit/sampling.hpp"
#include "tebkit/scm.hpp"
#include "tebkit/stats.hpp"

using namespace tebkit;

namespace {

double phi(double z) { return boost::math::cdf(boost::math::normal_distribution<double>(), z); }

const std::filesystem::path kData = TEBKIT_TEST_DATA;

}  // namespace

TEST(ScmExamples, MillionSampleMoments) {
  const auto d = sample_appendix_b({0.5, 1.0, 1000000, 0});
  double t = 0, y1 = 0, y0 = 0;
  for (const auto& s : d.samples()) {
    t += s.t;
    (s.t ? y1 : y0) += s.y;
  }
  const double n = double(d.size());
  EXPECT_NEAR(t / n, 0.5, 0.002);
  EXPECT_NEAR(y1 / t, phi(1 / std::sqrt(3.0)), 0.002);
  EXPECT_NEAR(y0 / (n - t), 0.5, 0.002);
}

TEST(ScmExamples, ConditionalAndInterventionalMeans) {
  EXPECT_NEAR(oracle_conditional_mean(1.0, 1.0), phi(1.0), 1e-14);
  EXPECT_NEAR(oracle_conditional_mean(-1.0, 1.0), 1 - phi(1.0), 1e-14);
  EXPECT_NEAR(interventional_outcome_means({0.5, 1.0, 1, 0}).first, phi(1 / std::sqrt(3.0)), 1e-14);
  EXPECT_NEAR(interventional_outcome_means({0.5, 1e6, 1, 0}).first, 0.5, 1e-3);
  EXPECT_NEAR(interventional_outcome_means({0.5, 1e-4, 1, 0}).first, phi(1 / std::sqrt(2.0)), 1e-3);
}

TEST(AnalyticExamples, Values) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(-3.0), 0.0013498980316301, 1e-15);
  EXPECT_NEAR(analytic_ad(1e8), 0.0, 1e-4);
  EXPECT_NEAR(analytic_ad(2.0), phi(0.5) - 0.5, 1e-14);
  EXPECT_NEAR(analytic_discretized_ad() - analytic_ad(1e-8), 0.0, 1e-4);
  EXPECT_DOUBLE_EQ(teb_upper_bound({0.05, 0.5}), 0.1);
  EXPECT_DOUBLE_EQ(teb_upper_bound({0.1, 0.25}), 0.4);
}

TEST(AnalyticExamples, WorstCaseOnHundredSamples) {
  // 20 treated (10 with y = 0), 80 controls.
  std::vector<Sample> s(100);
  for (std::size_t i = 0; i < 100; ++i) {
    s[i].t = i < 20;
    s[i].y = (i % 2) == 0;
  }
  const Dataset d(s, std::monostate{});
  const auto pred = worst_case_predictor(d, 0.05);
  const auto idx = d.all_indices();
  std::vector<double> scores(pred.begin(), pred.end());
  const auto r = teb_report(scores, d.labels(idx), d.treatments(idx));
  EXPECT_NEAR(r.teb_soft, 0.25, 1e-15);
  EXPECT_NEAR(r.teb_hard, 0.25, 1e-15);
  EXPECT_EQ(worst_case_predictor(d, 0.0), d.labels(idx));

  std::vector<Sample> ten(10);
  for (std::size_t i = 0; i < 10; ++i) {
    ten[i].t = i < 5;
    ten[i].y = i % 2;
  }
  const Dataset d10(ten, std::monostate{});
  const auto p10 = worst_case_predictor(d10, 0.2);
  const auto idx10 = d10.all_indices();
  std::vector<double> s10(p10.begin(), p10.end());
  EXPECT_NEAR(std::abs(teb_report(s10, d10.labels(idx10), d10.treatments(idx10)).teb_soft),
              teb_upper_bound({0.2, 0.5}), 1e-15);
}

TEST(SamplingExamples, BudgetBoundaryAndFourStrata) {
  std::vector<Sample> s(12);
  // Strata w = 0..3; w = 3 is never annotated, w = 2 holds only treated units.
  for (std::size_t i = 0; i < 12; ++i) {
    s[i].w = double(i % 4);
    s[i].t = (i / 4) % 2;
    if (i % 4 == 2) s[i].t = 1;
    s[i].s = i % 4 != 3;
  }
  const Dataset d(s, std::monostate{});
  EXPECT_THROW(assign_annotation(d, {SamplingKind::random, 12}), ConfigError);
  const auto r = check_positivity(d, Strata{{0, 1, 2, 3}});
  ASSERT_EQ(r.strata.size(), 4u);
  EXPECT_EQ(r.strata[0].treated, 1u);
  EXPECT_EQ(r.strata[0].control, 2u);
  EXPECT_FALSE(r.strata[1].violation);
  EXPECT_TRUE(r.strata[2].violation);
  EXPECT_TRUE(r.strata[3].skipped);
  EXPECT_FALSE(r.pass);
}

TEST(ModelExamples, LogisticHeldOutAccuracyAndCalibration) {
  const auto train_set = sample_appendix_b({0.5, 1.0, 100000, 1});
  const auto test_set = sample_appendix_b({0.5, 1.0, 20000, 2});
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 10;
  const auto model = train(train_set, cfg);
  const auto idx = test_set.all_indices();
  const auto scores = predict_soft(model, Observations::from_dataset(test_set, idx));
  EXPECT_GE(evaluate_predictions(scores, test_set.labels(idx)).accuracy, 0.70);

  // Default study settings: calibrated within 0.02 of the oracle on [-3, 3].
  const auto calibrated = train(train_set, default_convergence_config().train);
  std::vector<double> grid;
  for (double x = -3.0; x <= 3.0; x += 0.25) grid.push_back(x);
  const auto p = predict_soft(calibrated, Observations::scalars(grid));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(p[i], oracle_conditional_mean(grid[i], 1.0), 0.02) << grid[i];
  }
}

TEST(ModelExamples, ConstantOutcomeSaturates) {
  std::vector<Sample> s(200);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i].x = double(i) / 50.0 - 2.0;
    s[i].y = 1;
  }
  const Dataset d(s, std::monostate{});
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 50;
  const auto scores = predict_soft(train(d, cfg), Observations::from_dataset(d, d.all_indices()));
  for (double v : scores) EXPECT_GT(v, 0.95);
}

TEST(ModelExamples, ZeroLogisticAndMonotonicity) {
  Predictor p;
  p.architecture = {ModelKind::logistic, {1, 1, 1}};
  p.parameters = Eigen::VectorXd::Zero(2);
  const std::vector<double> xs = {-5.0, 0.0, 3.0};
  for (double v : predict_soft(p, Observations::scalars(xs))) EXPECT_EQ(v, 0.5);
  p.parameters << 0.7, -0.2;
  const auto s = predict_soft(p, Observations::scalars(xs));
  EXPECT_LT(s[0], s[1]);
  EXPECT_LT(s[1], s[2]);
}

TEST(ModelExamples, DiscretizeAndMetricBoundaries) {
  EXPECT_EQ(discretize(std::vector<double>{0.2, 0.5, 0.9}), (std::vector<std::uint8_t>{0, 1, 1}));
  EXPECT_EQ(discretize(std::vector<double>{0.0, 0.3}, 0.0), (std::vector<std::uint8_t>{1, 1}));
  EXPECT_EQ(discretize(std::vector<double>{0.49999, 0.50001}), (std::vector<std::uint8_t>{0, 1}));

  const std::vector<std::uint8_t> y = {1, 0, 1, 0};
  const auto perfect = evaluate_predictions(std::vector<double>{1, 0, 1, 0}, y);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.balanced_accuracy, 1.0);
  EXPECT_LE(perfect.bce, -std::log(1 - kBceClamp) + 1e-15);
  EXPECT_NEAR(evaluate_predictions(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y).bce, std::log(2.0), 1e-15);
  const auto m = evaluate_predictions(std::vector<double>{1, 1, 0, 0}, std::vector<std::uint8_t>{1, 1, 1, 0});
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(m.balanced_accuracy, 5.0 / 6.0);
}

TEST(MetricExamples, EmpiricalAdAndTeb) {
  const std::vector<std::uint8_t> t = {1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(empirical_ad(std::vector<double>{1, 1, 0, 0}, t), 1.0);
  EXPECT_DOUBLE_EQ(empirical_ad(std::vector<double>{0.3, 0.3, 0.3, 0.3}, t), 0.0);
  EXPECT_NEAR(empirical_ad(std::vector<double>{0.9, 0.7, 0.2, 0.4}, t), 0.5, 1e-15);
  const std::vector<std::uint8_t> y = {1, 0, 1, 0};
  const auto r = teb_report(std::vector<double>{1, 0, 1, 0}, y, t);
  EXPECT_EQ(r.teb_soft, 0.0);
  EXPECT_EQ(r.teb_hard, 0.0);
}

TEST(MetricExamples, TebOfTrainedLogisticAtLargeN) {
  const auto d = sample_appendix_b({0.5, 1.0, 100000, 9});
  const auto model = train(d, default_convergence_config().train);
  const auto idx = d.all_indices();
  const auto scores = predict_soft(model, Observations::from_dataset(d, idx));
  const auto r = teb_report(scores, d.labels(idx), d.treatments(idx),
                            ReferenceAte{analytic_ad(1.0), AteSource::analytic});
  EXPECT_LT(std::abs(r.teb_soft), std::abs(r.teb_hard));
  EXPECT_NEAR(r.ead_hard - analytic_ad(1.0), 0.042, 0.01);
}

TEST(MetricExamples, DiscretizationTestBoundaries) {
  MetricTable same, shifted, noisy;
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    MetricRow r;
    r.seed = std::uint64_t(i);
    r.abs_teb_full = 0.01 * (i % 7);
    r.abs_teb_full_discretized = r.abs_teb_full;
    same.rows.push_back(r);
    if (i < 50) {
      r.abs_teb_full_discretized = r.abs_teb_full + 0.1;
      shifted.rows.push_back(r);
    }
    r.abs_teb_full = 0.3 + rng.normal() * 0.05;
    r.abs_teb_full_discretized = r.abs_teb_full + 0.05 + 0.01 * rng.normal();
    noisy.rows.push_back(r);
  }
  const auto s = paired_discretization_test(same);
  EXPECT_EQ(s.test.t, 0.0);
  EXPECT_DOUBLE_EQ(s.test.p, 0.5);
  EXPECT_EQ(s.direction, "equal");
  const auto sh = paired_discretization_test(shifted);
  EXPECT_TRUE(sh.test.degenerate);
  EXPECT_FALSE(std::isinf(sh.test.t));
  const auto n = paired_discretization_test(noisy);
  EXPECT_LT(n.test.p, 1e-6);
  EXPECT_EQ(n.direction, "hard_worse");
}

TEST(StatsExamples, LargeDfApproachesNormal) {
  EXPECT_NEAR(t_p_value(1.96, 1e6, Alternative::two_sided), 2 * (1 - phi(1.96)), 1e-5);
  EXPECT_NEAR(t_p_value(1.607, 99, Alternative::two_sided), 0.111, 0.002);
  const auto r = t_test(std::vector<double>{1, 2, 3}, 2.0);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_DOUBLE_EQ(r.p, 1.0);
}

TEST(StatsExamples, SpearmanAndFrechet) {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> neg = {-1, -2, -3, -4, -5};
  EXPECT_DOUBLE_EQ(spearman(x, x), 1.0);
  EXPECT_DOUBLE_EQ(spearman(x, neg), -1.0);
  EXPECT_NEAR(spearman(x, std::vector<double>{1, 3, 2, 5, 4}), 0.8, 1e-15);

  // Sample stats (0, 1) and (3, 2): points {-1, 1} have sample sd sqrt(2),
  // so scale to get sd exactly 1 and 2.
  Eigen::MatrixXd a(2, 1), b(2, 1);
  a << -std::sqrt(0.5), std::sqrt(0.5);
  b << 3 - std::sqrt(2.0), 3 + std::sqrt(2.0);
  EXPECT_NEAR(frechet_distance(a, b), 10.0, 1e-8);
}

TEST(MnistExamples, PopulationRejectsHighThreshold) {
  EXPECT_THROW(build_population(8), DomainError);
}

TEST(MnistExamples, LabelsWithImagesMagicRejected) {
  const auto img = kData / "mnist10k-images-idx3-ubyte.gz";
  EXPECT_THROW(load_idx(img, img), ParseError);
}

TEST(MnistExamples, ColourExtremes) {
  const std::vector<std::uint8_t> zero = {0}, full = {255}, half = {128};
  EXPECT_EQ(colorize(zero, 1, 0), (std::vector<std::uint8_t>{0, 255, 0}));
  EXPECT_EQ(colorize(full, 0, 1), (std::vector<std::uint8_t>{255, 255, 255}));
  EXPECT_EQ(colorize(half, 0, 0), (std::vector<std::uint8_t>{127, 0, 0}));
}

TEST(MnistExamples, MarginalOfBackgroundOverSeeds) {
  const auto archive = load_idx(kData / "mnist10k-images-idx3-ubyte.gz", kData / "mnist10k-labels-idx1-ubyte.gz");
  const auto spec = build_population(3);
  double b = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) b += generate(archive, spec, std::uint64_t(s)).log.marginal_b / seeds;
  EXPECT_NEAR(b, 0.5, 0.01);
}

TEST(ModelExamples, ConvNetTable7SettingsReachHighAccuracy) {
  const auto archive = load_idx(kData / "mnist10k-images-idx3-ubyte.gz", kData / "mnist10k-labels-idx1-ubyte.gz");
  auto cfg = default_causalmnist_config();
  cfg.seeds = {0};
  const auto row = run_causalmnist_cell(cfg, archive, standard_scheme("random_few"), 0);
  EXPECT_GT(row.accuracy_full, 0.9);
}
