#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "tebkit/analytic.hpp"
#include "tebkit/error.hpp"
#include "tebkit/metrics.hpp"
#include "tebkit/rng.hpp"
#include "tebkit/scm.hpp"

using namespace tebkit;

TEST(NormalCdf, MatchesBoost) {
  const boost::math::normal_distribution<double> nd;
  for (double z = -8.0; z <= 8.0; z += 0.125) {
    ASSERT_NEAR(normal_cdf(z), boost::math::cdf(nd, z), 1e-12) << z;
  }
  EXPECT_THROW(normal_cdf(std::nan("")), DomainError);
  EXPECT_THROW(normal_cdf(INFINITY), DomainError);
}

TEST(Analytic, ReferenceValues) {
  // scipy.stats.norm.cdf reference values.
  EXPECT_NEAR(normal_cdf(1 / std::sqrt(2.0)), 0.7602499389065233, 1e-14);
  EXPECT_NEAR(analytic_ad(1.0), 0.21814856917461345, 1e-14);
  EXPECT_NEAR(analytic_discretized_ad(), 0.26024993890652326, 1e-14);
  EXPECT_NEAR(analytic_discretized_ad() - analytic_ad(1.0), 0.042, 5e-4);
}

TEST(Analytic, AdDecreasesWithNoiseAndApproachesDiscretizedLimit) {
  double prev = analytic_discretized_ad() + 1e-12;
  for (double s2 : {1e-8, 0.01, 0.5, 1.0, 4.0, 100.0}) {
    const double ad = analytic_ad(s2);
    EXPECT_LT(ad, prev);
    prev = ad;
  }
  EXPECT_NEAR(analytic_ad(1e-8), analytic_discretized_ad(), 1e-8);
  EXPECT_THROW(analytic_ad(-1.0), DomainError);
}

TEST(Bound, Formula) {
  EXPECT_DOUBLE_EQ(teb_upper_bound({0.1, 0.5}), 0.2);
  EXPECT_DOUBLE_EQ(teb_upper_bound({0.1, 0.8}), 0.5);
  EXPECT_DOUBLE_EQ(teb_upper_bound({0.0, 0.3}), 0.0);
  EXPECT_THROW(teb_upper_bound({0.1, 0.0}), DomainError);
  EXPECT_THROW(teb_upper_bound({-0.1, 0.5}), DomainError);
}

namespace {

Dataset random_small(Rng& rng, std::size_t n) {
  std::vector<Sample> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i].t = i < 2 ? std::uint8_t(i) : std::uint8_t(rng.bernoulli(0.5));
    s[i].y = std::uint8_t(rng.bernoulli(0.5));
  }
  return Dataset(std::move(s), std::monostate{});
}

double hard_teb(const Dataset& d, const std::vector<std::uint8_t>& pred) {
  std::vector<double> scores(pred.begin(), pred.end());
  const auto idx = d.all_indices();
  return teb_report(scores, d.labels(idx), d.treatments(idx)).teb_soft;
}

}  // namespace

TEST(WorstCase, AttainsFlipsOverMinority) {
  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 8 + rng.below(40);
    const auto d = random_small(rng, n);
    std::size_t treated = 0;
    for (const auto& s : d.samples()) treated += s.t;
    const std::size_t minority = std::min(treated, n - treated);
    const double eps = double(rng.below(minority / 2 + 1)) / double(n);
    for (auto dir : {FlipDirection::overestimate, FlipDirection::underestimate}) {
      std::vector<std::uint8_t> pred;
      try {
        pred = worst_case_predictor(d, eps, dir);
      } catch (const InfeasibleError&) {
        continue;
      }
      std::size_t wrong = 0;
      for (std::size_t i = 0; i < n; ++i) wrong += pred[i] != d[i].y;
      const auto flips = std::size_t(std::floor(eps * double(n) + 1e-9));
      EXPECT_EQ(wrong, flips);
      EXPECT_NEAR(std::abs(hard_teb(d, pred)), double(flips) / double(minority), 1e-12);
    }
  }
}

TEST(WorstCase, InfeasibleReportsMaximum) {
  std::vector<Sample> s = {{0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 0, 0}, {0, 0, 0, 1}};
  const Dataset d(s, std::monostate{});
  try {
    worst_case_predictor(d, 0.75, FlipDirection::underestimate);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_DOUBLE_EQ(e.max_epsilon(), 0.5);
  }
  std::vector<Sample> one_arm = {{0, 0, 1, 1}, {0, 0, 1, 0}};
  EXPECT_THROW(worst_case_predictor(Dataset(one_arm, std::monostate{}), 0.5), EstimationError);
}

TEST(Scm, DeterministicPerSeed) {
  const ScmConfig c{0.5, 1.0, 500, 17};
  const auto a = sample_appendix_b(c);
  const auto b = sample_appendix_b(c);
  ASSERT_EQ(a.size(), 500u);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]);
  const auto other = sample_appendix_b({0.5, 1.0, 500, 18});
  EXPECT_NE(a[0], other[0]);
}

TEST(Scm, MomentsMatchStructure) {
  const auto d = sample_appendix_b({0.3, 1.0, 200000, 5});
  double t = 0, x1 = 0, x0 = 0, n1 = 0, w = 0, ww = 0;
  for (const auto& s : d.samples()) {
    ASSERT_EQ(s.s, 1);
    t += s.t;
    w += s.w;
    ww += s.w * s.w;
    (s.t ? x1 : x0) += s.x;
    n1 += s.t;
  }
  const double n = double(d.size());
  EXPECT_NEAR(t / n, 0.3, 0.005);
  EXPECT_NEAR(w / n, 0.0, 0.01);
  EXPECT_NEAR(ww / n, 1.0, 0.015);
  EXPECT_NEAR(x1 / n1 - x0 / (n - n1), 1.0, 0.02);
  const auto idx = d.all_indices();
  EXPECT_NEAR(empirical_ad(d.outcomes(idx), d.treatments(idx)), analytic_ad(1.0), 0.01);
}

TEST(Scm, OracleConditionalMean) {
  EXPECT_DOUBLE_EQ(oracle_conditional_mean(0.0, 1.0), 0.5);
  EXPECT_NEAR(oracle_conditional_mean(1.0, 4.0), normal_cdf(0.5), 1e-15);
  const auto [m1, m0] = interventional_outcome_means({0.5, 1.0, 10, 0});
  EXPECT_NEAR(m1 - m0, analytic_ad(1.0), 1e-15);
  EXPECT_DOUBLE_EQ(m0, 0.5);
}

TEST(Scm, ConfigValidation) {
  EXPECT_THROW(sample_appendix_b({0.0, 1.0, 10, 0}), ConfigError);
  EXPECT_THROW(sample_appendix_b({0.5, -1.0, 10, 0}), ConfigError);
  EXPECT_THROW(sample_appendix_b({0.5, 1.0, 0, 0}), ConfigError);
}
