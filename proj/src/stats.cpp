#include "tebkit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tebkit/error.hpp"

namespace tebkit {

namespace {

// Continued fraction for I_x(a,b) (modified Lentz).
double beta_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  throw EstimationError("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("incomplete_beta: a, b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete_beta: x must lie in [0,1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw DomainError("student_t_cdf: df must be > 0");
  if (std::isnan(t)) return std::nan("");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  // P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2).
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

std::string to_string(Alternative alt) {
  switch (alt) {
    case Alternative::two_sided: return "two_sided";
    case Alternative::less: return "less";
    case Alternative::greater: return "greater";
  }
  return "?";
}

Alternative parse_alternative(const std::string& text) {
  if (text == "two_sided" || text == "two") return Alternative::two_sided;
  if (text == "less") return Alternative::less;
  if (text == "greater") return Alternative::greater;
  throw ConfigError("unknown alternative '" + text + "'");
}

double t_p_value(double t, double df, Alternative alt) {
  if (std::isnan(t)) return std::nan("");
  switch (alt) {
    case Alternative::less: return student_t_cdf(t, df);
    case Alternative::greater: return student_t_cdf(-t, df);
    case Alternative::two_sided: {
      if (std::isinf(t)) return 0.0;
      return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    }
  }
  return std::nan("");
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw EstimationError("mean of an empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / double(xs.size());
}

double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / double(xs.size() - 1));
}

namespace {

double max_abs(std::span<const double> xs) {
  double m = 0.0;
  for (double x : xs) m = std::max(m, std::abs(x));
  return m;
}

// A standard error at rounding level relative to the data counts as zero, so
// constant differences such as (x + 0.1) - x are flagged instead of giving a
// t of order 1e15.
TestResult finish(double diff, double se, double df, Alternative alt, double scale) {
  TestResult r;
  r.df = df;
  r.alternative = alt;
  r.mean_difference = diff;
  if (se <= 64.0 * std::numeric_limits<double>::epsilon() * scale) {
    r.degenerate = true;
    if (diff == 0.0) {
      r.t = 0.0;
      r.p = t_p_value(0.0, df, alt);
    } else {
      r.t = std::nan("");
      r.p = std::nan("");
    }
    return r;
  }
  r.t = diff / se;
  r.p = t_p_value(r.t, df, alt);
  return r;
}

}  // namespace

TestResult t_test(std::span<const double> samples, double mu0, Alternative alt) {
  if (samples.size() < 2) throw EstimationError("t_test: need at least 2 samples");
  const double n = double(samples.size());
  const double sd = stddev(samples);
  return finish(mean(samples) - mu0, sd / std::sqrt(n), n - 1.0, alt, max_abs(samples));
}

TestResult welch_t_test(std::span<const double> a, std::span<const double> b,
                        Alternative alt) {
  if (a.size() < 2 || b.size() < 2) {
    throw EstimationError("welch_t_test: need at least 2 samples per group");
  }
  const double na = double(a.size());
  const double nb = double(b.size());
  const double va = std::pow(stddev(a), 2) / na;
  const double vb = std::pow(stddev(b), 2) / nb;
  const double se = std::sqrt(va + vb);
  double df = na + nb - 2.0;
  if (se > 0.0) df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  return finish(mean(a) - mean(b), se, df, alt, std::max(max_abs(a), max_abs(b)));
}

}  // namespace tebkit
