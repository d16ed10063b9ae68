#pragma once

#include <span>
#include <string>

namespace tebkit {

/// Regularized incomplete beta I_x(a, b), evaluated with the Lentz continued
/// fraction (using the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) where that
/// converges faster).
double incomplete_beta(double a, double b, double x);

/// CDF of Student's t with `df` degrees of freedom (df may be fractional).
double student_t_cdf(double t, double df);

enum class Alternative { two_sided, less, greater };

std::string to_string(Alternative alt);
Alternative parse_alternative(const std::string& text);

struct TestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  double mean_difference = 0.0;
  Alternative alternative = Alternative::two_sided;
  /// Zero sample variance (up to rounding relative to the data). If the
  /// mean also equals the null value, t = 0; otherwise t and p are NaN
  /// rather than infinite.
  bool degenerate = false;
};

/// p-value of an observed t under the given alternative.
double t_p_value(double t, double df, Alternative alt);

/// One-sample t-test of H0: E[x] = mu0. Requires n >= 2.
TestResult t_test(std::span<const double> samples, double mu0,
                  Alternative alt = Alternative::two_sided);

/// Welch two-sample test of H0: E[a] = E[b]; "greater" means E[a] > E[b].
TestResult welch_t_test(std::span<const double> a, std::span<const double> b,
                        Alternative alt = Alternative::two_sided);

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> xs);

}  // namespace tebkit
