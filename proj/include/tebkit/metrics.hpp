#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tebkit/stats.hpp"

namespace tebkit {

/// Difference of group sample means, mean(outcome | t=1) - mean(outcome | t=0).
double empirical_ad(std::span<const double> outcomes, std::span<const std::uint8_t> treatments);

enum class AteSource { empirical_truth, analytic, designed };
std::string to_string(AteSource source);
AteSource parse_ate_source(const std::string& text);

struct ReferenceAte {
  double value = 0.0;
  AteSource source = AteSource::empirical_truth;
};

/// Treatment effect bias of soft and thresholded predictions, with the
/// interventional means estimated by treatment-group sample means.
struct TebReport {
  double ead_soft = 0.0;
  double ead_hard = 0.0;
  double ead_truth = 0.0;
  /// mean(f - y | t=1) and mean(f - y | t=0) for the soft scores.
  double bias_treated = 0.0;
  double bias_control = 0.0;
  double bias_treated_hard = 0.0;
  double bias_control_hard = 0.0;
  double teb_soft = 0.0;
  double teb_hard = 0.0;
  /// teb / reference ATE; NaN when terb_defined is false (reference ATE = 0).
  double terb_soft = 0.0;
  double terb_hard = 0.0;
  bool terb_defined = true;
  ReferenceAte reference_ate;
  double threshold = 0.5;
};

/// Without `reference`, the reference ATE is the empirical AD of the labels.
TebReport teb_report(std::span<const double> scores, std::span<const std::uint8_t> labels,
                     std::span<const std::uint8_t> treatments,
                     std::optional<ReferenceAte> reference = std::nullopt,
                     double threshold = 0.5);

/// One evaluated model. `_val` columns are computed on the validation
/// subsample, `_full` columns on the whole dataset D = D_s + D_u.
struct MetricRow {
  std::uint64_t seed = 0;
  std::string scheme;
  std::string model_kind;
  double bce_val = 0.0;
  double accuracy_val = 0.0;
  double balanced_accuracy_val = 0.0;
  double abs_teb_val = 0.0;
  double accuracy_full = 0.0;
  double balanced_accuracy_full = 0.0;
  double abs_teb_full = 0.0;
  double abs_teb_full_discretized = 0.0;
  double teb_val = 0.0;
  double teb_full = 0.0;
  double teb_full_discretized = 0.0;
  double ate_full = 0.0;
  bool operator==(const MetricRow&) const = default;
};

using MetricField = double MetricRow::*;
/// Member pointer of a numeric column; throws ConfigError on an unknown name.
MetricField metric_field(const std::string& name);

class MetricTable {
 public:
  /// Numeric columns in CSV order (identifiers seed, scheme, model_kind come first).
  static const std::vector<std::string>& metric_columns();

  std::vector<MetricRow> rows;

  std::size_t size() const { return rows.size(); }
  /// Values of a numeric column; throws ConfigError on an unknown name.
  std::vector<double> column(const std::string& name) const;
  MetricTable filter_scheme(const std::string& scheme) const;
  bool operator==(const MetricTable&) const = default;
};

std::string metric_table_csv(const MetricTable& table);
MetricTable parse_metric_table_csv(const std::string& text);
void write_metric_table_csv(const MetricTable& table, const std::filesystem::path& path);
MetricTable read_metric_table_csv(const std::filesystem::path& path);

struct DiscretizationTest {
  TestResult test;
  bool paired = true;
  /// "hard_worse", "soft_worse" or "equal", from the sign of the mean of
  /// |TEB(f)| - |TEB(1[f >= k])|.
  std::string direction;
};

/// t-test of |teb_full| against |teb_full_discretized|. Paired by default;
/// the unpaired variant is Welch's test. The default alternative is that
/// the soft predictions have the smaller mean |TEB|.
DiscretizationTest paired_discretization_test(const MetricTable& table, bool paired = true,
                                              Alternative alt = Alternative::less);

/// Average ranks (1-based); ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation; NaN if either input is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct CorrelationMatrix {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
  /// Columns with zero rank variance; their off-diagonal entries are NaN.
  std::vector<std::string> undefined;

  double at(const std::string& a, const std::string& b) const;
};

CorrelationMatrix spearman_matrix(const MetricTable& table, const std::vector<std::string>& columns);
std::string correlation_matrix_csv(const CorrelationMatrix& m);

struct FrechetOptions {
  /// Standardise every dimension with the pooled mean / sd of both sets first.
  bool standardize = false;
  /// Negative eigenvalues above -clamp * largest are treated as zero.
  double eigen_clamp = 1e-8;
};

/// Frechet distance between Gaussians fitted to two feature sets (rows are
/// observations): |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
double frechet_distance(const Eigen::MatrixXd& features_a, const Eigen::MatrixXd& features_b,
                        const FrechetOptions& options = {});

}  // namespace tebkit
