#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tebkit/causal_mnist.hpp"
#include "tebkit/metrics.hpp"
#include "tebkit/model.hpp"
#include "tebkit/sampling.hpp"

namespace tebkit {

enum class ExperimentKind { appendix_b_convergence, causalmnist_bias, custom };
std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

/// Named annotation scheme of the CausalMNIST study.
struct SchemeSpec {
  std::string name;
  SamplingKind kind = SamplingKind::random;
  std::size_t n_annotated = 0;
  /// Pen colour eligible for annotation under covariate-biased sampling.
  double bias_value = 0.0;
};

/// Everything an experiment needs. Built from key=value pairs so that a
/// config file and command-line flags share one vocabulary.
struct RunConfig {
  ExperimentKind experiment = ExperimentKind::appendix_b_convergence;
  std::vector<std::uint64_t> seeds = {0};

  // Scalar RCT.
  double p_treat = 0.5;
  double noise_var = 1.0;
  std::vector<std::size_t> sample_sizes = {1000, 10000, 100000};

  // CausalMNIST.
  std::filesystem::path mnist_images;
  std::filesystem::path mnist_labels;
  int threshold_digit = 3;
  std::vector<SchemeSpec> schemes;
  std::optional<std::size_t> validation_size;

  TrainConfig train;
  double threshold = 0.5;

  std::filesystem::path output_dir;
  std::size_t workers = 0;  // 0: TEBKIT_WORKERS or hardware concurrency

  /// Keys: experiment, seeds ("0..19" or "1,5,9"), seed_count, p_T, sigma2_Y,
  /// sizes, mnist_images, mnist_labels, d, schemes, n_few, n_many,
  /// validation_size, model, lr, epochs, batch_size, positive_weight
  /// (none|auto|<w>), mlp_hidden_layers, threshold, out, workers.
  static RunConfig from_map(const std::map<std::string, std::string>& values);
  static std::map<std::string, std::string> parse_file(const std::filesystem::path& path);
  static std::map<std::string, std::string> parse_text(const std::string& text);

  /// Canonical key=value lines of every setting that affects results.
  std::map<std::string, std::string> canonical() const;
  std::string hash() const;
  void validate() const;
};

/// Defaults of the two built-in studies.
RunConfig default_convergence_config();
RunConfig default_causalmnist_config();
/// Table-5 schemes: random_few, biased_few, random_many, biased_many.
SchemeSpec standard_scheme(const std::string& name, std::size_t n_few = 1800,
                           std::size_t n_many = 12000);

struct ConvergenceRow {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double ead_soft = 0.0;
  double ead_hard = 0.0;
  double ead_truth = 0.0;
  bool operator==(const ConvergenceRow&) const = default;
};

struct Aggregate {
  std::string group;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
  bool operator==(const Aggregate&) const = default;
};

struct NamedTest {
  std::string name;
  TestResult result;
  std::string direction;
};

struct NamedMatrix {
  std::string name;
  CorrelationMatrix matrix;
};

struct FailedCell {
  std::string cell;
  std::string error;
  bool operator==(const FailedCell&) const = default;
};

struct ExperimentReport {
  std::string experiment;
  std::string config_hash;
  std::string tool_version;
  std::map<std::string, std::string> config;
  std::map<std::string, double> references;
  MetricTable runs;
  std::vector<ConvergenceRow> convergence;
  std::vector<Aggregate> aggregates;
  std::vector<NamedTest> tests;
  std::vector<NamedMatrix> correlations;
  /// Raw TERB values per group, e.g. "biased_few:soft".
  std::map<std::string, std::vector<double>> violin;
  std::vector<FailedCell> failures;

  const Aggregate* find_aggregate(const std::string& group, const std::string& metric) const;
  const NamedTest* find_test(const std::string& name) const;
  const NamedMatrix* find_matrix(const std::string& name) const;
};

/// One cell of the scalar study: sample, fit a logistic model on all n
/// samples, and measure soft / hard / true EAD on the same samples.
ConvergenceRow run_convergence_cell(const RunConfig& config, std::size_t n, std::uint64_t seed);

ExperimentReport run_appendix_b_convergence(const RunConfig& config);

/// One CausalMNIST run: generate, annotate, train on D_s, evaluate on the
/// validation subsample of D_u and on the full dataset.
MetricRow run_causalmnist_cell(const RunConfig& config, const MnistArchive& archive,
                               const SchemeSpec& scheme, std::uint64_t seed);

ExperimentReport run_causalmnist_experiment(const RunConfig& config);
/// Same, with an already-loaded archive.
ExperimentReport run_causalmnist_experiment(const RunConfig& config, const MnistArchive& archive);

/// Recomputes aggregates, tests, correlations and violin series from the
/// per-run rows of a CausalMNIST report.
void summarize_causalmnist(ExperimentReport& report);
void summarize_convergence(ExperimentReport& report, double noise_var);

/// Columns of the model-selection correlation matrix.
const std::vector<std::string>& selection_metric_columns();

enum class ReportFormat { json, csv_bundle, both };
ReportFormat parse_report_format(const std::string& text);

std::string report_json(const ExperimentReport& report);
ExperimentReport parse_report_json(const std::string& text);

/// Writes report.json and/or the CSV bundle into `dir`; returns the paths.
std::vector<std::filesystem::path> emit_report(const ExperimentReport& report,
                                               const std::filesystem::path& dir,
                                               ReportFormat format);

/// Worker count: explicit value, else TEBKIT_WORKERS, else hardware threads.
std::size_t resolve_workers(std::size_t requested);

}  // namespace tebkit
