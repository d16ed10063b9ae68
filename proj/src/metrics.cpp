#include "tebkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tebkit/error.hpp"
#include "tebkit/format.hpp"

namespace tebkit {

double empirical_ad(std::span<const double> outcomes, std::span<const std::uint8_t> treatments) {
  if (outcomes.size() != treatments.size()) {
    throw ShapeError("empirical_ad: outcomes and treatments differ in length");
  }
  double sum[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const int t = treatments[i] ? 1 : 0;
    sum[t] += outcomes[i];
    count[t] += 1;
  }
  if (count[0] == 0 || count[1] == 0) {
    throw EstimationError("empirical_ad: a treatment group is empty");
  }
  return sum[1] / double(count[1]) - sum[0] / double(count[0]);
}

std::string to_string(AteSource source) {
  switch (source) {
    case AteSource::empirical_truth: return "empirical_truth";
    case AteSource::analytic: return "analytic";
    case AteSource::designed: return "designed";
  }
  return "?";
}

AteSource parse_ate_source(const std::string& text) {
  if (text == "empirical_truth") return AteSource::empirical_truth;
  if (text == "analytic") return AteSource::analytic;
  if (text == "designed") return AteSource::designed;
  throw ConfigError("unknown ATE source '" + text + "'");
}

TebReport teb_report(std::span<const double> scores, std::span<const std::uint8_t> labels,
                     std::span<const std::uint8_t> treatments,
                     std::optional<ReferenceAte> reference, double threshold) {
  const std::size_t n = scores.size();
  if (labels.size() != n || treatments.size() != n) {
    throw ShapeError("teb_report: scores, labels and treatments differ in length");
  }
  double soft[2] = {0, 0}, hard[2] = {0, 0}, truth[2] = {0, 0};
  std::size_t count[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const int t = treatments[i] ? 1 : 0;
    soft[t] += scores[i];
    hard[t] += scores[i] >= threshold ? 1.0 : 0.0;
    truth[t] += labels[i];
    count[t] += 1;
  }
  if (count[0] == 0 || count[1] == 0) throw EstimationError("teb_report: a treatment group is empty");

  TebReport r;
  r.threshold = threshold;
  const double n1 = double(count[1]);
  const double n0 = double(count[0]);
  r.ead_soft = soft[1] / n1 - soft[0] / n0;
  r.ead_hard = hard[1] / n1 - hard[0] / n0;
  r.ead_truth = truth[1] / n1 - truth[0] / n0;
  r.bias_treated = (soft[1] - truth[1]) / n1;
  r.bias_control = (soft[0] - truth[0]) / n0;
  r.bias_treated_hard = (hard[1] - truth[1]) / n1;
  r.bias_control_hard = (hard[0] - truth[0]) / n0;
  r.teb_soft = r.bias_treated - r.bias_control;
  r.teb_hard = r.bias_treated_hard - r.bias_control_hard;
  r.reference_ate = reference.value_or(ReferenceAte{r.ead_truth, AteSource::empirical_truth});
  if (r.reference_ate.value == 0.0) {
    r.terb_defined = false;
    r.terb_soft = r.terb_hard = std::nan("");
  } else {
    r.terb_soft = r.teb_soft / r.reference_ate.value;
    r.terb_hard = r.teb_hard / r.reference_ate.value;
  }
  return r;
}

const std::vector<std::string>& MetricTable::metric_columns() {
  static const std::vector<std::string> cols = {
      "bce_val",       "accuracy_val",           "balanced_accuracy_val",
      "abs_teb_val",   "accuracy_full",          "balanced_accuracy_full",
      "abs_teb_full",  "abs_teb_full_discretized", "teb_val",
      "teb_full",      "teb_full_discretized",   "ate_full"};
  return cols;
}

MetricField metric_field(const std::string& name) {
  if (name == "bce_val") return &MetricRow::bce_val;
  if (name == "accuracy_val") return &MetricRow::accuracy_val;
  if (name == "balanced_accuracy_val") return &MetricRow::balanced_accuracy_val;
  if (name == "abs_teb_val") return &MetricRow::abs_teb_val;
  if (name == "accuracy_full") return &MetricRow::accuracy_full;
  if (name == "balanced_accuracy_full") return &MetricRow::balanced_accuracy_full;
  if (name == "abs_teb_full") return &MetricRow::abs_teb_full;
  if (name == "abs_teb_full_discretized") return &MetricRow::abs_teb_full_discretized;
  if (name == "teb_val") return &MetricRow::teb_val;
  if (name == "teb_full") return &MetricRow::teb_full;
  if (name == "teb_full_discretized") return &MetricRow::teb_full_discretized;
  if (name == "ate_full") return &MetricRow::ate_full;
  throw ConfigError("unknown metric column '" + name + "'");
}

std::vector<double> MetricTable::column(const std::string& name) const {
  const auto member = metric_field(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.*member);
  return out;
}

MetricTable MetricTable::filter_scheme(const std::string& scheme) const {
  MetricTable t;
  for (const auto& r : rows) {
    if (r.scheme == scheme) t.rows.push_back(r);
  }
  return t;
}

std::string metric_table_csv(const MetricTable& table) {
  std::ostringstream out;
  out << "seed,scheme,model_kind";
  for (const auto& c : MetricTable::metric_columns()) out << ',' << c;
  out << '\n';
  std::vector<MetricField> members;
  for (const auto& c : MetricTable::metric_columns()) members.push_back(metric_field(c));
  for (const auto& r : table.rows) {
    out << r.seed << ',' << r.scheme << ',' << r.model_kind;
    for (auto m : members) out << ',' << format_double(r.*m);
    out << '\n';
  }
  return out.str();
}

MetricTable parse_metric_table_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  const auto& cols = MetricTable::metric_columns();
  std::size_t lineno = 0;
  do {
    if (!std::getline(in, line)) throw ParseError("metric CSV is empty", lineno + 1);
    ++lineno;
  } while (line.starts_with('#'));
  auto header = split_csv_line(line);
  std::vector<std::string> expected = {"seed", "scheme", "model_kind"};
  expected.insert(expected.end(), cols.begin(), cols.end());
  if (header != expected) throw ParseError("unexpected metric CSV header", lineno);
  std::vector<MetricField> members;
  for (const auto& c : cols) members.push_back(metric_field(c));
  MetricTable table;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || line.starts_with('#')) continue;
    const auto f = split_csv_line(line);
    if (f.size() != expected.size()) throw ParseError("wrong field count", lineno);
    MetricRow r;
    try {
      r.seed = parse_uint(f[0]);
      r.scheme = f[1];
      r.model_kind = f[2];
      for (std::size_t k = 0; k < members.size(); ++k) r.*members[k] = parse_double(f[3 + k]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

void write_metric_table_csv(const MetricTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << metric_table_csv(table);
}

MetricTable read_metric_table_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_metric_table_csv(buf.str());
}

DiscretizationTest paired_discretization_test(const MetricTable& table, bool paired,
                                              Alternative alt) {
  if (table.size() < 2) throw EstimationError("discretization test needs at least 2 rows");
  const auto soft = table.column("abs_teb_full");
  const auto hard = table.column("abs_teb_full_discretized");
  DiscretizationTest out;
  out.paired = paired;
  if (paired) {
    std::vector<double> diff(soft.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = soft[i] - hard[i];
    out.test = t_test(diff, 0.0, alt);
  } else {
    out.test = welch_t_test(soft, hard, alt);
  }
  const double d = out.test.mean_difference;
  out.direction = d < 0 ? "hard_worse" : (d > 0 ? "soft_worse" : "equal");
  return out;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("spearman: columns differ in length");
  if (x.size() < 3) throw EstimationError("spearman: need at least 3 rows");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = mean(rx);
  const double my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

double CorrelationMatrix::at(const std::string& a, const std::string& b) const {
  const auto ia = std::find(columns.begin(), columns.end(), a);
  const auto ib = std::find(columns.begin(), columns.end(), b);
  if (ia == columns.end() || ib == columns.end()) {
    throw ConfigError("correlation matrix has no column '" + (ia == columns.end() ? a : b) + "'");
  }
  return values(ia - columns.begin(), ib - columns.begin());
}

CorrelationMatrix spearman_matrix(const MetricTable& table,
                                  const std::vector<std::string>& columns) {
  if (table.size() < 3) throw EstimationError("spearman_matrix: need at least 3 rows");
  CorrelationMatrix m;
  m.columns = columns;
  const auto k = static_cast<Eigen::Index>(columns.size());
  m.values = Eigen::MatrixXd::Identity(k, k);
  std::vector<std::vector<double>> data;
  std::vector<bool> constant;
  for (const auto& c : columns) {
    data.push_back(table.column(c));
    const auto& v = data.back();
    const bool is_const = std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
    constant.push_back(is_const);
    if (is_const) m.undefined.push_back(c);
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double r = (constant[i] || constant[j]) ? std::nan("") : spearman(data[i], data[j]);
      m.values(i, j) = m.values(j, i) = r;
    }
  }
  return m;
}

std::string correlation_matrix_csv(const CorrelationMatrix& m) {
  std::ostringstream out;
  out << "metric";
  for (const auto& c : m.columns) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < m.columns.size(); ++i) {
    out << m.columns[i];
    for (std::size_t j = 0; j < m.columns.size(); ++j) out << ',' << format_double(m.values(i, j));
    out << '\n';
  }
  return out.str();
}

namespace {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mu) {
  const Eigen::MatrixXd centered = x.rowwise() - mu;
  const double denom = x.rows() > 1 ? double(x.rows() - 1) : 1.0;
  return centered.transpose() * centered / denom;
}

// Symmetric eigen-decomposition with the negative-eigenvalue clamp rule.
Eigen::VectorXd clamped_eigenvalues(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es,
                                    double clamp) {
  Eigen::VectorXd ev = es.eigenvalues();
  const double largest = std::max(ev.maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < 0.0) {
      if (ev[i] < -clamp * largest) {
        throw EstimationError("frechet_distance: matrix is not positive semi-definite (eigenvalue " +
                              format_double(ev[i]) + ")");
      }
      ev[i] = 0.0;
    }
  }
  return ev;
}

}  // namespace

double frechet_distance(const Eigen::MatrixXd& features_a, const Eigen::MatrixXd& features_b,
                        const FrechetOptions& options) {
  if (features_a.cols() == 0) throw ShapeError("frechet_distance: feature dimension is zero");
  if (features_a.cols() != features_b.cols()) {
    throw ShapeError("frechet_distance: feature dimensions differ");
  }
  if (features_a.rows() == 0 || features_b.rows() == 0) {
    throw EstimationError("frechet_distance: empty feature set");
  }
  Eigen::MatrixXd a = features_a;
  Eigen::MatrixXd b = features_b;
  if (options.standardize) {
    Eigen::MatrixXd pooled(a.rows() + b.rows(), a.cols());
    pooled << a, b;
    const Eigen::RowVectorXd mu = pooled.colwise().mean();
    const Eigen::MatrixXd centered = pooled.rowwise() - mu;
    Eigen::RowVectorXd sd =
        (centered.array().square().colwise().sum() / double(std::max<Eigen::Index>(pooled.rows() - 1, 1)))
            .sqrt();
    for (Eigen::Index j = 0; j < sd.size(); ++j) {
      if (sd[j] == 0.0) sd[j] = 1.0;
    }
    a = (a.rowwise() - mu).array().rowwise() / sd.array();
    b = (b.rowwise() - mu).array().rowwise() / sd.array();
  }
  const Eigen::RowVectorXd mu_a = a.colwise().mean();
  const Eigen::RowVectorXd mu_b = b.colwise().mean();
  const Eigen::MatrixXd cov_a = covariance(a, mu_a);
  const Eigen::MatrixXd cov_b = covariance(b, mu_b);

  // tr((S_a S_b)^{1/2}) = tr((S_a^{1/2} S_b S_a^{1/2})^{1/2}), symmetric PSD.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_a(cov_a);
  const Eigen::VectorXd ev_a = clamped_eigenvalues(es_a, options.eigen_clamp);
  const Eigen::MatrixXd sqrt_a =
      es_a.eigenvectors() * ev_a.cwiseSqrt().asDiagonal() * es_a.eigenvectors().transpose();
  Eigen::MatrixXd inner = sqrt_a * cov_b * sqrt_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_inner(inner, Eigen::EigenvaluesOnly);
  const double trace_sqrt = clamped_eigenvalues(es_inner, options.eigen_clamp).cwiseSqrt().sum();

  const double dist = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt;
  return std::max(dist, 0.0);
}

}  // namespace tebkit
