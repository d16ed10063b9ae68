#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "tebkit/error.hpp"
#include "tebkit/format.hpp"
#include "tebkit/harness.hpp"

namespace tebkit {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kReportFormat = "tebkit-report/1";

Json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

double read_number(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

Json test_json(const NamedTest& t) {
  Json j;
  j["name"] = t.name;
  j["t"] = number(t.result.t);
  j["p"] = number(t.result.p);
  j["df"] = number(t.result.df);
  j["mean_difference"] = number(t.result.mean_difference);
  j["alternative"] = to_string(t.result.alternative);
  j["degenerate"] = t.result.degenerate;
  j["direction"] = t.direction;
  return j;
}

NamedTest read_test(const Json& j) {
  NamedTest t;
  t.name = j.at("name").get<std::string>();
  t.result.t = read_number(j.at("t"));
  t.result.p = read_number(j.at("p"));
  t.result.df = read_number(j.at("df"));
  t.result.mean_difference = read_number(j.at("mean_difference"));
  t.result.alternative = parse_alternative(j.at("alternative").get<std::string>());
  t.result.degenerate = j.at("degenerate").get<bool>();
  t.direction = j.at("direction").get<std::string>();
  return t;
}

Json row_json(const MetricRow& r) {
  Json j;
  j["seed"] = r.seed;
  j["scheme"] = r.scheme;
  j["model_kind"] = r.model_kind;
  for (const auto& c : MetricTable::metric_columns()) j[c] = number(r.*metric_field(c));
  return j;
}

std::string header_line(const ExperimentReport& r) {
  return "# config_hash=" + r.config_hash + " experiment=" + r.experiment + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

ReportFormat parse_report_format(const std::string& text) {
  if (text == "json") return ReportFormat::json;
  if (text == "csv") return ReportFormat::csv_bundle;
  if (text == "both") return ReportFormat::both;
  throw ConfigError("unknown report format '" + text + "' (json, csv, both)");
}

std::string report_json(const ExperimentReport& r) {
  Json j;
  j["format"] = kReportFormat;
  j["experiment"] = r.experiment;
  j["config_hash"] = r.config_hash;
  j["tool_version"] = r.tool_version;
  Json config = Json::object();
  for (const auto& [k, v] : r.config) config[k] = v;
  j["config"] = config;
  Json refs = Json::object();
  for (const auto& [k, v] : r.references) refs[k] = number(v);
  j["references"] = refs;

  Json runs = Json::array();
  for (const auto& row : r.runs.rows) runs.push_back(row_json(row));
  j["runs"] = runs;

  Json conv = Json::array();
  for (const auto& c : r.convergence) {
    conv.push_back(Json{{"n", c.n},
                        {"seed", c.seed},
                        {"ead_soft", number(c.ead_soft)},
                        {"ead_hard", number(c.ead_hard)},
                        {"ead_truth", number(c.ead_truth)}});
  }
  j["convergence"] = conv;

  Json aggs = Json::array();
  for (const auto& a : r.aggregates) {
    aggs.push_back(Json{{"group", a.group},
                        {"metric", a.metric},
                        {"mean", number(a.mean)},
                        {"stddev", number(a.stddev)},
                        {"count", a.count}});
  }
  j["aggregates"] = aggs;

  Json tests = Json::array();
  for (const auto& t : r.tests) tests.push_back(test_json(t));
  j["tests"] = tests;

  Json corr = Json::array();
  for (const auto& m : r.correlations) {
    Json values = Json::array();
    for (Eigen::Index i = 0; i < m.matrix.values.rows(); ++i) {
      Json row = Json::array();
      for (Eigen::Index k = 0; k < m.matrix.values.cols(); ++k) row.push_back(number(m.matrix.values(i, k)));
      values.push_back(row);
    }
    corr.push_back(Json{{"name", m.name},
                        {"columns", m.matrix.columns},
                        {"undefined", m.matrix.undefined},
                        {"values", values}});
  }
  j["correlations"] = corr;

  Json violin = Json::object();
  for (const auto& [k, v] : r.violin) {
    Json vals = Json::array();
    for (double x : v) vals.push_back(number(x));
    violin[k] = vals;
  }
  j["violin"] = violin;

  Json fails = Json::array();
  for (const auto& f : r.failures) fails.push_back(Json{{"cell", f.cell}, {"error", f.error}});
  j["failures"] = fails;
  return j.dump(2) + "\n";
}

ExperimentReport parse_report_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("report JSON: ") + e.what(), e.byte);
  }
  try {
    if (j.at("format").get<std::string>() != kReportFormat) {
      throw ParseError("unsupported report format", 0);
    }
    ExperimentReport r;
    r.experiment = j.at("experiment").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.tool_version = j.at("tool_version").get<std::string>();
    for (const auto& [k, v] : j.at("config").items()) r.config[k] = v.get<std::string>();
    for (const auto& [k, v] : j.at("references").items()) r.references[k] = read_number(v);

    for (const auto& row : j.at("runs")) {
      MetricRow m;
      m.seed = row.at("seed").get<std::uint64_t>();
      m.scheme = row.at("scheme").get<std::string>();
      m.model_kind = row.at("model_kind").get<std::string>();
      for (const auto& c : MetricTable::metric_columns()) m.*metric_field(c) = read_number(row.at(c));
      r.runs.rows.push_back(std::move(m));
    }
    for (const auto& c : j.at("convergence")) {
      r.convergence.push_back(ConvergenceRow{c.at("n").get<std::size_t>(), c.at("seed").get<std::uint64_t>(),
                                             read_number(c.at("ead_soft")), read_number(c.at("ead_hard")),
                                             read_number(c.at("ead_truth"))});
    }
    for (const auto& a : j.at("aggregates")) {
      r.aggregates.push_back(Aggregate{a.at("group").get<std::string>(), a.at("metric").get<std::string>(),
                                       read_number(a.at("mean")), read_number(a.at("stddev")),
                                       a.at("count").get<std::size_t>()});
    }
    for (const auto& t : j.at("tests")) r.tests.push_back(read_test(t));
    for (const auto& m : j.at("correlations")) {
      NamedMatrix nm;
      nm.name = m.at("name").get<std::string>();
      nm.matrix.columns = m.at("columns").get<std::vector<std::string>>();
      nm.matrix.undefined = m.at("undefined").get<std::vector<std::string>>();
      const auto n = static_cast<Eigen::Index>(nm.matrix.columns.size());
      nm.matrix.values.resize(n, n);
      const auto& values = m.at("values");
      if (static_cast<Eigen::Index>(values.size()) != n) throw ParseError("correlation matrix shape", 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(values[i].size()) != n) throw ParseError("correlation matrix shape", 0);
        for (Eigen::Index k = 0; k < n; ++k) nm.matrix.values(i, k) = read_number(values[i][k]);
      }
      r.correlations.push_back(std::move(nm));
    }
    for (const auto& [k, v] : j.at("violin").items()) {
      std::vector<double> vals;
      for (const auto& x : v) vals.push_back(read_number(x));
      r.violin[k] = std::move(vals);
    }
    for (const auto& f : j.at("failures")) {
      r.failures.push_back({f.at("cell").get<std::string>(), f.at("error").get<std::string>()});
    }
    return r;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("report JSON: ") + e.what(), 0);
  }
}

std::vector<std::filesystem::path> emit_report(const ExperimentReport& r,
                                               const std::filesystem::path& dir,
                                               ReportFormat format) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    const auto path = dir / name;
    write_text(path, text);
    written.push_back(path);
  };

  if (format != ReportFormat::csv_bundle) emit("report.json", report_json(r));
  if (format == ReportFormat::json) return written;

  const std::string head = header_line(r);
  if (!r.runs.rows.empty()) emit("metrics.csv", head + metric_table_csv(r.runs));
  if (!r.convergence.empty()) {
    std::ostringstream out;
    out << head << "n,seed,ead_soft,ead_hard,ead_truth\n";
    for (const auto& c : r.convergence) {
      out << c.n << ',' << c.seed << ',' << format_double(c.ead_soft) << ','
          << format_double(c.ead_hard) << ',' << format_double(c.ead_truth) << '\n';
    }
    emit("convergence.csv", out.str());
  }
  {
    std::ostringstream out;
    out << head << "group,metric,mean,stddev,count\n";
    for (const auto& a : r.aggregates) {
      out << csv_field(a.group) << ',' << a.metric << ',' << format_double(a.mean) << ','
          << format_double(a.stddev) << ',' << a.count << '\n';
    }
    emit("aggregates.csv", out.str());
  }
  {
    std::ostringstream out;
    out << head << "name,t,p,df,mean_difference,alternative,degenerate,direction\n";
    for (const auto& t : r.tests) {
      out << csv_field(t.name) << ',' << format_double(t.result.t) << ','
          << format_double(t.result.p) << ',' << format_double(t.result.df) << ','
          << format_double(t.result.mean_difference) << ',' << to_string(t.result.alternative)
          << ',' << (t.result.degenerate ? 1 : 0) << ',' << t.direction << '\n';
    }
    emit("tests.csv", out.str());
  }
  if (!r.violin.empty()) {
    std::ostringstream out;
    out << head << "group,index,terb\n";
    for (const auto& [k, v] : r.violin) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        out << csv_field(k) << ',' << i << ',' << format_double(v[i]) << '\n';
      }
    }
    emit("violin.csv", out.str());
  }
  for (const auto& m : r.correlations) {
    emit("correlation_" + m.name + ".csv", head + correlation_matrix_csv(m.matrix));
  }
  if (!r.failures.empty()) {
    std::ostringstream out;
    out << head << "cell,error\n";
    for (const auto& f : r.failures) out << csv_field(f.cell) << ',' << csv_field(f.error) << '\n';
    emit("failures.csv", out.str());
  }
  return written;
}

}  // namespace tebkit
