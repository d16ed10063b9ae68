// tebkit command-line tool: simulate, mnist-gen, experiment, report.
#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "tebkit/causal_mnist.hpp"
#include "tebkit/error.hpp"
#include "tebkit/format.hpp"
#include "tebkit/harness.hpp"

namespace {

using tebkit::RunConfig;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kPartial = 3,
};

struct Flag {
  std::string key;
  std::string names;
  std::string help;
};

// Flags that map one-to-one onto RunConfig keys.
const std::vector<Flag> kRunFlags = {
    {"seeds", "--seeds", "seed list, e.g. 0..19 or 1,5,9"},
    {"seed_count", "--seed-count,--seed_count", "use seeds 0..N-1"},
    {"p_T", "--p-T,--p_T", "treatment probability"},
    {"sigma2_Y", "--sigma2-Y,--sigma2_Y", "outcome noise variance"},
    {"sizes", "--sizes", "comma-separated sample sizes"},
    {"mnist_images", "--mnist-images,--mnist_images", "MNIST image IDX file (raw or gzip)"},
    {"mnist_labels", "--mnist-labels,--mnist_labels", "MNIST label IDX file (raw or gzip)"},
    {"d", "--d", "outcome threshold digit"},
    {"schemes", "--schemes", "comma-separated schemes (name or name:kind:n_s[:bias])"},
    {"n_few", "--n-few,--n_few", "annotation budget of *_few schemes"},
    {"n_many", "--n-many,--n_many", "annotation budget of *_many schemes"},
    {"validation_size", "--validation-size,--validation_size", "validation subsample size"},
    {"model", "--model", "logistic, mlp or convnet"},
    {"lr", "--lr", "learning rate"},
    {"epochs", "--epochs", "training epochs"},
    {"batch_size", "--batch-size,--batch_size", "minibatch size"},
    {"positive_weight", "--positive-weight,--positive_weight", "none, auto or a number"},
    {"mlp_hidden_layers", "--mlp-hidden-layers,--mlp_hidden_layers", "1 or 2"},
    {"threshold", "--threshold", "discretization threshold k"},
    {"out", "--out", "output directory"},
    {"workers", "--workers", "worker threads (default: TEBKIT_WORKERS or all cores)"},
};

struct RunOptions {
  std::string config_file;
  std::string format = "both";
  std::map<std::string, std::string> flags;
};

void add_run_flags(CLI::App* cmd, RunOptions& opts) {
  cmd->add_option("--config", opts.config_file, "key=value config file; flags override it");
  cmd->add_option("--format", opts.format, "json, csv or both")->capture_default_str();
  for (const auto& f : kRunFlags) {
    cmd->add_option_function<std::string>(
        f.names, [&opts, key = f.key](const std::string& v) { opts.flags[key] = v; }, f.help);
  }
}

RunConfig resolve_config(const RunOptions& opts, const std::string& experiment) {
  std::map<std::string, std::string> values;
  if (!opts.config_file.empty()) values = RunConfig::parse_file(opts.config_file);
  if (!values.contains("experiment")) values["experiment"] = experiment;
  for (const auto& [k, v] : opts.flags) values[k] = v;
  auto config = RunConfig::from_map(values);
  if (config.output_dir.empty()) throw tebkit::ConfigError("an output directory is required (--out)");
  config.validate();
  return config;
}

void print_failure(const std::string& kind, const std::string& message,
                   const std::vector<tebkit::FailedCell>& cells = {}) {
  nlohmann::ordered_json j;
  j["status"] = cells.empty() ? "error" : "partial";
  j["error_kind"] = kind;
  j["message"] = message;
  j["failed_cells"] = nlohmann::ordered_json::array();
  for (const auto& c : cells) j["failed_cells"].push_back({{"cell", c.cell}, {"error", c.error}});
  std::cerr << j.dump() << '\n';
}

int finish(const tebkit::ExperimentReport& report, const std::filesystem::path& dir,
           const std::string& format) {
  const auto paths = tebkit::emit_report(report, dir, tebkit::parse_report_format(format));
  for (const auto& p : paths) std::cout << p.string() << '\n';
  if (!report.failures.empty()) {
    print_failure("failed_cells", std::to_string(report.failures.size()) + " cell(s) failed",
                  report.failures);
    return kPartial;
  }
  return kOk;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const tebkit::ConfigError*>(&e)) return "config";
  if (dynamic_cast<const tebkit::ParseError*>(&e)) return "parse";
  if (dynamic_cast<const tebkit::IoError*>(&e)) return "io";
  if (dynamic_cast<const tebkit::DomainError*>(&e)) return "domain";
  if (dynamic_cast<const tebkit::SamplingError*>(&e)) return "sampling";
  if (dynamic_cast<const tebkit::TrainingError*>(&e)) return "training";
  if (dynamic_cast<const tebkit::Error*>(&e)) return "tebkit";
  return "internal";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Treatment effect bias toolkit"};
  app.set_version_flag("--version", std::string(TEBKIT_VERSION));
  app.require_subcommand(1);

  RunOptions simulate_opts;
  auto* simulate = app.add_subcommand("simulate", "scalar RCT discretization-convergence study");
  add_run_flags(simulate, simulate_opts);

  RunOptions experiment_opts;
  auto* experiment = app.add_subcommand("experiment", "CausalMNIST annotation-bias study");
  add_run_flags(experiment, experiment_opts);

  int gen_d = 3;
  std::uint64_t gen_seed = 0;
  std::string gen_out, gen_images, gen_labels;
  auto* mnist_gen = app.add_subcommand("mnist-gen", "generate one CausalMNIST dataset");
  mnist_gen->add_option("--d", gen_d, "outcome threshold digit")->capture_default_str();
  mnist_gen->add_option("--seed", gen_seed, "generation seed")->capture_default_str();
  mnist_gen->add_option("--out", gen_out, "output directory")->required();
  mnist_gen->add_option("--mnist-images", gen_images, "MNIST image IDX file")->required();
  mnist_gen->add_option("--mnist-labels", gen_labels, "MNIST label IDX file")->required();

  std::string report_in, report_out, report_format = "both";
  bool report_recompute = false;
  auto* report = app.add_subcommand("report", "re-render a stored report.json");
  report->add_option("--in", report_in, "report.json to read")->required();
  report->add_option("--out", report_out, "output directory")->required();
  report->add_option("--format", report_format, "json, csv or both")->capture_default_str();
  report->add_flag("--recompute", report_recompute,
                   "recompute aggregates, tests and correlations from the per-run rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) {
      print_failure("usage", e.what());
      return kUsage;
    }
    return kOk;
  }

  try {
    if (*simulate) {
      const auto config = resolve_config(simulate_opts, "appendix_b_convergence");
      if (config.experiment != tebkit::ExperimentKind::appendix_b_convergence) {
        throw tebkit::ConfigError("simulate runs the appendix_b_convergence experiment only");
      }
      return finish(tebkit::run_appendix_b_convergence(config), config.output_dir,
                    simulate_opts.format);
    }
    if (*experiment) {
      const auto config = resolve_config(experiment_opts, "causalmnist_bias");
      if (config.experiment == tebkit::ExperimentKind::appendix_b_convergence) {
        return finish(tebkit::run_appendix_b_convergence(config), config.output_dir,
                      experiment_opts.format);
      }
      return finish(tebkit::run_causalmnist_experiment(config), config.output_dir,
                    experiment_opts.format);
    }
    if (*mnist_gen) {
      const auto archive = tebkit::load_idx(gen_images, gen_labels);
      const auto data = tebkit::generate(archive, tebkit::build_population(gen_d), gen_seed);
      tebkit::write_causal_mnist(data, gen_out);
      std::cout << gen_out << '\n';
      return kOk;
    }
    if (*report) {
      std::ifstream in(report_in, std::ios::binary);
      if (!in) throw tebkit::IoError("cannot read " + report_in);
      std::ostringstream buf;
      buf << in.rdbuf();
      auto parsed = tebkit::parse_report_json(buf.str());
      if (report_recompute) {
        if (!parsed.runs.rows.empty()) {
          tebkit::summarize_causalmnist(parsed);
        } else if (!parsed.convergence.empty()) {
          const auto it = parsed.config.find("sigma2_Y");
          tebkit::summarize_convergence(
              parsed, it == parsed.config.end() ? 1.0 : tebkit::parse_double(it->second));
        }
      }
      return finish(parsed, report_out, report_format);
    }
  } catch (const std::exception& e) {
    const auto kind = error_kind(e);
    print_failure(kind, e.what());
    return kind == "config" ? kUsage : kFailure;
  }
  return kUsage;
}
