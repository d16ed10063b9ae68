#include "tebkit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <thread>

#include "tebkit/analytic.hpp"
#include "tebkit/error.hpp"
#include "tebkit/format.hpp"
#include "tebkit/rng.hpp"
#include "tebkit/scm.hpp"

namespace tebkit {

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("TEBKIT_WORKERS")) {
    try {
      const auto n = parse_uint(env);
      if (n > 0) return n;
    } catch (const ParseError&) {
      throw ConfigError("TEBKIT_WORKERS must be a positive integer");
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Runs task(i) for i in [0, count) on a bounded pool. Each task writes only
// its own slot, so the outcome does not depend on scheduling.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& task) {
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
}

Aggregate aggregate(const std::string& group, const std::string& metric,
                    const std::vector<double>& values) {
  return Aggregate{group, metric, mean(values), stddev(values), values.size()};
}

std::uint64_t scheme_key(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

const Aggregate* ExperimentReport::find_aggregate(const std::string& group,
                                                  const std::string& metric) const {
  for (const auto& a : aggregates) {
    if (a.group == group && a.metric == metric) return &a;
  }
  return nullptr;
}

const NamedTest* ExperimentReport::find_test(const std::string& name) const {
  for (const auto& t : tests) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const NamedMatrix* ExperimentReport::find_matrix(const std::string& name) const {
  for (const auto& m : correlations) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

ConvergenceRow run_convergence_cell(const RunConfig& config, std::size_t n, std::uint64_t seed) {
  ScmConfig scm{config.p_treat, config.noise_var, n, mix_seed(seed, n)};
  const Dataset data = sample_appendix_b(scm);
  TrainConfig train = config.train;
  train.seed = seed;
  const Predictor model = tebkit::train(data, train);
  const auto idx = data.all_indices();
  const auto scores = predict_soft(model, Observations::from_dataset(data, idx));
  const auto report =
      teb_report(scores, data.labels(idx), data.treatments(idx),
                 ReferenceAte{analytic_ad(config.noise_var), AteSource::analytic}, config.threshold);
  return ConvergenceRow{n, seed, report.ead_soft, report.ead_hard, report.ead_truth};
}

void summarize_convergence(ExperimentReport& report, double noise_var) {
  const double target_soft = analytic_ad(noise_var);
  const double target_hard = analytic_discretized_ad();
  report.references["analytic_ad"] = target_soft;
  report.references["analytic_discretized_ad"] = target_hard;
  report.references["discretization_gap"] = target_hard - target_soft;
  report.aggregates.clear();

  std::vector<std::size_t> sizes;
  for (const auto& r : report.convergence) {
    if (std::find(sizes.begin(), sizes.end(), r.n) == sizes.end()) sizes.push_back(r.n);
  }
  std::sort(sizes.begin(), sizes.end());
  for (auto n : sizes) {
    std::vector<double> soft, hard, truth, gap, err_hard_disc, err_hard_ad, err_soft_ad;
    for (const auto& r : report.convergence) {
      if (r.n != n) continue;
      soft.push_back(r.ead_soft);
      hard.push_back(r.ead_hard);
      truth.push_back(r.ead_truth);
      gap.push_back(r.ead_hard - r.ead_soft);
      err_hard_disc.push_back(std::abs(r.ead_hard - target_hard));
      err_hard_ad.push_back(std::abs(r.ead_hard - target_soft));
      err_soft_ad.push_back(std::abs(r.ead_soft - target_soft));
    }
    const std::string group = "n=" + std::to_string(n);
    report.aggregates.push_back(aggregate(group, "ead_soft", soft));
    report.aggregates.push_back(aggregate(group, "ead_hard", hard));
    report.aggregates.push_back(aggregate(group, "ead_truth", truth));
    report.aggregates.push_back(aggregate(group, "ead_hard_minus_soft", gap));
    report.aggregates.push_back(aggregate(group, "abs_hard_vs_discretized_ad", err_hard_disc));
    report.aggregates.push_back(aggregate(group, "abs_hard_vs_ad", err_hard_ad));
    report.aggregates.push_back(aggregate(group, "abs_soft_vs_ad", err_soft_ad));
  }
}

ExperimentReport run_appendix_b_convergence(const RunConfig& config) {
  config.validate();
  struct Cell {
    std::size_t n;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (auto n : config.sample_sizes) {
    for (auto s : config.seeds) cells.push_back({n, s});
  }
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    return a.n != b.n ? a.n < b.n : a.seed < b.seed;
  });
  std::vector<std::optional<ConvergenceRow>> rows(cells.size());
  std::vector<std::string> errors(cells.size());
  parallel_for(cells.size(), resolve_workers(config.workers), [&](std::size_t i) {
    try {
      rows[i] = run_convergence_cell(config, cells[i].n, cells[i].seed);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  ExperimentReport report;
  report.experiment = to_string(config.experiment);
  report.config_hash = config.hash();
  report.tool_version = TEBKIT_VERSION;
  report.config = config.canonical();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (rows[i]) {
      report.convergence.push_back(*rows[i]);
    } else {
      report.failures.push_back({"n=" + std::to_string(cells[i].n) + ",seed=" +
                                     std::to_string(cells[i].seed),
                                 errors[i]});
    }
  }
  summarize_convergence(report, config.noise_var);
  return report;
}

MetricRow run_causalmnist_cell(const RunConfig& config, const MnistArchive& archive,
                               const SchemeSpec& scheme, std::uint64_t seed) {
  const PopulationSpec spec = build_population(config.threshold_digit);
  const CausalMnist generated = generate(archive, spec, seed);
  const Dataset full = to_dataset(generated);

  SamplingScheme sampling;
  sampling.kind = scheme.kind;
  sampling.n_annotated = scheme.n_annotated;
  sampling.seed = mix_seed(seed, scheme_key(scheme.name));
  if (scheme.kind == SamplingKind::covariate_biased) {
    sampling.bias_covariate = CovariateSlot::w;
    sampling.bias_value = scheme.bias_value;
  }
  const Dataset annotated = assign_annotation(full, sampling);
  const auto validation = draw_validation(annotated, sampling.seed, config.validation_size);

  TrainConfig train = config.train;
  train.seed = seed;
  const Predictor model = tebkit::train(annotated, train);

  const auto all = annotated.all_indices();
  const auto scores = predict_soft(model, Observations::from_dataset(annotated, all));
  const auto labels = annotated.labels(all);
  const auto treatments = annotated.treatments(all);

  std::vector<double> val_scores;
  for (auto i : validation) val_scores.push_back(scores[i]);
  const auto val_labels = annotated.labels(validation);
  const auto val_treat = annotated.treatments(validation);

  const auto val_metrics = evaluate_predictions(val_scores, val_labels);
  const auto val_teb = teb_report(val_scores, val_labels, val_treat, std::nullopt, config.threshold);
  const auto full_metrics = evaluate_predictions(scores, labels);
  const auto full_teb = teb_report(scores, labels, treatments, std::nullopt, config.threshold);

  MetricRow row;
  row.seed = seed;
  row.scheme = scheme.name;
  row.model_kind = to_string(train.model_kind);
  row.bce_val = val_metrics.bce;
  row.accuracy_val = val_metrics.accuracy;
  row.balanced_accuracy_val = val_metrics.balanced_accuracy;
  row.abs_teb_val = std::abs(val_teb.teb_soft);
  row.teb_val = val_teb.teb_soft;
  row.accuracy_full = full_metrics.accuracy;
  row.balanced_accuracy_full = full_metrics.balanced_accuracy;
  row.abs_teb_full = std::abs(full_teb.teb_soft);
  row.abs_teb_full_discretized = std::abs(full_teb.teb_hard);
  row.teb_full = full_teb.teb_soft;
  row.teb_full_discretized = full_teb.teb_hard;
  row.ate_full = full_teb.ead_truth;
  return row;
}

const std::vector<std::string>& selection_metric_columns() {
  static const std::vector<std::string> cols = {
      "bce_val",       "accuracy_val",           "balanced_accuracy_val",
      "abs_teb_val",   "accuracy_full",          "balanced_accuracy_full",
      "abs_teb_full",  "abs_teb_full_discretized"};
  return cols;
}

void summarize_causalmnist(ExperimentReport& report) {
  report.aggregates.clear();
  report.tests.clear();
  report.correlations.clear();
  report.violin.clear();
  std::stable_sort(report.runs.rows.begin(), report.runs.rows.end(),
                   [](const MetricRow& a, const MetricRow& b) {
                     return a.scheme != b.scheme ? a.scheme < b.scheme : a.seed < b.seed;
                   });

  std::vector<std::string> schemes;
  for (const auto& r : report.runs.rows) {
    if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end()) {
      schemes.push_back(r.scheme);
    }
  }

  auto terb = [](const MetricTable& t, const std::string& col) {
    const auto teb = t.column(col);
    const auto ate = t.column("ate_full");
    std::vector<double> out(teb.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ate[i] != 0.0 ? teb[i] / ate[i] : std::nan("");
    return out;
  };
  auto abs_all = [](std::vector<double> v) {
    for (auto& x : v) x = std::abs(x);
    return v;
  };

  std::map<std::string, std::vector<double>> abs_terb_by_scheme;
  for (const auto& scheme : schemes) {
    const auto table = report.runs.filter_scheme(scheme);
    for (const auto& col : MetricTable::metric_columns()) {
      report.aggregates.push_back(aggregate(scheme, col, table.column(col)));
    }
    const auto soft = terb(table, "teb_full");
    const auto hard = terb(table, "teb_full_discretized");
    report.aggregates.push_back(aggregate(scheme, "terb_full", soft));
    report.aggregates.push_back(aggregate(scheme, "abs_terb_full", abs_all(soft)));
    report.aggregates.push_back(aggregate(scheme, "terb_full_discretized", hard));
    report.violin[scheme + ":soft"] = soft;
    report.violin[scheme + ":hard"] = hard;
    abs_terb_by_scheme[scheme] = abs_all(soft);
    if (table.size() >= 2) {
      report.tests.push_back(
          {"teb_zero:" + scheme, t_test(table.column("teb_full"), 0.0, Alternative::two_sided), ""});
    }
  }

  // Biased vs random annotation at the same budget.
  for (const auto& scheme : schemes) {
    if (!scheme.starts_with("biased")) continue;
    const std::string partner = "random" + scheme.substr(6);
    const auto it = abs_terb_by_scheme.find(partner);
    if (it == abs_terb_by_scheme.end()) continue;
    const auto& biased = abs_terb_by_scheme[scheme];
    if (biased.size() < 2 || it->second.size() < 2) continue;
    NamedTest t{"abs_terb:" + scheme + "_vs_" + partner,
                welch_t_test(biased, it->second, Alternative::greater), ""};
    t.direction = t.result.mean_difference > 0 ? scheme + "_worse" : partner + "_worse";
    report.tests.push_back(t);
  }

  if (report.runs.size() >= 2) {
    const auto d = paired_discretization_test(report.runs);
    report.tests.push_back({"discretization:paired", d.test, d.direction});
    const auto u = paired_discretization_test(report.runs, false);
    report.tests.push_back({"discretization:unpaired", u.test, u.direction});
  }

  auto add_matrix = [&](const std::string& name, const MetricTable& t) {
    if (t.size() < 3) return;
    report.correlations.push_back({name, spearman_matrix(t, selection_metric_columns())});
  };
  add_matrix("all", report.runs);
  MetricTable random, biased;
  for (const auto& r : report.runs.rows) {
    (r.scheme.starts_with("biased") ? biased : random).rows.push_back(r);
  }
  if (!random.rows.empty() && !biased.rows.empty()) {
    add_matrix("random", random);
    add_matrix("biased", biased);
  }
}

ExperimentReport run_causalmnist_experiment(const RunConfig& config, const MnistArchive& archive) {
  config.validate();
  struct Cell {
    const SchemeSpec* scheme;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& s : config.schemes) {
    for (auto seed : config.seeds) cells.push_back({&s, seed});
  }
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    return a.scheme->name != b.scheme->name ? a.scheme->name < b.scheme->name : a.seed < b.seed;
  });
  std::vector<std::optional<MetricRow>> rows(cells.size());
  std::vector<std::string> errors(cells.size());
  parallel_for(cells.size(), resolve_workers(config.workers), [&](std::size_t i) {
    try {
      rows[i] = run_causalmnist_cell(config, archive, *cells[i].scheme, cells[i].seed);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  ExperimentReport report;
  report.experiment = to_string(config.experiment);
  report.config_hash = config.hash();
  report.tool_version = TEBKIT_VERSION;
  report.config = config.canonical();
  report.references["designed_ate"] = build_population(config.threshold_digit).ate;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (rows[i]) {
      report.runs.rows.push_back(*rows[i]);
    } else {
      report.failures.push_back(
          {"scheme=" + cells[i].scheme->name + ",seed=" + std::to_string(cells[i].seed), errors[i]});
    }
  }
  summarize_causalmnist(report);
  return report;
}

ExperimentReport run_causalmnist_experiment(const RunConfig& config) {
  const auto archive = load_idx(config.mnist_images, config.mnist_labels);
  return run_causalmnist_experiment(config, archive);
}

}  // namespace tebkit
