#include "tebkit/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tebkit/error.hpp"
#include "tebkit/format.hpp"
#include "tebkit/rng.hpp"

namespace tebkit {

std::string to_string(SamplingKind kind) {
  return kind == SamplingKind::random ? "random" : "covariate_biased";
}

SamplingKind parse_sampling_kind(const std::string& text) {
  if (text == "random") return SamplingKind::random;
  if (text == "covariate_biased" || text == "biased") return SamplingKind::covariate_biased;
  throw ConfigError("unknown sampling kind '" + text + "'");
}

std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool,
                                                    std::size_t k, std::uint64_t seed) {
  if (k > pool.size()) {
    throw SamplingError("cannot draw " + std::to_string(k) + " from " +
                            std::to_string(pool.size()) + " eligible samples",
                        pool.size());
  }
  Rng rng(seed, 0x5a3d);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Dataset assign_annotation(const Dataset& dataset, const SamplingScheme& scheme) {
  const std::size_t n = dataset.size();
  if (scheme.n_annotated == 0 || scheme.n_annotated >= n) {
    throw ConfigError("n_s must satisfy 0 < n_s < " + std::to_string(n) + ", got " +
                      std::to_string(scheme.n_annotated));
  }
  std::vector<std::size_t> pool;
  if (scheme.kind == SamplingKind::random) {
    pool = dataset.all_indices();
  } else {
    if (!scheme.bias_covariate || !scheme.bias_value) {
      throw ConfigError("covariate_biased sampling requires bias_covariate and bias_value");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (dataset[i].w == *scheme.bias_value) pool.push_back(i);
    }
    if (pool.size() < scheme.n_annotated) {
      throw SamplingError("only " + std::to_string(pool.size()) +
                              " samples have w = " + format_double(*scheme.bias_value) +
                              ", need " + std::to_string(scheme.n_annotated),
                          pool.size());
    }
  }
  const auto chosen = sample_without_replacement(std::move(pool), scheme.n_annotated,
                                                 scheme.seed);
  std::vector<std::uint8_t> flags(n, 0);
  for (auto i : chosen) flags[i] = 1;
  return dataset.with_annotation(flags);
}

std::vector<std::size_t> draw_validation(const Dataset& dataset, std::uint64_t seed,
                                         std::optional<std::size_t> size) {
  auto pool = dataset.unannotated();
  const std::size_t k = size.value_or(dataset.size() - pool.size());
  return sample_without_replacement(std::move(pool), k, mix_seed(seed, 0x7661));
}

PositivityReport check_positivity(const Dataset& dataset, const Strata& strata) {
  const auto annotated = dataset.annotated();
  if (annotated.empty()) throw EstimationError("check_positivity: D_s is empty");

  std::vector<double> levels = strata.levels;
  if (levels.empty()) {
    std::set<double> seen;
    for (const auto& s : dataset.samples()) seen.insert(s.w);
    levels.assign(seen.begin(), seen.end());
  }

  PositivityReport report;
  for (double level : levels) {
    StratumReport r;
    r.level = level;
    for (auto i : annotated) {
      if (dataset[i].w != level) continue;
      (dataset[i].t ? r.treated : r.control) += 1;
    }
    const std::size_t total = r.treated + r.control;
    if (total == 0) {
      r.skipped = true;
      r.p_treat = std::nan("");
    } else {
      r.p_treat = double(r.treated) / double(total);
      r.violation = r.treated == 0 || r.control == 0;
      if (r.violation) report.pass = false;
    }
    report.strata.push_back(r);
  }
  return report;
}

}  // namespace tebkit
