#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tebkit/dataset.hpp"

namespace tebkit {

enum class SamplingKind { random, covariate_biased };

/// Covariate slot that may condition the annotation flag. Only the W slot
/// exists (pen colour for CausalMNIST).
enum class CovariateSlot { w };

struct SamplingScheme {
  SamplingKind kind = SamplingKind::random;
  std::size_t n_annotated = 0;
  std::optional<CovariateSlot> bias_covariate;
  std::optional<double> bias_value;
  std::uint64_t seed = 0;
};

std::string to_string(SamplingKind kind);
SamplingKind parse_sampling_kind(const std::string& text);

/// Returns a copy of `dataset` with exactly n_annotated samples flagged s=1,
/// drawn uniformly without replacement (over all samples, or over samples
/// whose covariate equals bias_value). Only the s field changes.
Dataset assign_annotation(const Dataset& dataset, const SamplingScheme& scheme);

/// k distinct indices drawn uniformly from `pool` by a seeded partial
/// Fisher-Yates shuffle; returned sorted ascending.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool,
                                                    std::size_t k, std::uint64_t seed);

/// Uniform subsample of D_u. size defaults to |D_s|.
std::vector<std::size_t> draw_validation(const Dataset& dataset, std::uint64_t seed,
                                         std::optional<std::size_t> size = std::nullopt);

/// Discrete strata of W. Empty `levels` means "every distinct value of W
/// observed in the full dataset".
struct Strata {
  std::vector<double> levels;
};

struct StratumReport {
  double level = 0.0;
  std::size_t treated = 0;
  std::size_t control = 0;
  /// Empirical P(T=1 | W=level) on D_s; NaN when the stratum is skipped.
  double p_treat = 0.0;
  bool skipped = false;
  bool violation = false;
};

struct PositivityReport {
  std::vector<StratumReport> strata;
  bool pass = true;
};

/// Empirical positivity check on D_s. Strata without annotated samples are
/// skipped; strata with a single treatment arm are violations.
PositivityReport check_positivity(const Dataset& dataset, const Strata& strata = {});

}  // namespace tebkit
