#include "tebkit/analytic.hpp"

#include <cmath>
#include <numbers>

#include "tebkit/error.hpp"
#include "tebkit/format.hpp"

namespace tebkit {

double normal_cdf(double z) {
  if (!std::isfinite(z)) throw DomainError("normal_cdf: non-finite argument");
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double analytic_ad(double noise_var) {
  if (!(noise_var > 0.0)) {
    throw DomainError("analytic_ad: sigma2_Y must be > 0, got " + format_double(noise_var));
  }
  return normal_cdf(1.0 / std::sqrt(2.0 + noise_var)) - 0.5;
}

double analytic_discretized_ad() { return normal_cdf(1.0 / std::numbers::sqrt2) - 0.5; }

double teb_upper_bound(const BoundInput& input) {
  if (!(input.epsilon >= 0.0 && input.epsilon <= 1.0)) {
    throw DomainError("teb_upper_bound: epsilon must lie in [0,1]");
  }
  if (!(input.p_treat > 0.0 && input.p_treat < 1.0)) {
    throw DomainError("teb_upper_bound: p_T must lie in (0,1)");
  }
  return input.epsilon / std::min(input.p_treat, 1.0 - input.p_treat);
}

std::vector<std::uint8_t> worst_case_predictor(const Dataset& dataset, double epsilon,
                                               FlipDirection direction) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw DomainError("worst_case_predictor: epsilon must lie in [0,1]");
  }
  std::size_t treated = 0;
  for (const auto& s : dataset.samples()) treated += s.t;
  const std::size_t n = dataset.size();
  const std::size_t control = n - treated;
  if (treated == 0 || control == 0) {
    throw EstimationError("worst_case_predictor: both treatment arms must be nonempty");
  }
  const std::uint8_t minority = treated <= control ? 1 : 0;
  // Labels that can move in the requested direction.
  const std::uint8_t from = direction == FlipDirection::overestimate ? 0 : 1;

  // Tolerate representation error such as 0.07 * 100 = 7.000000000000001.
  const auto flips = static_cast<std::size_t>(std::floor(epsilon * double(n) + 1e-9));
  std::size_t eligible = 0;
  for (const auto& s : dataset.samples()) {
    if (s.t == minority && s.y == from) ++eligible;
  }
  if (flips > eligible) {
    throw InfeasibleError("worst_case_predictor: floor(eps*n) = " + std::to_string(flips) +
                              " exceeds the " + std::to_string(eligible) +
                              " flippable samples in the minority arm",
                          double(eligible) / double(n));
  }

  std::vector<std::uint8_t> pred(n);
  std::size_t done = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = dataset[i];
    pred[i] = s.y;
    if (done < flips && s.t == minority && s.y == from) {
      pred[i] = 1 - s.y;
      ++done;
    }
  }
  return pred;
}

}  // namespace tebkit
