#include "tebkit/scm.hpp"

#include <cmath>

#include "tebkit/analytic.hpp"
#include "tebkit/error.hpp"
#include "tebkit/rng.hpp"

namespace tebkit {

Dataset sample_appendix_b(const ScmConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const double noise_sd = std::sqrt(config.noise_var);
  std::vector<Sample> samples(config.n);
  for (auto& s : samples) {
    s.t = rng.bernoulli(config.p_treat) ? 1 : 0;
    s.w = rng.normal();
    const double noise_x = rng.normal();
    const double noise_y = noise_sd * rng.normal();
    s.x = double(s.t) + s.w + noise_x;
    s.y = s.x + noise_y >= 0.0 ? 1 : 0;
    s.s = 1;
  }
  return Dataset(std::move(samples), config);
}

double oracle_conditional_mean(double x, double noise_var) {
  if (!(noise_var > 0.0)) throw DomainError("oracle_conditional_mean: sigma2_Y must be > 0");
  return normal_cdf(x / std::sqrt(noise_var));
}

std::pair<double, double> interventional_outcome_means(const ScmConfig& config) {
  config.validate();
  return {normal_cdf(1.0 / std::sqrt(2.0 + config.noise_var)), 0.5};
}

}  // namespace tebkit
