#pragma once

#include <utility>

#include "tebkit/dataset.hpp"

namespace tebkit {

/// Draws config.n samples of the scalar RCT. Per sample, in order: T from
/// one uniform, then W, n_X and n_Y from successive standard normals (n_Y
/// scaled by sqrt(noise_var)). Annotation flags are all set to 1.
Dataset sample_appendix_b(const ScmConfig& config);

/// E[Y | X = x] = Phi(x / sigma_Y).
double oracle_conditional_mean(double x, double noise_var);

/// (E[Y | do(T=1)], E[Y | do(T=0)]) = (Phi(1/sqrt(2 + noise_var)), 1/2).
std::pair<double, double> interventional_outcome_means(const ScmConfig& config);

}  // namespace tebkit
