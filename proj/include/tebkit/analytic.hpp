#pragma once

#include <cstdint>
#include <vector>

#include "tebkit/dataset.hpp"

namespace tebkit {

/// Standard normal CDF, computed as erfc(-z/sqrt 2)/2. The C library erfc
/// is accurate to a few ulp, far inside the 1e-9 absolute budget on |z| <= 8.
/// Throws DomainError for non-finite z.
double normal_cdf(double z);

/// AD of the true outcome in the scalar RCT: Phi(1/sqrt(2 + noise_var)) - 1/2.
double analytic_ad(double noise_var);

/// AD of the 0.5-thresholded oracle prediction: Phi(1/sqrt 2) - 1/2.
/// Does not depend on the outcome noise.
double analytic_discretized_ad();

struct BoundInput {
  double epsilon = 0.0;
  double p_treat = 0.5;
};

/// Worst-case |TEB| of a classifier with error rate epsilon:
/// epsilon / min(p_T, 1 - p_T).
double teb_upper_bound(const BoundInput& input);

enum class FlipDirection { overestimate, underestimate };

/// Hard predictions equal to the labels except for floor(epsilon * n)
/// samples of the smaller treatment arm (treated on ties), flipped in one
/// direction. Flips are applied to the earliest eligible samples in dataset
/// order. Throws InfeasibleError when there are too few eligible samples and
/// EstimationError when a treatment arm is empty.
std::vector<std::uint8_t> worst_case_predictor(
    const Dataset& dataset, double epsilon,
    FlipDirection direction = FlipDirection::overestimate);

}  // namespace tebkit
