#pragma once

#include <functional>
#include <random>
#include <span>

#include "faith/tensor.hpp"

namespace faith {

// Compares backward() gradients against central finite differences
// (f(x+eps*e_i) - f(x-eps*e_i)) / (2*eps), coordinate by coordinate, and
// returns the maximum relative error with denominator
// max(|analytic|, |numeric|, 1e-8).
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& point, double eps);

// Multi-leaf variant: loss_fn() must rebuild the loss from the given
// parameter leaves on every call. Checks `sample_coords` randomly chosen
// coordinates across all parameters (all coordinates when <= 0).
double finite_diff_check_params(const std::function<Tensor()>& loss_fn,
                                std::span<Tensor> params, double eps,
                                int sample_coords, std::mt19937_64& rng);

}  // namespace faith
