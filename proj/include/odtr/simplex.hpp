#pragma once

// Least squares over the probability simplex:
//   minimize mean_i (y_i - sum_j alpha_j z_ij)^2  s.t. alpha >= 0, sum alpha = 1
// where the columns z_j are candidate predictions.

#include <span>
#include <vector>

namespace odtr {

struct EgOptions {
    int iterations = 500;
    double step = 0.1;
    // Stop when max |alpha change| falls below this.
    double weight_tol = 1e-6;
    // Stop when the objective improves by less than this (0 disables).
    double objective_tol = 0.0;
};

// Exponentiated-gradient descent from the uniform point.
std::vector<double> simplex_least_squares_eg(std::span<const std::vector<double>> columns,
                                             std::span<const double> y, const EgOptions& opts);

// Exact minimizer by a primal active-set method, warm-started from `start`
// (any point of the simplex).
std::vector<double> simplex_least_squares_exact(std::span<const std::vector<double>> columns,
                                                std::span<const double> y,
                                                std::vector<double> start);

double simplex_objective(std::span<const std::vector<double>> columns, std::span<const double> y,
                         std::span<const double> alpha);

}  // namespace odtr
