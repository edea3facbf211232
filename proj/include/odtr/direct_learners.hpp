#pragma once

// Candidates that output a rule without a blip: outcome-weighted learning
// with a logistic surrogate, and the static treat-all / treat-none rules.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "odtr/core.hpp"
#include "odtr/models.hpp"
#include "odtr/nuisance.hpp"

namespace odtr {

// Minimizes (1/n) sum_i Y_i / g(A_i|W_i) * log(1 + exp(-s_i f(W_i))) + lambda |beta|^2
// over linear f(W) = b + beta'W, with s_i = 2 A_i - 1. The intercept is not penalized.
struct OwlSpec {
    std::vector<double> lambda_grid{0.001, 0.01, 0.1, 1.0};
    int cv_folds = 5;
    // Damped Newton with backtracking. Stops when the gradient norm drops
    // below grad_tol; unpenalized separable data hits max_newton instead.
    int max_newton = 100;
    double grad_tol = 1e-10;
};

struct OwlFit {
    // f(W); the rule treats where f(W) > 0 (sign(0) counts as control).
    std::shared_ptr<const models::LinearModel> decision;
    double lambda = 0.0;
    std::vector<std::string> diagnostics;

    TreatmentRule rule(const Matrix& W) const;
};

OwlFit fit_owl(const OwlSpec& spec, const Dataset& data, const TreatmentMechanism& g,
               std::uint64_t seed);

// Penalized surrogate objective at coef = (b, beta_1..beta_p).
double owl_objective(const Dataset& data, const TreatmentMechanism& g,
                     std::span<const double> coef, double lambda);

// Newton iterations from zero for one lambda, exposed for tests.
std::vector<double> minimize_owl_objective(const Dataset& data, const TreatmentMechanism& g,
                                           double lambda, const OwlSpec& spec);

struct StaticRuleSpec {
    int value = 0;
};

TreatmentRule static_rule(const StaticRuleSpec& spec, std::size_t n);
// Constant decision function whose sign encodes the static rule.
models::RegressorPtr static_decision(const StaticRuleSpec& spec);

}  // namespace odtr
