#pragma once

// Nuisance estimation: outcome regression Q(a, w) = E[Y | A = a, W = w],
// treatment mechanism g(a | w) = P(A = a | W = w), and the doubly-robust
// pseudo-outcome
//
//   D(Q, g) = (2A - 1) / g(A|W) * (Y - Q(A, W)) + Q(1, W) - Q(0, W),
//
// whose conditional mean given W is the blip when either Q or g is correct.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "odtr/core.hpp"
#include "odtr/models.hpp"
#include "odtr/simplex.hpp"

namespace odtr {

struct OutcomeStackOptions {
    models::TreeParams tree{};
    EgOptions weights{500, 0.1, 1e-6, 0.0};
};

// Stacked regression of Y on [A | W] over {mean, main-terms logistic GLM,
// pairwise-interaction logistic GLM, regression tree}.
class OutcomeRegression {
public:
    OutcomeRegression() = default;
    OutcomeRegression(std::vector<std::string> names, std::vector<double> cv_risks,
                      std::shared_ptr<const models::StackedRegressor> stack,
                      std::vector<std::string> warnings);

    // Q(a_i, W_i) for each row.
    void predict(std::span<const int> a, const Matrix& W, std::span<double> out) const;
    // Q(a, W_i) for each row.
    std::vector<double> predict_at(int a, const Matrix& W) const;

    const std::vector<std::string>& candidate_names() const { return names_; }
    const std::vector<double>& weights() const { return stack_->weights(); }
    const std::vector<double>& cv_risks() const { return cv_risks_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    // Regressor over [A | W], for plug-in contrasts and serialization.
    models::RegressorPtr model() const { return stack_; }

private:
    std::vector<std::string> names_;
    std::vector<double> cv_risks_;
    std::shared_ptr<const models::StackedRegressor> stack_;
    std::vector<std::string> warnings_;
};

// Fits the stack on exactly the rows of `data`; `folds` partitions those rows
// for the stacking weights. A candidate whose design is singular in any fold
// is dropped with a warning.
OutcomeRegression fit_outcome_regression(const Dataset& data, const FoldAssignment& folds,
                                         const OutcomeStackOptions& opts = {});

// Intercept-only propensity, truncated to [0.01, 0.99].
class TreatmentMechanism {
public:
    static constexpr double kTruncation = 0.01;

    explicit TreatmentMechanism(double treated_probability);
    double treated_probability() const { return p1_; }
    double prob(int a) const { return a == 1 ? p1_ : 1.0 - p1_; }
    std::vector<double> predict(std::span<const int> a) const;

private:
    double p1_;
};

// Throws PositivityViolation when one arm is absent.
TreatmentMechanism fit_treatment_mechanism(const Dataset& data);

// Nuisance predictions evaluated on a set of rows.
struct NuisancePredictions {
    std::vector<double> QA;  // Q(A_i, W_i)
    std::vector<double> Q1;  // Q(1, W_i)
    std::vector<double> Q0;  // Q(0, W_i)
    std::vector<double> gA;  // g(A_i | W_i)
};

NuisancePredictions predict_nuisance(const OutcomeRegression& Q, const TreatmentMechanism& g,
                                     const Dataset& data);

inline double pseudo_outcome_value(double y, int a, double gA, double q1, double q0) {
    const double qa = a == 1 ? q1 : q0;
    return (2.0 * a - 1.0) / gA * (y - qa) + q1 - q0;
}

std::vector<double> pseudo_outcome(const Dataset& data, const NuisancePredictions& nuisance);
std::vector<double> pseudo_outcome(const Dataset& data, const OutcomeRegression& Q,
                                   const TreatmentMechanism& g);

}  // namespace odtr
