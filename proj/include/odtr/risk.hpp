#pragma once

// Cross-validated risks of candidate combinations and the search for the
// simplex weights alpha.
//
// Two risks are supported: mean squared error of a blip against the
// pseudo-outcome D, and the negative CV-TMLE estimate of the mean outcome
// under a rule. Three metalearners turn alpha into a rule: discrete
// selection, a convex combination of blips, and a weighted majority vote.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "odtr/core.hpp"

namespace odtr {

// Validation-fold predictions of every candidate, with the nuisance values
// each row received from its own training fold.
struct CandidatePredictions {
    FoldAssignment folds;
    std::vector<std::string> names;
    // blip[j] is empty for a candidate that outputs only a rule.
    std::vector<std::vector<double>> blip;
    std::vector<std::vector<int>> rule;

    std::vector<int> A;
    std::vector<double> Y;
    std::vector<double> QA, Q1, Q0, gA, D;

    std::size_t candidates() const { return names.size(); }
    std::size_t rows() const { return A.size(); }
    bool all_blip() const;
    // Throws std::invalid_argument when lengths disagree.
    void validate() const;
    // Same rows, only the listed candidates, in the listed order.
    CandidatePredictions select(std::span<const std::size_t> candidates) const;
};

// sum_j alpha_j B_j per row. Every candidate must be blip-based.
std::vector<double> combine_blip(const CandidatePredictions& preds, const WeightVector& alpha);
// indicator(sum_j alpha_j d_j > 1/2) per row.
TreatmentRule combine_vote(const CandidatePredictions& preds, const WeightVector& alpha);

struct RiskValue {
    double value = 0.0;
    Risk kind = Risk::MSE;
};

RiskValue risk_mse(std::span<const double> blip, std::span<const double> D);

// One fold of CV-TMLE for the mean outcome under rule d.
struct TmleFoldInput {
    std::span<const int> A;
    std::span<const double> Y, QA, Q1, Q0, gA;
    std::span<const int> d;
};

struct TmleResult {
    double estimate = 0.0;
    double epsilon = 0.0;
    // mean_i H_i (Y_i - Q_eps(A_i, W_i)) at the returned epsilon
    double score = 0.0;
    int newton_steps = 0;
    bool bisection = false;
};

struct TmleOptions {
    double clamp = 0.005;
    int max_newton = 50;
    double tolerance = 1e-10;
    double bracket = 50.0;
};

TmleResult target_mean_under_rule(const TmleFoldInput& fold, const TmleOptions& opts = {});

struct CvTmleResult {
    double estimate = 0.0;  // fold-size weighted mean of the fold estimates
    std::vector<TmleResult> folds;
};

CvTmleResult tmle_mean_under_rule(const CandidatePredictions& preds, std::span<const int> rule,
                                  const TmleOptions& opts = {});

// Evaluates CV-TMLE for many rules on the same predictions. Logits and
// per-fold row lists are computed once.
class RuleValueEstimator {
public:
    explicit RuleValueEstimator(const CandidatePredictions& preds, TmleOptions opts = {});
    double estimate(std::span<const int> rule) const;
    CvTmleResult evaluate(std::span<const int> rule) const;

private:
    struct Fold {
        std::vector<std::size_t> rows;
    };
    TmleOptions opts_;
    std::vector<Fold> folds_;
    std::vector<int> A_;
    std::vector<double> Y_, offA_, off1_, off0_, invg_;
    mutable std::vector<double> off_buf_, w_buf_, y_buf_, offd_buf_;
};

struct WeightSearchOptions {
    // Blip combination with MSE
    int eg_iterations = 2000;
    double eg_step = 0.05;
    double eg_tolerance = 1e-10;
    // Derivative-free search for the rule-value risk and for the vote
    int dirichlet_draws = 1000;
    int pair_rounds = 200;
    int grid_points = 11;
};

struct WeightFit {
    WeightVector alpha;
    double cv_risk = 0.0;
    std::vector<double> candidate_risks;  // risk of each vertex
};

// CV risk of alpha under the given risk and metalearner.
double cv_risk(const CandidatePredictions& preds, Risk risk, Metalearner metalearner,
               const WeightVector& alpha);

// Dirichlet draws come from derive_seed(seed, "alpha.dirichlet").
WeightFit optimize_weights(const CandidatePredictions& preds, Risk risk, Metalearner metalearner,
                           std::uint64_t seed, const WeightSearchOptions& opts = {});

}  // namespace odtr
