#pragma once

// The two simulated data-generating processes, their analytic blips and
// optimal rules, a Monte Carlo oracle for rule values, and the replication
// harness that compares ensemble configurations.
//
//   W1..W4 ~ N(0, 1), A ~ Bernoulli(0.5), Y ~ Bernoulli(p(A, W))
//   DGP 1: p = 0.5 expit(1 - W1^2 + 3 W2 + 5 W3^2 A - 4.45 A)
//            + 0.5 expit(-0.5 - W3 + 2 W1 W2 + 3 |W2| A - 1.5 A)
//   DGP 2: p = expit(W1 + 0.1 A + W1 A)

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "odtr/core.hpp"
#include "odtr/superlearner.hpp"

namespace odtr {

enum class Dgp { One = 1, Two = 2 };

Dgp parse_dgp(int id);
inline constexpr std::size_t kDgpCovariates = 4;

// p(a, w); w holds at least W1..W4.
double outcome_probability(Dgp dgp, int a, std::span<const double> w);
// p(1, w) - p(0, w)
double true_blip(Dgp dgp, std::span<const double> w);
// indicator(true_blip > 0)
int optimal_treatment(Dgp dgp, std::span<const double> w);
TreatmentRule optimal_rule(Dgp dgp, const Matrix& W);

// n draws from stream ("dgp", id) of `seed`.
Dataset dgp_sample(Dgp dgp, std::size_t n, std::uint64_t seed);

using CovariateRule = std::function<int(std::span<const double>)>;

struct TruthEstimate {
    double value = 0.0;             // mean of p(rule(w), w)
    double fraction_treated = 0.0;  // mean of rule(w)
    double std_error = 0.0;         // of `value`
};

TruthEstimate monte_carlo_truth(Dgp dgp, const CovariateRule& rule, std::size_t draws,
                                std::uint64_t seed);
TruthEstimate monte_carlo_truth(Dgp dgp, int constant_treatment, std::size_t draws,
                                std::uint64_t seed);
TruthEstimate monte_carlo_optimal(Dgp dgp, std::size_t draws, std::uint64_t seed);

struct RuleMetrics {
    double accuracy = 0.0;  // agreement with the optimal rule
    double value = 0.0;     // mean of p(d(w), w)
    double regret = 0.0;    // value - optimal value
    double fraction_treated = 0.0;
};

// `optimal_value` is the population mean outcome under the optimal rule.
RuleMetrics evaluate_rule_metrics(Dgp dgp, const Matrix& W, std::span<const int> rule,
                                  double optimal_value);

// Reference estimator: least squares of Y on [1, W, A, A W]; the implied
// blip is gamma_0 + gamma' W.
std::vector<double> glm_baseline_blip(const Dataset& data, const Matrix& W);

enum class EvaluationSample { Fresh, Estimation };

struct ExperimentSpec {
    Dgp dgp = Dgp::One;
    std::size_t n = 1000;
    int reps = 200;
    std::vector<EnsembleConfig> configs;
    std::uint64_t seed = 0;
    int threads = 1;
    EvaluationSample evaluation = EvaluationSample::Fresh;
    std::size_t eval_rows = 10000;
    std::size_t truth_draws = 1000000;
    // Called after each finished replication with (done, total).
    std::function<void(int, int)> progress;
};

inline constexpr const char* kBaselineLabel = "glm_baseline";

struct ReplicationRecord {
    int replication = 0;
    std::string config;
    bool ok = false;
    std::string error;
    RuleMetrics metrics;
    double cv_risk = 0.0;
};

struct SummaryRow {
    std::string config;
    int reps_ok = 0;
    int reps_failed = 0;
    double mean_accuracy = 0.0;
    double mean_value = 0.0;
    double mean_regret = 0.0;
    double var_regret = 0.0;         // NaN when reps_ok < 2
    double relative_variance = 0.0;  // var_regret / baseline var_regret, NaN when undefined
    double value_p025 = 0.0;
    double value_p975 = 0.0;
    double mean_fraction_treated = 0.0;
};

struct MetricsReport {
    double optimal_value = 0.0;
    std::vector<ReplicationRecord> replications;  // ordered by (replication, config)
    std::vector<SummaryRow> summary;              // configs in input order, baseline last
};

// Replication r draws its data from derive_seed(seed, "replication.data", r),
// its evaluation sample from "replication.eval", and fits every config with
// seed derive_seed(seed, "replication.fit", r). Results do not depend on
// `threads`.
MetricsReport run_experiment(const ExperimentSpec& spec);

// Type-7 sample quantile; `values` need not be sorted.
double quantile(std::vector<double> values, double prob);

}  // namespace odtr
