#include "odtr/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "odtr/models.hpp"

namespace odtr {
namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

void draw_covariates(Rng& rng, std::normal_distribution<double>& normal, double* w) {
    for (std::size_t j = 0; j < kDgpCovariates; ++j) w[j] = normal(rng);
}

}  // namespace

Dgp parse_dgp(int id) {
    if (id == 1) return Dgp::One;
    if (id == 2) return Dgp::Two;
    throw InvalidConfiguration("dgp must be 1 or 2, got " + std::to_string(id));
}

double outcome_probability(Dgp dgp, int a, std::span<const double> w) {
    const double A = a;
    if (dgp == Dgp::One) {
        const double w1 = w[0], w2 = w[1], w3 = w[2];
        return 0.5 * expit(1.0 - w1 * w1 + 3.0 * w2 + 5.0 * w3 * w3 * A - 4.45 * A) +
               0.5 * expit(-0.5 - w3 + 2.0 * w1 * w2 + 3.0 * std::abs(w2) * A - 1.5 * A);
    }
    return expit(w[0] + 0.1 * A + w[0] * A);
}

double true_blip(Dgp dgp, std::span<const double> w) {
    return outcome_probability(dgp, 1, w) - outcome_probability(dgp, 0, w);
}

int optimal_treatment(Dgp dgp, std::span<const double> w) { return true_blip(dgp, w) > 0.0 ? 1 : 0; }

TreatmentRule optimal_rule(Dgp dgp, const Matrix& W) {
    TreatmentRule r;
    r.assignment.resize(W.rows());
    for (std::size_t i = 0; i < W.rows(); ++i) r.assignment[i] = optimal_treatment(dgp, W.row(i));
    return r;
}

Dataset dgp_sample(Dgp dgp, std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed, "dgp", static_cast<std::uint64_t>(dgp));
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix W(n, kDgpCovariates);
    std::vector<int> A(n);
    std::vector<double> Y(n);
    double w[kDgpCovariates];
    for (std::size_t i = 0; i < n; ++i) {
        draw_covariates(rng, normal, w);
        for (std::size_t j = 0; j < kDgpCovariates; ++j) W(i, j) = w[j];
        A[i] = uniform01(rng) < 0.5 ? 1 : 0;
        Y[i] = uniform01(rng) < outcome_probability(dgp, A[i], w) ? 1.0 : 0.0;
    }
    return Dataset::make(std::move(W), std::move(A), std::move(Y));
}

TruthEstimate monte_carlo_truth(Dgp dgp, const CovariateRule& rule, std::size_t draws,
                                std::uint64_t seed) {
    if (draws == 0) throw std::invalid_argument("monte_carlo_truth: no draws");
    Rng rng = make_rng(seed, "truth", static_cast<std::uint64_t>(dgp));
    std::normal_distribution<double> normal(0.0, 1.0);
    double w[kDgpCovariates];
    // Welford accumulation of p(d(w), w).
    double m = 0.0, m2 = 0.0, treated = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        draw_covariates(rng, normal, w);
        const int d = rule(std::span<const double>(w, kDgpCovariates));
        const double p = outcome_probability(dgp, d, w);
        treated += d;
        const double delta = p - m;
        m += delta / static_cast<double>(i + 1);
        m2 += delta * (p - m);
    }
    const double nd = static_cast<double>(draws);
    TruthEstimate t;
    t.value = m;
    t.fraction_treated = treated / nd;
    t.std_error = draws > 1 ? std::sqrt(m2 / (nd - 1.0) / nd) : 0.0;
    return t;
}

TruthEstimate monte_carlo_truth(Dgp dgp, int constant_treatment, std::size_t draws,
                                std::uint64_t seed) {
    return monte_carlo_truth(dgp, [constant_treatment](std::span<const double>) { return constant_treatment; },
                             draws, seed);
}

TruthEstimate monte_carlo_optimal(Dgp dgp, std::size_t draws, std::uint64_t seed) {
    return monte_carlo_truth(dgp, [dgp](std::span<const double> w) { return optimal_treatment(dgp, w); },
                             draws, seed);
}

RuleMetrics evaluate_rule_metrics(Dgp dgp, const Matrix& W, std::span<const int> rule,
                                  double optimal_value) {
    if (rule.size() != W.rows()) throw std::invalid_argument("evaluate_rule_metrics: length mismatch");
    if (W.rows() == 0) throw std::invalid_argument("evaluate_rule_metrics: empty sample");
    RuleMetrics m;
    double agree = 0.0, value = 0.0, treated = 0.0;
    for (std::size_t i = 0; i < W.rows(); ++i) {
        const auto w = W.row(i);
        agree += rule[i] == optimal_treatment(dgp, w) ? 1.0 : 0.0;
        value += outcome_probability(dgp, rule[i], w);
        treated += rule[i];
    }
    const double n = static_cast<double>(W.rows());
    m.accuracy = agree / n;
    m.value = value / n;
    m.regret = m.value - optimal_value;
    m.fraction_treated = treated / n;
    return m;
}

std::vector<double> glm_baseline_blip(const Dataset& data, const Matrix& W) {
    const std::size_t n = data.size(), p = data.covariates();
    Matrix X(n, 1 + 2 * p);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = data.A[i];
        X(i, 0) = a;
        for (std::size_t j = 0; j < p; ++j) {
            X(i, 1 + j) = data.W(i, j);
            X(i, 1 + p + j) = a * data.W(i, j);
        }
    }
    // Columns of the expansion: 1, A, W, A W.
    const auto fit = models::fit_linear({models::Terms::Main}, X, data.Y);
    const auto& beta = fit->coefficients();
    std::vector<double> blip(W.rows(), beta[1]);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < W.rows(); ++i) blip[i] += beta[2 + p + j] * W(i, j);
    return blip;
}

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<ReplicationRecord> run_replication(const ExperimentSpec& spec, int r,
                                               double optimal_value) {
    const auto rep = static_cast<std::uint64_t>(r);
    const Dataset data = dgp_sample(spec.dgp, spec.n, derive_seed(spec.seed, "replication.data", rep));
    const Dataset eval = spec.evaluation == EvaluationSample::Fresh
                             ? dgp_sample(spec.dgp, spec.eval_rows,
                                          derive_seed(spec.seed, "replication.eval", rep))
                             : data;
    const std::uint64_t fit_seed = derive_seed(spec.seed, "replication.fit", rep);

    std::vector<ReplicationRecord> out(spec.configs.size() + 1);
    for (std::size_t c = 0; c < spec.configs.size(); ++c) {
        out[c].replication = r;
        out[c].config = spec.configs[c].label();
    }
    out.back().replication = r;
    out.back().config = kBaselineLabel;

    auto record = [&](std::size_t c, const FittedODTR& fit) {
        const auto pred = fit.predict(eval.W);
        out[c].metrics = evaluate_rule_metrics(spec.dgp, eval.W, pred.rule.assignment, optimal_value);
        out[c].cv_risk = fit.cv_risk;
        out[c].ok = true;
    };

    // Configurations that share a fold count are fitted together.
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t c = 0; c < spec.configs.size(); ++c) groups[spec.configs[c].folds].push_back(c);
    for (const auto& [folds, members] : groups) {
        std::vector<EnsembleConfig> cfgs;
        for (std::size_t c : members) {
            cfgs.push_back(spec.configs[c]);
            cfgs.back().seed = fit_seed;
        }
        try {
            const auto fits = fit_odtr_superlearners(data, cfgs);
            for (std::size_t k = 0; k < members.size(); ++k) record(members[k], fits[k]);
        } catch (const std::exception&) {
            // Isolate the failure to the configurations that actually fail.
            for (std::size_t k = 0; k < members.size(); ++k) {
                try {
                    record(members[k], fit_odtr_superlearner(data, cfgs[k]));
                } catch (const std::exception& e) {
                    out[members[k]].error = e.what();
                }
            }
        }
    }

    try {
        const auto blip = glm_baseline_blip(data, eval.W);
        const auto rule = TreatmentRule::from_scores(blip);
        out.back().metrics = evaluate_rule_metrics(spec.dgp, eval.W, rule.assignment, optimal_value);
        out.back().ok = true;
    } catch (const std::exception& e) {
        out.back().error = e.what();
    }
    return out;
}

SummaryRow summarize(const std::string& label, const std::vector<const ReplicationRecord*>& recs) {
    SummaryRow s;
    s.config = label;
    std::vector<double> acc, value, regret, treated;
    for (const auto* r : recs) {
        if (!r->ok) {
            ++s.reps_failed;
            continue;
        }
        ++s.reps_ok;
        acc.push_back(r->metrics.accuracy);
        value.push_back(r->metrics.value);
        regret.push_back(r->metrics.regret);
        treated.push_back(r->metrics.fraction_treated);
    }
    s.mean_accuracy = mean(acc);
    s.mean_value = mean(value);
    s.mean_regret = mean(regret);
    s.var_regret = sample_variance(regret);
    s.value_p025 = quantile(value, 0.025);
    s.value_p975 = quantile(value, 0.975);
    s.mean_fraction_treated = mean(treated);
    return s;
}

}  // namespace

MetricsReport run_experiment(const ExperimentSpec& spec) {
    if (spec.reps < 1) throw InvalidConfiguration("reps must be at least 1");
    if (spec.n < 2) throw InvalidConfiguration("n must be at least 2");
    for (const auto& c : spec.configs) {
        validate_config(c);
        if (static_cast<std::size_t>(c.folds) > spec.n)
            throw InvalidConfiguration("folds exceed the sample size");
    }

    MetricsReport report;
    report.optimal_value =
        monte_carlo_optimal(spec.dgp, spec.truth_draws, derive_seed(spec.seed, "truth")).value;

    std::vector<std::vector<ReplicationRecord>> per_rep(static_cast<std::size_t>(spec.reps));
    std::atomic<int> next{0}, done{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (int r; (r = next.fetch_add(1)) < spec.reps;) {
            per_rep[static_cast<std::size_t>(r)] = run_replication(spec, r, report.optimal_value);
            const int d = ++done;
            if (spec.progress) {
                std::lock_guard<std::mutex> lock(progress_mutex);
                spec.progress(d, spec.reps);
            }
        }
    };
    const int threads = std::clamp(spec.threads, 1, spec.reps);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    const std::size_t K = spec.configs.size() + 1;
    for (auto& recs : per_rep)
        for (auto& r : recs) report.replications.push_back(std::move(r));

    for (std::size_t c = 0; c < K; ++c) {
        std::vector<const ReplicationRecord*> recs;
        for (std::size_t r = 0; r < per_rep.size(); ++r) recs.push_back(&report.replications[r * K + c]);
        report.summary.push_back(summarize(report.replications[c].config, recs));
    }
    const double base = report.summary.back().var_regret;
    for (auto& s : report.summary)
        s.relative_variance = std::isfinite(s.var_regret) && std::isfinite(base) && base > 0.0
                                  ? s.var_regret / base
                                  : std::numeric_limits<double>::quiet_NaN();
    return report;
}

}  // namespace odtr
