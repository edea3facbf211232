#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "odtr/simulation.hpp"

using namespace odtr;

namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// |estimate - published| within 3 Monte Carlo SEs plus half a unit of the
// published rounding.
void check_truth(double estimate, double se, double published, double rounding) {
    CAPTURE(estimate);
    CAPTURE(published);
    CHECK(std::abs(estimate - published) <= 3.0 * se + 0.5 * rounding);
}

ExperimentSpec small_spec(int reps, int threads) {
    ExperimentSpec s;
    s.dgp = Dgp::Two;
    s.n = 150;
    s.reps = reps;
    s.configs = {{Library::ParametricBlip, Metalearner::Discrete, Risk::MSE, 3, 0},
                 {Library::MLBlipPlusMaximizers, Metalearner::VoteCombination, Risk::MeanOutcomeUnderRule, 3, 0}};
    s.seed = 42;
    s.threads = threads;
    s.eval_rows = 2000;
    s.truth_draws = 100000;
    return s;
}

}  // namespace

TEST_CASE("true blip values") {
    const std::vector<double> zero{0, 0, 0, 0};
    CHECK(true_blip(Dgp::Two, zero) == doctest::Approx(expit(0.1) - 0.5).epsilon(1e-12));
    CHECK(true_blip(Dgp::Two, zero) == doctest::Approx(0.024979).epsilon(1e-4));
    const std::vector<double> root{-0.1, 3, -2, 1};
    CHECK(true_blip(Dgp::Two, root) == 0.0);
    CHECK(optimal_treatment(Dgp::Two, root) == 0);

    const double b1 = true_blip(Dgp::One, zero);
    const double hand = 0.5 * (expit(1 - 4.45) + expit(-2.0) - expit(1.0) - expit(-0.5));
    CHECK(b1 == doctest::Approx(hand).epsilon(1e-12));
    CHECK(b1 == doctest::Approx(-0.47928).epsilon(1e-4));

    // Monte Carlo contrast at w = 0: simulate Y under each arm.
    Rng rng(7);
    const int draws = 2000000;
    double y1 = 0, y0 = 0;
    for (int i = 0; i < draws; ++i) {
        y1 += uniform01(rng) < outcome_probability(Dgp::One, 1, zero);
        y0 += uniform01(rng) < outcome_probability(Dgp::One, 0, zero);
    }
    CHECK(std::abs((y1 - y0) / draws - b1) < 1e-3);
}

TEST_CASE("optimal rule of the second DGP is a threshold on W1") {
    const auto data = dgp_sample(Dgp::Two, 20000, 1);
    const auto rule = optimal_rule(Dgp::Two, data.W);
    for (std::size_t i = 0; i < data.size(); ++i) CHECK(rule.assignment[i] == (data.W(i, 0) > -0.1 ? 1 : 0));
}

TEST_CASE("sample moments") {
    const std::size_t n = 1000000;
    for (Dgp dgp : {Dgp::One, Dgp::Two}) {
        const auto data = dgp_sample(dgp, n, 2);
        for (std::size_t j = 0; j < kDgpCovariates; ++j) {
            const auto c = data.W.col(j);
            CHECK(std::abs(std::accumulate(c.begin(), c.end(), 0.0) / n) < 0.005);
        }
        double ya = 0, na = 0, y0 = 0, n0 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (data.A[i]) {
                ya += data.Y[i];
                ++na;
            } else {
                y0 += data.Y[i];
                ++n0;
            }
        }
        CHECK(std::abs(na / n - 0.5) < 0.005);
        if (dgp == Dgp::Two) CHECK(std::abs(y0 / n0 - 0.5) < 0.005);
        if (dgp == Dgp::One) CHECK(std::abs(ya / na - 0.4638) < 0.005);
    }
    CHECK(dgp_sample(Dgp::One, 10, 3).W == dgp_sample(Dgp::One, 10, 3).W);
    CHECK(dgp_sample(Dgp::One, 10, 3).Y == dgp_sample(Dgp::One, 10, 3).Y);
    CHECK_THROWS_AS(parse_dgp(3), InvalidConfiguration);
}

TEST_CASE("Monte Carlo truth reproduces the published constants") {
    const std::size_t N = 1000000;
    auto frac_se = [&](double p) { return std::sqrt(p * (1 - p) / N); };
    {
        const auto opt = monte_carlo_optimal(Dgp::One, N, 10);
        check_truth(opt.value, opt.std_error, 0.5626, 1e-4);
        check_truth(opt.fraction_treated, frac_se(0.55), 0.550, 1e-3);
        const auto t1 = monte_carlo_truth(Dgp::One, 1, N, 11);
        check_truth(t1.value, t1.std_error, 0.4638, 1e-4);
        const auto t0 = monte_carlo_truth(Dgp::One, 0, N, 12);
        check_truth(t0.value, t0.std_error, 0.4643, 1e-4);
    }
    {
        const CovariateRule threshold = [](std::span<const double> w) { return w[0] > -0.1 ? 1 : 0; };
        const auto opt = monte_carlo_truth(Dgp::Two, threshold, N, 13);
        check_truth(opt.value, opt.std_error, 0.5595, 1e-4);
        check_truth(opt.fraction_treated, frac_se(0.54), 0.540, 1e-3);
        const auto t1 = monte_carlo_truth(Dgp::Two, 1, N, 14);
        check_truth(t1.value, t1.std_error, 0.5152, 1e-4);
        const auto t0 = monte_carlo_truth(Dgp::Two, 0, N, 15);
        check_truth(t0.value, t0.std_error, 0.5000, 1e-4);
        CHECK(std::abs(monte_carlo_optimal(Dgp::Two, N, 13).value - opt.value) < 1e-12);
    }
}

TEST_CASE("rule metrics") {
    const auto sample = dgp_sample(Dgp::One, 200000, 20);
    const double optimal = 0.5626;
    const auto opt = optimal_rule(Dgp::One, sample.W).assignment;
    const auto m = evaluate_rule_metrics(Dgp::One, sample.W, opt, optimal);
    CHECK(m.accuracy == 1.0);
    CHECK(std::abs(m.regret) < 0.005);

    std::vector<int> anti(opt.size());
    for (std::size_t i = 0; i < opt.size(); ++i) anti[i] = 1 - opt[i];
    CHECK(evaluate_rule_metrics(Dgp::One, sample.W, anti, optimal).accuracy == 0.0);

    const std::vector<int> all(opt.size(), 1);
    const auto ta = evaluate_rule_metrics(Dgp::One, sample.W, all, optimal);
    CHECK(std::abs(ta.value - 0.4638) < 0.005);
    CHECK(std::abs(ta.regret + 0.0988) < 0.005);
    CHECK(ta.fraction_treated == 1.0);

    // Invariant to row order of the evaluation sample.
    std::vector<std::size_t> perm(sample.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    const auto shuffled = sample.subset(perm);
    std::vector<int> anti_s(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) anti_s[i] = anti[perm[i]];
    const auto a = evaluate_rule_metrics(Dgp::One, sample.W, anti, optimal);
    const auto b = evaluate_rule_metrics(Dgp::One, shuffled.W, anti_s, optimal);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
    CHECK(a.fraction_treated == doctest::Approx(b.fraction_treated).epsilon(1e-12));
}

TEST_CASE("GLM baseline recovers a linear blip") {
    const auto base = dgp_sample(Dgp::Two, 500, 21);
    auto data = base;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double a = data.A[i];
        data.Y[i] = 0.5 + 0.02 * data.W(i, 0) - 0.01 * data.W(i, 3) + a * (0.1 + 0.03 * data.W(i, 1));
    }
    const auto probe = dgp_sample(Dgp::Two, 50, 22);
    const auto b = glm_baseline_blip(data, probe.W);
    for (std::size_t i = 0; i < probe.size(); ++i) CHECK(b[i] == doctest::Approx(0.1 + 0.03 * probe.W(i, 1)).epsilon(1e-9));
}

TEST_CASE("type-7 quantiles") {
    std::vector<double> v(10);
    std::iota(v.begin(), v.end(), 1.0);
    std::reverse(v.begin(), v.end());
    CHECK(quantile(v, 0.025) == doctest::Approx(1.225));
    CHECK(quantile(v, 0.975) == doctest::Approx(9.775));
    CHECK(quantile(v, 0.5) == doctest::Approx(5.5));
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 10.0);
    CHECK(quantile({3.0}, 0.3) == 3.0);
    CHECK(std::isnan(quantile({}, 0.5)));
}

TEST_CASE("experiment summaries") {
    SUBCASE("one replication leaves variances undefined") {
        const auto r = run_experiment(small_spec(1, 1));
        REQUIRE(r.summary.size() == 3);
        CHECK(r.summary.back().config == kBaselineLabel);
        for (const auto& row : r.summary) {
            CHECK(std::isnan(row.var_regret));
            CHECK(std::isnan(row.relative_variance));
            CHECK(row.reps_ok + row.reps_failed == 1);
        }
    }
    SUBCASE("baseline has relative variance one and threads do not matter") {
        const auto a = run_experiment(small_spec(4, 1));
        const auto b = run_experiment(small_spec(4, 3));
        CHECK(a.summary.back().relative_variance == doctest::Approx(1.0));
        REQUIRE(a.replications.size() == 12);
        REQUIRE(a.replications.size() == b.replications.size());
        for (std::size_t i = 0; i < a.replications.size(); ++i) {
            const auto& x = a.replications[i];
            const auto& y = b.replications[i];
            CHECK(x.replication == y.replication);
            CHECK(x.config == y.config);
            CHECK(x.metrics.value == y.metrics.value);
            CHECK(x.metrics.accuracy == y.metrics.accuracy);
            CHECK(x.cv_risk == y.cv_risk);
        }
        for (std::size_t k = 0; k < a.summary.size(); ++k) {
            const auto& x = a.summary[k];
            const auto& y = b.summary[k];
            CHECK(x.mean_value == y.mean_value);
            CHECK(x.var_regret == y.var_regret);
            CHECK(x.value_p025 == y.value_p025);
        }
        // Summary rows agree with the per-replication records.
        for (const auto& row : a.summary) {
            std::vector<double> acc;
            for (const auto& rec : a.replications)
                if (rec.config == row.config && rec.ok) acc.push_back(rec.metrics.accuracy);
            REQUIRE(static_cast<int>(acc.size()) == row.reps_ok);
            CHECK(row.mean_accuracy == doctest::Approx(std::accumulate(acc.begin(), acc.end(), 0.0) / acc.size()));
        }
        CHECK(a.optimal_value == doctest::Approx(0.5595).epsilon(0.02));
    }
    SUBCASE("replication data does not depend on the config list") {
        auto s1 = small_spec(2, 1);
        auto s2 = s1;
        s2.configs = {s1.configs[1]};
        const auto a = run_experiment(s1);
        const auto b = run_experiment(s2);
        std::vector<double> va, vb;
        for (const auto& r : a.replications)
            if (r.config == kBaselineLabel) va.push_back(r.metrics.value);
        for (const auto& r : b.replications)
            if (r.config == kBaselineLabel) vb.push_back(r.metrics.value);
        REQUIRE(va.size() == 2);
        CHECK(va == vb);
    }
}
