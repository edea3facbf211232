#include "odtr/direct_learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "odtr/kernels.hpp"

namespace odtr {
namespace {

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

struct WeightedProblem {
    Matrix X;  // [1 | W]
    std::vector<double> weight;
    std::vector<double> sign;
};

WeightedProblem make_problem(const Dataset& data, const TreatmentMechanism& g) {
    WeightedProblem p;
    p.X = models::FeatureMap{models::Terms::Main}.expand(data.W);
    p.weight.resize(data.size());
    p.sign.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        p.weight[i] = data.Y[i] / g.prob(data.A[i]);
        p.sign[i] = 2.0 * data.A[i] - 1.0;
    }
    return p;
}

WeightedProblem select(const WeightedProblem& p, std::span<const std::size_t> rows) {
    WeightedProblem out;
    out.X = p.X.select_rows(rows);
    for (std::size_t i : rows) {
        out.weight.push_back(p.weight[i]);
        out.sign.push_back(p.sign[i]);
    }
    return out;
}

void decision_values(const Matrix& X, std::span<const double> coef, std::span<double> f) {
    std::fill(f.begin(), f.end(), 0.0);
    for (std::size_t k = 0; k < X.cols(); ++k) kernels::axpy(coef[k], X.col(k), f);
}

// Mean weighted surrogate loss, unpenalized.
double surrogate_loss(const WeightedProblem& p, std::span<const double> coef) {
    const std::size_t n = p.weight.size();
    std::vector<double> f(n);
    decision_values(p.X, coef, f);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p.weight[i] * softplus(-p.sign[i] * f[i]);
    return s / static_cast<double>(n);
}

double penalized(const WeightedProblem& p, std::span<const double> coef, double lambda) {
    double penalty = 0.0;
    for (std::size_t j = 1; j < coef.size(); ++j) penalty += coef[j] * coef[j];
    return surrogate_loss(p, coef) + lambda * penalty;
}

std::vector<double> minimize(const WeightedProblem& p, double lambda, const OwlSpec& spec) {
    const std::size_t n = p.weight.size();
    const std::size_t k = p.X.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> coef(k, 0.0), trial(k), grad(k), f(n), e(n), r(n), h(n);
    double current = penalized(p, coef, lambda);
    for (int iter = 0; iter < spec.max_newton; ++iter) {
        decision_values(p.X, coef, f);
        for (std::size_t i = 0; i < n; ++i) f[i] = -p.sign[i] * f[i];
        kernels::expit(f, e);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = -p.weight[i] * p.sign[i] * e[i];
            h[i] = p.weight[i] * e[i] * (1.0 - e[i]);
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            grad[j] = kernels::dot(r, p.X.col(j)) * inv_n + (j > 0 ? 2.0 * lambda * coef[j] : 0.0);
            norm += grad[j] * grad[j];
        }
        if (std::sqrt(norm) < spec.grad_tol) break;

        std::vector<double> H(k * k);
        std::vector<double> hx(n);
        for (std::size_t a = 0; a < k; ++a) {
            const auto xa = p.X.col(a);
            for (std::size_t i = 0; i < n; ++i) hx[i] = h[i] * xa[i];
            for (std::size_t b = a; b < k; ++b) H[a * k + b] = H[b * k + a] = kernels::dot(hx, p.X.col(b)) * inv_n;
            H[a * k + a] += (a > 0 ? 2.0 * lambda : 0.0) + 1e-12;
        }
        std::vector<double> dir = grad;
        if (!models::cholesky_solve(H, dir, k)) dir = grad;

        double t = 1.0, next = current;
        for (int back = 0; back < 60; ++back, t *= 0.5) {
            for (std::size_t j = 0; j < k; ++j) trial[j] = coef[j] - t * dir[j];
            next = penalized(p, trial, lambda);
            if (next <= current) break;
        }
        if (!(next <= current)) break;
        coef = trial;
        const bool stalled = current - next <= 1e-15 * std::max(1.0, std::abs(current));
        current = next;
        if (stalled) break;
    }
    return coef;
}

}  // namespace

double owl_objective(const Dataset& data, const TreatmentMechanism& g,
                     std::span<const double> coef, double lambda) {
    return penalized(make_problem(data, g), coef, lambda);
}

std::vector<double> minimize_owl_objective(const Dataset& data, const TreatmentMechanism& g,
                                           double lambda, const OwlSpec& spec) {
    return minimize(make_problem(data, g), lambda, spec);
}

TreatmentRule OwlFit::rule(const Matrix& W) const {
    return TreatmentRule::from_scores(decision->predict(W));
}

OwlFit fit_owl(const OwlSpec& spec, const Dataset& data, const TreatmentMechanism& g,
               std::uint64_t seed) {
    if (spec.lambda_grid.empty()) throw InvalidConfiguration("OWL: empty lambda grid");
    for (double l : spec.lambda_grid)
        if (!(l >= 0.0)) throw InvalidConfiguration("OWL: lambda must be nonnegative");
    for (double y : data.Y)
        if (y < 0.0) throw DataError("OWL: outcome weights require Y >= 0");

    const std::size_t n = data.size();
    const std::size_t k = data.covariates() + 1;
    const models::FeatureMap main{models::Terms::Main};
    OwlFit out;

    const auto problem = make_problem(data, g);
    bool all_zero = true;
    for (double w : problem.weight) all_zero = all_zero && w == 0.0;
    if (all_zero) {
        std::vector<double> coef(k, 0.0);
        coef[0] = -1.0;
        out.decision = std::make_shared<models::LinearModel>(main, models::Link::Identity, coef);
        out.diagnostics.push_back("owl: all outcome weights are zero; returning treat-none");
        return out;
    }

    double best_lambda = spec.lambda_grid.front();
    const int folds = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(spec.cv_folds), n));
    if (spec.lambda_grid.size() > 1 && folds >= 2) {
        const auto assignment = make_folds(n, folds, derive_seed(seed, "owl.folds"));
        double best_loss = std::numeric_limits<double>::infinity();
        for (double lambda : spec.lambda_grid) {
            double total = 0.0;
            for (int v = 1; v <= folds; ++v) {
                const auto train = assignment.training_rows(v);
                const auto valid = assignment.validation_rows(v);
                const auto coef = minimize(select(problem, train), lambda, spec);
                total += surrogate_loss(select(problem, valid), coef) *
                         static_cast<double>(valid.size());
            }
            if (total < best_loss) {
                best_loss = total;
                best_lambda = lambda;
            }
        }
    }
    out.lambda = best_lambda;
    out.decision = std::make_shared<models::LinearModel>(main, models::Link::Identity,
                                                         minimize(problem, best_lambda, spec));
    return out;
}

TreatmentRule static_rule(const StaticRuleSpec& spec, std::size_t n) {
    return TreatmentRule::constant(n, spec.value);
}

models::RegressorPtr static_decision(const StaticRuleSpec& spec) {
    return std::make_shared<models::ConstantModel>(spec.value != 0 ? 1.0 : -1.0);
}

}  // namespace odtr
