#include <algorithm>
#include <cmath>

#include "odtr/kernels.hpp"
#include "odtr/models.hpp"

namespace odtr::models {

std::size_t FeatureMap::width(std::size_t p) const {
    switch (terms) {
        case Terms::Intercept: return 1;
        case Terms::Main: return 1 + p;
        case Terms::Pairwise: return 1 + p + p * (p - 1) / 2;
        case Terms::Single: return 2;
    }
    return 0;
}

Matrix FeatureMap::expand(const Matrix& X) const {
    const std::size_t n = X.rows();
    const std::size_t p = X.cols();
    if (terms == Terms::Single && (column < 0 || static_cast<std::size_t>(column) >= p))
        throw std::invalid_argument("FeatureMap: covariate index out of range");
    Matrix out(n, width(p));
    std::fill(out.col(0).begin(), out.col(0).end(), 1.0);
    switch (terms) {
        case Terms::Intercept:
            break;
        case Terms::Single:
            std::copy_n(X.col(column).begin(), n, out.col(1).begin());
            break;
        case Terms::Main:
        case Terms::Pairwise: {
            for (std::size_t j = 0; j < p; ++j) std::copy_n(X.col(j).begin(), n, out.col(1 + j).begin());
            if (terms == Terms::Pairwise) {
                std::size_t c = 1 + p;
                for (std::size_t a = 0; a < p; ++a)
                    for (std::size_t b = a + 1; b < p; ++b, ++c) {
                        const auto xa = X.col(a);
                        const auto xb = X.col(b);
                        auto dst = out.col(c);
                        for (std::size_t i = 0; i < n; ++i) dst[i] = xa[i] * xb[i];
                    }
            }
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

bool cholesky_solve(std::vector<double> G, std::vector<double>& b, std::size_t k) {
    double max_diag = 0.0;
    for (std::size_t i = 0; i < k; ++i) max_diag = std::max(max_diag, std::abs(G[i * k + i]));
    const double tiny = 1e-12 * std::max(1.0, max_diag);

    for (std::size_t j = 0; j < k; ++j) {
        double d = G[j * k + j];
        for (std::size_t m = 0; m < j; ++m) d -= G[j * k + m] * G[j * k + m];
        if (!(d > tiny)) return false;
        const double l = std::sqrt(d);
        G[j * k + j] = l;
        for (std::size_t i = j + 1; i < k; ++i) {
            double s = G[i * k + j];
            for (std::size_t m = 0; m < j; ++m) s -= G[i * k + m] * G[j * k + m];
            G[i * k + j] = s / l;
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        double s = b[i];
        for (std::size_t m = 0; m < i; ++m) s -= G[i * k + m] * b[m];
        b[i] = s / G[i * k + i];
    }
    for (std::size_t i = k; i-- > 0;) {
        double s = b[i];
        for (std::size_t m = i + 1; m < k; ++m) s -= G[m * k + i] * b[m];
        b[i] = s / G[i * k + i];
    }
    return true;
}

namespace {

constexpr double kJitter = 1e-8;

// (X' diag(w) X) / n, row-major k x k. w may be empty for unit weights.
std::vector<double> gram(const Matrix& X, std::span<const double> w) {
    const std::size_t k = X.cols();
    const double inv_n = 1.0 / static_cast<double>(X.rows());
    std::vector<double> G(k * k);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a; b < k; ++b) {
            const double v = w.empty() ? kernels::dot(X.col(a), X.col(b))
                                       : kernels::dot3(X.col(a), X.col(b), w);
            G[a * k + b] = G[b * k + a] = v * inv_n;
        }
    return G;
}

std::vector<double> cross(const Matrix& X, std::span<const double> r) {
    const double inv_n = 1.0 / static_cast<double>(X.rows());
    std::vector<double> out(X.cols());
    for (std::size_t a = 0; a < X.cols(); ++a) out[a] = kernels::dot(X.col(a), r) * inv_n;
    return out;
}

void linear_predictor(const Matrix& X, std::span<const double> beta, std::span<double> eta) {
    std::fill(eta.begin(), eta.end(), 0.0);
    for (std::size_t a = 0; a < X.cols(); ++a)
        if (beta[a] != 0.0) kernels::axpy(beta[a], X.col(a), eta);
}

bool solve_with_jitter(const std::vector<double>& G, std::vector<double>& b, std::size_t k) {
    std::vector<double> rhs = b;
    if (cholesky_solve(G, rhs, k)) {
        b = std::move(rhs);
        return true;
    }
    std::vector<double> Gj = G;
    for (std::size_t i = 0; i < k; ++i) Gj[i * k + i] += kJitter;
    rhs = b;
    if (cholesky_solve(Gj, rhs, k)) {
        b = std::move(rhs);
        return true;
    }
    return false;
}

double binomial_loglik(std::span<const double> y, std::span<const double> eta) {
    double ll = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        // log p = -log1p(exp(-eta)), log(1-p) = -log1p(exp(eta))
        const double e = eta[i];
        const double log_p = e >= 0 ? -std::log1p(std::exp(-e)) : e - std::log1p(std::exp(e));
        const double log_q = log_p - e;
        ll += y[i] * log_p + (1.0 - y[i]) * log_q;
    }
    return ll;
}

}  // namespace

std::shared_ptr<const LinearModel> fit_linear(FeatureMap map, const Matrix& X,
                                              std::span<const double> y, bool allow_jitter) {
    const Matrix Z = map.expand(X);
    const std::size_t k = Z.cols();
    const auto G = gram(Z, {});
    auto beta = cross(Z, y);
    std::vector<double> rhs = beta;
    if (!cholesky_solve(G, rhs, k)) {
        if (!allow_jitter) throw SingularDesign("least squares: singular design");
        if (!solve_with_jitter(G, beta, k)) throw SingularDesign("least squares: singular design");
    } else {
        beta = std::move(rhs);
    }
    for (double b : beta)
        if (!std::isfinite(b)) throw SingularDesign("least squares: non-finite coefficients");
    return std::make_shared<LinearModel>(map, Link::Identity, std::move(beta));
}

std::shared_ptr<const LinearModel> fit_logistic(FeatureMap map, const Matrix& X,
                                                std::span<const double> y) {
    constexpr int kMaxIter = 25;
    constexpr int kMaxHalving = 10;
    const Matrix Z = map.expand(X);
    const std::size_t n = Z.rows();
    const std::size_t k = Z.cols();

    // Rank check on the unweighted design.
    {
        std::vector<double> probe(k, 0.0);
        if (!cholesky_solve(gram(Z, {}), probe, k))
            throw SingularDesign("logistic regression: rank-deficient design");
    }

    std::vector<double> beta(k, 0.0);
    std::vector<double> eta(n, 0.0), p(n), w(n), r(n), trial_eta(n);
    double ll = binomial_loglik(y, eta);

    for (int it = 0; it < kMaxIter; ++it) {
        kernels::expit(eta, p);
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = std::max(p[i] * (1.0 - p[i]), 1e-12);
            r[i] = y[i] - p[i];
        }
        auto step = cross(Z, r);
        if (!solve_with_jitter(gram(Z, w), step, k)) break;

        double scale = 1.0;
        std::vector<double> trial(k);
        double trial_ll = ll;
        bool accepted = false;
        for (int h = 0; h <= kMaxHalving; ++h, scale *= 0.5) {
            for (std::size_t a = 0; a < k; ++a) trial[a] = beta[a] + scale * step[a];
            linear_predictor(Z, trial, trial_eta);
            trial_ll = binomial_loglik(y, trial_eta);
            if (std::isfinite(trial_ll) && trial_ll >= ll - 1e-12 * (1.0 + std::abs(ll))) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;

        double max_change = 0.0, max_beta = 0.0;
        for (std::size_t a = 0; a < k; ++a) {
            max_change = std::max(max_change, std::abs(trial[a] - beta[a]));
            max_beta = std::max(max_beta, std::abs(trial[a]));
        }
        beta = trial;
        eta.swap(trial_eta);
        const double prev = ll;
        ll = trial_ll;
        if (max_change < 1e-8 * (1.0 + max_beta) ||
            std::abs(ll - prev) < 1e-12 * (1.0 + std::abs(ll)))
            break;
    }
    for (double b : beta)
        if (!std::isfinite(b)) throw SingularDesign("logistic regression: non-finite coefficients");
    return std::make_shared<LinearModel>(map, Link::Logit, std::move(beta));
}

// ---------------------------------------------------------------------------

void LinearModel::predict(const Matrix& X, std::span<double> out) const {
    const Matrix Z = map_.expand(X);
    if (Z.cols() != beta_.size()) throw std::invalid_argument("LinearModel: column count mismatch");
    linear_predictor(Z, beta_, out);
    if (link_ == Link::Logit) kernels::expit(out, out);
}

}  // namespace odtr::models
