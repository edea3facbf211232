#include "odtr/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "odtr/kernels.hpp"
#include "odtr/models.hpp"

namespace odtr {
namespace {

struct Quadratic {
    std::size_t J = 0;
    std::vector<double> G;  // Z'Z / n, row-major
    std::vector<double> c;  // Z'y / n
    double yy = 0.0;        // y'y / n

    double value(std::span<const double> a) const {
        double quad = 0.0, lin = 0.0;
        for (std::size_t i = 0; i < J; ++i) {
            lin += c[i] * a[i];
            for (std::size_t j = 0; j < J; ++j) quad += a[i] * G[i * J + j] * a[j];
        }
        return yy - 2.0 * lin + quad;
    }

    // (G a - c)_j; the gradient is twice this.
    std::vector<double> half_gradient(std::span<const double> a) const {
        std::vector<double> g(J);
        for (std::size_t i = 0; i < J; ++i) {
            double s = -c[i];
            for (std::size_t j = 0; j < J; ++j) s += G[i * J + j] * a[j];
            g[i] = s;
        }
        return g;
    }
};

Quadratic build(std::span<const std::vector<double>> columns, std::span<const double> y) {
    Quadratic q;
    q.J = columns.size();
    if (q.J == 0) throw std::invalid_argument("simplex least squares: no columns");
    const double inv_n = 1.0 / static_cast<double>(y.size());
    q.G.assign(q.J * q.J, 0.0);
    q.c.assign(q.J, 0.0);
    for (std::size_t i = 0; i < q.J; ++i) {
        if (columns[i].size() != y.size())
            throw std::invalid_argument("simplex least squares: length mismatch");
        q.c[i] = kernels::dot(columns[i], y) * inv_n;
        for (std::size_t j = i; j < q.J; ++j)
            q.G[i * q.J + j] = q.G[j * q.J + i] = kernels::dot(columns[i], columns[j]) * inv_n;
    }
    q.yy = kernels::dot(y, y) * inv_n;
    return q;
}

void normalize(std::vector<double>& a) {
    double s = 0.0;
    for (double& v : a) {
        v = std::max(v, 0.0);
        s += v;
    }
    for (double& v : a) v /= s;
}

}  // namespace

double simplex_objective(std::span<const std::vector<double>> columns, std::span<const double> y,
                         std::span<const double> alpha) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double f = 0.0;
        for (std::size_t j = 0; j < columns.size(); ++j) f += alpha[j] * columns[j][i];
        s += (y[i] - f) * (y[i] - f);
    }
    return s / static_cast<double>(y.size());
}

std::vector<double> simplex_least_squares_eg(std::span<const std::vector<double>> columns,
                                             std::span<const double> y, const EgOptions& opts) {
    const Quadratic q = build(columns, y);
    std::vector<double> alpha(q.J, 1.0 / static_cast<double>(q.J));
    if (q.J == 1) return alpha;
    double obj = q.value(alpha);
    for (int it = 0; it < opts.iterations; ++it) {
        const auto g = q.half_gradient(alpha);
        // Shift by the minimum for numerical range; cancels in the normalization.
        const double gmin = *std::min_element(g.begin(), g.end());
        std::vector<double> next(q.J);
        double s = 0.0;
        for (std::size_t j = 0; j < q.J; ++j) {
            next[j] = alpha[j] * std::exp(-opts.step * 2.0 * (g[j] - gmin));
            s += next[j];
        }
        double change = 0.0;
        for (std::size_t j = 0; j < q.J; ++j) {
            next[j] /= s;
            change = std::max(change, std::abs(next[j] - alpha[j]));
        }
        const double next_obj = q.value(next);
        const double improvement = obj - next_obj;
        alpha.swap(next);
        obj = next_obj;
        if (change < opts.weight_tol) break;
        if (opts.objective_tol > 0.0 && improvement < opts.objective_tol) break;
    }
    return alpha;
}

std::vector<double> simplex_least_squares_exact(std::span<const std::vector<double>> columns,
                                                std::span<const double> y,
                                                std::vector<double> alpha) {
    const Quadratic q = build(columns, y);
    const std::size_t J = q.J;
    if (alpha.size() != J) throw std::invalid_argument("simplex least squares: bad start");
    normalize(alpha);
    if (J == 1) return alpha;

    double scale = 0.0;
    for (std::size_t j = 0; j < J; ++j) scale = std::max(scale, q.G[j * J + j]);
    const double ridge = 1e-13 * std::max(1.0, scale);
    const double tol = 1e-13 * std::max(1.0, scale);

    std::vector<bool> free(J);
    for (std::size_t j = 0; j < J; ++j) free[j] = alpha[j] > 0.0;

    for (std::size_t iter = 0; iter < 20 * J + 50; ++iter) {
        std::vector<std::size_t> F;
        for (std::size_t j = 0; j < J; ++j)
            if (free[j]) F.push_back(j);
        const std::size_t m = F.size();

        // Equality-constrained minimizer on F: alpha_F = G^-1 (c - mu 1).
        std::vector<double> GF(m * m);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) GF[a * m + b] = q.G[F[a] * J + F[b]];
        for (std::size_t a = 0; a < m; ++a) GF[a * m + a] += ridge;
        std::vector<double> x(m), u(m, 1.0);
        for (std::size_t a = 0; a < m; ++a) x[a] = q.c[F[a]];
        bool ok = models::cholesky_solve(GF, x, m) && models::cholesky_solve(GF, u, m);
        if (!ok) {
            for (std::size_t a = 0; a < m; ++a) GF[a * m + a] += 1e-8 * std::max(1.0, scale);
            x.assign(m, 0.0);
            for (std::size_t a = 0; a < m; ++a) x[a] = q.c[F[a]];
            u.assign(m, 1.0);
            if (!models::cholesky_solve(GF, x, m) || !models::cholesky_solve(GF, u, m)) break;
        }
        double sx = 0.0, su = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            sx += x[a];
            su += u[a];
        }
        const double mu = (sx - 1.0) / su;
        std::vector<double> p(J, 0.0);
        for (std::size_t a = 0; a < m; ++a) p[F[a]] = x[a] - mu * u[a];

        bool feasible = true;
        for (std::size_t j : F)
            if (p[j] < 0.0) feasible = false;

        if (feasible) {
            alpha = p;
            normalize(alpha);
            // Release the fixed coordinate whose multiplier is most negative.
            const auto g = q.half_gradient(alpha);
            double level = 0.0;
            for (std::size_t j : F) level += g[j];
            level /= static_cast<double>(m);
            std::size_t enter = J;
            double most = -tol;
            for (std::size_t j = 0; j < J; ++j)
                if (!free[j] && g[j] - level < most) {
                    most = g[j] - level;
                    enter = j;
                }
            if (enter == J) break;
            free[enter] = true;
            continue;
        }

        // Move toward p until the first coordinate hits zero.
        double t = 1.0;
        std::size_t blocking = J;
        for (std::size_t j : F)
            if (p[j] < alpha[j]) {
                const double tj = alpha[j] / (alpha[j] - p[j]);
                if (tj < t) {
                    t = tj;
                    blocking = j;
                }
            }
        for (std::size_t j = 0; j < J; ++j) alpha[j] += t * (p[j] - alpha[j]);
        if (blocking < J) {
            alpha[blocking] = 0.0;
            free[blocking] = false;
        }
        for (std::size_t j = 0; j < J; ++j)
            if (alpha[j] <= 0.0) {
                alpha[j] = 0.0;
                free[j] = false;
            }
        normalize(alpha);
    }
    return alpha;
}

}  // namespace odtr
