#include <algorithm>
#include <cmath>
#include <limits>

#include "odtr/core.hpp"
#include "odtr/kernels.hpp"
#include "odtr/models.hpp"

namespace odtr::models {

NeuralNet::NeuralNet(std::size_t inputs, std::size_t hidden, std::vector<double> params)
    : inputs_(inputs), hidden_(hidden), params_(std::move(params)) {
    if (params_.size() != param_count(inputs_, hidden_))
        throw std::invalid_argument("NeuralNet: parameter count mismatch");
}

namespace {

// Forward pass. act holds hidden activations (hidden x n, unit-major).
void forward(const Matrix& X, std::size_t hidden, std::span<const double> theta,
             std::vector<double>& act, std::span<double> out) {
    const std::size_t n = X.rows();
    const std::size_t k = X.cols();
    const double* U = theta.data();
    const double* b1 = U + hidden * k;
    const double* v = b1 + hidden;
    const double b2 = v[hidden];

    act.resize(hidden * n);
    std::fill(out.begin(), out.end(), b2);
    for (std::size_t h = 0; h < hidden; ++h) {
        std::span<double> a(act.data() + h * n, n);
        std::fill(a.begin(), a.end(), b1[h]);
        for (std::size_t j = 0; j < k; ++j) kernels::axpy(U[h * k + j], X.col(j), a);
        kernels::tanh(a, a);
        kernels::axpy(v[h], a, out);
    }
}

}  // namespace

void NeuralNet::predict(const Matrix& X, std::span<double> out) const {
    if (X.cols() != inputs_) throw std::invalid_argument("NeuralNet: column count mismatch");
    std::vector<double> act;
    forward(X, hidden_, params_, act, out);
}

NetFit fit_net(const Matrix& X, std::span<const double> y, NetParams params, std::uint64_t seed) {
    const std::size_t n = X.rows();
    const std::size_t k = X.cols();
    const auto H = static_cast<std::size_t>(params.hidden);
    if (n == 0 || n != y.size()) throw std::invalid_argument("fit_net: empty or mismatched data");
    const std::size_t P = NeuralNet::param_count(k, H);
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<double> act, out(n), resid(n), delta(n), grad(P);
    NetFit best_overall;
    best_overall.objective = std::numeric_limits<double>::infinity();
    std::vector<double> best_theta_overall;

    for (int restart = 0; restart < params.restarts; ++restart) {
        Rng rng = make_rng(seed, "nnet", static_cast<std::uint64_t>(restart));
        std::vector<double> theta(P);
        for (double& t : theta) t = params.init_range * (2.0 * uniform01(rng) - 1.0);

        std::vector<double> best_theta = theta;
        double best_obj = std::numeric_limits<double>::infinity();
        int best_step = -1;
        bool converged = false;

        for (int step = 0; step <= params.steps; ++step) {
            forward(X, H, theta, act, out);
            for (std::size_t i = 0; i < n; ++i) resid[i] = out[i] - y[i];
            double penalty = 0.0;
            for (double t : theta) penalty += t * t;
            const double obj = kernels::dot(resid, resid) * inv_n + params.decay * penalty;
            if (!std::isfinite(obj)) break;
            if (obj < best_obj) {
                best_obj = obj;
                best_theta = theta;
                best_step = step;
            }
            if (step == params.steps) break;

            // Gradient of the penalized objective.
            const double* U = theta.data();
            const double* v = U + H * k + H;
            double* gU = grad.data();
            double* gb1 = gU + H * k;
            double* gv = gb1 + H;
            double& gb2 = gv[H];
            gb2 = 2.0 * inv_n * kernels::sum(resid);
            for (std::size_t h = 0; h < H; ++h) {
                std::span<const double> a(act.data() + h * n, n);
                gv[h] = 2.0 * inv_n * kernels::dot(resid, a);
                kernels::active().tanh_backprop(resid.data(), a.data(), delta.data(), n);
                const double scale = 2.0 * inv_n * v[h];
                for (std::size_t j = 0; j < k; ++j)
                    gU[h * k + j] = scale * kernels::dot(delta, X.col(j));
                gb1[h] = scale * kernels::sum(delta);
            }
            double gnorm = 0.0;
            for (std::size_t q = 0; q < P; ++q) {
                grad[q] += 2.0 * params.decay * theta[q];
                gnorm += grad[q] * grad[q];
            }
            if (std::sqrt(gnorm) < 1e-6) {
                converged = true;
                break;
            }
            for (std::size_t q = 0; q < P; ++q) theta[q] -= params.step_size * grad[q];
        }

        if (best_obj < best_overall.objective) {
            best_overall.objective = best_obj;
            best_overall.converged = converged;
            best_overall.improved_to_end = converged || best_step == params.steps;
            best_theta_overall = best_theta;
        }
    }
    if (best_theta_overall.empty()) throw std::runtime_error("fit_net: training diverged");
    best_overall.net = std::make_shared<NeuralNet>(k, H, std::move(best_theta_overall));
    return best_overall;
}

}  // namespace odtr::models
