#include "odtr/kernels.hpp"

#include <cmath>

namespace odtr::kernels::scalar {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double dot3(const double* a, const double* b, const double* c, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i] * c[i];
    return s;
}

double sum(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void expit(const double* in, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-in[i]));
}

void tanh(const double* in, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
}

void tanh_backprop(const double* r, const double* a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = r[i] * (1.0 - a[i] * a[i]);
}

void logistic_score(const double* offset, const double* w, const double* y, double shift,
                    std::size_t n, double* score, double* info) {
    double s = 0.0;
    double h = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = 1.0 / (1.0 + std::exp(-(offset[i] + shift)));
        s += w[i] * (y[i] - p);
        h += w[i] * p * (1.0 - p);
    }
    *score = s;
    *info = h;
}

double sum_expit(const double* offset, double shift, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += 1.0 / (1.0 + std::exp(-(offset[i] + shift)));
    return s;
}

}  // namespace

const KernelTable kTable{dot, dot3, sum, axpy, expit, tanh, tanh_backprop, logistic_score, sum_expit};

}  // namespace odtr::kernels::scalar
