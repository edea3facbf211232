#pragma once

// Data-parallel inner loops used by the learners and the risk estimators.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2+FMA variant. The active table is chosen once per process: the
// ODTR_SIMD environment variable ("scalar" or "avx2") wins, otherwise the best
// ISA the CPU supports. Results are reproducible for a fixed ISA; the variants
// agree with each other to rounding (see tests/test_kernels.cpp).

#include <cstddef>
#include <span>
#include <string_view>

namespace odtr::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
    // sum_i a_i b_i
    double (*dot)(const double* a, const double* b, std::size_t n);
    // sum_i a_i b_i c_i
    double (*dot3)(const double* a, const double* b, const double* c, std::size_t n);
    double (*sum)(const double* a, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // out_i = 1 / (1 + exp(-in_i)); in and out may alias
    void (*expit)(const double* in, double* out, std::size_t n);
    void (*tanh)(const double* in, double* out, std::size_t n);
    // out_i = r_i * (1 - a_i^2)
    void (*tanh_backprop)(const double* r, const double* a, double* out, std::size_t n);
    // Weighted intercept-logistic score at `shift`:
    //   score = sum_i w_i (y_i - p_i),  info = sum_i w_i p_i (1 - p_i),
    //   p_i = expit(offset_i + shift)
    void (*logistic_score)(const double* offset, const double* w, const double* y, double shift,
                           std::size_t n, double* score, double* info);
    // sum_i expit(offset_i + shift)
    double (*sum_expit)(const double* offset, double shift, std::size_t n);
};

const KernelTable& table(Isa isa);
bool isa_available(Isa isa);

// Table in use by the convenience wrappers below.
const KernelTable& active();
Isa active_isa();
// Overrides the process-wide choice. Intended for tests and benchmarks.
void set_active_isa(Isa isa);

std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}
inline double dot3(std::span<const double> a, std::span<const double> b,
                   std::span<const double> c) {
    return active().dot3(a.data(), b.data(), c.data(), a.size());
}
inline double sum(std::span<const double> a) { return active().sum(a.data(), a.size()); }
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void expit(std::span<const double> in, std::span<double> out) {
    active().expit(in.data(), out.data(), in.size());
}
inline void tanh(std::span<const double> in, std::span<double> out) {
    active().tanh(in.data(), out.data(), in.size());
}

namespace scalar {
extern const KernelTable kTable;
}
#if defined(ODTR_HAVE_AVX2)
namespace avx2 {
extern const KernelTable kTable;
}
#endif

}  // namespace odtr::kernels
