// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.

#include "odtr/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace odtr::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp(x) with Cody-Waite reduction and a degree-12 Taylor polynomial on
// |r| <= ln2/2. Relative error is a few ulp over the clamped range.
inline __m256d exp_pd(__m256d x) {
    const __m256d kMax = _mm256_set1_pd(708.0);
    const __m256d kMin = _mm256_set1_pd(-708.0);
    const __m256d kLog2e = _mm256_set1_pd(1.4426950408889634074);
    const __m256d kLn2Hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d kLn2Lo = _mm256_set1_pd(1.90821492927058770002e-10);
    const __m256d kShifter = _mm256_set1_pd(6755399441055744.0);  // 1.5 * 2^52

    x = _mm256_min_pd(_mm256_max_pd(x, kMin), kMax);
    const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, kLog2e),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(k, kLn2Hi, x);
    r = _mm256_fnmadd_pd(k, kLn2Lo, r);

    static constexpr double kCoeff[13] = {
        1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0, 1.0 / 40320.0,
        1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,     1.0 / 6.0,
        0.5,               1.0,              1.0};
    __m256d p = _mm256_set1_pd(kCoeff[0]);
    for (int i = 1; i < 13; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kCoeff[i]));

    const __m256i ki = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(k, kShifter)),
                                        _mm256_castpd_si256(kShifter));
    const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ki, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

inline __m256d expit_pd(__m256d x) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), x));
    return _mm256_div_pd(one, _mm256_add_pd(one, e));
}

inline double expit1(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double dot(const double* a, const double* b, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
    }
    for (; i + 4 <= n; i += 4)
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double dot3(const double* a, const double* b, const double* c, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        s0 = _mm256_fmadd_pd(ab, _mm256_loadu_pd(c + i), s0);
    }
    double s = hsum(s0);
    for (; i < n; ++i) s += a[i] * b[i] * c[i];
    return s;
}

double sum(const double* a, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) s0 = _mm256_add_pd(s0, _mm256_loadu_pd(a + i));
    double s = hsum(s0);
    for (; i < n; ++i) s += a[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void expit(const double* in, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, expit_pd(_mm256_loadu_pd(in + i)));
    for (; i < n; ++i) out[i] = expit1(in[i]);
}

void tanh(const double* in, double* out, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(in + i);
        const __m256d ax = _mm256_andnot_pd(sign_mask, x);
        // tanh|x| = 1 - 2 / (exp(2|x|) + 1)
        const __m256d e = exp_pd(_mm256_mul_pd(two, ax));
        const __m256d t = _mm256_sub_pd(one, _mm256_div_pd(two, _mm256_add_pd(e, one)));
        _mm256_storeu_pd(out + i, _mm256_or_pd(t, _mm256_and_pd(sign_mask, x)));
    }
    for (; i < n; ++i) out[i] = std::tanh(in[i]);
}

void tanh_backprop(const double* r, const double* a, double* out, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d av = _mm256_loadu_pd(a + i);
        const __m256d d = _mm256_fnmadd_pd(av, av, one);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(r + i), d));
    }
    for (; i < n; ++i) out[i] = r[i] * (1.0 - a[i] * a[i]);
}

void logistic_score(const double* offset, const double* w, const double* y, double shift,
                    std::size_t n, double* score, double* info) {
    const __m256d vs = _mm256_set1_pd(shift);
    const __m256d one = _mm256_set1_pd(1.0);
    __m256d s = _mm256_setzero_pd();
    __m256d h = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d p = expit_pd(_mm256_add_pd(_mm256_loadu_pd(offset + i), vs));
        const __m256d wv = _mm256_loadu_pd(w + i);
        s = _mm256_fmadd_pd(wv, _mm256_sub_pd(_mm256_loadu_pd(y + i), p), s);
        h = _mm256_fmadd_pd(_mm256_mul_pd(wv, p), _mm256_sub_pd(one, p), h);
    }
    double ss = hsum(s);
    double hh = hsum(h);
    for (; i < n; ++i) {
        const double p = expit1(offset[i] + shift);
        ss += w[i] * (y[i] - p);
        hh += w[i] * p * (1.0 - p);
    }
    *score = ss;
    *info = hh;
}

double sum_expit(const double* offset, double shift, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(shift);
    __m256d s = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        s = _mm256_add_pd(s, expit_pd(_mm256_add_pd(_mm256_loadu_pd(offset + i), vs)));
    double ss = hsum(s);
    for (; i < n; ++i) ss += expit1(offset[i] + shift);
    return ss;
}

}  // namespace

const KernelTable kTable{dot, dot3, sum, axpy, expit, tanh, tanh_backprop, logistic_score, sum_expit};

}  // namespace odtr::kernels::avx2
