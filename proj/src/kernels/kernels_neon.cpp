// NEON variants for AArch64, where Advanced SIMD is architecturally mandatory.

#include "plda/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#include <arm_neon.h>
#endif

namespace plda::kernels {

#if defined(__aarch64__) && defined(__ARM_NEON)

namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_neon(const double* w, const double* x, const double* bias, double* y,
               std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double acc = dot_neon(w + r * cols, x, cols);
        y[r] = bias ? acc + bias[r] : acc;
    }
}

void gemv_t_acc_neon(const double* w, const double* d, double* out,
                     std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        if (d[r] == 0.0) continue;
        axpy_neon(d[r], w + r * cols, out, cols);
    }
}

void ger_neon(double alpha, const double* u, const double* v, double* w,
              std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double ur = alpha * u[r];
        if (ur == 0.0) continue;
        axpy_neon(ur, v, w + r * cols, cols);
    }
}

double sq_dist_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        acc = vfmaq_f64(acc, d, d);
    }
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

constexpr KernelTable kNeon{
    "neon",   dot_neon, axpy_neon,   gemv_neon,
    gemv_t_acc_neon, ger_neon, sq_dist_neon,
};

}  // namespace

namespace detail {
const KernelTable* neon_table_impl() noexcept { return &kNeon; }
}  // namespace detail

#else

namespace detail {
const KernelTable* neon_table_impl() noexcept { return nullptr; }
}  // namespace detail

#endif

}  // namespace plda::kernels
