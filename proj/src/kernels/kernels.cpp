#include "plda/kernels.hpp"

#include <cassert>
#include <cstdlib>
#include <cstring>

namespace plda::kernels {

namespace detail {
const KernelTable* avx2_table_impl() noexcept;
const KernelTable* neon_table_impl() noexcept;
}  // namespace detail

//==============================================================================
// Scalar reference implementations
//==============================================================================

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* w, const double* x, const double* bias, double* y,
                 std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = w + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = bias ? acc + bias[r] : acc;
    }
}

void gemv_t_acc_scalar(const double* w, const double* d, double* out,
                       std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double dr = d[r];
        if (dr == 0.0) continue;
        const double* row = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += dr * row[c];
    }
}

void ger_scalar(double alpha, const double* u, const double* v, double* w,
                std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double ur = alpha * u[r];
        if (ur == 0.0) continue;
        double* row = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) row[c] += ur * v[c];
    }
}

double sq_dist_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

constexpr KernelTable kScalar{
    "scalar",   dot_scalar, axpy_scalar,   gemv_scalar,
    gemv_t_acc_scalar, ger_scalar, sq_dist_scalar,
};

const KernelTable& resolve() noexcept {
    if (const char* env = std::getenv("PLDA_SIMD"); env && std::strcmp(env, "scalar") == 0) {
        return kScalar;
    }
    if (const KernelTable* t = avx2_table()) return *t;
    if (const KernelTable* t = neon_table()) return *t;
    return kScalar;
}

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

const KernelTable* avx2_table() noexcept { return detail::avx2_table_impl(); }

const KernelTable* neon_table() noexcept { return detail::neon_table_impl(); }

const KernelTable& active() noexcept {
    static const KernelTable& table = resolve();
    return table;
}

std::string_view active_name() noexcept { return active().name; }

//==============================================================================
// Span front-ends
//==============================================================================

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    assert(a.size() == b.size());
    return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
    assert(x.size() == y.size());
    active().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> w, std::span<const double> x, const double* bias,
          std::span<double> y) noexcept {
    assert(w.size() == x.size() * y.size());
    active().gemv(w.data(), x.data(), bias, y.data(), y.size(), x.size());
}

void gemv_t_acc(std::span<const double> w, std::span<const double> d,
                std::span<double> out) noexcept {
    assert(w.size() == d.size() * out.size());
    active().gemv_t_acc(w.data(), d.data(), out.data(), d.size(), out.size());
}

void ger(double alpha, std::span<const double> u, std::span<const double> v,
         std::span<double> w) noexcept {
    assert(w.size() == u.size() * v.size());
    active().ger(alpha, u.data(), v.data(), w.data(), u.size(), v.size());
}

double sq_dist(std::span<const double> a, std::span<const double> b) noexcept {
    assert(a.size() == b.size());
    return active().sq_dist(a.data(), b.data(), a.size());
}

#ifndef PLDA_HAVE_AVX2
namespace detail {
const KernelTable* avx2_table_impl() noexcept { return nullptr; }
}  // namespace detail
#endif

}  // namespace plda::kernels
