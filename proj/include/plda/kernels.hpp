#pragma once
// Dense double-precision inner loops used by the network core and the
// window-distance scans.
//
// Every kernel has a scalar reference implementation. Vector variants
// (AVX2+FMA on x86-64, NEON on AArch64) are compiled into the library when the
// toolchain supports them and selected once at runtime. The scalar table is
// always available and is what the equivalence tests compare against.
//
// Setting the environment variable PLDA_SIMD=scalar before the first kernel
// call pins the scalar variants.

#include <cstddef>
#include <span>
#include <string_view>

namespace plda::kernels {

struct KernelTable {
    const char* name;
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // y = W x + bias (bias may be null); W is rows x cols, row-major
    void (*gemv)(const double* w, const double* x, const double* bias, double* y,
                 std::size_t rows, std::size_t cols);
    // out += W^T d; W is rows x cols, row-major, d has rows entries
    void (*gemv_t_acc)(const double* w, const double* d, double* out,
                       std::size_t rows, std::size_t cols);
    // W += alpha * u v^T; u has rows entries, v has cols entries
    void (*ger)(double alpha, const double* u, const double* v, double* w,
                std::size_t rows, std::size_t cols);
    // sum_i (a[i] - b[i])^2
    double (*sq_dist)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_table() noexcept;

// Null when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

// The table chosen for this process. Resolved on first use and then fixed, so
// a single process always produces bit-identical results for identical inputs.
const KernelTable& active() noexcept;

std::string_view active_name() noexcept;

// Span front-ends over active(). Length mismatches are programming errors and
// are checked with assertions only.
double dot(std::span<const double> a, std::span<const double> b) noexcept;
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;
void gemv(std::span<const double> w, std::span<const double> x, const double* bias,
          std::span<double> y) noexcept;
void gemv_t_acc(std::span<const double> w, std::span<const double> d,
                std::span<double> out) noexcept;
void ger(double alpha, std::span<const double> u, std::span<const double> v,
         std::span<double> w) noexcept;
double sq_dist(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace plda::kernels
