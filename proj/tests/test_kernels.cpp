#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "plda/common.hpp"
#include "plda/kernels.hpp"

using namespace plda;
namespace k = plda::kernels;

namespace {

Vec random_vec(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Vec v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

// Vector variants reorder additions and fuse multiplies, so results agree to
// a few ulps of the magnitude involved rather than bit for bit.
void check_close(double got, double want, double scale) {
    CHECK(std::abs(got - want) <= 1e-12 * (1.0 + scale));
}

void compare_tables(const k::KernelTable& ref, const k::KernelTable& alt) {
    Rng rng(42);
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 67u, 250u}) {
        CAPTURE(n);
        const Vec a = random_vec(n, rng), b = random_vec(n, rng);
        check_close(alt.dot(a.data(), b.data(), n), ref.dot(a.data(), b.data(), n), double(n));
        check_close(alt.sq_dist(a.data(), b.data(), n), ref.sq_dist(a.data(), b.data(), n), double(n));

        Vec y1 = b, y2 = b;
        ref.axpy(0.7, a.data(), y1.data(), n);
        alt.axpy(0.7, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) check_close(y2[i], y1[i], 1.0);
    }
    for (std::size_t rows : {1u, 3u, 8u, 13u}) {
        for (std::size_t cols : {1u, 4u, 5u, 30u, 33u}) {
            CAPTURE(rows);
            CAPTURE(cols);
            const Vec w = random_vec(rows * cols, rng), x = random_vec(cols, rng),
                      bias = random_vec(rows, rng), d = random_vec(rows, rng);
            Vec y1(rows), y2(rows);
            ref.gemv(w.data(), x.data(), bias.data(), y1.data(), rows, cols);
            alt.gemv(w.data(), x.data(), bias.data(), y2.data(), rows, cols);
            for (std::size_t i = 0; i < rows; ++i) check_close(y2[i], y1[i], double(cols));
            ref.gemv(w.data(), x.data(), nullptr, y1.data(), rows, cols);
            alt.gemv(w.data(), x.data(), nullptr, y2.data(), rows, cols);
            for (std::size_t i = 0; i < rows; ++i) check_close(y2[i], y1[i], double(cols));

            Vec o1 = x, o2 = x;
            ref.gemv_t_acc(w.data(), d.data(), o1.data(), rows, cols);
            alt.gemv_t_acc(w.data(), d.data(), o2.data(), rows, cols);
            for (std::size_t j = 0; j < cols; ++j) check_close(o2[j], o1[j], double(rows));

            Vec g1 = w, g2 = w;
            ref.ger(-0.3, d.data(), x.data(), g1.data(), rows, cols);
            alt.ger(-0.3, d.data(), x.data(), g2.data(), rows, cols);
            for (std::size_t i = 0; i < rows * cols; ++i) check_close(g2[i], g1[i], 1.0);
        }
    }
}

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
    const auto& s = k::scalar_table();
    const Vec a{1, 2, 3}, b{4, -5, 6};
    CHECK(s.dot(a.data(), b.data(), 3) == 12.0);
    CHECK(s.sq_dist(a.data(), b.data(), 3) == 9.0 + 49.0 + 9.0);

    // W = [[1,2],[3,4],[5,6]]
    const Vec w{1, 2, 3, 4, 5, 6}, x{1, -1}, bias{0.5, 0, -0.5};
    Vec y(3);
    s.gemv(w.data(), x.data(), bias.data(), y.data(), 3, 2);
    CHECK(y == Vec{-0.5, -1.0, -1.5});

    Vec out{1, 1};
    const Vec d{1, 0, 2};
    s.gemv_t_acc(w.data(), d.data(), out.data(), 3, 2);
    CHECK(out == Vec{12.0, 15.0});

    Vec g(6, 0.0);
    s.ger(2.0, d.data(), x.data(), g.data(), 3, 2);
    CHECK(g == Vec{2, -2, 0, 0, 4, -4});

    Vec yy{1, 1, 1};
    s.axpy(-1.0, a.data(), yy.data(), 3);
    CHECK(yy == Vec{0, -1, -2});
}

TEST_CASE("avx2 kernels agree with scalar") {
    const auto* t = k::avx2_table();
    if (!t) {
        MESSAGE("avx2 variant unavailable on this machine");
        return;
    }
    compare_tables(k::scalar_table(), *t);
}

TEST_CASE("neon kernels agree with scalar") {
    const auto* t = k::neon_table();
    if (!t) {
        MESSAGE("neon variant unavailable on this machine");
        return;
    }
    compare_tables(k::scalar_table(), *t);
}

TEST_CASE("active table is one of the compiled variants and stays fixed") {
    const auto& a = k::active();
    const bool known = &a == &k::scalar_table() || &a == k::avx2_table() || &a == k::neon_table();
    CHECK(known);
    CHECK(&k::active() == &a);
    CHECK(k::active_name() == std::string_view(a.name));
}

TEST_CASE("span front-ends route through the active table") {
    Rng rng(3);
    const Vec a = random_vec(37, rng), b = random_vec(37, rng);
    CHECK(k::dot(a, b) == k::active().dot(a.data(), b.data(), a.size()));
    CHECK(k::sq_dist(a, b) == k::active().sq_dist(a.data(), b.data(), a.size()));
    CHECK(k::sq_dist(a, a) == 0.0);
}
