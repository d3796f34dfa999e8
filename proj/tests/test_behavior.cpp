#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "plda/behavior.hpp"

using namespace plda;

namespace {

LinearOperator matrix_op(const Eigen::MatrixXd& m) {
    return [m](std::span<const double> in, std::span<double> out) {
        const Eigen::Map<const Eigen::VectorXd> x(in.data(), static_cast<Eigen::Index>(in.size()));
        Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) = m * x;
    };
}

Curvature matrix_curvature(const Eigen::MatrixXd& m) {
    Curvature c;
    c.hvp = matrix_op(m);
    for (Eigen::Index i = 0; i < m.rows(); ++i) c.diagonal.push_back(m(i, i));
    return c;
}

}  // namespace

TEST_CASE("conjugate gradients") {
    Eigen::MatrixXd a(2, 2);
    a << 2, 0, 0, 4;
    SUBCASE("diagonal quadratic") {
        const auto res = conjugate_gradient(matrix_op(a), Vec{2, 4}, 0.0, 10, 1e-12);
        CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("damping shifts the spectrum") {
        const auto res = conjugate_gradient(matrix_op(a), Vec{3, 5}, 1.0, 10, 1e-12);
        CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("zero right-hand side") {
        const auto res = conjugate_gradient(matrix_op(a), Vec{0, 0}, 0.0, 10, 1e-12);
        CHECK(res.x == Vec{0, 0});
        CHECK(res.iterations == 0);
    }
    SUBCASE("non-positive curvature is reported") {
        Eigen::MatrixXd neg(2, 2);
        neg << -1, 0, 0, 1;
        CHECK_THROWS_AS(conjugate_gradient(matrix_op(neg), Vec{1, 0}, 0.0, 10, 1e-12), CgNotConverged);
    }
    SUBCASE("iteration cap carries the residual") {
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(5, 5);
        for (int i = 0; i < 5; ++i) m(i, i) = 1.0 + i;
        try {
            conjugate_gradient(matrix_op(m), Vec{1, 1, 1, 1, 1}, 0.0, 1, 1e-14);
            FAIL("expected CgNotConverged");
        } catch (const CgNotConverged& e) {
            CHECK(e.iterations() == 1);
            CHECK(e.residual_norm() > 0.0);
        }
    }
}

TEST_CASE("parameter behavior by mode") {
    Eigen::MatrixXd a(2, 2);
    a << 2, 0, 0, 4;
    const Curvature c = matrix_curvature(a);
    const Vec grad{2, 4};

    const Vec cg = parameter_behavior(grad, CgHessian{1e-12, 50, 1e-12}, c);
    CHECK(cg[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cg[1] == doctest::Approx(1.0).epsilon(1e-9));

    const Vec diag = parameter_behavior(Vec{-2, 4}, DiagonalHessian{1.0}, c);
    CHECK(diag[0] == doctest::Approx(2.0 / 3.0));
    CHECK(diag[1] == doctest::Approx(4.0 / 5.0));

    CHECK(parameter_behavior(Vec{-2, 4}, IdentityHessian{}, c) == Vec{2, 4});

    const KeyParams keys{{1}};
    CHECK(parameter_behavior(Vec{-2, 4}, IdentityHessian{}, c, &keys) == Vec{4});

    for (const HessianMode& m : {HessianMode{IdentityHessian{}}, HessianMode{DiagonalHessian{}},
                                 HessianMode{CgHessian{}}}) {
        for (double v : parameter_behavior(Vec{0, 0}, m, c)) CHECK(v == 0.0);
    }
    CHECK_THROWS_AS(validate(HessianMode{DiagonalHessian{0.0}}), InvalidArgument);
    CHECK_THROWS_AS(validate(HessianMode{CgHessian{-1.0, 10, 1e-8}}), InvalidArgument);
}

TEST_CASE("influence matches symmetric retraining on ridge regression") {
    // Objective (1/n) sum L_i + eps L_s with L_i = (a_i.theta - t_i)^2 + l2 |theta|^2
    // and a_i = [x_i; 1]. Its minimizer solves a linear system, so the exact
    // derivative in eps comes from a symmetric difference of closed forms.
    const std::size_t d = 4, n = 40;
    const double l2 = 0.5, eps = 1e-3;
    Rng rng(21);
    std::normal_distribution<double> g;
    std::vector<Vec> xs(n, Vec(d)), ts(n, Vec(1));
    for (auto& x : xs)
        for (auto& v : x) v = g(rng);
    for (auto& t : ts) t[0] = g(rng);

    const auto p = static_cast<Eigen::Index>(d + 1);
    Eigen::MatrixXd a(static_cast<Eigen::Index>(n), p);
    Eigen::VectorXd t(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) a(Eigen::Index(i), Eigen::Index(j)) = xs[i][j];
        a(Eigen::Index(i), p - 1) = 1.0;
        t(Eigen::Index(i)) = ts[i][0];
    }
    const Eigen::Index s = 7;
    auto solve = [&](double e) {
        const Eigen::RowVectorXd as = a.row(s);
        Eigen::MatrixXd lhs = (2.0 / n) * a.transpose() * a +
                              2.0 * l2 * (1.0 + e) * Eigen::MatrixXd::Identity(p, p) +
                              2.0 * e * as.transpose() * as;
        Eigen::VectorXd rhs = (2.0 / n) * a.transpose() * t + 2.0 * e * as.transpose() * t(s);
        return Eigen::VectorXd(lhs.ldlt().solve(rhs));
    };
    const Eigen::VectorXd theta = solve(0.0);
    const Eigen::VectorXd oracle = (solve(eps) - solve(-eps)) / (2.0 * eps);

    Network net({d, 1}, {Activation::identity});
    net.set_params(Vec(theta.data(), theta.data() + p));
    const LossSpec spec{LossKind::mse, l2};
    std::vector<Example> batch;
    for (std::size_t i = 0; i < n; ++i) batch.push_back({xs[i], ts[i]});
    Curvature c;
    c.hvp = [&](std::span<const double> v, std::span<double> out) {
        const Vec hv = hvp(net, batch, v, spec);
        std::copy(hv.begin(), hv.end(), out.begin());
    };
    const Vec grad = loss_and_grad(net, xs[s], ts[s], spec).grad;
    const Vec dir = influence_direction(grad, CgHessian{1e-14, 200, 1e-13}, c);
    double num = 0.0, den = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        num += std::pow(-dir[std::size_t(j)] - oracle(j), 2);
        den += oracle(j) * oracle(j);
    }
    CHECK(std::sqrt(num / den) < 1e-4);
}

TEST_CASE("key parameter selection") {
    const std::vector<Vec> one{{0.1, 5.0, 0.1, 3.0}};
    CHECK(select_key_parameters(one, 2).indices == std::vector<std::size_t>{1, 3});
    CHECK(select_key_parameters(one, 4).indices == std::vector<std::size_t>{0, 1, 2, 3});
    const std::vector<Vec> flat{{1, 1, 1}, {1, 1, 1}};
    CHECK(select_key_parameters(flat, 2).indices == std::vector<std::size_t>{0, 1});
    // Means over samples, not single extremes.
    const std::vector<Vec> two{{0, 10, 0}, {6, 0, 6}, {6, 0, 0}};
    CHECK(select_key_parameters(two, 1).indices == std::vector<std::size_t>{0});
    CHECK_THROWS_AS(select_key_parameters(one, 5), InvalidArgument);
}

TEST_CASE("behavior center") {
    const std::vector<Vec> single{{3, -1}};
    CHECK(behavior_center(single) == Vec{3, -1});
    const std::vector<Vec> pair{{0, 0}, {2, 2}};
    CHECK(behavior_center(pair) == Vec{1, 1});
    const std::vector<Vec> copies(7, Vec{0.25, 4});
    CHECK(behavior_center(copies) == Vec{0.25, 4});
    CHECK_THROWS_AS(behavior_center(std::span<const Vec>{}), InvalidArgument);
}

TEST_CASE("reward normalization") {
    CHECK(normalize_rewards(Vec{1, 3, 5}) == Vec{0, 0.5, 1});
    CHECK(normalize_rewards(Vec{7, 7, 7}) == Vec{0.5, 0.5, 0.5});
    Rng rng(3);
    std::uniform_real_distribution<double> u(-100, 100);
    Vec raw(50);
    for (auto& r : raw) r = u(rng);
    for (double v : normalize_rewards(raw)) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(scaled_raw(std::exp(2.0), RewardScale::Log) == doctest::Approx(2.0));
    CHECK(scaled_raw(3.0, RewardScale::Linear) == 3.0);
    CHECK(std::isfinite(scaled_raw(0.0, RewardScale::Log)));
    CHECK(reward_scale_from_string(to_string(RewardScale::Log)) == RewardScale::Log);
    CHECK_THROWS_AS(reward_scale_from_string("rank"), InvalidArgument);
}

TEST_CASE("dual reward cases") {
    CHECK(dual_reward(1, 1, Action::remove, 0.5) == 1.0);
    CHECK(dual_reward(1, 0, Action::expand, 0.5) == 1.0);
    CHECK(dual_reward(0, 0, Action::preserve, 0.5) == 1.0);
    CHECK(dual_reward(0.2, 0.6, Action::expand, 0.3) == doctest::Approx(0.3 * 0.2 + 0.7 * 0.4));
    CHECK_THROWS_AS(dual_reward(1.1, 0, Action::expand, 0.5), InvalidArgument);
    CHECK_THROWS_AS(dual_reward(0.5, 0.5, Action::expand, -0.1), InvalidArgument);

    // Monotone in each argument with the sign the formula implies.
    const double grid[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (double alpha : grid) {
        for (double lo : grid) {
            for (double hi : grid) {
                if (hi < lo) continue;
                for (double other : grid) {
                    CHECK(dual_reward(hi, other, Action::remove, alpha) >= dual_reward(lo, other, Action::remove, alpha));
                    CHECK(dual_reward(other, hi, Action::remove, alpha) >= dual_reward(other, lo, Action::remove, alpha));
                    CHECK(dual_reward(hi, other, Action::expand, alpha) >= dual_reward(lo, other, Action::expand, alpha));
                    CHECK(dual_reward(other, hi, Action::expand, alpha) <= dual_reward(other, lo, Action::expand, alpha));
                    CHECK(dual_reward(hi, other, Action::preserve, alpha) <= dual_reward(lo, other, Action::preserve, alpha));
                    CHECK(dual_reward(other, hi, Action::preserve, alpha) <= dual_reward(other, lo, Action::preserve, alpha));
                    const double r = dual_reward(lo, other, Action::expand, alpha);
                    CHECK(r >= 0.0);
                    CHECK(r <= 1.0);
                }
            }
        }
    }
}

TEST_CASE("finalized records") {
    std::vector<BehaviorRecord> recs(3);
    recs[0].r_l_raw = 1.0;
    recs[1].r_l_raw = 2.0;
    recs[2].r_l_raw = 3.0;
    recs[0].p_vec = {0, 0};
    recs[1].p_vec = {0, 0};
    recs[2].p_vec = {3, 0};
    for (std::uint64_t i = 0; i < 3; ++i) recs[i].sample_id = i;
    finalize_records(recs);
    CHECK(recs[0].r_p_raw == doctest::Approx(1.0));
    CHECK(recs[2].r_p_raw == doctest::Approx(2.0));
    CHECK(recs[0].r_l == 0.0);
    CHECK(recs[1].r_l == 0.5);
    CHECK(recs[2].r_p == 1.0);
    CHECK(recs[0].r_p == 0.0);

    std::ostringstream os;
    write_behavior_csv(os, recs);
    CHECK(os.str().rfind("sample_id,r_l_raw,r_p_raw,r_l,r_p\n0,1,1,0,0\n", 0) == 0);

    // Log scale: raw losses 1, e, e^2 sit evenly on the normalized axis.
    for (int i = 0; i < 3; ++i) recs[i].r_l_raw = std::exp(double(i));
    finalize_records(recs, RewardScale::Log);
    CHECK(recs[1].r_l == doctest::Approx(0.5));
}

TEST_CASE("detector behavior: entries are non-negative and restricted to keys") {
    Rng rng(4);
    const Detector det({6, 1, 2, {4}}, rng);
    Vec v(40);
    for (std::size_t t = 0; t < v.size(); ++t) v[t] = std::sin(0.5 * double(t));
    const TimeSeries s("s", 40, 1, v);
    const SampleSet set = initial_windows(s, 6);
    for (const HessianMode& m : {HessianMode{IdentityHessian{}}, HessianMode{DiagonalHessian{}},
                                 HessianMode{CgHessian{5.0, 500, 1e-8}}}) {
        const Vec full = parameter_behavior(det, s, set[0], set.samples(), m);
        CHECK(full.size() == det.net().num_params());
        for (double x : full) CHECK(x >= 0.0);
        const KeyParams keys{{0, 5, 9}};
        const Vec part = parameter_behavior(det, s, set[0], set.samples(), m, &keys);
        REQUIRE(part.size() == 3);
        CHECK(part[1] == doctest::Approx(full[5]).epsilon(1e-9));
    }
    CHECK_THROWS_AS(detector_curvature(det, s, std::span<const WindowSample>{}, DiagonalHessian{}),
                    InvalidArgument);
}
