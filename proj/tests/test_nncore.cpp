#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "plda/nncore.hpp"

using namespace plda;

namespace {

Vec random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::max(std::abs(a), std::abs(b))); }

// Mean batch loss, for central-difference oracles.
double batch_loss(const Network& net, std::span<const Example> batch, LossSpec spec = {}) {
    double s = 0.0;
    for (const auto& e : batch) s += loss_only(net, e.input, e.target, spec);
    return s / static_cast<double>(batch.size());
}

}  // namespace

TEST_CASE("parameter count and layout") {
    Network net({3, 4, 2}, {Activation::tanh, Activation::identity});
    CHECK(net.num_params() == 3 * 4 + 4 + 4 * 2 + 2);
    CHECK(net.weight_offset(0) == 0);
    CHECK(net.bias_offset(0) == 12);
    CHECK(net.weight_offset(1) == 16);
    CHECK(net.bias_offset(1) == 24);
    CHECK_THROWS_AS(Network({3, 4}, {Activation::tanh, Activation::tanh}), InvalidArgument);
}

TEST_CASE("forward examples") {
    SUBCASE("zero identity net gives zeros") {
        Network net({2, 3, 2}, {Activation::identity, Activation::identity});
        CHECK(forward(net, Vec{1, 2}) == Vec{0, 0});
    }
    // One tanh unit: D(x) = alpha * tanh(omega x + beta).
    auto unit = [](double alpha, double omega, double beta) {
        Network net({1, 1, 1}, {Activation::tanh, Activation::identity});
        net.set_params(Vec{omega, beta, alpha, 0.0});
        return net;
    };
    CHECK(forward(unit(1, 1, 0), Vec{0})[0] == 0.0);
    CHECK(forward(unit(2, 1, 0), Vec{1})[0] == doctest::Approx(2.0 * std::tanh(1.0)).epsilon(1e-15));
    CHECK(forward(unit(2, 1, 0), Vec{1})[0] == doctest::Approx(1.52318).epsilon(1e-5));

    Network net({2, 1}, {Activation::identity});
    CHECK_THROWS_AS(forward(net, Vec{1, 2, 3}), InvalidArgument);
}

TEST_CASE("relu forward") {
    Network net({1, 2, 1}, {Activation::relu, Activation::identity});
    net.set_params(Vec{1.0, -1.0, 0.0, 0.0, 1.0, 1.0, 0.0});
    CHECK(forward(net, Vec{2.0})[0] == 2.0);
    CHECK(forward(net, Vec{-3.0})[0] == 3.0);
}

TEST_CASE("loss_and_grad examples") {
    Rng rng(1);
    SUBCASE("perfect reconstruction") {
        Network net = Network::random({3, 5, 3}, {Activation::tanh, Activation::identity}, rng);
        const Vec x{0.1, -0.2, 0.3};
        const Vec y = forward(net, x);
        const auto lg = loss_and_grad(net, x, y);
        CHECK(lg.loss == 0.0);
        for (double g : lg.grad) CHECK(g == 0.0);
    }
    SUBCASE("linear model y = theta x") {
        Network net({1, 1}, {Activation::identity});
        const auto lg = loss_and_grad(net, Vec{1.0}, Vec{1.0});
        CHECK(lg.loss == 1.0);
        REQUIRE(lg.grad.size() == 2);
        CHECK(lg.grad[0] == -2.0);
        CHECK(lg.grad[1] == -2.0);  // bias sees the same residual
    }
    SUBCASE("dimension mismatch") {
        Network net({2, 2}, {Activation::identity});
        CHECK_THROWS_AS(loss_and_grad(net, Vec{1, 2}, Vec{1}), InvalidArgument);
    }
}

TEST_CASE("gradients match central differences on 50 random nets") {
    Rng rng(2024);
    std::uniform_int_distribution<int> width(1, 6);
    const Activation acts[] = {Activation::tanh, Activation::identity, Activation::tanh};
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t in = width(rng), h = width(rng), out = width(rng);
        Network net = Network::random({in, h, out}, {acts[trial % 2], Activation::identity}, rng);
        const Vec x = random_vec(in, rng), t = random_vec(out, rng);
        const LossSpec spec{LossKind::mse, trial % 3 == 0 ? 0.1 : 0.0};
        const auto lg = loss_and_grad(net, x, t, spec);
        REQUIRE(lg.grad.size() == net.num_params());
        CHECK(lg.loss >= 0.0);
        const double h_step = 1e-5;
        for (std::size_t j = 0; j < net.num_params(); ++j) {
            Network p = net, m = net;
            p.params()[j] += h_step;
            m.params()[j] -= h_step;
            const double fd = (loss_only(p, x, t, spec) - loss_only(m, x, t, spec)) / (2 * h_step);
            worst = std::max(worst, rel_err(lg.grad[j], fd));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("mean batch gradient is the average of per-sample gradients") {
    Rng rng(5);
    Network net = Network::random({2, 3, 2}, {Activation::tanh, Activation::identity}, rng);
    std::vector<Vec> xs, ts;
    for (int i = 0; i < 4; ++i) {
        xs.push_back(random_vec(2, rng));
        ts.push_back(random_vec(2, rng));
    }
    std::vector<Example> batch;
    for (int i = 0; i < 4; ++i) batch.push_back({xs[i], ts[i]});
    const auto mean = mean_loss_and_grad(net, batch);
    Vec acc(net.num_params(), 0.0);
    for (int i = 0; i < 4; ++i) {
        const auto g = loss_and_grad(net, xs[i], ts[i]).grad;
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j] / 4.0;
    }
    for (std::size_t j = 0; j < acc.size(); ++j) CHECK(mean.grad[j] == doctest::Approx(acc[j]).epsilon(1e-12));
    CHECK(mean.loss == doctest::Approx(batch_loss(net, batch)).epsilon(1e-12));
}

TEST_CASE("hvp on a quadratic matches the analytic Hessian") {
    // Linear model, targets 0: each example contributes 2 [x;1][x;1]^T to the
    // Hessian over (w1, w2, b), halved by the batch mean. With x1 = (sqrt2, 0)
    // and x2 = (0, 2) the weight block is A = diag(2, 4).
    Network net({2, 1}, {Activation::identity});
    const Vec x1{std::sqrt(2.0), 0.0}, x2{0.0, 2.0}, t{0.0};
    std::vector<Example> batch{{x1, t}, {x2, t}};
    const Vec hv = hvp(net, batch, Vec{1.0, 1.0, 0.0});
    CHECK(hv[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(hv[1] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(hv[2] == doctest::Approx(std::sqrt(2.0) + 2.0).epsilon(1e-12));

    Eigen::Matrix3d h;
    h << 2.0, 0.0, std::sqrt(2.0), 0.0, 4.0, 2.0, std::sqrt(2.0), 2.0, 2.0;
    const Vec v{0.3, -1.2, 0.5};
    const Eigen::Vector3d want = h * Eigen::Vector3d(v[0], v[1], v[2]);
    const Vec got = hvp(net, batch, v);
    for (int i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));

    const Vec zero = hvp(net, batch, Vec(3, 0.0));
    for (double z : zero) CHECK(z == 0.0);
    CHECK_THROWS_AS(hvp(net, std::span<const Example>{}, v), InvalidArgument);
}

TEST_CASE("hvp: exact, finite-difference and explicit Hessian agree; H is symmetric") {
    Rng rng(77);
    Network net = Network::random({2, 3, 2}, {Activation::tanh, Activation::identity}, rng);
    REQUIRE(net.num_params() <= 20);
    std::vector<Vec> xs, ts;
    for (int i = 0; i < 6; ++i) {
        xs.push_back(random_vec(2, rng));
        ts.push_back(random_vec(2, rng));
    }
    std::vector<Example> batch;
    for (int i = 0; i < 6; ++i) batch.push_back({xs[i], ts[i]});
    const std::size_t p = net.num_params();

    // Explicit Hessian by central differences of the analytic gradient.
    Eigen::MatrixXd explicit_h(p, p);
    const double step = 1e-5;
    for (std::size_t j = 0; j < p; ++j) {
        Network a = net, b = net;
        a.params()[j] += step;
        b.params()[j] -= step;
        const Vec ga = mean_loss_and_grad(a, batch).grad, gb = mean_loss_and_grad(b, batch).grad;
        for (std::size_t i = 0; i < p; ++i) explicit_h(i, j) = (ga[i] - gb[i]) / (2 * step);
    }
    Eigen::MatrixXd stacked(p, p), stacked_fd(p, p);
    for (std::size_t j = 0; j < p; ++j) {
        Vec e(p, 0.0);
        e[j] = 1.0;
        const Vec c = hvp(net, batch, e), cf = hvp_fd(net, batch, e);
        for (std::size_t i = 0; i < p; ++i) {
            stacked(i, j) = c[i];
            stacked_fd(i, j) = cf[i];
        }
    }
    CHECK((stacked - explicit_h).norm() / explicit_h.norm() < 1e-3);
    CHECK((stacked_fd - stacked).norm() / stacked.norm() < 1e-3);
    CHECK((stacked - stacked.transpose()).norm() / stacked.norm() < 1e-10);

    for (int trial = 0; trial < 5; ++trial) {
        const Vec u = random_vec(p, rng), v = random_vec(p, rng);
        const Vec hu = hvp(net, batch, u), hv = hvp(net, batch, v);
        double uhv = 0.0, vhu = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            uhv += u[i] * hv[i];
            vhu += v[i] * hu[i];
        }
        CHECK(std::abs(uhv - vhu) < 1e-6);
    }
}

TEST_CASE("optimizer examples") {
    Network net({1, 1}, {Activation::identity});
    net.set_params(Vec{1.0, 0.0});
    auto sgd = OptimizerState::sgd(2, 0.1);
    optimizer_step(sgd, net, Vec{2.0, 0.0});
    CHECK(net.params()[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(net.params()[1] == 0.0);

    const Vec before(net.params().begin(), net.params().end());
    optimizer_step(sgd, net, Vec{0.0, 0.0});
    CHECK(Vec(net.params().begin(), net.params().end()) == before);

    auto adam = OptimizerState::adam(2);
    CHECK(adam.m.size() == 2);
    CHECK(adam.v.size() == 2);
    CHECK_THROWS_AS(optimizer_step(adam, net, Vec{std::numeric_limits<double>::quiet_NaN(), 0.0}),
                    NumericError);
    CHECK(Vec(net.params().begin(), net.params().end()) == before);
    CHECK(adam.step == 0);
    CHECK_THROWS_AS(optimizer_step(adam, net, Vec{1.0}), InvalidArgument);
}

TEST_CASE("descent on a convex quadratic strictly decreases the loss") {
    // Linear regression onto fixed targets is convex in the parameters.
    Rng rng(8);
    Network net({3, 1}, {Activation::identity});
    std::vector<Vec> xs, ts;
    for (int i = 0; i < 8; ++i) {
        xs.push_back(random_vec(3, rng));
        ts.push_back(random_vec(1, rng));
    }
    std::vector<Example> batch;
    for (int i = 0; i < 8; ++i) batch.push_back({xs[i], ts[i]});
    auto opt = OptimizerState::sgd(net.num_params(), 0.05);
    double prev = mean_loss_and_grad(net, batch).loss;
    for (int step = 0; step < 100; ++step) {
        optimizer_step(opt, net, mean_loss_and_grad(net, batch).grad);
        const double now = mean_loss_and_grad(net, batch).loss;
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("training trajectories are bit-identical for equal seeds") {
    auto trajectory = [] {
        Rng rng(99);
        Network net = Network::random({4, 6, 4}, {Activation::tanh, Activation::identity}, rng);
        auto opt = OptimizerState::adam(net.num_params(), 1e-2);
        std::vector<Vec> xs;
        for (int i = 0; i < 5; ++i) xs.push_back(random_vec(4, rng));
        std::vector<Example> batch;
        for (const auto& x : xs) batch.push_back({x, x});
        for (int s = 0; s < 50; ++s) optimizer_step(opt, net, mean_loss_and_grad(net, batch).grad);
        return Vec(net.params().begin(), net.params().end());
    };
    CHECK(trajectory() == trajectory());
}

TEST_CASE("activation names round-trip") {
    for (auto a : {Activation::tanh, Activation::relu, Activation::identity})
        CHECK(activation_from_string(to_string(a)) == a);
    CHECK_THROWS_AS(activation_from_string("gelu"), InvalidArgument);
}
