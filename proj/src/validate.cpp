#include "plda/validate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "plda/kernels.hpp"

namespace plda::checks {

double CheckResult::metric(const std::string& key) const {
    for (const auto& [k, v] : metrics) {
        if (k == key) return v;
    }
    throw InvalidArgument("check '" + name + "' has no metric '" + key + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

using Mat = Eigen::MatrixXd;
using EVec = Eigen::VectorXd;

EVec to_eigen(std::span<const double> v) { return Eigen::Map<const EVec>(v.data(), static_cast<Eigen::Index>(v.size())); }

double rel_l2(std::span<const double> a, std::span<const double> b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

template <class F>
CheckResult guarded(const std::string& name, F&& body) {
    const auto t0 = Clock::now();
    CheckResult res;
    try {
        res = body();
    } catch (const std::exception& e) {
        res.passed = false;
        res.detail = std::string("error: ") + e.what();
    }
    res.name = name;
    res.seconds = seconds_since(t0);
    return res;
}

}  // namespace

//==============================================================================
// Influence
//==============================================================================

CheckResult influence(std::uint64_t seed) {
    return guarded("influence", [&] {
        constexpr std::size_t d = 8, n = 64;
        constexpr double l2 = 0.5, eps = 1e-3;
        Rng rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);

        Vec xs(n * d), ys(n), w_true(d);
        for (double& w : w_true) w = normal(rng);
        for (std::size_t i = 0; i < n; ++i) {
            double y = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                xs[i * d + j] = normal(rng);
                y += xs[i * d + j] * w_true[j];
            }
            ys[i] = y + 0.1 * normal(rng);
        }

        // Closed-form minimizer of mean_i (x~_i . theta - y_i)^2 + l2 |theta|^2,
        // theta = [w_1 .. w_d, b] to match the network layout.
        const Eigen::Index p = d + 1;
        Mat xt(n, p);
        EVec y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) xt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i * d + j];
            xt(static_cast<Eigen::Index>(i), d) = 1.0;
            y(static_cast<Eigen::Index>(i)) = ys[i];
        }
        const Mat a = (2.0 / n) * xt.transpose() * xt + 2.0 * l2 * Mat::Identity(p, p);
        const EVec c = (2.0 / n) * xt.transpose() * y;
        const EVec theta = a.ldlt().solve(c);

        const std::size_t s = 0;
        const EVec xs_row = xt.row(0).transpose();
        const Mat b = 2.0 * xs_row * xs_row.transpose() + 2.0 * l2 * Mat::Identity(p, p);
        const EVec e = 2.0 * xs_row * ys[s];
        const EVec plus = (a + eps * b).ldlt().solve(c + eps * e);
        const EVec minus = (a - eps * b).ldlt().solve(c - eps * e);
        const EVec retrain = (plus - minus) / (2.0 * eps);
        const EVec one_sided = (plus - theta) / eps;

        Network net({d, 1}, {Activation::identity});
        net.set_params(Vec(theta.data(), theta.data() + p));
        const LossSpec spec{LossKind::mse, l2};
        std::vector<Example> batch;
        for (std::size_t i = 0; i < n; ++i) {
            batch.push_back({std::span<const double>(&xs[i * d], d), std::span<const double>(&ys[i], 1)});
        }
        const double stationarity = [&] {
            const LossGrad g = mean_loss_and_grad(net, batch, spec);
            return std::sqrt(kernels::dot(g.grad, g.grad));
        }();

        const LossGrad lg = loss_and_grad(net, batch[s].input, batch[s].target, spec);
        Curvature curv;
        curv.hvp = [&](std::span<const double> v, std::span<double> out) {
            const Vec hv = hvp(net, batch, v, spec);
            std::copy(hv.begin(), hv.end(), out.begin());
        };
        Vec predicted = influence_direction(lg.grad, CgHessian{1e-13, 500, 1e-13}, curv);
        for (double& v : predicted) v = -v;

        const Vec oracle(retrain.data(), retrain.data() + p);
        const Vec oracle_one(one_sided.data(), one_sided.data() + p);
        CheckResult r;
        r.metrics = {{"relative_error", rel_l2(predicted, oracle)},
                     {"one_sided_relative_error", rel_l2(predicted, oracle_one)},
                     {"parameters", static_cast<double>(p)},
                     {"stationarity_norm", stationarity}};
        r.passed = r.metric("relative_error") < 1e-4;
        return r;
    });
}

//==============================================================================
// CG against a dense solve
//==============================================================================

CheckResult cg_consistency(std::uint64_t seed) {
    return guarded("cg_consistency", [&] {
        constexpr std::size_t n = 32, in = 3;
        Rng rng(seed);
        Network net = Network::random({in, 3, 1}, {Activation::tanh, Activation::identity}, rng);
        const std::size_t p = net.num_params();
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        Vec xs(n * in), ys(n);
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < in; ++j) sum += (xs[i * in + j] = unif(rng));
            ys[i] = std::sin(sum);
        }
        std::vector<Example> batch;
        for (std::size_t i = 0; i < n; ++i) {
            batch.push_back({std::span<const double>(&xs[i * in], in), std::span<const double>(&ys[i], 1)});
        }
        OptimizerState opt = OptimizerState::adam(p, 1e-2);
        for (int it = 0; it < 2000; ++it) optimizer_step(opt, net, mean_loss_and_grad(net, batch).grad);

        // Explicit Hessian from central differences of the mean gradient.
        constexpr double h = 1e-5;
        const Vec theta(net.params().begin(), net.params().end());
        Mat hess(p, p);
        Network probe = net;
        for (std::size_t j = 0; j < p; ++j) {
            Vec tp = theta, tm = theta;
            tp[j] += h;
            tm[j] -= h;
            probe.set_params(tp);
            const Vec gp = mean_loss_and_grad(probe, batch).grad;
            probe.set_params(tm);
            const Vec gm = mean_loss_and_grad(probe, batch).grad;
            for (std::size_t i = 0; i < p; ++i) {
                hess(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        hess = 0.5 * (hess + hess.transpose()).eval();
        const double min_eig = Eigen::SelfAdjointEigenSolver<Mat>(hess).eigenvalues().minCoeff();
        const double lambda = std::max(0.1, 0.1 - min_eig);

        const LossGrad lg = loss_and_grad(net, batch[0].input, batch[0].target);
        const Mat damped = hess + lambda * Mat::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
        const EVec dense = damped.ldlt().solve(to_eigen(lg.grad));
        Vec dense_abs(p);
        for (std::size_t i = 0; i < p; ++i) dense_abs[i] = std::abs(dense(static_cast<Eigen::Index>(i)));

        Curvature curv;
        curv.hvp = [&](std::span<const double> v, std::span<double> out) {
            const Vec hv = hvp(net, batch, v);
            std::copy(hv.begin(), hv.end(), out.begin());
        };
        const Vec cg = parameter_behavior(lg.grad, CgHessian{lambda, 500, 1e-12}, curv);

        CheckResult r;
        r.metrics = {{"relative_error", rel_l2(cg, dense_abs)},
                     {"parameters", static_cast<double>(p)},
                     {"lambda", lambda},
                     {"min_hessian_eigenvalue", min_eig}};
        r.passed = r.metric("relative_error") < 1e-3;
        return r;
    });
}

//==============================================================================
// Reachability
//==============================================================================

CheckResult reachability() {
    return guarded("reachability", [] {
        std::size_t failures = 0, first_failure = 0;
        for (std::size_t w = 4; w <= 64; ++w) {
            const auto reach = reachable_offsets(w, static_cast<long>(4 * w));
            if (!reach.contains(1)) {
                if (failures++ == 0) first_failure = w;
            }
        }
        CheckResult r;
        r.metrics = {{"windows_checked", 61.0}, {"failures", static_cast<double>(failures)}};
        r.passed = failures == 0;
        if (failures) r.detail = "first failing w = " + std::to_string(first_failure);
        return r;
    });
}

//==============================================================================
// Frequency decay
//==============================================================================

CheckResult decay(std::uint64_t seed, const DecaySetup& setup) {
    return guarded("decay", [&] {
        require(setup.bins.size() == setup.amplitudes.size() && setup.bins.size() >= 2,
                "decay: need matching bins and amplitudes");
        const std::size_t n = setup.points;
        Vec signal(n, 0.0);
        for (std::size_t k = 0; k < setup.bins.size(); ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                signal[i] += setup.amplitudes[k] *
                             std::sin(2.0 * std::numbers::pi * static_cast<double>(setup.bins[k] * i) /
                                      static_cast<double>(n));
            }
        }
        Rng rng(seed);
        Network net = Network::random({1, setup.hidden, 1}, {Activation::tanh, Activation::identity}, rng);
        OptimizerState opt = OptimizerState::adam(net.num_params(), setup.lr);
        const Vec x = decay_grid(n);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t epoch = 0; epoch < setup.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t b = 0; b < n; b += setup.batch) {
                std::vector<Example> mb;
                for (std::size_t i = b; i < std::min(n, b + setup.batch); ++i) {
                    mb.push_back({std::span<const double>(&x[order[i]], 1),
                                  std::span<const double>(&signal[order[i]], 1)});
                }
                optimizer_step(opt, net, mean_loss_and_grad(net, mb).grad);
            }
        }
        const auto grads = frequency_gradient_decay(net, signal);
        // Decay is measured over every non-DC bin up to Nyquist. The signal's
        // own bins are reported too; with three points their rank
        // correlation is dominated by how well each component was fitted.
        Vec fs, logs, sig_fs, sig_logs;
        for (std::size_t i = 0; i < grads.size(); ++i) {
            fs.push_back(static_cast<double>(i + 1));
            logs.push_back(std::log(grads[i].magnitude));
        }
        CheckResult r;
        for (std::size_t bin : setup.bins) {
            const auto& g = grads.at(bin - 1);
            sig_fs.push_back(static_cast<double>(bin));
            sig_logs.push_back(std::log(g.magnitude));
            r.metrics.push_back({"log_magnitude_bin_" + std::to_string(bin), std::log(g.magnitude)});
            r.metrics.push_back({"residual_bin_" + std::to_string(bin), g.residual_amplitude});
        }
        const double rho = spearman(fs, logs);
        r.metrics.insert(r.metrics.begin(), {{"spearman", rho},
                                             {"bins", static_cast<double>(fs.size())},
                                             {"spearman_signal_bins", spearman(sig_fs, sig_logs)}});
        r.passed = rho < -0.8;
        return r;
    });
}

//==============================================================================
// Benchmark experiments
//==============================================================================

BenchmarkSetup default_benchmark_setup() {
    BenchmarkSetup s;
    s.run.seeds = s.seeds;
    // Small batches give the detector enough steps inside the epoch cap.
    s.run.batch_size = 8;
    s.run.reward_scale = RewardScale::Log;
    s.run.state_rewards = true;
    s.run.agent.gamma = 0.5;
    return s;
}

Detector labeling_baseline(const TimeSeries& train, const RunConfig& cfg, std::size_t epochs) {
    SampleSet all(cfg.window, fit_limit(train, cfg));
    for (std::size_t s = 0; s <= all.max_start(); ++s) all.insert(s);
    Rng rng(cfg.seed);
    Detector det({cfg.window, train.dims, cfg.bottleneck, cfg.hidden}, rng);
    OptimizerState opt = OptimizerState::adam(det.net().num_params(), cfg.detector_lr);
    for (std::size_t e = 0; e < epochs; ++e) train_epoch(det, train, all, opt, cfg.batch_size, rng);
    return det;
}

Tracking tracking_labels(const Detector& baseline, const TimeSeries& train,
                         const std::vector<std::uint8_t>& ac_flags, std::size_t limit,
                         double quantile) {
    const std::size_t w = baseline.config().window;
    const Vec all = all_window_losses(baseline, train, limit);
    // The loss threshold is taken over normal windows only.
    const PointFlags ac(ac_flags);
    std::vector<std::size_t> starts;
    Vec losses;
    for (std::size_t s = 0; s < all.size(); ++s) {
        if (ac.any(s, w)) continue;
        starts.push_back(s);
        losses.push_back(all[s]);
    }
    const auto hs = label_hard_samples(starts, losses, ac_flags, w, quantile);
    std::vector<std::uint8_t> by_start(all.size(), 0);
    for (std::size_t i = 0; i < starts.size(); ++i) by_start[starts[i]] = hs[i];
    return {ac_flags, by_start};
}

namespace {

double mean_of(const Vec& v) {
    return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                     : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

CheckResult rewards(const BenchmarkSetup& setup, std::size_t detector_epochs) {
    return guarded("rewards", [&] {
        Vec rl_ac, rl_hs, rl_simple, rp_ac, rp_hs, aucs;
        for (std::uint64_t seed : setup.seeds) {
            const auto spec = default_benchmark_spec(setup.layout, seed);
            const auto bench = contaminated_benchmark(spec, setup.contamination, seed);
            const TimeSeries& series = bench.train.series;
            RunConfig cfg = setup.run;
            cfg.seed = seed;
            const std::size_t limit = fit_limit(series, cfg);
            SampleSet set = initial_windows(series, cfg.window, limit);
            Rng rng(seed);
            Detector det({cfg.window, series.dims, cfg.bottleneck, cfg.hidden}, rng);
            OptimizerState opt = OptimizerState::adam(det.net().num_params(), cfg.detector_lr);
            for (std::size_t e = 0; e < detector_epochs; ++e) train_epoch(det, series, set, opt, cfg.batch_size, rng);

            BehaviorEnv env(det, series, set, cfg, rng);
            const PointFlags ac(bench.train.ac_flags), hard(bench.data.train_hard_mask);
            Vec s_rl_ac, s_rl_hs, s_rl_simple, s_rp_ac, s_rp_hs;
            for (std::size_t i = 0; i < set.size(); ++i) {
                const auto& s = set[i];
                const auto& rec = env.records()[i];
                if (ac.any(s.start, s.w)) {
                    s_rl_ac.push_back(rec.r_l);
                    s_rp_ac.push_back(rec.r_p);
                } else if (hard.any(s.start, s.w)) {
                    s_rl_hs.push_back(rec.r_l);
                    s_rp_hs.push_back(rec.r_p);
                } else {
                    s_rl_simple.push_back(rec.r_l);
                }
            }
            require(!s_rl_ac.empty() && !s_rl_hs.empty() && !s_rl_simple.empty(),
                    "rewards: a sample class is empty for seed " + std::to_string(seed));
            rl_ac.push_back(mean_of(s_rl_ac));
            rl_hs.push_back(mean_of(s_rl_hs));
            rl_simple.push_back(mean_of(s_rl_simple));
            rp_ac.push_back(mean_of(s_rp_ac));
            rp_hs.push_back(mean_of(s_rp_hs));
            aucs.push_back(auc(s_rp_ac, s_rp_hs));
        }
        CheckResult r;
        r.metrics = {{"mean_r_l_ac", mean_of(rl_ac)},      {"mean_r_l_hs", mean_of(rl_hs)},
                     {"mean_r_l_simple", mean_of(rl_simple)}, {"mean_r_p_ac", mean_of(rp_ac)},
                     {"mean_r_p_hs", mean_of(rp_hs)},      {"auc_r_p_ac_vs_hs", mean_of(aucs)}};
        r.passed = r.metric("mean_r_l_ac") > r.metric("mean_r_l_simple") &&
                   r.metric("mean_r_l_hs") > r.metric("mean_r_l_simple") &&
                   r.metric("auc_r_p_ac_vs_hs") > 0.7;
        return r;
    });
}

std::pair<CheckResult, CheckResult> paired_benchmark(const BenchmarkSetup& setup) {
    const auto t0 = Clock::now();
    CheckResult dyn, f1;
    dyn.name = "dynamics";
    f1.name = "improvement";
    try {
        Vec ac0, ac1, hs0, hs1, f1_orig, f1_plda, gains;
        for (std::uint64_t seed : setup.seeds) {
            const auto spec = default_benchmark_spec(setup.layout, seed);
            const auto bench = contaminated_benchmark(spec, setup.contamination, seed);
            const TimeSeries& series = bench.train.series;
            const TimeSeries& test = bench.data.test;
            RunConfig cfg = setup.run;
            cfg.seed = seed;
            require(cfg.epochs > 0, "paired benchmark: the PLDA arm needs at least one augmentation epoch");

            const RunResult orig = baseline_run(series, cfg, &test);
            const Tracking tracking = tracking_labels(labeling_baseline(series, cfg), series,
                                                      bench.train.ac_flags, fit_limit(series, cfg));
            const RunResult plda = run(series, cfg, &test, &tracking);

            const auto& first = *plda.report.initial_proportions;
            const auto& last = *plda.report.epochs.at(cfg.epochs - 1).proportions;
            ac0.push_back(first.ac);
            ac1.push_back(last.ac);
            hs0.push_back(first.hs);
            hs1.push_back(last.hs);
            f1_orig.push_back(orig.report.evaluation->f1);
            f1_plda.push_back(plda.report.evaluation->f1);
            gains.push_back(f1_plda.back() - f1_orig.back());
        }
        dyn.metrics = {{"initial_ac", mean_of(ac0)}, {"final_ac", mean_of(ac1)},
                       {"initial_hs", mean_of(hs0)}, {"final_hs", mean_of(hs1)}};
        dyn.passed = dyn.metric("final_ac") <= 0.6 * dyn.metric("initial_ac") &&
                     dyn.metric("final_hs") > dyn.metric("initial_hs");

        auto sd = [](const Vec& v) {
            const double m = mean_of(v);
            double ss = 0.0;
            for (double x : v) ss += (x - m) * (x - m);
            return v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        };
        const double mo = mean_of(f1_orig), mp = mean_of(f1_plda);
        f1.metrics = {{"orig_f1_mean", mo},         {"orig_f1_std", sd(f1_orig)},
                      {"plda_f1_mean", mp},         {"plda_f1_std", sd(f1_plda)},
                      {"mean_paired_gain", mean_of(gains)},
                      {"improvement_percent", mo > 0.0 ? 100.0 * (mp - mo) / mo : 0.0}};
        f1.passed = mp >= mo && f1.metric("mean_paired_gain") > 0.0;
    } catch (const std::exception& e) {
        dyn.passed = f1.passed = false;
        dyn.detail = f1.detail = std::string("error: ") + e.what();
    }
    dyn.seconds = f1.seconds = seconds_since(t0);
    return {dyn, f1};
}

//==============================================================================
// Metrics
//==============================================================================

CheckResult metrics_exact() {
    return guarded("metrics", [] {
        std::vector<std::string> failures;
        auto expect = [&](bool ok, const std::string& what) {
            if (!ok) failures.push_back(what);
        };
        using U8 = std::vector<std::uint8_t>;
        {
            const Vec s{1, 5, 2};
            expect(point_adjust(s, U8{1, 1, 1}) == Vec{5, 5, 5}, "single segment");
            expect(point_adjust(s, U8{0, 0, 0}) == s, "no segments");
        }
        expect(point_adjust(Vec{1, 5, 2, 9, 1}, U8{0, 1, 1, 0, 0}) == Vec{1, 5, 5, 9, 1},
               "segment inside normal points");
        {
            const auto ev = best_f1(Vec{0.9, 0.1, 0.8, 0.2}, U8{1, 0, 1, 0}, false);
            expect(ev.f1 == 1.0 && ev.threshold == 0.8, "separable example threshold 0.8");
        }
        {
            const auto ev = best_f1(Vec{0.3, 0.7, 0.9, 0.1}, U8{0, 1, 1, 0}, true);
            expect(ev.f1 == 1.0, "perfect separation");
        }
        {
            // Adjustment lifts the whole segment to its max: predictions at
            // threshold 0.6 become {1, 2, 3} with truth {1, 2, 3}.
            const auto ev = best_f1(Vec{0.1, 0.6, 0.2, 0.2, 0.5}, U8{0, 1, 1, 1, 0}, true);
            expect(ev.f1 == 1.0 && ev.threshold == 0.6, "adjusted segment");
            const auto raw = best_f1(Vec{0.1, 0.6, 0.2, 0.2, 0.5}, U8{0, 1, 1, 1, 0}, false);
            // Threshold 0.2 predicts {1, 2, 3, 4}: tp 3, fp 1, fn 0 -> 6 / 7.
            expect(raw.f1 == 6.0 / 7.0 && raw.threshold == 0.2, "unadjusted scores");
        }
        CheckResult r;
        r.metrics = {{"failures", static_cast<double>(failures.size())}};
        r.passed = failures.empty();
        for (const auto& f : failures) r.detail += (r.detail.empty() ? "" : "; ") + f;
        return r;
    });
}

//==============================================================================
// Numeric core
//==============================================================================

CheckResult gradients(std::uint64_t seed) {
    return guarded("gradients", [&] {
        constexpr double h = 1e-5, floor = 1e-6;
        Rng rng(seed);
        std::uniform_int_distribution<std::size_t> width(1, 6), depth(1, 3);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<std::size_t> sizes{width(rng)};
            const std::size_t layers = depth(rng);
            for (std::size_t l = 0; l < layers; ++l) sizes.push_back(width(rng));
            std::vector<Activation> acts;
            for (std::size_t l = 0; l < layers; ++l) {
                acts.push_back(l + 1 == layers ? Activation::identity : Activation::tanh);
            }
            Network net = Network::random(sizes, acts, rng);
            Vec x(sizes.front()), t(sizes.back());
            for (double& v : x) v = unif(rng);
            for (double& v : t) v = unif(rng);
            const LossGrad lg = loss_and_grad(net, x, t);
            Vec theta(net.params().begin(), net.params().end());
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double orig = theta[i];
                theta[i] = orig + h;
                net.set_params(theta);
                const double lp = loss_only(net, x, t);
                theta[i] = orig - h;
                net.set_params(theta);
                const double lm = loss_only(net, x, t);
                theta[i] = orig;
                const double fd = (lp - lm) / (2.0 * h);
                const double scale = std::max({std::abs(fd), std::abs(lg.grad[i]), floor});
                worst = std::max(worst, std::abs(fd - lg.grad[i]) / scale);
            }
            net.set_params(theta);
        }
        CheckResult r;
        r.metrics = {{"max_relative_error", worst}, {"nets", 50.0}};
        r.passed = worst < 1e-4;
        return r;
    });
}

CheckResult toy_mdp(std::uint64_t seed) {
    return guarded("toy_mdp", [&] {
        constexpr std::size_t ns = 3;
        constexpr double gamma = 0.9;
        const std::size_t next[ns][kNumActions] = {{1, 0, 2}, {2, 0, 1}, {0, 2, 1}};
        const double reward[ns][kNumActions] = {{0.0, 0.3, 0.1}, {0.5, 0.2, 0.4}, {1.0, 0.6, 0.1}};

        double q[ns][kNumActions] = {};
        for (int it = 0; it < 2000; ++it) {
            double v[ns];
            for (std::size_t s = 0; s < ns; ++s) v[s] = *std::max_element(q[s], q[s] + kNumActions);
            for (std::size_t s = 0; s < ns; ++s) {
                for (std::size_t a = 0; a < kNumActions; ++a) q[s][a] = reward[s][a] + gamma * v[next[s][a]];
            }
        }

        auto one_hot = [](std::size_t s) {
            Vec f(ns, 0.0);
            f[s] = 1.0;
            return f;
        };
        std::vector<Transition> all;
        for (std::size_t s = 0; s < ns; ++s) {
            for (std::size_t a = 0; a < kNumActions; ++a) {
                all.push_back({one_hot(s), action_from_index(a), reward[s][a], one_hot(next[s][a])});
            }
        }
        QAgentConfig cfg;
        cfg.hidden = {32};
        cfg.gamma = gamma;
        cfg.lr = 5e-3;
        Rng rng(seed);
        QAgent agent(ns, cfg, rng);
        for (int it = 0; it < 4000; ++it) agent.td_update(all);

        std::size_t mismatches = 0;
        double max_err = 0.0;
        for (std::size_t s = 0; s < ns; ++s) {
            const QValues learned = agent.q_values(one_hot(s));
            QValues exact{};
            for (std::size_t a = 0; a < kNumActions; ++a) {
                exact[a] = q[s][a];
                max_err = std::max(max_err, std::abs(learned[a] - exact[a]));
            }
            if (select_action(learned) != select_action(exact)) ++mismatches;
        }
        CheckResult r;
        r.metrics = {{"policy_mismatches", static_cast<double>(mismatches)}, {"max_q_error", max_err}};
        r.passed = mismatches == 0;
        return r;
    });
}

}  // namespace plda::checks
