#include "plda/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "plda/kernels.hpp"

namespace plda {

void RunConfig::validate() const {
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    require(window >= 3, "run config: window must be at least 3");
    require(bottleneck >= 1, "run config: bottleneck must be positive");
    for (std::size_t h : hidden) require(h >= 1, "run config: hidden sizes must be positive");
    require(detector_lr > 0.0, "run config: detector_lr must be positive");
    require(batch_size >= 1, "run config: batch_size must be positive");
    require(unit(alpha), "run config: alpha must lie in [0, 1]");
    require(unit(p_explore), "run config: p_explore must lie in [0, 1]");
    require(key_params >= 1, "run config: key_params must be positive");
    require(curvature_batch >= 1, "run config: curvature_batch must be positive");
    plda::validate(hessian);
    agent.validate();
    require(memory >= 1, "run config: memory must be positive");
    require(minibatch >= 1, "run config: minibatch must be positive");
    require(patience >= 1, "run config: patience must be positive");
    require(max_epochs >= 1, "run config: max_epochs must be positive");
    require(validation_fraction > 0.0 && validation_fraction < 1.0,
            "run config: validation_fraction must lie in (0, 1)");
}

std::size_t state_feature_size(const RunConfig& cfg, std::size_t dims) {
    return cfg.window * dims + (cfg.state_rewards ? 2 : 0);
}

//==============================================================================
// Environment
//==============================================================================

namespace {

Vec restrict_to(const Vec& full, const KeyParams& keys) {
    Vec out;
    out.reserve(keys.k());
    for (std::size_t i : keys.indices) out.push_back(full[i]);
    return out;
}

double rescale(double raw, double lo, double hi) {
    if (!(hi > lo)) return 0.5;
    return std::clamp((raw - lo) / (hi - lo), 0.0, 1.0);
}

}  // namespace

BehaviorEnv::BehaviorEnv(const Detector& det, const TimeSeries& series, const SampleSet& set,
                         const RunConfig& cfg, Rng& rng)
    : det_(det), series_(series), cfg_(cfg) {
    require(!set.empty(), "augmentation environment: empty sample set");
    const auto samples = set.samples();

    std::vector<WindowSample> batch(samples.begin(), samples.end());
    if (batch.size() > cfg.curvature_batch) {
        std::shuffle(batch.begin(), batch.end(), rng);
        batch.resize(cfg.curvature_batch);
        std::sort(batch.begin(), batch.end(),
                  [](const WindowSample& a, const WindowSample& b) { return a.start < b.start; });
    }
    curvature_ = detector_curvature(det, series, batch, cfg.hessian);

    std::vector<Vec> full;
    full.reserve(samples.size());
    records_.reserve(samples.size());
    for (const auto& s : samples) {
        const LossGrad lg = sample_loss_and_grad(det, series, s);
        full.push_back(parameter_behavior(lg.grad, cfg.hessian, curvature_));
        BehaviorRecord rec;
        rec.sample_id = s.id;
        rec.r_l_raw = lg.loss;
        records_.push_back(std::move(rec));
    }
    keys_ = select_key_parameters(full, std::min(cfg.key_params, det.net().num_params()));
    for (std::size_t i = 0; i < records_.size(); ++i) records_[i].p_vec = restrict_to(full[i], keys_);
    full.clear();

    finalize_records(records_, cfg.reward_scale);
    std::vector<Vec> ps;
    ps.reserve(records_.size());
    for (const auto& r : records_) ps.push_back(r.p_vec);
    center_ = behavior_center(ps);

    l_lo_ = p_lo_ = std::numeric_limits<double>::infinity();
    l_hi_ = p_hi_ = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        const double l = scaled_raw(r.r_l_raw, cfg.reward_scale);
        const double p = scaled_raw(r.r_p_raw, cfg.reward_scale);
        l_lo_ = std::min(l_lo_, l);
        l_hi_ = std::max(l_hi_, l);
        p_lo_ = std::min(p_lo_, p);
        p_hi_ = std::max(p_hi_, p);
        by_start_[samples[i].start] = {r.r_l, r.r_p};
    }
}

std::pair<double, double> BehaviorEnv::rewards_of(const WindowSample& s) {
    if (auto it = by_start_.find(s.start); it != by_start_.end()) return it->second;
    const LossGrad lg = sample_loss_and_grad(det_, series_, s);
    const Vec p = parameter_behavior(lg.grad, cfg_.hessian, curvature_, &keys_);
    const double rp_raw = std::sqrt(kernels::sq_dist(p, center_));
    const std::pair<double, double> r{rescale(scaled_raw(lg.loss, cfg_.reward_scale), l_lo_, l_hi_),
                                     rescale(scaled_raw(rp_raw, cfg_.reward_scale), p_lo_, p_hi_)};
    by_start_[s.start] = r;
    return r;
}

StateFeatures BehaviorEnv::features(const WindowSample& s) {
    auto win = series_.window(s.start, s.w);
    StateFeatures f(win.begin(), win.end());
    if (cfg_.state_rewards) {
        const auto [rl, rp] = rewards_of(s);
        f.push_back(rl);
        f.push_back(rp);
    }
    return f;
}

double BehaviorEnv::reward(const WindowSample& s, Action a) {
    const auto [rl, rp] = rewards_of(s);
    return dual_reward(rl, rp, a, cfg_.alpha);
}

WindowSample BehaviorEnv::next_state(const SampleSet& set, const WindowSample& s, Action a,
                                     Rng& rng) {
    return transition(set, series_, s, a, cfg_.p_explore, rng);
}

//==============================================================================
// Augmentation epoch
//==============================================================================

AugmentStats augment_epoch(const Detector& det, const TimeSeries& series, SampleSet& set,
                           QAgent& agent, ReplayMemory& memory, const RunConfig& cfg,
                           bool first_epoch, Rng& rng, const FrozenPolicy* policy) {
    require(!set.empty(), "augment_epoch: empty sample set");
    AugmentStats stats;
    stats.mean_td_loss = std::numeric_limits<double>::quiet_NaN();
    const std::size_t n_iters = cfg.n_iters.value_or(set.size());
    const bool learn = policy == nullptr;
    if (n_iters == 0 && !(first_epoch && learn)) return stats;

    BehaviorEnv env(det, series, set, cfg, rng);
    stats.key_params = env.keys().k();
    if (first_epoch && learn) warm_start(env, set, memory, cfg.warm_start_steps, rng);

    std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
    WindowSample s = set[pick(rng)];
    double loss_sum = 0.0;
    for (std::size_t it = 0; it < n_iters; ++it) {
        StateFeatures state = env.features(s);
        const Action a = learn ? select_action(agent.q_values(state)) : (*policy)(s);
        const double r = env.reward(s, a);
        const ActionOutcome outcome = apply_action(set, s, a);
        switch (a) {
            case Action::expand: ++stats.actions.expand; break;
            case Action::preserve: ++stats.actions.preserve; break;
            case Action::remove: ++stats.actions.remove; break;
        }
        if (outcome.guard_triggered) ++stats.guard_events;
        const WindowSample next = env.next_state(set, s, a, rng);

        IterationLog row{0, it, s.start, a, r, std::numeric_limits<double>::quiet_NaN()};
        if (learn) {
            memory.push({std::move(state), a, r, env.features(next)});
            if (memory.size() >= cfg.minibatch) {
                const auto mb = memory.sample(cfg.minibatch, rng);
                row.td_loss = agent.td_update(mb);
                loss_sum += row.td_loss;
                ++stats.td_updates;
            }
        }
        stats.log.push_back(row);
        s = next;
    }
    if (stats.td_updates > 0) stats.mean_td_loss = loss_sum / static_cast<double>(stats.td_updates);
    return stats;
}

//==============================================================================
// Outer loop
//==============================================================================

std::size_t fit_limit(const TimeSeries& series, const RunConfig& cfg) {
    const auto limit = static_cast<std::size_t>(
        std::floor(static_cast<double>(series.length) * (1.0 - cfg.validation_fraction)));
    if (limit < cfg.window || series.length - limit < cfg.window) {
        throw InvalidArgument("series of length " + std::to_string(series.length) +
                              " cannot hold a fit region and a validation suffix of at least w = " +
                              std::to_string(cfg.window) + " points each");
    }
    return limit;
}

namespace {

std::vector<WindowSample> validation_windows(const TimeSeries& series, std::size_t from,
                                             std::size_t w) {
    std::vector<WindowSample> out;
    for (std::size_t start = from; start + w <= series.length; start += w) {
        out.push_back({out.size(), start, w});
    }
    return out;
}

std::pair<double, double> loss_stats(const std::map<std::uint64_t, double>& losses) {
    double sum = 0.0, mx = 0.0;
    for (const auto& [id, l] : losses) {
        sum += l;
        mx = std::max(mx, l);
    }
    return {sum / static_cast<double>(losses.size()), mx};
}

}  // namespace

RunResult run(const TimeSeries& train, const RunConfig& cfg, const TimeSeries* test,
              const Tracking* tracking) {
    cfg.validate();
    train.validate();
    const auto t0 = std::chrono::steady_clock::now();

    const std::size_t limit = fit_limit(train, cfg);
    if (tracking) {
        require(tracking->ac_flags.size() == train.length,
                "tracking: AC flags must cover the training series");
    }
    if (test) {
        require(test->has_labels(), "evaluation needs a labeled test series");
        require(test->dims == train.dims, "test and train series differ in dimensionality");
    }

    Rng rng(cfg.seed);
    DetectorConfig dc{cfg.window, train.dims, cfg.bottleneck, cfg.hidden};
    Detector det(dc, rng);
    OptimizerState opt = OptimizerState::adam(det.net().num_params(), cfg.detector_lr);
    SampleSet set = initial_windows(train, cfg.window, limit);
    const auto val = validation_windows(train, limit, cfg.window);

    RunReport report;
    report.seed = cfg.seed;
    report.initial_set_size = set.size();
    auto proportions = [&]() -> std::optional<Proportions> {
        if (!tracking) return std::nullopt;
        return track_proportions(set, tracking->ac_flags, tracking->hs_by_start);
    };
    report.initial_proportions = proportions();

    std::optional<QAgent> agent;
    std::optional<ReplayMemory> memory;
    if (cfg.epochs > 0) {
        agent.emplace(state_feature_size(cfg, train.dims), cfg.agent, rng);
        memory.emplace(cfg.memory);
    }

    for (std::size_t i = 0; i < cfg.epochs; ++i) {
        EpochRecord rec;
        rec.index = i;
        rec.augment = true;
        const auto losses = train_epoch(det, train, set, opt, cfg.batch_size, rng);
        std::tie(rec.train_loss_mean, rec.train_loss_max) = loss_stats(losses);
        rec.val_loss = mean_loss(det, train, val);
        AugmentStats stats = augment_epoch(det, train, set, *agent, *memory, cfg, i == 0, rng);
        for (auto& row : stats.log) {
            row.epoch = i;
            report.iterations.push_back(row);
        }
        stats.log.clear();
        rec.augmentation = std::move(stats);
        rec.set_size = set.size();
        rec.proportions = proportions();
        report.epochs.push_back(std::move(rec));
    }

    double best = std::numeric_limits<double>::infinity();
    Vec best_params(det.net().params().begin(), det.net().params().end());
    std::size_t stale = 0;
    for (std::size_t j = 0; j < cfg.max_epochs; ++j) {
        EpochRecord rec;
        rec.index = cfg.epochs + j;
        const auto losses = train_epoch(det, train, set, opt, cfg.batch_size, rng);
        std::tie(rec.train_loss_mean, rec.train_loss_max) = loss_stats(losses);
        rec.val_loss = mean_loss(det, train, val);
        rec.set_size = set.size();
        rec.proportions = proportions();
        report.epochs.push_back(rec);
        ++report.final_epochs;
        if (rec.val_loss < best) {
            best = rec.val_loss;
            best_params.assign(det.net().params().begin(), det.net().params().end());
            stale = 0;
        } else if (++stale >= cfg.patience) {
            report.early_stopped = true;
            break;
        }
    }
    det.net().set_params(best_params);
    report.best_val_loss = best;

    if (test) {
        EvalResult ev = best_f1(anomaly_scores(det, *test), test->labels, true);
        ev.adjusted_scores.clear();
        report.evaluation = std::move(ev);
    }
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return RunResult{std::move(det), std::move(agent), std::move(set), std::move(report)};
}

RunResult baseline_run(const TimeSeries& train, const RunConfig& cfg, const TimeSeries* test,
                       const Tracking* tracking) {
    RunConfig orig = cfg;
    orig.epochs = 0;
    return run(train, orig, test, tracking);
}

}  // namespace plda
