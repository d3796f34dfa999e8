#pragma once
// The outer training loop: alternate detector epochs with augmentation
// epochs, then train the detector on the final set until early stop.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plda/agent.hpp"
#include "plda/behavior.hpp"
#include "plda/detector.hpp"
#include "plda/evalgen.hpp"

namespace plda {

struct RunConfig {
    // Detector. The feature dimension is taken from the series.
    std::size_t window = 30;
    std::size_t bottleneck = 8;
    std::vector<std::size_t> hidden{32};
    double detector_lr = 1e-3;
    std::size_t batch_size = 32;

    // Augmentation.
    std::size_t epochs = 10;  // e
    double alpha = 0.5;
    std::size_t key_params = 1000;  // clamped to P
    double p_explore = 0.2;
    std::optional<std::size_t> n_iters;  // per epoch; |S_i| when unset
    HessianMode hessian = DiagonalHessian{};
    std::size_t curvature_batch = 512;  // windows used to estimate H
    RewardScale reward_scale = RewardScale::Linear;
    bool state_rewards = false;          // append (r_l, r_p) to the state features

    // Agent.
    QAgentConfig agent;
    std::size_t memory = 2048;
    std::size_t minibatch = 64;
    std::size_t warm_start_steps = 256;

    // Final phase.
    std::size_t patience = 5;
    std::size_t max_epochs = 50;
    double validation_fraction = 0.2;

    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};  // used by paired comparisons

    void validate() const;
};

// Ground truth used only for reporting, never by the algorithm.
struct Tracking {
    std::vector<std::uint8_t> ac_flags;     // per point
    std::vector<std::uint8_t> hs_by_start;  // per window start
};

struct ActionCounts {
    std::size_t expand = 0;
    std::size_t preserve = 0;
    std::size_t remove = 0;
};

struct IterationLog {
    std::size_t epoch = 0;
    std::size_t iteration = 0;
    std::size_t start = 0;
    Action action = Action::preserve;
    double reward = 0.0;
    double td_loss = 0.0;  // NaN when no update ran
};

struct AugmentStats {
    ActionCounts actions;
    std::size_t guard_events = 0;
    std::size_t td_updates = 0;
    double mean_td_loss = 0.0;  // NaN when no update ran
    std::size_t key_params = 0;
    std::vector<IterationLog> log;
};

struct EpochRecord {
    std::size_t index = 0;
    bool augment = false;  // false for the final training phase
    double train_loss_mean = 0.0;
    double train_loss_max = 0.0;
    double val_loss = 0.0;
    std::size_t set_size = 0;  // after this epoch's augmentation
    std::optional<Proportions> proportions;
    std::optional<AugmentStats> augmentation;  // log omitted
};

struct RunReport {
    std::uint64_t seed = 0;
    std::size_t initial_set_size = 0;
    std::optional<Proportions> initial_proportions;
    std::vector<EpochRecord> epochs;
    double best_val_loss = 0.0;
    std::size_t final_epochs = 0;
    bool early_stopped = false;
    std::optional<EvalResult> evaluation;  // adjusted_scores cleared
    double wall_clock_seconds = 0.0;
    std::vector<IterationLog> iterations;
};

// Rewards and states over one detector snapshot.
class BehaviorEnv : public AugmentEnv {
public:
    // Computes loss and parameter behavior for every member of `set` and
    // selects the key parameters from them.
    BehaviorEnv(const Detector& det, const TimeSeries& series, const SampleSet& set,
                const RunConfig& cfg, Rng& rng);

    StateFeatures features(const WindowSample& s) override;
    double reward(const WindowSample& s, Action a) override;
    WindowSample next_state(const SampleSet& set, const WindowSample& s, Action a,
                            Rng& rng) override;

    std::span<const BehaviorRecord> records() const { return records_; }
    const KeyParams& keys() const { return keys_; }
    // Normalized (r_l, r_p); samples outside the initial population are
    // scored on demand and normalized with the population's range.
    std::pair<double, double> rewards_of(const WindowSample& s);

private:
    const Detector& det_;
    const TimeSeries& series_;
    const RunConfig& cfg_;
    Curvature curvature_;
    KeyParams keys_;
    Vec center_;
    double l_lo_ = 0.0, l_hi_ = 0.0, p_lo_ = 0.0, p_hi_ = 0.0;
    std::vector<BehaviorRecord> records_;
    std::map<std::size_t, std::pair<double, double>> by_start_;
};

std::size_t state_feature_size(const RunConfig& cfg, std::size_t dims);

// Replaces the agent's decision when set (the agent is then not trained).
using FrozenPolicy = std::function<Action(const WindowSample&)>;

// One augmentation epoch over `set`. Warm start runs when first_epoch.
AugmentStats augment_epoch(const Detector& det, const TimeSeries& series, SampleSet& set,
                           QAgent& agent, ReplayMemory& memory, const RunConfig& cfg,
                           bool first_epoch, Rng& rng, const FrozenPolicy* policy = nullptr);

struct RunResult {
    Detector detector;
    std::optional<QAgent> agent;
    SampleSet final_set;
    RunReport report;
};

// Fit region is the prefix before the validation suffix.
std::size_t fit_limit(const TimeSeries& series, const RunConfig& cfg);

RunResult run(const TimeSeries& train, const RunConfig& cfg, const TimeSeries* test = nullptr,
              const Tracking* tracking = nullptr);

// run() with no augmentation epochs.
RunResult baseline_run(const TimeSeries& train, const RunConfig& cfg,
                       const TimeSeries* test = nullptr, const Tracking* tracking = nullptr);

}  // namespace plda
