#pragma once
// Value-learning augmentation agent: online/target Q networks, replay memory,
// temporal-difference updates and warm start.
//
// Naming: the "online" network is trained every update and drives action
// selection; the "target" network is a stale copy refreshed every
// sync_period updates and only used to bootstrap TD targets.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "plda/nncore.hpp"
#include "plda/windows.hpp"

namespace plda {

using StateFeatures = Vec;
using QValues = std::array<double, kNumActions>;

struct Transition {
    StateFeatures state;
    Action action = Action::preserve;
    double reward = 0.0;  // in [0, 1]
    StateFeatures next_state;
};

class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity);

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return items_.size(); }
    bool full() const { return items_.size() == capacity_; }

    // FIFO overwrite once full.
    void push(Transition t);

    // i = 0 is the oldest stored transition.
    const Transition& operator[](std::size_t i) const;

    // Uniform with replacement.
    std::vector<Transition> sample(std::size_t n, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t cursor_ = 0;  // next slot to overwrite once full
    std::vector<Transition> items_;
};

struct QAgentConfig {
    std::vector<std::size_t> hidden{64, 64};
    double gamma = 0.9;
    std::size_t sync_period = 10;
    double lr = 1e-3;
    // Evaluate the target net at the online net's argmax instead of taking
    // the target net's own max.
    bool double_dqn = false;
    // Clamp the bootstrapped value to [0, 1 / (1 - gamma)].
    bool clip_bootstrap = true;

    void validate() const;
};

QValues q_values(const Network& net, std::span<const double> state);

// argmax; ties resolved toward expand < preserve < delete.
Action select_action(const QValues& q);

class QAgent {
public:
    QAgent(std::size_t feature_size, QAgentConfig config, Rng& rng);
    QAgent(Network online, QAgentConfig config);

    const QAgentConfig& config() const { return config_; }
    std::size_t feature_size() const { return online_.input_size(); }
    const Network& online() const { return online_; }
    const Network& target() const { return target_; }
    Network& online() { return online_; }
    std::uint64_t updates() const { return updates_; }

    QValues q_values(std::span<const double> state) const { return plda::q_values(online_, state); }

    // TD target r + gamma * max_a' Q_target(s', a') (target treated as a
    // constant). Takes one optimizer step on the online net and returns the
    // mean squared TD error measured before the step. Syncs every
    // sync_period updates.
    double td_update(std::span<const Transition> minibatch);

    // Bootstrapped target for one transition, as used by td_update.
    double td_target(const Transition& t) const;

    // target <- online, bit-exact.
    void sync_target();

private:
    QAgentConfig config_;
    Network online_;
    Network target_;
    OptimizerState opt_;
    std::uint64_t updates_ = 0;
};

// What the agent needs from the augmentation environment.
class AugmentEnv {
public:
    virtual ~AugmentEnv() = default;
    virtual StateFeatures features(const WindowSample& s) = 0;
    virtual double reward(const WindowSample& s, Action a) = 0;
    virtual WindowSample next_state(const SampleSet& set, const WindowSample& s, Action a,
                                    Rng& rng) = 0;
};

// Fills memory with `steps` transitions from uniformly random states and
// actions. The set itself is not modified.
void warm_start(AugmentEnv& env, const SampleSet& set, ReplayMemory& memory, std::size_t steps,
                Rng& rng);

}  // namespace plda
