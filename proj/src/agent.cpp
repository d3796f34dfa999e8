#include "plda/agent.hpp"

#include <algorithm>
#include <cmath>

namespace plda {

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    require(capacity >= 1, "replay memory capacity must be positive");
    items_.reserve(capacity);
}

void ReplayMemory::push(Transition t) {
    require(t.reward >= 0.0 && t.reward <= 1.0, "transition reward must lie in [0, 1]");
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
        return;
    }
    items_[cursor_] = std::move(t);
    cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayMemory::operator[](std::size_t i) const {
    require(i < items_.size(), "replay memory index out of range");
    return items_[(cursor_ + i) % items_.size()];
}

std::vector<Transition> ReplayMemory::sample(std::size_t n, Rng& rng) const {
    require(!items_.empty(), "cannot sample from an empty replay memory");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(items_[pick(rng)]);
    return out;
}

void QAgentConfig::validate() const {
    require(gamma >= 0.0 && gamma <= 1.0, "agent gamma must lie in [0, 1]");
    require(sync_period >= 1, "agent sync period must be positive");
    require(lr > 0.0, "agent learning rate must be positive");
    for (std::size_t h : hidden) require(h >= 1, "agent hidden sizes must be positive");
}

QValues q_values(const Network& net, std::span<const double> state) {
    require(net.output_size() == kNumActions, "Q network must have one output per action");
    const Vec out = forward(net, state);
    QValues q{};
    for (std::size_t a = 0; a < kNumActions; ++a) {
        q[a] = out[a];
        if (!std::isfinite(q[a])) throw NumericError("Q network produced a non-finite value");
    }
    return q;
}

Action select_action(const QValues& q) {
    std::size_t best = 0;
    for (std::size_t a = 0; a < kNumActions; ++a) {
        if (!std::isfinite(q[a])) throw InvalidArgument("select_action: non-finite Q value");
        if (q[a] > q[best]) best = a;
    }
    return action_from_index(best);
}

namespace {

Network make_qnet(std::size_t features, const QAgentConfig& cfg, Rng& rng) {
    require(features >= 1, "agent feature size must be positive");
    std::vector<std::size_t> sizes{features};
    for (std::size_t h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(kNumActions);
    std::vector<Activation> acts(sizes.size() - 1, Activation::relu);
    acts.back() = Activation::identity;
    return Network::random(std::move(sizes), std::move(acts), rng);
}

}  // namespace

QAgent::QAgent(std::size_t feature_size, QAgentConfig config, Rng& rng)
    : QAgent(make_qnet(feature_size, config, rng), config) {}

QAgent::QAgent(Network online, QAgentConfig config)
    : config_(std::move(config)), online_(std::move(online)) {
    config_.validate();
    require(online_.output_size() == kNumActions, "Q network must have one output per action");
    target_ = online_;
    opt_ = OptimizerState::adam(online_.num_params(), config_.lr);
}

double QAgent::td_target(const Transition& t) const {
    const QValues next = plda::q_values(target_, t.next_state);
    double boot;
    if (config_.double_dqn) {
        const Action a = select_action(plda::q_values(online_, t.next_state));
        boot = next[static_cast<std::size_t>(a)];
    } else {
        boot = *std::max_element(next.begin(), next.end());
    }
    if (config_.clip_bootstrap && config_.gamma < 1.0) {
        boot = std::clamp(boot, 0.0, 1.0 / (1.0 - config_.gamma));
    }
    return t.reward + config_.gamma * boot;
}

double QAgent::td_update(std::span<const Transition> minibatch) {
    require(!minibatch.empty(), "td_update: empty minibatch");
    const double inv = 1.0 / static_cast<double>(minibatch.size());
    Vec grad(online_.num_params(), 0.0);
    ForwardTrace trace;
    Vec og(kNumActions);
    double loss = 0.0;
    for (const Transition& t : minibatch) {
        const double y = td_target(t);
        forward(online_, t.state, trace);
        const std::size_t a = static_cast<std::size_t>(t.action);
        const double err = trace.output()[a] - y;
        loss += inv * err * err;
        std::fill(og.begin(), og.end(), 0.0);
        og[a] = 2.0 * err;
        accumulate_backward(online_, trace, og, inv, grad);
    }
    optimizer_step(opt_, online_, grad);
    ++updates_;
    if (updates_ % config_.sync_period == 0) sync_target();
    return loss;
}

void QAgent::sync_target() { target_.set_params(online_.params()); }

void warm_start(AugmentEnv& env, const SampleSet& set, ReplayMemory& memory, std::size_t steps,
                Rng& rng) {
    require(!set.empty(), "warm_start: empty sample set");
    const auto samples = set.samples();
    std::uniform_int_distribution<std::size_t> pick_state(0, samples.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_action(0, kNumActions - 1);
    for (std::size_t i = 0; i < steps; ++i) {
        const WindowSample s = samples[pick_state(rng)];
        const Action a = action_from_index(pick_action(rng));
        const double r = env.reward(s, a);
        const WindowSample next = env.next_state(set, s, a, rng);
        memory.push({env.features(s), a, r, env.features(next)});
    }
}

}  // namespace plda
