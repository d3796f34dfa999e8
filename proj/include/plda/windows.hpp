#pragma once
// Time series storage, the window-sample registry and the adaptive
// sliding-window action semantics.

#include <cstdint>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plda/common.hpp"

namespace plda {

// N x D observations, row-major, with optional 0/1 point labels.
struct TimeSeries {
    std::string name;
    std::size_t length = 0;
    std::size_t dims = 0;
    Vec values;
    std::vector<std::uint8_t> labels;  // empty when unlabeled

    TimeSeries() = default;
    TimeSeries(std::string name, std::size_t length, std::size_t dims, Vec values,
               std::vector<std::uint8_t> labels = {});

    bool has_labels() const { return !labels.empty(); }
    std::span<const double> row(std::size_t t) const { return {values.data() + t * dims, dims}; }
    // Flattened contents of [start, start + w); contiguous because storage is row-major.
    std::span<const double> window(std::size_t start, std::size_t w) const;
    void validate() const;
};

struct WindowSample {
    std::uint64_t id = 0;
    std::size_t start = 0;
    std::size_t w = 0;

    std::size_t end() const { return start + w; }
    friend bool operator==(const WindowSample&, const WindowSample&) = default;
};

enum class Action : std::uint8_t { expand = 0, preserve = 1, remove = 2 };

inline constexpr std::size_t kNumActions = 3;

std::string_view to_string(Action a);
Action action_from_index(std::size_t index);

// The training set S: window samples of a shared length with unique start
// offsets, all contained in the usable prefix [0, limit) of one series.
class SampleSet {
public:
    SampleSet(std::size_t w, std::size_t limit);

    std::size_t window() const { return w_; }
    std::size_t limit() const { return limit_; }
    std::size_t max_start() const { return limit_ - w_; }
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }

    // Ordered by start offset.
    std::span<const WindowSample> samples() const { return samples_; }
    const WindowSample& operator[](std::size_t i) const { return samples_[i]; }

    const WindowSample* find_start(std::size_t start) const;
    bool contains(const WindowSample& s) const;

    // Inserts a fresh sample at start; nullopt when out of bounds or taken.
    std::optional<WindowSample> insert(std::size_t start);
    bool erase(const WindowSample& s);

    std::vector<std::size_t> starts() const;

private:
    std::size_t w_;
    std::size_t limit_;
    std::vector<WindowSample> samples_;
    std::uint64_t next_id_ = 0;
};

// Non-overlapping windows at 0, w, 2w, ... inside [0, limit); limit defaults
// to the series length. The trailing partial window is dropped.
SampleSet initial_windows(const TimeSeries& series, std::size_t w,
                          std::optional<std::size_t> limit = std::nullopt);

struct CoprimeSplit {
    std::size_t w1;
    std::size_t w2;
};

// w1 + w2 = w with gcd(w1, w2) = 1 and w1 < w2, closest to w / 2.
CoprimeSplit coprime_split(std::size_t w);

struct ActionOutcome {
    std::vector<WindowSample> added;
    bool removed = false;
    bool guard_triggered = false;  // delete refused because s was the last sample
};

// expand inserts the windows at s.start - w1, + w2, - w2, + w1 (skipping
// out-of-range and already-present starts); preserve is a no-op; remove
// erases s unless it is the only sample left.
ActionOutcome apply_action(SampleSet& set, const WindowSample& s, Action a);

// Offsets reachable from 0 by repeated steps in {-w1, +w2, -w2, +w1} without
// leaving [-bound, bound].
std::set<long> reachable_offsets(std::size_t w, long bound);

// Euclidean distance between flattened window contents.
double window_distance(const TimeSeries& series, const WindowSample& a, const WindowSample& b);

// State transition G. With probability p_explore a uniformly random member
// (G_r); otherwise the member nearest to `current` after expand/remove and
// the farthest after preserve (G_a). `current` is excluded when another
// candidate exists; ties go to the lower start.
WindowSample transition(const SampleSet& set, const TimeSeries& series,
                        const WindowSample& current, Action a, double p_explore, Rng& rng);

// CSV rows "id,start,w".
void write_samples_csv(std::ostream& os, const SampleSet& set);

}  // namespace plda
