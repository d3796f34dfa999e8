#include "plda/windows.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "plda/kernels.hpp"

namespace plda {

TimeSeries::TimeSeries(std::string name_, std::size_t length_, std::size_t dims_, Vec values_,
                       std::vector<std::uint8_t> labels_)
    : name(std::move(name_)),
      length(length_),
      dims(dims_),
      values(std::move(values_)),
      labels(std::move(labels_)) {
    validate();
}

std::span<const double> TimeSeries::window(std::size_t start, std::size_t w) const {
    if (w == 0 || start + w > length) {
        throw InvalidArgument("window [" + std::to_string(start) + ", " +
                              std::to_string(start + w) + ") out of bounds for series of length " +
                              std::to_string(length));
    }
    return {values.data() + start * dims, w * dims};
}

void TimeSeries::validate() const {
    require(length >= 1 && dims >= 1, "time series needs N >= 1 and D >= 1");
    require(values.size() == length * dims,
            "time series values: expected " + std::to_string(length * dims) + " entries, got " +
                std::to_string(values.size()));
    require(labels.empty() || labels.size() == length,
            "time series labels: expected " + std::to_string(length) + " entries, got " +
                std::to_string(labels.size()));
}

std::string_view to_string(Action a) {
    switch (a) {
        case Action::expand: return "expand";
        case Action::preserve: return "preserve";
        case Action::remove: return "delete";
    }
    return "preserve";
}

Action action_from_index(std::size_t index) {
    require(index < kNumActions, "action index out of range");
    return static_cast<Action>(index);
}

//==============================================================================
// SampleSet
//==============================================================================

SampleSet::SampleSet(std::size_t w, std::size_t limit) : w_(w), limit_(limit) {
    require(w >= 1, "sample set window length must be positive");
    require(limit >= w, "sample set limit " + std::to_string(limit) +
                            " is shorter than the window length " + std::to_string(w));
}

namespace {
auto start_less = [](const WindowSample& s, std::size_t start) { return s.start < start; };
}

const WindowSample* SampleSet::find_start(std::size_t start) const {
    auto it = std::lower_bound(samples_.begin(), samples_.end(), start, start_less);
    return (it != samples_.end() && it->start == start) ? &*it : nullptr;
}

bool SampleSet::contains(const WindowSample& s) const {
    const WindowSample* found = find_start(s.start);
    return found && found->id == s.id;
}

std::optional<WindowSample> SampleSet::insert(std::size_t start) {
    if (start > max_start()) return std::nullopt;
    auto it = std::lower_bound(samples_.begin(), samples_.end(), start, start_less);
    if (it != samples_.end() && it->start == start) return std::nullopt;
    WindowSample s{next_id_++, start, w_};
    samples_.insert(it, s);
    return s;
}

bool SampleSet::erase(const WindowSample& s) {
    auto it = std::lower_bound(samples_.begin(), samples_.end(), s.start, start_less);
    if (it == samples_.end() || it->start != s.start || it->id != s.id) return false;
    samples_.erase(it);
    return true;
}

std::vector<std::size_t> SampleSet::starts() const {
    std::vector<std::size_t> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.start);
    return out;
}

SampleSet initial_windows(const TimeSeries& series, std::size_t w,
                          std::optional<std::size_t> limit) {
    const std::size_t n = limit.value_or(series.length);
    require(n <= series.length, "initial_windows: limit exceeds the series length");
    if (w == 0 || n < w) {
        throw InvalidArgument("initial_windows: series length " + std::to_string(n) +
                              " is shorter than the window length " + std::to_string(w));
    }
    SampleSet set(w, n);
    for (std::size_t start = 0; start + w <= n; start += w) set.insert(start);
    return set;
}

//==============================================================================
// Actions
//==============================================================================

CoprimeSplit coprime_split(std::size_t w) {
    require(w >= 3, "coprime_split: window length must be at least 3, got " + std::to_string(w));
    if (w % 2 == 1) return {(w - 1) / 2, (w + 1) / 2};
    for (std::size_t w1 = w / 2; w1 >= 1; --w1) {
        const std::size_t w2 = w - w1;
        if (w1 < w2 && std::gcd(w1, w2) == 1) return {w1, w2};
    }
    // w1 = 1 always qualifies for w >= 3; unreachable.
    return {1, w - 1};
}

ActionOutcome apply_action(SampleSet& set, const WindowSample& s, Action a) {
    if (!set.contains(s)) {
        throw InvalidArgument("apply_action: sample id " + std::to_string(s.id) + " at start " +
                              std::to_string(s.start) + " is not in the set");
    }
    ActionOutcome out;
    switch (a) {
        case Action::preserve: break;
        case Action::remove:
            if (set.size() <= 1) {
                out.guard_triggered = true;
            } else {
                out.removed = set.erase(s);
            }
            break;
        case Action::expand: {
            const auto [w1, w2] = coprime_split(set.window());
            const long base = static_cast<long>(s.start);
            const long offsets[4] = {-static_cast<long>(w1), static_cast<long>(w2),
                                     -static_cast<long>(w2), static_cast<long>(w1)};
            for (long off : offsets) {
                const long target = base + off;
                if (target < 0) continue;
                if (auto added = set.insert(static_cast<std::size_t>(target))) {
                    out.added.push_back(*added);
                }
            }
            break;
        }
    }
    return out;
}

std::set<long> reachable_offsets(std::size_t w, long bound) {
    const auto [w1, w2] = coprime_split(w);
    const long steps[4] = {-static_cast<long>(w1), static_cast<long>(w2),
                           -static_cast<long>(w2), static_cast<long>(w1)};
    std::set<long> seen{0};
    std::deque<long> queue{0};
    while (!queue.empty()) {
        const long cur = queue.front();
        queue.pop_front();
        for (long st : steps) {
            const long next = cur + st;
            if (next < -bound || next > bound) continue;
            if (seen.insert(next).second) queue.push_back(next);
        }
    }
    return seen;
}

//==============================================================================
// Distances and state transition
//==============================================================================

double window_distance(const TimeSeries& series, const WindowSample& a, const WindowSample& b) {
    if (a.w != b.w) {
        throw InvalidArgument("window_distance: window lengths differ (" + std::to_string(a.w) +
                              " vs " + std::to_string(b.w) + ")");
    }
    return std::sqrt(kernels::sq_dist(series.window(a.start, a.w), series.window(b.start, b.w)));
}

WindowSample transition(const SampleSet& set, const TimeSeries& series,
                        const WindowSample& current, Action a, double p_explore, Rng& rng) {
    require(!set.empty(), "transition: empty sample set");
    require(p_explore >= 0.0 && p_explore <= 1.0, "transition: p_explore must lie in [0, 1]");
    const auto samples = set.samples();
    if (samples.size() == 1) return samples.front();

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < p_explore) {
        std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
        return samples[pick(rng)];
    }

    const bool farthest = (a == Action::preserve);
    const auto ref = series.window(current.start, current.w);
    const WindowSample* best = nullptr;
    double best_d = farthest ? -1.0 : std::numeric_limits<double>::infinity();
    for (const auto& cand : samples) {
        if (cand.start == current.start) continue;
        // Squared distance preserves the ordering.
        const double d = kernels::sq_dist(ref, series.window(cand.start, cand.w));
        const bool better = farthest ? d > best_d : d < best_d;
        if (better) {
            best = &cand;
            best_d = d;
        }
    }
    return best ? *best : samples.front();
}

void write_samples_csv(std::ostream& os, const SampleSet& set) {
    os << "id,start,w\n";
    for (const auto& s : set.samples()) os << s.id << ',' << s.start << ',' << s.w << '\n';
}

}  // namespace plda
