#include "plda/evalgen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

namespace plda {

std::string_view to_string(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::spike: return "spike";
        case AnomalyKind::level_shift: return "level_shift";
        case AnomalyKind::freq_shift: return "freq_shift";
    }
    return "spike";
}

AnomalyKind anomaly_kind_from_string(std::string_view name) {
    if (name == "spike") return AnomalyKind::spike;
    if (name == "level_shift") return AnomalyKind::level_shift;
    if (name == "freq_shift") return AnomalyKind::freq_shift;
    throw InvalidArgument("unknown anomaly kind '" + std::string(name) + "'");
}

//==============================================================================
// Generation
//==============================================================================

namespace {

struct Interval {
    std::size_t start, length;
};

bool overlaps(const Interval& a, const Interval& b, std::size_t gap = 0) {
    return a.start < b.start + b.length + gap && b.start < a.start + a.length + gap;
}

void check_disjoint(std::vector<Interval> iv, std::size_t n, const char* what) {
    for (const auto& i : iv) {
        require(i.length >= 1 && i.start + i.length <= n,
                std::string(what) + ": segment [" + std::to_string(i.start) + ", " +
                    std::to_string(i.start + i.length) + ") out of bounds");
    }
    std::sort(iv.begin(), iv.end(), [](auto& a, auto& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < iv.size(); ++i) {
        require(!overlaps(iv[i - 1], iv[i]), std::string(what) + ": segments overlap");
    }
}

double base_value(const SyntheticSpec& spec, double t, std::size_t dim, double freq_scale = 1.0) {
    double v = 0.0;
    for (const auto& s : spec.base) {
        v += s.amplitude * std::sin(2.0 * std::numbers::pi * freq_scale * t / s.period + s.phase +
                                    0.7 * static_cast<double>(dim));
    }
    return v;
}

constexpr double kJitterPeriod = 6.0;

std::vector<std::uint8_t> apply_hard(Vec& values, std::size_t dims,
                                     std::span<const HardSegment> segs, std::size_t n, Rng& rng) {
    std::vector<std::uint8_t> mask(n, 0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (const auto& h : segs) {
        const double ph = phase(rng);
        for (std::size_t t = h.start; t < h.start + h.length; ++t) {
            mask[t] = 1;
            for (std::size_t d = 0; d < dims; ++d) {
                values[t * dims + d] +=
                    h.jitter * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) /
                                            kJitterPeriod + ph);
            }
        }
    }
    return mask;
}

}  // namespace

void SyntheticSpec::validate() const {
    require(train_length >= 1 && test_length >= 1 && dims >= 1,
            "synthetic spec: lengths and dims must be positive");
    require(noise >= 0.0, "synthetic spec: noise must be nonnegative");
    for (const auto& s : base) require(s.period > 0.0, "synthetic spec: sinusoid period must be positive");
    std::vector<Interval> test_iv;
    for (const auto& a : anomalies) test_iv.push_back({a.start, a.length});
    for (const auto& h : test_hard) test_iv.push_back({h.start, h.length});
    check_disjoint(test_iv, test_length, "test segments");
    std::vector<Interval> train_iv;
    for (const auto& h : train_hard) train_iv.push_back({h.start, h.length});
    check_disjoint(train_iv, train_length, "train hard segments");
}

GeneratedData generate(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, spec.noise > 0.0 ? spec.noise : 1.0);
    const double noise_scale = spec.noise > 0.0 ? 1.0 : 0.0;
    const std::size_t dims = spec.dims;

    auto make = [&](std::size_t n, double t0) {
        Vec v(n * dims);
        for (std::size_t t = 0; t < n; ++t) {
            for (std::size_t d = 0; d < dims; ++d) {
                v[t * dims + d] = base_value(spec, t0 + static_cast<double>(t), d) +
                                  noise_scale * noise(rng);
            }
        }
        return v;
    };

    GeneratedData out;
    Vec train = make(spec.train_length, 0.0);
    out.train_hard_mask = apply_hard(train, dims, spec.train_hard, spec.train_length, rng);

    const double test_t0 = static_cast<double>(spec.train_length);
    Vec test = make(spec.test_length, test_t0);
    out.test_hard_mask = apply_hard(test, dims, spec.test_hard, spec.test_length, rng);

    std::vector<std::uint8_t> labels(spec.test_length, 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& a : spec.anomalies) {
        for (std::size_t i = 0; i < a.length; ++i) {
            const std::size_t t = a.start + i;
            labels[t] = 1;
            for (std::size_t d = 0; d < dims; ++d) {
                double& x = test[t * dims + d];
                switch (a.kind) {
                    case AnomalyKind::spike:
                        if (i % 3 == 0) {
                            const double sign = (i / 3) % 2 == 0 ? 1.0 : -1.0;
                            x += sign * a.magnitude * (0.7 + 0.3 * unit(rng));
                        }
                        break;
                    case AnomalyKind::level_shift: x += a.magnitude; break;
                    case AnomalyKind::freq_shift: {
                        const double tt = test_t0 + static_cast<double>(t);
                        x += a.magnitude * (base_value(spec, tt, d, 4.0) - base_value(spec, tt, d));
                        break;
                    }
                }
            }
        }
    }

    out.train = TimeSeries("train", spec.train_length, dims, std::move(train));
    out.test = TimeSeries("test", spec.test_length, dims, std::move(test), std::move(labels));
    return out;
}

namespace {

std::vector<Interval> place_segments(std::size_t count, std::size_t min_len, std::size_t max_len,
                                     std::size_t n, std::size_t gap,
                                     std::vector<Interval>& occupied, Rng& rng) {
    std::vector<Interval> placed;
    std::uniform_int_distribution<std::size_t> len_dist(min_len, max_len);
    for (std::size_t c = 0; c < count; ++c) {
        const std::size_t len = len_dist(rng);
        if (len + 2 * gap >= n) break;
        std::uniform_int_distribution<std::size_t> start_dist(gap, n - len - gap);
        for (int attempt = 0; attempt < 2000; ++attempt) {
            Interval cand{start_dist(rng), len};
            bool ok = std::none_of(occupied.begin(), occupied.end(),
                                   [&](const Interval& o) { return overlaps(cand, o, gap); });
            if (ok) {
                occupied.push_back(cand);
                placed.push_back(cand);
                break;
            }
        }
    }
    return placed;
}

}  // namespace

SyntheticSpec default_benchmark_spec(const BenchmarkLayout& layout, std::uint64_t seed) {
    Rng rng(seed ^ 0x5eedbe11c4a11ull);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    SyntheticSpec spec;
    spec.train_length = layout.train_length;
    spec.test_length = layout.test_length;
    spec.dims = layout.dims;
    spec.base = {{50.0, 1.0, phase(rng)}, {20.0, 0.5, phase(rng)}};
    spec.noise = 0.05;

    std::vector<Interval> test_occupied;
    const auto anomalies =
        place_segments(layout.anomaly_segments, layout.anomaly_min_length,
                       layout.anomaly_max_length, layout.test_length, layout.gap, test_occupied, rng);
    const auto test_hard =
        place_segments(layout.test_hard_segments, layout.hard_min_length, layout.hard_max_length,
                       layout.test_length, layout.gap, test_occupied, rng);
    std::vector<Interval> train_occupied;
    const auto train_hard =
        place_segments(layout.train_hard_segments, layout.hard_min_length, layout.hard_max_length,
                       layout.train_length, layout.gap, train_occupied, rng);

    const AnomalyKind kinds[3] = {AnomalyKind::spike, AnomalyKind::level_shift,
                                  AnomalyKind::freq_shift};
    const double magnitudes[3] = {2.5, 1.5, 1.0};
    for (std::size_t i = 0; i < anomalies.size(); ++i) {
        spec.anomalies.push_back({anomalies[i].start, anomalies[i].length, kinds[i % 3],
                                  magnitudes[i % 3]});
    }
    for (const auto& h : test_hard) spec.test_hard.push_back({h.start, h.length, layout.hard_jitter});
    for (const auto& h : train_hard) spec.train_hard.push_back({h.start, h.length, layout.hard_jitter});
    return spec;
}

//==============================================================================
// Contamination
//==============================================================================

std::vector<PoolSegment> extract_anomaly_pool(const TimeSeries& labeled) {
    require(labeled.has_labels(), "extract_anomaly_pool: series has no labels");
    std::vector<PoolSegment> pool;
    std::size_t t = 0;
    while (t < labeled.length) {
        if (!labeled.labels[t]) {
            ++t;
            continue;
        }
        std::size_t end = t;
        while (end < labeled.length && labeled.labels[end]) ++end;
        PoolSegment seg;
        seg.length = end - t;
        auto src = labeled.window(t, seg.length);
        seg.values.assign(src.begin(), src.end());
        pool.push_back(std::move(seg));
        t = end;
    }
    return pool;
}

Contaminated inject_contamination(const TimeSeries& train, std::span<const PoolSegment> pool,
                                  double ratio, Rng& rng, std::span<const std::uint8_t> forbidden,
                                  std::size_t gap) {
    require(ratio >= 0.0 && ratio <= 0.5, "inject_contamination: ratio must lie in [0, 0.5]");
    require(forbidden.empty() || forbidden.size() == train.length,
            "inject_contamination: forbidden mask length does not match the series");
    Contaminated out{train, std::vector<std::uint8_t>(train.length, 0), 0.0};
    out.series.labels.clear();
    if (ratio == 0.0) return out;
    require(!pool.empty(), "inject_contamination: empty anomaly pool");

    const auto needed = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(train.length)));
    std::size_t available = 0;
    for (const auto& seg : pool) {
        require(seg.values.size() == seg.length * train.dims,
                "inject_contamination: pool segment has the wrong dimensionality");
        available += seg.length;
    }
    if (available < needed) {
        throw InvalidArgument("inject_contamination: anomaly pool holds " + std::to_string(available) +
                              " points but ratio " + std::to_string(ratio) + " needs " +
                              std::to_string(needed));
    }

    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::uint8_t> blocked(train.length, 0);
    for (std::size_t t = 0; t < forbidden.size(); ++t) blocked[t] = forbidden[t];
    std::size_t flagged = 0;
    for (std::size_t idx : order) {
        if (flagged >= needed) break;
        const PoolSegment& seg = pool[idx];
        if (seg.length > train.length) continue;
        std::uniform_int_distribution<std::size_t> start_dist(0, train.length - seg.length);
        bool placed = false;
        for (int attempt = 0; attempt < 5000 && !placed; ++attempt) {
            const std::size_t start = start_dist(rng);
            const std::size_t lo = start >= gap ? start - gap : 0;
            const std::size_t hi = std::min(train.length, start + seg.length + gap);
            bool free = true;
            for (std::size_t t = lo; t < hi && free; ++t) free = !blocked[t];
            if (!free) continue;
            std::copy(seg.values.begin(), seg.values.end(),
                      out.series.values.begin() + static_cast<std::ptrdiff_t>(start * train.dims));
            for (std::size_t t = start; t < start + seg.length; ++t) {
                out.ac_flags[t] = 1;
                blocked[t] = 1;
            }
            flagged += seg.length;
            placed = true;
        }
    }
    if (flagged < needed) {
        throw InvalidArgument("inject_contamination: could not place enough pool segments for ratio " +
                              std::to_string(ratio));
    }
    out.flagged_fraction = static_cast<double>(flagged) / static_cast<double>(train.length);
    return out;
}

ContaminatedBenchmark contaminated_benchmark(const SyntheticSpec& spec, double ratio,
                                             std::uint64_t seed, std::size_t gap) {
    ContaminatedBenchmark out;
    out.data = generate(spec, seed);
    out.ratio = ratio;
    const auto pool = extract_anomaly_pool(out.data.test);
    Rng rng(seed ^ 0xc0a7a111a7edull);
    out.train = inject_contamination(out.data.train, pool, ratio, rng, out.data.train_hard_mask, gap);
    return out;
}

//==============================================================================
// Sample labels
//==============================================================================

PointFlags::PointFlags(std::span<const std::uint8_t> flags) : prefix_(flags.size() + 1, 0) {
    for (std::size_t i = 0; i < flags.size(); ++i) prefix_[i + 1] = prefix_[i] + (flags[i] ? 1 : 0);
}

std::size_t PointFlags::count(std::size_t start, std::size_t w) const {
    require(start + w <= size(), "PointFlags: window out of range");
    return prefix_[start + w] - prefix_[start];
}

bool PointFlags::any(std::size_t start, std::size_t w) const { return count(start, w) > 0; }

double quantile(std::span<const double> values, double q) {
    require(!values.empty(), "quantile: no values");
    require(q >= 0.0 && q <= 1.0, "quantile: q must lie in [0, 1]");
    Vec sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<std::uint8_t> label_hard_samples(std::span<const std::size_t> starts,
                                             std::span<const double> losses,
                                             std::span<const std::uint8_t> ac_flags,
                                             std::size_t w, double q) {
    require(starts.size() == losses.size(),
            "label_hard_samples: " + std::to_string(starts.size()) + " starts but " +
                std::to_string(losses.size()) + " losses");
    if (losses.empty()) return {};
    const PointFlags ac(ac_flags);
    const double threshold = quantile(losses, q);
    std::vector<std::uint8_t> hs(starts.size(), 0);
    for (std::size_t i = 0; i < starts.size(); ++i) {
        require(starts[i] + w <= ac.size(), "label_hard_samples: window exceeds the AC flag vector");
        hs[i] = (!ac.any(starts[i], w) && losses[i] > threshold) ? 1 : 0;
    }
    return hs;
}

Proportions track_proportions(const SampleSet& set, std::span<const std::uint8_t> ac_flags,
                              std::span<const std::uint8_t> hs_by_start) {
    if (set.empty()) return {};
    const PointFlags ac(ac_flags);
    std::size_t n_ac = 0, n_hs = 0;
    for (const auto& s : set.samples()) {
        if (ac.any(s.start, s.w)) {
            ++n_ac;
        } else if (s.start < hs_by_start.size() && hs_by_start[s.start]) {
            ++n_hs;
        }
    }
    const double n = static_cast<double>(set.size());
    return {static_cast<double>(n_ac) / n, static_cast<double>(n_hs) / n};
}

//==============================================================================
// Evaluation
//==============================================================================

Vec point_adjust(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    require(scores.size() == labels.size(),
            "point_adjust: " + std::to_string(scores.size()) + " scores but " +
                std::to_string(labels.size()) + " labels");
    Vec out(scores.begin(), scores.end());
    std::size_t t = 0;
    while (t < labels.size()) {
        if (!labels[t]) {
            ++t;
            continue;
        }
        std::size_t end = t;
        double mx = scores[t];
        while (end < labels.size() && labels[end]) mx = std::max(mx, scores[end++]);
        for (std::size_t i = t; i < end; ++i) out[i] = mx;
        t = end;
    }
    return out;
}

namespace {

double f1_from_counts(std::size_t tp, std::size_t predicted, std::size_t positives) {
    const std::size_t fp = predicted - tp;
    const std::size_t fn = positives - tp;
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

std::size_t count_positives(std::span<const std::uint8_t> labels) {
    return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](auto l) { return l != 0; }));
}

}  // namespace

double f1_at(std::span<const double> scores, std::span<const std::uint8_t> labels,
             double threshold) {
    require(scores.size() == labels.size(), "f1_at: scores and labels differ in length");
    std::size_t tp = 0, predicted = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] >= threshold) {
            ++predicted;
            if (labels[i]) ++tp;
        }
    }
    return f1_from_counts(tp, predicted, count_positives(labels));
}

EvalResult best_f1(std::span<const double> scores, std::span<const std::uint8_t> labels,
                   bool adjust) {
    require(scores.size() == labels.size(),
            "best_f1: " + std::to_string(scores.size()) + " scores but " +
                std::to_string(labels.size()) + " labels");
    const std::size_t positives = count_positives(labels);
    if (positives == 0 || positives == labels.size()) {
        throw InvalidArgument("best_f1: labels need at least one positive and one negative");
    }
    EvalResult res;
    res.adjusted_scores = adjust ? point_adjust(scores, labels) : Vec(scores.begin(), scores.end());
    const Vec& s = res.adjusted_scores;

    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });

    // Walk thresholds from high to low; >= keeps the lowest threshold on ties.
    std::size_t tp = 0, predicted = 0;
    double best = -1.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double thr = s[order[i]];
        while (i < order.size() && s[order[i]] == thr) {
            ++predicted;
            if (labels[order[i]]) ++tp;
            ++i;
        }
        const double f1 = f1_from_counts(tp, predicted, positives);
        if (f1 >= best) {
            best = f1;
            res.f1 = f1;
            res.threshold = thr;
            res.precision = static_cast<double>(tp) / static_cast<double>(predicted);
            res.recall = static_cast<double>(tp) / static_cast<double>(positives);
        }
    }
    return res;
}

double auc(std::span<const double> positives, std::span<const double> negatives) {
    require(!positives.empty() && !negatives.empty(), "auc: both classes need samples");
    double wins = 0.0;
    for (double p : positives) {
        for (double n : negatives) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    }
    return wins / (static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

namespace {

Vec ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    Vec r(x.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "spearman: need two equal-length samples");
    const Vec rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

//==============================================================================
// Spectra
//==============================================================================

Spectrum spectrum(std::span<const double> signal) {
    const std::size_t n = signal.size();
    require(n >= 2, "spectrum: need at least two samples");
    Spectrum out;
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t k = 0; k <= n / 2; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) /
                               static_cast<double>(n);
            acc += signal[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        const bool unpaired = (k == 0) || (2 * k == n);
        const double scale = unpaired ? inv_sqrt_n : std::sqrt(2.0) * inv_sqrt_n;
        out.bins.push_back(k);
        out.amplitudes.push_back(scale * std::abs(acc));
    }
    return out;
}

Spectrum spectrum(const TimeSeries& series, const WindowSample& s) {
    auto win = series.window(s.start, s.w);
    Vec avg(s.w, 0.0);
    for (std::size_t t = 0; t < s.w; ++t) {
        for (std::size_t d = 0; d < series.dims; ++d) avg[t] += win[t * series.dims + d];
        avg[t] /= static_cast<double>(series.dims);
    }
    return spectrum(avg);
}

Vec decay_grid(std::size_t n) {
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n);
    return x;
}

std::vector<FrequencyGradient> frequency_gradient_decay(const Network& net,
                                                        std::span<const double> signal,
                                                        std::span<const std::size_t> params) {
    const auto& sizes = net.layer_sizes();
    if (sizes.size() != 3 || sizes[0] != 1 || sizes[2] != 1 ||
        net.activations()[0] != Activation::tanh || net.activations()[1] != Activation::identity) {
        throw InvalidArgument(
            "frequency_gradient_decay: expected a 1-H-1 network with one tanh hidden layer");
    }
    const std::size_t n = signal.size();
    require(n >= 4, "frequency_gradient_decay: signal too short");
    const std::size_t p = net.num_params();
    std::vector<std::size_t> chosen(params.begin(), params.end());
    if (chosen.empty()) {
        chosen.resize(p);
        std::iota(chosen.begin(), chosen.end(), 0);
    }
    for (std::size_t idx : chosen) require(idx < p, "frequency_gradient_decay: parameter index out of range");

    const Vec x = decay_grid(n);
    Vec residual(n);
    std::vector<Vec> dout(n, Vec(p, 0.0));  // d D(x_n) / d theta
    ForwardTrace trace;
    const double one = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        forward(net, std::span<const double>(&x[i], 1), trace);
        residual[i] = trace.output()[0] - signal[i];
        accumulate_backward(net, trace, std::span<const double>(&one, 1), 1.0, dout[i]);
    }

    std::vector<FrequencyGradient> out;
    std::vector<std::complex<double>> dj(chosen.size());
    for (std::size_t f = 1; f <= n / 2; ++f) {
        std::complex<double> j{0.0, 0.0};
        std::fill(dj.begin(), dj.end(), std::complex<double>{0.0, 0.0});
        for (std::size_t i = 0; i < n; ++i) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>((f * i) % n) /
                               static_cast<double>(n);
            const std::complex<double> tw(std::cos(ang), std::sin(ang));
            j += residual[i] * tw;
            for (std::size_t c = 0; c < chosen.size(); ++c) dj[c] += dout[i][chosen[c]] * tw;
        }
        double sq = 0.0;
        for (std::size_t c = 0; c < chosen.size(); ++c) {
            const double g = 2.0 * std::real(std::conj(j) * dj[c]);
            sq += g * g;
        }
        out.push_back({f, std::abs(j), std::sqrt(sq)});
    }
    return out;
}

}  // namespace plda
