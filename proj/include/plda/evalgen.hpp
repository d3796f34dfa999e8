#pragma once
// Synthetic contaminated benchmarks, contamination injection, AC/HS labeling,
// point-adjusted best-F1 evaluation, proportion tracking and the per-frequency
// gradient harness.

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "plda/nncore.hpp"
#include "plda/windows.hpp"

namespace plda {

//==============================================================================
// Generation
//==============================================================================

enum class AnomalyKind { spike, level_shift, freq_shift };

std::string_view to_string(AnomalyKind k);
AnomalyKind anomaly_kind_from_string(std::string_view name);

struct Sinusoid {
    double period = 50.0;  // in time steps
    double amplitude = 1.0;
    double phase = 0.0;
};

struct AnomalySegment {
    std::size_t start = 0;
    std::size_t length = 0;
    AnomalyKind kind = AnomalyKind::spike;
    double magnitude = 2.0;
};

// A rare but normal regime: the base signal plus a fast oscillation of the
// given amplitude.
struct HardSegment {
    std::size_t start = 0;
    std::size_t length = 0;
    double jitter = 0.3;
};

struct SyntheticSpec {
    std::size_t train_length = 6000;
    std::size_t test_length = 4000;
    std::size_t dims = 1;
    std::vector<Sinusoid> base;
    double noise = 0.05;
    std::vector<AnomalySegment> anomalies;  // test coordinates
    std::vector<HardSegment> train_hard;    // train coordinates
    std::vector<HardSegment> test_hard;     // test coordinates

    void validate() const;
};

struct GeneratedData {
    TimeSeries train;  // clean, unlabeled
    TimeSeries test;   // labeled
    // 1 on points inside a hard segment.
    std::vector<std::uint8_t> train_hard_mask;
    std::vector<std::uint8_t> test_hard_mask;
};

GeneratedData generate(const SyntheticSpec& spec, std::uint64_t seed);

// Randomized layout used by the CLI defaults and the experiment harness.
struct BenchmarkLayout {
    std::size_t train_length = 6000;
    std::size_t test_length = 4000;
    std::size_t dims = 1;
    std::size_t anomaly_segments = 24;
    std::size_t anomaly_min_length = 20;
    std::size_t anomaly_max_length = 50;
    std::size_t train_hard_segments = 8;
    std::size_t test_hard_segments = 5;
    std::size_t hard_min_length = 60;
    std::size_t hard_max_length = 120;
    double hard_jitter = 0.35;
    std::size_t gap = 30;  // minimum spacing between segments
};

SyntheticSpec default_benchmark_spec(const BenchmarkLayout& layout, std::uint64_t seed);

//==============================================================================
// Contamination and sample labels
//==============================================================================

struct PoolSegment {
    std::size_t length = 0;
    Vec values;  // length x dims
};

// Maximal label-1 runs of a labeled series, copied verbatim.
std::vector<PoolSegment> extract_anomaly_pool(const TimeSeries& labeled);

struct Contaminated {
    TimeSeries series;
    std::vector<std::uint8_t> ac_flags;  // per point
    double flagged_fraction = 0.0;
};

// Pastes pool segments (each used at most once, in random order) over
// randomly placed train regions until at least `ratio` of the points are
// flagged. Points marked in `forbidden` are never overwritten.
Contaminated inject_contamination(const TimeSeries& train, std::span<const PoolSegment> pool,
                                  double ratio, Rng& rng,
                                  std::span<const std::uint8_t> forbidden = {},
                                  std::size_t gap = 0);

// A generated benchmark whose training series carries test-pool anomalies
// at `ratio`, kept at least `gap` points away from the hard segments.
struct ContaminatedBenchmark {
    GeneratedData data;
    Contaminated train;
    double ratio = 0.0;
};

ContaminatedBenchmark contaminated_benchmark(const SyntheticSpec& spec, double ratio,
                                             std::uint64_t seed, std::size_t gap = 30);

// Prefix counts over point flags for O(1) window overlap queries.
class PointFlags {
public:
    explicit PointFlags(std::span<const std::uint8_t> flags);
    bool any(std::size_t start, std::size_t w) const;
    std::size_t count(std::size_t start, std::size_t w) const;
    std::size_t size() const { return prefix_.size() - 1; }

private:
    std::vector<std::size_t> prefix_;
};

// Linear-interpolation quantile (q in [0, 1]).
double quantile(std::span<const double> values, double q);

// HS[i] = window i overlaps no AC point and losses[i] > quantile(losses, q).
std::vector<std::uint8_t> label_hard_samples(std::span<const std::size_t> starts,
                                             std::span<const double> losses,
                                             std::span<const std::uint8_t> ac_flags,
                                             std::size_t w, double q = 0.9);

struct Proportions {
    double ac = 0.0;
    double hs = 0.0;
};

// A sample is AC when it overlaps an AC point, otherwise HS when hs_by_start
// flags its start offset.
Proportions track_proportions(const SampleSet& set, std::span<const std::uint8_t> ac_flags,
                              std::span<const std::uint8_t> hs_by_start);

//==============================================================================
// Evaluation
//==============================================================================

struct EvalResult {
    double f1 = 0.0;
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    Vec adjusted_scores;
};

Vec point_adjust(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Exact search over every distinct score as threshold (predict score >=
// threshold); ties go to the lower threshold.
EvalResult best_f1(std::span<const double> scores, std::span<const std::uint8_t> labels,
                   bool adjust);

// F1 of the prediction score >= threshold.
double f1_at(std::span<const double> scores, std::span<const std::uint8_t> labels,
             double threshold);

// Probability that a positive outranks a negative (ties count one half).
double auc(std::span<const double> positives, std::span<const double> negatives);

double spearman(std::span<const double> x, std::span<const double> y);

//==============================================================================
// Spectra
//==============================================================================

struct Spectrum {
    std::vector<std::size_t> bins;  // 0 .. n/2
    Vec amplitudes;
};

// Amplitudes scaled so sum(amplitude^2) == sum(signal^2) (one-sided Parseval).
Spectrum spectrum(std::span<const double> signal);

// Spectrum of a window, averaged over dimensions before the transform.
Spectrum spectrum(const TimeSeries& series, const WindowSample& s);

struct FrequencyGradient {
    std::size_t bin = 0;
    double residual_amplitude = 0.0;  // |J(f)|
    double magnitude = 0.0;           // || d|J(f)|^2 / d theta ||_2 over the chosen parameters
};

// Inputs x_n = -1 + 2n/N for a signal of N samples.
Vec decay_grid(std::size_t n);

// For the one-hidden-layer tanh net fitted to `signal` on decay_grid, returns
// the gradient of each frequency's squared residual |DFT(D - s)(f)|^2 for
// bins 1 .. N/2, restricted to `params` (all when empty).
std::vector<FrequencyGradient> frequency_gradient_decay(const Network& net,
                                                        std::span<const double> signal,
                                                        std::span<const std::size_t> params = {});

}  // namespace plda
