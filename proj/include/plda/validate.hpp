#pragma once
// Self-checking experiments with fixed seeds. Each returns its metrics and a
// verdict against a fixed threshold; failures are reported, never thrown.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "plda/evalgen.hpp"
#include "plda/trainer.hpp"

namespace plda::checks {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::vector<std::pair<std::string, double>> metrics;
    std::string detail;
    double seconds = 0.0;

    double metric(const std::string& key) const;
};

// Ridge regression: -H^-1 grad L from CG on exact HVPs against the
// symmetric retraining difference at eps = 1e-3. Passes below 1e-4.
CheckResult influence(std::uint64_t seed = 7);

// CG behavior against a dense solve of (H + lambda I) x = grad with H from
// finite differences, on a 16-parameter net. Passes below 1e-3.
CheckResult cg_consistency(std::uint64_t seed = 11);

// +1 reachable within bound 4w for every w in 4..=64.
CheckResult reachability();

struct DecaySetup {
    std::size_t points = 128;
    std::vector<std::size_t> bins{1, 3, 6};
    std::vector<double> amplitudes{1.0, 0.6, 0.3};
    std::size_t hidden = 32;
    std::size_t epochs = 200;
    std::size_t batch = 16;
    double lr = 1e-2;
};

// Spearman(f, log magnitude) over bins 1..points/2 after training. Passes
// below -0.8.
CheckResult decay(std::uint64_t seed = 3, const DecaySetup& setup = {});

struct BenchmarkSetup {
    BenchmarkLayout layout;
    double contamination = 0.10;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    RunConfig run;
};

// The configuration shared by the benchmark experiments.
BenchmarkSetup default_benchmark_setup();

// Rewards after 5 detector epochs: r_l of AC and HS above simple windows,
// AUC of r_p separating AC from HS above 0.7 (means over seeds).
CheckResult rewards(const BenchmarkSetup& setup = default_benchmark_setup(),
                    std::size_t detector_epochs = 5);

// Paired ORIG/PLDA runs per seed. The first result is the augmentation
// dynamics check (final AC <= 0.6 x initial, final HS > initial), the second
// the F1 comparison (PLDA mean >= ORIG mean and mean paired gain > 0).
std::pair<CheckResult, CheckResult> paired_benchmark(
    const BenchmarkSetup& setup = default_benchmark_setup());

// point_adjust / best_f1 on hand-worked examples, compared exactly.
CheckResult metrics_exact();

// Analytic gradients against central differences over 50 random nets.
CheckResult gradients(std::uint64_t seed = 5);

// Greedy policy of a trained agent on a 3-state deterministic MDP against
// value iteration.
CheckResult toy_mdp(std::uint64_t seed = 9);

// A detector trained on every window offset of the fit region. Labeling with
// a detector that only saw the stride-w windows would make exactly those
// windows look easy.
Detector labeling_baseline(const TimeSeries& train, const RunConfig& cfg, std::size_t epochs = 5);

// Tracking labels used by the dynamics check: AC flags from contamination,
// HS starts from a baseline detector's window losses above the 0.9 quantile.
Tracking tracking_labels(const Detector& baseline, const TimeSeries& train,
                         const std::vector<std::uint8_t>& ac_flags, std::size_t limit,
                         double quantile = 0.9);

}  // namespace plda::checks
