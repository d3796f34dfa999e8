#pragma once
// Reference anomaly detector: a fully-connected autoencoder over flattened
// windows, scored by mean squared reconstruction error.

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "plda/nncore.hpp"
#include "plda/windows.hpp"

namespace plda {

struct DetectorConfig {
    std::size_t window = 30;
    std::size_t features = 1;
    std::size_t bottleneck = 8;
    std::vector<std::size_t> hidden{32};

    std::size_t input_size() const { return window * features; }
    void validate() const;
};

class Detector {
public:
    // Encoder hidden layers, bottleneck, mirrored decoder; tanh everywhere
    // except the identity output layer.
    Detector(DetectorConfig config, Rng& rng);
    // Wraps an existing network; its input and output must both be w * D wide.
    Detector(DetectorConfig config, Network net);

    const DetectorConfig& config() const { return config_; }
    const Network& net() const { return net_; }
    Network& net() { return net_; }

private:
    DetectorConfig config_;
    Network net_;
};

// Examples whose input and target are the same window.
std::vector<Example> reconstruction_examples(const TimeSeries& series,
                                             std::span<const WindowSample> samples);

double sample_loss(const Detector& det, const TimeSeries& series, const WindowSample& s);

LossGrad sample_loss_and_grad(const Detector& det, const TimeSeries& series,
                              const WindowSample& s);

// Per-point score: mean loss over every stride-1 window covering the point.
Vec anomaly_scores(const Detector& det, const TimeSeries& series);

// Loss of every stride-1 window start in [0, limit - w].
Vec all_window_losses(const Detector& det, const TimeSeries& series, std::size_t limit);

// One shuffled mini-batch pass. Returns the loss of each sample id measured in
// the forward pass of its batch, before that batch's update.
std::map<std::uint64_t, double> train_epoch(Detector& det, const TimeSeries& series,
                                            const SampleSet& set, OptimizerState& opt,
                                            std::size_t batch_size, Rng& rng);

double mean_loss(const Detector& det, const TimeSeries& series,
                 std::span<const WindowSample> samples);

}  // namespace plda
