#include "plda/detector.hpp"

#include <algorithm>
#include <numeric>

namespace plda {

void DetectorConfig::validate() const {
    require(window >= 1 && features >= 1, "detector: window and feature dim must be positive");
    require(bottleneck >= 1, "detector: bottleneck must be positive");
    require(bottleneck < window * features,
            "detector: bottleneck " + std::to_string(bottleneck) +
                " must be smaller than w*D = " + std::to_string(window * features));
    for (std::size_t h : hidden) require(h >= 1, "detector: hidden sizes must be positive");
}

namespace {

std::pair<std::vector<std::size_t>, std::vector<Activation>> autoencoder_layout(
    const DetectorConfig& cfg) {
    std::vector<std::size_t> sizes{cfg.input_size()};
    for (std::size_t h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(cfg.bottleneck);
    for (auto it = cfg.hidden.rbegin(); it != cfg.hidden.rend(); ++it) sizes.push_back(*it);
    sizes.push_back(cfg.input_size());
    std::vector<Activation> acts(sizes.size() - 1, Activation::tanh);
    acts.back() = Activation::identity;
    return {sizes, acts};
}

}  // namespace

Detector::Detector(DetectorConfig config, Rng& rng) : config_(std::move(config)) {
    config_.validate();
    auto [sizes, acts] = autoencoder_layout(config_);
    net_ = Network::random(std::move(sizes), std::move(acts), rng);
}

Detector::Detector(DetectorConfig config, Network net)
    : config_(std::move(config)), net_(std::move(net)) {
    require(net_.input_size() == config_.input_size() && net_.output_size() == config_.input_size(),
            "detector: network input and output must both have w*D = " +
                std::to_string(config_.input_size()) + " units");
}

std::vector<Example> reconstruction_examples(const TimeSeries& series,
                                             std::span<const WindowSample> samples) {
    std::vector<Example> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        auto win = series.window(s.start, s.w);
        out.push_back({win, win});
    }
    return out;
}

double sample_loss(const Detector& det, const TimeSeries& series, const WindowSample& s) {
    auto win = series.window(s.start, s.w);
    return loss_only(det.net(), win, win);
}

LossGrad sample_loss_and_grad(const Detector& det, const TimeSeries& series,
                              const WindowSample& s) {
    auto win = series.window(s.start, s.w);
    return loss_and_grad(det.net(), win, win);
}

Vec all_window_losses(const Detector& det, const TimeSeries& series, std::size_t limit) {
    const std::size_t w = det.config().window;
    require(limit <= series.length, "all_window_losses: limit exceeds the series length");
    if (limit < w) {
        throw InvalidArgument("series of length " + std::to_string(limit) +
                              " is shorter than the window length " + std::to_string(w));
    }
    Vec losses(limit - w + 1);
    for (std::size_t start = 0; start < losses.size(); ++start) {
        auto win = series.window(start, w);
        losses[start] = loss_only(det.net(), win, win);
    }
    return losses;
}

Vec anomaly_scores(const Detector& det, const TimeSeries& series) {
    const std::size_t w = det.config().window;
    const Vec losses = all_window_losses(det, series, series.length);
    Vec sum(series.length, 0.0);
    std::vector<std::size_t> count(series.length, 0);
    for (std::size_t start = 0; start < losses.size(); ++start) {
        for (std::size_t t = start; t < start + w; ++t) {
            sum[t] += losses[start];
            ++count[t];
        }
    }
    for (std::size_t t = 0; t < sum.size(); ++t) sum[t] /= static_cast<double>(count[t]);
    return sum;
}

std::map<std::uint64_t, double> train_epoch(Detector& det, const TimeSeries& series,
                                            const SampleSet& set, OptimizerState& opt,
                                            std::size_t batch_size, Rng& rng) {
    require(!set.empty(), "train_epoch: empty sample set");
    require(batch_size >= 1, "train_epoch: batch size must be positive");
    const auto samples = set.samples();
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::map<std::uint64_t, double> losses;
    Network& net = det.net();
    ForwardTrace trace;
    Vec grad(net.num_params());
    Vec og;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
        const std::size_t end = std::min(order.size(), begin + batch_size);
        const double inv = 1.0 / static_cast<double>(end - begin);
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = begin; i < end; ++i) {
            const WindowSample& s = samples[order[i]];
            auto win = series.window(s.start, s.w);
            forward(net, win, trace);
            const auto y = trace.output();
            og.resize(y.size());
            double loss = 0.0;
            for (std::size_t j = 0; j < y.size(); ++j) {
                const double r = y[j] - win[j];
                loss += r * r;
                og[j] = 2.0 * r / static_cast<double>(y.size());
            }
            losses[s.id] = loss / static_cast<double>(y.size());
            accumulate_backward(net, trace, og, inv, grad);
        }
        optimizer_step(opt, net, grad);
    }
    return losses;
}

double mean_loss(const Detector& det, const TimeSeries& series,
                 std::span<const WindowSample> samples) {
    require(!samples.empty(), "mean_loss: no samples");
    double total = 0.0;
    for (const auto& s : samples) total += sample_loss(det, series, s);
    return total / static_cast<double>(samples.size());
}

}  // namespace plda
