#pragma once
// Minimal fully-connected networks in double precision: forward pass,
// per-sample gradients, exact and finite-difference Hessian-vector products,
// and a first-order optimizer.
//
// Parameter layout
// ----------------
// For a network with layer sizes [n0, n1, ..., nL] the flat parameter vector
// is layer-major, and inside each layer the weights come first:
//
//     [ W_0 (n1 x n0, row-major) | b_0 (n1) | W_1 (n2 x n1) | b_1 (n2) | ... ]
//
// so P = sum_l (n_l * n_{l+1} + n_{l+1}). Key-parameter indices and saved
// checkpoints depend on this order; do not change it.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "plda/common.hpp"

namespace plda {

enum class Activation { tanh, relu, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

class Network {
public:
    Network() = default;
    // All parameters zero. activations.size() must be layer_sizes.size() - 1.
    Network(std::vector<std::size_t> layer_sizes, std::vector<Activation> activations);

    // Weights and biases uniform in +-1/sqrt(fan_in).
    static Network random(std::vector<std::size_t> layer_sizes,
                          std::vector<Activation> activations, Rng& rng);

    std::size_t num_layers() const { return activations_.size(); }
    std::size_t input_size() const { return sizes_.front(); }
    std::size_t output_size() const { return sizes_.back(); }
    std::size_t num_params() const { return params_.size(); }
    std::size_t max_width() const { return max_width_; }

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    const std::vector<Activation>& activations() const { return activations_; }

    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }
    void set_params(std::span<const double> values);

    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
    std::size_t bias_offset(std::size_t layer) const {
        return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
    }

    std::span<const double> weights(std::size_t layer) const {
        return {params_.data() + weight_offset(layer), sizes_[layer] * sizes_[layer + 1]};
    }
    std::span<const double> biases(std::size_t layer) const {
        return {params_.data() + bias_offset(layer), sizes_[layer + 1]};
    }

private:
    std::vector<std::size_t> sizes_;
    std::vector<Activation> activations_;
    std::vector<std::size_t> offsets_;
    std::size_t max_width_ = 0;
    Vec params_;
};

// Cached activations of one forward pass. Reusable across calls.
struct ForwardTrace {
    std::vector<Vec> pre;   // z_l, one per layer
    std::vector<Vec> post;  // a_0 = input, a_l = act(z_l)
    std::span<const double> output() const { return post.back(); }
};

Vec forward(const Network& net, std::span<const double> input);
void forward(const Network& net, std::span<const double> input, ForwardTrace& trace);

// Vector-Jacobian product: grad += scale * (d output / d params)^T output_grad.
// grad must have num_params() entries.
void accumulate_backward(const Network& net, const ForwardTrace& trace,
                         std::span<const double> output_grad, double scale,
                         std::span<double> grad);

enum class LossKind { mse };

// Per-sample loss: mean over outputs of (y - t)^2, plus l2 * ||theta||^2 when
// l2 > 0 (used to express ridge regression).
struct LossSpec {
    LossKind kind = LossKind::mse;
    double l2 = 0.0;
};

struct LossGrad {
    double loss = 0.0;
    Vec grad;
};

LossGrad loss_and_grad(const Network& net, std::span<const double> input,
                       std::span<const double> target, LossSpec spec = {});

double loss_only(const Network& net, std::span<const double> input,
                 std::span<const double> target, LossSpec spec = {});

struct Example {
    std::span<const double> input;
    std::span<const double> target;
};

// Gradient of the mean loss over the batch.
LossGrad mean_loss_and_grad(const Network& net, std::span<const Example> batch,
                            LossSpec spec = {});

// H v for the mean batch loss by forward-over-reverse differentiation
// (exact up to rounding). Never materializes H.
Vec hvp(const Network& net, std::span<const Example> batch, std::span<const double> v,
        LossSpec spec = {});

// H v by central differences of the mean-loss gradient along v.
Vec hvp_fd(const Network& net, std::span<const Example> batch, std::span<const double> v,
           LossSpec spec = {}, double step = 1e-5);

enum class OptimizerKind { adam, sgd };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    Vec m;
    Vec v;
    std::uint64_t step = 0;

    static OptimizerState adam(std::size_t num_params, double lr = 1e-3);
    static OptimizerState sgd(std::size_t num_params, double lr);
};

// Refuses (throws NumericError, parameters untouched) when grad has a
// non-finite entry.
void optimizer_step(OptimizerState& opt, Network& net, std::span<const double> grad);

}  // namespace plda
