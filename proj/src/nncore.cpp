#include "plda/nncore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "plda/kernels.hpp"

namespace plda {

namespace {

double act(Activation a, double z) {
    switch (a) {
        case Activation::tanh: return std::tanh(z);
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::identity: return z;
    }
    return z;
}

// First and second derivatives, expressed through (z, a = act(z)).
double act_d1(Activation a, double z, double y) {
    switch (a) {
        case Activation::tanh: return 1.0 - y * y;
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

double act_d2(Activation a, double y) {
    return a == Activation::tanh ? -2.0 * y * (1.0 - y * y) : 0.0;
}

void check_input(const Network& net, std::span<const double> input) {
    if (input.size() != net.input_size()) {
        throw InvalidArgument("network input: expected length " + std::to_string(net.input_size()) +
                              ", got " + std::to_string(input.size()));
    }
}

void check_target(const Network& net, std::span<const double> target) {
    if (target.size() != net.output_size()) {
        throw InvalidArgument("network target: expected length " +
                              std::to_string(net.output_size()) + ", got " +
                              std::to_string(target.size()));
    }
}

void check_param_vector(const Network& net, std::span<const double> v, const char* what) {
    if (v.size() != net.num_params()) {
        throw InvalidArgument(std::string(what) + ": expected length " +
                              std::to_string(net.num_params()) + ", got " +
                              std::to_string(v.size()));
    }
}

}  // namespace

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
        case Activation::identity: return "identity";
    }
    return "identity";
}

Activation activation_from_string(std::string_view name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "relu") return Activation::relu;
    if (name == "identity") return Activation::identity;
    throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

//==============================================================================
// Network
//==============================================================================

Network::Network(std::vector<std::size_t> layer_sizes, std::vector<Activation> activations)
    : sizes_(std::move(layer_sizes)), activations_(std::move(activations)) {
    require(sizes_.size() >= 2, "network needs at least an input and an output layer");
    require(activations_.size() + 1 == sizes_.size(),
            "network: expected " + std::to_string(sizes_.size() - 1) + " activations, got " +
                std::to_string(activations_.size()));
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        require(sizes_[l] > 0 && sizes_[l + 1] > 0, "network layer sizes must be positive");
        offsets_.push_back(total);
        total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
    }
    max_width_ = *std::max_element(sizes_.begin(), sizes_.end());
    params_.assign(total, 0.0);
}

Network Network::random(std::vector<std::size_t> layer_sizes, std::vector<Activation> activations,
                        Rng& rng) {
    Network net(std::move(layer_sizes), std::move(activations));
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(net.sizes_[l]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        const std::size_t begin = net.weight_offset(l);
        const std::size_t end = net.bias_offset(l) + net.sizes_[l + 1];
        for (std::size_t i = begin; i < end; ++i) net.params_[i] = dist(rng);
    }
    return net;
}

void Network::set_params(std::span<const double> values) {
    check_param_vector(*this, values, "set_params");
    std::copy(values.begin(), values.end(), params_.begin());
}

//==============================================================================
// Forward / backward
//==============================================================================

void forward(const Network& net, std::span<const double> input, ForwardTrace& trace) {
    check_input(net, input);
    const std::size_t layers = net.num_layers();
    const auto& sizes = net.layer_sizes();
    trace.pre.resize(layers);
    trace.post.resize(layers + 1);
    trace.post[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < layers; ++l) {
        auto& z = trace.pre[l];
        auto& a = trace.post[l + 1];
        z.resize(sizes[l + 1]);
        a.resize(sizes[l + 1]);
        kernels::gemv(net.weights(l), trace.post[l], net.biases(l).data(), z);
        const Activation f = net.activations()[l];
        for (std::size_t i = 0; i < z.size(); ++i) a[i] = act(f, z[i]);
    }
}

Vec forward(const Network& net, std::span<const double> input) {
    ForwardTrace trace;
    forward(net, input, trace);
    return std::move(trace.post.back());
}

void accumulate_backward(const Network& net, const ForwardTrace& trace,
                         std::span<const double> output_grad, double scale,
                         std::span<double> grad) {
    check_target(net, output_grad);
    check_param_vector(net, grad, "gradient buffer");
    const std::size_t layers = net.num_layers();
    const auto& sizes = net.layer_sizes();

    Vec delta(output_grad.begin(), output_grad.end());
    Vec upstream;
    for (std::size_t li = layers; li-- > 0;) {
        const Activation f = net.activations()[li];
        const auto& z = trace.pre[li];
        const auto& a = trace.post[li + 1];
        for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= act_d1(f, z[i], a[i]);

        std::span<double> gw = grad.subspan(net.weight_offset(li), sizes[li] * sizes[li + 1]);
        std::span<double> gb = grad.subspan(net.bias_offset(li), sizes[li + 1]);
        kernels::ger(scale, delta, trace.post[li], gw);
        kernels::axpy(scale, delta, gb);

        if (li > 0) {
            upstream.assign(sizes[li], 0.0);
            kernels::gemv_t_acc(net.weights(li), delta, upstream);
            delta.swap(upstream);
        }
    }
}

//==============================================================================
// Losses
//==============================================================================

namespace {

double mse_and_output_grad(std::span<const double> y, std::span<const double> t, Vec& og) {
    const double inv = 1.0 / static_cast<double>(y.size());
    og.resize(y.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - t[i];
        loss += r * r;
        og[i] = 2.0 * r * inv;
    }
    return loss * inv;
}

void add_l2(const Network& net, double l2, double& loss, std::span<double> grad, double scale) {
    if (l2 == 0.0) return;
    auto p = net.params();
    loss += scale * l2 * kernels::dot(p, p);
    kernels::axpy(2.0 * l2 * scale, p, grad);
}

}  // namespace

LossGrad loss_and_grad(const Network& net, std::span<const double> input,
                       std::span<const double> target, LossSpec spec) {
    check_target(net, target);
    ForwardTrace trace;
    forward(net, input, trace);
    Vec og;
    LossGrad out;
    out.loss = mse_and_output_grad(trace.output(), target, og);
    out.grad.assign(net.num_params(), 0.0);
    accumulate_backward(net, trace, og, 1.0, out.grad);
    add_l2(net, spec.l2, out.loss, out.grad, 1.0);
    return out;
}

double loss_only(const Network& net, std::span<const double> input,
                 std::span<const double> target, LossSpec spec) {
    check_target(net, target);
    const Vec y = forward(net, input);
    double loss = kernels::sq_dist(y, target) / static_cast<double>(y.size());
    if (spec.l2 != 0.0) loss += spec.l2 * kernels::dot(net.params(), net.params());
    return loss;
}

LossGrad mean_loss_and_grad(const Network& net, std::span<const Example> batch, LossSpec spec) {
    require(!batch.empty(), "mean_loss_and_grad: empty batch");
    const double inv = 1.0 / static_cast<double>(batch.size());
    LossGrad out;
    out.grad.assign(net.num_params(), 0.0);
    ForwardTrace trace;
    Vec og;
    for (const Example& ex : batch) {
        check_target(net, ex.target);
        forward(net, ex.input, trace);
        out.loss += inv * mse_and_output_grad(trace.output(), ex.target, og);
        accumulate_backward(net, trace, og, inv, out.grad);
    }
    add_l2(net, spec.l2, out.loss, out.grad, 1.0);
    return out;
}

//==============================================================================
// Hessian-vector products
//==============================================================================

Vec hvp(const Network& net, std::span<const Example> batch, std::span<const double> v,
        LossSpec spec) {
    require(!batch.empty(), "hvp: empty batch");
    check_param_vector(net, v, "hvp direction");
    const std::size_t layers = net.num_layers();
    const auto& sizes = net.layer_sizes();
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    Vec out(net.num_params(), 0.0);
    ForwardTrace trace;
    std::vector<Vec> rz(layers), ra(layers + 1);
    Vec tmp, ga, rga, delta, rdelta;

    for (const Example& ex : batch) {
        check_target(net, ex.target);
        forward(net, ex.input, trace);

        // R-forward: directional derivatives of pre- and post-activations.
        ra[0].assign(sizes[0], 0.0);
        for (std::size_t l = 0; l < layers; ++l) {
            const std::size_t n_in = sizes[l], n_out = sizes[l + 1];
            std::span<const double> vw = v.subspan(net.weight_offset(l), n_in * n_out);
            std::span<const double> vb = v.subspan(net.bias_offset(l), n_out);
            rz[l].resize(n_out);
            kernels::gemv(vw, trace.post[l], vb.data(), rz[l]);
            if (l > 0) {
                tmp.resize(n_out);
                kernels::gemv(net.weights(l), ra[l], nullptr, tmp);
                for (std::size_t i = 0; i < n_out; ++i) rz[l][i] += tmp[i];
            }
            const Activation f = net.activations()[l];
            ra[l + 1].resize(n_out);
            for (std::size_t i = 0; i < n_out; ++i) {
                ra[l + 1][i] = act_d1(f, trace.pre[l][i], trace.post[l + 1][i]) * rz[l][i];
            }
        }

        // Loss derivative w.r.t. the output and its directional derivative.
        const std::size_t n_last = sizes.back();
        const double k = 2.0 / static_cast<double>(n_last);
        ga.resize(n_last);
        rga.resize(n_last);
        for (std::size_t i = 0; i < n_last; ++i) {
            ga[i] = k * (trace.post[layers][i] - ex.target[i]);
            rga[i] = k * ra[layers][i];
        }

        // R-backward.
        for (std::size_t li = layers; li-- > 0;) {
            const Activation f = net.activations()[li];
            const std::size_t n_out = sizes[li + 1], n_in = sizes[li];
            delta.resize(n_out);
            rdelta.resize(n_out);
            for (std::size_t i = 0; i < n_out; ++i) {
                const double z = trace.pre[li][i];
                const double a = trace.post[li + 1][i];
                const double d1 = act_d1(f, z, a);
                delta[i] = ga[i] * d1;
                rdelta[i] = rga[i] * d1 + ga[i] * act_d2(f, a) * rz[li][i];
            }
            std::span<double> hw{out.data() + net.weight_offset(li), n_in * n_out};
            std::span<double> hb{out.data() + net.bias_offset(li), n_out};
            kernels::ger(inv_batch, rdelta, trace.post[li], hw);
            kernels::ger(inv_batch, delta, ra[li], hw);
            kernels::axpy(inv_batch, rdelta, hb);

            if (li > 0) {
                std::span<const double> vw = v.subspan(net.weight_offset(li), n_in * n_out);
                ga.assign(n_in, 0.0);
                kernels::gemv_t_acc(net.weights(li), delta, ga);
                rga.assign(n_in, 0.0);
                kernels::gemv_t_acc(vw, delta, rga);
                kernels::gemv_t_acc(net.weights(li), rdelta, rga);
            }
        }
    }
    if (spec.l2 != 0.0) kernels::axpy(2.0 * spec.l2, v, out);
    return out;
}

Vec hvp_fd(const Network& net, std::span<const Example> batch, std::span<const double> v,
           LossSpec spec, double step) {
    require(!batch.empty(), "hvp_fd: empty batch");
    check_param_vector(net, v, "hvp direction");
    Network probe = net;
    auto p = probe.params();
    const auto base = net.params();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = base[i] + step * v[i];
    const Vec g_plus = mean_loss_and_grad(probe, batch, spec).grad;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = base[i] - step * v[i];
    const Vec g_minus = mean_loss_and_grad(probe, batch, spec).grad;
    Vec out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = (g_plus[i] - g_minus[i]) / (2.0 * step);
    return out;
}

//==============================================================================
// Optimizer
//==============================================================================

OptimizerState OptimizerState::adam(std::size_t num_params, double lr) {
    require(lr > 0.0, "optimizer learning rate must be positive");
    OptimizerState s;
    s.kind = OptimizerKind::adam;
    s.lr = lr;
    s.m.assign(num_params, 0.0);
    s.v.assign(num_params, 0.0);
    return s;
}

OptimizerState OptimizerState::sgd(std::size_t num_params, double lr) {
    require(lr > 0.0, "optimizer learning rate must be positive");
    OptimizerState s;
    s.kind = OptimizerKind::sgd;
    s.lr = lr;
    s.m.assign(num_params, 0.0);
    s.v.assign(num_params, 0.0);
    return s;
}

void optimizer_step(OptimizerState& opt, Network& net, std::span<const double> grad) {
    check_param_vector(net, grad, "optimizer gradient");
    require(opt.m.size() == grad.size() && opt.v.size() == grad.size(),
            "optimizer accumulators do not match the parameter count");
    for (double g : grad) {
        if (!std::isfinite(g)) throw NumericError("optimizer_step: non-finite gradient entry");
    }
    auto p = net.params();
    ++opt.step;
    if (opt.kind == OptimizerKind::sgd) {
        kernels::axpy(-opt.lr, grad, p);
        return;
    }
    const double t = static_cast<double>(opt.step);
    const double c1 = 1.0 - std::pow(opt.beta1, t);
    const double c2 = 1.0 - std::pow(opt.beta2, t);
    for (std::size_t i = 0; i < p.size(); ++i) {
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * grad[i];
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
        const double mhat = opt.m[i] / c1;
        const double vhat = opt.v[i] / c2;
        p[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
}

}  // namespace plda
