#include "plda/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "plda/kernels.hpp"

namespace plda {

void validate(const HessianMode& mode) {
    std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, DiagonalHessian>) {
                require(m.damping > 0.0, "diagonal hessian damping must be positive");
            } else if constexpr (std::is_same_v<T, CgHessian>) {
                require(m.damping > 0.0, "cg hessian damping must be positive");
                require(m.max_iters >= 1, "cg hessian max_iters must be positive");
                require(m.tolerance > 0.0, "cg hessian tolerance must be positive");
            }
        },
        mode);
}

CgNotConverged::CgNotConverged(std::size_t iterations, double residual_norm)
    : NumericError("conjugate gradients did not converge after " + std::to_string(iterations) +
                   " iterations (residual norm " + std::to_string(residual_norm) + ")"),
      iterations_(iterations),
      residual_norm_(residual_norm) {}

//==============================================================================
// Conjugate gradients
//==============================================================================

CgResult conjugate_gradient(const LinearOperator& a, std::span<const double> b, double damping,
                            std::size_t max_iters, double tolerance) {
    const std::size_t n = b.size();
    CgResult res;
    res.x.assign(n, 0.0);
    const double b_norm = std::sqrt(kernels::dot(b, b));
    if (b_norm == 0.0) return res;

    Vec r(b.begin(), b.end());
    Vec p = r;
    Vec ap(n);
    double rr = kernels::dot(r, r);
    for (std::size_t it = 0; it < max_iters; ++it) {
        a(p, ap);
        kernels::axpy(damping, p, ap);
        const double pap = kernels::dot(p, ap);
        if (!(pap > 0.0)) {
            throw CgNotConverged(it, std::sqrt(rr));
        }
        const double step = rr / pap;
        kernels::axpy(step, p, res.x);
        kernels::axpy(-step, ap, r);
        const double rr_next = kernels::dot(r, r);
        res.iterations = it + 1;
        res.residual_norm = std::sqrt(rr_next);
        if (res.residual_norm <= tolerance * b_norm) return res;
        const double beta = rr_next / rr;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        rr = rr_next;
    }
    throw CgNotConverged(max_iters, res.residual_norm);
}

//==============================================================================
// Influence
//==============================================================================

Vec influence_direction(std::span<const double> grad, const HessianMode& mode,
                        const Curvature& curvature) {
    validate(mode);
    return std::visit(
        [&](const auto& m) -> Vec {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, IdentityHessian>) {
                return Vec(grad.begin(), grad.end());
            } else if constexpr (std::is_same_v<T, DiagonalHessian>) {
                require(curvature.diagonal.size() == grad.size(),
                        "diagonal hessian estimate does not match the gradient length");
                Vec out(grad.size());
                for (std::size_t i = 0; i < grad.size(); ++i) {
                    out[i] = grad[i] / (curvature.diagonal[i] + m.damping);
                }
                return out;
            } else {
                require(static_cast<bool>(curvature.hvp), "cg mode needs a Hessian-vector product");
                return conjugate_gradient(curvature.hvp, grad, m.damping, m.max_iters, m.tolerance)
                    .x;
            }
        },
        mode);
}

Vec parameter_behavior(std::span<const double> grad, const HessianMode& mode,
                       const Curvature& curvature, const KeyParams* keys) {
    const Vec dir = influence_direction(grad, mode, curvature);
    if (!keys) {
        Vec out(dir.size());
        for (std::size_t i = 0; i < dir.size(); ++i) out[i] = std::abs(dir[i]);
        return out;
    }
    Vec out;
    out.reserve(keys->k());
    for (std::size_t idx : keys->indices) {
        require(idx < dir.size(), "key parameter index out of range");
        out.push_back(std::abs(dir[idx]));
    }
    return out;
}

Curvature detector_curvature(const Detector& det, const TimeSeries& series,
                             std::span<const WindowSample> batch, const HessianMode& mode) {
    require(!batch.empty(), "parameter behavior needs a nonempty batch to define H");
    Curvature c;
    if (std::holds_alternative<DiagonalHessian>(mode)) {
        const std::size_t p = det.net().num_params();
        c.diagonal.assign(p, 0.0);
        const double inv = 1.0 / static_cast<double>(batch.size());
        for (const auto& s : batch) {
            const LossGrad lg = sample_loss_and_grad(det, series, s);
            for (std::size_t i = 0; i < p; ++i) c.diagonal[i] += inv * lg.grad[i] * lg.grad[i];
        }
    } else if (std::holds_alternative<CgHessian>(mode)) {
        // Borrows the detector's network; the operator must not outlive det.
        auto examples = std::make_shared<std::vector<Example>>(reconstruction_examples(series, batch));
        const Network* net = &det.net();
        c.hvp = [net, examples](std::span<const double> v, std::span<double> out) {
            const Vec hv = hvp(*net, *examples, v);
            std::copy(hv.begin(), hv.end(), out.begin());
        };
    }
    return c;
}

Vec parameter_behavior(const Detector& det, const TimeSeries& series, const WindowSample& s,
                       std::span<const WindowSample> batch, const HessianMode& mode,
                       const KeyParams* keys) {
    const Curvature c = detector_curvature(det, series, batch, mode);
    const LossGrad lg = sample_loss_and_grad(det, series, s);
    return parameter_behavior(lg.grad, mode, c, keys);
}

//==============================================================================
// Key parameters, center, rewards
//==============================================================================

KeyParams select_key_parameters(std::span<const Vec> behaviors, std::size_t k) {
    require(!behaviors.empty(), "select_key_parameters: no behavior vectors");
    const std::size_t p = behaviors.front().size();
    require(k >= 1, "select_key_parameters: k must be positive");
    if (k > p) {
        throw InvalidArgument("select_key_parameters: k = " + std::to_string(k) +
                              " exceeds the parameter count " + std::to_string(p));
    }
    Vec mean(p, 0.0);
    for (const auto& b : behaviors) {
        require(b.size() == p, "select_key_parameters: behavior vectors differ in length");
        for (std::size_t i = 0; i < p; ++i) mean[i] += std::abs(b[i]);
    }
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
    KeyParams keys;
    keys.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(keys.indices.begin(), keys.indices.end());
    return keys;
}

Vec behavior_center(std::span<const Vec> records) {
    require(!records.empty(), "behavior_center: no records");
    const std::size_t k = records.front().size();
    Vec center(k, 0.0);
    for (const auto& r : records) {
        require(r.size() == k, "behavior_center: records differ in length");
        kernels::axpy(1.0, r, center);
    }
    const double inv = 1.0 / static_cast<double>(records.size());
    for (double& c : center) c *= inv;
    return center;
}

Vec normalize_rewards(std::span<const double> raw) {
    if (raw.empty()) return {};
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it, hi = *hi_it;
    Vec out(raw.size(), 0.5);
    if (!(hi > lo)) return out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = std::clamp((raw[i] - lo) / (hi - lo), 0.0, 1.0);
    }
    return out;
}

double dual_reward(double r_l, double r_p, Action a, double alpha) {
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    require(in_unit(r_l) && in_unit(r_p) && in_unit(alpha),
            "dual_reward: r_l, r_p and alpha must lie in [0, 1]");
    switch (a) {
        case Action::expand: return alpha * r_l + (1.0 - alpha) * (1.0 - r_p);
        case Action::preserve: return alpha * (1.0 - r_l) + (1.0 - alpha) * (1.0 - r_p);
        case Action::remove: return alpha * r_l + (1.0 - alpha) * r_p;
    }
    return 0.0;
}

std::string_view to_string(RewardScale s) { return s == RewardScale::Log ? "log" : "linear"; }

RewardScale reward_scale_from_string(std::string_view name) {
    if (name == "linear") return RewardScale::Linear;
    if (name == "log") return RewardScale::Log;
    throw InvalidArgument("unknown reward scale: " + std::string(name));
}

double scaled_raw(double raw, RewardScale scale) {
    return scale == RewardScale::Log ? std::log(std::max(raw, 1e-300)) : raw;
}

void finalize_records(std::span<BehaviorRecord> records, RewardScale scale) {
    if (records.empty()) return;
    std::vector<Vec> ps;
    ps.reserve(records.size());
    for (const auto& r : records) ps.push_back(r.p_vec);
    const Vec center = behavior_center(ps);
    Vec rl(records.size()), rp(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].r_p_raw = std::sqrt(kernels::sq_dist(records[i].p_vec, center));
        rl[i] = scaled_raw(records[i].r_l_raw, scale);
        rp[i] = scaled_raw(records[i].r_p_raw, scale);
    }
    const Vec nl = normalize_rewards(rl);
    const Vec np = normalize_rewards(rp);
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].r_l = nl[i];
        records[i].r_p = np[i];
    }
}

void write_behavior_csv(std::ostream& os, std::span<const BehaviorRecord> records) {
    os << "sample_id,r_l_raw,r_p_raw,r_l,r_p\n";
    os.precision(17);
    for (const auto& r : records) {
        os << r.sample_id << ',' << r.r_l_raw << ',' << r.r_p_raw << ',' << r.r_l << ',' << r.r_p
           << '\n';
    }
}

}  // namespace plda
