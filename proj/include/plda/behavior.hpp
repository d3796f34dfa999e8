#pragma once
// Parameter behavior |H^-1 grad L|, key-parameter selection, the behavior
// center, reward normalization and the dual parameter/loss reward.

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "plda/detector.hpp"
#include "plda/windows.hpp"

namespace plda {

// |grad| with no curvature correction.
struct IdentityHessian {};

// grad / (diag + damping), diag = mean squared per-sample gradient.
struct DiagonalHessian {
    double damping = 1e-3;
};

// (H + damping I) x = grad solved by conjugate gradients on exact HVPs.
struct CgHessian {
    double damping = 1e-3;
    std::size_t max_iters = 200;
    double tolerance = 1e-8;
};

using HessianMode = std::variant<IdentityHessian, DiagonalHessian, CgHessian>;

void validate(const HessianMode& mode);

class CgNotConverged : public NumericError {
public:
    CgNotConverged(std::size_t iterations, double residual_norm);
    std::size_t iterations() const { return iterations_; }
    double residual_norm() const { return residual_norm_; }

private:
    std::size_t iterations_;
    double residual_norm_;
};

using LinearOperator = std::function<void(std::span<const double> in, std::span<double> out)>;

struct CgResult {
    Vec x;
    std::size_t iterations = 0;
    double residual_norm = 0.0;
};

// Solves (A + damping I) x = b from x = 0. Stops when ||r|| <= tol * ||b||.
// Throws CgNotConverged after max_iters or on non-positive curvature.
CgResult conjugate_gradient(const LinearOperator& a, std::span<const double> b, double damping,
                            std::size_t max_iters, double tolerance);

// What a HessianMode needs to know about the loss surface. Only the member
// required by the mode has to be populated.
struct Curvature {
    LinearOperator hvp;
    Vec diagonal;
};

// Signed H^-1 grad under the given mode.
Vec influence_direction(std::span<const double> grad, const HessianMode& mode,
                        const Curvature& curvature);

struct KeyParams {
    std::vector<std::size_t> indices;  // sorted, unique
    std::size_t k() const { return indices.size(); }
};

// |H^-1 grad| restricted to keys (all parameters when keys is null).
Vec parameter_behavior(std::span<const double> grad, const HessianMode& mode,
                       const Curvature& curvature, const KeyParams* keys = nullptr);

// Curvature of the detector's mean reconstruction loss over `batch`.
Curvature detector_curvature(const Detector& det, const TimeSeries& series,
                             std::span<const WindowSample> batch, const HessianMode& mode);

Vec parameter_behavior(const Detector& det, const TimeSeries& series, const WindowSample& s,
                       std::span<const WindowSample> batch, const HessianMode& mode,
                       const KeyParams* keys = nullptr);

// The k indices with the largest mean |behavior|; ties go to the lower index.
KeyParams select_key_parameters(std::span<const Vec> behaviors, std::size_t k);

Vec behavior_center(std::span<const Vec> records);

// Min-max to [0, 1]; a constant input maps to 0.5 everywhere.
Vec normalize_rewards(std::span<const double> raw);

// R_alpha for the action taken. Arguments must lie in [0, 1].
double dual_reward(double r_l, double r_p, Action a, double alpha);

struct BehaviorRecord {
    std::uint64_t sample_id = 0;
    double r_l_raw = 0.0;
    Vec p_vec;
    double r_p_raw = 0.0;
    double r_l = 0.0;
    double r_p = 0.0;
};

// Scale the raw values are min-max normalized on. Log suits heavy-tailed
// losses, where a few extreme samples would otherwise squash the rest near 0.
enum class RewardScale { Linear, Log };

std::string_view to_string(RewardScale s);
RewardScale reward_scale_from_string(std::string_view name);

// Raw value mapped onto the normalization scale (log floors at 1e-300).
double scaled_raw(double raw, RewardScale scale);

// Fills r_p_raw from the center of all p_vecs and normalizes r_l, r_p over
// the given population.
void finalize_records(std::span<BehaviorRecord> records, RewardScale scale = RewardScale::Linear);

// CSV rows "sample_id,r_l_raw,r_p_raw,r_l,r_p".
void write_behavior_csv(std::ostream& os, std::span<const BehaviorRecord> records);

}  // namespace plda
