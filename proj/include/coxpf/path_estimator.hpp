#pragma once

#include "coxpf/observation_models.hpp"
#include "coxpf/sde_kernel.hpp"

#include <vector>

namespace coxpf {

enum class NegativePolicy { truncate, absolute };

struct EstimatorConfig {
    double step = 0.01;           // Delta, upper bound on segment length
    double epsilon = 1e-6;        // negative-estimate probability budget
    double excursion = 3.0;       // d
    NegativePolicy policy = NegativePolicy::truncate;
    bool auto_step = false;       // pick Delta with choose_step_size

    void validate() const;
};

struct LipschitzTracker {
    double value = 0.0;
    std::size_t steps = 0;
    bool fallback = false;  // seeded by the degenerate-cloud floor
};

struct SegmentEstimate {
    double value = 1.0;
    int aux_count = 0;
    double start = 0.0;
    double end = 0.0;
    State end_state;
    double start_rate = 0.0;  // lambda(x_start)
    double log_magnitude = 0.0;  // log |value|, finite even when value underflows

    bool negative() const { return value < 0.0; }
};

/// Poisson estimate of exp(-int_{t_prev}^{t_next} lambda(X_s) ds) given X_{t_prev} = x_start.
SegmentEstimate poisson_segment_estimate(const LinearSde& sde, const Intensity& rate, double eta,
                                         double t_prev, double t_next, const State& x_start,
                                         RandomStream& rng);

/// Same, with eta = (t_next - t_prev) * lipschitz and the segment checked against cfg.step.
SegmentEstimate poisson_segment_estimate(const LinearSde& sde, const Intensity& rate,
                                         const EstimatorConfig& cfg, double lipschitz, double t_prev,
                                         double t_next, const State& x_start, RandomStream& rng);

/// Probability bound carried both linearly and in log form.
struct Bound {
    double value;
    double log_value;
};

Bound neg_prob_bound_endpoint(double eta, double delta, double l, double gap);
Bound neg_prob_bound_marginal(double eta, double delta, double l);

/// Union bound ceil(NT/Delta) * per-segment bound, for eta = Delta l.
Bound union_bound_endpoint(double nt, double delta, double l, double d);
Bound union_bound_marginal(double nt, double delta, double l);

/// Largest Delta in [1e-8, T] meeting both union bounds at level epsilon.
double choose_step_size(double n_particles, double horizon, double l, double d, double epsilon);

LipschitzTracker lipschitz_init(const Intensity& rate, const std::vector<State>& cloud);
double lipschitz_update(LipschitzTracker& tracker, const Intensity& rate, const std::vector<State>& prev,
                        const std::vector<State>& next);

/// Bound on the bias from truncating negative estimates at zero.
Bound truncation_bias_bound(double delta, double l, double horizon, long m);

struct WaldResult {
    double value;
    long draws;
};

/// Repeat PE over [0, T] until the running sum is positive.
WaldResult wald_estimate(const LinearSde& sde, const Intensity& rate, double horizon, const State& x0,
                         RandomStream& rng, double eta = -1.0, long cap = 1000000);

}  // namespace coxpf
