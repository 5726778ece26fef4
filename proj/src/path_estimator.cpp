#include "coxpf/path_estimator.hpp"

#include "coxpf/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace coxpf {

void EstimatorConfig::validate() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw InvalidArgument("estimator step must be positive");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw InvalidArgument("epsilon must lie in (0, 1]");
    if (!(excursion > 0.0)) throw InvalidArgument("excursion constant must be positive");
}

SegmentEstimate poisson_segment_estimate(const LinearSde& sde, const Intensity& rate, double eta,
                                         double t_prev, double t_next, const State& x_start,
                                         RandomStream& rng) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidArgument("Poisson rate eta must be positive");
    if (!(t_prev < t_next)) throw InvalidArgument("segment must satisfy t_prev < t_next");
    const double h = t_next - t_prev;
    SegmentEstimate out;
    out.start = t_prev;
    out.end = t_next;
    out.start_rate = rate(x_start);

    const int kappa = rng.poisson(eta);
    out.aux_count = kappa;
    double product = 1.0;
    State x = x_start;
    double t = t_prev;
    if (kappa > 0) {
        std::array<double, 64> small{};
        std::vector<double> large;
        double* taus = small.data();
        if (kappa > static_cast<int>(small.size())) {
            large.resize(kappa);
            taus = large.data();
        }
        for (int j = 0; j < kappa; ++j) taus[j] = t_prev + h * rng.uniform();
        std::sort(taus, taus + kappa);
        const double c = h / eta;
        for (int j = 0; j < kappa; ++j) {
            const double tau = std::min(taus[j], t_next);
            x = sample_transition(sde, t, tau, x, rng);
            t = tau;
            product *= 1.0 + c * (out.start_rate - rate(x));
        }
    }
    out.end_state = sample_transition(sde, t, t_next, x, rng);
    out.value = std::exp(-h * out.start_rate) * product;
    out.log_magnitude = -h * out.start_rate + std::log(std::abs(product));
    if (!std::isfinite(out.value))
        throw NumericalError("non-finite segment estimate starting from state " + format_state(x_start));
    return out;
}

SegmentEstimate poisson_segment_estimate(const LinearSde& sde, const Intensity& rate,
                                         const EstimatorConfig& cfg, double lipschitz, double t_prev,
                                         double t_next, const State& x_start, RandomStream& rng) {
    cfg.validate();
    if (t_next > t_prev + cfg.step * (1.0 + 1e-9)) throw InvalidArgument("segment longer than the step bound");
    return poisson_segment_estimate(sde, rate, (t_next - t_prev) * lipschitz, t_prev, t_next, x_start, rng);
}

// ===========================================================================
// Bounds
// ===========================================================================

namespace {

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be positive and finite");
}

Bound from_log(double lg) {
    lg = std::min(lg, 0.0);
    return {std::exp(lg), lg};
}

}  // namespace

Bound neg_prob_bound_endpoint(double eta, double delta, double l, double gap) {
    require_positive(eta, "eta");
    require_positive(delta, "delta");
    require_positive(l, "l");
    if (!(gap >= 0.0)) throw InvalidArgument("gap must be non-negative");
    const double ratio = eta / (delta * l);
    if (!(ratio > gap)) return {1.0, 0.0};
    // capped at 1 so the bound stays monotone across the branch point
    return from_log(std::log(2.0) - 2.0 * ratio * (ratio - gap) / delta);
}

Bound neg_prob_bound_marginal(double eta, double delta, double l) {
    require_positive(eta, "eta");
    require_positive(delta, "delta");
    require_positive(l, "l");
    const double a = eta / (std::pow(delta, 1.5) * l);
    // 2 + 4 Phi(2a) - 6 Phi(a) = 6 sf(a) - 4 sf(2a)
    const double la = log_normal_sf(a);
    const double l2a = log_normal_sf(2.0 * a);
    const double lg = std::log(6.0) + la + std::log1p(-(2.0 / 3.0) * std::exp(l2a - la));
    return from_log(lg);
}

Bound union_bound_endpoint(double nt, double delta, double l, double d) {
    const double count = std::ceil(nt / delta);
    const Bound b = neg_prob_bound_endpoint(delta * l, delta, l, d * std::sqrt(delta));
    return from_log(std::log(count) + b.log_value);
}

Bound union_bound_marginal(double nt, double delta, double l) {
    const double count = std::ceil(nt / delta);
    const Bound b = neg_prob_bound_marginal(delta * l, delta, l);
    return from_log(std::log(count) + b.log_value);
}

double choose_step_size(double n_particles, double horizon, double l, double d, double epsilon) {
    require_positive(n_particles, "N");
    require_positive(horizon, "T");
    require_positive(l, "l");
    require_positive(d, "d");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw InvalidArgument("epsilon must lie in (0, 1]");
    const double nt = n_particles * horizon;
    const double log_eps = std::log(epsilon);
    auto feasible = [&](double delta) {
        return union_bound_endpoint(nt, delta, l, d).log_value <= log_eps &&
               union_bound_marginal(nt, delta, l).log_value <= log_eps;
    };
    const double lo_window = 1e-8;
    if (horizon <= lo_window) throw InvalidArgument("horizon below the step-size search window");
    if (feasible(horizon)) return horizon;
    if (!feasible(lo_window)) throw Error("no step size in [1e-8, T] meets the negative-estimate budget");
    double lo = std::log(lo_window), hi = std::log(horizon);
    while (hi - lo > std::log1p(1e-3)) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(std::exp(mid))) lo = mid;
        else hi = mid;
    }
    return std::exp(lo);
}

// ===========================================================================
// Lipschitz tracking
// ===========================================================================

LipschitzTracker lipschitz_init(const Intensity& rate, const std::vector<State>& cloud) {
    LipschitzTracker tr;
    double best = -1.0;
    const std::size_t n = cloud.size();
    if (n >= 2 && cloud[0].size() == 1) {
        // in 1D the steepest chord joins neighbours in sorted order
        std::vector<std::pair<double, double>> pts(n);
        for (std::size_t i = 0; i < n; ++i) pts[i] = {cloud[i][0], rate(cloud[i])};
        std::sort(pts.begin(), pts.end());
        for (std::size_t i = 1; i < n; ++i) {
            const double dx = pts[i].first - pts[i - 1].first;
            if (dx < 1e-12) continue;
            best = std::max(best, std::abs(pts[i].second - pts[i - 1].second) / dx);
        }
    } else if (n >= 2) {
        const std::size_t m = std::min<std::size_t>(n, 4096);
        std::vector<double> lam(m);
        for (std::size_t i = 0; i < m; ++i) lam[i] = rate(cloud[i]);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                const double dx = (cloud[i] - cloud[j]).norm();
                if (dx < 1e-12) continue;
                best = std::max(best, std::abs(lam[i] - lam[j]) / dx);
            }
        }
    }
    if (best < 0.0) {
        tr.value = 1e-6;
        tr.fallback = true;
    } else {
        tr.value = best;
    }
    return tr;
}

double lipschitz_update(LipschitzTracker& tracker, const Intensity& rate, const std::vector<State>& prev,
                        const std::vector<State>& next) {
    if (prev.size() != next.size()) throw InvalidArgument("lipschitz_update needs paired clouds");
    double best = tracker.value;
    for (std::size_t i = 0; i < prev.size(); ++i) {
        const double dx = (next[i] - prev[i]).norm();
        if (dx < 1e-12) continue;
        best = std::max(best, std::abs(rate(next[i]) - rate(prev[i])) / dx);
    }
    tracker.value = best;
    ++tracker.steps;
    return best;
}

Bound truncation_bias_bound(double delta, double l, double horizon, long m) {
    require_positive(delta, "delta");
    require_positive(l, "l");
    require_positive(horizon, "T");
    if (m < 1) throw InvalidArgument("m must be positive");
    const double q = 4.0 * delta * delta * l;
    if (q >= 1.0) throw InvalidArgument("truncation bias bound needs 4 Delta^2 l < 1");
    if (std::abs(static_cast<double>(m) - horizon / delta) >= 1.0)
        throw InvalidArgument("m must equal T / Delta up to rounding");
    const double lg = horizon * l / 2.0 + 0.5 * m * std::log((1.0 + q) / (1.0 - q)) +
                      0.5 * std::log(static_cast<double>(m)) + 0.5 * (std::log(2.0) - 1.0 / (2.0 * delta));
    return {std::exp(lg), lg};
}

WaldResult wald_estimate(const LinearSde& sde, const Intensity& rate, double horizon, const State& x0,
                         RandomStream& rng, double eta, long cap) {
    require_positive(horizon, "T");
    if (eta <= 0.0) eta = horizon;
    double sum = 0.0;
    for (long k = 1; k <= cap; ++k) {
        sum += poisson_segment_estimate(sde, rate, eta, 0.0, horizon, x0, rng).value;
        if (sum > 0.0) return {sum, k};
    }
    throw NumericalError("Wald estimate did not turn positive within " + std::to_string(cap) + " draws");
}

}  // namespace coxpf
