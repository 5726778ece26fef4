#include "coxpf/oracles.hpp"

#include "coxpf/numerics.hpp"

#include <cmath>
#include <functional>
#include <numbers>

namespace coxpf {

double log_bridge_path_integral_expectation(double alpha, double beta, double tau, double T, double x0, double x1) {
    if (!(tau < T)) throw InvalidArgument("bridge expectation needs tau < T");
    const double h = T - tau;
    return -0.5 * alpha * h * (x0 + x1) - beta * h + alpha * alpha * h * h * h / 24.0;
}

double bridge_path_integral_expectation(double alpha, double beta, double tau, double T, double x0, double x1) {
    return std::exp(log_bridge_path_integral_expectation(alpha, beta, tau, T, x0, x1));
}

double likelihood_no_obs(double T) {
    if (!(T >= 0.0)) throw InvalidArgument("horizon must be non-negative");
    return std::exp(-10.0 * T + T * T * T / 6.0);
}

double likelihood_two_obs(double t1, double t2, double y1, double y2, double T, double sigma_y) {
    if (!(0.0 < t1 && t1 < t2 && t2 < T)) throw InvalidArgument("need 0 < t1 < t2 < T");
    if (!(sigma_y > 0.0)) throw InvalidArgument("sigma_y must be positive");
    const double vy = sigma_y * sigma_y;
    const double a = -1.0 / vy;
    const double b = y2 / vy + (t1 + t2 - 2.0 * T) / 2.0;
    const double s2 = 1.0 / (1.0 / vy + 1.0 / (t2 - t1));
    const double s1 = 1.0 / (2.0 / vy - a * a * s2 + 1.0 / t1);
    const double mu1 = s1 * ((y1 + y2) / vy + a * b * s2 + (t1 - 2.0 * T) / 2.0);
    const double bracket = (s2 * a + 1.0) * (mu1 * mu1 + s1) + (10.0 * (s2 * a + 1.0) + s2 * b + 10.0) * mu1 +
                           10.0 * s2 * b + 100.0;
    const double d1 = t2 - t1;
    const double d2 = T - t2;
    const double log_tail = -(y1 * y1 + y2 * y2) / (2.0 * vy) + b * b * s2 / 2.0 + mu1 * mu1 / (2.0 * s1) - 10.0 * T +
                            (t1 * t1 * t1 + d1 * d1 * d1 + d2 * d2 * d2) / 24.0 + d2 * d2 * d2 / 8.0;
    return 1.0 / (2.0 * std::numbers::pi * vy) * std::sqrt(s1 * s2) / std::sqrt(t1 * d1) * bracket * std::exp(log_tail);
}

double exact_segment_weight(double t_prev, double t_next, double x_prev, double x_next) {
    if (!(t_prev <= t_next)) throw InvalidArgument("segment must satisfy t_prev <= t_next");
    if (t_prev == t_next) return 1.0;
    return bridge_path_integral_expectation(1.0, 10.0, t_prev, t_next, x_prev, x_next);
}

double quadrature_likelihood_delta(const StateSpaceModel& model, const ObservationSet& obs, double step,
                                   int resolution) {
    if (model.dimension() != 1) throw InvalidArgument("quadrature oracle supports 1D models only");
    if (resolution < 2) throw InvalidArgument("quadrature resolution must be at least 2");
    const TimeGrid grid = build_time_grid(obs, step);
    const std::size_t m = grid.steps();
    const bool random_start = !model.initial.deterministic();
    const bool terminal_obs = grid.observation[m] >= 0;
    // random grid states: X_0 (if random), X_1..X_{m-1}, and X_m only when weighted
    const std::size_t first = random_start ? 0 : 1;
    const std::size_t last = terminal_obs ? m : m - 1;
    const long dims = static_cast<long>(last) - static_cast<long>(first) + 1;
    if (dims > 4) throw InvalidArgument("quadrature oracle supports at most 4 random grid states");

    std::vector<GaussianTransition> tr(m + 1);
    for (std::size_t k = 1; k <= m; ++k) tr[k] = transition_moments(model.dynamics, grid.times[k - 1], grid.times[k]);

    auto node_weight = [&](std::size_t k, double xk) {
        State s(1);
        s[0] = xk;
        // the affine closed forms extend the intensity linearly past zero, so the nodes do too
        const double rate = model.intensity.raw(s);
        double w = 1.0;
        if (k < m) w *= std::exp(-rate * (grid.times[k + 1] - grid.times[k]));
        if (grid.observation[k] >= 0) w *= rate * model.marks.density(s, obs.marks[grid.observation[k]]);
        return w;
    };

    auto evaluate = [&](int res) {
        const QuadratureRule gh = gauss_hermite_normal(res);
        std::function<double(std::size_t, double)> rec = [&](std::size_t k, double x_prev) -> double {
            // x_prev is X_{k-1}; integrate over X_k
            if (k > last) return 1.0;
            const double mean = tr[k].transition(0, 0) * x_prev + tr[k].offset[0];
            const double sd = std::sqrt(tr[k].covariance(0, 0));
            double acc = 0.0;
            for (int i = 0; i < res; ++i) {
                const double xk = mean + sd * gh.nodes[i];
                acc += gh.weights[i] * node_weight(k, xk) * rec(k + 1, xk);
            }
            return acc;
        };
        if (!random_start) {
            const double x0 = model.initial.mean[0];
            return node_weight(0, x0) * rec(1, x0);
        }
        const double mean = model.initial.mean[0];
        const double sd = std::sqrt(model.initial.covariance(0, 0));
        double acc = 0.0;
        for (int i = 0; i < res; ++i) {
            const double x0 = mean + sd * gh.nodes[i];
            acc += gh.weights[i] * node_weight(0, x0) * rec(1, x0);
        }
        return acc;
    };

    const double coarse = evaluate(resolution);
    const double fine = evaluate(2 * resolution);
    if (std::abs(fine - coarse) > 1e-8 * std::abs(fine))
        throw NumericalError("quadrature oracle did not converge under resolution doubling");
    return fine;
}

FilterOutput run_exact_weight_pf(const StateSpaceModel& model, const ObservationSet& obs, double step,
                                 const FilterOptions& opt) {
    return run_filter(model, obs, step, WeightScheme::exact, EstimatorConfig{}, opt);
}

}  // namespace coxpf
