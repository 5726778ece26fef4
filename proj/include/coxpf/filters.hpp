#pragma once

#include "coxpf/model.hpp"
#include "coxpf/path_estimator.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace coxpf {

struct TimeGrid {
    std::vector<double> times;         // t_0 = 0 < ... < t_m = T
    std::vector<int> observation;      // per node: observation index or -1

    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
    bool is_observation(std::size_t k) const { return observation[k] >= 0; }
};

TimeGrid build_time_grid(const ObservationSet& obs, double step);

std::vector<std::size_t> systematic_resample(const std::vector<double>& weights, RandomStream& rng);

struct FilterOptions {
    std::size_t particles = 1000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    bool store_trajectories = false;
    /// Resample only when ESS/N falls below this value; 0 resamples every step.
    double ess_threshold = 0.0;
};

/// How the weight of one grid step is formed.
enum class WeightScheme {
    riemann,   // exp(-lambda(X_{k-1}) h)
    poisson,   // Poisson path estimate
    exact,     // closed-form bridge expectation (1D benchmark only)
};

struct NodeMoments {
    double time;
    Vector mean;
    Vector sd;
};

struct FilterOutput {
    WeightScheme scheme = WeightScheme::riemann;
    NegativePolicy policy = NegativePolicy::truncate;
    double log_likelihood = 0.0;
    bool degenerate = false;           // all weights zero at some step
    long degenerate_step = -1;
    TimeGrid grid;
    double step = 0.0;
    std::size_t particles = 0;
    std::vector<double> log_mean_weight;   // per step
    std::vector<double> ess;               // per step, before resampling
    std::vector<double> lipschitz;         // estimate used for each step (poisson scheme)
    double final_lipschitz = 0.0;
    bool lipschitz_fallback = false;
    std::uint64_t negative_estimates = 0;
    std::uint64_t segment_estimates = 0;
    std::uint64_t auxiliary_points = 0;

    std::vector<State> final_states;       // X_m^{(i)} before the last resampling
    std::vector<double> final_weights;     // W_m^{(i)}
    std::vector<int> sign_flips;           // n^{(i)} along each final trajectory
    bool sign_tracked = false;

    /// Trajectories of the final particles, node-major: trajectories[k * N + i].
    std::vector<State> trajectories;
    bool has_trajectories = false;
    /// Weighted cloud moments at each node (always recorded).
    std::vector<NodeMoments> node_moments;

    double likelihood() const;
};

/// Discretised bootstrap filter with Riemann weights.
FilterOutput run_discretised_pf(const StateSpaceModel& model, const ObservationSet& obs, double step,
                                const FilterOptions& opt);

/// Continuous-time random-weight filter with Poisson path estimates.
FilterOutput run_continuous_pf(const StateSpaceModel& model, const ObservationSet& obs,
                               const EstimatorConfig& cfg, const FilterOptions& opt);

/// Generic engine used by the three public filters.
FilterOutput run_filter(const StateSpaceModel& model, const ObservationSet& obs, double step,
                        WeightScheme scheme, const EstimatorConfig& cfg, const FilterOptions& opt);

/// L * sum W (-1)^n / sum W for an absolute-policy run.
double signed_likelihood_estimate(const FilterOutput& out);

/// Weighted mean and sd per grid node for one coordinate, over stored trajectories.
std::vector<std::pair<double, double>> filtered_moments(const FilterOutput& out, int coordinate);

std::string to_json(const FilterOutput& out, bool include_moments = true);

}  // namespace coxpf
