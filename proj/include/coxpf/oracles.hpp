#pragma once

#include "coxpf/filters.hpp"

namespace coxpf {

/// E[exp(-int_tau^T (alpha X_t + beta) dt) | X_tau = x0, X_T = x1] for Brownian X.
double bridge_path_integral_expectation(double alpha, double beta, double tau, double T, double x0, double x1);
/// Log of the above.
double log_bridge_path_integral_expectation(double alpha, double beta, double tau, double T, double x0, double x1);

/// Benchmark likelihood with no arrivals on [0, T]: exp(-10T + T^3/6).
double likelihood_no_obs(double T);

/// Benchmark likelihood with arrivals at t1 < t2 < T and Gaussian marks of sd sigma_y.
double likelihood_two_obs(double t1, double t2, double y1, double y2, double T, double sigma_y);

/// Benchmark segment weight: bridge expectation with alpha = 1, beta = 10.
double exact_segment_weight(double t_prev, double t_next, double x_prev, double x_next);

/// Riemann-discretised likelihood of a 1D model by tensor Gauss-Hermite quadrature
/// over the grid states. At most four random grid states are supported.
double quadrature_likelihood_delta(const StateSpaceModel& model, const ObservationSet& obs, double step,
                                   int resolution = 40);

/// Continuous-time filter with exact segment weights on the 1D benchmark.
FilterOutput run_exact_weight_pf(const StateSpaceModel& model, const ObservationSet& obs, double step,
                                 const FilterOptions& opt);

}  // namespace coxpf
