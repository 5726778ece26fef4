#pragma once

#include "coxpf/filters.hpp"

#include <functional>
#include <string>
#include <vector>

namespace coxpf {

struct ParameterSpec {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
    double initial = 0.5;
};

enum class AdaptationMode { off, continuous, burn_in_only };

struct PmmhConfig {
    std::vector<ParameterSpec> parameters;   // independent uniform priors
    Matrix initial_covariance;               // empty: 0.1 I
    long iterations = 1000;
    long burn_in = 0;
    AdaptationMode adaptation = AdaptationMode::continuous;
    long warmup = 100;

    void validate() const;
    int dimension() const { return static_cast<int>(parameters.size()); }
};

/// log of an unbiased likelihood estimate at theta; -inf encodes L = 0.
/// The seed identifies the random streams the estimate may use.
using LogLikelihoodFn = std::function<double(const Vector& theta, std::uint64_t seed)>;

struct Chain {
    std::vector<std::string> names;
    std::vector<Vector> draws;
    std::vector<double> log_likelihood;
    std::vector<char> accepted;
    std::vector<Matrix> proposal_covariance;

    std::size_t size() const { return draws.size(); }
    double acceptance_rate(long from = 0) const;
    std::vector<double> column(int j, long from = 0) const;
};

Chain pmmh_run(const PmmhConfig& cfg, const LogLikelihoodFn& log_likelihood, std::uint64_t seed);

/// Haario-style proposal: s_d (Cov(draws) + 1e-6 I), s_d = 2.38^2 / dim, or
/// `initial` while fewer than `warmup` draws exist.
Matrix adapt_proposal_covariance(const std::vector<Vector>& draws, const Matrix& initial, long warmup = 100);

/// Effective sample size with initial-positive-sequence truncation.
double ess(const std::vector<double>& series);

enum class RmseModel { discretised, poisson };

struct RmseFit {
    double c1;
    double c2;
    double optimal_step;
    double value(double step, double cost, RmseModel model) const;
};

RmseFit fit_rmse_model(const std::vector<std::pair<double, double>>& points, double cost, RmseModel model);

// ---------------------------------------------------------------------------
// Filter-backed likelihoods
// ---------------------------------------------------------------------------

using ModelFamily = std::function<StateSpaceModel(const Vector& theta)>;

enum class BackendKind { discretised, continuous, exact_weight };

struct BackendSpec {
    BackendKind kind = BackendKind::continuous;
    double step = 0.01;
    std::size_t particles = 100;
    EstimatorConfig estimator;
    unsigned threads = 1;
};

LogLikelihoodFn make_filter_backend(ModelFamily family, ObservationSet obs, BackendSpec spec);

}  // namespace coxpf
