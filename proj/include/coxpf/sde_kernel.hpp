#pragma once

#include "coxpf/random.hpp"
#include "coxpf/types.hpp"

#include <functional>
#include <utility>

namespace coxpf {

/**
 * @brief Linear Gaussian SDE  dX = (b0 + b1(t) X) dt + sigma(t) dW.
 *
 * Brownian motion (optionally with constant drift b0) and the
 * per-coordinate Ornstein-Uhlenbeck process have closed-form transitions;
 * the generic case integrates the moment ODEs numerically.
 */
class LinearSde {
public:
    enum class Kind { brownian, ornstein_uhlenbeck, generic };
    using MatrixFn = std::function<Matrix(double)>;

    static LinearSde brownian(int dim);
    static LinearSde brownian(const Vector& drift);
    /// dX_i = -rates_i (X_i - means_i) dt + dW_i
    static LinearSde ornstein_uhlenbeck(const Vector& rates, const Vector& means);
    static LinearSde generic(const Vector& b0, MatrixFn b1, MatrixFn sigma, int steps_per_unit = 512);

    Kind kind() const { return kind_; }
    int dimension() const { return static_cast<int>(b0_.size()); }
    const Vector& drift_constant() const { return b0_; }
    const Vector& rates() const { return rates_; }
    const Vector& means() const { return means_; }
    Matrix drift_matrix(double t) const;
    Matrix diffusion_matrix(double t) const;
    int steps_per_unit() const { return steps_per_unit_; }

private:
    Kind kind_ = Kind::brownian;
    Vector b0_;
    Vector rates_;
    Vector means_;
    MatrixFn b1_;
    MatrixFn sigma_;
    int steps_per_unit_ = 512;
};

/// X_t | X_s = x  ~  Normal(transition * x + offset, covariance)
struct GaussianTransition {
    double start = 0.0;
    double end = 0.0;
    Matrix transition;
    Vector offset;
    Matrix covariance;

    Vector mean(const Vector& x) const { return transition * x + offset; }
};

struct GaussianLaw {
    Vector mean;
    Matrix covariance;
};

GaussianTransition transition_moments(const LinearSde& sde, double s, double t);

/// Draw X_t given X_s = x. Closed-form cases avoid building matrices.
State sample_transition(const LinearSde& sde, double s, double t, const State& x, RandomStream& rng);

/// Law of X_tau given X_s = x_s and X_t = x_t, for s < tau < t.
GaussianLaw bridge_moments(const LinearSde& sde, double s, double tau, double t, const State& x_s,
                           const State& x_t);

State sample_bridge(const LinearSde& sde, double s, double tau, double t, const State& x_s,
                    const State& x_t, RandomStream& rng);

/// Stationary law of the Ornstein-Uhlenbeck specialisation.
GaussianLaw stationary_moments(const LinearSde& sde);

/// Symmetric square root with negative eigenvalues clamped to zero. Throws
/// NumericalError if an eigenvalue is below -1e-10 (relative to the scale).
Matrix psd_sqrt(const Matrix& cov);

State sample_gaussian(const GaussianLaw& law, RandomStream& rng);

}  // namespace coxpf
