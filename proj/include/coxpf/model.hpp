#pragma once

#include "coxpf/observation_models.hpp"
#include "coxpf/sde_kernel.hpp"

#include <vector>

namespace coxpf {

/// Marked point-process data on [0, horizon].
struct ObservationSet {
    double horizon = 0.0;
    std::vector<double> times;
    std::vector<Vector> marks;

    std::size_t size() const { return times.size(); }
    /// Throws InvalidArgument unless times are strictly increasing in (0, horizon].
    void validate() const;
};

/// Law of X_0; a zero covariance means a deterministic start.
struct InitialLaw {
    Vector mean;
    Matrix covariance;

    static InitialLaw point(const Vector& x0);
    bool deterministic() const { return covariance.isZero(0.0); }
    State sample(RandomStream& rng) const;
};

struct StateSpaceModel {
    LinearSde dynamics;
    InitialLaw initial;
    Intensity intensity;
    MarkModel marks;

    int dimension() const { return dynamics.dimension(); }
    /// lambda(x) g(y | x) for an arrival with mark y.
    double observation_factor(const State& x, const Vector& y) const {
        return intensity(x) * marks.density(x, y);
    }
};

/// Brownian x_0 = 0, lambda(x) = x + 10, Gaussian marks with sd sigma_y.
StateSpaceModel benchmark_model(double sigma_y = 1.0, double drift = 0.0);

struct MicroscopyParams {
    Vector rates = (Vector(3) << 1.0, 1.0, 4.0).finished();
    Vector means = (Vector(3) << 0.0, 0.0, 2.0).finished();
    /// empty: stationary variance 1/(2 rate)
    Vector initial_variance;
    double rate0 = 100.0;
    double decay_length = 20.0;
    BornWolfParams optics;
    PsfCacheOptions cache;
};

StateSpaceModel microscopy_model(const MicroscopyParams& p);
/// Same as above but sharing an existing PSF table.
StateSpaceModel microscopy_model(const MicroscopyParams& p, std::shared_ptr<const BornWolfPsf> psf);

}  // namespace coxpf
