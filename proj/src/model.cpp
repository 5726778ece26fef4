#include "coxpf/model.hpp"

#include <cmath>

namespace coxpf {

void ObservationSet::validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("observation horizon must be positive");
    if (marks.size() != times.size()) throw InvalidArgument("observation times and marks differ in length");
    double prev = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        if (!std::isfinite(t) || t <= 0.0 || t > horizon)
            throw InvalidArgument("observation time " + std::to_string(t) + " outside (0, T]");
        if (i > 0 && t == prev) throw InvalidArgument("duplicate observation time " + std::to_string(t));
        if (i > 0 && t < prev) throw InvalidArgument("observation times are not increasing");
        if (!marks[i].allFinite()) throw InvalidArgument("non-finite mark");
        prev = t;
    }
}

InitialLaw InitialLaw::point(const Vector& x0) {
    const int n = static_cast<int>(x0.size());
    return {x0, Matrix::Zero(n, n)};
}

State InitialLaw::sample(RandomStream& rng) const {
    if (deterministic()) return mean;
    return sample_gaussian({mean, covariance}, rng);
}

StateSpaceModel benchmark_model(double sigma_y, double drift) {
    Vector b(1);
    b[0] = drift;
    return {LinearSde::brownian(b), InitialLaw::point(Vector::Zero(1)), Intensity::affine(1.0, 10.0),
            MarkModel::gaussian(sigma_y, 1)};
}

StateSpaceModel microscopy_model(const MicroscopyParams& p) {
    return microscopy_model(p, std::make_shared<const BornWolfPsf>(p.optics, p.cache));
}

StateSpaceModel microscopy_model(const MicroscopyParams& p, std::shared_ptr<const BornWolfPsf> psf) {
    if (p.rates.size() != 3 || p.means.size() != 3) throw InvalidArgument("microscopy model is 3D");
    LinearSde sde = LinearSde::ornstein_uhlenbeck(p.rates, p.means);
    InitialLaw init;
    if (p.initial_variance.size() == 0) {
        const GaussianLaw st = stationary_moments(sde);
        init = {st.mean, st.covariance};
    } else {
        if (p.initial_variance.size() != 3 || (p.initial_variance.array() < 0.0).any())
            throw InvalidArgument("initial variance must be 3 non-negative numbers");
        init = {p.means, Matrix(p.initial_variance.asDiagonal())};
    }
    return {std::move(sde), init, Intensity::exponential_depth(p.rate0, p.decay_length, 2),
            MarkModel::born_wolf(std::move(psf))};
}

}  // namespace coxpf
