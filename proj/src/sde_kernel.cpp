#include "coxpf/sde_kernel.hpp"

#include <cmath>
#include <sstream>

namespace coxpf {

std::string format_state(const Vector& x) {
    std::ostringstream os;
    os.precision(17);
    os << "(";
    for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

namespace {

void check_dim(int n) {
    if (n < 1 || n > kMaxDim) throw InvalidArgument("state dimension must be in [1, " + std::to_string(kMaxDim) + "]");
}

void check_interval(double s, double t) {
    if (!std::isfinite(s) || !std::isfinite(t)) throw InvalidArgument("non-finite time");
    if (s < 0.0 || t < s) throw InvalidArgument("transition interval must satisfy 0 <= s <= t");
}

bool is_diagonal(const Matrix& m) {
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j)
            if (i != j && m(i, j) != 0.0) return false;
    return true;
}

struct Moments {
    Matrix phi;
    Vector a;
    Matrix r;
};

Moments generic_derivative(const LinearSde& sde, double t, const Moments& y) {
    const Matrix b1 = sde.drift_matrix(t);
    const Matrix sig = sde.diffusion_matrix(t);
    Moments d;
    d.phi = b1 * y.phi;
    d.a = b1 * y.a + sde.drift_constant();
    d.r = b1 * y.r + y.r * b1.transpose() + sig * sig.transpose();
    return d;
}

Moments axpy(const Moments& y, double h, const Moments& d) {
    return {y.phi + h * d.phi, y.a + h * d.a, y.r + h * d.r};
}

}  // namespace

LinearSde LinearSde::brownian(int dim) {
    check_dim(dim);
    return brownian(Vector::Zero(dim));
}

LinearSde LinearSde::brownian(const Vector& drift) {
    check_dim(static_cast<int>(drift.size()));
    if (!drift.allFinite()) throw InvalidArgument("non-finite Brownian drift");
    LinearSde s;
    s.kind_ = Kind::brownian;
    s.b0_ = drift;
    return s;
}

LinearSde LinearSde::ornstein_uhlenbeck(const Vector& rates, const Vector& means) {
    check_dim(static_cast<int>(rates.size()));
    if (rates.size() != means.size()) throw InvalidArgument("OU rates and means differ in length");
    if (!rates.allFinite() || !means.allFinite()) throw InvalidArgument("non-finite OU parameters");
    if ((rates.array() <= 0.0).any()) throw InvalidArgument("OU rates must be positive");
    LinearSde s;
    s.kind_ = Kind::ornstein_uhlenbeck;
    s.rates_ = rates;
    s.means_ = means;
    s.b0_ = (rates.array() * means.array()).matrix();
    return s;
}

LinearSde LinearSde::generic(const Vector& b0, MatrixFn b1, MatrixFn sigma, int steps_per_unit) {
    check_dim(static_cast<int>(b0.size()));
    if (!b0.allFinite()) throw InvalidArgument("non-finite drift constant");
    if (!b1 || !sigma) throw InvalidArgument("generic SDE needs b1 and sigma");
    if (steps_per_unit < 1) throw InvalidArgument("steps_per_unit must be positive");
    LinearSde s;
    s.kind_ = Kind::generic;
    s.b0_ = b0;
    s.b1_ = std::move(b1);
    s.sigma_ = std::move(sigma);
    s.steps_per_unit_ = steps_per_unit;
    return s;
}

Matrix LinearSde::drift_matrix(double t) const {
    const int n = dimension();
    switch (kind_) {
        case Kind::brownian: return Matrix::Zero(n, n);
        case Kind::ornstein_uhlenbeck: return Matrix((-rates_).asDiagonal());
        case Kind::generic: {
            Matrix m = b1_(t);
            if (m.rows() != n || m.cols() != n || !m.allFinite())
                throw InvalidArgument("drift matrix has wrong shape or non-finite entries");
            return m;
        }
    }
    return {};
}

Matrix LinearSde::diffusion_matrix(double t) const {
    const int n = dimension();
    if (kind_ != Kind::generic) return Matrix::Identity(n, n);
    Matrix m = sigma_(t);
    if (m.rows() != n || !m.allFinite()) throw InvalidArgument("diffusion matrix has wrong shape or non-finite entries");
    return m;
}

GaussianTransition transition_moments(const LinearSde& sde, double s, double t) {
    check_interval(s, t);
    const int n = sde.dimension();
    const double h = t - s;
    GaussianTransition g;
    g.start = s;
    g.end = t;
    switch (sde.kind()) {
        case LinearSde::Kind::brownian:
            g.transition = Matrix::Identity(n, n);
            g.offset = sde.drift_constant() * h;
            g.covariance = h * Matrix::Identity(n, n);
            break;
        case LinearSde::Kind::ornstein_uhlenbeck: {
            g.transition = Matrix::Zero(n, n);
            g.offset.resize(n);
            g.covariance = Matrix::Zero(n, n);
            for (int i = 0; i < n; ++i) {
                const double phi = sde.rates()[i];
                const double decay = std::exp(-phi * h);
                g.transition(i, i) = decay;
                g.offset[i] = -sde.means()[i] * std::expm1(-phi * h);
                g.covariance(i, i) = -std::expm1(-2.0 * phi * h) / (2.0 * phi);
            }
            break;
        }
        case LinearSde::Kind::generic: {
            Moments y{Matrix::Identity(n, n), Vector::Zero(n), Matrix::Zero(n, n)};
            if (h > 0.0) {
                const int steps = std::max(16, static_cast<int>(std::ceil(h * sde.steps_per_unit())));
                const double dt = h / steps;
                for (int k = 0; k < steps; ++k) {
                    const double tk = s + k * dt;
                    const Moments k1 = generic_derivative(sde, tk, y);
                    const Moments k2 = generic_derivative(sde, tk + 0.5 * dt, axpy(y, 0.5 * dt, k1));
                    const Moments k3 = generic_derivative(sde, tk + 0.5 * dt, axpy(y, 0.5 * dt, k2));
                    const Moments k4 = generic_derivative(sde, tk + dt, axpy(y, dt, k3));
                    y.phi += dt / 6.0 * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi);
                    y.a += dt / 6.0 * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a);
                    y.r += dt / 6.0 * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r);
                }
            }
            g.transition = y.phi;
            g.offset = y.a;
            g.covariance = 0.5 * (y.r + y.r.transpose());
            break;
        }
    }
    return g;
}

Matrix psd_sqrt(const Matrix& cov) {
    const int n = static_cast<int>(cov.rows());
    if (is_diagonal(cov)) {
        Matrix out = Matrix::Zero(n, n);
        const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
        for (int i = 0; i < n; ++i) {
            const double v = cov(i, i);
            if (v < -1e-10 * scale) throw NumericalError("covariance has a negative eigenvalue " + std::to_string(v));
            out(i, i) = std::sqrt(std::max(v, 0.0));
        }
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericalError("eigen-decomposition of covariance failed");
    Vector ev = eig.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    if (ev.minCoeff() < -1e-10 * scale)
        throw NumericalError("covariance has a negative eigenvalue " + std::to_string(ev.minCoeff()));
    ev = ev.cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

State sample_gaussian(const GaussianLaw& law, RandomStream& rng) {
    const int n = static_cast<int>(law.mean.size());
    Vector z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    return law.mean + psd_sqrt(law.covariance) * z;
}

State sample_transition(const LinearSde& sde, double s, double t, const State& x, RandomStream& rng) {
    check_interval(s, t);
    const int n = sde.dimension();
    if (x.size() != n) throw InvalidArgument("state dimension mismatch");
    const double h = t - s;
    if (h == 0.0) return x;
    switch (sde.kind()) {
        case LinearSde::Kind::brownian: {
            const double sd = std::sqrt(h);
            State out(n);
            for (int i = 0; i < n; ++i) out[i] = x[i] + sde.drift_constant()[i] * h + sd * rng.normal();
            return out;
        }
        case LinearSde::Kind::ornstein_uhlenbeck: {
            State out(n);
            for (int i = 0; i < n; ++i) {
                const double phi = sde.rates()[i];
                const double mu = sde.means()[i];
                const double sd = std::sqrt(-std::expm1(-2.0 * phi * h) / (2.0 * phi));
                out[i] = mu + std::exp(-phi * h) * (x[i] - mu) + sd * rng.normal();
            }
            return out;
        }
        case LinearSde::Kind::generic: {
            const GaussianTransition g = transition_moments(sde, s, t);
            return sample_gaussian({g.mean(x), g.covariance}, rng);
        }
    }
    return x;
}

GaussianLaw bridge_moments(const LinearSde& sde, double s, double tau, double t, const State& x_s,
                           const State& x_t) {
    if (!(s < t)) throw InvalidArgument("bridge interval has zero length");
    if (!(s < tau && tau < t)) throw InvalidArgument("bridge time must lie strictly inside (s, t)");
    const GaussianTransition first = transition_moments(sde, s, tau);
    const GaussianTransition second = transition_moments(sde, tau, t);
    // condition the forward law of X_tau on the observed endpoint X_t
    const Vector mu1 = first.mean(x_s);
    const Matrix& p1 = first.covariance;
    const Matrix& phi2 = second.transition;
    const Matrix innovation_cov = phi2 * p1 * phi2.transpose() + second.covariance;
    Eigen::LDLT<Matrix> ldlt(innovation_cov);
    if (ldlt.info() != Eigen::Success) throw NumericalError("singular bridge covariance");
    const Matrix cross = p1 * phi2.transpose();
    const Matrix gain = ldlt.solve(cross.transpose()).transpose();
    GaussianLaw law;
    law.mean = mu1 + gain * (x_t - phi2 * mu1 - second.offset);
    Matrix cov = p1 - gain * cross.transpose();
    law.covariance = 0.5 * (cov + cov.transpose());
    return law;
}

State sample_bridge(const LinearSde& sde, double s, double tau, double t, const State& x_s,
                    const State& x_t, RandomStream& rng) {
    return sample_gaussian(bridge_moments(sde, s, tau, t, x_s, x_t), rng);
}

GaussianLaw stationary_moments(const LinearSde& sde) {
    if (sde.kind() != LinearSde::Kind::ornstein_uhlenbeck)
        throw InvalidArgument("stationary law exists only for the Ornstein-Uhlenbeck specialisation");
    const int n = sde.dimension();
    GaussianLaw law;
    law.mean = sde.means();
    law.covariance = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) law.covariance(i, i) = 1.0 / (2.0 * sde.rates()[i]);
    return law;
}

}  // namespace coxpf
