#include "coxpf/observation_models.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace coxpf {

// ===========================================================================
// Intensity
// ===========================================================================

Intensity Intensity::affine(const Vector& slope, double offset) {
    if (!slope.allFinite() || !std::isfinite(offset)) throw InvalidArgument("non-finite affine intensity");
    Intensity f;
    f.kind_ = Kind::affine;
    f.slope_ = slope;
    f.offset_ = offset;
    return f;
}

Intensity Intensity::affine(double slope, double offset) {
    Vector s(1);
    s[0] = slope;
    return affine(s, offset);
}

Intensity Intensity::exponential_depth(double rate0, double decay_length, int axis) {
    if (!(rate0 > 0.0) || !(decay_length > 0.0) || !std::isfinite(rate0) || !std::isfinite(decay_length))
        throw InvalidArgument("exponential intensity needs rate0 > 0 and decay_length > 0");
    if (axis < 0 || axis >= kMaxDim) throw InvalidArgument("exponential intensity axis out of range");
    Intensity f;
    f.kind_ = Kind::exponential_depth;
    f.rate0_ = rate0;
    f.decay_ = decay_length;
    f.axis_ = axis;
    return f;
}

Intensity Intensity::constant(double rate) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw InvalidArgument("constant intensity must be finite and >= 0");
    Intensity f;
    f.kind_ = Kind::constant;
    f.offset_ = rate;
    return f;
}

Intensity Intensity::custom(std::function<double(const State&)> fn, std::optional<double> lipschitz) {
    if (!fn) throw InvalidArgument("custom intensity needs a callable");
    Intensity f;
    f.kind_ = Kind::custom;
    f.fn_ = std::move(fn);
    f.custom_lipschitz_ = lipschitz;
    return f;
}

double Intensity::raw(const State& x) const {
    switch (kind_) {
        case Kind::affine: {
            if (x.size() < slope_.size()) throw InvalidArgument("state shorter than intensity slope");
            double v = offset_;
            for (int i = 0; i < slope_.size(); ++i) v += slope_[i] * x[i];
            return v;
        }
        case Kind::exponential_depth:
            if (x.size() <= axis_) throw InvalidArgument("state has no depth coordinate");
            return rate0_ * std::exp(-x[axis_] / decay_);
        case Kind::constant: return offset_;
        case Kind::custom: return fn_(x);
    }
    return 0.0;
}

void Intensity::fail(const State& x, double v) const {
    throw IntensityError("intensity is negative or non-finite (" + std::to_string(v) + ") at state " + format_state(x), x);
}

std::optional<double> Intensity::lipschitz_hint() const {
    switch (kind_) {
        case Kind::affine: return slope_.norm();
        case Kind::exponential_depth: return rate0_ / decay_;
        case Kind::constant: return 0.0;
        case Kind::custom: return custom_lipschitz_;
    }
    return std::nullopt;
}

// ===========================================================================
// Born-Wolf point spread function
// ===========================================================================

namespace {

using GL20 = boost::math::quadrature::gauss<double, 20>;

inline double catmull_rom(double p0, double p1, double p2, double p3, double t) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    return 0.5 * ((-t3 + 2.0 * t2 - t) * p0 + (3.0 * t3 - 5.0 * t2 + 2.0) * p1 +
                  (-3.0 * t3 + 4.0 * t2 + t) * p2 + (t3 - t2) * p3);
}

// index reflected about zero, since q is even in both x3 and r
inline int reflect(int i) { return i < 0 ? -i : i; }

}  // namespace

BornWolfPsf::BornWolfPsf(BornWolfParams params, PsfCacheOptions cache)
    : params_(params), cache_(cache), violations_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
    if (!(params_.numerical_aperture > 0.0) || !(params_.wavelength > 0.0) || !(params_.immersion_index > 0.0))
        throw InvalidArgument("Born-Wolf parameters must be positive");
    if (params_.quadrature_nodes < 64) throw InvalidArgument("Born-Wolf quadrature needs at least 64 nodes");
    const double det = params_.magnification.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-300) throw InvalidArgument("magnification matrix is singular");
    inverse_magnification_ = params_.magnification.inverse();
    inverse_det_ = 1.0 / std::abs(det);

    const double na = params_.numerical_aperture;
    const double le = params_.wavelength;
    k_ = 2.0 * std::numbers::pi * na / le;
    psi_ = std::numbers::pi * na * na / (params_.immersion_index * le);
    prefactor_ = 4.0 * std::numbers::pi * na * na / (le * le);

    if (!cache_.enabled) return;
    if (!(cache_.depth_step > 0.0) || !(cache_.radius_step > 0.0) || !(cache_.max_depth > 0.0) ||
        !(cache_.max_radius > 0.0))
        throw InvalidArgument("invalid PSF cache options");

    // two guard knots past the covered range for the cubic stencil
    n_depth_ = static_cast<int>(std::ceil(cache_.max_depth / cache_.depth_step)) + 3;
    n_radius_ = static_cast<int>(std::ceil(cache_.max_radius / cache_.radius_step)) + 3;
    const double depth_top = (n_depth_ - 1) * cache_.depth_step;
    const double radius_top = (n_radius_ - 1) * cache_.radius_step;

    const double omega = k_ * radius_top + 2.0 * psi_ * depth_top;
    const int panels = std::max((params_.quadrature_nodes + 19) / 20, static_cast<int>(std::ceil(omega / 4.0)) + 1);
    const auto& xs = GL20::abscissa();
    const auto& ws = GL20::weights();
    std::vector<double> rho, w;
    const double h = 1.0 / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * h;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            for (double sgn : {-1.0, 1.0}) {
                rho.push_back(mid + sgn * 0.5 * h * xs[i]);
                w.push_back(0.5 * h * ws[i]);
            }
        }
    }
    const int nn = static_cast<int>(rho.size());
    Eigen::MatrixXd bessel(n_radius_, nn);
    for (int i = 0; i < n_radius_; ++i) {
        const double r = i * cache_.radius_step;
        for (int j = 0; j < nn; ++j) bessel(i, j) = w[j] * rho[j] * std::cyl_bessel_j(0.0, k_ * r * rho[j]);
    }
    Eigen::MatrixXd cos_phase(nn, n_depth_), sin_phase(nn, n_depth_);
    for (int d = 0; d < n_depth_; ++d) {
        const double z = d * cache_.depth_step;
        for (int j = 0; j < nn; ++j) {
            const double ph = psi_ * z * rho[j] * rho[j];
            cos_phase(j, d) = std::cos(ph);
            sin_phase(j, d) = std::sin(ph);
        }
    }
    const Eigen::MatrixXd re = bessel * cos_phase;
    const Eigen::MatrixXd im = bessel * sin_phase;
    table_.resize(static_cast<std::size_t>(n_depth_) * n_radius_);
    for (int d = 0; d < n_depth_; ++d)
        for (int i = 0; i < n_radius_; ++i)
            table_[static_cast<std::size_t>(d) * n_radius_ + i] = prefactor_ * (re(i, d) * re(i, d) + im(i, d) * im(i, d));

    // rejection-envelope constants per depth interval
    const int n_env = static_cast<int>(std::ceil(cache_.max_depth / envelope_depth_step_));
    envelope_table_.assign(n_env, 0.0);
    const double scan_top = cache_.max_radius;
    for (int e = 0; e < n_env; ++e) {
        double worst = 0.0;
        for (int sub = 0; sub <= 4; ++sub) {
            const double z = std::min((e + 0.25 * sub) * envelope_depth_step_, cache_.max_depth);
            const double s = envelope_scale(z);
            for (double r = 0.0; r <= scan_top; r += 0.005) {
                const double f = 1.0 / (2.0 * std::numbers::pi * s * s) * std::pow(1.0 + r * r / (s * s), -1.5);
                worst = std::max(worst, lookup(z, r) / f);
            }
        }
        envelope_table_[e] = 1.3 * worst;
    }
}

double BornWolfPsf::exact_radial(double x3, double r, int min_nodes) const {
    if (!std::isfinite(x3) || !std::isfinite(r)) throw NumericalError("non-finite PSF argument");
    r = std::abs(r);
    const double a = k_ * r;
    const double b = psi_ * std::abs(x3);
    if (min_nodes == 0 && a >= 150.0 && 2.0 * b <= 0.7 * a) {
        // Lommel-type series: int_0^1 rho J0(a rho) e^{i b rho^2} drho
        //   = e^{ib} sum_n (-2ib)^n J_{n+1}(a) / a^{n+1}
        // J_n by forward recurrence, stable while n < a
        double j_prev = std::cyl_bessel_j(0.0, a);
        double j_cur = std::cyl_bessel_j(1.0, a);
        std::complex<double> sum = 0.0, coef = 1.0 / a;
        const std::complex<double> step(0.0, -2.0 * b / a);
        for (int n = 0; n < 140; ++n) {
            const std::complex<double> term = coef * j_cur;
            sum += term;
            coef *= step;
            // |J_n| <= 1 and |step| <= 0.7, so the tail is below 4 |coef|
            if (std::abs(coef) <= 1e-17 * std::abs(sum)) break;
            const double j_next = 2.0 * (n + 1) / a * j_cur - j_prev;
            j_prev = j_cur;
            j_cur = j_next;
        }
        const double q = prefactor_ * std::norm(sum);
        if (!std::isfinite(q)) throw NumericalError("non-finite PSF value");
        return q;
    }
    const int nodes = std::max(params_.quadrature_nodes, min_nodes);
    const double omega = k_ * r + 2.0 * psi_ * std::abs(x3);
    const int panels = std::max((nodes + 19) / 20, static_cast<int>(std::ceil(omega / 4.0)) + 1);
    const auto& xs = GL20::abscissa();
    const auto& ws = GL20::weights();
    const double h = 1.0 / panels;
    double re = 0.0, im = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * h;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            for (double sgn : {-1.0, 1.0}) {
                const double rho = mid + sgn * 0.5 * h * xs[i];
                const double amp = 0.5 * h * ws[i] * rho * std::cyl_bessel_j(0.0, k_ * r * rho);
                const double ph = psi_ * x3 * rho * rho;
                re += amp * std::cos(ph);
                im += amp * std::sin(ph);
            }
        }
    }
    const double q = prefactor_ * (re * re + im * im);
    if (!std::isfinite(q)) throw NumericalError("non-finite PSF value");
    return q;
}

double BornWolfPsf::lookup(double x3, double r) const {
    const double fz = x3 / cache_.depth_step;
    const double fr = r / cache_.radius_step;
    const int iz = static_cast<int>(fz);
    const int ir = static_cast<int>(fr);
    const double tz = fz - iz;
    const double tr = fr - ir;
    double rows[4];
    for (int a = 0; a < 4; ++a) {
        const double* row = &table_[static_cast<std::size_t>(reflect(iz - 1 + a)) * n_radius_];
        rows[a] = catmull_rom(row[reflect(ir - 1)], row[ir], row[ir + 1], row[ir + 2], tr);
    }
    return std::max(0.0, catmull_rom(rows[0], rows[1], rows[2], rows[3], tz));
}

double BornWolfPsf::radial(double x3, double r) const {
    x3 = std::abs(x3);
    r = std::abs(r);
    if (cache_.enabled && x3 <= cache_.max_depth && r <= cache_.max_radius) return lookup(x3, r);
    return exact_radial(x3, r);
}

double BornWolfPsf::mark_density(const State& x, const Eigen::Vector2d& y) const {
    if (x.size() < 3) throw InvalidArgument("Born-Wolf marks need a 3D state");
    const Eigen::Vector2d u = inverse_magnification_ * y - Eigen::Vector2d(x[0], x[1]);
    return inverse_det_ * radial(x[2], u.norm());
}

double BornWolfPsf::envelope_scale(double x3) const {
    const double na = params_.numerical_aperture;
    return std::max(params_.wavelength / (2.0 * na), std::abs(x3) * na / params_.immersion_index);
}

double BornWolfPsf::envelope_constant(double x3) const {
    x3 = std::abs(x3);
    if (cache_.enabled && x3 < cache_.max_depth) {
        const int e = std::min(static_cast<int>(x3 / envelope_depth_step_), static_cast<int>(envelope_table_.size()) - 1);
        return envelope_table_[e];
    }
    const double s = envelope_scale(x3);
    double worst = 0.0;
    for (double r = 0.0; r <= 4.0 * s + 4.0; r += 0.01) {
        const double f = 1.0 / (2.0 * std::numbers::pi * s * s) * std::pow(1.0 + r * r / (s * s), -1.5);
        worst = std::max(worst, radial(x3, r) / f);
    }
    return 1.3 * worst;
}

Eigen::Vector2d BornWolfPsf::sample_mark(const State& x, RandomStream& rng) const {
    if (x.size() < 3) throw InvalidArgument("Born-Wolf marks need a 3D state");
    const double s = envelope_scale(x[2]);
    const double c = envelope_constant(x[2]);
    for (int iter = 0; iter < 100000; ++iter) {
        // radial 2D Cauchy draw: P(R > r) = (1 + r^2/s^2)^(-1/2)
        const double v = rng.uniform();
        const double r = s * std::sqrt(1.0 / (v * v) - 1.0);
        const double theta = 2.0 * std::numbers::pi * rng.uniform();
        const double f = 1.0 / (2.0 * std::numbers::pi * s * s) * std::pow(1.0 + r * r / (s * s), -1.5);
        const double ratio = radial(x[2], r) / (c * f);
        if (ratio > 1.0) violations_->fetch_add(1, std::memory_order_relaxed);
        if (rng.uniform() < ratio) {
            const Eigen::Vector2d obj(x[0] + r * std::cos(theta), x[1] + r * std::sin(theta));
            return params_.magnification * obj;
        }
    }
    throw NumericalError("PSF rejection sampler exceeded 1e5 proposals at depth " + std::to_string(x[2]));
}

BornWolfPsf::DiscMoments BornWolfPsf::disc_moments(double x3, double radius) const {
    if (!(radius > 0.0)) throw InvalidArgument("disc radius must be positive");
    const int panels = static_cast<int>(std::ceil(k_ * radius)) + 4;
    const auto& xs = GL20::abscissa();
    const auto& ws = GL20::weights();
    const double h = radius / panels;
    double m0 = 0.0, m2 = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * h;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            for (double sgn : {-1.0, 1.0}) {
                const double r = mid + sgn * 0.5 * h * xs[i];
                const double wq = 0.5 * h * ws[i] * 2.0 * std::numbers::pi * r * exact_radial(x3, r);
                m0 += wq;
                m2 += wq * r * r;
            }
        }
    }
    return {m0, std::sqrt(m2 / m0)};
}

// ===========================================================================
// Mark models
// ===========================================================================

MarkModel MarkModel::none() { return {}; }

MarkModel MarkModel::gaussian(double sd, int dim) {
    if (!(sd > 0.0) || !std::isfinite(sd)) throw InvalidArgument("mark sd must be positive");
    if (dim < 1 || dim > kMaxDim) throw InvalidArgument("mark dimension out of range");
    MarkModel m;
    m.kind_ = Kind::gaussian;
    m.sd_ = sd;
    m.dim_ = dim;
    return m;
}

MarkModel MarkModel::born_wolf(std::shared_ptr<const BornWolfPsf> psf) {
    if (!psf) throw InvalidArgument("Born-Wolf mark model needs a PSF");
    MarkModel m;
    m.kind_ = Kind::born_wolf;
    m.dim_ = 2;
    m.psf_ = std::move(psf);
    return m;
}

int MarkModel::mark_dim() const { return dim_; }

double MarkModel::density(const State& x, const Vector& y) const {
    switch (kind_) {
        case Kind::none: return 1.0;
        case Kind::gaussian: {
            if (y.size() != dim_ || x.size() < dim_) throw InvalidArgument("mark/state dimension mismatch");
            double q = 0.0;
            for (int i = 0; i < dim_; ++i) {
                const double z = (y[i] - x[i]) / sd_;
                q += z * z;
            }
            return std::exp(-0.5 * q) / std::pow(std::sqrt(2.0 * std::numbers::pi) * sd_, dim_);
        }
        case Kind::born_wolf:
            if (y.size() != 2) throw InvalidArgument("Born-Wolf marks are 2D");
            return psf_->mark_density(x, Eigen::Vector2d(y[0], y[1]));
    }
    return 0.0;
}

Vector MarkModel::sample(const State& x, RandomStream& rng) const {
    switch (kind_) {
        case Kind::none: return Vector(0);
        case Kind::gaussian: {
            Vector y(dim_);
            for (int i = 0; i < dim_; ++i) y[i] = x[i] + sd_ * rng.normal();
            return y;
        }
        case Kind::born_wolf: {
            const Eigen::Vector2d y = psf_->sample_mark(x, rng);
            Vector out(2);
            out << y[0], y[1];
            return out;
        }
    }
    return Vector(0);
}

}  // namespace coxpf
