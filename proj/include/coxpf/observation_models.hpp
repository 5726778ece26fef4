#pragma once

#include "coxpf/random.hpp"
#include "coxpf/types.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace coxpf {

class IntensityError : public Error {
public:
    IntensityError(const std::string& what, State x) : Error(what), state(std::move(x)) {}
    State state;
};

/// Cox-process intensity lambda(x).
class Intensity {
public:
    enum class Kind { affine, exponential_depth, constant, custom };

    /// lambda(x) = slope . x + offset
    static Intensity affine(const Vector& slope, double offset);
    static Intensity affine(double slope, double offset);
    /// lambda(x) = rate0 * exp(-x[axis] / decay_length)
    static Intensity exponential_depth(double rate0, double decay_length, int axis = 2);
    static Intensity constant(double rate);
    static Intensity custom(std::function<double(const State&)> fn,
                            std::optional<double> lipschitz = std::nullopt);

    /// Throws IntensityError (carrying x) on a negative or non-finite value.
    double operator()(const State& x) const {
        const double v = raw(x);
        if (!(v >= 0.0) || !std::isfinite(v)) fail(x, v);
        return v;
    }
    double raw(const State& x) const;

    Kind kind() const { return kind_; }
    std::optional<double> lipschitz_hint() const;

    const Vector& slope() const { return slope_; }
    double offset() const { return offset_; }
    double rate0() const { return rate0_; }
    double decay_length() const { return decay_; }
    int axis() const { return axis_; }

private:
    [[noreturn]] void fail(const State& x, double v) const;

    Kind kind_ = Kind::constant;
    Vector slope_;
    double offset_ = 0.0;
    double rate0_ = 0.0;
    double decay_ = 1.0;
    int axis_ = 2;
    std::function<double(const State&)> fn_;
    std::optional<double> custom_lipschitz_;
};

struct BornWolfParams {
    double numerical_aperture = 1.4;
    double wavelength = 0.52;       // emission wavelength, um
    double immersion_index = 1.515;
    Eigen::Matrix2d magnification = 100.0 * Eigen::Matrix2d::Identity();
    int quadrature_nodes = 64;      // minimum nodes for the radial integral
};

struct PsfCacheOptions {
    bool enabled = true;
    double max_depth = 10.0;    // um, |x3| covered by the table
    double max_radius = 12.0;   // um
    double depth_step = 0.025;
    double radius_step = 0.0125;
};

/**
 * @brief Born-Wolf defocused point spread function q_{x3}(u).
 *
 * Values come from a bicubic table over (|x3|, |u|) when the point lies
 * inside the tabulated region, and from direct quadrature otherwise or when
 * the table is disabled. The object is immutable after construction.
 */
class BornWolfPsf {
public:
    explicit BornWolfPsf(BornWolfParams params = {}, PsfCacheOptions cache = {});

    const BornWolfParams& params() const { return params_; }
    bool cached() const { return cache_.enabled; }

    /// Uncached evaluation: composite Gauss-Legendre, or a Bessel series far from
    /// the axis. A positive `min_nodes` forces quadrature with at least that many nodes.
    double exact_radial(double x3, double r, int min_nodes = 0) const;
    double radial(double x3, double r) const;
    double operator()(double x3, const Eigen::Vector2d& u) const { return radial(x3, u.norm()); }

    /// Mark density of detector position y for object state x = (x1, x2, x3).
    double mark_density(const State& x, const Eigen::Vector2d& y) const;
    Eigen::Vector2d sample_mark(const State& x, RandomStream& rng) const;

    /// Mass and radial standard deviation of q_{x3} restricted to the disc |u| <= radius.
    struct DiscMoments {
        double mass;
        double radial_sd;
    };
    DiscMoments disc_moments(double x3, double radius) const;

    /// Number of draws where the rejection envelope did not dominate the target.
    std::uint64_t envelope_violations() const { return violations_->load(); }

private:
    double lookup(double x3, double r) const;
    double envelope_scale(double x3) const;
    double envelope_constant(double x3) const;

    BornWolfParams params_;
    PsfCacheOptions cache_;
    double k_ = 0.0;        // 2 pi n_a / lambda_e
    double psi_ = 0.0;      // pi n_a^2 / (n_0 lambda_e)
    double prefactor_ = 0.0;
    Eigen::Matrix2d inverse_magnification_;
    double inverse_det_ = 0.0;
    int n_depth_ = 0;
    int n_radius_ = 0;
    std::vector<double> table_;           // [depth][radius]
    std::vector<double> envelope_table_;  // per depth knot of the envelope grid
    double envelope_depth_step_ = 0.25;
    std::shared_ptr<std::atomic<std::uint64_t>> violations_;
};

/// Observation density g(y | x) and sampler.
class MarkModel {
public:
    enum class Kind { none, gaussian, born_wolf };

    static MarkModel none();
    /// y ~ Normal(x[0..dim), sd^2 I)
    static MarkModel gaussian(double sd, int dim = 1);
    static MarkModel born_wolf(std::shared_ptr<const BornWolfPsf> psf);

    Kind kind() const { return kind_; }
    int mark_dim() const;
    double sd() const { return sd_; }
    const std::shared_ptr<const BornWolfPsf>& psf() const { return psf_; }

    double density(const State& x, const Vector& y) const;
    Vector sample(const State& x, RandomStream& rng) const;

private:
    Kind kind_ = Kind::none;
    double sd_ = 1.0;
    int dim_ = 0;
    std::shared_ptr<const BornWolfPsf> psf_;
};

}  // namespace coxpf
