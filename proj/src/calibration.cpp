#include "coxpf/calibration.hpp"

#include "coxpf/oracles.hpp"

#include <cmath>
#include <limits>

namespace coxpf {

void PmmhConfig::validate() const {
    const int d = dimension();
    if (d < 1 || d > kMaxDim) throw InvalidArgument("PMMH needs between 1 and 6 parameters");
    for (const auto& p : parameters) {
        if (!std::isfinite(p.lower) || !std::isfinite(p.upper) || !(p.lower < p.upper))
            throw InvalidArgument("parameter '" + p.name + "' needs finite bounds with lower < upper");
        if (!(p.initial > p.lower && p.initial < p.upper))
            throw InvalidArgument("initial value of '" + p.name + "' lies outside its prior support");
    }
    if (!(iterations > burn_in) || burn_in < 0) throw InvalidArgument("need iterations > burn_in >= 0");
    if (initial_covariance.size() != 0 && (initial_covariance.rows() != d || initial_covariance.cols() != d))
        throw InvalidArgument("initial proposal covariance has the wrong shape");
    if (warmup < 2) throw InvalidArgument("adaptation warm-up must be at least 2 draws");
}

double Chain::acceptance_rate(long from) const {
    if (accepted.size() <= static_cast<std::size_t>(from)) return 0.0;
    double acc = 0.0;
    for (std::size_t i = from; i < accepted.size(); ++i) acc += accepted[i];
    return acc / static_cast<double>(accepted.size() - from);
}

std::vector<double> Chain::column(int j, long from) const {
    std::vector<double> out;
    for (std::size_t i = from; i < draws.size(); ++i) out.push_back(draws[i][j]);
    return out;
}

namespace {

constexpr double kRegularisation = 1e-6;

Matrix default_initial(int d, const Matrix& given) {
    if (given.size() != 0) return given;
    return 0.1 * Matrix::Identity(d, d);
}

/// Running mean and covariance of the retained draws.
struct RunningMoments {
    long n = 0;
    Vector mean;
    Matrix m2;

    void add(const Vector& x) {
        if (n == 0) {
            mean = Vector::Zero(x.size());
            m2 = Matrix::Zero(x.size(), x.size());
        }
        ++n;
        const Vector delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean).transpose();
    }
    Matrix covariance() const { return m2 / static_cast<double>(n - 1); }
};

Matrix haario(const Matrix& cov) {
    const int d = static_cast<int>(cov.rows());
    const double sd = 2.38 * 2.38 / d;
    Matrix c = sd * (cov + kRegularisation * Matrix::Identity(d, d));
    return 0.5 * (c + c.transpose());
}

}  // namespace

Matrix adapt_proposal_covariance(const std::vector<Vector>& draws, const Matrix& initial, long warmup) {
    if (draws.size() < 2) throw InvalidArgument("adaptation needs at least two draws");
    const int d = static_cast<int>(draws.front().size());
    if (static_cast<long>(draws.size()) < warmup) return default_initial(d, initial);
    RunningMoments rm;
    for (const auto& x : draws) rm.add(x);
    return haario(rm.covariance());
}

Chain pmmh_run(const PmmhConfig& cfg, const LogLikelihoodFn& log_likelihood, std::uint64_t seed) {
    cfg.validate();
    const int d = cfg.dimension();
    Chain chain;
    for (const auto& p : cfg.parameters) chain.names.push_back(p.name);

    auto in_support = [&](const Vector& th) {
        for (int j = 0; j < d; ++j)
            if (!(th[j] > cfg.parameters[j].lower && th[j] < cfg.parameters[j].upper)) return false;
        return true;
    };
    auto evaluate = [&](const Vector& th, long iter) {
        try {
            const double ll = log_likelihood(th, splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(iter))));
            if (std::isnan(ll)) throw NumericalError("likelihood backend returned NaN");
            return ll;
        } catch (const std::exception& e) {
            throw Error("PMMH iteration " + std::to_string(iter) + ": " + e.what());
        }
    };

    Vector theta(d);
    for (int j = 0; j < d; ++j) theta[j] = cfg.parameters[j].initial;
    double ll = evaluate(theta, 0);
    if (ll == -std::numeric_limits<double>::infinity())
        throw Error("PMMH: likelihood estimate at the initial value is zero");

    RandomStream rng(seed, stream_id(StreamTag::proposal));
    const Matrix initial = default_initial(d, cfg.initial_covariance);
    Matrix proposal = initial;
    Matrix factor = psd_sqrt(proposal);
    RunningMoments moments;
    moments.add(theta);

    chain.draws.reserve(cfg.iterations);
    for (long it = 1; it <= cfg.iterations; ++it) {
        Vector z(d);
        for (int j = 0; j < d; ++j) z[j] = rng.normal();
        const Vector cand = theta + factor * z;
        const double log_u = std::log(rng.uniform());
        bool accept = false;
        if (in_support(cand)) {
            const double ll_cand = evaluate(cand, it);
            // flat priors cancel inside the support
            if (ll_cand > -std::numeric_limits<double>::infinity() && log_u < ll_cand - ll) {
                accept = true;
                theta = cand;
                ll = ll_cand;
            }
        }
        chain.draws.push_back(theta);
        chain.log_likelihood.push_back(ll);
        chain.accepted.push_back(accept ? 1 : 0);
        chain.proposal_covariance.push_back(proposal);
        moments.add(theta);

        const bool adapt = cfg.adaptation == AdaptationMode::continuous ||
                           (cfg.adaptation == AdaptationMode::burn_in_only && it <= cfg.burn_in);
        if (adapt && moments.n >= cfg.warmup) {
            proposal = haario(moments.covariance());
            factor = psd_sqrt(proposal);
        }
    }
    return chain;
}

double ess(const std::vector<double>& x) {
    const std::size_t M = x.size();
    if (M < 10) throw InvalidArgument("ESS needs at least 10 values");
    double mean = 0.0;
    for (double v : x) {
        if (!std::isfinite(v)) throw InvalidArgument("ESS needs finite values");
        mean += v;
    }
    mean /= static_cast<double>(M);
    std::vector<double> c(M);
    for (std::size_t i = 0; i < M; ++i) c[i] = x[i] - mean;
    auto autocov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t i = 0; i + lag < M; ++i) s += c[i] * c[i + lag];
        return s / static_cast<double>(M);
    };
    const double g0 = autocov(0);
    if (!(g0 > 0.0)) throw InvalidArgument("ESS is undefined for a zero-variance series");
    double total = 0.0;
    for (std::size_t t = 0; 2 * t + 1 < M; ++t) {
        const double pair = (autocov(2 * t) + autocov(2 * t + 1)) / g0;
        if (!(pair > 0.0)) break;
        total += pair;
    }
    const double denom = -1.0 + 2.0 * total;
    if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
    return static_cast<double>(M) / denom;
}

double RmseFit::value(double step, double cost, RmseModel model) const {
    const double tail = model == RmseModel::discretised ? step * step : std::exp(-1.0 / (2.0 * step));
    return c1 / (cost * step) + c2 * tail;
}

RmseFit fit_rmse_model(const std::vector<std::pair<double, double>>& points, double cost, RmseModel model) {
    if (points.size() < 4) throw InvalidArgument("rMSE fit needs at least 4 points");
    if (!(cost > 0.0)) throw InvalidArgument("cost must be positive");
    Eigen::Matrix2d ata = Eigen::Matrix2d::Zero();
    Eigen::Vector2d aty = Eigen::Vector2d::Zero();
    for (const auto& [step, r] : points) {
        if (!(step > 0.0) || !std::isfinite(r)) throw InvalidArgument("rMSE points need positive steps and finite values");
        const Eigen::Vector2d a(1.0 / (cost * step), model == RmseModel::discretised ? step * step : std::exp(-1.0 / (2.0 * step)));
        ata += a * a.transpose();
        aty += a * r;
    }
    const Eigen::Vector2d c = ata.ldlt().solve(aty);
    if (!(c[0] > 0.0) || !(c[1] > 0.0))
        throw NumericalError("rMSE model mismatch: fitted coefficients are not positive");
    RmseFit fit{c[0], c[1], 0.0};
    if (model == RmseModel::discretised) {
        fit.optimal_step = std::cbrt(c[0] / (c[1] * cost));
    } else {
        const double arg = c[1] * cost / (2.0 * c[0]);
        if (!(arg > 1.0)) throw NumericalError("rMSE model mismatch: no interior optimum for the Poisson surrogate");
        fit.optimal_step = 1.0 / (2.0 * std::log(arg));
    }
    return fit;
}

LogLikelihoodFn make_filter_backend(ModelFamily family, ObservationSet obs, BackendSpec spec) {
    obs.validate();
    return [family = std::move(family), obs = std::move(obs), spec](const Vector& theta, std::uint64_t seed) {
        const StateSpaceModel model = family(theta);
        FilterOptions opt;
        opt.particles = spec.particles;
        opt.seed = seed;
        opt.threads = spec.threads;
        FilterOutput out;
        switch (spec.kind) {
            case BackendKind::discretised: out = run_discretised_pf(model, obs, spec.step, opt); break;
            case BackendKind::continuous: {
                EstimatorConfig cfg = spec.estimator;
                cfg.step = spec.step;
                out = run_continuous_pf(model, obs, cfg, opt);
                break;
            }
            case BackendKind::exact_weight: out = run_exact_weight_pf(model, obs, spec.step, opt); break;
        }
        return out.log_likelihood;
    };
}

}  // namespace coxpf
