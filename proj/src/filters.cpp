#include "coxpf/filters.hpp"

#include "coxpf/oracles.hpp"
#include "coxpf/parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <numeric>

namespace coxpf {

// ===========================================================================
// Grid and resampling
// ===========================================================================

TimeGrid build_time_grid(const ObservationSet& obs, double step) {
    if (!(step > 0.0) || !std::isfinite(step)) throw InvalidArgument("grid step must be positive");
    obs.validate();
    const double T = obs.horizon;
    // a remaining gap within this slack of the step is taken in one go rather
    // than leaving a round-off sliver
    const double slack = step * 1e-9;
    TimeGrid g;
    g.times.push_back(0.0);
    g.observation.push_back(-1);
    double anchor = 0.0;
    long j = 0;
    std::size_t next_obs = 0;
    while (g.times.back() < T) {
        const double prev = g.times.back();
        const double candidate = anchor + static_cast<double>(j + 1) * step;
        if (next_obs < obs.times.size() && obs.times[next_obs] <= std::max(candidate, prev + step + slack)) {
            const double t = obs.times[next_obs];
            g.times.push_back(t);
            g.observation.push_back(static_cast<int>(next_obs));
            ++next_obs;
            anchor = t;
            j = 0;
        } else if (T <= std::max(candidate, prev + step + slack)) {
            g.times.push_back(T);
            g.observation.push_back(-1);
        } else {
            g.times.push_back(candidate);
            g.observation.push_back(-1);
            ++j;
        }
    }
    return g;
}

std::vector<std::size_t> systematic_resample(const std::vector<double>& weights, RandomStream& rng) {
    const std::size_t n = weights.size();
    if (n == 0) throw InvalidArgument("systematic_resample: no weights");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("systematic_resample: weights must be finite and >= 0");
        total += w;
    }
    if (!(total > 0.0)) throw InvalidArgument("systematic_resample: all weights are zero");
    std::vector<std::size_t> out(n);
    const double u0 = rng.uniform();
    double cum = weights[0] / total * static_cast<double>(n);
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(i) + u0;
        while (cum < u && j + 1 < n) {
            ++j;
            cum += weights[j] / total * static_cast<double>(n);
        }
        out[i] = j;
    }
    return out;
}

// ===========================================================================
// Filter engine
// ===========================================================================

double FilterOutput::likelihood() const { return std::exp(log_likelihood); }

namespace {

void check_model(const StateSpaceModel& model, const ObservationSet& obs) {
    const int n = model.dimension();
    if (model.initial.mean.size() != n || model.initial.covariance.rows() != n)
        throw InvalidArgument("initial law dimension does not match the dynamics");
    for (const auto& y : obs.marks)
        if (model.marks.kind() != MarkModel::Kind::none && y.size() != model.marks.mark_dim())
            throw InvalidArgument("mark dimension does not match the mark model");
}

NodeMoments cloud_moments(double t, const std::vector<State>& xs, const std::vector<double>* w) {
    const int n = static_cast<int>(xs.front().size());
    Vector sum = Vector::Zero(n), sq = Vector::Zero(n);
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double wi = w ? (*w)[i] : 1.0;
        total += wi;
        sum += wi * xs[i];
    }
    NodeMoments m{t, sum / total, Vector::Zero(n)};
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double wi = w ? (*w)[i] : 1.0;
        sq += wi * (xs[i] - m.mean).cwiseAbs2();
    }
    m.sd = (sq / total).cwiseSqrt();
    return m;
}

}  // namespace

FilterOutput run_filter(const StateSpaceModel& model, const ObservationSet& obs, double step,
                        WeightScheme scheme, const EstimatorConfig& cfg, const FilterOptions& opt) {
    check_model(model, obs);
    if (opt.particles < 1) throw InvalidArgument("need at least one particle");
    if (scheme == WeightScheme::exact) {
        if (model.dynamics.kind() != LinearSde::Kind::brownian || model.dimension() != 1 ||
            model.intensity.kind() != Intensity::Kind::affine)
            throw InvalidArgument("exact segment weights need a 1D Brownian model with affine intensity");
    }
    if (scheme == WeightScheme::poisson) cfg.validate();

    const std::size_t N = opt.particles;
    FilterOutput out;
    out.scheme = scheme;
    out.policy = cfg.policy;
    out.step = step;
    out.particles = N;
    out.grid = build_time_grid(obs, step);
    const TimeGrid& grid = out.grid;
    const std::size_t m = grid.steps();
    const bool track_sign = scheme == WeightScheme::poisson && cfg.policy == NegativePolicy::absolute;
    out.sign_tracked = track_sign;

    std::vector<State> x(N), xn(N);
    parallel_for(N, opt.threads, [&](std::size_t i) {
        RandomStream rng(opt.seed, stream_id(StreamTag::initial, 0, i));
        x[i] = model.initial.sample(rng);
    });
    out.node_moments.push_back(cloud_moments(0.0, x, nullptr));

    std::vector<std::vector<State>> cloud;
    std::vector<std::vector<std::size_t>> ancestry;
    if (opt.store_trajectories) {
        cloud.reserve(m + 1);
        ancestry.reserve(m);
        cloud.push_back(x);
    }

    LipschitzTracker tracker;
    if (scheme == WeightScheme::poisson) {
        tracker = lipschitz_init(model.intensity, x);
        if (tracker.fallback) {
            out.lipschitz_fallback = true;
            if (auto hint = model.intensity.lipschitz_hint()) tracker.value = std::max(*hint, tracker.value);
        }
    }

    std::vector<double> w(N), carry(N, 1.0), ratio(N, 0.0);
    std::vector<int> negative(N, 0), parity(N, 0), parity_next(N, 0);
    std::vector<int> aux(N, 0);
    const double alpha = scheme == WeightScheme::exact ? model.intensity.slope()[0] : 0.0;
    const double beta = scheme == WeightScheme::exact ? model.intensity.offset() : 0.0;

    constexpr double inf = std::numeric_limits<double>::infinity();
    double log_lik = 0.0;
    for (std::size_t k = 1; k <= m; ++k) {
        const double t0 = grid.times[k - 1];
        const double t1 = grid.times[k];
        const double h = t1 - t0;
        const int obs_left = grid.observation[k - 1];
        const int obs_terminal = (k == m) ? grid.observation[m] : -1;
        const double eta = h * std::max(tracker.value, 1e-6);
        if (scheme == WeightScheme::poisson) out.lipschitz.push_back(tracker.value);

        parallel_for(N, opt.threads, [&](std::size_t i) {
            RandomStream rng(opt.seed, stream_id(StreamTag::propagate, k, i));
            // weights are carried as logs so long or intense segments do not underflow
            double lw = 0.0;
            negative[i] = 0;
            switch (scheme) {
                case WeightScheme::riemann:
                    lw = -model.intensity(x[i]) * h;
                    xn[i] = sample_transition(model.dynamics, t0, t1, x[i], rng);
                    break;
                case WeightScheme::poisson: {
                    SegmentEstimate est = poisson_segment_estimate(model.dynamics, model.intensity, eta, t0, t1, x[i], rng);
                    negative[i] = est.negative() ? 1 : 0;
                    aux[i] = est.aux_count;
                    lw = cfg.policy == NegativePolicy::truncate && est.negative() ? -inf : est.log_magnitude;
                    xn[i] = std::move(est.end_state);
                    const double dx = (xn[i] - x[i]).norm();
                    ratio[i] = dx < 1e-12 ? 0.0 : std::abs(model.intensity(xn[i]) - est.start_rate) / dx;
                    break;
                }
                case WeightScheme::exact:
                    xn[i] = sample_transition(model.dynamics, t0, t1, x[i], rng);
                    lw = log_bridge_path_integral_expectation(alpha, beta, t0, t1, x[i][0], xn[i][0]);
                    break;
            }
            if (obs_left >= 0) lw += std::log(model.observation_factor(x[i], obs.marks[obs_left]));
            if (obs_terminal >= 0) lw += std::log(model.observation_factor(xn[i], obs.marks[obs_terminal]));
            if (std::isnan(lw) || lw == inf)
                throw NumericalError("non-finite weight at step " + std::to_string(k) + ", particle " +
                                     std::to_string(i) + ", state " + format_state(x[i]));
            w[i] = lw;
        });

        double shift = -inf;
        for (std::size_t i = 0; i < N; ++i) shift = std::max(shift, w[i]);
        if (shift == -inf) shift = 0.0;
        for (std::size_t i = 0; i < N; ++i) w[i] = std::exp(w[i] - shift);

        // barrier: reductions in particle order so results do not depend on threads
        double sum_cw = 0.0, sum_c = 0.0, sum_w = 0.0, sum_w2 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            sum_c += carry[i];
            const double cw = carry[i] * w[i];
            sum_cw += cw;
            sum_w += cw;
            sum_w2 += cw * cw;
        }
        if (scheme == WeightScheme::poisson) {
            for (std::size_t i = 0; i < N; ++i) {
                out.negative_estimates += static_cast<std::uint64_t>(negative[i]);
                out.auxiliary_points += static_cast<std::uint64_t>(aux[i]);
                tracker.value = std::max(tracker.value, ratio[i]);
            }
            out.segment_estimates += N;
            ++tracker.steps;
        }
        for (std::size_t i = 0; i < N; ++i) parity_next[i] = parity[i] + negative[i];

        if (!(sum_cw > 0.0)) {
            out.degenerate = true;
            out.degenerate_step = static_cast<long>(k);
            log_lik = -inf;
            out.log_mean_weight.push_back(log_lik);
            out.ess.push_back(0.0);
            break;
        }
        const double increment = shift + std::log(sum_cw / sum_c);
        log_lik += increment;
        out.log_mean_weight.push_back(increment);
        const double ess = sum_w * sum_w / sum_w2;
        out.ess.push_back(ess);

        std::vector<double> cw(N);
        for (std::size_t i = 0; i < N; ++i) cw[i] = carry[i] * w[i];
        out.node_moments.push_back(cloud_moments(t1, xn, &cw));
        if (opt.store_trajectories) cloud.push_back(xn);

        if (k == m) {
            out.final_states = xn;
            out.final_weights = cw;
            out.sign_flips = parity_next;
            break;
        }
        const bool resample = opt.ess_threshold <= 0.0 || ess < opt.ess_threshold * static_cast<double>(N);
        if (resample) {
            RandomStream rng(opt.seed, stream_id(StreamTag::resample, k, 0));
            const std::vector<std::size_t> anc = systematic_resample(cw, rng);
            for (std::size_t i = 0; i < N; ++i) {
                x[i] = xn[anc[i]];
                parity[i] = parity_next[anc[i]];
                carry[i] = 1.0;
            }
            if (opt.store_trajectories) ancestry.push_back(anc);
        } else {
            const double scale = static_cast<double>(N) / sum_cw;
            for (std::size_t i = 0; i < N; ++i) {
                x[i] = xn[i];
                parity[i] = parity_next[i];
                carry[i] = cw[i] * scale;
            }
            if (opt.store_trajectories) {
                std::vector<std::size_t> id(N);
                std::iota(id.begin(), id.end(), 0);
                ancestry.push_back(std::move(id));
            }
        }
    }
    out.log_likelihood = log_lik;
    out.final_lipschitz = tracker.value;

    if (opt.store_trajectories && !out.degenerate) {
        out.has_trajectories = true;
        out.trajectories.resize((m + 1) * N);
        for (std::size_t i = 0; i < N; ++i) {
            std::size_t idx = i;
            for (std::size_t k = m; k >= 1; --k) {
                out.trajectories[k * N + i] = cloud[k][idx];
                if (k >= 2) idx = ancestry[k - 2][idx];
            }
            out.trajectories[i] = cloud[0][idx];
        }
    }
    return out;
}

FilterOutput run_discretised_pf(const StateSpaceModel& model, const ObservationSet& obs, double step,
                                const FilterOptions& opt) {
    return run_filter(model, obs, step, WeightScheme::riemann, EstimatorConfig{}, opt);
}

FilterOutput run_continuous_pf(const StateSpaceModel& model, const ObservationSet& obs,
                               const EstimatorConfig& cfg, const FilterOptions& opt) {
    cfg.validate();
    EstimatorConfig c = cfg;
    if (cfg.auto_step) {
        // seed the Lipschitz constant the same way the filter will
        std::vector<State> x0(std::min<std::size_t>(opt.particles, 4096));
        for (std::size_t i = 0; i < x0.size(); ++i) {
            RandomStream rng(opt.seed, stream_id(StreamTag::initial, 0, i));
            x0[i] = model.initial.sample(rng);
        }
        LipschitzTracker tr = lipschitz_init(model.intensity, x0);
        double l = tr.value;
        if (tr.fallback)
            if (auto hint = model.intensity.lipschitz_hint()) l = std::max(l, *hint);
        c.step = choose_step_size(static_cast<double>(opt.particles), obs.horizon, l, cfg.excursion, cfg.epsilon);
    }
    return run_filter(model, obs, c.step, WeightScheme::poisson, c, opt);
}

double signed_likelihood_estimate(const FilterOutput& out) {
    if (!out.sign_tracked) throw InvalidArgument("run did not track signs (needs the absolute-value policy)");
    if (out.degenerate) return 0.0;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < out.final_weights.size(); ++i) {
        const double wi = out.final_weights[i];
        den += wi;
        num += (out.sign_flips[i] % 2 == 0) ? wi : -wi;
    }
    return out.likelihood() * num / den;
}

std::vector<std::pair<double, double>> filtered_moments(const FilterOutput& out, int coordinate) {
    if (!out.has_trajectories) throw InvalidArgument("filtered_moments needs stored trajectories");
    const std::size_t N = out.final_weights.size();
    const std::size_t nodes = out.grid.times.size();
    double total = 0.0;
    for (double w : out.final_weights) total += w;
    std::vector<std::pair<double, double>> res(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < N; ++i) mean += out.final_weights[i] * out.trajectories[k * N + i][coordinate];
        mean /= total;
        double var = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double d = out.trajectories[k * N + i][coordinate] - mean;
            var += out.final_weights[i] * d * d;
        }
        res[k] = {mean, std::sqrt(var / total)};
    }
    return res;
}

std::string to_json(const FilterOutput& out, bool include_moments) {
    using nlohmann::json;
    json j;
    const char* scheme = out.scheme == WeightScheme::riemann ? "discretised"
                         : out.scheme == WeightScheme::poisson ? "continuous"
                                                               : "exact";
    j["method"] = scheme;
    j["policy"] = out.policy == NegativePolicy::truncate ? "truncate" : "absolute";
    j["particles"] = out.particles;
    j["step"] = out.step;
    j["grid_nodes"] = out.grid.times.size();
    if (std::isfinite(out.log_likelihood)) j["log_likelihood"] = out.log_likelihood;
    else j["log_likelihood"] = nullptr;
    j["likelihood"] = out.likelihood();
    j["degenerate"] = out.degenerate;
    if (out.degenerate) j["degenerate_step"] = out.degenerate_step;
    json diag;
    diag["negative_estimates"] = out.negative_estimates;
    diag["segment_estimates"] = out.segment_estimates;
    diag["auxiliary_points"] = out.auxiliary_points;
    diag["final_lipschitz"] = out.final_lipschitz;
    diag["lipschitz_fallback"] = out.lipschitz_fallback;
    diag["ess"] = out.ess;
    if (out.sign_tracked) diag["signed_likelihood"] = signed_likelihood_estimate(out);
    j["diagnostics"] = diag;
    if (include_moments) {
        json nodes = json::array();
        for (const auto& nm : out.node_moments) {
            nodes.push_back({{"t", nm.time},
                             {"mean", std::vector<double>(nm.mean.data(), nm.mean.data() + nm.mean.size())},
                             {"sd", std::vector<double>(nm.sd.data(), nm.sd.data() + nm.sd.size())}});
        }
        j["node_moments"] = nodes;
    }
    return j.dump(2);
}

}  // namespace coxpf
