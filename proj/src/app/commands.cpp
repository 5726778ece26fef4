#include "coxpf/app/commands.hpp"

#include "coxpf/oracles.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace coxpf::app {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string out_path(const GlobalOptions& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return (fs::path(g.out_dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << text;
    if (!f) throw Error("write failed for " + path);
}

std::vector<double> number_list(const json& b, const char* key, std::vector<double> fallback) {
    if (!b.contains(key)) return fallback;
    const json& v = b.at(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array() || v.empty()) throw ConfigError(std::string("'") + key + "' must be a number or a non-empty array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(std::string("'") + key + "' must contain numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

const json& block(const json& cfg, const char* key) {
    static const json empty = json::object();
    if (!cfg.contains(key)) return empty;
    if (!cfg.at(key).is_object()) throw ConfigError(std::string("'") + key + "' must be an object");
    return cfg.at(key);
}

ModelBuilder model_builder(const json& cfg) {
    if (!cfg.contains("model")) throw ConfigError("config lacks a 'model' block");
    return ModelBuilder(cfg.at("model"));
}

std::string dataset_path(const json& cfg, const GlobalOptions& g) {
    if (!g.dataset.empty()) return g.dataset;
    const std::string p = get_or<std::string>(cfg, "dataset", "");
    if (p.empty()) throw ConfigError("no dataset given (use --dataset or the 'dataset' key)");
    return p;
}

ObservationSet load_dataset(const json& cfg, const GlobalOptions& g) {
    const std::string path = dataset_path(cfg, g);
    try {
        return read_dataset(path);
    } catch (const DatasetError& e) {
        throw ConfigError(e.what());
    }
}

WeightScheme parse_method(const std::string& m) {
    if (m == "discretised") return WeightScheme::riemann;
    if (m == "continuous") return WeightScheme::poisson;
    if (m == "exact") return WeightScheme::exact;
    throw ConfigError("unknown method '" + m + "' (discretised, continuous or exact)");
}

const char* method_name(WeightScheme s) {
    switch (s) {
        case WeightScheme::riemann: return "discretised";
        case WeightScheme::poisson: return "continuous";
        case WeightScheme::exact: return "exact";
    }
    return "?";
}

/// Is the model the 1D benchmark the closed-form oracles are written for?
bool benchmark_compatible(const StateSpaceModel& m, bool need_marks) {
    const auto& d = m.dynamics;
    if (d.kind() != LinearSde::Kind::brownian || d.dimension() != 1 || d.drift_constant()[0] != 0.0) return false;
    if (!m.initial.deterministic() || m.initial.mean[0] != 0.0) return false;
    const auto& r = m.intensity;
    if (r.kind() != Intensity::Kind::affine || r.slope()[0] != 1.0 || r.offset() != 10.0) return false;
    if (need_marks && (m.marks.kind() != MarkModel::Kind::gaussian || m.marks.mark_dim() != 1)) return false;
    return true;
}

}  // namespace

std::uint64_t resolve_seed(const json& cfg, const GlobalOptions& g) {
    if (g.seed) return *g.seed;
    return get_or<std::uint64_t>(cfg, "seed", 1);
}

unsigned resolve_threads(const json& cfg, const GlobalOptions& g) {
    const unsigned t = g.threads ? *g.threads : get_or<unsigned>(cfg, "threads", 1);
    if (t < 1) throw ConfigError("threads must be at least 1");
    return t;
}

// ---------------------------------------------------------------------------

void cmd_simulate(const json& cfg, const GlobalOptions& g) {
    const ModelBuilder builder = model_builder(cfg);
    const StateSpaceModel model = builder.build();
    const json& sim = block(cfg, "simulate");
    const double horizon = get_or<double>(sim, "horizon", get_or<double>(cfg, "horizon", 0.0));
    if (!(horizon > 0.0)) throw ConfigError("simulation horizon must be positive");
    const double lambda_max =
        sim.contains("lambda_max") ? get_or<double>(sim, "lambda_max", 0.0) : default_lambda_max(model);
    const ThinningMode mode = parse_thinning(get_or<std::string>(sim, "thinning", "listing"));
    const std::uint64_t seed = resolve_seed(cfg, g);

    RandomStream rng(seed, stream_id(StreamTag::simulate));
    const SimulatedData data = simulate_observations(model, lambda_max, horizon, rng, mode);
    DatasetHeader header{builder.block().dump(), seed};
    write_dataset(out_path(g, "dataset.csv"), data.observations, header);
    write_truth(out_path(g, "truth.csv"), data.observations.times, data.truth);
    std::cout << "simulated " << data.observations.size() << " arrivals from " << data.candidates
              << " candidates on [0, " << horizon << "]\n";
}

void cmd_filter(const json& cfg, const GlobalOptions& g) {
    const StateSpaceModel model = model_builder(cfg).build();
    const ObservationSet obs = load_dataset(cfg, g);
    FilterSettings s = parse_filter_settings(block(cfg, "filter"));
    s.options.seed = resolve_seed(cfg, g);
    s.options.threads = resolve_threads(cfg, g);
    const FilterOutput out = run_configured_filter(model, obs, s);

    write_text(out_path(g, "filter_result.json"), to_json(out, false) + "\n");

    const int n = model.dimension();
    std::ostringstream m;
    m << "t";
    for (int j = 0; j < n; ++j) m << ",mean" << j + 1;
    for (int j = 0; j < n; ++j) m << ",sd" << j + 1;
    m << "\n";
    for (const auto& nm : out.node_moments) {
        m << num(nm.time);
        for (int j = 0; j < n; ++j) m << ',' << num(nm.mean[j]);
        for (int j = 0; j < n; ++j) m << ',' << num(nm.sd[j]);
        m << "\n";
    }
    write_text(out_path(g, "moments.csv"), m.str());

    if (out.has_trajectories) {
        std::vector<std::vector<std::pair<double, double>>> cols;
        for (int j = 0; j < n; ++j) cols.push_back(filtered_moments(out, j));
        std::ostringstream sm;
        sm << "t";
        for (int j = 0; j < n; ++j) sm << ",mean" << j + 1;
        for (int j = 0; j < n; ++j) sm << ",sd" << j + 1;
        sm << "\n";
        for (std::size_t k = 0; k < out.grid.times.size(); ++k) {
            sm << num(out.grid.times[k]);
            for (int j = 0; j < n; ++j) sm << ',' << num(cols[j][k].first);
            for (int j = 0; j < n; ++j) sm << ',' << num(cols[j][k].second);
            sm << "\n";
        }
        write_text(out_path(g, "smoothed.csv"), sm.str());
    }
    std::cout << "log_likelihood " << num(out.log_likelihood) << "  negative_estimates " << out.negative_estimates
              << "\n";
}

void cmd_likelihood_bench(const json& cfg, const GlobalOptions& g) {
    const StateSpaceModel model = model_builder(cfg).build();
    const json& b = block(cfg, "bench");
    const std::string oracle = get_or<std::string>(b, "oracle", "two_obs");

    ObservationSet obs;
    if (!g.dataset.empty() || cfg.contains("dataset")) {
        obs = load_dataset(cfg, g);
    } else {
        obs.horizon = get_or<double>(b, "horizon", get_or<double>(cfg, "horizon", 0.0));
        if (b.contains("observations")) {
            const json& o = b.at("observations");
            for (double t : number_list(o, "times", {})) obs.times.push_back(t);
            for (double y : number_list(o, "marks", {})) obs.marks.push_back(Vector::Constant(1, y));
        }
    }
    try {
        obs.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bench observations: ") + e.what());
    }

    double truth = 0.0;
    if (oracle == "no_obs") {
        if (obs.size() != 0 || !benchmark_compatible(model, false))
            throw ConfigError("oracle 'no_obs' needs the benchmark model and no arrivals");
        truth = likelihood_no_obs(obs.horizon);
    } else if (oracle == "two_obs") {
        if (obs.size() != 2 || !benchmark_compatible(model, true))
            throw ConfigError("oracle 'two_obs' needs the benchmark model with Gaussian marks and two arrivals");
        truth = likelihood_two_obs(obs.times[0], obs.times[1], obs.marks[0][0], obs.marks[1][0], obs.horizon,
                                   model.marks.sd());
    } else {
        throw ConfigError("no oracle named '" + oracle + "' (no_obs or two_obs)");
    }
    if (!(truth > 0.0)) throw Error("oracle likelihood underflows");

    std::vector<std::string> methods;
    if (b.contains("methods")) methods = b.at("methods").get<std::vector<std::string>>();
    else methods = {"discretised", "continuous"};
    const std::vector<double> steps = number_list(b, "steps", {0.1});
    const std::vector<double> particles = number_list(b, "particles", {100});
    const long replicates = get_or<long>(b, "replicates", 100);
    if (replicates < 2) throw ConfigError("bench.replicates must be at least 2");

    EstimatorConfig est;
    est.policy = get_or<std::string>(b, "policy", "truncate") == "absolute" ? NegativePolicy::absolute
                                                                            : NegativePolicy::truncate;
    est.epsilon = get_or<double>(b, "epsilon", est.epsilon);
    est.excursion = get_or<double>(b, "excursion", est.excursion);

    struct Cell {
        WeightScheme scheme;
        double step;
        std::size_t particles;
        long runs = 0;
        double sum_sq = 0.0, sum_sq2 = 0.0, sum_ratio = 0.0, seconds = 0.0, cost = 0.0;
    };
    std::vector<Cell> cells;
    const std::uint64_t seed = resolve_seed(cfg, g);
    const unsigned threads = resolve_threads(cfg, g);

    for (const auto& mname : methods) {
        const WeightScheme scheme = parse_method(mname);
        if (scheme == WeightScheme::exact && !benchmark_compatible(model, obs.size() > 0))
            throw ConfigError("exact method needs the benchmark model");
        for (double step : steps) {
            if (!(step > 0.0)) throw ConfigError("bench.steps must be positive");
            for (double pn : particles) {
                if (!(pn >= 1.0)) throw ConfigError("bench.particles must be positive");
                const std::size_t N = static_cast<std::size_t>(pn);
                std::size_t idx = cells.size();
                for (std::size_t c = 0; c < cells.size(); ++c)
                    if (cells[c].scheme == scheme && cells[c].step == step && cells[c].particles == N) idx = c;
                if (idx == cells.size()) cells.push_back({scheme, step, N});
                Cell& cell = cells[idx];
                // repeated cells continue the replicate sequence, so they pool rather than duplicate
                for (long r = 0; r < replicates; ++r) {
                    FilterOptions opt;
                    opt.particles = N;
                    opt.threads = threads;
                    opt.seed = splitmix64(seed ^ stream_id(StreamTag::replicate, idx, cell.runs));
                    EstimatorConfig e = est;
                    e.step = step;
                    const auto t0 = std::chrono::steady_clock::now();
                    const FilterOutput out = run_filter(model, obs, step, scheme, e, opt);
                    cell.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                    const double ratio = std::exp(out.log_likelihood - std::log(truth));
                    const double sq = (ratio - 1.0) * (ratio - 1.0);
                    cell.sum_sq += sq;
                    cell.sum_sq2 += sq * sq;
                    cell.sum_ratio += ratio;
                    cell.cost = static_cast<double>(N) * static_cast<double>(out.grid.steps());
                    ++cell.runs;
                }
            }
        }
    }

    std::ostringstream csv, timing;
    csv << "method,step,particles,replicates,cost_particle_steps,rmse,rmse_se,mean_ratio\n";
    timing << "method,step,particles,seconds_per_run\n";
    for (const auto& c : cells) {
        const double n = static_cast<double>(c.runs);
        const double mean = c.sum_sq / n;
        const double var = std::max(0.0, (c.sum_sq2 - n * mean * mean) / (n - 1.0));
        csv << method_name(c.scheme) << ',' << num(c.step) << ',' << c.particles << ',' << c.runs << ','
            << num(c.cost) << ',' << num(mean) << ',' << num(std::sqrt(var / n)) << ',' << num(c.sum_ratio / n)
            << "\n";
        timing << method_name(c.scheme) << ',' << num(c.step) << ',' << c.particles << ',' << num(c.seconds / n)
               << "\n";
    }
    write_text(out_path(g, "likelihood_bench.csv"), csv.str());
    write_text(out_path(g, "likelihood_bench_timing.csv"), timing.str());
    std::cout << "benchmarked " << cells.size() << " cells against oracle likelihood " << num(truth) << "\n";
}

void cmd_pmmh(const json& cfg, const GlobalOptions& g) {
    const ModelBuilder builder = model_builder(cfg);
    const ObservationSet obs = load_dataset(cfg, g);
    const json& p = block(cfg, "pmmh");
    const PmmhConfig pc = parse_pmmh_config(p);
    const FilterSettings fs = parse_filter_settings(block(p, "backend"));
    if (fs.estimator.auto_step) throw ConfigError("pmmh backend needs a numeric step");

    BackendSpec spec;
    spec.kind = fs.scheme == WeightScheme::riemann ? BackendKind::discretised
                : fs.scheme == WeightScheme::poisson ? BackendKind::continuous
                                                     : BackendKind::exact_weight;
    spec.step = fs.estimator.step;
    spec.particles = fs.options.particles;
    spec.estimator = fs.estimator;
    spec.threads = resolve_threads(cfg, g);

    std::vector<std::string> names;
    for (const auto& ps : pc.parameters) names.push_back(ps.name);
    builder.build();  // surface model errors before the chain starts
    ModelFamily family = [&builder, names](const Vector& theta) {
        std::map<std::string, double> ov;
        for (std::size_t j = 0; j < names.size(); ++j) ov[names[j]] = theta[static_cast<int>(j)];
        return builder.build(ov);
    };
    const Chain chain = pmmh_run(pc, make_filter_backend(family, obs, spec), resolve_seed(cfg, g));

    std::ostringstream csv;
    csv << "iteration";
    for (const auto& n : names) csv << ',' << n;
    csv << ",log_likelihood,accepted\n";
    for (std::size_t i = 0; i < chain.size(); ++i) {
        csv << i + 1;
        for (int j = 0; j < pc.dimension(); ++j) csv << ',' << num(chain.draws[i][j]);
        csv << ',' << num(chain.log_likelihood[i]) << ',' << int(chain.accepted[i]) << "\n";
    }
    write_text(out_path(g, "chain.csv"), csv.str());

    json summary;
    summary["iterations"] = pc.iterations;
    summary["burn_in"] = pc.burn_in;
    summary["acceptance_rate"] = chain.acceptance_rate(pc.burn_in);
    json params = json::object();
    for (int j = 0; j < pc.dimension(); ++j) {
        const auto col = chain.column(j, pc.burn_in);
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(col.size());
        double var = 0.0;
        for (double v : col) var += (v - mean) * (v - mean);
        var /= static_cast<double>(col.size() > 1 ? col.size() - 1 : 1);
        json e;
        e["mean"] = mean;
        e["sd"] = std::sqrt(var);
        try {
            const double v = ess(col);
            if (std::isfinite(v)) e["ess"] = v;
            else e["ess"] = nullptr;
        } catch (const InvalidArgument&) {
            e["ess"] = nullptr;  // constant or too short after burn-in
        }
        params[names[j]] = e;
    }
    summary["parameters"] = params;
    write_text(out_path(g, "pmmh_summary.json"), summary.dump(2) + "\n");
    std::cout << "pmmh finished: acceptance " << num(chain.acceptance_rate(pc.burn_in)) << "\n";
}

void cmd_bounds(const json& cfg, const GlobalOptions& g) {
    const json& b = block(cfg, "bounds");
    std::vector<double> deltas = number_list(b, "deltas", {});
    if (deltas.empty()) {
        for (int i = 0; i <= 40; ++i) deltas.push_back(std::pow(10.0, -3.0 + 3.0 * i / 40.0));
    }
    const double l = get_or<double>(b, "l", 1.0);
    const double horizon = get_or<double>(b, "horizon", 1.0);
    const double particles = get_or<double>(b, "particles", 1.0);
    const double d = get_or<double>(b, "d", 3.0);
    const double epsilon = get_or<double>(b, "epsilon", 1e-6);
    const std::vector<double> mult = number_list(b, "eta_multipliers", {1.0});
    if (!(l > 0.0) || !(horizon > 0.0) || !(particles > 0.0) || !(d > 0.0))
        throw ConfigError("bounds: l, horizon, particles and d must be positive");

    const double nt = particles * horizon;
    std::ostringstream csv;
    csv << "delta,eta_multiplier,eta,endpoint_bound,marginal_bound,marginal_times_T_over_delta,"
           "log10_endpoint,log10_marginal,log10_union_endpoint,log10_union_marginal,log10_truncation_bias\n";
    const double ln10 = std::log(10.0);
    for (double delta : deltas) {
        if (!(delta > 0.0)) throw ConfigError("bounds.deltas must be positive");
        for (double c : mult) {
            if (!(c > 0.0)) throw ConfigError("bounds.eta_multipliers must be positive");
            const double eta = c * delta * l;
            const Bound ep = neg_prob_bound_endpoint(eta, delta, l, d * std::sqrt(delta));
            const Bound mg = neg_prob_bound_marginal(eta, delta, l);
            csv << num(delta) << ',' << num(c) << ',' << num(eta) << ',' << num(ep.value) << ',' << num(mg.value)
                << ',' << num(mg.value * horizon / delta) << ',' << num(ep.log_value / ln10) << ','
                << num(mg.log_value / ln10) << ',';
            if (c == 1.0) {
                csv << num(union_bound_endpoint(nt, delta, l, d).log_value / ln10) << ','
                    << num(union_bound_marginal(nt, delta, l).log_value / ln10);
            } else {
                csv << ',';
            }
            csv << ',';
            const long m = static_cast<long>(std::llround(horizon / delta));
            if (4.0 * delta * delta * l < 1.0 && m >= 1 && std::abs(m - horizon / delta) < 1.0)
                csv << num(truncation_bias_bound(delta, l, horizon, m).log_value / ln10);
            csv << "\n";
        }
    }
    write_text(out_path(g, "bounds.csv"), csv.str());

    json summary;
    summary["l"] = l;
    summary["horizon"] = horizon;
    summary["particles"] = particles;
    summary["d"] = d;
    summary["epsilon"] = epsilon;
    try {
        summary["chosen_step"] = choose_step_size(particles, horizon, l, d, epsilon);
    } catch (const Error& e) {
        summary["chosen_step"] = nullptr;
        summary["chosen_step_error"] = e.what();
    }
    write_text(out_path(g, "bounds_summary.json"), summary.dump(2) + "\n");
    std::cout << "wrote " << deltas.size() * mult.size() << " bound rows\n";
}

// ---------------------------------------------------------------------------

int run_cli(int argc, char** argv) {
    CLI::App app{"Particle filtering and calibration for diffusions observed through a marked Cox process"};
    app.require_subcommand(1);
    GlobalOptions g;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config)");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads (numeric results do not depend on it)");
    app.add_option("--out-dir", g.out_dir, "directory for output files");

    struct Sub {
        const char* name;
        const char* help;
        void (*fn)(const json&, const GlobalOptions&);
        bool needs_config;
    };
    const Sub subs[] = {
        {"simulate", "simulate a dataset and its ground truth", cmd_simulate, true},
        {"filter", "run a particle filter on a dataset", cmd_filter, true},
        {"likelihood-bench", "rMSE of likelihood estimates against an oracle", cmd_likelihood_bench, true},
        {"pmmh", "particle marginal Metropolis-Hastings calibration", cmd_pmmh, true},
        {"bounds", "tabulate negative-estimate probability bounds", cmd_bounds, false},
    };
    app.add_option("--config", g.config, "JSON configuration file");
    app.add_option("--dataset", g.dataset, "dataset file written by 'simulate' (filter, likelihood-bench, pmmh)");
    // global flags may also follow the subcommand name
    app.fallthrough();
    std::vector<std::pair<CLI::App*, const Sub*>> registered;
    for (const auto& s : subs) registered.emplace_back(app.add_subcommand(s.name, s.help), &s);
    app.get_formatter()->column_width(32);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (seed_opt->count() > 0) g.seed = seed;
    if (threads_opt->count() > 0) g.threads = threads;

    for (const auto& [sc, s] : registered) {
        if (sc->parsed() && s->needs_config && g.config.empty()) {
            std::cerr << "config error: '" << s->name << "' needs --config\n";
            return 2;
        }
        if (sc->parsed() && !s->needs_config && !g.dataset.empty()) {
            std::cerr << "config error: '" << s->name << "' takes no dataset\n";
            return 2;
        }
    }
    try {
        const json cfg = g.config.empty() ? json::object() : load_config(g.config);
        if (!cfg.is_object()) throw ConfigError("config root must be an object");
        for (const auto& [sc, s] : registered) {
            if (sc->parsed()) s->fn(cfg, g);
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace coxpf::app
