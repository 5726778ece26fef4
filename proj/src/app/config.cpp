#include "coxpf/app/config.hpp"

#include "coxpf/oracles.hpp"

#include <cctype>
#include <fstream>
#include <regex>

namespace coxpf::app {

json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    try {
        return json::parse(f, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
}

namespace {

Vector to_vector(const json& j, const char* what) {
    if (j.is_number()) {
        Vector v(1);
        v[0] = j.get<double>();
        return v;
    }
    if (!j.is_array() || j.empty() || j.size() > static_cast<std::size_t>(kMaxDim))
        throw ConfigError(std::string(what) + " must be a number or an array of 1-6 numbers");
    Vector v(static_cast<int>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(std::string(what) + " must contain numbers");
        v[static_cast<int>(i)] = j[i].get<double>();
    }
    return v;
}

json preset(const std::string& name) {
    if (name == "benchmark") {
        return json::parse(R"({
          "dynamics": {"type": "brownian", "drift": [0.0]},
          "initial": {"mean": [0.0], "variance": [0.0]},
          "intensity": {"type": "affine", "slope": [1.0], "offset": 10.0},
          "marks": {"type": "gaussian", "sd": 1.0, "dim": 1}
        })");
    }
    if (name == "microscopy") {
        return json::parse(R"({
          "dynamics": {"type": "ou", "rates": [1.0, 1.0, 4.0], "means": [0.0, 0.0, 2.0]},
          "initial": "stationary",
          "intensity": {"type": "exponential_depth", "rate0": 100.0, "decay_length": 20.0, "axis": 2},
          "marks": {"type": "born_wolf", "numerical_aperture": 1.4, "wavelength": 0.52,
                    "immersion_index": 1.515, "magnification": 100.0, "quadrature_nodes": 64, "cache": true}
        })");
    }
    if (name == "custom") return json::object();
    throw ConfigError("unknown model preset '" + name + "'");
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

json normalise_model_block(const json& block) {
    require(block.is_object(), "model block must be an object");
    json out = preset(get_or<std::string>(block, "preset", "custom"));
    json user = block;
    user.erase("preset");
    out.merge_patch(user);
    for (const char* key : {"dynamics", "intensity"})
        require(out.contains(key), std::string("model block lacks '") + key + "'");
    if (!out.contains("marks")) out["marks"] = {{"type", "none"}};
    return out;
}

ModelBuilder::ModelBuilder(json model_block) : block_(normalise_model_block(model_block)) {}

bool ModelBuilder::known_parameter(const std::string& name) {
    static const std::regex re("(phi|mu)[1-6]|sigma_y|rate0|decay_length|slope|offset|drift|rate");
    return std::regex_match(name, re);
}

StateSpaceModel ModelBuilder::build(const std::map<std::string, double>& overrides) const {
    json b = block_;
    for (const auto& [name, value] : overrides) {
        if (!known_parameter(name)) throw ConfigError("unknown model parameter '" + name + "'");
        if (name.size() >= 3 && (name.rfind("phi", 0) == 0 || name.rfind("mu", 0) == 0) && std::isdigit(name.back())) {
            const int idx = name.back() - '1';
            const char* field = name.rfind("phi", 0) == 0 ? "rates" : "means";
            require(b["dynamics"].contains(field) && b["dynamics"][field].size() > static_cast<std::size_t>(idx),
                    "parameter '" + name + "' does not exist in this model");
            b["dynamics"][field][idx] = value;
        } else if (name == "sigma_y") {
            b["marks"]["sd"] = value;
        } else if (name == "rate0" || name == "decay_length") {
            b["intensity"][name] = value;
        } else if (name == "slope") {
            b["intensity"]["slope"] = json::array({value});
        } else if (name == "offset") {
            b["intensity"]["offset"] = value;
        } else if (name == "rate") {
            b["intensity"]["rate"] = value;
        } else if (name == "drift") {
            b["dynamics"]["drift"] = json::array({value});
        }
    }

    try {
        // dynamics
        const json& d = b.at("dynamics");
        const std::string dtype = get_or<std::string>(d, "type", "");
        LinearSde sde = LinearSde::brownian(1);
        if (dtype == "brownian") {
            if (d.contains("drift")) sde = LinearSde::brownian(to_vector(d.at("drift"), "dynamics.drift"));
            else sde = LinearSde::brownian(get_or<int>(d, "dimension", 1));
        } else if (dtype == "ou") {
            require(d.contains("rates") && d.contains("means"), "OU dynamics need 'rates' and 'means'");
            sde = LinearSde::ornstein_uhlenbeck(to_vector(d.at("rates"), "dynamics.rates"),
                                                to_vector(d.at("means"), "dynamics.means"));
        } else {
            throw ConfigError("dynamics.type must be 'brownian' or 'ou'");
        }
        const int n = sde.dimension();

        // initial law
        InitialLaw init = InitialLaw::point(Vector::Zero(n));
        const json init_block = b.value("initial", json::object());
        if (init_block.is_string()) {
            require(init_block.get<std::string>() == "stationary", "initial must be 'stationary' or an object");
            const GaussianLaw st = stationary_moments(sde);
            init = {st.mean, st.covariance};
        } else if (init_block.is_object()) {
            Vector mean = init_block.contains("mean") ? to_vector(init_block.at("mean"), "initial.mean")
                          : sde.kind() == LinearSde::Kind::ornstein_uhlenbeck ? sde.means()
                                                                               : Vector(Vector::Zero(n));
            Vector var = init_block.contains("variance") ? to_vector(init_block.at("variance"), "initial.variance")
                                                         : Vector(Vector::Zero(n));
            require(mean.size() == n && var.size() == n, "initial mean/variance must match the state dimension");
            require((var.array() >= 0.0).all(), "initial variance must be non-negative");
            init = {mean, Matrix(var.asDiagonal())};
        } else {
            throw ConfigError("initial must be 'stationary' or an object");
        }

        // intensity
        const json& in = b.at("intensity");
        const std::string itype = get_or<std::string>(in, "type", "");
        Intensity rate = Intensity::constant(0.0);
        if (itype == "affine") {
            rate = Intensity::affine(to_vector(in.at("slope"), "intensity.slope"), get_or<double>(in, "offset", 0.0));
        } else if (itype == "exponential_depth") {
            rate = Intensity::exponential_depth(get_or<double>(in, "rate0", 100.0), get_or<double>(in, "decay_length", 20.0),
                                                get_or<int>(in, "axis", 2));
            require(rate.axis() < n, "exponential intensity axis exceeds the state dimension");
        } else if (itype == "constant") {
            rate = Intensity::constant(get_or<double>(in, "rate", 0.0));
        } else {
            throw ConfigError("intensity.type must be 'affine', 'exponential_depth' or 'constant'");
        }

        // marks
        const json& mk = b.at("marks");
        const std::string mtype = get_or<std::string>(mk, "type", "none");
        MarkModel marks = MarkModel::none();
        if (mtype == "gaussian") {
            marks = MarkModel::gaussian(get_or<double>(mk, "sd", 1.0), get_or<int>(mk, "dim", 1));
            require(marks.mark_dim() <= n, "Gaussian mark dimension exceeds the state dimension");
        } else if (mtype == "born_wolf") {
            require(n == 3, "Born-Wolf marks need a 3D state");
            if (!psf_ || psf_key_ != mk) {
                BornWolfParams p;
                p.numerical_aperture = get_or<double>(mk, "numerical_aperture", p.numerical_aperture);
                p.wavelength = get_or<double>(mk, "wavelength", p.wavelength);
                p.immersion_index = get_or<double>(mk, "immersion_index", p.immersion_index);
                p.quadrature_nodes = get_or<int>(mk, "quadrature_nodes", p.quadrature_nodes);
                if (mk.contains("magnification")) {
                    const json& m = mk.at("magnification");
                    if (m.is_number()) {
                        p.magnification = m.get<double>() * Eigen::Matrix2d::Identity();
                    } else {
                        require(m.is_array() && m.size() == 2 && m[0].size() == 2 && m[1].size() == 2,
                                "magnification must be a number or a 2x2 array");
                        for (int r = 0; r < 2; ++r)
                            for (int c = 0; c < 2; ++c) p.magnification(r, c) = m[r][c].get<double>();
                    }
                }
                PsfCacheOptions cache;
                cache.enabled = get_or<bool>(mk, "cache", true);
                psf_ = std::make_shared<const BornWolfPsf>(p, cache);
                psf_key_ = mk;
            }
            marks = MarkModel::born_wolf(psf_);
        } else if (mtype != "none") {
            throw ConfigError("marks.type must be 'none', 'gaussian' or 'born_wolf'");
        }
        return {std::move(sde), init, rate, marks};
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid model: ") + e.what());
    }
}

ThinningMode parse_thinning(const std::string& s) {
    if (s == "listing") return ThinningMode::listing;
    if (s == "textbook") return ThinningMode::textbook;
    throw ConfigError("thinning must be 'listing' or 'textbook'");
}

FilterSettings parse_filter_settings(const json& block) {
    FilterSettings s;
    const json b = block.is_null() ? json::object() : block;
    require(b.is_object(), "filter block must be an object");
    const std::string method = get_or<std::string>(b, "method", "continuous");
    if (method == "continuous") s.scheme = WeightScheme::poisson;
    else if (method == "discretised") s.scheme = WeightScheme::riemann;
    else if (method == "exact") s.scheme = WeightScheme::exact;
    else throw ConfigError("filter.method must be 'discretised', 'continuous' or 'exact'");
    s.options.particles = get_or<std::size_t>(b, "particles", 1000);
    require(s.options.particles >= 1, "filter.particles must be positive");
    s.options.store_trajectories = get_or<bool>(b, "store_trajectories", false);
    s.options.ess_threshold = get_or<double>(b, "ess_threshold", 0.0);
    if (b.contains("step") && b["step"].is_string()) {
        require(b["step"].get<std::string>() == "auto", "filter.step must be a number or 'auto'");
        s.estimator.auto_step = true;
    } else {
        s.estimator.step = get_or<double>(b, "step", 0.01);
    }
    s.estimator.epsilon = get_or<double>(b, "epsilon", 1e-6);
    s.estimator.excursion = get_or<double>(b, "excursion", 3.0);
    const std::string policy = get_or<std::string>(b, "policy", "truncate");
    if (policy == "truncate") s.estimator.policy = NegativePolicy::truncate;
    else if (policy == "absolute") s.estimator.policy = NegativePolicy::absolute;
    else throw ConfigError("filter.policy must be 'truncate' or 'absolute'");
    try {
        s.estimator.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    require(!(s.estimator.auto_step && s.scheme != WeightScheme::poisson), "step 'auto' applies to the continuous filter only");
    return s;
}

FilterOutput run_configured_filter(const StateSpaceModel& model, const ObservationSet& obs, const FilterSettings& s) {
    switch (s.scheme) {
        case WeightScheme::riemann: return run_discretised_pf(model, obs, s.estimator.step, s.options);
        case WeightScheme::poisson: return run_continuous_pf(model, obs, s.estimator, s.options);
        case WeightScheme::exact: return run_exact_weight_pf(model, obs, s.estimator.step, s.options);
    }
    throw ConfigError("unknown filter method");
}

PmmhConfig parse_pmmh_config(const json& b) {
    require(b.is_object(), "pmmh block must be an object");
    PmmhConfig c;
    require(b.contains("parameters") && b["parameters"].is_array() && !b["parameters"].empty(),
            "pmmh.parameters must be a non-empty array");
    for (const auto& p : b["parameters"]) {
        ParameterSpec s;
        s.name = p.at("name").get<std::string>();
        require(ModelBuilder::known_parameter(s.name), "unknown PMMH parameter '" + s.name + "'");
        s.lower = get_or<double>(p, "lower", 0.0);
        s.upper = get_or<double>(p, "upper", 10.0);
        s.initial = get_or<double>(p, "initial", 0.5 * (s.lower + s.upper));
        c.parameters.push_back(s);
    }
    c.iterations = get_or<long>(b, "iterations", 1000);
    c.burn_in = get_or<long>(b, "burn_in", 0);
    c.warmup = get_or<long>(b, "warmup", 100);
    const std::string adapt = get_or<std::string>(b, "adaptation", "continuous");
    if (adapt == "continuous") c.adaptation = AdaptationMode::continuous;
    else if (adapt == "burn_in_only") c.adaptation = AdaptationMode::burn_in_only;
    else if (adapt == "off") c.adaptation = AdaptationMode::off;
    else throw ConfigError("pmmh.adaptation must be 'continuous', 'burn_in_only' or 'off'");
    const int d = c.dimension();
    if (b.contains("initial_covariance")) {
        const json& m = b["initial_covariance"];
        if (m.is_number()) {
            c.initial_covariance = m.get<double>() * Matrix::Identity(d, d);
        } else {
            require(m.is_array() && m.size() == static_cast<std::size_t>(d), "initial_covariance has the wrong shape");
            c.initial_covariance = Matrix::Zero(d, d);
            for (int i = 0; i < d; ++i) {
                require(m[i].is_array() && m[i].size() == static_cast<std::size_t>(d), "initial_covariance has the wrong shape");
                for (int j = 0; j < d; ++j) c.initial_covariance(i, j) = m[i][j].get<double>();
            }
        }
    }
    try {
        c.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return c;
}

}  // namespace coxpf::app
