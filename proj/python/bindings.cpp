#include "coxpf/app/commands.hpp"
#include "coxpf/oracles.hpp"

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace coxpf;

namespace {

Vector to_vec(const std::vector<double>& v) {
    if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim)) throw InvalidArgument("state size must be 1-6");
    Vector out(static_cast<int>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
    return out;
}

std::vector<double> from_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

py::array_t<double> rows_to_array(const std::vector<Vector>& rows, int cols) {
    py::array_t<double> a({static_cast<py::ssize_t>(rows.size()), static_cast<py::ssize_t>(cols)});
    auto m = a.mutable_unchecked<2>();
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rows[i][j];
    return a;
}

ObservationSet make_obs(double horizon, const std::vector<double>& times, py::array_t<double> marks) {
    ObservationSet obs;
    obs.horizon = horizon;
    obs.times = times;
    if (marks.size() > 0) {
        auto buf = marks.unchecked();
        if (buf.ndim() == 1) {
            for (py::ssize_t i = 0; i < buf.shape(0); ++i) obs.marks.push_back(Vector::Constant(1, buf.data(i)[0]));
        } else if (buf.ndim() == 2) {
            const py::ssize_t c = buf.shape(1);
            if (c > kMaxDim) throw InvalidArgument("marks have too many columns");
            for (py::ssize_t i = 0; i < buf.shape(0); ++i) {
                Vector y(static_cast<int>(c));
                for (py::ssize_t j = 0; j < c; ++j) y[static_cast<int>(j)] = *buf.data(i, j);
                obs.marks.push_back(y);
            }
        } else {
            throw InvalidArgument("marks must be 1D or 2D");
        }
    }
    if (obs.marks.size() != obs.times.size()) throw InvalidArgument("times and marks differ in length");
    obs.validate();
    return obs;
}

WeightScheme scheme_of(const std::string& m) {
    if (m == "discretised") return WeightScheme::riemann;
    if (m == "continuous") return WeightScheme::poisson;
    if (m == "exact") return WeightScheme::exact;
    throw InvalidArgument("method must be 'discretised', 'continuous' or 'exact'");
}

py::dict filter_dict(const FilterOutput& out) {
    py::dict d;
    d["log_likelihood"] = out.log_likelihood;
    d["step"] = out.step;
    d["degenerate"] = out.degenerate;
    d["negative_estimates"] = out.negative_estimates;
    d["segment_estimates"] = out.segment_estimates;
    d["auxiliary_points"] = out.auxiliary_points;
    d["final_lipschitz"] = out.final_lipschitz;
    d["ess"] = out.ess;
    d["times"] = out.grid.times;
    const int n = out.node_moments.empty() ? 0 : static_cast<int>(out.node_moments.front().mean.size());
    std::vector<Vector> means, sds;
    for (const auto& nm : out.node_moments) {
        means.push_back(nm.mean);
        sds.push_back(nm.sd);
    }
    d["mean"] = rows_to_array(means, n);
    d["sd"] = rows_to_array(sds, n);
    if (out.sign_tracked) d["signed_likelihood"] = signed_likelihood_estimate(out);
    return d;
}

}  // namespace

PYBIND11_MODULE(_coxpf, m) {
    m.doc() = "Particle filters for diffusions observed through a marked Cox process";

    // translators run newest first, so the base class goes first
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<app::ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<StateSpaceModel>(m, "Model")
        .def_property_readonly("dimension", &StateSpaceModel::dimension)
        .def("intensity", [](const StateSpaceModel& s, const std::vector<double>& x) { return s.intensity(to_vec(x)); });

    // the builder keeps the Born-Wolf table alive across builds
    py::class_<app::ModelBuilder>(m, "ModelBuilder")
        .def(py::init([](const std::string& block) { return app::ModelBuilder(nlohmann::json::parse(block)); }),
             py::arg("model_json"))
        .def("build", &app::ModelBuilder::build, py::arg("overrides") = std::map<std::string, double>{})
        .def("block", [](const app::ModelBuilder& b) { return b.block().dump(); });

    m.def("benchmark_model", &benchmark_model, py::arg("sigma_y") = 1.0, py::arg("drift") = 0.0);

    m.def(
        "simulate",
        [](const StateSpaceModel& model, double horizon, std::uint64_t seed, std::optional<double> lambda_max,
           const std::string& thinning) {
            RandomStream rng(seed, stream_id(StreamTag::simulate));
            const double lm = lambda_max ? *lambda_max : default_lambda_max(model);
            const SimulatedData data =
                simulate_observations(model, lm, horizon, rng, app::parse_thinning(thinning));
            py::dict d;
            d["horizon"] = horizon;
            d["times"] = data.observations.times;
            d["marks"] = rows_to_array(data.observations.marks, model.marks.mark_dim());
            d["truth"] = rows_to_array(data.truth, model.dimension());
            d["candidates"] = data.candidates;
            return d;
        },
        py::arg("model"), py::arg("horizon"), py::arg("seed") = 1, py::arg("lambda_max") = py::none(),
        py::arg("thinning") = "listing");

    m.def(
        "run_filter",
        [](const StateSpaceModel& model, double horizon, const std::vector<double>& times, py::array_t<double> marks,
           const std::string& method, double step, std::size_t particles, std::uint64_t seed, unsigned threads,
           const std::string& policy, double epsilon, bool auto_step) {
            const ObservationSet obs = make_obs(horizon, times, marks);
            FilterOptions opt;
            opt.particles = particles;
            opt.seed = seed;
            opt.threads = threads;
            EstimatorConfig cfg;
            cfg.step = step;
            cfg.epsilon = epsilon;
            cfg.auto_step = auto_step;
            cfg.policy = policy == "absolute" ? NegativePolicy::absolute : NegativePolicy::truncate;
            FilterOutput out;
            {
                py::gil_scoped_release release;
                switch (scheme_of(method)) {
                    case WeightScheme::riemann: out = run_discretised_pf(model, obs, step, opt); break;
                    case WeightScheme::poisson: out = run_continuous_pf(model, obs, cfg, opt); break;
                    case WeightScheme::exact: out = run_exact_weight_pf(model, obs, step, opt); break;
                }
            }
            return filter_dict(out);
        },
        py::arg("model"), py::arg("horizon"), py::arg("times"), py::arg("marks"), py::arg("method") = "continuous",
        py::arg("step") = 0.01, py::arg("particles") = 1000, py::arg("seed") = 1, py::arg("threads") = 1,
        py::arg("policy") = "truncate", py::arg("epsilon") = 1e-6, py::arg("auto_step") = false);

    m.def(
        "poisson_estimates",
        [](const StateSpaceModel& model, const std::vector<double>& x0, double delta, double eta, std::size_t n,
           std::uint64_t seed) {
            py::array_t<double> out(static_cast<py::ssize_t>(n));
            auto o = out.mutable_unchecked<1>();
            const Vector x = to_vec(x0);
            for (std::size_t i = 0; i < n; ++i) {
                RandomStream rng(seed, stream_id(StreamTag::user, i));
                o(i) = poisson_segment_estimate(model.dynamics, model.intensity, eta, 0.0, delta, x, rng).value;
            }
            return out;
        },
        py::arg("model"), py::arg("x0"), py::arg("delta"), py::arg("eta"), py::arg("n"), py::arg("seed") = 1);

    m.def("likelihood_no_obs", &likelihood_no_obs, py::arg("horizon"));
    m.def("likelihood_two_obs", &likelihood_two_obs, py::arg("t1"), py::arg("t2"), py::arg("y1"), py::arg("y2"),
          py::arg("horizon"), py::arg("sigma_y") = 1.0);
    m.def("bridge_path_integral_expectation", &bridge_path_integral_expectation, py::arg("alpha"), py::arg("beta"),
          py::arg("tau"), py::arg("horizon"), py::arg("x0"), py::arg("x1"));

    m.def("neg_prob_bound_endpoint", [](double eta, double delta, double l, double gap) {
        return neg_prob_bound_endpoint(eta, delta, l, gap).value;
    }, py::arg("eta"), py::arg("delta"), py::arg("l"), py::arg("gap"));
    m.def("neg_prob_bound_marginal", [](double eta, double delta, double l) {
        return neg_prob_bound_marginal(eta, delta, l).value;
    }, py::arg("eta"), py::arg("delta"), py::arg("l"));
    m.def("log_union_bound_marginal", [](double nt, double delta, double l) {
        return union_bound_marginal(nt, delta, l).log_value;
    }, py::arg("nt"), py::arg("delta"), py::arg("l"));
    m.def("choose_step_size", &choose_step_size, py::arg("particles"), py::arg("horizon"), py::arg("l"),
          py::arg("d") = 3.0, py::arg("epsilon") = 1e-6);

    m.def("ess", &ess, py::arg("series"));
    m.def(
        "fit_rmse_model",
        [](const std::vector<std::pair<double, double>>& points, double cost, const std::string& model) {
            const RmseModel rm = model == "poisson" ? RmseModel::poisson : RmseModel::discretised;
            const RmseFit f = fit_rmse_model(points, cost, rm);
            return py::make_tuple(f.c1, f.c2, f.optimal_step);
        },
        py::arg("points"), py::arg("cost"), py::arg("model") = "discretised");

    m.def(
        "pmmh",
        [](const std::function<double(std::vector<double>, std::uint64_t)>& loglik,
           const std::vector<std::tuple<std::string, double, double, double>>& params, long iterations, long burn_in,
           std::uint64_t seed, const std::string& adaptation) {
            PmmhConfig cfg;
            for (const auto& [name, lo, hi, init] : params) cfg.parameters.push_back({name, lo, hi, init});
            cfg.iterations = iterations;
            cfg.burn_in = burn_in;
            cfg.adaptation = adaptation == "off"            ? AdaptationMode::off
                             : adaptation == "burn_in_only" ? AdaptationMode::burn_in_only
                                                            : AdaptationMode::continuous;
            const Chain c = pmmh_run(
                cfg, [&](const Vector& th, std::uint64_t s) { return loglik(from_vec(th), s); }, seed);
            py::dict d;
            d["names"] = c.names;
            d["draws"] = rows_to_array(c.draws, cfg.dimension());
            d["log_likelihood"] = c.log_likelihood;
            d["accepted"] = std::vector<int>(c.accepted.begin(), c.accepted.end());
            return d;
        },
        py::arg("log_likelihood"), py::arg("parameters"), py::arg("iterations"), py::arg("burn_in") = 0,
        py::arg("seed") = 1, py::arg("adaptation") = "continuous");

    py::class_<BornWolfPsf, std::shared_ptr<BornWolfPsf>>(m, "BornWolfPsf")
        .def(py::init([](double na, double wavelength, double n0, double magnification, bool cache) {
                 BornWolfParams p;
                 p.numerical_aperture = na;
                 p.wavelength = wavelength;
                 p.immersion_index = n0;
                 p.magnification = magnification * Eigen::Matrix2d::Identity();
                 PsfCacheOptions c;
                 c.enabled = cache;
                 return std::make_shared<BornWolfPsf>(p, c);
             }),
             py::arg("numerical_aperture") = 1.4, py::arg("wavelength") = 0.52, py::arg("immersion_index") = 1.515,
             py::arg("magnification") = 100.0, py::arg("cache") = true)
        .def("radial", &BornWolfPsf::radial, py::arg("x3"), py::arg("r"))
        .def("exact_radial", &BornWolfPsf::exact_radial, py::arg("x3"), py::arg("r"), py::arg("min_nodes") = 0)
        .def("disc_moments", [](const BornWolfPsf& p, double x3, double radius) {
            const auto dm = p.disc_moments(x3, radius);
            return py::make_tuple(dm.mass, dm.radial_sd);
        }, py::arg("x3"), py::arg("radius"));

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "coxpf");
            std::vector<char*> argv;
            for (auto& a : args) argv.push_back(a.data());
            return app::run_cli(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"));
}
