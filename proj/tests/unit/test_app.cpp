#include "coxpf/app/commands.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace coxpf;
using namespace coxpf::app;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "coxpf_app_tests" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path write_config(const fs::path& dir, const json& j, const std::string& name = "cfg.json") {
    const fs::path p = dir / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "coxpf");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

json constant_config(double rate) {
    return {{"seed", 3},
            {"model", {{"preset", "custom"},
                       {"dynamics", {{"type", "brownian"}, {"dimension", 1}}},
                       {"initial", {{"mean", {0.0}}, {"variance", {0.0}}}},
                       {"intensity", {{"type", "constant"}, {"rate", rate}}},
                       {"marks", {{"type", "gaussian"}, {"sd", 1.0}, {"dimension", 1}}}}},
            {"simulate", {{"horizon", 2.0}}},
            {"filter", {{"method", "continuous"}, {"particles", 50}, {"step", 0.1}}}};
}

}  // namespace

TEST(Config, LoadErrors) {
    const auto d = fresh_dir("load");
    EXPECT_THROW(load_config((d / "missing.json").string()), ConfigError);
    std::ofstream(d / "bad.json") << "{ \"seed\": ";
    EXPECT_THROW(load_config((d / "bad.json").string()), ConfigError);
    std::ofstream(d / "comments.json") << "{\n// comment\n\"seed\": 4\n}";
    EXPECT_EQ(load_config((d / "comments.json").string())["seed"], 4);
}

TEST(Config, Presets) {
    const auto b = ModelBuilder(json{{"preset", "benchmark"}}).build();
    EXPECT_EQ(b.dimension(), 1);
    EXPECT_DOUBLE_EQ(b.intensity(coxpf::testing::vec({0.0})), 10.0);
}

TEST(Config, OverridesAndUnknownNames) {
    const ModelBuilder mb(json{{"preset", "benchmark"}});
    const auto m = mb.build({{"sigma_y", 0.5}, {"offset", 20.0}});
    State x(1);
    x << 1.0;
    EXPECT_DOUBLE_EQ(m.intensity(x), 21.0);
    Vector y(1);
    y << 1.0;
    EXPECT_NEAR(m.marks.density(x, y), 1.0 / std::sqrt(2 * M_PI * 0.25), 1e-14);
    EXPECT_THROW(mb.build({{"nonsense", 1.0}}), ConfigError);
    EXPECT_TRUE(ModelBuilder::known_parameter("phi3"));
    EXPECT_FALSE(ModelBuilder::known_parameter("phi7"));
    EXPECT_THROW(ModelBuilder(json{{"preset", "nope"}}).build(), ConfigError);
    EXPECT_THROW(ModelBuilder(json{{"preset", "benchmark"}, {"marks", {{"sd", "wide"}}}}).build(), ConfigError);
}

TEST(Config, FilterSettings) {
    const auto s = parse_filter_settings(json{{"method", "discretised"}, {"particles", 77}, {"step", 0.2}});
    EXPECT_EQ(s.scheme, WeightScheme::riemann);
    EXPECT_EQ(s.options.particles, 77u);
    EXPECT_EQ(s.estimator.step, 0.2);
    const auto a = parse_filter_settings(json{{"method", "continuous"}, {"step", "auto"}, {"epsilon", 1e-3}});
    EXPECT_TRUE(a.estimator.auto_step);
    EXPECT_THROW(parse_filter_settings(json{{"method", "discretised"}, {"step", "auto"}}), ConfigError);
    EXPECT_THROW(parse_filter_settings(json{{"method", "magic"}}), ConfigError);
    EXPECT_THROW(parse_filter_settings(json{{"particles", "many"}}), ConfigError);
}

TEST(Config, PmmhSettings) {
    const auto c = parse_pmmh_config(json{{"parameters", {{{"name", "mu3"}, {"lower", 0}, {"upper", 10}, {"initial", 1.5}}}},
                                          {"iterations", 100},
                                          {"burn_in", 10},
                                          {"initial_covariance", 0.2}});
    EXPECT_EQ(c.dimension(), 1);
    EXPECT_DOUBLE_EQ(c.initial_covariance(0, 0), 0.2);
    EXPECT_THROW(parse_pmmh_config(json{{"parameters", json::array()}}), ConfigError);
    EXPECT_THROW(parse_pmmh_config(json{{"parameters", {{{"name", "mu3"}, {"lower", 5}, {"upper", 1}, {"initial", 2}}}}}),
                 ConfigError);
}

TEST(Cli, ExitCodes) {
    const auto d = fresh_dir("exit");
    EXPECT_EQ(cli({}), 2);
    EXPECT_EQ(cli({"frobnicate"}), 2);
    EXPECT_EQ(cli({"filter"}), 2);
    EXPECT_EQ(cli({"simulate", "--config", (d / "missing.json").string()}), 2);
    EXPECT_EQ(cli({"bounds", "--out-dir", d.string()}), 0);
    // a valid config whose filter hits an impossible dataset is a config error
    const auto cfg = write_config(d, constant_config(2.0));
    EXPECT_EQ(cli({"filter", "--config", cfg.string(), "--dataset", (d / "nope.csv").string()}), 2);
    // simulate with a dominating rate below the intensity fails at run time
    json bad = constant_config(5.0);
    bad["simulate"]["lambda_max"] = 1.0;
    const auto badp = write_config(d, bad, "bad.json");
    EXPECT_EQ(cli({"simulate", "--config", badp.string(), "--out-dir", d.string()}), 1);
}

TEST(Cli, ZeroIntensitySimulatesEmptyDataset) {
    const auto d = fresh_dir("zero");
    const auto cfg = write_config(d, constant_config(0.0));
    ASSERT_EQ(cli({"simulate", "--config", cfg.string(), "--out-dir", d.string()}), 0);
    const auto obs = read_dataset((d / "dataset.csv").string());
    EXPECT_EQ(obs.size(), 0u);
    EXPECT_EQ(obs.horizon, 2.0);
}

TEST(Cli, SimulateThenFilterConstantIntensity) {
    const auto d = fresh_dir("const");
    json c = constant_config(1.5);
    c["model"]["marks"] = {{"type", "none"}};
    const auto cfg = write_config(d, c);
    ASSERT_EQ(cli({"simulate", "--config", cfg.string(), "--out-dir", d.string()}), 0);
    const auto obs = read_dataset((d / "dataset.csv").string());
    ASSERT_GT(obs.size(), 0u);
    ASSERT_EQ(cli({"filter", "--config", cfg.string(), "--dataset", (d / "dataset.csv").string(), "--out-dir",
                   d.string()}),
              0);
    const json res = json::parse(slurp(d / "filter_result.json"));
    // unmarked constant rate: every particle carries -c T + n log c
    const double expect = -1.5 * 2.0 + static_cast<double>(obs.size()) * std::log(1.5);
    EXPECT_NEAR(res["log_likelihood"].get<double>(), expect, 1e-10);
    EXPECT_TRUE(fs::exists(d / "moments.csv"));
}

TEST(Cli, RerunsAreByteIdenticalAcrossThreads) {
    const auto d1 = fresh_dir("rerun1"), d2 = fresh_dir("rerun2");
    json c = constant_config(0.0);
    c["model"] = json{{"preset", "benchmark"}};
    c["simulate"]["lambda_max"] = 30.0;
    c["filter"]["particles"] = 500;
    const auto cfg = write_config(d1, c);
    for (const auto& [d, threads] : {std::pair{d1, "1"}, std::pair{d2, "4"}}) {
        ASSERT_EQ(cli({"simulate", "--config", cfg.string(), "--out-dir", d.string()}), 0);
        ASSERT_EQ(cli({"filter", "--config", cfg.string(), "--threads", threads, "--dataset",
                       (d / "dataset.csv").string(), "--out-dir", d.string()}),
                  0);
    }
    EXPECT_EQ(slurp(d1 / "dataset.csv"), slurp(d2 / "dataset.csv"));
    EXPECT_EQ(slurp(d1 / "filter_result.json"), slurp(d2 / "filter_result.json"));
    EXPECT_EQ(slurp(d1 / "moments.csv"), slurp(d2 / "moments.csv"));
    // a different seed changes the data
    const auto d3 = fresh_dir("rerun3");
    ASSERT_EQ(cli({"simulate", "--config", cfg.string(), "--seed", "99", "--out-dir", d3.string()}), 0);
    EXPECT_NE(slurp(d1 / "dataset.csv"), slurp(d3 / "dataset.csv"));
}

TEST(Cli, BoundsAreMonotoneInStep) {
    const auto d = fresh_dir("bounds");
    ASSERT_EQ(cli({"bounds", "--out-dir", d.string()}), 0);
    std::ifstream f(d / "bounds.csv");
    std::string line;
    std::getline(f, line);
    EXPECT_EQ(line.rfind("delta,eta_multiplier,eta,endpoint_bound", 0), 0u);
    double prev_delta = 0.0, prev = -1e300;
    while (std::getline(f, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        if (std::stod(cells[1]) != 1.0) continue;
        const double delta = std::stod(cells[0]), log10_marginal = std::stod(cells[7]);
        EXPECT_GT(delta, prev_delta);
        EXPECT_GE(log10_marginal, prev);
        prev_delta = delta;
        prev = log10_marginal;
    }
    const json s = json::parse(slurp(d / "bounds_summary.json"));
    EXPECT_TRUE(s.contains("chosen_step"));
}

TEST(Cli, LikelihoodBenchWritesDeterministicTable) {
    const auto d = fresh_dir("bench");
    json c = {{"seed", 5},
              {"model", {{"preset", "benchmark"}}},
              {"bench", {{"oracle", "two_obs"},
                         {"horizon", 1.0},
                         {"observations", {{"times", {0.3, 0.7}}, {"marks", {0.2, -0.1}}}},
                         {"methods", {"discretised", "continuous"}},
                         {"steps", {0.25, 0.1}},
                         {"particles", {50}},
                         {"replicates", 5}}}};
    const auto cfg = write_config(d, c);
    ASSERT_EQ(cli({"likelihood-bench", "--config", cfg.string(), "--out-dir", d.string()}), 0);
    const std::string first = slurp(d / "likelihood_bench.csv");
    ASSERT_EQ(cli({"likelihood-bench", "--config", cfg.string(), "--out-dir", d.string(), "--threads", "3"}), 0);
    EXPECT_EQ(first, slurp(d / "likelihood_bench.csv"));
    EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 5);
    c["bench"]["oracle"] = "no_obs";
    c["model"]["marks"] = {{"type", "none"}};
    c["bench"]["observations"] = {{"times", {0.3}}, {"marks", {0.2}}};
    write_config(d, c);
    EXPECT_EQ(cli({"likelihood-bench", "--config", cfg.string(), "--out-dir", d.string()}), 2);
}
