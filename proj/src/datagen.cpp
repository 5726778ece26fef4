#include "coxpf/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace coxpf {

std::vector<State> simulate_state_path(const LinearSde& sde, const InitialLaw& initial,
                                       const std::vector<double>& times, RandomStream& rng) {
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || times[i] < 0.0) throw InvalidArgument("path times must be finite and >= 0");
        if (i > 0 && !(times[i] > times[i - 1])) throw InvalidArgument("path times must be strictly increasing");
    }
    std::vector<State> out;
    out.reserve(times.size());
    State x = initial.sample(rng);
    double t = 0.0;
    for (double ti : times) {
        x = sample_transition(sde, t, ti, x, rng);
        t = ti;
        out.push_back(x);
    }
    return out;
}

double default_lambda_max(const StateSpaceModel& model) {
    const Intensity& f = model.intensity;
    switch (f.kind()) {
        case Intensity::Kind::exponential_depth: return f.rate0();
        case Intensity::Kind::constant: return f.offset();
        default: break;
    }
    throw InvalidArgument("no default dominating rate for this intensity; set lambda_max explicitly");
}

SimulatedData simulate_observations(const StateSpaceModel& model, double lambda_max, double horizon,
                                    RandomStream& rng, ThinningMode mode) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be positive");
    if (!(lambda_max >= 0.0) || !std::isfinite(lambda_max)) throw InvalidArgument("lambda_max must be finite and >= 0");
    SimulatedData out;
    out.observations.horizon = horizon;
    const int count = rng.poisson(lambda_max * horizon);
    out.candidates = static_cast<std::size_t>(count);
    std::vector<double> cand(count);
    for (double& c : cand) c = horizon * rng.uniform();
    std::sort(cand.begin(), cand.end());

    State x_tau = model.initial.sample(rng);
    double tau = 0.0;
    for (double t : cand) {
        if (t == tau) continue;  // coincident candidate, probability zero
        const State x = sample_transition(model.dynamics, tau, t, x_tau, rng);
        const double lam = model.intensity(x);
        if (lam > lambda_max * (1.0 + 1e-12))
            throw Error("intensity " + std::to_string(lam) + " exceeds lambda_max at state " + format_state(x));
        const bool accept = rng.uniform() * lambda_max <= lam;
        if (accept || mode == ThinningMode::textbook) {
            tau = t;
            x_tau = x;
        }
        if (accept) {
            out.observations.times.push_back(t);
            out.observations.marks.push_back(model.marks.sample(x, rng));
            out.truth.push_back(x);
        }
    }
    return out;
}

// ===========================================================================
// Dataset files
// ===========================================================================

namespace {

constexpr const char* kDatasetMagic = "# coxpf-dataset v1";
constexpr const char* kTruthMagic = "# coxpf-truth v1";

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s, const std::string& path) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw DatasetError(path + ": malformed number '" + s + "'");
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    if (*end != '\0') throw DatasetError(path + ": malformed number '" + s + "'");
    return v;
}

}  // namespace

void write_dataset(const std::string& path, const ObservationSet& obs, const DatasetHeader& header) {
    obs.validate();
    int mark_dim = obs.marks.empty() ? 0 : static_cast<int>(obs.marks.front().size());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DatasetError("cannot open " + path + " for writing");
    f << kDatasetMagic << "\n";
    f << "# seed " << header.seed << "\n";
    f << "# horizon " << fmt17(obs.horizon) << "\n";
    f << "# count " << obs.size() << "\n";
    f << "# mark_dim " << mark_dim << "\n";
    std::string model = header.model;
    std::replace(model.begin(), model.end(), '\n', ' ');
    f << "# model " << model << "\n";
    f << "# columns t";
    for (int j = 0; j < mark_dim; ++j) f << ",y" << (j + 1);
    f << "\n";
    for (std::size_t i = 0; i < obs.size(); ++i) {
        f << fmt17(obs.times[i]);
        for (int j = 0; j < obs.marks[i].size(); ++j) f << "," << fmt17(obs.marks[i][j]);
        f << "\n";
    }
    if (!f) throw DatasetError("write failed for " + path);
}

void write_truth(const std::string& path, const std::vector<double>& times, const std::vector<State>& truth) {
    if (times.size() != truth.size()) throw InvalidArgument("truth times and states differ in length");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DatasetError("cannot open " + path + " for writing");
    const int n = truth.empty() ? 0 : static_cast<int>(truth.front().size());
    f << kTruthMagic << "\n# columns t";
    for (int j = 0; j < n; ++j) f << ",x" << (j + 1);
    f << "\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
        f << fmt17(times[i]);
        for (int j = 0; j < truth[i].size(); ++j) f << "," << fmt17(truth[i][j]);
        f << "\n";
    }
}

ObservationSet read_dataset(const std::string& path, DatasetHeader* header) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DatasetError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw DatasetError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kDatasetMagic) {
        if (line.rfind("# coxpf-dataset", 0) == 0) throw DatasetError(path + ": unsupported dataset version '" + line + "'");
        throw DatasetError(path + ": not a coxpf dataset");
    }
    ObservationSet obs;
    bool have_horizon = false;
    long count = -1;
    int mark_dim = -1;
    DatasetHeader h;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream is(line.substr(1));
            std::string key;
            is >> key;
            std::string rest;
            std::getline(is, rest);
            if (!rest.empty() && rest[0] == ' ') rest.erase(0, 1);
            if (key == "horizon") {
                obs.horizon = parse_double(rest, path);
                have_horizon = true;
            } else if (key == "count") {
                count = std::stol(rest);
            } else if (key == "mark_dim") {
                mark_dim = std::stoi(rest);
            } else if (key == "seed") {
                h.seed = std::stoull(rest);
            } else if (key == "model") {
                h.model = rest;
            }
            continue;
        }
        std::vector<double> vals;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            vals.push_back(parse_double(line.substr(start, comma - start), path));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (mark_dim >= 0 && static_cast<int>(vals.size()) != mark_dim + 1)
            throw DatasetError(path + ": row has " + std::to_string(vals.size()) + " columns, expected " +
                               std::to_string(mark_dim + 1));
        obs.times.push_back(vals[0]);
        Vector y(static_cast<int>(vals.size()) - 1);
        for (int j = 0; j + 1 < static_cast<int>(vals.size()); ++j) y[j] = vals[j + 1];
        obs.marks.push_back(y);
    }
    if (!have_horizon) throw DatasetError(path + ": missing horizon header");
    if (count >= 0 && static_cast<std::size_t>(count) != obs.size())
        throw DatasetError(path + ": header count does not match the number of rows");
    try {
        obs.validate();
    } catch (const InvalidArgument& e) {
        throw DatasetError(path + ": " + e.what());
    }
    if (header) *header = h;
    return obs;
}

}  // namespace coxpf
