#pragma once

#include "coxpf/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace coxpf {

/// Exact sequential draws of X at the given times (X_0 from the initial law at time 0).
std::vector<State> simulate_state_path(const LinearSde& sde, const InitialLaw& initial,
                                       const std::vector<double>& times, RandomStream& rng);

enum class ThinningMode {
    listing,    // state advances only at accepted candidates
    textbook,   // state advances through every candidate
};

struct SimulatedData {
    ObservationSet observations;
    std::vector<State> truth;  // state at each arrival time
    std::size_t candidates = 0;
};

SimulatedData simulate_observations(const StateSpaceModel& model, double lambda_max, double horizon,
                                    RandomStream& rng, ThinningMode mode = ThinningMode::listing);

/// Default dominating rate: lambda at the origin (rate0 for the depth model).
double default_lambda_max(const StateSpaceModel& model);

struct DatasetHeader {
    std::string model;        // free-form model description (JSON text)
    std::uint64_t seed = 0;
};

void write_dataset(const std::string& path, const ObservationSet& obs, const DatasetHeader& header);
void write_truth(const std::string& path, const std::vector<double>& times, const std::vector<State>& truth);
ObservationSet read_dataset(const std::string& path, DatasetHeader* header = nullptr);

class DatasetError : public Error {
public:
    using Error::Error;
};

}  // namespace coxpf
