#pragma once

#include "coxpf/calibration.hpp"
#include "coxpf/datagen.hpp"
#include "coxpf/filters.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <string>

namespace coxpf::app {

using nlohmann::json;

/// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

json load_config(const std::string& path);

/**
 * Builds models from the "model" block of a configuration. Named parameter
 * overrides (used by PMMH) are applied on top of the block; the Born-Wolf
 * table is shared between all models built by one builder.
 */
class ModelBuilder {
public:
    explicit ModelBuilder(json model_block);

    StateSpaceModel build(const std::map<std::string, double>& overrides = {}) const;
    const json& block() const { return block_; }
    /// Names accepted by build() overrides.
    static bool known_parameter(const std::string& name);

private:
    json block_;
    mutable std::shared_ptr<const BornWolfPsf> psf_;
    mutable json psf_key_;
};

/// Expand the preset ("benchmark", "microscopy") and fill defaults.
json normalise_model_block(const json& block);

struct FilterSettings {
    WeightScheme scheme = WeightScheme::poisson;
    FilterOptions options;
    EstimatorConfig estimator;
};

FilterSettings parse_filter_settings(const json& block);
PmmhConfig parse_pmmh_config(const json& block);
ThinningMode parse_thinning(const std::string& s);

FilterOutput run_configured_filter(const StateSpaceModel& model, const ObservationSet& obs, const FilterSettings& s);

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

}  // namespace coxpf::app
