#pragma once

#include "coxpf/app/config.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace coxpf::app {

/// Flags shared by every subcommand. Command-line values win over the config file.
struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string out_dir = ".";
    std::string dataset;
};

/// Resolved seed / thread count: flag, then config key, then default.
std::uint64_t resolve_seed(const json& cfg, const GlobalOptions& g);
unsigned resolve_threads(const json& cfg, const GlobalOptions& g);

void cmd_simulate(const json& cfg, const GlobalOptions& g);
void cmd_filter(const json& cfg, const GlobalOptions& g);
void cmd_likelihood_bench(const json& cfg, const GlobalOptions& g);
void cmd_pmmh(const json& cfg, const GlobalOptions& g);
void cmd_bounds(const json& cfg, const GlobalOptions& g);

/// Entry point of the coxpf tool. Returns 0 on success, 1 on a runtime
/// error and 2 on a configuration or usage error.
int run_cli(int argc, char** argv);

}  // namespace coxpf::app
