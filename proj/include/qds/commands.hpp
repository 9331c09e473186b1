#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qds/config.hpp"
#include "qds/security.hpp"

namespace qds::commands {

// Rendered report plus the process exit status. The caller decides where the
// text goes; commands only touch the filesystem for store and transcript
// side files.
struct CommandResult {
    int exit_code = 0;
    std::string output;
};

// Everything cmd_params and the per-point sweep rows share: the security
// block sized from the link model plus the rates it supports.
struct DerivedSetup {
    security::SecurityParams params;
    security::RateConvention convention = security::RateConvention::per_sender;
    double detection_rate_hz = 0.0;         // override-aware
    double detection_rate_modeled_hz = 0.0; // link budget only
    double rate_bits_per_s = 0.0;
    double time_to_sign_half_bit_s = 0.0;
    std::int64_t capacity_signed_bits = 0;
};

DerivedSetup derive_setup(const config::RunConfig& config);

CommandResult cmd_params(const config::RunConfig& config);

struct SweepOptions {
    std::string variable = "fiber_loss_db"; // fiber_loss_db | distance_km
    double from = 0.0;
    double to = 0.0;
    double step = 1.0;
    double loss_per_km = 0.34;
};

CommandResult cmd_sweep(const config::RunConfig& config, const SweepOptions& options);

struct RunOptions {
    std::string stage = "both"; // both | dist | msg
    std::string transport = "inproc";
    std::optional<std::string> store_path;
    std::optional<std::string> transcript_path;
};

CommandResult cmd_run(const config::RunConfig& config, const RunOptions& options);

struct SimulateOptions {
    std::vector<double> flip_grid{0.0, 0.1, 0.2, 0.3};
    std::optional<double> s_a_override;
    std::optional<double> s_v_override;
};

CommandResult cmd_simulate(const config::RunConfig& config, const SimulateOptions& options);

} // namespace qds::commands
