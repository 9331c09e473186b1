#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qds/channel.hpp"

namespace qds::config {

struct SecurityConfig {
    double epsilon = 1e-4;
    std::optional<double> p_e_override;
    std::string k_policy = "equal_l"; // equal_l | fixed (requires k)
    std::optional<std::int64_t> k;
    std::string rate_convention = "per_sender"; // per_sender | alternating
};

struct ProtocolConfig {
    std::optional<std::int64_t> l; // computed from epsilon when absent
    std::vector<std::uint8_t> message_bits{0};
    std::int64_t shared_bits = 2000000;
};

struct SimulationConfig {
    std::int64_t trials = 100000;
    std::optional<std::uint64_t> seed;
    int workers = 1;
};

struct OutputConfig {
    std::string format = "json"; // json | csv
    std::optional<std::string> path;
};

struct RunConfig {
    channel::LinkParams link;
    SecurityConfig security;
    ProtocolConfig protocol;
    SimulationConfig simulation;
    OutputConfig output;

    void validate() const; // field-level messages
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json config_to_json(const RunConfig& config);

} // namespace qds::config
