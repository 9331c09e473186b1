#include "qds/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "qds/errors.hpp"

namespace qds::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ValidationError("config: " + path + " " + what);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key()))
            fail(path.empty() ? item.key() : path + "." + item.key(), "is not a recognized key");
    }
}

const json* find(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "must be a number");
    return v.get<double>();
}

std::int64_t as_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "must be an integer");
    return v.get<std::int64_t>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "must be a string");
    return v.get<std::string>();
}

void read_number(const json& obj, const char* key, const std::string& section, double& out) {
    if (const json* v = find(obj, key)) out = as_number(*v, section + "." + key);
}

channel::LinkParams parse_link(const json& j) {
    check_keys(j, "link",
               {"mu", "fiber_loss_db", "receiver_loss_db", "detector_efficiency",
                "dark_count_rate_hz", "clock_rate_hz", "visibility", "qber_override",
                "detection_rate_override_hz"});
    channel::LinkParams link;
    read_number(j, "mu", "link", link.mu);
    read_number(j, "fiber_loss_db", "link", link.fiber_loss_db);
    read_number(j, "receiver_loss_db", "link", link.receiver_loss_db);
    read_number(j, "detector_efficiency", "link", link.detector_efficiency);
    read_number(j, "dark_count_rate_hz", "link", link.dark_count_rate_hz);
    read_number(j, "clock_rate_hz", "link", link.clock_rate_hz);
    read_number(j, "visibility", "link", link.visibility);
    if (const json* v = find(j, "qber_override"))
        link.qber_override = as_number(*v, "link.qber_override");
    if (const json* v = find(j, "detection_rate_override_hz"))
        link.detection_rate_override_hz = as_number(*v, "link.detection_rate_override_hz");
    return link;
}

SecurityConfig parse_security(const json& j) {
    check_keys(j, "security", {"epsilon", "p_e_override", "k_policy", "k", "rate_convention"});
    SecurityConfig sec;
    read_number(j, "epsilon", "security", sec.epsilon);
    if (const json* v = find(j, "p_e_override"))
        sec.p_e_override = as_number(*v, "security.p_e_override");
    if (const json* v = find(j, "k_policy")) sec.k_policy = as_string(*v, "security.k_policy");
    if (const json* v = find(j, "k")) sec.k = as_integer(*v, "security.k");
    if (const json* v = find(j, "rate_convention"))
        sec.rate_convention = as_string(*v, "security.rate_convention");
    return sec;
}

ProtocolConfig parse_protocol(const json& j) {
    check_keys(j, "protocol", {"l", "message_bits", "shared_bits"});
    ProtocolConfig proto;
    if (const json* v = find(j, "l")) proto.l = as_integer(*v, "protocol.l");
    if (const json* v = find(j, "message_bits")) {
        if (!v->is_array()) fail("protocol.message_bits", "must be an array of bits");
        proto.message_bits.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            const std::string path = "protocol.message_bits[" + std::to_string(i) + "]";
            const std::int64_t bit = as_integer((*v)[i], path);
            if (bit != 0 && bit != 1) fail(path, "must be 0 or 1");
            proto.message_bits.push_back(static_cast<std::uint8_t>(bit));
        }
    }
    if (const json* v = find(j, "shared_bits"))
        proto.shared_bits = as_integer(*v, "protocol.shared_bits");
    return proto;
}

SimulationConfig parse_simulation(const json& j) {
    check_keys(j, "simulation", {"trials", "seed", "workers"});
    SimulationConfig sim;
    if (const json* v = find(j, "trials")) sim.trials = as_integer(*v, "simulation.trials");
    if (const json* v = find(j, "seed")) {
        if (!v->is_number_unsigned()) fail("simulation.seed", "must be an unsigned integer");
        sim.seed = v->get<std::uint64_t>();
    }
    if (const json* v = find(j, "workers"))
        sim.workers = static_cast<int>(as_integer(*v, "simulation.workers"));
    return sim;
}

OutputConfig parse_output(const json& j) {
    check_keys(j, "output", {"format", "path"});
    OutputConfig out;
    if (const json* v = find(j, "format")) out.format = as_string(*v, "output.format");
    if (const json* v = find(j, "path")) out.path = as_string(*v, "output.path");
    return out;
}

} // namespace

void RunConfig::validate() const {
    link.validate();
    if (!std::isfinite(security.epsilon) || security.epsilon <= 0.0 || security.epsilon >= 1.0)
        throw ValidationError("config: security.epsilon must lie in (0, 1)");
    if (security.p_e_override &&
        (!std::isfinite(*security.p_e_override) || *security.p_e_override <= 0.0 ||
         *security.p_e_override > 0.5))
        throw ValidationError("config: security.p_e_override must lie in (0, 0.5]");
    if (security.k_policy != "equal_l" && security.k_policy != "fixed")
        throw ValidationError("config: security.k_policy must be \"equal_l\" or \"fixed\"");
    if (security.k_policy == "fixed" && !security.k)
        throw ValidationError("config: security.k_policy \"fixed\" requires security.k");
    if (security.k && *security.k < 1)
        throw ValidationError("config: security.k must be >= 1");
    if (security.rate_convention != "per_sender" && security.rate_convention != "alternating")
        throw ValidationError(
            "config: security.rate_convention must be \"per_sender\" or \"alternating\"");
    if (protocol.l && (*protocol.l < 2 || *protocol.l % 2 != 0))
        throw ValidationError("config: protocol.l must be even and >= 2");
    if (protocol.shared_bits < 0)
        throw ValidationError("config: protocol.shared_bits must be >= 0");
    if (simulation.trials < 1)
        throw ValidationError("config: simulation.trials must be >= 1");
    if (simulation.workers < 1)
        throw ValidationError("config: simulation.workers must be >= 1");
    if (output.format != "json" && output.format != "csv")
        throw ValidationError("config: output.format must be \"json\" or \"csv\"");
}

RunConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("config: top level must be a JSON object");
    check_keys(j, "", {"link", "security", "protocol", "simulation", "output"});
    RunConfig config;
    if (const json* v = find(j, "link")) {
        if (!v->is_object()) fail("link", "must be an object");
        config.link = parse_link(*v);
    }
    if (const json* v = find(j, "security")) {
        if (!v->is_object()) fail("security", "must be an object");
        config.security = parse_security(*v);
    }
    if (const json* v = find(j, "protocol")) {
        if (!v->is_object()) fail("protocol", "must be an object");
        config.protocol = parse_protocol(*v);
    }
    if (const json* v = find(j, "simulation")) {
        if (!v->is_object()) fail("simulation", "must be an object");
        config.simulation = parse_simulation(*v);
    }
    if (const json* v = find(j, "output")) {
        if (!v->is_object()) fail("output", "must be an object");
        config.output = parse_output(*v);
    }
    config.validate();
    return config;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open \"" + path + "\"");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config: \"" + path + "\" is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

nlohmann::json config_to_json(const RunConfig& config) {
    nlohmann::json link = {
        {"mu", config.link.mu},
        {"fiber_loss_db", config.link.fiber_loss_db},
        {"receiver_loss_db", config.link.receiver_loss_db},
        {"detector_efficiency", config.link.detector_efficiency},
        {"dark_count_rate_hz", config.link.dark_count_rate_hz},
        {"clock_rate_hz", config.link.clock_rate_hz},
        {"visibility", config.link.visibility},
    };
    if (config.link.qber_override) link["qber_override"] = *config.link.qber_override;
    if (config.link.detection_rate_override_hz)
        link["detection_rate_override_hz"] = *config.link.detection_rate_override_hz;

    nlohmann::json security = {
        {"epsilon", config.security.epsilon},
        {"k_policy", config.security.k_policy},
        {"rate_convention", config.security.rate_convention},
    };
    if (config.security.p_e_override) security["p_e_override"] = *config.security.p_e_override;
    if (config.security.k) security["k"] = *config.security.k;

    nlohmann::json protocol = {
        {"message_bits", config.protocol.message_bits},
        {"shared_bits", config.protocol.shared_bits},
    };
    if (config.protocol.l) protocol["l"] = *config.protocol.l;

    nlohmann::json simulation = {
        {"trials", config.simulation.trials},
        {"workers", config.simulation.workers},
    };
    if (config.simulation.seed) simulation["seed"] = *config.simulation.seed;

    nlohmann::json output = {{"format", config.output.format}};
    if (config.output.path) output["path"] = *config.output.path;

    return {{"link", link},
            {"security", security},
            {"protocol", protocol},
            {"simulation", simulation},
            {"output", output}};
}

} // namespace qds::config
