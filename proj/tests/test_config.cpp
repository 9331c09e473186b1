#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include "qds/config.hpp"
#include "qds/errors.hpp"
#include "qds/protocol.hpp"
#include "qds/store.hpp"

using doctest::Approx;
using nlohmann::json;
using qds::config::RunConfig;

namespace {

json full_config_json() {
    return json::parse(R"({
        "link": {
            "mu": 0.2,
            "fiber_loss_db": 31.0,
            "receiver_loss_db": 10.0,
            "detector_efficiency": 0.3,
            "dark_count_rate_hz": 100.0,
            "clock_rate_hz": 1e9,
            "visibility": 1.0,
            "qber_override": 0.0108,
            "detection_rate_override_hz": 1e4
        },
        "security": {
            "epsilon": 1e-4,
            "p_e_override": 0.262,
            "k_policy": "fixed",
            "k": 2512,
            "rate_convention": "alternating"
        },
        "protocol": {
            "l": 2512,
            "message_bits": [0, 1],
            "shared_bits": 2000000
        },
        "simulation": {
            "trials": 5000,
            "seed": 42,
            "workers": 4
        },
        "output": {
            "format": "csv",
            "path": "out.csv"
        }
    })");
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/qds_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

} // namespace

TEST_SUITE("config") {

TEST_CASE("a fully specified document parses field for field") {
    const RunConfig config = qds::config::parse_config(full_config_json());
    CHECK(config.link.mu == Approx(0.2));
    CHECK(config.link.fiber_loss_db == Approx(31.0));
    CHECK(config.link.receiver_loss_db == Approx(10.0));
    CHECK(config.link.detector_efficiency == Approx(0.3));
    CHECK(config.link.dark_count_rate_hz == Approx(100.0));
    CHECK(config.link.clock_rate_hz == Approx(1e9));
    CHECK(config.link.visibility == Approx(1.0));
    REQUIRE(config.link.qber_override.has_value());
    CHECK(*config.link.qber_override == Approx(0.0108));
    REQUIRE(config.link.detection_rate_override_hz.has_value());
    CHECK(*config.link.detection_rate_override_hz == Approx(1e4));

    CHECK(config.security.epsilon == Approx(1e-4));
    REQUIRE(config.security.p_e_override.has_value());
    CHECK(*config.security.p_e_override == Approx(0.262));
    CHECK(config.security.k_policy == "fixed");
    REQUIRE(config.security.k.has_value());
    CHECK(*config.security.k == 2512);
    CHECK(config.security.rate_convention == "alternating");

    REQUIRE(config.protocol.l.has_value());
    CHECK(*config.protocol.l == 2512);
    CHECK(config.protocol.message_bits == std::vector<std::uint8_t>{0, 1});
    CHECK(config.protocol.shared_bits == 2000000);

    CHECK(config.simulation.trials == 5000);
    REQUIRE(config.simulation.seed.has_value());
    CHECK(*config.simulation.seed == 42);
    CHECK(config.simulation.workers == 4);

    CHECK(config.output.format == "csv");
    REQUIRE(config.output.path.has_value());
    CHECK(*config.output.path == "out.csv");
}

TEST_CASE("an empty document falls back to defaults") {
    const RunConfig config = qds::config::parse_config(json::object());
    CHECK(config.security.epsilon == Approx(1e-4));
    CHECK(config.security.k_policy == "equal_l");
    CHECK(config.security.rate_convention == "per_sender");
    CHECK_FALSE(config.security.p_e_override.has_value());
    CHECK_FALSE(config.protocol.l.has_value());
    CHECK(config.protocol.message_bits == std::vector<std::uint8_t>{0});
    CHECK(config.protocol.shared_bits == 2000000);
    CHECK(config.simulation.trials == 100000);
    CHECK_FALSE(config.simulation.seed.has_value());
    CHECK(config.simulation.workers == 1);
    CHECK(config.output.format == "json");
    CHECK_FALSE(config.output.path.has_value());
    CHECK_FALSE(config.link.qber_override.has_value());
    CHECK_FALSE(config.link.detection_rate_override_hz.has_value());
}

TEST_CASE("unknown keys are named in the rejection") {
    auto doc = full_config_json();
    doc["link"]["foo"] = 1;
    CHECK_THROWS_WITH_AS(qds::config::parse_config(doc),
                         "config: link.foo is not a recognized key", qds::ValidationError);

    doc = full_config_json();
    doc["nonsense"] = json::object();
    CHECK_THROWS_WITH_AS(qds::config::parse_config(doc),
                         "config: nonsense is not a recognized key", qds::ValidationError);

    doc = full_config_json();
    doc["security"]["threshold"] = 0.1;
    CHECK_THROWS_WITH_AS(qds::config::parse_config(doc),
                         "config: security.threshold is not a recognized key",
                         qds::ValidationError);
}

TEST_CASE("field types are enforced with their paths") {
    auto doc = full_config_json();
    doc["link"]["mu"] = "high";
    CHECK_THROWS_WITH_AS(qds::config::parse_config(doc), "config: link.mu must be a number",
                         qds::ValidationError);

    doc = full_config_json();
    doc["protocol"]["l"] = 2.5;
    CHECK_THROWS_WITH_AS(qds::config::parse_config(doc), "config: protocol.l must be an integer",
                         qds::ValidationError);

    doc = full_config_json();
    doc["protocol"]["message_bits"] = 0;
    CHECK_THROWS_WITH_AS(qds::config::parse_config(doc),
                         "config: protocol.message_bits must be an array of bits",
                         qds::ValidationError);

    doc = full_config_json();
    doc["protocol"]["message_bits"] = json::array({0, 2});
    CHECK_THROWS_WITH_AS(qds::config::parse_config(doc),
                         "config: protocol.message_bits[1] must be 0 or 1",
                         qds::ValidationError);

    doc = full_config_json();
    doc["simulation"]["seed"] = -1;
    CHECK_THROWS_WITH_AS(qds::config::parse_config(doc),
                         "config: simulation.seed must be an unsigned integer",
                         qds::ValidationError);

    CHECK_THROWS_WITH_AS(qds::config::parse_config(json::array()),
                         "config: top level must be a JSON object", qds::ValidationError);
}

TEST_CASE("semantic validation rejects out-of-range settings") {
    auto reject = [](const char* pointer, json value, const char* message) {
        auto doc = full_config_json();
        doc[json::json_pointer(pointer)] = std::move(value);
        CHECK_THROWS_WITH_AS(qds::config::parse_config(doc), message, qds::ValidationError);
    };
    reject("/security/epsilon", 0.0, "config: security.epsilon must lie in (0, 1)");
    reject("/security/p_e_override", 0.51, "config: security.p_e_override must lie in (0, 0.5]");
    reject("/security/k_policy", "adaptive",
           "config: security.k_policy must be \"equal_l\" or \"fixed\"");
    reject("/security/k", 0, "config: security.k must be >= 1");
    reject("/security/rate_convention", "burst",
           "config: security.rate_convention must be \"per_sender\" or \"alternating\"");
    reject("/protocol/l", 2511, "config: protocol.l must be even and >= 2");
    reject("/protocol/shared_bits", -1, "config: protocol.shared_bits must be >= 0");
    reject("/simulation/trials", 0, "config: simulation.trials must be >= 1");
    reject("/simulation/workers", 0, "config: simulation.workers must be >= 1");
    reject("/output/format", "xml", "config: output.format must be \"json\" or \"csv\"");

    auto doc = full_config_json();
    doc["security"].erase("k");
    CHECK_THROWS_WITH_AS(qds::config::parse_config(doc),
                         "config: security.k_policy \"fixed\" requires security.k",
                         qds::ValidationError);
}

TEST_CASE("serialization round trips through the parser") {
    const RunConfig config = qds::config::parse_config(full_config_json());
    const json dumped = qds::config::config_to_json(config);
    const RunConfig again = qds::config::parse_config(dumped);
    CHECK(qds::config::config_to_json(again).dump() == dumped.dump());

    const RunConfig defaults = qds::config::parse_config(json::object());
    const json dumped_defaults = qds::config::config_to_json(defaults);
    CHECK(qds::config::config_to_json(qds::config::parse_config(dumped_defaults)).dump() ==
          dumped_defaults.dump());
}

TEST_CASE("configs load from disk with readable failures") {
    TempFile file("config.json");
    std::ofstream(file.path) << full_config_json().dump(2);
    const RunConfig config = qds::config::load_config(file.path);
    CHECK(config.simulation.trials == 5000);

    CHECK_THROWS_AS(qds::config::load_config("/tmp/does_not_exist_qds.json"),
                    qds::ValidationError);

    TempFile broken("broken.json");
    std::ofstream(broken.path) << "{not json";
    CHECK_THROWS_AS(qds::config::load_config(broken.path), qds::ValidationError);
}

TEST_CASE("session stores round trip through their JSON envelope") {
    qds::channel::LinkParams link;
    link.mu = 0.2;
    link.fiber_loss_db = 31.0;
    link.receiver_loss_db = 10.0;
    link.detector_efficiency = 0.3;
    link.dark_count_rate_hz = 100.0;
    link.clock_rate_hz = 1e9;
    link.visibility = 1.0;
    link.qber_override = 0.05;
    const auto store = qds::protocol::run_distribution(link, 60, 12, 2024, {});

    const json j = qds::store::to_json(store);
    CHECK(j["kind"] == "qds-store");
    CHECK(j["version"] == 1);
    const auto loaded = qds::store::from_json(j);
    CHECK(qds::store::to_json(loaded).dump() == j.dump());
    CHECK(loaded.e_hat == store.e_hat);
    CHECK(loaded.l == store.l);
    CHECK(loaded.bob.keys[0].own_kept == store.bob.keys[0].own_kept);
    CHECK(loaded.alice.messages[1].charlie_outcomes == store.alice.messages[1].charlie_outcomes);

    TempFile file("store.json");
    qds::store::save(store, file.path);
    const auto from_disk = qds::store::load(file.path);
    CHECK(qds::store::to_json(from_disk).dump() == j.dump());
}

TEST_CASE("foreign or future store files are refused") {
    qds::channel::LinkParams link;
    link.qber_override = 0.0;
    const auto store = qds::protocol::run_distribution(link, 8, 4, 1, {});

    json wrong_kind = qds::store::to_json(store);
    wrong_kind["kind"] = "something-else";
    CHECK_THROWS_AS(qds::store::from_json(wrong_kind), qds::ValidationError);

    json wrong_version = qds::store::to_json(store);
    wrong_version["version"] = 2;
    CHECK_THROWS_WITH_AS(qds::store::from_json(wrong_version), "store: unsupported version 2",
                         qds::ValidationError);
}

} // TEST_SUITE
