#include "qds/store.hpp"

#include <fstream>

#include "qds/bits.hpp"
#include "qds/errors.hpp"

namespace qds::store {

namespace {

using nlohmann::json;
using protocol::PositionBit;

constexpr int store_version = 1;

json outcomes_to_json(const std::vector<PositionBit>& outcomes) {
    json positions = json::array();
    Bits bits;
    bits.reserve(outcomes.size());
    for (const PositionBit& pb : outcomes) {
        positions.push_back(pb.position);
        bits.push_back(pb.bit);
    }
    return {{"positions", std::move(positions)},
            {"bits", bits_to_hex(bits)},
            {"bit_length", outcomes.size()}};
}

const json& field(const json& obj, const char* key, const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end())
        throw ValidationError("store: missing field " + path + "." + key);
    return *it;
}

std::vector<PositionBit> outcomes_from_json(const json& j, const std::string& path) {
    std::vector<std::uint32_t> positions;
    Bits bits;
    try {
        positions = field(j, "positions", path).get<std::vector<std::uint32_t>>();
        bits = bits_from_hex(field(j, "bits", path).get<std::string>(),
                             field(j, "bit_length", path).get<std::size_t>());
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError("store: bad field under " + path + ": " + e.what());
    }
    if (positions.size() != bits.size())
        throw ValidationError("store: positions and bits disagree under " + path);
    std::vector<PositionBit> outcomes;
    outcomes.reserve(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) outcomes.push_back({positions[i], bits[i]});
    return outcomes;
}

template <typename T>
T scalar(const json& obj, const char* key, const std::string& path) {
    try {
        return field(obj, key, path).get<T>();
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError("store: bad field " + path + "." + key + ": " + e.what());
    }
}

json key_to_json(const protocol::SymmetrizedKey& key) {
    return {{"own_kept", outcomes_to_json(key.own_kept)},
            {"other_received", outcomes_to_json(key.other_received)},
            {"used", key.used}};
}

protocol::SymmetrizedKey key_from_json(const json& j, protocol::Party owner, std::uint8_t mv,
                                       const std::string& path) {
    protocol::SymmetrizedKey key;
    key.owner = owner;
    key.message_value = mv;
    key.own_kept = outcomes_from_json(field(j, "own_kept", path), path + ".own_kept");
    key.other_received =
        outcomes_from_json(field(j, "other_received", path), path + ".other_received");
    key.used = scalar<bool>(j, "used", path);
    return key;
}

std::string message_key(std::uint8_t mv) { return mv == 0 ? "m0" : "m1"; }

} // namespace

nlohmann::json to_json(const protocol::SessionStore& store) {
    json alice = json::object();
    for (std::uint8_t mv = 0; mv < 2; ++mv) {
        const auto& msg = store.alice.messages[mv];
        alice[message_key(mv)] = {{"present", msg.present},
                                  {"used", msg.used},
                                  {"bob_outcomes", outcomes_to_json(msg.bob_outcomes)},
                                  {"charlie_outcomes", outcomes_to_json(msg.charlie_outcomes)}};
    }
    json bob = json::object();
    json charlie = json::object();
    for (std::uint8_t mv = 0; mv < 2; ++mv) {
        bob[message_key(mv)] = key_to_json(store.bob.keys[mv]);
        charlie[message_key(mv)] = key_to_json(store.charlie.keys[mv]);
    }
    return {{"kind", "qds-store"}, {"version", store_version},
            {"l", store.l},        {"k", store.k},
            {"e_hat", store.e_hat}, {"seed", store.seed},
            {"alice", alice},      {"bob", bob},
            {"charlie", charlie}};
}

protocol::SessionStore from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("store: top level must be a JSON object");
    if (scalar<std::string>(j, "kind", "store") != "qds-store")
        throw ValidationError("store: not a session store file");
    const int version = scalar<int>(j, "version", "store");
    if (version != store_version)
        throw ValidationError("store: unsupported version " + std::to_string(version));

    protocol::SessionStore store;
    store.l = scalar<std::int64_t>(j, "l", "store");
    store.k = scalar<std::int64_t>(j, "k", "store");
    store.e_hat = scalar<double>(j, "e_hat", "store");
    store.seed = scalar<std::uint64_t>(j, "seed", "store");
    store.bob.owner = protocol::Party::bob;
    store.charlie.owner = protocol::Party::charlie;

    const json& alice = field(j, "alice", "store");
    const json& bob = field(j, "bob", "store");
    const json& charlie = field(j, "charlie", "store");
    for (std::uint8_t mv = 0; mv < 2; ++mv) {
        const std::string mk = message_key(mv);
        const json& msg = field(alice, mk.c_str(), "store.alice");
        auto& out = store.alice.messages[mv];
        out.present = scalar<bool>(msg, "present", "store.alice." + mk);
        out.used = scalar<bool>(msg, "used", "store.alice." + mk);
        out.bob_outcomes = outcomes_from_json(field(msg, "bob_outcomes", "store.alice." + mk),
                                              "store.alice." + mk + ".bob_outcomes");
        out.charlie_outcomes =
            outcomes_from_json(field(msg, "charlie_outcomes", "store.alice." + mk),
                               "store.alice." + mk + ".charlie_outcomes");
        store.bob.keys[mv] = key_from_json(field(bob, mk.c_str(), "store.bob"),
                                           protocol::Party::bob, mv, "store.bob." + mk);
        store.charlie.keys[mv] = key_from_json(field(charlie, mk.c_str(), "store.charlie"),
                                               protocol::Party::charlie, mv,
                                               "store.charlie." + mk);
    }
    return store;
}

void save(const protocol::SessionStore& store, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("store: cannot write \"" + path + "\"");
    out << to_json(store).dump(2) << '\n';
    if (!out) throw ValidationError("store: failed writing \"" + path + "\"");
}

protocol::SessionStore load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("store: cannot open \"" + path + "\"");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("store: \"" + path + "\" is not valid JSON: " + e.what());
    }
    return from_json(j);
}

} // namespace qds::store
