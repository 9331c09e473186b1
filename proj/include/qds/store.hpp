#pragma once

#include <string>

#include "json.hpp"

#include "qds/protocol.hpp"

namespace qds::store {

// Versioned JSON envelope for a session's key material, with bit strings
// hex-encoded, so distribution and messaging can run as separate processes.
nlohmann::json to_json(const protocol::SessionStore& store);
protocol::SessionStore from_json(const nlohmann::json& j);

void save(const protocol::SessionStore& store, const std::string& path);
protocol::SessionStore load(const std::string& path);

} // namespace qds::store
