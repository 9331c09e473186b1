#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qds/channel.hpp"
#include "qds/frame.hpp"
#include "qds/protocol.hpp"
#include "qds/security.hpp"

namespace qds::net {

enum class Transport { inproc, socket };

Transport transport_from_string(const std::string& name);
const char* to_string(Transport transport);

struct SessionConfig {
    channel::LinkParams link;
    std::int64_t l = 0;
    std::int64_t k = 0;
    security::Thresholds thresholds;
    std::optional<double> abort_threshold; // distribution aborts at this e_hat
    std::vector<std::uint8_t> message_bits{0};
    std::uint64_t seed = 0;
    std::string session_id; // derived from the seed when empty

    // Fault injection: lose every frame of this type in transit. Only the
    // in-process transport supports it.
    std::optional<FrameType> drop_frame_type;

    std::string socket_host = "127.0.0.1";
    int alice_port = 0; // 0 picks an ephemeral port
    int bob_port = 0;
    int socket_timeout_ms = 10000;
};

// One frame as carried by a channel. step is the record's index in the
// canonical transcript order (channel, seq, sender), which is independent
// of transport timing.
struct TranscriptRecord {
    ChannelId channel = ChannelId::alice_bob;
    Party from = Party::alice;
    Party to = Party::bob;
    std::uint64_t step = 0;
    Frame frame;
};

std::string transcript_to_jsonl(const std::vector<TranscriptRecord>& records);

struct MessageReport {
    std::uint8_t message_bit = 0;
    std::optional<protocol::Verdict> bob;
    std::optional<protocol::Verdict> charlie;
};

struct SessionResult {
    double e_hat = 0.0;
    std::int64_t l = 0;
    std::int64_t k = 0;
    std::vector<MessageReport> messages;
    std::vector<TranscriptRecord> transcript;
};

// Run the full three-endpoint session: key blocks, public-coin error
// estimation, half-forwarding between the recipients, then signing and both
// verifications. Deterministic in (config, seed) for either transport.
SessionResult run_session(const SessionConfig& config, Transport transport);

} // namespace qds::net
