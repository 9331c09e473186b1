#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "qds/protocol.hpp"

namespace qds::net {

using protocol::Party;

enum class FrameType {
    keepalive,
    key_block,
    error_est,
    forward_half,
    signed_message,
    forwarded_message,
    verdict,
};

const char* to_string(FrameType type);
FrameType frame_type_from_string(const std::string& name); // FrameError on unknown type

// One classical message: a 4-byte big-endian length prefix followed by that
// many bytes of UTF-8 JSON holding type, session, seq and a per-type body.
struct Frame {
    FrameType type = FrameType::keepalive;
    std::string session;
    std::uint64_t seq = 0;
    nlohmann::json body = nlohmann::json::object();

    bool operator==(const Frame& other) const;
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);

// Decodes exactly one frame occupying the whole buffer. Truncation, length
// mismatch, malformed JSON, missing fields and unknown types each raise a
// FrameError with the matching kind.
Frame decode_frame(const std::vector<std::uint8_t>& bytes);

// Payload length announced by a 4-byte prefix.
std::uint32_t decode_length_prefix(const std::uint8_t* bytes);

enum class ChannelId { alice_bob, alice_charlie, bob_charlie };

const char* to_string(ChannelId id);

struct ChannelSpec {
    ChannelId id = ChannelId::alice_bob;
    Party low = Party::alice;
    Party high = Party::bob;
    bool authenticated = true;
    bool confidential = false;
};

ChannelSpec channel_spec(ChannelId id);
ChannelId channel_between(Party a, Party b);
Party channel_peer(ChannelId id, Party self);

// Which channel may carry a given frame type. Confidential material is
// restricted to the recipient-to-recipient channel; a violation is a
// protocol error, never a silent drop.
void check_channel_policy(FrameType type, ChannelId channel);

} // namespace qds::net
