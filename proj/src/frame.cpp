#include "qds/frame.hpp"

#include "qds/errors.hpp"

namespace qds::net {

const char* to_string(FrameType type) {
    switch (type) {
    case FrameType::keepalive: return "keepalive";
    case FrameType::key_block: return "key_block";
    case FrameType::error_est: return "error_est";
    case FrameType::forward_half: return "forward_half";
    case FrameType::signed_message: return "signed_message";
    case FrameType::forwarded_message: return "forwarded_message";
    case FrameType::verdict: return "verdict";
    }
    return "unknown";
}

FrameType frame_type_from_string(const std::string& name) {
    for (FrameType type : {FrameType::keepalive, FrameType::key_block, FrameType::error_est,
                           FrameType::forward_half, FrameType::signed_message,
                           FrameType::forwarded_message, FrameType::verdict}) {
        if (name == to_string(type)) return type;
    }
    throw FrameError(FrameErrorKind::unknown_type, "unknown frame type \"" + name + "\"");
}

bool Frame::operator==(const Frame& other) const {
    return type == other.type && session == other.session && seq == other.seq &&
           body == other.body;
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    nlohmann::json payload = {
        {"type", to_string(frame.type)},
        {"session", frame.session},
        {"seq", frame.seq},
        {"body", frame.body},
    };
    const std::string text = payload.dump();
    if (text.size() > 0xffffffffull)
        throw ValidationError("frame payload exceeds the 4-byte length prefix");

    std::vector<std::uint8_t> bytes;
    bytes.reserve(4 + text.size());
    const std::uint32_t n = static_cast<std::uint32_t>(text.size());
    bytes.push_back(static_cast<std::uint8_t>(n >> 24));
    bytes.push_back(static_cast<std::uint8_t>(n >> 16));
    bytes.push_back(static_cast<std::uint8_t>(n >> 8));
    bytes.push_back(static_cast<std::uint8_t>(n));
    bytes.insert(bytes.end(), text.begin(), text.end());
    return bytes;
}

std::uint32_t decode_length_prefix(const std::uint8_t* bytes) {
    return (static_cast<std::uint32_t>(bytes[0]) << 24) |
           (static_cast<std::uint32_t>(bytes[1]) << 16) |
           (static_cast<std::uint32_t>(bytes[2]) << 8) | static_cast<std::uint32_t>(bytes[3]);
}

Frame decode_frame(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4)
        throw FrameError(FrameErrorKind::truncated, "frame shorter than its length prefix");
    const std::uint32_t announced = decode_length_prefix(bytes.data());
    if (bytes.size() < 4 + static_cast<std::size_t>(announced))
        throw FrameError(FrameErrorKind::truncated, "frame payload truncated");
    if (bytes.size() != 4 + static_cast<std::size_t>(announced))
        throw FrameError(FrameErrorKind::length_mismatch,
                         "frame length prefix disagrees with payload size");

    nlohmann::json payload;
    try {
        payload = nlohmann::json::parse(bytes.begin() + 4, bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw FrameError(FrameErrorKind::bad_json, std::string("frame payload: ") + e.what());
    }
    if (!payload.is_object() || !payload.contains("type") || !payload.contains("session") ||
        !payload.contains("seq") || !payload.contains("body") ||
        !payload["type"].is_string() || !payload["session"].is_string() ||
        !payload["seq"].is_number_unsigned() || !payload["body"].is_object())
        throw FrameError(FrameErrorKind::bad_fields,
                         "frame payload missing or mistyping type/session/seq/body");

    Frame frame;
    frame.type = frame_type_from_string(payload["type"].get<std::string>());
    frame.session = payload["session"].get<std::string>();
    frame.seq = payload["seq"].get<std::uint64_t>();
    frame.body = payload["body"];
    return frame;
}

const char* to_string(ChannelId id) {
    switch (id) {
    case ChannelId::alice_bob: return "alice_bob";
    case ChannelId::alice_charlie: return "alice_charlie";
    case ChannelId::bob_charlie: return "bob_charlie";
    }
    return "unknown";
}

ChannelSpec channel_spec(ChannelId id) {
    switch (id) {
    case ChannelId::alice_bob:
        return {id, Party::alice, Party::bob, true, false};
    case ChannelId::alice_charlie:
        return {id, Party::alice, Party::charlie, true, false};
    case ChannelId::bob_charlie:
        return {id, Party::bob, Party::charlie, true, true};
    }
    throw ValidationError("unknown channel");
}

ChannelId channel_between(Party a, Party b) {
    if (a == b) throw ValidationError("a channel needs two distinct parties");
    const bool has_alice = a == Party::alice || b == Party::alice;
    const bool has_bob = a == Party::bob || b == Party::bob;
    if (has_alice) return has_bob ? ChannelId::alice_bob : ChannelId::alice_charlie;
    return ChannelId::bob_charlie;
}

Party channel_peer(ChannelId id, Party self) {
    const ChannelSpec spec = channel_spec(id);
    if (spec.low == self) return spec.high;
    if (spec.high == self) return spec.low;
    throw ValidationError("party is not an endpoint of this channel");
}

void check_channel_policy(FrameType type, ChannelId channel) {
    bool allowed = true;
    switch (type) {
    case FrameType::keepalive:
        break;
    case FrameType::key_block:
    case FrameType::error_est:
    case FrameType::verdict:
        allowed = channel != ChannelId::bob_charlie;
        break;
    case FrameType::signed_message:
        allowed = channel == ChannelId::alice_bob;
        break;
    case FrameType::forward_half:
    case FrameType::forwarded_message:
        allowed = channel == ChannelId::bob_charlie;
        break;
    }
    if (!allowed)
        throw ProtocolError(std::string("channel violation: ") + to_string(type) +
                            " does not belong on " + to_string(channel));
}

} // namespace qds::net
