#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "doctest.h"

#include "qds/errors.hpp"
#include "qds/frame.hpp"
#include "qds/protocol.hpp"
#include "qds/rng.hpp"
#include "qds/session.hpp"

using qds::FrameError;
using qds::FrameErrorKind;
using qds::net::ChannelId;
using qds::net::Frame;
using qds::net::FrameType;
using qds::net::Party;
using qds::net::SessionConfig;
using qds::net::Transport;

namespace {

SessionConfig small_session(std::uint64_t seed, double flip_probability = 0.0) {
    SessionConfig cfg;
    cfg.link.mu = 0.2;
    cfg.link.fiber_loss_db = 31.0;
    cfg.link.receiver_loss_db = 10.0;
    cfg.link.detector_efficiency = 0.3;
    cfg.link.dark_count_rate_hz = 100.0;
    cfg.link.clock_rate_hz = 1e9;
    cfg.link.visibility = 1.0;
    cfg.link.qber_override = flip_probability;
    cfg.l = 8;
    cfg.k = 4;
    cfg.thresholds = {0.2512, 0.0736, 0.1992};
    cfg.message_bits = {0};
    cfg.seed = seed;
    return cfg;
}

FrameErrorKind kind_of(const std::vector<std::uint8_t>& bytes) {
    try {
        qds::net::decode_frame(bytes);
    } catch (const FrameError& e) {
        return e.kind();
    }
    throw std::logic_error("expected a frame error");
}

} // namespace

TEST_SUITE("net") {

TEST_CASE("frames survive the wire round trip") {
    for (FrameType type :
         {FrameType::keepalive, FrameType::key_block, FrameType::error_est,
          FrameType::forward_half, FrameType::signed_message, FrameType::forwarded_message,
          FrameType::verdict}) {
        Frame frame;
        frame.type = type;
        frame.session = "qds-7";
        frame.seq = 42;
        frame.body = {{"message_value", 1}, {"bits", "a5"}};
        const auto bytes = qds::net::encode_frame(frame);
        CHECK(qds::net::decode_length_prefix(bytes.data()) == bytes.size() - 4);
        CHECK(qds::net::decode_frame(bytes) == frame);
    }
}

TEST_CASE("frame type names round trip and reject strangers") {
    CHECK(qds::net::frame_type_from_string("forward_half") == FrameType::forward_half);
    CHECK_THROWS_AS(qds::net::frame_type_from_string("handshake"), FrameError);
}

TEST_CASE("decode failures carry their diagnosis") {
    const auto valid = qds::net::encode_frame(Frame{});

    CHECK(kind_of({}) == FrameErrorKind::truncated);
    CHECK(kind_of({0, 0, 5}) == FrameErrorKind::truncated);

    auto short_payload = valid;
    short_payload.pop_back();
    CHECK(kind_of(short_payload) == FrameErrorKind::truncated);

    auto trailing = valid;
    trailing.push_back('x');
    CHECK(kind_of(trailing) == FrameErrorKind::length_mismatch);

    const std::string garbage = "{not json";
    std::vector<std::uint8_t> bad_json{0, 0, 0, static_cast<std::uint8_t>(garbage.size())};
    bad_json.insert(bad_json.end(), garbage.begin(), garbage.end());
    CHECK(kind_of(bad_json) == FrameErrorKind::bad_json);

    auto framed = [](const std::string& text) {
        std::vector<std::uint8_t> bytes{0, 0, 0, static_cast<std::uint8_t>(text.size())};
        bytes.insert(bytes.end(), text.begin(), text.end());
        return bytes;
    };
    CHECK(kind_of(framed("[1,2]")) == FrameErrorKind::bad_fields);
    CHECK(kind_of(framed(R"({"type":"verdict","session":"s","seq":1})")) ==
          FrameErrorKind::bad_fields);
    CHECK(kind_of(framed(R"({"type":"verdict","session":"s","seq":-1,"body":{}})")) ==
          FrameErrorKind::bad_fields);
    CHECK(kind_of(framed(R"({"type":"verdict","session":7,"seq":1,"body":{}})")) ==
          FrameErrorKind::bad_fields);
    CHECK(kind_of(framed(R"({"type":"hello","session":"s","seq":1,"body":{}})")) ==
          FrameErrorKind::unknown_type);
}

TEST_CASE("the decoder never escapes the frame error taxonomy") {
    qds::Rng rng(1234);
    const auto valid = qds::net::encode_frame(Frame{});
    for (int i = 0; i < 10000; ++i) {
        std::vector<std::uint8_t> bytes;
        if (i % 2 == 0) {
            const auto n = rng.uniform_index(64);
            bytes.reserve(n);
            for (std::size_t b = 0; b < n; ++b)
                bytes.push_back(static_cast<std::uint8_t>(rng.uniform_index(256)));
        } else {
            bytes = valid;
            bytes[rng.uniform_index(bytes.size())] ^=
                static_cast<std::uint8_t>(1 + rng.uniform_index(255));
        }
        try {
            (void)qds::net::decode_frame(bytes);
        } catch (const FrameError&) {
        }
    }
}

TEST_CASE("channel policy pins each frame type to its channel") {
    using qds::net::check_channel_policy;
    const std::vector<ChannelId> all{ChannelId::alice_bob, ChannelId::alice_charlie,
                                     ChannelId::bob_charlie};
    auto allowed_on = [&](FrameType type, ChannelId channel) {
        switch (type) {
        case FrameType::keepalive: return true;
        case FrameType::key_block:
        case FrameType::error_est:
        case FrameType::verdict: return channel != ChannelId::bob_charlie;
        case FrameType::signed_message: return channel == ChannelId::alice_bob;
        case FrameType::forward_half:
        case FrameType::forwarded_message: return channel == ChannelId::bob_charlie;
        }
        return false;
    };
    for (FrameType type :
         {FrameType::keepalive, FrameType::key_block, FrameType::error_est,
          FrameType::forward_half, FrameType::signed_message, FrameType::forwarded_message,
          FrameType::verdict}) {
        for (ChannelId channel : all) {
            if (allowed_on(type, channel)) {
                CHECK_NOTHROW(check_channel_policy(type, channel));
            } else {
                CHECK_THROWS_AS(check_channel_policy(type, channel), qds::ProtocolError);
            }
        }
    }
}

TEST_CASE("channel topology helpers") {
    CHECK(qds::net::channel_between(Party::alice, Party::bob) == ChannelId::alice_bob);
    CHECK(qds::net::channel_between(Party::charlie, Party::alice) == ChannelId::alice_charlie);
    CHECK(qds::net::channel_between(Party::charlie, Party::bob) == ChannelId::bob_charlie);
    CHECK_THROWS_AS(qds::net::channel_between(Party::bob, Party::bob), qds::ValidationError);

    CHECK(qds::net::channel_peer(ChannelId::alice_bob, Party::alice) == Party::bob);
    CHECK(qds::net::channel_peer(ChannelId::bob_charlie, Party::charlie) == Party::bob);
    CHECK_THROWS_AS(qds::net::channel_peer(ChannelId::bob_charlie, Party::alice),
                    qds::ValidationError);

    for (ChannelId id : {ChannelId::alice_bob, ChannelId::alice_charlie, ChannelId::bob_charlie})
        CHECK(qds::net::channel_spec(id).authenticated);
    CHECK(qds::net::channel_spec(ChannelId::bob_charlie).confidential);
    CHECK_FALSE(qds::net::channel_spec(ChannelId::alice_bob).confidential);
}

TEST_CASE("transport names parse") {
    CHECK(qds::net::transport_from_string("inproc") == Transport::inproc);
    CHECK(qds::net::transport_from_string("socket") == Transport::socket);
    CHECK_THROWS_AS(qds::net::transport_from_string("pigeon"), qds::ValidationError);
}

TEST_CASE("a clean in-process session produces the canonical transcript") {
    const auto result = qds::net::run_session(small_session(7), Transport::inproc);
    CHECK(result.e_hat == 0.0);
    CHECK(result.l == 8);
    CHECK(result.k == 4);
    REQUIRE(result.messages.size() == 1);
    REQUIRE(result.messages[0].bob.has_value());
    REQUIRE(result.messages[0].charlie.has_value());
    CHECK(result.messages[0].bob->accepted);
    CHECK(result.messages[0].bob->mismatches == 0);
    CHECK(result.messages[0].charlie->accepted);
    CHECK(result.messages[0].charlie->mismatches == 0);

    using Entry = std::tuple<ChannelId, FrameType, Party, std::uint64_t>;
    const std::vector<Entry> expected{
        {ChannelId::alice_bob, FrameType::error_est, Party::alice, 1},
        {ChannelId::alice_bob, FrameType::key_block, Party::bob, 1},
        {ChannelId::alice_bob, FrameType::error_est, Party::alice, 2},
        {ChannelId::alice_bob, FrameType::key_block, Party::bob, 2},
        {ChannelId::alice_bob, FrameType::signed_message, Party::alice, 3},
        {ChannelId::alice_bob, FrameType::error_est, Party::bob, 3},
        {ChannelId::alice_bob, FrameType::error_est, Party::bob, 4},
        {ChannelId::alice_bob, FrameType::verdict, Party::bob, 5},
        {ChannelId::alice_charlie, FrameType::error_est, Party::alice, 1},
        {ChannelId::alice_charlie, FrameType::key_block, Party::charlie, 1},
        {ChannelId::alice_charlie, FrameType::error_est, Party::alice, 2},
        {ChannelId::alice_charlie, FrameType::key_block, Party::charlie, 2},
        {ChannelId::alice_charlie, FrameType::error_est, Party::charlie, 3},
        {ChannelId::alice_charlie, FrameType::error_est, Party::charlie, 4},
        {ChannelId::alice_charlie, FrameType::verdict, Party::charlie, 5},
        {ChannelId::bob_charlie, FrameType::forward_half, Party::bob, 1},
        {ChannelId::bob_charlie, FrameType::forward_half, Party::charlie, 1},
        {ChannelId::bob_charlie, FrameType::forward_half, Party::bob, 2},
        {ChannelId::bob_charlie, FrameType::forward_half, Party::charlie, 2},
        {ChannelId::bob_charlie, FrameType::forwarded_message, Party::bob, 3},
    };
    REQUIRE(result.transcript.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& rec = result.transcript[i];
        CHECK(rec.step == i);
        CHECK(rec.channel == std::get<0>(expected[i]));
        CHECK(rec.frame.type == std::get<1>(expected[i]));
        CHECK(rec.from == std::get<2>(expected[i]));
        CHECK(rec.frame.seq == std::get<3>(expected[i]));
        CHECK(rec.to == qds::net::channel_peer(rec.channel, rec.from));
        CHECK(rec.frame.session == "qds-7");
        CHECK_NOTHROW(qds::net::check_channel_policy(rec.frame.type, rec.channel));
    }
}

TEST_CASE("sequence numbers count up per sender and channel") {
    auto cfg = small_session(99, 0.05);
    cfg.l = 16;
    cfg.message_bits = {0, 1};
    const auto result = qds::net::run_session(cfg, Transport::inproc);
    std::map<std::pair<ChannelId, Party>, std::uint64_t> last;
    for (const auto& rec : result.transcript) {
        auto& prev = last[{rec.channel, rec.from}];
        CHECK(rec.frame.seq == prev + 1);
        prev = rec.frame.seq;
    }
}

TEST_CASE("the transcript serializes one record per line") {
    const auto result = qds::net::run_session(small_session(3), Transport::inproc);
    const std::string jsonl = qds::net::transcript_to_jsonl(result.transcript);
    std::size_t lines = 0;
    std::size_t start = 0;
    while (start < jsonl.size()) {
        const auto end = jsonl.find('\n', start);
        REQUIRE(end != std::string::npos);
        const auto line = nlohmann::json::parse(jsonl.substr(start, end - start));
        CHECK(line["step"] == lines);
        CHECK(line.contains("channel"));
        CHECK(line.contains("from"));
        CHECK(line.contains("to"));
        CHECK(line["frame"].contains("type"));
        CHECK(line["frame"].contains("seq"));
        CHECK(line["frame"].contains("body"));
        ++lines;
        start = end + 1;
    }
    CHECK(lines == result.transcript.size());
}

TEST_CASE("losing the forwarded halves stalls symmetrization") {
    auto cfg = small_session(7);
    cfg.drop_frame_type = FrameType::forward_half;
    CHECK_THROWS_WITH_AS(qds::net::run_session(cfg, Transport::inproc),
                         "symmetrization incomplete", qds::ProtocolError);
}

TEST_CASE("losing verdicts or the signed message leaves the session unfinished") {
    auto cfg = small_session(7);
    cfg.drop_frame_type = FrameType::verdict;
    CHECK_THROWS_WITH_AS(qds::net::run_session(cfg, Transport::inproc),
                         "session incomplete: missing verdicts", qds::ProtocolError);

    cfg.drop_frame_type = FrameType::signed_message;
    CHECK_THROWS_WITH_AS(qds::net::run_session(cfg, Transport::inproc),
                         "session incomplete: missing verdicts", qds::ProtocolError);
}

TEST_CASE("dropping an unused frame type changes nothing") {
    auto cfg = small_session(7);
    const auto baseline = qds::net::run_session(cfg, Transport::inproc);
    cfg.drop_frame_type = FrameType::keepalive;
    const auto dropped = qds::net::run_session(cfg, Transport::inproc);
    CHECK(qds::net::transcript_to_jsonl(dropped.transcript) ==
          qds::net::transcript_to_jsonl(baseline.transcript));
}

TEST_CASE("frame dropping is refused on sockets") {
    auto cfg = small_session(7);
    cfg.drop_frame_type = FrameType::verdict;
    CHECK_THROWS_AS(qds::net::run_session(cfg, Transport::socket), qds::ValidationError);
}

TEST_CASE("socket and in-process transports are interchangeable") {
    for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
        auto cfg = small_session(seed, 0.1);
        cfg.l = 16;
        cfg.message_bits = {0, 1};
        const auto inproc = qds::net::run_session(cfg, Transport::inproc);
        const auto socket = qds::net::run_session(cfg, Transport::socket);
        CHECK(inproc.e_hat == socket.e_hat);
        CHECK(qds::net::transcript_to_jsonl(inproc.transcript) ==
              qds::net::transcript_to_jsonl(socket.transcript));
        REQUIRE(inproc.messages.size() == socket.messages.size());
        for (std::size_t m = 0; m < inproc.messages.size(); ++m) {
            const auto& a = inproc.messages[m];
            const auto& b = socket.messages[m];
            REQUIRE(a.bob.has_value() == b.bob.has_value());
            if (a.bob) {
                CHECK(a.bob->accepted == b.bob->accepted);
                CHECK(a.bob->mismatches == b.bob->mismatches);
            }
            REQUIRE(a.charlie.has_value() == b.charlie.has_value());
            if (a.charlie) {
                CHECK(a.charlie->accepted == b.charlie->accepted);
                CHECK(a.charlie->mismatches == b.charlie->mismatches);
            }
        }
    }
}

TEST_CASE("the wire session reproduces the in-memory protocol run") {
    for (std::uint64_t seed : {5ull, 6ull}) {
        auto cfg = small_session(seed, 0.1);
        cfg.l = 16;
        cfg.message_bits = {0, 1};
        const auto wire = qds::net::run_session(cfg, Transport::inproc);

        auto store = qds::protocol::run_distribution(cfg.link, cfg.l, cfg.k, cfg.seed);
        CHECK(wire.e_hat == store.e_hat);
        for (std::uint8_t m : {0, 1}) {
            auto result = qds::protocol::run_messaging(store.alice, store.bob, store.charlie, m,
                                                       cfg.thresholds);
            const auto& report = wire.messages[m];
            REQUIRE(report.bob.has_value());
            CHECK(report.bob->accepted == result.bob.accepted);
            CHECK(report.bob->mismatches == result.bob.mismatches);
            CHECK(report.charlie.has_value() == result.charlie.has_value());
            if (result.charlie) {
                CHECK(report.charlie->accepted == result.charlie->accepted);
                CHECK(report.charlie->mismatches == result.charlie->mismatches);
            }
        }
    }
}

TEST_CASE("session configuration is validated up front") {
    auto cfg = small_session(7);
    cfg.l = 7;
    CHECK_THROWS_AS(qds::net::run_session(cfg, Transport::inproc), qds::ValidationError);
    cfg = small_session(7);
    cfg.k = 0;
    CHECK_THROWS_AS(qds::net::run_session(cfg, Transport::inproc), qds::ValidationError);
    cfg = small_session(7);
    cfg.thresholds = {0.0, 0.1992, 0.0736};
    CHECK_THROWS_AS(qds::net::run_session(cfg, Transport::inproc), qds::ValidationError);
    cfg = small_session(7);
    cfg.message_bits = {2};
    CHECK_THROWS_AS(qds::net::run_session(cfg, Transport::inproc), qds::ValidationError);
}

} // TEST_SUITE
