#include "qds/session.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <thread>
#include <tuple>
#include <utility>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "qds/errors.hpp"
#include "qds/rng.hpp"

namespace qds::net {

namespace {

using nlohmann::json;
using protocol::Declaration;
using protocol::PositionBit;

Transport checked_transport(const std::string& name) {
    if (name == "inproc") return Transport::inproc;
    if (name == "socket") return Transport::socket;
    throw ValidationError("unknown transport \"" + name + "\"");
}

int party_rank(Party p) {
    switch (p) {
    case Party::alice: return 0;
    case Party::bob: return 1;
    case Party::charlie: return 2;
    }
    return 3;
}

int channel_rank(ChannelId id) {
    switch (id) {
    case ChannelId::alice_bob: return 0;
    case ChannelId::alice_charlie: return 1;
    case ChannelId::bob_charlie: return 2;
    }
    return 3;
}

// Body field access; every shape problem maps to a distinct frame error.
const json& field(const json& body, const char* name) {
    const auto it = body.find(name);
    if (it == body.end())
        throw FrameError(FrameErrorKind::bad_fields,
                         std::string("frame body missing field \"") + name + "\"");
    return *it;
}

template <typename T>
T field_as(const json& body, const char* name) {
    try {
        return field(body, name).get<T>();
    } catch (const FrameError&) {
        throw;
    } catch (const std::exception&) {
        throw FrameError(FrameErrorKind::bad_fields,
                         std::string("frame body field \"") + name + "\" has the wrong type");
    }
}

std::uint8_t field_as_bit(const json& body, const char* name) {
    const auto v = field_as<std::uint64_t>(body, name);
    if (v > 1)
        throw FrameError(FrameErrorKind::bad_fields,
                         std::string("frame body field \"") + name + "\" must be 0 or 1");
    return static_cast<std::uint8_t>(v);
}

json encode_outcomes(const std::vector<PositionBit>& outcomes) {
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

std::vector<PositionBit> decode_outcomes(const json& j) {
    const auto positions = field_as<std::vector<std::uint32_t>>(j, "positions");
    Bits bits;
    try {
        bits = bits_from_hex(field_as<std::string>(j, "bits"),
                             field_as<std::size_t>(j, "bit_length"));
    } catch (const ValidationError& e) {
        throw FrameError(FrameErrorKind::bad_fields, e.what());
    }
    if (bits.size() != positions.size())
        throw FrameError(FrameErrorKind::bad_fields, "positions and bits disagree in length");
    std::vector<PositionBit> outcomes;
    outcomes.reserve(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) outcomes.push_back({positions[i], bits[i]});
    return outcomes;
}

json encode_declaration(const Declaration& decl) {
    return {{"message_bit", decl.message_bit},
            {"bob_string", encode_outcomes(decl.bob_string_outcomes)},
            {"charlie_string", encode_outcomes(decl.charlie_string_outcomes)}};
}

Declaration decode_declaration(const json& j) {
    Declaration decl;
    decl.message_bit = field_as_bit(j, "message_bit");
    decl.bob_string_outcomes = decode_outcomes(field(j, "bob_string"));
    decl.charlie_string_outcomes = decode_outcomes(field(j, "charlie_string"));
    return decl;
}

json encode_verdict(Party party, std::uint64_t message_index, const protocol::Verdict& v) {
    return {{"message_index", message_index},
            {"party", protocol::to_string(party)},
            {"role", protocol::to_string(v.role)},
            {"accepted", v.accepted},
            {"mismatches", v.mismatches},
            {"positions_checked", v.positions_checked},
            {"threshold_fraction", v.threshold_fraction},
            {"bob_origin_mismatches", v.bob_origin_mismatches},
            {"charlie_origin_mismatches", v.charlie_origin_mismatches}};
}

protocol::Verdict decode_verdict(const json& body) {
    protocol::Verdict v;
    v.accepted = field_as<bool>(body, "accepted");
    v.mismatches = field_as<std::int64_t>(body, "mismatches");
    v.positions_checked = field_as<std::int64_t>(body, "positions_checked");
    v.threshold_fraction = field_as<double>(body, "threshold_fraction");
    const auto role = field_as<std::string>(body, "role");
    if (role == "direct") {
        v.role = protocol::VerifyRole::direct;
    } else if (role == "forwarded") {
        v.role = protocol::VerifyRole::forwarded;
    } else {
        throw FrameError(FrameErrorKind::bad_fields, "unknown verdict role \"" + role + "\"");
    }
    v.bob_origin_mismatches = field_as<std::int64_t>(body, "bob_origin_mismatches");
    v.charlie_origin_mismatches = field_as<std::int64_t>(body, "charlie_origin_mismatches");
    return v;
}

struct Outgoing {
    ChannelId channel = ChannelId::alice_bob;
    Party from = Party::alice;
    Party to = Party::bob;
    Frame frame;
};

// Sequential per-party event loop: validates channel policy and per-sender
// sequence numbers, queues outgoing frames for whichever transport drives it.
class Endpoint {
  public:
    Endpoint(Party self, const SessionConfig& config) : self_(self), config_(&config) {}
    virtual ~Endpoint() = default;

    virtual void start() {}

    void receive(ChannelId channel, Party from, const Frame& frame) {
        check_channel_policy(frame.type, channel);
        if (channel_peer(channel, self_) != from)
            throw ProtocolError("frame sender is not the channel peer");
        if (frame.session != config_->session_id)
            throw ProtocolError("frame belongs to session \"" + frame.session + "\"");
        std::uint64_t& last = last_seq_in_[{channel, from}];
        if (frame.seq != last + 1)
            throw ProtocolError(std::string("out-of-order frame on ") + to_string(channel));
        last = frame.seq;
        if (frame.type == FrameType::keepalive) return;
        handle(channel, from, frame);
    }

    std::vector<Outgoing> take_outbox() { return std::exchange(outbox_, {}); }

    virtual bool waiting_on_symmetrization() const { return false; }

    Party self() const { return self_; }

  protected:
    virtual void handle(ChannelId channel, Party from, const Frame& frame) = 0;

    const SessionConfig& config() const { return *config_; }

    void send(Party to, FrameType type, json body) {
        const ChannelId channel = channel_between(self_, to);
        check_channel_policy(type, channel);
        Frame frame;
        frame.type = type;
        frame.session = config_->session_id;
        frame.seq = ++seq_out_[channel];
        frame.body = std::move(body);
        outbox_.push_back({channel, self_, to, std::move(frame)});
    }

  private:
    Party self_;
    const SessionConfig* config_;
    std::vector<Outgoing> outbox_;
    std::map<ChannelId, std::uint64_t> seq_out_;
    std::map<std::pair<ChannelId, Party>, std::uint64_t> last_seq_in_;
};

int sender_slot(Party sender) { return sender == Party::bob ? 0 : 1; }

class AliceEndpoint final : public Endpoint {
  public:
    explicit AliceEndpoint(const SessionConfig& config) : Endpoint(Party::alice, config) {
        reports_.reserve(config.message_bits.size());
    }

    bool finished() const {
        if (!distribution_done_) return false;
        for (const MessageReport& r : reports_) {
            if (!r.bob) return false;
            if (r.bob->accepted && !r.charlie) return false;
        }
        return true;
    }

    double e_hat() const { return e_hat_; }
    const std::vector<MessageReport>& reports() const { return reports_; }

  protected:
    void handle(ChannelId, Party from, const Frame& frame) override {
        switch (frame.type) {
        case FrameType::key_block: on_key_block(from, frame.body); return;
        case FrameType::error_est: on_error_report(from, frame.body); return;
        case FrameType::verdict: on_verdict(from, frame.body); return;
        default:
            throw ProtocolError(std::string("alice cannot handle ") + to_string(frame.type));
        }
    }

  private:
    struct ExchangeSide {
        bool key_received = false;
        bool report_received = false;
        std::int64_t mismatches = 0;
        std::int64_t sample_size = 0;
        std::vector<PositionBit> surviving;
    };

    void on_key_block(Party from, const json& body) {
        if (protocol::party_from_string(field_as<std::string>(body, "sender")) != from)
            throw ProtocolError("key block claims a different sender");
        const std::uint8_t mv = field_as_bit(body, "message_value");
        ExchangeSide& side = sides_[sender_slot(from)][mv];
        if (side.key_received) throw ProtocolError("duplicate key block");
        side.key_received = true;

        const std::size_t n = static_cast<std::size_t>(config().l + config().k);
        Bits alice_bits;
        try {
            alice_bits = bits_from_hex(field_as<std::string>(body, "alice_bits"),
                                       field_as<std::size_t>(body, "bit_length"));
        } catch (const ValidationError& e) {
            throw FrameError(FrameErrorKind::bad_fields, e.what());
        }
        if (alice_bits.size() != n)
            throw ProtocolError("key block length disagrees with L + k");

        const auto sacrificed = protocol::sacrificed_positions(
            protocol::estimate_seed(config().seed, from, mv), n,
            static_cast<std::size_t>(config().k));
        std::vector<std::uint8_t> drop(n, 0);
        json positions = json::array();
        Bits sample_bits;
        sample_bits.reserve(sacrificed.size());
        for (std::uint32_t pos : sacrificed) {
            drop[pos] = 1;
            positions.push_back(pos);
            sample_bits.push_back(alice_bits[pos]);
        }
        side.surviving.reserve(n - sacrificed.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (!drop[i]) side.surviving.push_back({static_cast<std::uint32_t>(i), alice_bits[i]});
        }
        send(from, FrameType::error_est,
             {{"phase", "request"},
              {"sender", protocol::to_string(from)},
              {"message_value", mv},
              {"positions", std::move(positions)},
              {"alice_bits", bits_to_hex(sample_bits)},
              {"bit_length", sample_bits.size()}});
    }

    void on_error_report(Party from, const json& body) {
        if (field_as<std::string>(body, "phase") != "report")
            throw ProtocolError("unexpected estimation phase at alice");
        const std::uint8_t mv = field_as_bit(body, "message_value");
        ExchangeSide& side = sides_[sender_slot(from)][mv];
        if (!side.key_received || side.report_received)
            throw ProtocolError("estimation report out of phase");
        side.report_received = true;
        side.mismatches = field_as<std::int64_t>(body, "mismatches");
        side.sample_size = field_as<std::int64_t>(body, "sample_size");
        if (side.sample_size != config().k || side.mismatches < 0 ||
            side.mismatches > side.sample_size)
            throw ProtocolError("implausible estimation report");
        maybe_finish_distribution();
    }

    void maybe_finish_distribution() {
        std::int64_t mismatches = 0;
        std::int64_t samples = 0;
        for (const auto& per_sender : sides_) {
            for (const ExchangeSide& side : per_sender) {
                if (!side.report_received) return;
                mismatches += side.mismatches;
                samples += side.sample_size;
            }
        }
        e_hat_ = static_cast<double>(mismatches) / static_cast<double>(samples);
        distribution_done_ = true;
        if (config().abort_threshold && e_hat_ >= *config().abort_threshold)
            throw ProtocolError("distribution aborted: channel too noisy");

        for (std::uint8_t mv = 0; mv < 2; ++mv) {
            auto& msg = store_.messages[mv];
            msg.bob_outcomes = sides_[0][mv].surviving;
            msg.charlie_outcomes = sides_[1][mv].surviving;
            msg.present = true;
        }
        for (std::size_t i = 0; i < config().message_bits.size(); ++i) {
            const std::uint8_t bit = config().message_bits[i];
            const Declaration decl = protocol::sign(store_, bit);
            reports_.push_back({bit, std::nullopt, std::nullopt});
            send(Party::bob, FrameType::signed_message,
                 {{"message_index", i}, {"declaration", encode_declaration(decl)}});
        }
    }

    void on_verdict(Party from, const json& body) {
        const auto index = field_as<std::uint64_t>(body, "message_index");
        if (index >= reports_.size()) throw ProtocolError("verdict for an unknown message");
        if (protocol::party_from_string(field_as<std::string>(body, "party")) != from)
            throw ProtocolError("verdict claims a different party");
        auto& slot = from == Party::bob ? reports_[index].bob : reports_[index].charlie;
        if (slot) throw ProtocolError("duplicate verdict");
        slot = decode_verdict(body);
    }

    std::array<std::array<ExchangeSide, 2>, 2> sides_; // [sender][message value]
    protocol::AliceStore store_;
    bool distribution_done_ = false;
    double e_hat_ = 0.0;
    std::vector<MessageReport> reports_;
};

class RecipientEndpoint final : public Endpoint {
  public:
    RecipientEndpoint(Party self, const SessionConfig& config) : Endpoint(self, config) {
        if (self != Party::bob && self != Party::charlie)
            throw ValidationError("recipient endpoint must be bob or charlie");
    }

    void start() override {
        const std::size_t n = static_cast<std::size_t>(config().l + config().k);
        for (std::uint8_t mv = 0; mv < 2; ++mv) {
            KeySide& side = sides_[mv];
            side.record = channel::sample_exchange(
                config().link, n, protocol::exchange_seed(config().seed, self(), mv));
            send(Party::alice, FrameType::key_block,
                 {{"sender", protocol::to_string(self())},
                  {"message_value", mv},
                  {"alice_bits", bits_to_hex(side.record.alice_bits)},
                  {"bit_length", side.record.alice_bits.size()}});
        }
    }

    bool waiting_on_symmetrization() const override { return !pending_.empty(); }

  protected:
    void handle(ChannelId, Party from, const Frame& frame) override {
        switch (frame.type) {
        case FrameType::error_est: on_error_request(from, frame.body); return;
        case FrameType::forward_half: on_forward_half(from, frame.body); return;
        case FrameType::signed_message:
            if (self() != Party::bob)
                throw ProtocolError("only the direct recipient handles signed messages");
            on_declaration(frame.body);
            return;
        case FrameType::forwarded_message:
            if (self() != Party::charlie)
                throw ProtocolError("only the forwarded recipient handles forwarded messages");
            on_declaration(frame.body);
            return;
        default:
            throw ProtocolError(std::string(protocol::to_string(self())) + " cannot handle " +
                                to_string(frame.type));
        }
    }

  private:
    struct KeySide {
        channel::ExchangeRecord record;
        protocol::SymmetrizedKey key;
        bool own_ready = false;
        bool other_ready = false;
    };

    Party other_recipient() const {
        return self() == Party::bob ? Party::charlie : Party::bob;
    }

    void on_error_request(Party from, const json& body) {
        if (from != Party::alice) throw ProtocolError("estimation request must come from alice");
        if (field_as<std::string>(body, "phase") != "request")
            throw ProtocolError("unexpected estimation phase at a recipient");
        if (protocol::party_from_string(field_as<std::string>(body, "sender")) != self())
            throw ProtocolError("estimation request addressed to the wrong sender");
        const std::uint8_t mv = field_as_bit(body, "message_value");
        KeySide& side = sides_[mv];
        if (side.own_ready) throw ProtocolError("duplicate estimation request");

        const std::size_t n = static_cast<std::size_t>(config().l + config().k);
        const auto positions = field_as<std::vector<std::uint32_t>>(body, "positions");
        const auto expected = protocol::sacrificed_positions(
            protocol::estimate_seed(config().seed, self(), mv), n,
            static_cast<std::size_t>(config().k));
        if (positions != expected)
            throw ProtocolError("estimation positions disagree with the public coin");

        Bits alice_sample;
        try {
            alice_sample = bits_from_hex(field_as<std::string>(body, "alice_bits"),
                                         field_as<std::size_t>(body, "bit_length"));
        } catch (const ValidationError& e) {
            throw FrameError(FrameErrorKind::bad_fields, e.what());
        }
        if (alice_sample.size() != positions.size())
            throw ProtocolError("estimation sample length disagrees with its positions");

        std::int64_t mismatches = 0;
        std::vector<std::uint8_t> drop(n, 0);
        for (std::size_t i = 0; i < positions.size(); ++i) {
            drop[positions[i]] = 1;
            if (side.record.sender_bits[positions[i]] != alice_sample[i]) ++mismatches;
        }
        send(Party::alice, FrameType::error_est,
             {{"phase", "report"},
              {"sender", protocol::to_string(self())},
              {"message_value", mv},
              {"mismatches", mismatches},
              {"sample_size", positions.size()}});

        protocol::SenderString surviving;
        surviving.owner = self();
        surviving.message_value = mv;
        surviving.positions.reserve(n - positions.size());
        surviving.bits.reserve(n - positions.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (drop[i]) continue;
            surviving.positions.push_back(static_cast<std::uint32_t>(i));
            surviving.bits.push_back(side.record.sender_bits[i]);
        }
        const char* tag = self() == Party::bob ? "symmetrize/bob" : "symmetrize/charlie";
        const protocol::SplitKey split = protocol::split_for_forwarding(
            surviving, Rng::derive(protocol::symmetrize_seed(config().seed, mv), tag));
        side.key.owner = self();
        side.key.message_value = mv;
        side.key.own_kept = split.kept;
        side.own_ready = true;
        send(other_recipient(), FrameType::forward_half,
             {{"origin", protocol::to_string(self())},
              {"message_value", mv},
              {"half", encode_outcomes(split.forwarded)}});
        drain_pending();
    }

    void on_forward_half(Party from, const json& body) {
        if (from != other_recipient())
            throw ProtocolError("forwarded half must come from the other recipient");
        if (protocol::party_from_string(field_as<std::string>(body, "origin")) != from)
            throw ProtocolError("forwarded half claims a different origin");
        const std::uint8_t mv = field_as_bit(body, "message_value");
        KeySide& side = sides_[mv];
        if (side.other_ready) throw ProtocolError("duplicate forwarded half");
        side.key.other_received = decode_outcomes(field(body, "half"));
        if (side.key.other_received.size() != static_cast<std::size_t>(config().l / 2))
            throw ProtocolError("forwarded half has the wrong size");
        side.other_ready = true;
        drain_pending();
    }

    void on_declaration(const json& body) {
        const auto index = field_as<std::uint64_t>(body, "message_index");
        Declaration decl = decode_declaration(field(body, "declaration"));
        pending_.push_back({index, std::move(decl)});
        drain_pending();
    }

    void drain_pending() {
        while (!pending_.empty()) {
            const std::uint8_t m = pending_.front().second.message_bit;
            KeySide& side = sides_[m];
            if (!side.own_ready || !side.other_ready) return;
            auto [index, decl] = std::move(pending_.front());
            pending_.pop_front();
            process_declaration(index, decl);
        }
    }

    void process_declaration(std::uint64_t index, const Declaration& decl) {
        KeySide& side = sides_[decl.message_bit];
        const bool direct = self() == Party::bob;
        const double threshold =
            direct ? config().thresholds.s_a : config().thresholds.s_v;
        const protocol::Verdict verdict =
            protocol::verify(decl, side.key, threshold,
                             direct ? protocol::VerifyRole::direct
                                    : protocol::VerifyRole::forwarded);
        send(Party::alice, FrameType::verdict, encode_verdict(self(), index, verdict));
        if (direct && verdict.accepted) {
            send(Party::charlie, FrameType::forwarded_message,
                 {{"message_index", index}, {"declaration", encode_declaration(decl)}});
        }
    }

    std::array<KeySide, 2> sides_;
    std::deque<std::pair<std::uint64_t, Declaration>> pending_;
};

void validate_session_config(const SessionConfig& config) {
    config.link.validate();
    if (config.l < 2 || config.l % 2 != 0)
        throw ValidationError("session: L must be even and >= 2");
    if (config.k < 1) throw ValidationError("session: k must be >= 1");
    if (!(config.thresholds.s_a < config.thresholds.s_v))
        throw ValidationError("session: thresholds must satisfy s_a < s_v");
    for (std::uint8_t bit : config.message_bits) {
        if (bit > 1) throw ValidationError("session: message bits must be 0 or 1");
    }
    if (config.session_id.empty())
        throw ValidationError("session: missing session id");
}

SessionConfig with_defaults(const SessionConfig& config) {
    SessionConfig c = config;
    if (c.session_id.empty()) c.session_id = "qds-" + std::to_string(c.seed);
    return c;
}

std::vector<TranscriptRecord> canonicalize(std::vector<TranscriptRecord> records) {
    std::sort(records.begin(), records.end(),
              [](const TranscriptRecord& a, const TranscriptRecord& b) {
                  const auto ka =
                      std::tuple(channel_rank(a.channel), a.frame.seq, party_rank(a.from));
                  const auto kb =
                      std::tuple(channel_rank(b.channel), b.frame.seq, party_rank(b.from));
                  return ka < kb;
              });
    for (std::size_t i = 0; i < records.size(); ++i) records[i].step = i;
    return records;
}

SessionResult assemble_result(const SessionConfig& config, const AliceEndpoint& alice,
                              std::vector<TranscriptRecord> transcript) {
    SessionResult result;
    result.e_hat = alice.e_hat();
    result.l = config.l;
    result.k = config.k;
    result.messages = alice.reports();
    result.transcript = canonicalize(std::move(transcript));
    return result;
}

SessionResult run_inproc(const SessionConfig& config) {
    AliceEndpoint alice(config);
    RecipientEndpoint bob(Party::bob, config);
    RecipientEndpoint charlie(Party::charlie, config);
    const std::array<Endpoint*, 3> endpoints{&alice, &bob, &charlie};
    auto endpoint_of = [&](Party p) -> Endpoint& { return *endpoints[party_rank(p)]; };

    struct Direction {
        ChannelId channel;
        Party from;
        Party to;
        std::deque<Frame> queue;
    };
    std::array<Direction, 6> directions{{
        {ChannelId::alice_bob, Party::alice, Party::bob, {}},
        {ChannelId::alice_bob, Party::bob, Party::alice, {}},
        {ChannelId::alice_charlie, Party::alice, Party::charlie, {}},
        {ChannelId::alice_charlie, Party::charlie, Party::alice, {}},
        {ChannelId::bob_charlie, Party::bob, Party::charlie, {}},
        {ChannelId::bob_charlie, Party::charlie, Party::bob, {}},
    }};

    std::vector<TranscriptRecord> transcript;
    auto pump = [&] {
        for (Endpoint* ep : endpoints) {
            for (Outgoing& out : ep->take_outbox()) {
                transcript.push_back({out.channel, out.from, out.to, 0, out.frame});
                for (Direction& dir : directions) {
                    if (dir.channel == out.channel && dir.from == out.from) {
                        dir.queue.push_back(std::move(out.frame));
                        break;
                    }
                }
            }
        }
    };

    for (Endpoint* ep : endpoints) ep->start();
    pump();

    for (;;) {
        Direction* next = nullptr;
        for (Direction& dir : directions) {
            if (!dir.queue.empty()) {
                next = &dir;
                break;
            }
        }
        if (!next) break;
        Frame frame = std::move(next->queue.front());
        next->queue.pop_front();
        if (config.drop_frame_type && frame.type == *config.drop_frame_type) continue;
        // Round-trip through the wire form so both transports exercise the
        // same codec path.
        const Frame delivered = decode_frame(encode_frame(frame));
        endpoint_of(next->to).receive(next->channel, next->from, delivered);
        pump();
    }

    for (const Endpoint* ep : endpoints) {
        if (ep->waiting_on_symmetrization())
            throw ProtocolError("symmetrization incomplete");
    }
    if (!alice.finished()) throw ProtocolError("session incomplete: missing verdicts");
    return assemble_result(config, alice, std::move(transcript));
}

// Minimal RAII socket.
class Socket {
  public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) {
            close_fd();
            fd_ = std::exchange(other.fd_, -1);
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close_fd(); }

    int fd() const { return fd_; }
    bool open() const { return fd_ >= 0; }
    void close_fd() {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

  private:
    int fd_ = -1;
};

[[noreturn]] void throw_errno(const std::string& what) {
    throw ProtocolError(what + ": " + std::strerror(errno));
}

Socket listen_on(const std::string& host, int port, int backlog) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.open()) throw_errno("socket");
    const int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw ValidationError("bad socket host \"" + host + "\"");
    if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw_errno("bind");
    if (::listen(s.fd(), backlog) != 0) throw_errno("listen");
    return s;
}

int bound_port(const Socket& s) {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0)
        throw_errno("getsockname");
    return ntohs(addr.sin_port);
}

Socket connect_to(const std::string& host, int port) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.open()) throw_errno("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw ValidationError("bad socket host \"" + host + "\"");
    if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw_errno("connect");
    return s;
}

void send_all(const Socket& s, const std::uint8_t* data, std::size_t n) {
    std::size_t sent = 0;
    while (sent < n) {
        const ssize_t r = ::send(s.fd(), data + sent, n - sent, MSG_NOSIGNAL);
        if (r <= 0) throw_errno("send");
        sent += static_cast<std::size_t>(r);
    }
}

// Reads exactly n bytes; returns false on a clean EOF before the first byte.
bool recv_exact(const Socket& s, std::uint8_t* data, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
        const ssize_t r = ::recv(s.fd(), data + got, n - got, 0);
        if (r == 0) {
            if (got == 0) return false;
            throw FrameError(FrameErrorKind::truncated, "connection closed mid-frame");
        }
        if (r < 0) throw_errno("recv");
        got += static_cast<std::size_t>(r);
    }
    return true;
}

struct Connection {
    ChannelId channel = ChannelId::alice_bob;
    Party peer = Party::alice;
    Socket socket;
    bool closed = false;
};

// Reads one frame; returns nullopt on clean EOF.
std::optional<Frame> read_frame(const Socket& s) {
    std::uint8_t prefix[4];
    if (!recv_exact(s, prefix, 4)) return std::nullopt;
    const std::uint32_t n = decode_length_prefix(prefix);
    std::vector<std::uint8_t> bytes(4 + static_cast<std::size_t>(n));
    std::copy(prefix, prefix + 4, bytes.begin());
    if (n > 0 && !recv_exact(s, bytes.data() + 4, n))
        throw FrameError(FrameErrorKind::truncated, "connection closed mid-frame");
    return decode_frame(bytes);
}

// Drives one endpoint over its live connections until it finishes or all
// peers close. done_when returns true for Alice once every verdict is in.
void endpoint_loop(Endpoint& endpoint, std::vector<Connection>& conns, int timeout_ms,
                   const std::function<bool()>& done_when,
                   std::vector<TranscriptRecord>& transcript) {
    auto conn_for = [&](ChannelId channel) -> Connection& {
        for (Connection& c : conns) {
            if (c.channel == channel) return c;
        }
        throw ProtocolError("no connection for channel");
    };
    auto flush = [&] {
        for (Outgoing& out : endpoint.take_outbox()) {
            transcript.push_back({out.channel, out.from, out.to, 0, out.frame});
            const auto bytes = encode_frame(out.frame);
            send_all(conn_for(out.channel).socket, bytes.data(), bytes.size());
        }
    };

    endpoint.start();
    flush();
    while (!done_when()) {
        std::vector<pollfd> fds;
        std::vector<Connection*> live;
        for (Connection& c : conns) {
            if (c.closed) continue;
            fds.push_back({c.socket.fd(), POLLIN, 0});
            live.push_back(&c);
        }
        if (live.empty()) break;
        const int r = ::poll(fds.data(), fds.size(), timeout_ms);
        if (r < 0) throw_errno("poll");
        if (r == 0) throw ProtocolError("timeout waiting for frames");
        for (std::size_t i = 0; i < live.size(); ++i) {
            if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            Connection& c = *live[i];
            const auto frame = read_frame(c.socket);
            if (!frame) {
                c.closed = true;
                c.socket.close_fd();
                continue;
            }
            endpoint.receive(c.channel, c.peer, *frame);
            flush();
        }
        // A closed Alice link means the protocol is over for the recipients.
        const bool alice_gone = std::any_of(conns.begin(), conns.end(), [](const Connection& c) {
            return c.closed && (c.channel == ChannelId::alice_bob ||
                                c.channel == ChannelId::alice_charlie);
        });
        if (endpoint.self() != Party::alice && alice_gone) break;
    }
}

SessionResult run_socket(const SessionConfig& config) {
    if (config.drop_frame_type)
        throw ValidationError("frame dropping is only supported on the in-process transport");

    AliceEndpoint alice(config);
    RecipientEndpoint bob(Party::bob, config);
    RecipientEndpoint charlie(Party::charlie, config);

    Socket alice_listener = listen_on(config.socket_host, config.alice_port, 2);
    Socket bob_listener = listen_on(config.socket_host, config.bob_port, 1);
    const int alice_port = bound_port(alice_listener);
    const int bob_port = bound_port(bob_listener);

    // Connection setup: recipients dial Alice, Charlie dials Bob, and every
    // dialer announces itself with a one-byte party tag.
    auto dial = [&](int port, Party self) {
        Socket s = connect_to(config.socket_host, port);
        const std::uint8_t tag = self == Party::bob ? 'B' : 'C';
        send_all(s, &tag, 1);
        return s;
    };
    auto accept_tagged = [&](const Socket& listener) {
        Socket s(::accept(listener.fd(), nullptr, nullptr));
        if (!s.open()) throw_errno("accept");
        std::uint8_t tag = 0;
        if (!recv_exact(s, &tag, 1))
            throw ProtocolError("peer closed before identifying itself");
        if (tag != 'B' && tag != 'C') throw ProtocolError("unknown party tag on connect");
        return std::pair<Socket, Party>(std::move(s), tag == 'B' ? Party::bob : Party::charlie);
    };

    std::array<std::exception_ptr, 3> errors{};
    std::array<std::vector<TranscriptRecord>, 3> transcripts;

    std::thread alice_thread([&] {
        try {
            std::vector<Connection> conns;
            for (int i = 0; i < 2; ++i) {
                auto [sock, peer] = accept_tagged(alice_listener);
                conns.push_back(
                    {channel_between(Party::alice, peer), peer, std::move(sock), false});
            }
            alice_listener.close_fd();
            endpoint_loop(alice, conns, config.socket_timeout_ms,
                          [&] { return alice.finished(); }, transcripts[0]);
            if (!alice.finished())
                throw ProtocolError("peer closed before the session finished");
        } catch (...) {
            errors[0] = std::current_exception();
        }
    });

    std::thread bob_thread([&] {
        try {
            std::vector<Connection> conns;
            conns.push_back({ChannelId::alice_bob, Party::alice,
                             dial(alice_port, Party::bob), false});
            auto [sock, peer] = accept_tagged(bob_listener);
            if (peer != Party::charlie) throw ProtocolError("unexpected peer dialed bob");
            bob_listener.close_fd();
            conns.push_back({ChannelId::bob_charlie, Party::charlie, std::move(sock), false});
            endpoint_loop(bob, conns, config.socket_timeout_ms, [] { return false; },
                          transcripts[1]);
            if (bob.waiting_on_symmetrization())
                throw ProtocolError("symmetrization incomplete");
        } catch (...) {
            errors[1] = std::current_exception();
        }
    });

    std::thread charlie_thread([&] {
        try {
            std::vector<Connection> conns;
            conns.push_back({ChannelId::alice_charlie, Party::alice,
                             dial(alice_port, Party::charlie), false});
            conns.push_back({ChannelId::bob_charlie, Party::bob,
                             dial(bob_port, Party::charlie), false});
            endpoint_loop(charlie, conns, config.socket_timeout_ms, [] { return false; },
                          transcripts[2]);
            if (charlie.waiting_on_symmetrization())
                throw ProtocolError("symmetrization incomplete");
        } catch (...) {
            errors[2] = std::current_exception();
        }
    });

    alice_thread.join();
    bob_thread.join();
    charlie_thread.join();

    // Prefer a root-cause error over the "peer closed" fallout it triggers
    // in the other endpoints.
    const auto message_of = [](const std::exception_ptr& e) -> std::string {
        try {
            std::rethrow_exception(e);
        } catch (const std::exception& ex) {
            return ex.what();
        } catch (...) {
            return {};
        }
    };
    std::exception_ptr fallback;
    for (const std::exception_ptr& e : errors) {
        if (!e) continue;
        const std::string msg = message_of(e);
        if (msg.find("peer closed") == std::string::npos &&
            msg.find("timeout") == std::string::npos)
            std::rethrow_exception(e);
        if (!fallback) fallback = e;
    }
    if (fallback) std::rethrow_exception(fallback);

    std::vector<TranscriptRecord> transcript;
    for (auto& part : transcripts)
        transcript.insert(transcript.end(), part.begin(), part.end());
    return assemble_result(config, alice, std::move(transcript));
}

} // namespace

Transport transport_from_string(const std::string& name) { return checked_transport(name); }

const char* to_string(Transport transport) {
    return transport == Transport::inproc ? "inproc" : "socket";
}

std::string transcript_to_jsonl(const std::vector<TranscriptRecord>& records) {
    std::string out;
    for (const TranscriptRecord& rec : records) {
        const json line = {
            {"step", rec.step},
            {"channel", to_string(rec.channel)},
            {"from", protocol::to_string(rec.from)},
            {"to", protocol::to_string(rec.to)},
            {"frame",
             {{"type", to_string(rec.frame.type)},
              {"session", rec.frame.session},
              {"seq", rec.frame.seq},
              {"body", rec.frame.body}}},
        };
        out += line.dump();
        out += '\n';
    }
    return out;
}

SessionResult run_session(const SessionConfig& config, Transport transport) {
    const SessionConfig effective = with_defaults(config);
    validate_session_config(effective);
    return transport == Transport::inproc ? run_inproc(effective) : run_socket(effective);
}

} // namespace qds::net
