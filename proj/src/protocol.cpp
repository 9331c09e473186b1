#include "qds/protocol.hpp"

#include <string>
#include <unordered_map>

#include "qds/errors.hpp"
#include "qds/rng.hpp"

namespace qds::protocol {

const char* to_string(Party party) {
    switch (party) {
    case Party::alice: return "alice";
    case Party::bob: return "bob";
    case Party::charlie: return "charlie";
    }
    return "unknown";
}

Party party_from_string(const std::string& name) {
    if (name == "alice") return Party::alice;
    if (name == "bob") return Party::bob;
    if (name == "charlie") return Party::charlie;
    throw ValidationError("unknown party \"" + name + "\"");
}

const char* to_string(VerifyRole role) {
    return role == VerifyRole::direct ? "direct" : "forwarded";
}

namespace {

std::string exchange_label(Party sender, std::uint8_t message_value) {
    return std::string(to_string(sender)) + "/m" + static_cast<char>('0' + message_value);
}

} // namespace

std::uint64_t exchange_seed(std::uint64_t session_seed, Party sender, std::uint8_t message_value) {
    return Rng::derive(session_seed, "dist/exchange/" + exchange_label(sender, message_value));
}

std::uint64_t estimate_seed(std::uint64_t session_seed, Party sender, std::uint8_t message_value) {
    return Rng::derive(session_seed, "dist/estimate/" + exchange_label(sender, message_value));
}

std::uint64_t symmetrize_seed(std::uint64_t session_seed, std::uint8_t message_value) {
    return Rng::derive(session_seed,
                       std::string("dist/symmetrize/m") + static_cast<char>('0' + message_value));
}

std::vector<std::uint32_t> sacrificed_positions(std::uint64_t seed, std::size_t length,
                                                std::size_t k) {
    Rng rng(Rng::derive(seed, "estimate/positions"));
    return sample_subset(rng, static_cast<std::uint32_t>(length), static_cast<std::uint32_t>(k));
}

std::pair<ErrorEstimate, SurvivingExchange> estimate_error(const channel::ExchangeRecord& record,
                                                           std::size_t k, std::uint64_t seed) {
    if (k < 1) throw ValidationError("estimate: k must be >= 1");
    if (record.length != record.sender_bits.size() || record.length != record.alice_bits.size())
        throw ValidationError("estimate: inconsistent exchange record");
    if (k >= record.length) throw ValidationError("estimate: nothing left to sign with");

    const std::vector<std::uint32_t> sacrificed = sacrificed_positions(seed, record.length, k);

    std::vector<std::uint8_t> drop(record.length, 0);
    ErrorEstimate est;
    est.sample_size = k;
    for (std::uint32_t pos : sacrificed) {
        drop[pos] = 1;
        if (record.sender_bits[pos] != record.alice_bits[pos]) ++est.mismatches;
    }
    est.e_hat = static_cast<double>(est.mismatches) / static_cast<double>(k);

    SurvivingExchange surviving;
    surviving.positions.reserve(record.length - k);
    surviving.sender_bits.reserve(record.length - k);
    surviving.alice_bits.reserve(record.length - k);
    for (std::size_t i = 0; i < record.length; ++i) {
        if (drop[i]) continue;
        surviving.positions.push_back(static_cast<std::uint32_t>(i));
        surviving.sender_bits.push_back(record.sender_bits[i]);
        surviving.alice_bits.push_back(record.alice_bits[i]);
    }
    return {est, surviving};
}

SplitKey split_for_forwarding(const SenderString& s, std::uint64_t seed) {
    if (s.positions.size() != s.bits.size())
        throw ValidationError("symmetrize: positions and bits differ in length");
    if (s.positions.empty() || s.positions.size() % 2 != 0)
        throw ValidationError("symmetrize: cannot halve signature");

    const std::size_t l = s.positions.size();
    Rng rng(seed);
    const std::vector<std::uint32_t> forward_idx =
        sample_subset(rng, static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(l / 2));

    std::vector<std::uint8_t> forwarded_mark(l, 0);
    for (std::uint32_t idx : forward_idx) forwarded_mark[idx] = 1;

    SplitKey halves;
    halves.kept.reserve(l / 2);
    halves.forwarded.reserve(l / 2);
    for (std::size_t i = 0; i < l; ++i) {
        PositionBit pb{s.positions[i], s.bits[i]};
        (forwarded_mark[i] ? halves.forwarded : halves.kept).push_back(pb);
    }
    return halves;
}

std::pair<SymmetrizedKey, SymmetrizedKey> symmetrize(const SenderString& bob,
                                                     const SenderString& charlie,
                                                     std::uint64_t seed) {
    if (bob.owner != Party::bob || charlie.owner != Party::charlie)
        throw ValidationError("symmetrize: strings must come from bob and charlie");
    if (bob.message_value != charlie.message_value)
        throw ValidationError("symmetrize: message values differ");
    if (bob.positions.size() != charlie.positions.size())
        throw ValidationError("symmetrize: strings differ in length");

    const SplitKey from_bob = split_for_forwarding(bob, Rng::derive(seed, "symmetrize/bob"));
    const SplitKey from_charlie =
        split_for_forwarding(charlie, Rng::derive(seed, "symmetrize/charlie"));

    SymmetrizedKey bob_key;
    bob_key.owner = Party::bob;
    bob_key.message_value = bob.message_value;
    bob_key.own_kept = from_bob.kept;
    bob_key.other_received = from_charlie.forwarded;

    SymmetrizedKey charlie_key;
    charlie_key.owner = Party::charlie;
    charlie_key.message_value = charlie.message_value;
    charlie_key.own_kept = from_charlie.kept;
    charlie_key.other_received = from_bob.forwarded;

    return {bob_key, charlie_key};
}

SessionStore run_distribution(const channel::LinkParams& link, std::int64_t l, std::int64_t k,
                              std::uint64_t seed, std::optional<double> abort_threshold) {
    if (l < 2 || l % 2 != 0) throw ValidationError("distribution: L must be even and >= 2");
    if (k < 1) throw ValidationError("distribution: k must be >= 1");

    SessionStore store;
    store.l = l;
    store.k = k;
    store.seed = seed;
    store.bob.owner = Party::bob;
    store.charlie.owner = Party::charlie;

    const std::size_t n_total = static_cast<std::size_t>(l + k);
    std::array<SurvivingExchange, 2> bob_surv;
    std::array<SurvivingExchange, 2> charlie_surv;
    std::size_t pooled_mismatches = 0;
    std::size_t pooled_samples = 0;

    for (Party sender : {Party::bob, Party::charlie}) {
        for (std::uint8_t mv = 0; mv < 2; ++mv) {
            const auto record =
                channel::sample_exchange(link, n_total, exchange_seed(seed, sender, mv));
            auto [est, surviving] = estimate_error(record, static_cast<std::size_t>(k),
                                                   estimate_seed(seed, sender, mv));
            pooled_mismatches += est.mismatches;
            pooled_samples += est.sample_size;
            (sender == Party::bob ? bob_surv : charlie_surv)[mv] = std::move(surviving);
        }
    }
    store.e_hat = static_cast<double>(pooled_mismatches) / static_cast<double>(pooled_samples);
    if (abort_threshold && store.e_hat >= *abort_threshold)
        throw ProtocolError("distribution aborted: channel too noisy");

    for (std::uint8_t mv = 0; mv < 2; ++mv) {
        SenderString bob_string{Party::bob, mv, bob_surv[mv].positions, bob_surv[mv].sender_bits};
        SenderString charlie_string{Party::charlie, mv, charlie_surv[mv].positions,
                                    charlie_surv[mv].sender_bits};
        auto [bob_key, charlie_key] =
            symmetrize(bob_string, charlie_string, symmetrize_seed(seed, mv));
        store.bob.keys[mv] = std::move(bob_key);
        store.charlie.keys[mv] = std::move(charlie_key);

        auto& msg = store.alice.messages[mv];
        msg.present = true;
        msg.bob_outcomes.reserve(bob_surv[mv].positions.size());
        for (std::size_t i = 0; i < bob_surv[mv].positions.size(); ++i)
            msg.bob_outcomes.push_back({bob_surv[mv].positions[i], bob_surv[mv].alice_bits[i]});
        msg.charlie_outcomes.reserve(charlie_surv[mv].positions.size());
        for (std::size_t i = 0; i < charlie_surv[mv].positions.size(); ++i)
            msg.charlie_outcomes.push_back(
                {charlie_surv[mv].positions[i], charlie_surv[mv].alice_bits[i]});
    }
    return store;
}

Declaration sign(AliceStore& alice, std::uint8_t m) {
    if (m > 1) throw ValidationError("sign: message bit must be 0 or 1");
    auto& msg = alice.messages[m];
    if (!msg.present) throw ProtocolError("sign: no distribution for this message value");
    if (msg.used) throw ProtocolError("sign: signature material already consumed");
    msg.used = true;

    Declaration decl;
    decl.message_bit = m;
    decl.bob_string_outcomes = msg.bob_outcomes;
    decl.charlie_string_outcomes = msg.charlie_outcomes;
    return decl;
}

namespace {

using DeclaredMap = std::unordered_map<std::uint32_t, std::uint8_t>;

DeclaredMap index_outcomes(const std::vector<PositionBit>& outcomes) {
    DeclaredMap map;
    map.reserve(outcomes.size());
    for (const PositionBit& pb : outcomes) {
        if (!map.emplace(pb.position, pb.bit).second)
            throw ProtocolError("malformed declaration: duplicate position");
    }
    return map;
}

std::int64_t count_mismatches(const std::vector<PositionBit>& known, const DeclaredMap& declared) {
    std::int64_t mismatches = 0;
    for (const PositionBit& pb : known) {
        auto it = declared.find(pb.position);
        if (it == declared.end())
            throw ProtocolError("malformed declaration: missing position");
        if (it->second != pb.bit) ++mismatches;
    }
    return mismatches;
}

} // namespace

Verdict verify(const Declaration& declaration, SymmetrizedKey& key, double threshold_fraction,
               VerifyRole role) {
    if (key.used) throw ProtocolError("verify: signature material already consumed");
    if (declaration.message_bit != key.message_value)
        throw ProtocolError("malformed declaration: message value does not match key");

    const std::size_t l = key.own_kept.size() + key.other_received.size();
    if (declaration.bob_string_outcomes.size() != l ||
        declaration.charlie_string_outcomes.size() != l)
        throw ProtocolError("malformed declaration: outcome counts differ from key length");

    const DeclaredMap bob_declared = index_outcomes(declaration.bob_string_outcomes);
    const DeclaredMap charlie_declared = index_outcomes(declaration.charlie_string_outcomes);
    const DeclaredMap& own_declared = key.owner == Party::bob ? bob_declared : charlie_declared;
    const DeclaredMap& other_declared = key.owner == Party::bob ? charlie_declared : bob_declared;

    const std::int64_t own_mismatches = count_mismatches(key.own_kept, own_declared);
    const std::int64_t other_mismatches = count_mismatches(key.other_received, other_declared);
    key.used = true;

    Verdict verdict;
    verdict.mismatches = own_mismatches + other_mismatches;
    verdict.positions_checked = static_cast<std::int64_t>(l);
    verdict.threshold_fraction = threshold_fraction;
    verdict.role = role;
    verdict.bob_origin_mismatches = key.owner == Party::bob ? own_mismatches : other_mismatches;
    verdict.charlie_origin_mismatches =
        key.owner == Party::bob ? other_mismatches : own_mismatches;
    verdict.accepted = static_cast<double>(verdict.mismatches) <
                       threshold_fraction * static_cast<double>(l);
    return verdict;
}

MessagingResult run_messaging(AliceStore& alice, RecipientStore& bob, RecipientStore& charlie,
                              std::uint8_t m, const security::Thresholds& thresholds) {
    MessagingResult result;
    result.declaration = sign(alice, m);
    result.bob = verify(result.declaration, bob.keys[m], thresholds.s_a, VerifyRole::direct);
    if (result.bob.accepted) {
        result.charlie =
            verify(result.declaration, charlie.keys[m], thresholds.s_v, VerifyRole::forwarded);
    }
    return result;
}

} // namespace qds::protocol
