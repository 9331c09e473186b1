#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "qds/bits.hpp"
#include "qds/channel.hpp"
#include "qds/security.hpp"

namespace qds::protocol {

enum class Party { alice, bob, charlie };

const char* to_string(Party party);
Party party_from_string(const std::string& name);

// One recorded outcome, keyed by its index in the original exchange.
struct PositionBit {
    std::uint32_t position = 0;
    std::uint8_t bit = 0;

    bool operator==(const PositionBit&) const = default;
};

// Post-estimation remainder of one exchange: the retained original indices
// with the sender's true bits and the receiver's recorded copies.
struct SurvivingExchange {
    std::vector<std::uint32_t> positions;
    Bits sender_bits;
    Bits alice_bits;
};

struct ErrorEstimate {
    double e_hat = 0.0;
    std::size_t sample_size = 0;
    std::size_t mismatches = 0;
};

// One sender's retained string for one message value, as held by its owner.
struct SenderString {
    Party owner = Party::bob;
    std::uint8_t message_value = 0;
    std::vector<std::uint32_t> positions;
    Bits bits;
};

// A recipient's verification key after the two halves were swapped: half of
// the owner's own string plus half of the other recipient's. The partition
// stays between the two recipients.
struct SymmetrizedKey {
    Party owner = Party::bob;
    std::uint8_t message_value = 0;
    std::vector<PositionBit> own_kept;
    std::vector<PositionBit> other_received;
    bool used = false;
};

// Everything the signer keeps from distribution: her recorded outcomes for
// both senders' strings, per message value, single use.
struct AliceStore {
    struct PerMessage {
        std::vector<PositionBit> bob_outcomes;
        std::vector<PositionBit> charlie_outcomes;
        bool present = false;
        bool used = false;
    };
    std::array<PerMessage, 2> messages;
};

struct RecipientStore {
    Party owner = Party::bob;
    std::array<SymmetrizedKey, 2> keys; // indexed by message value
};

// Full product of one distribution stage, the unit that store files persist.
struct SessionStore {
    std::int64_t l = 0;
    std::int64_t k = 0;
    double e_hat = 0.0;
    std::uint64_t seed = 0;
    AliceStore alice;
    RecipientStore bob;
    RecipientStore charlie;
};

// The signed message: a message bit plus the signer's recorded outcomes for
// both origin strings at every retained position.
struct Declaration {
    std::uint8_t message_bit = 0;
    std::vector<PositionBit> bob_string_outcomes;
    std::vector<PositionBit> charlie_string_outcomes;
};

enum class VerifyRole { direct, forwarded };

const char* to_string(VerifyRole role);

struct Verdict {
    bool accepted = false;
    std::int64_t mismatches = 0;
    std::int64_t positions_checked = 0;
    double threshold_fraction = 0.0;
    VerifyRole role = VerifyRole::direct;
    std::int64_t bob_origin_mismatches = 0;
    std::int64_t charlie_origin_mismatches = 0;
};

struct MessagingResult {
    Declaration declaration;
    Verdict bob;
    std::optional<Verdict> charlie; // absent when Bob rejects
};

// Session-seed derivation scheme. The in-memory runner and the wire harness
// both draw from these, which is what makes their results interchangeable.
std::uint64_t exchange_seed(std::uint64_t session_seed, Party sender, std::uint8_t message_value);
std::uint64_t estimate_seed(std::uint64_t session_seed, Party sender, std::uint8_t message_value);
std::uint64_t symmetrize_seed(std::uint64_t session_seed, std::uint8_t message_value);

// Public-coin choice of the k sacrificed positions, reproducible by any
// party holding the seed.
std::vector<std::uint32_t> sacrificed_positions(std::uint64_t seed, std::size_t length,
                                                std::size_t k);

// Sacrifice k publicly chosen positions to estimate the mismatch rate and
// return the remainder. The sacrificed positions leave every party's view.
std::pair<ErrorEstimate, SurvivingExchange> estimate_error(const channel::ExchangeRecord& record,
                                                           std::size_t k, std::uint64_t seed);

// One recipient's private partition of his own string into the half he
// keeps and the half he forwards.
struct SplitKey {
    std::vector<PositionBit> kept;
    std::vector<PositionBit> forwarded;
};

SplitKey split_for_forwarding(const SenderString& s, std::uint64_t seed);

// Each recipient forwards a random half of his string to the other over the
// confidential recipient-to-recipient channel and keeps the rest, so both
// end up holding L positions of mixed origin.
std::pair<SymmetrizedKey, SymmetrizedKey> symmetrize(const SenderString& bob,
                                                     const SenderString& charlie,
                                                     std::uint64_t seed);

// Run all four exchanges (two senders, two message values), estimate the
// pooled error rate, and symmetrize. When abort_threshold is set the run
// fails if the estimate reaches it.
SessionStore run_distribution(const channel::LinkParams& link, std::int64_t l, std::int64_t k,
                              std::uint64_t seed,
                              std::optional<double> abort_threshold = std::nullopt);

// Emit the declaration for message bit m and burn the material.
Declaration sign(AliceStore& alice, std::uint8_t m);

// Count mismatches between the declaration and the verifier's L known
// positions; accept on strictly fewer than threshold_fraction * L. Burns
// the key.
Verdict verify(const Declaration& declaration, SymmetrizedKey& key, double threshold_fraction,
               VerifyRole role);

// Sign, verify directly at s_a, and on acceptance forward the identical
// declaration for verification at s_v.
MessagingResult run_messaging(AliceStore& alice, RecipientStore& bob, RecipientStore& charlie,
                              std::uint8_t m, const security::Thresholds& thresholds);

} // namespace qds::protocol
