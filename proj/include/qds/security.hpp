#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace qds::security {

using Count = std::int64_t;

// Inputs to the bit-guessing analysis: source intensity, end-to-end
// transmission and the error rate seen by the receiver.
struct SecurityInputs {
    double mu = 0.2;
    double t = 1.0;
    double e = 0.0;
    std::optional<double> p_e_override;

    void validate() const;
};

// Which argument of the max won when evaluating the guessing formula, or
// `external` when the probability was supplied from outside.
enum class EveBranch { individual, sequential, external };

const char* to_string(EveBranch branch);

// Eve's probability of misidentifying a signature bit, with full provenance:
// the raw formula value before clamping, both branch terms, and flags for
// clamping and override.
struct EveError {
    double p_e = 0.0;
    double formula_value = 0.0;
    double individual_term = 0.0;
    double sequential_term = 0.0;
    double depth = 0.0;
    EveBranch branch = EveBranch::individual;
    bool clamped = false;
    bool overridden = false;
};

struct Thresholds {
    double g = 0.0;   // p_e - e
    double s_a = 0.0; // e + g/4, authentication
    double s_v = 0.0; // e + 3g/4, verification
};

struct BoundSet {
    double honest = 0.0;
    double repudiation = 0.0;
    double forge = 0.0;

    double max() const;
};

struct SecurityParams {
    SecurityInputs inputs;
    EveError eve;
    Thresholds thresholds;
    double epsilon = 0.0;
    Count l = 0;
    Count k = 0;
    BoundSet bounds;
};

// Mean number of pulses an unambiguous measurement can cover before the
// stored coherence runs out: ln(T)/ln(mu) + 1.
double collision_depth(double mu, double t);

// Evaluate the guessing-error probability. The formula value is always
// computed; the final p_e comes from the override when one is present,
// otherwise from the formula clamped to [0, 1/2]. Throws when e >= 1/6
// (formula validity) or when the final p_e leaves no gap above e.
EveError eve_error_probability(const SecurityInputs& inputs);

// Quartile rule: the gap g = p_e - e is split so the acceptance thresholds
// sit at 1/4 and 3/4 of the way from e to p_e.
Thresholds make_thresholds(double e, double p_e);

// Chance an honest run sees s_a*L or more mismatches: 2*exp(-(s_a-e)^2 L).
double honest_abort_bound(Count l, double s_a, double e);

// Chance a dishonest sender splits the receivers across the two thresholds:
// 2*exp(-((s_v-s_a)/2)^2 L).
double repudiation_bound(Count l, double s_a, double s_v);

// Chance a forger lands under the verification threshold: exp(-(p_e-s_v)^2 L).
double forge_bound(Count l, double s_v, double p_e);

BoundSet evaluate_bounds(Count l, const Thresholds& th, double e, double p_e);

// Smallest L with all three failure bounds at or below epsilon. Starts from
// the closed form ceil(ln(2/eps)/(g/4)^2) and settles the exact integer by
// direct evaluation.
Count required_length(double e, double p_e, double epsilon);

// Whether one signed bit is costed against a single sender's detection
// stream or against a stream the two senders share by turns.
enum class RateConvention { per_sender, alternating };

RateConvention rate_convention_from_string(const std::string& name);
const char* to_string(RateConvention convention);

// Signed bits per second at a given detection rate. A signed bit consumes
// one signature of L counts per message value, hence rate/(2L); the
// alternating convention halves that again.
double signing_rate(double detection_rate_hz, Count l, RateConvention convention = RateConvention::per_sender);

// How many 1-bit messages a shared string of the given size can sign when
// each costs 2(L+k) bits and nothing is reusable.
Count signing_capacity(Count shared_bits, Count l, Count k);

// Assemble the full parameter block for one configuration. L comes from
// required_length unless pinned; k defaults to L.
SecurityParams derive_security_params(const SecurityInputs& inputs, double epsilon,
                                      std::optional<Count> k = std::nullopt,
                                      std::optional<Count> l_override = std::nullopt);

} // namespace qds::security
