#pragma once

#include <cstdint>
#include <optional>

#include "qds/bits.hpp"

namespace qds::channel {

// Physical-layer configuration of one sender->receiver optical link.
struct LinkParams {
    double mu = 0.2;                  // mean photon number per pulse
    double fiber_loss_db = 0.0;       // channel attenuation
    double receiver_loss_db = 0.0;    // receiver-optics attenuation
    double detector_efficiency = 1.0; // fraction in [0, 1]
    double dark_count_rate_hz = 0.0;
    double clock_rate_hz = 1e9;       // pulses per second
    double visibility = 1.0;          // interferometric visibility in [0, 1]
    std::optional<double> qber_override;             // replaces the modeled QBER
    std::optional<double> detection_rate_override_hz; // measured event rate, if known

    void validate() const; // throws ValidationError with a field-level message
};

// Raw key material from one partial key exchange: the sender's bits and the
// receiver's partially correlated copy, positions implicitly 0..length-1.
struct ExchangeRecord {
    Bits sender_bits;
    Bits alice_bits;
    std::size_t length = 0;
    double empirical_qber = 0.0;
    std::uint64_t seed = 0;
};

// End-to-end transmission probability 10^(-(fiber+receiver)/10), with the
// detector efficiency folded in by default.
double total_transmittance(const LinkParams& link, bool include_detector = true);

// clock * mu * transmittance (detector included) + dark rate, in Hz.
double expected_detection_rate(const LinkParams& link);

// Modeled event rate blended with the override, when one is configured.
double effective_detection_rate(const LinkParams& link);

// Dark counts contribute random bits (error 1/2); signal events err at
// (1 - visibility)/2. Returns qber_override unchanged when present.
double expected_qber(const LinkParams& link);

// Draw n_target detection outcomes: uniform sender bits, receiver bits
// flipped independently with the link's effective QBER. Bit-for-bit
// reproducible for a fixed seed.
ExchangeRecord sample_exchange(const LinkParams& link, std::size_t n_target, std::uint64_t seed);

} // namespace qds::channel
