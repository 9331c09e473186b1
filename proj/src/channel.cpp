#include "qds/channel.hpp"

#include <cmath>
#include <sstream>

#include "qds/errors.hpp"
#include "qds/rng.hpp"

namespace qds::channel {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("link: ") + what);
}

} // namespace

void LinkParams::validate() const {
    require(std::isfinite(mu) && mu > 0.0 && mu < 1.0, "mu must lie in (0, 1)");
    require(std::isfinite(fiber_loss_db) && fiber_loss_db >= 0.0, "fiber_loss_db must be >= 0");
    require(std::isfinite(receiver_loss_db) && receiver_loss_db >= 0.0,
            "receiver_loss_db must be >= 0");
    require(std::isfinite(detector_efficiency) && detector_efficiency > 0.0 &&
                detector_efficiency <= 1.0,
            "detector_efficiency must lie in (0, 1]");
    require(std::isfinite(dark_count_rate_hz) && dark_count_rate_hz >= 0.0,
            "dark_count_rate_hz must be >= 0");
    require(std::isfinite(clock_rate_hz) && clock_rate_hz > 0.0, "clock_rate_hz must be > 0");
    require(std::isfinite(visibility) && visibility > 0.5 && visibility <= 1.0,
            "visibility must lie in (0.5, 1]");
    if (qber_override) {
        require(std::isfinite(*qber_override) && *qber_override >= 0.0 && *qber_override < 0.5,
                "qber_override must lie in [0, 0.5)");
    }
    if (detection_rate_override_hz) {
        require(std::isfinite(*detection_rate_override_hz) && *detection_rate_override_hz > 0.0,
                "detection_rate_override_hz must be > 0");
    }
}

double total_transmittance(const LinkParams& link, bool include_detector) {
    double t = std::pow(10.0, -(link.fiber_loss_db + link.receiver_loss_db) / 10.0);
    if (include_detector) t *= link.detector_efficiency;
    return t;
}

double expected_detection_rate(const LinkParams& link) {
    return link.clock_rate_hz * link.mu * total_transmittance(link, true) +
           link.dark_count_rate_hz;
}

double effective_detection_rate(const LinkParams& link) {
    if (link.detection_rate_override_hz) return *link.detection_rate_override_hz;
    return expected_detection_rate(link);
}

double expected_qber(const LinkParams& link) {
    if (link.qber_override) return *link.qber_override;
    const double signal = link.clock_rate_hz * link.mu * total_transmittance(link, true);
    const double dark = link.dark_count_rate_hz;
    const double total = signal + dark;
    if (total <= 0.0) return 0.5;
    const double e_opt = (1.0 - link.visibility) / 2.0;
    return (0.5 * dark + e_opt * signal) / total;
}

ExchangeRecord sample_exchange(const LinkParams& link, std::size_t n_target, std::uint64_t seed) {
    link.validate();
    if (n_target == 0) throw ValidationError("exchange: n_target must be > 0");
    const double e = expected_qber(link);

    ExchangeRecord rec;
    rec.length = n_target;
    rec.seed = seed;
    rec.sender_bits.resize(n_target);
    rec.alice_bits.resize(n_target);

    Rng bit_rng(Rng::derive(seed, "exchange/bits"));
    Rng flip_rng(Rng::derive(seed, "exchange/flips"));
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < n_target; ++i) {
        const std::uint8_t b = bit_rng.bernoulli(0.5) ? 1 : 0;
        const bool flip = flip_rng.bernoulli(e);
        rec.sender_bits[i] = b;
        rec.alice_bits[i] = flip ? static_cast<std::uint8_t>(1 - b) : b;
        if (flip) ++mismatches;
    }
    rec.empirical_qber = static_cast<double>(mismatches) / static_cast<double>(n_target);
    return rec;
}

} // namespace qds::channel
