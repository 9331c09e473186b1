#include "qds/security.hpp"

#include <algorithm>
#include <cmath>

#include "qds/errors.hpp"

namespace qds::security {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("security: ") + what);
}

} // namespace

void SecurityInputs::validate() const {
    require(std::isfinite(mu) && mu > 0.0 && mu < 1.0, "mu must lie in (0, 1)");
    require(std::isfinite(t) && t > 0.0 && t <= 1.0, "T must lie in (0, 1]");
    require(std::isfinite(e) && e >= 0.0, "e must be >= 0");
    require(e < 1.0 / 6.0, "QBER outside guessing-formula validity (e must be < 1/6)");
    if (p_e_override) {
        require(std::isfinite(*p_e_override) && *p_e_override > 0.0 && *p_e_override <= 0.5,
                "p_e_override must lie in (0, 0.5]");
    }
}

const char* to_string(EveBranch branch) {
    switch (branch) {
    case EveBranch::individual: return "individual";
    case EveBranch::sequential: return "sequential";
    case EveBranch::external: return "external";
    }
    return "unknown";
}

double BoundSet::max() const {
    return std::max(honest, std::max(repudiation, forge));
}

double collision_depth(double mu, double t) {
    if (mu == 1.0) throw ValidationError("security: degenerate logarithm base");
    require(std::isfinite(mu) && mu > 0.0 && mu < 1.0, "mu must lie in (0, 1)");
    require(std::isfinite(t) && t > 0.0 && t <= 1.0, "T must lie in (0, 1]");
    return std::log(t) / std::log(mu) + 1.0;
}

EveError eve_error_probability(const SecurityInputs& inputs) {
    inputs.validate();

    EveError out;
    out.depth = collision_depth(inputs.mu, inputs.t);

    const double leaked = 2.0 * inputs.mu * (1.0 - inputs.t);
    const double omega = 1.0 - 6.0 * inputs.e;
    out.individual_term =
        leaked + (1.0 - leaked) * (1.0 - std::exp(-0.5 * omega * omega));
    out.sequential_term =
        2.0 * out.depth * inputs.e + 0.5 * (1.0 - 2.0 * out.depth * inputs.e);
    out.formula_value = 1.0 - std::max(out.individual_term, out.sequential_term);
    out.branch = out.individual_term >= out.sequential_term ? EveBranch::individual
                                                            : EveBranch::sequential;

    if (inputs.p_e_override) {
        out.p_e = *inputs.p_e_override;
        out.branch = EveBranch::external;
        out.overridden = true;
    } else {
        out.p_e = std::clamp(out.formula_value, 0.0, 0.5);
        out.clamped = out.p_e != out.formula_value;
    }
    require(out.p_e > inputs.e, "no security gap");
    return out;
}

Thresholds make_thresholds(double e, double p_e) {
    require(std::isfinite(e) && std::isfinite(p_e), "thresholds need finite e and P_e");
    require(p_e > e, "no security gap");
    Thresholds th;
    th.g = p_e - e;
    th.s_a = e + th.g / 4.0;
    th.s_v = e + 3.0 * th.g / 4.0;
    return th;
}

namespace {

void require_length(Count l) {
    require(l >= 1, "L must be >= 1");
}

} // namespace

double honest_abort_bound(Count l, double s_a, double e) {
    require_length(l);
    require(s_a >= e, "honest bound needs s_a >= e");
    const double delta = s_a - e;
    return 2.0 * std::exp(-delta * delta * static_cast<double>(l));
}

double repudiation_bound(Count l, double s_a, double s_v) {
    require_length(l);
    require(s_v >= s_a, "repudiation bound needs s_v >= s_a");
    const double delta = (s_v - s_a) / 2.0;
    return 2.0 * std::exp(-delta * delta * static_cast<double>(l));
}

double forge_bound(Count l, double s_v, double p_e) {
    require_length(l);
    require(p_e >= s_v, "forge bound needs P_e >= s_v");
    const double delta = p_e - s_v;
    return std::exp(-delta * delta * static_cast<double>(l));
}

BoundSet evaluate_bounds(Count l, const Thresholds& th, double e, double p_e) {
    BoundSet b;
    b.honest = honest_abort_bound(l, th.s_a, e);
    b.repudiation = repudiation_bound(l, th.s_a, th.s_v);
    b.forge = forge_bound(l, th.s_v, p_e);
    return b;
}

Count required_length(double e, double p_e, double epsilon) {
    require(std::isfinite(epsilon) && epsilon > 0.0 && epsilon < 1.0,
            "epsilon must lie in (0, 1)");
    const Thresholds th = make_thresholds(e, p_e);

    const double quarter = th.g / 4.0;
    const double guess = std::ceil(std::log(2.0 / epsilon) / (quarter * quarter));
    Count l = guess < 1.0 ? 1 : static_cast<Count>(guess);

    const auto fits = [&](Count candidate) {
        return evaluate_bounds(candidate, th, e, p_e).max() <= epsilon;
    };
    while (!fits(l)) ++l;
    while (l > 1 && fits(l - 1)) --l;
    return l;
}

RateConvention rate_convention_from_string(const std::string& name) {
    if (name == "per_sender") return RateConvention::per_sender;
    if (name == "alternating") return RateConvention::alternating;
    throw ValidationError("security: unknown rate convention \"" + name + "\"");
}

const char* to_string(RateConvention convention) {
    switch (convention) {
    case RateConvention::per_sender: return "per_sender";
    case RateConvention::alternating: return "alternating";
    }
    return "unknown";
}

double signing_rate(double detection_rate_hz, Count l, RateConvention convention) {
    require_length(l);
    require(std::isfinite(detection_rate_hz) && detection_rate_hz > 0.0,
            "detection rate must be > 0");
    const double per_sender = detection_rate_hz / (2.0 * static_cast<double>(l));
    return convention == RateConvention::alternating ? per_sender / 2.0 : per_sender;
}

Count signing_capacity(Count shared_bits, Count l, Count k) {
    require(shared_bits >= 0, "shared_bits must be >= 0");
    require(l >= 0 && k >= 0 && l + k >= 1, "L + k must be >= 1");
    return shared_bits / (2 * (l + k));
}

SecurityParams derive_security_params(const SecurityInputs& inputs, double epsilon,
                                      std::optional<Count> k,
                                      std::optional<Count> l_override) {
    SecurityParams params;
    params.inputs = inputs;
    params.eve = eve_error_probability(inputs);
    params.thresholds = make_thresholds(inputs.e, params.eve.p_e);
    params.epsilon = epsilon;
    if (l_override) {
        require(*l_override >= 1, "L must be >= 1");
        params.l = *l_override;
    } else {
        params.l = required_length(inputs.e, params.eve.p_e, epsilon);
    }
    params.k = k.value_or(params.l);
    require(params.k >= 1, "k must be >= 1");
    params.bounds = evaluate_bounds(params.l, params.thresholds, inputs.e, params.eve.p_e);
    return params;
}

} // namespace qds::security
