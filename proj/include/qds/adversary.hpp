#pragma once

#include <cstdint>
#include <vector>

namespace qds::adversary {

using Count = std::int64_t;

inline constexpr double wilson_z_95 = 1.959963984540054;

struct WilsonInterval {
    double lower = 0.0;
    double upper = 1.0;
};

// Score interval for a binomial proportion; well behaved at 0 and n.
WilsonInterval wilson_interval(Count successes, Count trials, double z = wilson_z_95);

// Result of one Monte Carlo attack run, paired with the analytic ceiling it
// is compared against. bound_value falls back to the trivial 1 when the
// parameters invert the gap the ceiling needs.
struct AttackOutcome {
    Count trials = 0;
    Count successes = 0;
    double frequency = 0.0;
    double wilson_upper_95 = 0.0;
    double bound_value = 1.0;
};

// Honest run aborted by bad luck: L mismatch draws at rate e, abort when the
// count reaches s_a * L.
AttackOutcome simulate_honest_abort(double e, Count l, double s_a, Count trials,
                                    std::uint64_t seed, int n_workers = 1);

// Strongest covered forger: every key bit guessed wrongly with independent
// probability p_e; forgery lands when mismatches stay under s_v * L.
AttackOutcome simulate_forge(double p_e, Count l, double s_v, Count trials, std::uint64_t seed,
                             int n_workers = 1);

// Deliberate corruption rates a dishonest signer applies per origin string,
// on top of channel noise.
struct RepudiationStrategy {
    double p_bob_origin = 0.0;
    double p_charlie_origin = 0.0;
};

// Dishonest signer tries to split the recipients: declared bits are wrong
// with rate e(1-p)+(1-e)p per origin, the halves swap uniformly, and the
// attack succeeds when the direct check passes at s_a while the forwarded
// check fails at s_v. Samples the per-recipient mismatch counts directly
// through their binomial and hypergeometric laws.
AttackOutcome simulate_repudiation(double e, Count l, double s_a, double s_v,
                                   RepudiationStrategy strategy, Count trials, std::uint64_t seed,
                                   int n_workers = 1);

struct RepudiationSweepPoint {
    RepudiationStrategy strategy;
    AttackOutcome outcome;
};

// Falsification sweep over a flip-rate grid; best is the point with the
// highest success frequency.
struct RepudiationSweep {
    RepudiationSweepPoint best;
    std::vector<RepudiationSweepPoint> points;
};

RepudiationSweep sweep_repudiation(double e, Count l, double s_a, double s_v,
                                   const std::vector<double>& flip_grid, Count trials_per_point,
                                   std::uint64_t seed, int n_workers = 1);

// Pr[Binomial(n, p) < threshold_count], summed exactly in log space.
double exact_acceptance_probability(Count n, double p, double threshold_count);

} // namespace qds::adversary
