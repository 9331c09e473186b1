#include "qds/adversary.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>

#include "qds/errors.hpp"
#include "qds/rng.hpp"
#include "qds/security.hpp"

namespace qds::adversary {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("adversary: ") + what);
}

void require_fraction(double v, const char* what) {
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, what);
}

// Trials are grouped into fixed-size shards, each with its own derived seed,
// so the tally is identical for any worker count.
constexpr Count shard_size = 1 << 14;

template <typename TrialFn>
Count run_sharded(Count trials, std::uint64_t seed, const std::string& tag, int n_workers,
                  TrialFn&& trial) {
    require(trials >= 1, "trials must be >= 1");
    require(n_workers >= 1, "n_workers must be >= 1");

    const Count n_shards = (trials + shard_size - 1) / shard_size;
    auto run_shard = [&](Count shard) {
        Rng rng(Rng::derive(seed, tag + "/shard/" + std::to_string(shard)));
        const Count begin = shard * shard_size;
        const Count count = std::min(shard_size, trials - begin);
        Count successes = 0;
        for (Count i = 0; i < count; ++i) successes += trial(rng) ? 1 : 0;
        return successes;
    };

    if (n_workers == 1 || n_shards == 1) {
        Count successes = 0;
        for (Count s = 0; s < n_shards; ++s) successes += run_shard(s);
        return successes;
    }

    std::atomic<Count> next{0};
    std::atomic<Count> total{0};
    std::vector<std::thread> pool;
    const int spawned = static_cast<int>(std::min<Count>(n_workers, n_shards));
    pool.reserve(spawned);
    for (int w = 0; w < spawned; ++w) {
        pool.emplace_back([&] {
            Count local = 0;
            for (Count s = next.fetch_add(1); s < n_shards; s = next.fetch_add(1))
                local += run_shard(s);
            total.fetch_add(local);
        });
    }
    for (auto& t : pool) t.join();
    return total.load();
}

AttackOutcome make_outcome(Count trials, Count successes, double bound_value) {
    AttackOutcome out;
    out.trials = trials;
    out.successes = successes;
    out.frequency = static_cast<double>(successes) / static_cast<double>(trials);
    out.wilson_upper_95 = wilson_interval(successes, trials).upper;
    out.bound_value = bound_value;
    return out;
}

} // namespace

WilsonInterval wilson_interval(Count successes, Count trials, double z) {
    require(trials >= 1, "wilson interval needs trials >= 1");
    require(successes >= 0 && successes <= trials, "successes must lie in [0, trials]");
    const double n = static_cast<double>(trials);
    const double phat = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (phat + z2 / (2.0 * n)) / denom;
    const double halfwidth =
        z / denom * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n));
    WilsonInterval w;
    w.lower = std::max(0.0, center - halfwidth);
    w.upper = std::min(1.0, center + halfwidth);
    return w;
}

AttackOutcome simulate_honest_abort(double e, Count l, double s_a, Count trials,
                                    std::uint64_t seed, int n_workers) {
    require_fraction(e, "e must lie in [0, 1]");
    require_fraction(s_a, "s_a must lie in [0, 1]");
    require(l >= 1, "L must be >= 1");

    const double abort_at = s_a * static_cast<double>(l);
    const Count successes = run_sharded(trials, seed, "honest", n_workers, [&](Rng& rng) {
        return static_cast<double>(binomial_count(rng, l, e)) >= abort_at;
    });
    const double bound = s_a >= e ? security::honest_abort_bound(l, s_a, e) : 1.0;
    return make_outcome(trials, successes, bound);
}

AttackOutcome simulate_forge(double p_e, Count l, double s_v, Count trials, std::uint64_t seed,
                             int n_workers) {
    require_fraction(p_e, "P_e must lie in [0, 1]");
    require_fraction(s_v, "s_v must lie in [0, 1]");
    require(l >= 1, "L must be >= 1");

    const double accept_below = s_v * static_cast<double>(l);
    const Count successes = run_sharded(trials, seed, "forge", n_workers, [&](Rng& rng) {
        return static_cast<double>(binomial_count(rng, l, p_e)) < accept_below;
    });
    const double bound = p_e >= s_v ? security::forge_bound(l, s_v, p_e) : 1.0;
    return make_outcome(trials, successes, bound);
}

AttackOutcome simulate_repudiation(double e, Count l, double s_a, double s_v,
                                   RepudiationStrategy strategy, Count trials, std::uint64_t seed,
                                   int n_workers) {
    require_fraction(e, "e must lie in [0, 1]");
    require_fraction(strategy.p_bob_origin, "flip rate must lie in [0, 1]");
    require_fraction(strategy.p_charlie_origin, "flip rate must lie in [0, 1]");
    require(l >= 2 && l % 2 == 0, "L must be even and >= 2");
    require(s_a < s_v, "repudiation needs s_a < s_v");

    // Rate at which a declared bit disagrees with its origin's true bit.
    const auto bad_rate = [&](double flip) { return e * (1.0 - flip) + (1.0 - e) * flip; };
    const double q_bob = bad_rate(strategy.p_bob_origin);
    const double q_charlie = bad_rate(strategy.p_charlie_origin);
    const double accept_below = s_a * static_cast<double>(l);
    const double reject_from = s_v * static_cast<double>(l);
    const Count half = l / 2;

    const Count successes = run_sharded(trials, seed, "repud", n_workers, [&](Rng& rng) {
        const long bad_bob = binomial_count(rng, l, q_bob);
        const long bad_charlie = binomial_count(rng, l, q_charlie);
        // Bad positions landing in the owner's kept half; the rest travel to
        // the other recipient with the forwarded half.
        const long kept_bob = hypergeometric_count(rng, l, half, bad_bob);
        const long kept_charlie = hypergeometric_count(rng, l, half, bad_charlie);
        const long n_bob = kept_bob + (bad_charlie - kept_charlie);
        const long n_charlie = kept_charlie + (bad_bob - kept_bob);
        return static_cast<double>(n_bob) < accept_below &&
               static_cast<double>(n_charlie) >= reject_from;
    });
    return make_outcome(trials, successes, security::repudiation_bound(l, s_a, s_v));
}

RepudiationSweep sweep_repudiation(double e, Count l, double s_a, double s_v,
                                   const std::vector<double>& flip_grid, Count trials_per_point,
                                   std::uint64_t seed, int n_workers) {
    require(!flip_grid.empty(), "sweep needs a nonempty grid");

    RepudiationSweep sweep;
    std::size_t index = 0;
    for (double p_bob : flip_grid) {
        for (double p_charlie : flip_grid) {
            const std::uint64_t point_seed =
                Rng::derive(seed, "sweep/point/" + std::to_string(index++));
            RepudiationSweepPoint point;
            point.strategy = {p_bob, p_charlie};
            point.outcome = simulate_repudiation(e, l, s_a, s_v, point.strategy,
                                                 trials_per_point, point_seed, n_workers);
            sweep.points.push_back(point);
            if (sweep.points.size() == 1 ||
                point.outcome.frequency > sweep.best.outcome.frequency)
                sweep.best = point;
        }
    }
    return sweep;
}

double exact_acceptance_probability(Count n, double p, double threshold_count) {
    require(n >= 0, "n must be >= 0");
    require_fraction(p, "p must lie in [0, 1]");
    require(std::isfinite(threshold_count), "threshold must be finite");

    const Count m_max = static_cast<Count>(std::ceil(threshold_count)) - 1;
    if (m_max < 0) return 0.0;
    if (m_max >= n) return 1.0;
    if (p == 0.0) return 1.0;
    if (p == 1.0) return 0.0;

    const double log_p = std::log(p);
    const double log_q = std::log1p(-p);
    const double nd = static_cast<double>(n);
    double sum = 0.0;
    for (Count m = 0; m <= m_max; ++m) {
        const double md = static_cast<double>(m);
        const double log_term = std::lgamma(nd + 1.0) - std::lgamma(md + 1.0) -
                                std::lgamma(nd - md + 1.0) + md * log_p + (nd - md) * log_q;
        sum += std::exp(log_term);
    }
    return std::clamp(sum, 0.0, 1.0);
}

} // namespace qds::adversary
