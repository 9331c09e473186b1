#include <cmath>
#include <vector>

#include "doctest.h"

#include "qds/adversary.hpp"
#include "qds/errors.hpp"
#include "qds/rng.hpp"
#include "qds/security.hpp"

using doctest::Approx;
using qds::adversary::AttackOutcome;
using qds::adversary::Count;
using qds::adversary::RepudiationStrategy;

namespace {

double interval_width(const AttackOutcome& outcome) {
    const auto w = qds::adversary::wilson_interval(outcome.successes, outcome.trials);
    return w.upper - w.lower;
}

// P[Binomial(n, p) >= threshold_count], summed directly so tails far below
// double precision keep their accuracy.
double exact_exceedance(Count n, double p, double threshold_count) {
    const Count m_min = static_cast<Count>(std::ceil(threshold_count));
    if (m_min <= 0) return 1.0;
    if (m_min > n) return 0.0;
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    const double log_p = std::log(p);
    const double log_q = std::log1p(-p);
    const double nd = static_cast<double>(n);
    double sum = 0.0;
    for (Count m = m_min; m <= n; ++m) {
        const double md = static_cast<double>(m);
        sum += std::exp(std::lgamma(nd + 1.0) - std::lgamma(md + 1.0) -
                        std::lgamma(nd - md + 1.0) + md * log_p + (nd - md) * log_q);
    }
    return sum;
}

} // namespace

TEST_SUITE("adversary") {

TEST_CASE("wilson interval matches reference points") {
    const auto mid = qds::adversary::wilson_interval(5, 100);
    CHECK(mid.lower == Approx(0.021543679154367973).epsilon(1e-12));
    CHECK(mid.upper == Approx(0.11175046923191914).epsilon(1e-12));

    const auto none = qds::adversary::wilson_interval(0, 100);
    CHECK(none.lower == Approx(0.0).epsilon(1e-12));
    CHECK(none.upper == Approx(0.036993498206985676).epsilon(1e-12));

    const auto all = qds::adversary::wilson_interval(100, 100);
    CHECK(all.lower == Approx(0.96300650179301432).epsilon(1e-12));
    CHECK(all.upper == Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(qds::adversary::wilson_interval(-1, 10), qds::ValidationError);
    CHECK_THROWS_AS(qds::adversary::wilson_interval(11, 10), qds::ValidationError);
    CHECK_THROWS_AS(qds::adversary::wilson_interval(0, 0), qds::ValidationError);
}

TEST_CASE("exact binomial tail matches reference points") {
    using qds::adversary::exact_acceptance_probability;
    CHECK(exact_acceptance_probability(1, 0.5, 1.0) == Approx(0.5).epsilon(1e-12));
    CHECK(exact_acceptance_probability(2, 0.5, 2.0) == Approx(0.75).epsilon(1e-12));
    CHECK(exact_acceptance_probability(200, 0.262, 39.84) ==
          Approx(0.016849933234801392).epsilon(1e-10));
    CHECK(exact_acceptance_probability(100, 0.3, 25.5) ==
          Approx(0.16313010446635175).epsilon(1e-10));
    CHECK(exact_acceptance_probability(500, 0.1, 60.0) ==
          Approx(0.91901283777296737).epsilon(1e-10));
    CHECK(exact_acceptance_probability(2000, 0.0108, 30.0) ==
          Approx(0.95080093070002748).epsilon(1e-10));
    CHECK(1.0 - exact_acceptance_probability(500, 0.12, 75.0) ==
          Approx(0.02563615005658846).epsilon(1e-8));
}

TEST_CASE("exact binomial tail handles the degenerate corners") {
    using qds::adversary::exact_acceptance_probability;
    CHECK(exact_acceptance_probability(10, 0.3, 0.0) == 0.0);
    CHECK(exact_acceptance_probability(10, 0.3, -5.0) == 0.0);
    CHECK(exact_acceptance_probability(10, 0.3, 11.0) == 1.0);
    CHECK(exact_acceptance_probability(10, 0.3, 10.5) == 1.0);
    CHECK(exact_acceptance_probability(10, 0.0, 5.0) == 1.0);
    CHECK(exact_acceptance_probability(10, 1.0, 5.0) == 0.0);
    CHECK(exact_acceptance_probability(10, 0.0, 0.0) == 0.0);
    CHECK(exact_acceptance_probability(0, 0.5, 1.0) == 1.0);

    CHECK_THROWS_AS(exact_acceptance_probability(-1, 0.5, 1.0), qds::ValidationError);
    CHECK_THROWS_AS(exact_acceptance_probability(10, 1.5, 1.0), qds::ValidationError);
    CHECK_THROWS_AS(exact_acceptance_probability(10, 0.5, std::nan("")), qds::ValidationError);
}

TEST_CASE("analytic ceilings dominate the exact tail probabilities") {
    using qds::adversary::exact_acceptance_probability;
    for (Count l : {50, 200, 1000}) {
        for (double e : {0.0, 0.05, 0.1, 0.2}) {
            for (double gap : {0.05, 0.1, 0.2}) {
                const double s = e + gap;
                const double exceed = exact_exceedance(l, e, s * static_cast<double>(l));
                CHECK(exceed <= qds::security::honest_abort_bound(l, s, e) + 1e-15);
            }
        }
        for (double p : {0.1, 0.262, 0.5}) {
            for (double gap : {0.05, 0.1}) {
                const double s = p - gap;
                const double stay_under =
                    exact_acceptance_probability(l, p, s * static_cast<double>(l));
                CHECK(stay_under <= qds::security::forge_bound(l, s, p) + 1e-15);
            }
        }
    }
}

TEST_CASE("honest abort frequency agrees with the exact tail") {
    const Count trials = 100000;
    const auto outcome = qds::adversary::simulate_honest_abort(0.1, 100, 0.12, trials, 11, 4);
    const double exact = exact_exceedance(100, 0.1, 0.12 * 100.0);
    CHECK(exact ==
          Approx(1.0 - qds::adversary::exact_acceptance_probability(100, 0.1, 12.0)).epsilon(1e-9));
    CHECK(std::abs(outcome.frequency - exact) <= 4 * interval_width(outcome));
    CHECK(outcome.bound_value == Approx(qds::security::honest_abort_bound(100, 0.12, 0.1)));
}

TEST_CASE("forgery frequency agrees with the exact tail") {
    const Count trials = 100000;
    const auto outcome = qds::adversary::simulate_forge(0.262, 200, 0.1992, trials, 12, 4);
    const double exact = 0.016849933234801392;
    CHECK(std::abs(outcome.frequency - exact) <= 4 * interval_width(outcome));
    CHECK(outcome.bound_value == Approx(qds::security::forge_bound(200, 0.1992, 0.262)));
}

TEST_CASE("degenerate attack rates hit the corners exactly") {
    const auto never = qds::adversary::simulate_honest_abort(0.0, 100, 0.1, 5000, 1, 2);
    CHECK(never.successes == 0);
    CHECK(never.frequency == 0.0);

    const auto always = qds::adversary::simulate_honest_abort(1.0, 100, 0.5, 5000, 1, 2);
    CHECK(always.successes == always.trials);
    CHECK(always.frequency == 1.0);
    CHECK(always.bound_value == 1.0);

    const auto hopeless = qds::adversary::simulate_forge(1.0, 100, 0.5, 5000, 1, 2);
    CHECK(hopeless.successes == 0);

    const auto trivial = qds::adversary::simulate_forge(0.1, 100, 0.3, 5000, 1, 2);
    CHECK(trivial.bound_value == 1.0);
    CHECK(trivial.frequency > 0.9);

    RepudiationStrategy honest_signer{0.0, 0.0};
    const auto quiet =
        qds::adversary::simulate_repudiation(0.0, 100, 0.0736, 0.1992, honest_signer, 5000, 1, 2);
    CHECK(quiet.successes == 0);
}

TEST_CASE("tallies are independent of the worker count") {
    const Count trials = 50000;
    const auto h1 = qds::adversary::simulate_honest_abort(0.1, 200, 0.12, trials, 77, 1);
    const auto h4 = qds::adversary::simulate_honest_abort(0.1, 200, 0.12, trials, 77, 4);
    CHECK(h1.successes == h4.successes);

    RepudiationStrategy strategy{0.1, 0.3};
    const auto r1 =
        qds::adversary::simulate_repudiation(0.0108, 500, 0.0736, 0.1992, strategy, trials, 5, 1);
    const auto r3 =
        qds::adversary::simulate_repudiation(0.0108, 500, 0.0736, 0.1992, strategy, trials, 5, 3);
    CHECK(r1.successes == r3.successes);
}

TEST_CASE("count-level repudiation sampling matches an explicit position-level model") {
    const double e = 0.2;
    const Count l = 100;
    const double s_a = 0.28;
    const double s_v = 0.32;
    const RepudiationStrategy strategy{0.05, 0.35};
    const Count trials = 20000;

    const auto counted =
        qds::adversary::simulate_repudiation(e, l, s_a, s_v, strategy, trials, 21, 4);
    CHECK(counted.successes > 1000);

    const auto bad_rate = [&](double flip) { return e * (1.0 - flip) + (1.0 - e) * flip; };
    const double q_bob = bad_rate(strategy.p_bob_origin);
    const double q_charlie = bad_rate(strategy.p_charlie_origin);
    const double accept_below = s_a * static_cast<double>(l);
    const double reject_from = s_v * static_cast<double>(l);

    qds::Rng rng(qds::Rng::derive(21, "position-level"));
    Count successes = 0;
    std::vector<std::uint8_t> bad_bob(l), bad_charlie(l);
    for (Count t = 0; t < trials; ++t) {
        for (Count i = 0; i < l; ++i) {
            bad_bob[i] = rng.uniform_double() < q_bob ? 1 : 0;
            bad_charlie[i] = rng.uniform_double() < q_charlie ? 1 : 0;
        }
        const auto bob_kept = qds::sample_subset(rng, static_cast<std::uint32_t>(l),
                                                 static_cast<std::uint32_t>(l / 2));
        const auto charlie_kept = qds::sample_subset(rng, static_cast<std::uint32_t>(l),
                                                     static_cast<std::uint32_t>(l / 2));
        long n_bob = 0;
        long n_charlie = 0;
        std::vector<std::uint8_t> bob_keeps(l, 0), charlie_keeps(l, 0);
        for (auto idx : bob_kept) bob_keeps[idx] = 1;
        for (auto idx : charlie_kept) charlie_keeps[idx] = 1;
        for (Count i = 0; i < l; ++i) {
            if (bad_bob[i]) ++(bob_keeps[i] ? n_bob : n_charlie);
            if (bad_charlie[i]) ++(charlie_keeps[i] ? n_charlie : n_bob);
        }
        if (static_cast<double>(n_bob) < accept_below &&
            static_cast<double>(n_charlie) >= reject_from)
            ++successes;
    }
    const double explicit_freq = static_cast<double>(successes) / static_cast<double>(trials);

    const double pooled = 0.5 * (counted.frequency + explicit_freq);
    const double sigma = std::sqrt(std::max(pooled * (1.0 - pooled), 1e-9) * 2.0 /
                                   static_cast<double>(trials));
    CHECK(std::abs(counted.frequency - explicit_freq) < 5 * sigma);
}

TEST_CASE("repudiation frequencies stay under the analytic ceiling") {
    const double e = 0.0108;
    const Count l = 1000;
    const double s_a = 0.0736;
    const double s_v = 0.1992;
    const double bound = qds::security::repudiation_bound(l, s_a, s_v);
    CHECK(bound == Approx(0.038747353610400928).epsilon(1e-12));

    const std::vector<double> grid{0.0, 0.1, 0.2, 0.3};
    const auto sweep = qds::adversary::sweep_repudiation(e, l, s_a, s_v, grid, 20000, 9, 4);
    REQUIRE(sweep.points.size() == 16);
    for (const auto& point : sweep.points) {
        CHECK(point.outcome.bound_value == Approx(bound));
        CHECK(point.outcome.frequency <= bound + 3 * interval_width(point.outcome));
        CHECK(sweep.best.outcome.frequency >= point.outcome.frequency);
    }

    const auto again = qds::adversary::sweep_repudiation(e, l, s_a, s_v, grid, 20000, 9, 1);
    for (std::size_t i = 0; i < sweep.points.size(); ++i)
        CHECK(sweep.points[i].outcome.successes == again.points[i].outcome.successes);
}

TEST_CASE("attack parameter validation") {
    RepudiationStrategy s{0.1, 0.1};
    CHECK_THROWS_AS(qds::adversary::simulate_repudiation(0.01, 99, 0.07, 0.19, s, 10, 1),
                    qds::ValidationError);
    CHECK_THROWS_AS(qds::adversary::simulate_repudiation(0.01, 100, 0.19, 0.07, s, 10, 1),
                    qds::ValidationError);
    CHECK_THROWS_AS(qds::adversary::simulate_honest_abort(1.5, 100, 0.1, 10, 1),
                    qds::ValidationError);
    CHECK_THROWS_AS(qds::adversary::simulate_honest_abort(0.1, 100, 0.1, 0, 1),
                    qds::ValidationError);
    CHECK_THROWS_AS(qds::adversary::sweep_repudiation(0.01, 100, 0.07, 0.19, {}, 10, 1),
                    qds::ValidationError);
}

} // TEST_SUITE
