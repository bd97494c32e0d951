#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <vector>

#include "entail_guard/errors.hpp"
#include "entail_guard/nli.hpp"
#include "entail_guard/rng.hpp"

using namespace entail_guard;

namespace {

// All (c, n, e) with c+n+e = 100 in steps of 0.01: 5151 points.
std::vector<NliDistribution> simplex_grid() {
    std::vector<NliDistribution> grid;
    for (int c = 0; c <= 100; ++c) {
        for (int n = 0; n <= 100 - c; ++n) {
            const int e = 100 - c - n;
            grid.emplace_back(c / 100.0, n / 100.0, e / 100.0);
        }
    }
    return grid;
}

}  // namespace

TEST_CASE("distribution construction validates and normalizes") {
    CHECK_THROWS_AS(NliDistribution(-0.1, 0.6, 0.5), ValidationError);
    CHECK_THROWS_AS(NliDistribution(0.5, 1.2, 0.0), ValidationError);
    CHECK_THROWS_AS(NliDistribution(0.5, 0.4, 0.2), ValidationError);   // sum 1.1
    CHECK_THROWS_AS(NliDistribution(0.2, 0.2, 0.2), ValidationError);   // sum 0.6

    // A residual within 1e-6 lands in the largest field; the others are
    // preserved bit-exactly.
    NliDistribution d(0.2, 0.6999995, 0.1);
    CHECK(d.contradiction() == 0.2);
    CHECK(d.entailment() == 0.1);
    CHECK(d.contradiction() + d.neutral() + d.entailment() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.neutral() == doctest::Approx(0.7).epsilon(1e-9));

    NliDistribution exact(0.25, 0.5, 0.25);
    CHECK(exact.contradiction() == 0.25);
    CHECK(exact.neutral() == 0.5);
    CHECK(exact.entailment() == 0.25);
}

TEST_CASE("accepts matches the strategy definitions") {
    CHECK(accepts(Strategy::neu(), NliDistribution(0.05, 0.91, 0.04)));
    // Strict inequality at the boundary.
    CHECK_FALSE(accepts(Strategy::neu(), NliDistribution(0.10, 0.85, 0.05)));
    CHECK(accepts(Strategy::ent(), NliDistribution(0.10, 0.50, 0.40)));
    CHECK(accepts(Strategy::con(), NliDistribution(0.40, 0.50, 0.10)));
    CHECK_FALSE(accepts(Strategy::con(), NliDistribution(0.10, 0.50, 0.40)));
    CHECK(accepts(Strategy::control(), NliDistribution(1.0, 0.0, 0.0)));
}

TEST_CASE("label_of returns the argmax with the fixed tie order") {
    CHECK(label_of(NliDistribution(0.1, 0.7, 0.2)) == NliLabel::Neutral);
    CHECK(label_of(NliDistribution(1.0 / 3, 1.0 / 3, 1.0 / 3)) == NliLabel::Contradiction);
    CHECK(label_of(NliDistribution(0.45, 0.10, 0.45)) == NliLabel::Contradiction);
    CHECK(label_of(NliDistribution(0.10, 0.45, 0.45)) == NliLabel::Neutral);
    CHECK(label_of(NliDistribution(0.7, 0.2, 0.1)) == NliLabel::Contradiction);
    CHECK(label_of(NliDistribution(0.2, 0.1, 0.7)) == NliLabel::Entailment);
}

TEST_CASE("simplex grid: ENT/CON partition and CONTROL acceptance") {
    const auto grid = simplex_grid();
    CHECK(grid.size() == 5151);
    for (const NliDistribution& d : grid) {
        const bool ent = accepts(Strategy::ent(), d);
        const bool con = accepts(Strategy::con(), d);
        if (d.entailment() == d.contradiction()) {
            CHECK_FALSE(ent);
            CHECK_FALSE(con);
        } else {
            CHECK(ent != con);
        }
        CHECK(accepts(Strategy::control(), d));
        CHECK(accepts(Strategy::neu(), d) == (d.neutral() > 0.85));
    }
}

TEST_CASE("NEU acceptance is monotone in the neutral probability") {
    SplitMix64 rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
        const double threshold = rng.next_double();
        const Strategy strategy = Strategy::neu(threshold);
        double a = rng.next_double();
        double b = rng.next_double();
        if (a > b) std::swap(a, b);
        const double rest_low = 1.0 - a;
        const double rest_high = 1.0 - b;
        const NliDistribution lower(rest_low / 2, a, rest_low / 2);
        const NliDistribution higher(rest_high / 2, b, rest_high / 2);
        if (accepts(strategy, lower)) CHECK(accepts(strategy, higher));
    }
}

TEST_CASE("label_of is permutation-consistent away from ties") {
    SplitMix64 rng(7);
    const std::array<std::array<int, 3>, 6> permutations = {{
        {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0},
    }};
    const std::array<NliLabel, 3> labels = {NliLabel::Contradiction, NliLabel::Neutral,
                                            NliLabel::Entailment};
    for (int trial = 0; trial < 200; ++trial) {
        double raw[3] = {rng.next_double(), rng.next_double(), rng.next_double()};
        const double sum = raw[0] + raw[1] + raw[2];
        double p[3];
        for (int i = 0; i < 3; ++i) p[i] = raw[i] / sum;
        // Normalization residual goes to the largest; skip near-ties so the
        // adjustment cannot flip the argmax.
        if (std::abs(p[0] - p[1]) < 1e-9 || std::abs(p[1] - p[2]) < 1e-9 ||
            std::abs(p[0] - p[2]) < 1e-9) {
            continue;
        }
        int argmax = 0;
        for (int i = 1; i < 3; ++i) {
            if (p[i] > p[argmax]) argmax = i;
        }
        for (const auto& perm : permutations) {
            // perm[i]: which original slot feeds field i.
            const NliDistribution d(p[perm[0]], p[perm[1]], p[perm[2]]);
            int expected_field = 0;
            for (int i = 0; i < 3; ++i) {
                if (perm[i] == argmax) expected_field = i;
            }
            CHECK(label_of(d) == labels[expected_field]);
        }
    }
}

TEST_CASE("strategy names round-trip") {
    CHECK(strategy_kind_from_string("control") == StrategyKind::Control);
    CHECK(strategy_kind_from_string("NEU") == StrategyKind::Neu);
    CHECK(to_string(StrategyKind::Ent) == "ENT");
    CHECK_THROWS_AS(strategy_kind_from_string("bogus"), ValidationError);
    CHECK_THROWS_AS(Strategy::neu(1.5), ValidationError);
}
