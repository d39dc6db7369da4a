#include <doctest.h>

#include "oracles.hpp"

#include "telic/bandit.hpp"
#include "telic/error.hpp"
#include "telic/goal.hpp"

#include <random>

using namespace telic;

namespace {

const ExperienceSpace& space() { return bandit::space(); }

ExperienceDistribution random_law(std::mt19937_64& rng, std::size_t n) {
    return ExperienceDistribution(space(), n, oracle::random_simplex(rng, space().checked_count(n)));
}

Goal two_wins(double eps, Direction d = Direction::higher_preferred) {
    return {observation_count_at_least(bandit::kWin, 2), eps, d};
}

} // namespace

TEST_CASE("feature registry") {
    const auto f = make_feature("observation-count-at-least", {{"count", 2}}, {{"symbol", "1"}}, space());
    const Experience two_wins_h{{{bandit::kWin, 0}, {bandit::kWin, 1}}};
    const Experience one_win{{{bandit::kWin, 0}, {bandit::kLoss, 1}}};
    CHECK(f.contains(two_wins_h));
    CHECK_FALSE(f.contains(one_win));
    CHECK(make_feature("all", {}, {}, space()).contains(one_win));
    CHECK_FALSE(make_feature("none", {}, {}, space()).contains(one_win));
    CHECK(make_feature("observation-at-step", {{"step", 1}}, {{"symbol", "0"}}, space()).contains(one_win));
    CHECK(make_feature("action-count-at-least", {{"count", 1}}, {{"symbol", "R"}}, space()).contains(one_win));
    CHECK_THROWS_AS(make_feature("bogus", {}, {}, space()), ConfigError);
    CHECK_THROWS_AS(make_feature("observation-count-at-least", {}, {{"symbol", "1"}}, space()), ConfigError);
    CHECK_THROWS_AS(make_feature("observation-count-at-least", {{"count", 1.5}}, {{"symbol", "1"}}, space()),
                    ConfigError);
    CHECK_THROWS_AS(make_feature("observation-count-at-least", {{"count", 1}}, {{"symbol", "7"}}, space()), ShapeError);
}

TEST_CASE("feature indicator matches the predicate") {
    const auto f = observation_count_at_least(bandit::kWin, 1);
    const auto ind = f.indicator(space(), 2);
    for (std::size_t i = 0; i < ind.size(); ++i) CHECK(ind[i] == (f.contains(space().experience_at(i, 2)) ? 1.0 : 0.0));
}

TEST_CASE("prefers is symmetric and never doubly strict") {
    std::mt19937_64 rng(17);
    for (double eps : {0.01, 0.1, 0.3}) {
        const Goal g = two_wins(eps);
        for (int trial = 0; trial < 300; ++trial) {
            const auto a = random_law(rng, 3);
            const auto b = random_law(rng, 3);
            CHECK(prefers(g, a, a) == Preference::equivalent);
            const auto ab = prefers(g, a, b);
            const auto ba = prefers(g, b, a);
            if (ab == Preference::equivalent) CHECK(ba == Preference::equivalent);
            if (ab == Preference::a_preferred) CHECK(ba == Preference::b_preferred);
            if (ab == Preference::b_preferred) CHECK(ba == Preference::a_preferred);
            const double ma = feature_mass(a, g.feature);
            const double mb = feature_mass(b, g.feature);
            if (ma > mb + eps) CHECK(ab == Preference::a_preferred);
            if (ma > mb + eps) CHECK(prefers(two_wins(eps, Direction::lower_preferred), a, b) == Preference::b_preferred);
        }
    }
}

TEST_CASE("raw equivalence is not transitive") {
    const Goal g = two_wins(0.1);
    CHECK(prefers_masses(g, 0.30, 0.38) == Preference::equivalent);
    CHECK(prefers_masses(g, 0.38, 0.46) == Preference::equivalent);
    CHECK(prefers_masses(g, 0.30, 0.46) == Preference::b_preferred);
}

TEST_CASE("bin partitions satisfy the partition axioms") {
    std::mt19937_64 rng(23);
    for (double eps : {1.0, 0.5, 0.3, 0.1, 0.01}) {
        const auto repr = bin_partition(two_wins(eps));
        CHECK_NOTHROW(check_partition(repr));
        for (int trial = 0; trial < 200; ++trial) {
            const auto p = random_law(rng, 2);
            const double m = feature_mass(p, repr.goal.feature);
            int hits = 0;
            for (const auto& s : repr.states) hits += s.contains(m);
            CHECK(hits == 1);
            CHECK(assign_state(p, repr).contains(m));
        }
    }
}

TEST_CASE("boundary ties go to the upper bin") {
    const auto repr = bin_partition(two_wins(0.1));
    CHECK(repr.state_for(0.3).lower == doctest::Approx(0.3));
    CHECK(repr.state_for(0.0).id == 0);
    CHECK(repr.state_for(1.0).id == 9);
    const auto odd = bin_partition(two_wins(0.3));
    CHECK(odd.states.size() == 4);
    CHECK(odd.states.back().upper == 1.0);
}

TEST_CASE("bins and raw equivalence agree in both directions") {
    std::mt19937_64 rng(29);
    for (double eps : {0.5, 0.1, 0.05}) {
        const Goal g = two_wins(eps);
        const auto repr = bin_partition(g);
        std::vector<std::pair<double, int>> samples;
        for (int i = 0; i < 200; ++i) {
            const double m = feature_mass(random_law(rng, 2), g.feature);
            samples.emplace_back(m, repr.state_for(m).id);
        }
        for (const auto& [ma, ia] : samples)
            for (const auto& [mb, ib] : samples) {
                if (ia == ib) CHECK(prefers_masses(g, ma, mb) == Preference::equivalent);
                if (prefers_masses(g, ma, mb) == Preference::equivalent) CHECK(std::abs(ia - ib) <= 1);
            }
    }
}

TEST_CASE("ranks follow the goal direction") {
    const auto up = bin_partition(two_wins(0.25));
    const auto down = bin_partition(two_wins(0.25, Direction::lower_preferred));
    CHECK(up.states.front().rank == 0);
    CHECK(down.states.front().rank == 3);
    CHECK_THROWS_AS(bin_partition(two_wins(0.0)), PreconditionError);
    CHECK_THROWS_AS(bin_partition(two_wins(1.5)), PreconditionError);
}

TEST_CASE("check_partition rejects gaps and duplicate ranks") {
    auto repr = bin_partition(two_wins(0.5));
    auto gap = repr;
    gap.states[1].lower = 0.6;
    CHECK_THROWS_AS(check_partition(gap), PreconditionError);
    auto ranks = repr;
    ranks.states[1].rank = 0;
    CHECK_THROWS_AS(check_partition(ranks), PreconditionError);
}
