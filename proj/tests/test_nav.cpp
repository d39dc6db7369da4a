#include <doctest.h>

#include "oracles.hpp"

#include "telic/error.hpp"
#include "telic/nav.hpp"

#include <algorithm>
#include <random>

using namespace telic;
using namespace telic::nav;

namespace {

NavTask mirrored(NavTask t) {
    for (auto& r : t.regions) {
        r.center = -r.center;
        r.name = r.name == "L" ? "R" : r.name == "R" ? "L" : r.name;
    }
    return t;
}

std::string swap_lr(const std::string& label) {
    if (label == "S_L") return "S_R";
    if (label == "S_R") return "S_L";
    return label;
}

} // namespace

TEST_CASE("default task") {
    const NavTask t = default_task();
    CHECK_NOTHROW(validate(t));
    CHECK(t.horizon == 30);
    CHECK(t.region("R").center == 2.0);
    CHECK(t.region("L").center == -2.0);
    CHECK(t.order == std::vector<std::string>{"S_L", "S_0", "S_R"});
    CHECK(state_label("R") == "S_R");
}

TEST_CASE("task validation") {
    NavTask t = default_task();
    t.regions[0].center = t.regions[1].center + 0.5;
    CHECK_THROWS_AS(validate(t), PreconditionError);
    t = default_task();
    t.order = {"S_L", "S_R"};
    CHECK_THROWS_AS(validate(t), PreconditionError);
    t = default_task();
    t.epsilon = 0.0;
    CHECK_THROWS_AS(validate(t), PreconditionError);
    t = default_task();
    t.pi0.sigma = 0.0;
    CHECK_THROWS_AS(validate(t), PreconditionError);
    t = default_task();
    t.regions[0].radius = -1.0;
    CHECK_THROWS_AS(validate(t), PreconditionError);
    t = default_task();
    t.horizon = 0;
    CHECK_THROWS_AS(validate(t), PreconditionError);
}

TEST_CASE("final position law and tail masses") {
    const auto law = final_position_distribution({0.1, 2.0}, 25);
    CHECK(law.mean == doctest::Approx(2.5));
    CHECK(law.std == doctest::Approx(10.0));
    CHECK(interval_mass(0.0, 1.0, -1.0, 1.0) == doctest::Approx(std::erf(1.0 / std::sqrt(2.0))));
    const double far = interval_mass(0.0, 1.0, 10.0, 11.0);
    const double ref = 0.5 * (std::erfc(10.0 / std::sqrt(2.0)) - std::erfc(11.0 / std::sqrt(2.0)));
    CHECK(far == doctest::Approx(ref).epsilon(1e-10));
    CHECK(far > 0.0);
}

TEST_CASE("region probabilities agree with simulated walks") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> mu(-0.15, 0.15), sd(0.3, 1.5);
    std::uniform_int_distribution<std::size_t> T(1, 30);
    for (int trial = 0; trial < 8; ++trial) {
        NavTask task = default_task();
        task.horizon = T(rng);
        const GaussianStepPolicy pol{mu(rng), sd(rng)};
        const std::size_t n = 20000;
        const auto walks = simulate_trajectories(pol, task, n, 100 + trial);
        for (const auto& r : task.regions) {
            std::size_t hits = 0;
            for (const auto& l : walks.labels) hits += l == r.name;
            const double p = region_probability(pol, task.horizon, r);
            const double band = 3.0 * std::sqrt(p * (1.0 - p) / n) + 1.0 / n;
            CHECK(std::abs(static_cast<double>(hits) / n - p) <= band);
        }
    }
}

TEST_CASE("walks are reproducible and start at the origin") {
    const auto a = simulate_trajectories({0.05, 1.0}, default_task(), 20, 9);
    const auto b = simulate_trajectories({0.05, 1.0}, default_task(), 20, 9);
    CHECK(a.positions == b.positions);
    CHECK(a.labels == b.labels);
    for (std::size_t w = 0; w < a.count; ++w) CHECK(a.at(w, 0) == 0.0);
    CHECK(a.positions.size() == 20 * 31);
}

TEST_CASE("Gaussian step divergence equals quadrature") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> mu(-2.0, 2.0), sd(0.2, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const GaussianStepPolicy a{mu(rng), sd(rng)}, b{mu(rng), sd(rng)};
        CHECK(std::abs(gaussian_step_kl(a, b) - oracle::gauss_kl_quadrature(a.mu, a.sigma, b.mu, b.sigma)) < 1e-8);
    }
}

TEST_CASE("every policy gets exactly one label consistent with the margins") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> mu(-0.3, 0.3), sd(0.05, 2.0);
    const NavTask task = default_task();
    for (int trial = 0; trial < 2000; ++trial) {
        const GaussianStepPolicy pol{mu(rng), sd(rng)};
        const std::string label = classify(pol, task);
        const double dp = delta_p(pol, task);
        if (dp >= task.epsilon) CHECK(label == "S_R");
        else if (-dp >= task.epsilon) CHECK(label == "S_L");
        else CHECK(label == "S_0");
        CHECK(margin(pol, task, "R") == doctest::Approx(dp));
    }
}

TEST_CASE("mirrored task swaps the side states") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> mu(-0.3, 0.3), sd(0.05, 2.0);
    NavTask task = default_task();
    task.regions[1].center = 2.5;
    task.regions[0].center = -1.7;
    task.regions[0].radius = 0.8;
    const NavTask mirror = mirrored(task);
    for (int trial = 0; trial < 500; ++trial) {
        const GaussianStepPolicy pol{mu(rng), sd(rng)};
        const GaussianStepPolicy flip{-pol.mu, pol.sigma};
        CHECK(delta_p(flip, mirror) == doctest::Approx(-delta_p(pol, task)).epsilon(1e-9).scale(1e-12));
        const double margin_r = margin(pol, task, "R");
        if (std::abs(std::abs(margin_r) - task.epsilon) > 1e-9) CHECK(classify(flip, mirror) == swap_lr(classify(pol, task)));
    }
}

TEST_CASE("mixture divergence closed form equals quadrature and grows with t") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> w(0.05, 5.0), mu(-0.2, 0.2), sd(0.5, 1.5);
    for (int trial = 0; trial < 20; ++trial) {
        const NavTask task = default_task();
        TiltedGaussian tg{final_position_distribution({mu(rng), sd(rng)}, task.horizon), task.regions,
                          {w(rng), w(rng), w(rng)}};
        const auto base = tg.base_masses();
        double z = 0.0;
        for (std::size_t i = 0; i < base.size(); ++i) z += base[i] * tg.weights[i];
        for (auto& x : tg.weights) x /= z;
        double prev = 0.0;
        for (int k = 0; k <= 20; ++k) {
            const double t = k / 20.0;
            const double closed = mixture_kl_closed(tg, t);
            CHECK(std::abs(closed - mixture_kl_quadrature(tg, t)) < 1e-8);
            CHECK(closed >= prev - 1e-9);
            prev = closed;
        }
        double mass = 0.0;
        for (double m : tg.masses()) mass += m;
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("tilted moments match quadrature") {
    const NavTask task = default_task();
    TiltedGaussian tg{final_position_distribution({0.02, 0.9}, task.horizon), task.regions, {3.0, 0.4, 0.8}};
    const auto base = tg.base_masses();
    double norm = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) norm += base[i] * tg.weights[i];
    for (auto& x : tg.weights) x /= norm;
    std::vector<double> cuts{-60.0, 60.0};
    for (const auto& r : tg.regions) {
        cuts.push_back(r.lower());
        cuts.push_back(r.upper());
    }
    std::sort(cuts.begin(), cuts.end());
    auto integral = [&](auto f) {
        double total = 0.0;
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
            total += oracle::simpson(f, cuts[k] + 1e-12, cuts[k + 1] - 1e-12, 20000);
        return total;
    };
    const double z = integral([&](double x) { return tg.density(x); });
    const double m1 = integral([&](double x) { return x * tg.density(x); }) / z;
    const double m2 = integral([&](double x) { return x * x * tg.density(x); }) / z;
    const auto m = tg.moments();
    CHECK(m[0] == doctest::Approx(m1).epsilon(1e-6));
    CHECK(m[1] == doctest::Approx(m2).epsilon(1e-6));
}

TEST_CASE("atom projection matches a brute-force search") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = oracle::random_simplex(rng, 3);
        // q0 - q1 >= 0.2 and q0 - q2 >= 0.2
        const std::vector<AtomConstraint> cons{{{1.0, -1.0, 0.0}, 0.2}, {{1.0, 0.0, -1.0}, 0.2}};
        const auto proj = project_atoms(p, cons);
        REQUIRE(proj.feasible);
        CHECK(proj.rate == doctest::Approx(oracle::kl(proj.q, p)).epsilon(1e-9));
        for (const auto& c : cons) CHECK(c.coeff[0] * proj.q[0] + c.coeff[1] * proj.q[1] + c.coeff[2] * proj.q[2] >= c.bound - 1e-9);
        double best = INFINITY;
        const int n = 600;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; i + j <= n; ++j) {
                const std::vector<double> q{double(i) / n, double(j) / n, double(n - i - j) / n};
                if (q[0] - q[1] >= 0.2 && q[0] - q[2] >= 0.2) best = std::min(best, oracle::kl(q, p));
            }
        CHECK(proj.rate <= best + 1e-12);
        CHECK(proj.rate >= best - 5e-3);
    }
    const auto bad = project_atoms({0.5, 0.5}, {{{1.0, 0.0}, 1.5}});
    CHECK_FALSE(bad.feasible);
    CHECK(std::isinf(bad.rate));
}

TEST_CASE("state projection is zero inside and lands in the state otherwise") {
    const NavTask task = default_task();
    const GaussianStepPolicy pol{0.0, 1.0};
    CHECK(classify(pol, task) == "S_0");
    CHECK(telic_distance(pol, task, "S_0") == 0.0);
    for (const std::string label : {"S_R", "S_L"}) {
        const auto proj = project_onto_state(pol, task, label);
        CHECK(proj.feasible);
        CHECK(proj.rate > 0.0);
        const auto q = proj.projected.masses();
        const std::size_t x = task.regions[0].name == label.substr(2) ? 0 : 1;
        CHECK(q[x] - q[1 - x] >= task.epsilon - 1e-8);
    }
    const GaussianStepPolicy right{0.05, 0.3};
    REQUIRE(classify(right, task) == "S_R");
    const auto back = project_onto_state(right, task, "S_0");
    const auto q = back.projected.masses();
    CHECK(std::abs(q[1] - q[0]) <= task.epsilon + 1e-8);
}

TEST_CASE("analytic divergence gradient matches finite differences") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> mu(-0.1, 0.1), sd(0.5, 1.5);
    const NavTask task = default_task();
    for (int trial = 0; trial < 20; ++trial) {
        const GaussianStepPolicy pol{mu(rng), sd(rng)};
        const auto star = project_onto_state(pol, task, trial % 2 ? "S_R" : "S_L").projected;
        const auto g = kl_gradient(star, pol, task.horizon);
        std::vector<double> cuts{star.base.mean - 12 * star.base.std, star.base.mean + 12 * star.base.std};
        for (const auto& r : star.regions) {
            cuts.push_back(r.lower());
            cuts.push_back(r.upper());
        }
        std::sort(cuts.begin(), cuts.end());
        auto kl_at = [&](GaussianStepPolicy p) {
            const auto law = final_position_distribution(p, task.horizon);
            auto f = [&](double x) {
                const double d = star.density(x);
                return d > 0.0 ? d * std::log(d / oracle::gauss_pdf(x, law.mean, law.std)) : 0.0;
            };
            double total = 0.0;
            for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
                total += oracle::simpson(f, cuts[k] + 1e-12, cuts[k + 1] - 1e-12, 20000);
            return total;
        };
        const double h = 1e-5;
        const double dmu = (kl_at({pol.mu + h, pol.sigma}) - kl_at({pol.mu - h, pol.sigma})) / (2 * h);
        const double dsd = (kl_at({pol.mu, pol.sigma + h}) - kl_at({pol.mu, pol.sigma - h})) / (2 * h);
        CHECK(std::abs(g[0] - dmu) < 1e-6);
        CHECK(std::abs(g[1] - dsd) < 1e-6);
    }
}

TEST_CASE("telic gradient steps reduce the distance") {
    const NavTask task = default_task();
    GaussianStepPolicy pol{0.0, 1.0};
    double d = telic_distance(pol, task, "S_R");
    const double d0 = d;
    for (int k = 0; k < 30; ++k) {
        const auto step = telic_gradient_step(pol, task, "S_R", 0.01);
        CHECK(step.distance_after <= step.distance_before + 1e-12);
        CHECK(step.distance_before == doctest::Approx(d).epsilon(1e-9));
        pol = step.policy;
        d = step.distance_after;
    }
    CHECK(d < 0.75 * d0);
}

TEST_CASE("control problem coordinates") {
    const NavControlProblem p(default_task());
    const Policy pol{0.1, 0.7};
    const auto back = p.from_free(p.to_free(pol));
    CHECK(back[0] == doctest::Approx(0.1));
    CHECK(back[1] == doctest::Approx(0.7));
    CHECK(p.label(p.classify(pol)) == classify(NavControlProblem::decode(pol), default_task()));
    CHECK(p.starts(NavControlProblem::encode({0.0, 1.0})).size() == 9);
    CHECK(p.complexity(Policy{0.0, 1.0}, Policy{0.0, 1.0}) == 0.0);
    const auto states = p.states();
    CHECK(states.size() == 3);
    CHECK(p.label(states.front().id) == "S_L");
    CHECK(p.label(states.back().id) == "S_R");
}

TEST_CASE("phase grid layout") {
    const NavTask task = default_task();
    const auto g = phase_grid(task, {-0.3, 0.3}, {0.05, 2.0}, 7, 5);
    REQUIRE(g.cells.size() == 35);
    CHECK(g.mu_axis.front() == -0.3);
    CHECK(g.mu_axis.back() == 0.3);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 7; ++j) {
            const auto& c = g.cells[i * 7 + j];
            CHECK(c.mu == g.mu_axis[j]);
            CHECK(c.sigma == g.sigma_axis[i]);
            CHECK(c.label == classify({c.mu, c.sigma}, task));
            CHECK(c.complexity == doctest::Approx(gaussian_step_kl({c.mu, c.sigma}, task.pi0)));
            CHECK(c.within_budget == (c.complexity <= task.delta));
        }
}

TEST_CASE("tradeoff curves are nondecreasing and start at the default policy") {
    const NavTask task = default_task();
    const auto pts = tradeoff_curves(task, task.pi0, 0.5, 10);
    REQUIRE(pts.size() == 22); // both region states, 11 budgets each
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& p = pts[i];
        CHECK(gaussian_step_kl(p.argmax, task.pi0) <= p.budget + 1e-9);
        CHECK(state_score(p.argmax, task, p.state) == doctest::Approx(p.score));
        if (p.budget == 0.0) CHECK(p.score == doctest::Approx(state_score(task.pi0, task, p.state)));
        else CHECK(p.score >= pts[i - 1].score - 1e-12);
    }
}

TEST_CASE("granularity points are bounded by the search cap") {
    const NavTask task = default_task();
    const auto pts = granularity_curves(task, task.pi0, {0.3, 0.1}, 1.0, 10, {"S_R"});
    REQUIRE(pts.size() == 2);
    for (const auto& p : pts) {
        if (p.reachable) CHECK(p.complexity <= 1.0 + 1e-9);
        else CHECK(std::isinf(p.complexity));
    }
}

TEST_CASE("goal-shift scenario on the desk-scale configuration") {
    NavTask task = default_task();
    task.horizon = 1;
    task.epsilon = 0.2;
    task.delta = 3.0;
    ScenarioSettings s;
    s.shifted_center = 5.0;
    const auto rep = run_goal_shift_scenario(task, s);
    for (const auto& st : rep.stages) CHECK_MESSAGE(st.passed, st.name << ": " << st.detail);
    CHECK(rep.final_task.regions.size() == 3);
    const auto& fp = *rep.learned.problem;
    const Policy pi0 = NavControlProblem::encode(task.pi0);
    for (const auto& [id, w] : rep.learned.report.witnesses) {
        CHECK(w.chain.front().policy == pi0);
        for (std::size_t k = 1; k < w.chain.size(); ++k)
            CHECK(gaussian_step_kl(NavControlProblem::decode(w.chain[k].policy),
                                   NavControlProblem::decode(w.chain[k - 1].policy)) <= task.delta + 1e-9);
        CHECK(fp.classify(w.chain.back().policy) == id);
    }
    REQUIRE(rep.learned.splits.size() == 1);
    CHECK(rep.learned.splits[0].intermediate_distance <= task.delta + 1e-6);
}
