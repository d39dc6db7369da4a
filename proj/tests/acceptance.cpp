// Acceptance checks. Run with a criterion number to execute one check, or
// without arguments to execute all of them. Each check prints one line:
//   PASS|FAIL <id> <name>: <detail> [<seconds> s]

#include "oracles.hpp"

#include "telic/bandit.hpp"
#include "telic/cli.hpp"
#include "telic/controllability.hpp"
#include "telic/error.hpp"
#include "telic/nav.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <unistd.h>

using namespace telic;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::vector<double> vec(const ExperienceDistribution& p) { return {p.masses().begin(), p.masses().end()}; }

// Bandit sequences enumerated directly: per sequence its probability under
// theta, its win count and its left-pull count.
struct BanditTable {
    std::vector<double> prob, wins, lefts;
};

BanditTable enumerate_bandit(double theta, double pl, double pr, int n) {
    BanditTable t{{1.0}, {0.0}, {0.0}};
    for (int step = 0; step < n; ++step) {
        BanditTable next;
        for (std::size_t i = 0; i < t.prob.size(); ++i)
            for (int arm = 0; arm < 2; ++arm)
                for (int win = 0; win < 2; ++win) {
                    const double pa = arm == 0 ? theta : 1.0 - theta;
                    const double pw = arm == 0 ? pl : pr;
                    next.prob.push_back(t.prob[i] * pa * (win ? pw : 1.0 - pw));
                    next.wins.push_back(t.wins[i] + win);
                    next.lefts.push_back(t.lefts[i] + (arm == 0));
                }
        t = std::move(next);
    }
    return t;
}

// Fixed point theta = E*[N_L] / N where P* is the tilt of P_theta with
// E[wins] = j.
double matching_theta_oracle(double pl, double pr, int n, double j) {
    auto g = [&](double theta) {
        const auto t = enumerate_bandit(theta, pl, pr, n);
        const auto star = oracle::tilt_to_mean(t.prob, t.wins, j);
        return theta - oracle::mean(star, t.lefts) / n;
    };
    double lo = 1e-9, hi = 1.0 - 1e-9;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Outcome bandit_probability_matching() {
    const bandit::Params prm{0.8, 0.4, 4};
    const auto run = bandit::run_learning(prm, 2.8, 0.0, 0.05, 500, 0.5);
    if (!run.failure.empty()) return {false, "learning failed: " + run.failure};
    const double oracle_theta = matching_theta_oracle(0.8, 0.4, 4, 2.8);
    const double err = std::abs(run.theta_final - oracle_theta);
    const bool frozen_ok = std::abs(oracle_theta - 0.75) < 1e-6;
    return {err < 1e-3 && frozen_ok && run.converged,
            "theta_final=" + fmt("%.9f", run.theta_final) + " oracle theta*=" + fmt("%.9f", oracle_theta) +
                " |err|=" + fmt("%.3g", err) + " (tol 1e-3); iterations=" + std::to_string(run.trace.size() - 1)};
}

Outcome gradient_equivalence() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    std::uniform_int_distribution<std::size_t> horizon(1, 6);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const bandit::Params prm{u(rng), u(rng), horizon(rng)};
        const double theta = u(rng);
        const auto target = bandit::wins_target(prm, u(rng) * prm.horizon, 0.0);
        const auto star = project_onto_interval(bandit::distribution(u(rng), prm), target).projected;
        auto f = [&](double t) { return kl_divergence(star, bandit::distribution(t, prm)); };
        const double h = 1e-3;
        const double fd = (-f(theta + 2 * h) + 8 * f(theta + h) - 8 * f(theta - h) + f(theta - 2 * h)) / (12 * h);
        const double g = bandit::telic_gradient(theta, star);
        worst = std::max(worst, std::abs(g - fd) / std::max(std::abs(fd), 1e-6));
    }
    return {worst < 1e-5, "200 configurations, max relative error " + fmt("%.3g", worst) + " (tol 1e-5)"};
}

Outcome projection_optimality() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.05, 0.95), unit(0.0, 1.0);
    int trials = 0, beaten = 0, oracle_checks = 0;
    double worst_tv = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        for (int trial = 0; trial < 5; ++trial) {
            const bandit::Params prm{u(rng), u(rng), n};
            const auto p = bandit::distribution(u(rng), prm);
            const double width = 0.1 * n;
            const double lo = unit(rng) * (n - width);
            const StatisticTarget target{bandit::win_counts(n), lo, lo + width, true};
            const auto proj = project_onto_interval(p, target);
            const auto pv = vec(p);
            const auto anchor = oracle::tilt_to_mean(pv, target.values, lo + 0.5 * width);
            ++trials;
            bool ok = true;
            for (int k = 0; k < 1000; ++k) {
                auto q = oracle::random_simplex(rng, pv.size());
                const double m = oracle::mean(q, target.values);
                if (m < lo || m > lo + width) {
                    const double edge = m < lo ? lo : lo + width;
                    const double ma = oracle::mean(anchor, target.values);
                    double t = (edge - m) / (ma - m);
                    t += (1.0 - t) * unit(rng) * 0.5;
                    for (std::size_t i = 0; i < q.size(); ++i) q[i] = (1.0 - t) * q[i] + t * anchor[i];
                }
                if (oracle::kl(q, pv) < proj.rate - 1e-8) ok = false;
            }
            beaten += !ok;
            if (n <= 2) {
                const auto ref = oracle::primal_projection(pv, target.values, target.lower, target.upper);
                worst_tv = std::max(worst_tv, oracle::tv(ref, vec(proj.projected)));
                ++oracle_checks;
            }
        }
    }
    return {beaten == 0 && worst_tv < 1e-4,
            std::to_string(trials) + " trials x 1000 in-state samples, " + std::to_string(beaten) +
                " trials beaten; brute-force agreement on " + std::to_string(oracle_checks) + " cases, max TV " +
                fmt("%.3g", worst_tv) + " (tol 1e-4)"};
}

Outcome navigation_closed_forms() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> mu(-0.15, 0.15), sd(0.3, 1.5), center(-3.0, 3.0), radius(0.3, 1.5);
    std::uniform_int_distribution<std::size_t> horizon(1, 30);
    const int n = 100000;
    int outside = 0;
    double worst_z = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const nav::GaussianStepPolicy pol{mu(rng), sd(rng)};
        const nav::Region region{"X", center(rng), radius(rng)};
        const std::size_t T = horizon(rng);
        std::normal_distribution<double> step(pol.mu, pol.sigma);
        int hits = 0;
        for (int w = 0; w < n; ++w) {
            double x = 0.0;
            for (std::size_t s = 0; s < T; ++s) x += step(rng);
            hits += x >= region.lower() && x <= region.upper();
        }
        const double p = nav::region_probability(pol, T, region);
        const double se = std::sqrt(p * (1.0 - p) / n);
        const double z = std::abs(static_cast<double>(hits) / n - p) / std::max(se, 1e-300);
        worst_z = std::max(worst_z, z);
        outside += z > 3.0;
    }
    double worst_kl = 0.0;
    std::uniform_real_distribution<double> m2(-2.0, 2.0), s2(0.2, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const nav::GaussianStepPolicy a{m2(rng), s2(rng)}, b{m2(rng), s2(rng)};
        worst_kl = std::max(worst_kl,
                            std::abs(nav::gaussian_step_kl(a, b) - oracle::gauss_kl_quadrature(a.mu, a.sigma, b.mu, b.sigma)));
    }
    return {outside == 0 && worst_kl < 1e-8,
            "20 triples at 1e5 walks: " + std::to_string(outside) + " outside 3 sigma (max " + fmt("%.2f", worst_z) +
                " sigma); 50 KL pairs max |closed - quadrature| " + fmt("%.3g", worst_kl) + " (tol 1e-8)"};
}

Outcome complexity_geometry() {
    const double m = nav::gaussian_step_kl({1.37, 1.15}, {0.0, 1.0});
    const double one = nav::gaussian_step_kl({1.09, 1.24}, {0.0, 1.0});
    return {m >= 0.90 && m <= 1.00 && one < 1.0,
            "KL((1.37,1.15)||(0,1))=" + fmt("%.6f", m) + " nats (want [0.90, 1.00]); KL((1.09,1.24)||(0,1))=" +
                fmt("%.6f", one) + " nats (want < 1)"};
}

// Witness chains re-checked with the closed-form classifier and step divergence.
std::string verify_chains(const nav::ScenarioReport& rep, std::size_t max_chain) {
    const auto& task = rep.final_task;
    const auto& problem = dynamic_cast<const nav::NavControlProblem&>(*rep.learned.problem);
    std::ostringstream issues;
    for (const auto& s : problem.states()) {
        const auto it = rep.learned.report.witnesses.find(s.id);
        if (it == rep.learned.report.witnesses.end()) {
            issues << s.name << " has no witness; ";
            continue;
        }
        const auto& chain = it->second.chain;
        const auto first = nav::NavControlProblem::decode(chain.front().policy);
        if (first.mu != task.pi0.mu || first.sigma != task.pi0.sigma) issues << s.name << " does not start at pi0; ";
        for (std::size_t k = 0; k < chain.size(); ++k) {
            const auto pol = nav::NavControlProblem::decode(chain[k].policy);
            if (nav::classify(pol, task) != problem.label(chain[k].state)) issues << s.name << " step " << k << " label; ";
            if (k > 0 &&
                nav::gaussian_step_kl(pol, nav::NavControlProblem::decode(chain[k - 1].policy)) > task.delta + 1e-9)
                issues << s.name << " step " << k << " exceeds delta; ";
        }
        if (nav::classify(nav::NavControlProblem::decode(chain.back().policy), task) != s.name)
            issues << s.name << " chain ends elsewhere; ";
        if (chain.size() - 1 > max_chain) issues << s.name << " chain has " << chain.size() - 1 << " updates; ";
    }
    return issues.str();
}

Outcome goal_shift_scenario() {
    const nav::NavTask base = nav::default_task();
    nav::ScenarioSettings settings;
    settings.shifted_center = 2.5;
    const auto rep = nav::run_goal_shift_scenario(base, settings);
    const bool a = rep.stages[0].passed;
    const bool b = rep.stages[2].passed;
    const bool inserted = rep.learned.splits.size() == 1 && rep.final_task.regions.size() == 3;
    const std::string issues = verify_chains(rep, 2);
    const bool c = inserted && issues.empty() && rep.learned.controllable;
    std::string detail = std::string("(a) base controllable: ") + (a ? "yes" : "no") + "; (b) S_R unreachable after shift: " +
                         (b ? "yes" : "no (" + rep.stages[2].detail + ")") + "; (c) one split and verified chains <= 2: " +
                         (c ? "yes" : "no (" + std::to_string(rep.learned.splits.size()) + " splits" +
                                          (issues.empty() ? "" : "; " + issues) + ")");
    const nav::NavControlProblem p(rep.shifted);
    const auto target = rep.shifted_reachability.witnesses.find(p.state_id("S_R"));
    if (!b && target != rep.shifted_reachability.witnesses.end()) {
        detail += "; S_R witness:";
        for (const auto& step : target->second.chain)
            detail += " " + p.describe(step.policy) + "[" + fmt("%.3g", step.complexity) + "]";
    }
    return {a && b && c, detail};
}

bool nondecreasing(const std::vector<double>& v, double slack) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[i - 1] - slack) return false;
    return true;
}

nav::NavTask random_task(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> c(1.5, 3.0), r(0.6, 1.2);
    std::uniform_int_distribution<std::size_t> T(5, 30);
    nav::NavTask t = nav::default_task();
    t.horizon = T(rng);
    t.regions[0].center = c(rng);
    t.regions[0].radius = r(rng);
    t.regions[1].center = -c(rng);
    t.regions[1].radius = r(rng);
    return t;
}

Outcome monotonicity_suites() {
    std::mt19937_64 rng(31);
    int trade_bad = 0, trade_n = 0, gran_bad = 0, gran_n = 0, mix_bad = 0, mix_n = 0;
    std::string gran_example;
    const std::vector<double> eps{0.5, 0.3, 0.2, 0.1, 0.05, 0.02};
    for (int k = 0; k < 10; ++k) {
        const nav::NavTask task = random_task(rng);
        const auto trade = nav::tradeoff_curves(task, task.pi0, 1.0, 10);
        std::map<std::string, std::vector<double>> curves;
        for (const auto& p : trade) curves[p.state].push_back(p.score);
        for (const auto& [s, v] : curves) {
            ++trade_n;
            trade_bad += !nondecreasing(v, 1e-12);
        }
        const auto gran = nav::granularity_curves(task, task.pi0, eps, 2.0, 10);
        std::map<std::string, std::vector<double>> gc;
        for (const auto& p : gran) gc[p.state].push_back(p.complexity);
        for (const auto& [s, v] : gc) {
            ++gran_n;
            if (!nondecreasing(v, 1e-9)) {
                ++gran_bad;
                if (gran_example.empty()) {
                    gran_example = s + " T=" + std::to_string(task.horizon) + ":";
                    for (std::size_t i = 0; i < v.size(); ++i) gran_example += " " + fmt("%.3g", v[i]);
                }
            }
        }
    }
    for (int k = 0; k < 15; ++k) {
        const nav::NavTask task = random_task(rng);
        for (const std::string label : {"S_R", "S_L"}) {
            const auto proj = nav::project_onto_state(task.pi0, task, label);
            if (!proj.feasible || proj.rate == 0.0) continue;
            std::vector<double> v;
            for (int i = 0; i <= 50; ++i) v.push_back(nav::mixture_kl_quadrature(proj.projected, i / 50.0));
            ++mix_n;
            mix_bad += !nondecreasing(v, 1e-9);
        }
    }
    const bool pass = trade_bad == 0 && gran_bad == 0 && mix_bad == 0 && trade_n >= 20 && gran_n >= 20 && mix_n >= 20;
    std::string detail = "tradeoff " + std::to_string(trade_n - trade_bad) + "/" + std::to_string(trade_n) +
                         " nondecreasing; granularity " + std::to_string(gran_n - gran_bad) + "/" +
                         std::to_string(gran_n) + " nondecreasing in -log eps; mixture-KL " +
                         std::to_string(mix_n - mix_bad) + "/" + std::to_string(mix_n) + " nondecreasing";
    if (!gran_example.empty()) detail += "; e.g. complexity at eps 0.5..0.02 for " + gran_example;
    return {pass, detail};
}

Outcome partition_axioms() {
    std::mt19937_64 rng(5);
    const std::size_t n = 3;
    const auto& space = bandit::space();
    int bad = 0;
    long pairs = 0;
    for (double eps : {1.0, 0.5, 0.1, 0.01}) {
        const Goal g{observation_count_at_least(bandit::kWin, 2), eps};
        const auto repr = bin_partition(g);
        try {
            check_partition(repr);
        } catch (const Error&) {
            ++bad;
        }
        std::vector<std::pair<double, int>> assigned;
        for (int i = 0; i < 1000; ++i) {
            auto q = oracle::random_simplex(rng, space.checked_count(n));
            for (auto& x : q) x = x * x * x;
            const double z = std::accumulate(q.begin(), q.end(), 0.0);
            for (auto& x : q) x /= z;
            const ExperienceDistribution p(space, n, q);
            const double m = feature_mass(p, g.feature);
            int hits = 0;
            for (const auto& s : repr.states) hits += s.contains(m);
            if (hits != 1 || !assign_state(p, repr).contains(m)) ++bad;
            assigned.emplace_back(m, assign_state(p, repr).id);
        }
        for (const auto& [ma, ia] : assigned)
            for (const auto& [mb, ib] : assigned)
                if (ia == ib) {
                    ++pairs;
                    bad += prefers_masses(g, ma, mb) != Preference::equivalent;
                }
    }
    return {bad == 0, "4 granularities x 1000 distributions; " + std::to_string(pairs) +
                          " same-bin pairs checked; " + std::to_string(bad) + " violations"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const fs::path configs = fs::path(TELIC_SOURCE_DIR) / "configs";
    const fs::path root = fs::temp_directory_path() / ("telic-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(root);
    int files = 0, differing = 0, failed_runs = 0;
    std::string first_diff;
    std::vector<fs::path> cfgs;
    for (const auto& e : fs::directory_iterator(configs))
        if (e.path().extension() == ".json") cfgs.push_back(e.path());
    std::sort(cfgs.begin(), cfgs.end());
    for (const auto& cfg : cfgs) {
        const std::string stem = cfg.stem().string();
        const fs::path a = root / (stem + "-a"), b = root / (stem + "-b");
        const std::string base = std::string(TELIC_EXE) + " run --config " + cfg.string() + " --out ";
        failed_runs += std::system(("TELIC_THREADS=1 " + base + a.string() + " >/dev/null 2>&1").c_str()) != 0;
        failed_runs += std::system(("TELIC_THREADS=3 " + base + b.string() + " >/dev/null 2>&1").c_str()) != 0;
        if (!fs::exists(a) || !fs::exists(b)) continue;
        for (const auto& e : fs::directory_iterator(a)) {
            if (e.path().extension() != ".csv") continue;
            ++files;
            if (slurp(e.path()) != slurp(b / e.path().filename())) {
                ++differing;
                if (first_diff.empty()) first_diff = stem + "/" + e.path().filename().string();
            }
        }
    }
    fs::remove_all(root);
    return {failed_runs == 0 && differing == 0 && files > 0,
            std::to_string(cfgs.size()) + " configs run twice (1 and 3 threads), " + std::to_string(files) +
                " CSVs compared, " + std::to_string(differing) + " differ" +
                (first_diff.empty() ? "" : " (first: " + first_diff + ")") + ", " + std::to_string(failed_runs) +
                " failed runs"};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
    double limit_seconds; // 0: no runtime requirement
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        {1, "bandit probability matching", bandit_probability_matching, 5.0},
        {2, "gradient equivalence", gradient_equivalence, 10.0},
        {3, "projection optimality", projection_optimality, 0.0},
        {4, "navigation closed forms", navigation_closed_forms, 0.0},
        {5, "complexity geometry", complexity_geometry, 0.0},
        {6, "goal-shift scenario", goal_shift_scenario, 60.0},
        {7, "monotonicity suites", monotonicity_suites, 0.0},
        {8, "partition axioms", partition_axioms, 0.0},
        {9, "determinism", determinism, 0.0}};
    return all;
}

bool run(const Criterion& c) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = c.check();
    } catch (const std::exception& e) {
        out = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt("%.2f s", secs);
    if (c.limit_seconds > 0.0) {
        timing += fmt(", limit %.0f s", c.limit_seconds);
        if (secs > c.limit_seconds) out.pass = false;
    }
    std::printf("%s %d %s: %s [%s]\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(), timing.c_str());
    std::fflush(stdout);
    return out.pass;
}

} // namespace

int main(int argc, char** argv) {
    bool ok = true;
    if (argc > 1) {
        const int id = std::atoi(argv[1]);
        for (const auto& c : criteria())
            if (c.id == id) return run(c) ? 0 : 1;
        std::fprintf(stderr, "unknown criterion %s\n", argv[1]);
        return 2;
    }
    for (const auto& c : criteria()) ok = run(c) && ok;
    return ok ? 0 : 1;
}
