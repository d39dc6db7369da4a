#include "telic/cli.hpp"

#include "telic/controllability.hpp"
#include "telic/error.hpp"

#include <cmath>
#include <sstream>

namespace telic::cli {

namespace {

using csv::Table;

std::string policy_text(std::span<const double> p) {
    std::string out;
    for (double v : p) out += (out.empty() ? "" : " ") + csv::format(v);
    return out;
}

BenchResult bandit_bench(const BanditBench& b) {
    const bandit::Run run =
        bandit::run_learning(b.params, b.target_wins, b.tolerance, b.eta, b.iterations, b.theta0, b.mode);
    if (!run.failure.empty()) throw NumericalError("bandit learning failed: " + run.failure);

    Table trace({"iter", "theta", "distance_nats", "grad"});
    for (const auto& r : run.trace) trace.row(r.iteration, r.theta, r.distance, r.gradient);

    Table summary({"horizon", "p_left", "p_right", "target_wins", "eta", "iterations", "theta0", "theta_star",
                   "theta_final", "abs_err", "theta_star_root", "distance_final", "converged"});
    summary.row(b.params.horizon, b.params.p_left, b.params.p_right, b.target_wins, b.eta, b.iterations, b.theta0,
                run.theta_star, run.theta_final, std::abs(run.theta_final - run.theta_star), run.theta_star_root,
                run.distance_final, run.converged);

    BenchResult out;
    out.artifacts = {{"bandit_trace.csv", trace.str()}, {"bandit_summary.csv", summary.str()}};
    if (!run.converged) out.warnings.push_back("bandit learning did not converge within the iteration budget");
    return out;
}

std::string phase_csv(const nav::PhaseGrid& g) {
    Table t({"mu", "sigma", "delta_p", "label", "complexity_nats"});
    for (const auto& c : g.cells) t.row(c.mu, c.sigma, c.delta_p, c.label, c.complexity);
    return t.str();
}

nav::PhaseGrid grid_for(const nav::NavTask& task, const GridSpec& g) {
    return nav::phase_grid(task, g.mu_range, g.sigma_range, g.mu_resolution, g.sigma_resolution);
}

BenchResult phase_bench(const NavPhaseBench& b, std::uint64_t seed) {
    GridSpec wide = b.grid;
    wide.mu_range = b.wide_mu_range;

    Table traj({"policy_mu", "policy_sigma", "walk", "step", "position", "terminal_region"});
    for (std::size_t i = 0; i < b.trajectory_policies.size(); ++i) {
        const auto& pol = b.trajectory_policies[i];
        const nav::Trajectories t = nav::simulate_trajectories(pol, b.task, b.trajectory_count, seed + i);
        for (std::size_t w = 0; w < t.count; ++w)
            for (std::size_t s = 0; s <= t.horizon; ++s) traj.row(pol.mu, pol.sigma, w, s, t.at(w, s), t.labels[w]);
    }

    BenchResult out;
    out.artifacts = {{"phase_grid.csv", phase_csv(grid_for(b.task, b.grid))},
                     {"phase_grid_wide.csv", phase_csv(grid_for(b.task, wide))},
                     {"trajectories.csv", traj.str()}};
    return out;
}

/// reachability.csv, splits.csv and witnesses.csv for a learned problem.
void control_tables(const ControlProblem& problem, const ReachabilityReport& report,
                    const std::vector<SplitRecord>& splits, std::span<const double> pi0, BenchResult& out) {
    Table reach({"state_id", "state", "reachable", "chain_length", "terminal_complexity_nats"});
    for (const auto& s : problem.states()) {
        const auto w = report.witnesses.find(s.id);
        if (w == report.witnesses.end()) {
            reach.row(s.id, s.name, false, -1, std::nan(""));
        } else {
            const double c = problem.complexity(w->second.chain.back().policy, pi0);
            reach.row(s.id, s.name, true, w->second.updates(), c);
        }
    }

    Table split({"round", "original_state", "intermediate_state", "t_max", "p_m_summary", "direction"});
    for (std::size_t i = 0; i < splits.size(); ++i) {
        const auto& r = splits[i];
        split.row(i + 1, problem.state_name(r.original), problem.state_name(r.intermediate), r.t_max, r.p_m_summary,
                  r.direction);
    }

    Table wit({"state", "step", "parameters", "label", "step_complexity_nats"});
    for (const auto& [id, w] : report.witnesses)
        for (std::size_t k = 0; k < w.chain.size(); ++k)
            wit.row(problem.state_name(id), k, policy_text(w.chain[k].policy), problem.state_name(w.chain[k].state),
                    w.chain[k].complexity);

    out.artifacts.push_back({"reachability.csv", reach.str()});
    out.artifacts.push_back({"splits.csv", split.str()});
    out.artifacts.push_back({"witnesses.csv", wit.str()});
}

BenchResult scenario_bench(const NavScenarioBench& b) {
    const nav::ScenarioReport rep = nav::run_goal_shift_scenario(b.task, b.settings);
    BenchResult out;

    Table stages({"stage", "name", "passed", "detail"});
    for (const auto& s : rep.stages) stages.row(s.stage, s.name, s.passed, s.detail);
    out.artifacts.push_back({"scenario_report.csv", stages.str()});

    control_tables(*rep.learned.problem, rep.learned.report, rep.learned.splits,
                   nav::NavControlProblem::encode(b.task.pi0), out);

    out.artifacts.push_back({"phase_grid_base.csv", phase_csv(grid_for(rep.base, b.grid))});
    out.artifacts.push_back({"phase_grid_shifted.csv", phase_csv(grid_for(rep.shifted, b.grid))});
    out.artifacts.push_back({"phase_grid_final.csv", phase_csv(grid_for(rep.final_task, b.grid))});

    Table regions({"task", "region", "center", "radius", "lower", "upper"});
    const std::pair<const char*, const nav::NavTask*> tasks[] = {
        {"base", &rep.base}, {"shifted", &rep.shifted}, {"final", &rep.final_task}};
    for (const auto& [name, task] : tasks)
        for (const auto& r : task->regions) regions.row(name, r.name, r.center, r.radius, r.lower(), r.upper());
    out.artifacts.push_back({"regions.csv", regions.str()});

    if (!rep.passed) {
        out.status = "scenario_failed";
        for (const auto& s : rep.stages)
            if (!s.passed) out.warnings.push_back("stage " + std::to_string(s.stage) + " (" + s.name + ") failed: " + s.detail);
    }
    return out;
}

BenchResult curves_bench(const NavCurvesBench& b) {
    Table trade({"state", "budget_nats", "score", "mu", "sigma", "optimizer_ok"});
    for (const auto& p : nav::tradeoff_curves(b.task, b.pol0, b.delta_max, b.steps, b.states))
        trade.row(p.state, p.budget, p.score, p.argmax.mu, p.argmax.sigma, p.ok);

    Table gran({"state", "epsilon", "complexity_nats", "reachable"});
    for (const auto& p :
         nav::granularity_curves(b.task, b.pol0, b.epsilons, b.granularity_delta_max, b.granularity_steps, b.states))
        gran.row(p.state, p.epsilon, p.complexity, p.reachable);

    BenchResult out;
    out.artifacts = {{"tradeoff_curves.csv", trade.str()}, {"granularity_curves.csv", gran.str()}};
    return out;
}

BenchResult toy_bench(const ToyBench& b) {
    auto family = std::make_shared<bandit::BernoulliFamily>(b.params);
    Goal goal{make_feature(b.feature, b.feature_numeric, b.feature_symbols, bandit::space()), b.bin_width,
              b.direction};
    auto problem = std::make_shared<TabularControlProblem>(family, bin_partition(goal));
    const Policy pi0{b.theta0};

    LearnSettings settings;
    settings.max_rounds = b.max_rounds;
    settings.reanchor = b.reanchor;
    const LearnResult learned = learn_controllable_representation(problem, pi0, b.delta, b.split_epsilon, settings);

    BenchResult out;
    control_tables(*learned.problem, learned.report, learned.splits, pi0, out);

    const auto& final_problem = dynamic_cast<const TabularControlProblem&>(*learned.problem);
    Table states({"id", "name", "lower", "upper", "upper_closed", "rank"});
    for (const auto& s : final_problem.representation().states)
        states.row(s.id, s.name, s.lower, s.upper, s.upper_closed, s.rank);
    out.artifacts.push_back({"states.csv", states.str()});

    if (!learned.controllable) {
        out.status = "not_controllable";
        for (const auto& f : learned.split_failures) out.warnings.push_back("split failed: " + f);
        if (learned.split_failures.empty()) out.warnings.push_back("representation not controllable");
    }
    for (const auto& v : learned.violations) out.warnings.push_back("witness violation: " + v);
    return out;
}

} // namespace

BenchResult run_bench(const RunConfig& config) {
    return std::visit(
        [&](const auto& b) -> BenchResult {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, BanditBench>) return bandit_bench(b);
            else if constexpr (std::is_same_v<T, NavPhaseBench>) return phase_bench(b, config.seed);
            else if constexpr (std::is_same_v<T, NavScenarioBench>) return scenario_bench(b);
            else if constexpr (std::is_same_v<T, NavCurvesBench>) return curves_bench(b);
            else return toy_bench(b);
        },
        config.params);
}

} // namespace telic::cli
