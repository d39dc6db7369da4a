#include "telic/controllability.hpp"

#include "telic/error.hpp"
#include "telic/numeric.hpp"
#include "telic/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace telic {

std::vector<Policy> ControlProblem::starts(std::span<const double> base) const { return {to_free(base)}; }

std::string ControlProblem::describe(std::span<const double> policy) const {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < policy.size(); ++i) out << (i ? " " : "") << policy[i];
    out << ']';
    return out.str();
}

StateInfo ControlProblem::info(int state) const {
    for (const auto& s : states())
        if (s.id == state) return s;
    throw PreconditionError("unknown telic state id " + std::to_string(state));
}

std::string ControlProblem::state_name(int state) const { return info(state).name; }

namespace {

struct StartOutcome {
    Policy free;
    double distance = kInf;
    double complexity = 0.0;
    bool converged = true;
};

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

StartOutcome approach_from(const ControlProblem& problem, std::span<const double> base, const Policy& base_free,
                           Policy x, const PolicyCost& cost, double delta, const ApproachSettings& s) {
    auto excess = [&](std::span<const double> free) {
        return std::max(0.0, problem.complexity(problem.from_free(free), base) - delta);
    };
    auto distance = [&](std::span<const double> free) { return cost(problem.from_free(free)); };

    StartOutcome out;
    double rho = s.initial_penalty;
    for (int round = 0; round < s.penalty_rounds; ++round, rho *= 2.0) {
        auto objective = [&](std::span<const double> free) {
            const double e = excess(free);
            return distance(free) + rho * e * e;
        };
        double f = objective(x);
        if (!std::isfinite(f)) break;
        double trial = 1.0;
        for (int it = 0; it < s.inner_iterations; ++it) {
            const auto g = central_gradient(objective, x, s.gradient_step);
            if (!all_finite(g)) {
                out.converged = false;
                break;
            }
            const double gn = norm2(g);
            if (gn < 1e-14) break;
            // Armijo backtracking; the trial length carries over between
            // iterations and may grow again after a success.
            bool moved = false;
            Policy candidate(x.size());
            for (int h = 0; h < 60; ++h) {
                for (std::size_t i = 0; i < x.size(); ++i) candidate[i] = x[i] - trial * g[i];
                const double fc = objective(candidate);
                if (fc <= f - 1e-4 * trial * gn * gn) {
                    const double gain = f - fc;
                    x = candidate;
                    f = fc;
                    moved = true;
                    trial *= 2.0;
                    if (gain < s.improvement_tol) it = s.inner_iterations;
                    break;
                }
                trial *= 0.5;
            }
            if (!moved) break;
        }
        if (f == 0.0) break;
    }

    // Restore feasibility along the segment from the base policy.
    if (excess(x) > 0.0) {
        const Policy far = x;
        auto point = [&](double t) {
            Policy p(far.size());
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = base_free[i] + t * (far[i] - base_free[i]);
            return p;
        };
        const double t = bisect_last_true([&](double u) { return excess(point(u)) == 0.0; }, 0.0, 1.0, 1e-12);
        x = point(t);
    }
    out.free = x;
    out.distance = distance(x);
    out.complexity = problem.complexity(problem.from_free(x), base);
    return out;
}

} // namespace

ApproachResult minimize_within_budget(const ControlProblem& problem, std::span<const double> base,
                                      const PolicyCost& cost, double delta, const std::vector<Policy>& starts,
                                      const ApproachSettings& settings) {
    if (!(delta >= 0.0)) throw PreconditionError("complexity budget must be nonnegative");
    const Policy base_policy(base.begin(), base.end());
    const double d0 = cost(base);
    if (delta == 0.0) return {base_policy, d0, 0.0, true};

    const Policy base_free = problem.to_free(base);
    std::vector<StartOutcome> outcomes(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) {
        outcomes[i] = approach_from(problem, base, base_free, starts[i], cost, delta, settings);
    });

    ApproachResult best{base_policy, d0, 0.0, true};
    for (const auto& o : outcomes) {
        if (o.complexity > delta) continue;
        const bool better = o.distance < best.distance ||
                            (o.distance == best.distance && o.complexity < best.complexity);
        if (better) best = {problem.from_free(o.free), o.distance, o.complexity, o.converged};
    }
    return best;
}

ApproachResult constrained_approach(const ControlProblem& problem, std::span<const double> base, int state,
                                    double delta, const ApproachSettings& settings) {
    if (!(delta >= 0.0)) throw PreconditionError("complexity budget must be nonnegative");
    const double d0 = problem.distance(base, state);
    if (d0 == 0.0 || delta == 0.0) return {Policy(base.begin(), base.end()), d0, 0.0, true};
    return minimize_within_budget(
        problem, base, [&](std::span<const double> p) { return problem.distance(p, state); }, delta,
        problem.starts(base), settings);
}

bool ReachabilityReport::reaches(int state) const {
    return std::find(reachable.begin(), reachable.end(), state) != reachable.end();
}

namespace {

class Search {
public:
    Search(const ControlProblem& problem, double delta, const ApproachSettings& settings)
        : problem_(problem), delta_(delta), settings_(settings), states_(problem.states()) {}

    void seed(std::vector<WitnessStep> chain) {
        const WitnessStep& last = chain.back();
        if (!reached_.contains(last.state)) {
            reached_.insert(last.state);
            witnesses_[last.state] = {last.state, chain};
        }
        visit(chain);
    }

    ReachabilityReport report() const {
        ReachabilityReport out;
        for (const auto& s : states_) (reached_.contains(s.id) ? out.reachable : out.unreachable).push_back(s.id);
        out.witnesses = witnesses_;
        return out;
    }

private:
    int rank_of(int id) const {
        for (const auto& s : states_)
            if (s.id == id) return s.rank;
        return 0;
    }

    void visit(const std::vector<WitnessStep>& chain) {
        const Policy& pi = chain.back().policy;
        const int here = rank_of(chain.back().state);
        struct Candidate {
            int id;
            int rank_gap;
            double distance;
            int rank;
        };
        std::vector<Candidate> order;
        for (const auto& s : states_)
            if (!reached_.contains(s.id))
                order.push_back({s.id, std::abs(s.rank - here), problem_.distance(pi, s.id), s.rank});
        std::sort(order.begin(), order.end(), [](const Candidate& a, const Candidate& b) {
            if (a.rank_gap != b.rank_gap) return a.rank_gap < b.rank_gap;
            if (a.distance != b.distance) return a.distance < b.distance;
            return a.rank < b.rank;
        });
        for (const auto& c : order) {
            if (reached_.contains(c.id)) continue;
            const ApproachResult r = constrained_approach(problem_, pi, c.id, delta_, settings_);
            if (problem_.classify(r.policy) != c.id) continue;
            reached_.insert(c.id);
            auto extended = chain;
            extended.push_back({r.policy, c.id, problem_.complexity(r.policy, pi)});
            witnesses_[c.id] = {c.id, extended};
            visit(extended);
        }
    }

    const ControlProblem& problem_;
    double delta_;
    ApproachSettings settings_;
    std::vector<StateInfo> states_;
    std::set<int> reached_;
    std::map<int, Witness> witnesses_;
};

} // namespace

ReachabilityReport find_reachable_states(const ControlProblem& problem, std::span<const double> pi0, double delta,
                                         const std::vector<Anchor>& anchors, const ApproachSettings& settings) {
    if (!(delta >= 0.0)) throw PreconditionError("complexity budget must be nonnegative");
    Search search(problem, delta, settings);
    const Policy start(pi0.begin(), pi0.end());
    search.seed({{start, problem.classify(start), 0.0}});
    for (const Anchor& anchor : anchors) {
        if (anchor.chain.empty()) throw PreconditionError("anchor chain must start at the default policy");
        std::vector<WitnessStep> chain;
        for (std::size_t i = 0; i < anchor.chain.size(); ++i) {
            const Policy& p = anchor.chain[i];
            chain.push_back({p, problem.classify(p), i == 0 ? 0.0 : problem.complexity(p, anchor.chain[i - 1])});
        }
        search.seed(std::move(chain));
    }
    return search.report();
}

std::vector<std::string> verify_witnesses(const ControlProblem& problem, const ReachabilityReport& report,
                                          std::span<const double> pi0, double delta) {
    std::vector<std::string> violations;
    auto fail = [&](int state, const std::string& what) {
        violations.push_back(problem.state_name(state) + ": " + what);
    };
    for (int state : report.reachable) {
        auto it = report.witnesses.find(state);
        if (it == report.witnesses.end() || it->second.chain.empty()) {
            fail(state, "no witness chain");
            continue;
        }
        const auto& chain = it->second.chain;
        const Policy& first = chain.front().policy;
        bool at_start = first.size() == pi0.size();
        for (std::size_t i = 0; at_start && i < first.size(); ++i) at_start = std::abs(first[i] - pi0[i]) <= 1e-12;
        if (!at_start) fail(state, "chain does not start at the default policy");
        for (std::size_t t = 0; t < chain.size(); ++t) {
            if (problem.classify(chain[t].policy) != chain[t].state)
                fail(state, "step " + std::to_string(t) + " is not in its recorded state");
            if (t > 0) {
                const double c = problem.complexity(chain[t].policy, chain[t - 1].policy);
                if (!(c <= delta + 1e-9))
                    fail(state, "step " + std::to_string(t) + " costs " + std::to_string(c) + " nats");
            }
        }
        if (problem.classify(chain.back().policy) != state) fail(state, "chain does not end in the target state");
    }
    return violations;
}

MixtureResult max_feasible_mixture(const std::function<double(double)>& kl_at, double delta) {
    if (!(delta >= 0.0)) throw PreconditionError("complexity budget must be nonnegative");
    if (kl_at(1.0) <= delta) return {1.0, kl_at(1.0)};
    const double t = bisect_last_true([&](double u) { return kl_at(u) <= delta; }, 0.0, 1.0, 1e-13);
    return {t, kl_at(t)};
}

TabularMixture max_feasible_mixture(const ExperienceDistribution& p_star, const ExperienceDistribution& p0,
                                    double delta) {
    p_star.require_compatible(p0);
    const auto r = max_feasible_mixture([&](double t) { return kl_divergence(mixture(p0, p_star, t), p0); }, delta);
    return {r.t_max, mixture(p0, p_star, r.t_max)};
}

SplitOutcome split_state(const ControlProblem& problem, int state, std::span<const double> pi0, double delta,
                         double epsilon, const std::vector<Anchor>& anchors) {
    const auto report = find_reachable_states(problem, pi0, delta, anchors);
    if (report.reaches(state))
        throw PreconditionError("state " + problem.state_name(state) + " is already reachable");
    const Policy base = anchors.empty() ? Policy(pi0.begin(), pi0.end()) : anchors.back().policy;
    return problem.split(state, base, delta, epsilon);
}

LearnResult learn_controllable_representation(std::shared_ptr<const ControlProblem> problem,
                                              std::span<const double> pi0, double delta, double epsilon,
                                              const LearnSettings& settings, std::vector<Anchor> anchors) {
    if (settings.max_rounds < 1) throw PreconditionError("max_rounds must be at least 1");
    LearnResult out;
    const Policy start(pi0.begin(), pi0.end());
    for (;;) {
        out.report = find_reachable_states(*problem, start, delta, anchors, settings.approach);
        ++out.rounds;
        if (out.report.complete()) {
            out.controllable = true;
            break;
        }
        if (out.rounds >= settings.max_rounds) break;

        const Policy base = anchors.empty() ? start : anchors.back().policy;
        bool progressed = false;
        for (int target : out.report.unreachable) {
            SplitOutcome outcome = problem->split(target, base, delta, epsilon);
            if (!outcome.ok()) {
                out.split_failures.push_back(problem->state_name(target) + ": " + outcome.failure);
                continue;
            }
            problem = outcome.problem;
            const SplitRecord& rec = outcome.record;
            out.splits.push_back(rec);
            if (settings.reanchor && !rec.intermediate_policy.empty() &&
                problem->classify(rec.intermediate_policy) == rec.intermediate &&
                problem->complexity(rec.intermediate_policy, base) <= delta + 1e-9) {
                Anchor next{rec.intermediate_policy, anchors.empty() ? std::vector<Policy>{start} : anchors.back().chain};
                next.chain.push_back(rec.intermediate_policy);
                anchors.push_back(std::move(next));
            }
            progressed = true;
            break;
        }
        if (!progressed) break;
    }
    out.problem = problem;
    out.anchors = anchors;
    out.violations = verify_witnesses(*problem, out.report, start, delta);
    return out;
}

TabularControlProblem::TabularControlProblem(std::shared_ptr<const ParametricFamily> family, TelicRepresentation repr)
    : family_(std::move(family)), repr_(std::move(repr)) {
    check_partition(repr_);
    indicator_ = repr_.goal.feature.indicator(family_->space(), family_->horizon());
}

std::vector<StateInfo> TabularControlProblem::states() const {
    std::vector<StateInfo> out;
    for (const auto& s : repr_.states) out.push_back({s.id, s.name, s.rank});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
    return out;
}

int TabularControlProblem::classify(std::span<const double> policy) const {
    return repr_.state_for(expected_statistic(family_->distribution(policy), indicator_)).id;
}

double TabularControlProblem::distance(std::span<const double> policy, int state) const {
    const TelicState& s = repr_.state(state);
    try {
        return project_onto_interval(family_->distribution(policy), {indicator_, s.lower, s.upper, s.upper_closed}).rate;
    } catch (const InfeasibleError&) {
        return kInf;
    }
}

double TabularControlProblem::complexity(std::span<const double> policy, std::span<const double> base) const {
    return family_->complexity(policy, base);
}

Policy TabularControlProblem::to_free(std::span<const double> policy) const {
    Policy out(policy.begin(), policy.end());
    if (family_->family() == PolicyFamily::bernoulli_bandit)
        for (double& v : out) v = std::log(v / (1.0 - v));
    return out;
}

Policy TabularControlProblem::from_free(std::span<const double> free) const {
    Policy out(free.begin(), free.end());
    if (family_->family() == PolicyFamily::bernoulli_bandit)
        for (double& v : out) v = 1.0 / (1.0 + std::exp(-v));
    return family_->clamp(std::move(out));
}

std::vector<Policy> TabularControlProblem::starts(std::span<const double> base) const {
    std::vector<Policy> out{to_free(base)};
    for (std::size_t i = 0; i < base.size(); ++i)
        for (double shift : {-1.0, 1.0}) {
            Policy p = to_free(base);
            p[i] += shift;
            out.push_back(std::move(p));
        }
    return out;
}

SplitOutcome TabularControlProblem::split(int state, std::span<const double> base, double delta,
                                          double epsilon) const {
    SplitOutcome out;
    out.record.original = state;
    if (!(epsilon > 0.0 && epsilon <= 1.0)) {
        out.failure = "split sensitivity must lie in (0, 1]";
        return out;
    }
    const TelicState& target = repr_.state(state);
    const auto p0 = family_->distribution(base);
    const double m0 = expected_statistic(p0, indicator_);
    std::optional<ProjectionResult> projection;
    try {
        projection.emplace(project_onto_interval(p0, {indicator_, target.lower, target.upper, target.upper_closed}));
    } catch (const InfeasibleError& e) {
        out.failure = e.what();
        return out;
    }
    const TabularMixture mix = max_feasible_mixture(projection->projected, p0, delta);
    const double m_m = expected_statistic(mix.p_m, indicator_);
    out.record.t_max = mix.t_max;
    out.record.p_m_divergence = kl_divergence(mix.p_m, p0);
    std::ostringstream summary;
    summary.precision(9);
    summary << "feature_mass=" << m_m;
    out.record.p_m_summary = summary.str();

    const TelicState& host = repr_.state_for(m_m);
    if (host.id == state) {
        out.failure = "budget-feasible mixture already lies in the target state";
        return out;
    }
    const bool up = target.lower >= host.upper;
    out.record.direction = up ? "up" : "down";
    const double k = std::floor(m_m / epsilon + 1e-12);
    TelicState carved = host;
    TelicState rest = host;
    carved.id = repr_.next_id();
    carved.name = "M" + std::to_string(carved.id);
    if (up) {
        const double cut = std::max(host.lower, k * epsilon);
        carved.lower = cut;
        rest.upper = cut;
        rest.upper_closed = false;
    } else {
        const double cut = std::min(host.upper, (k + 1.0) * epsilon);
        carved.upper = cut;
        carved.upper_closed = cut == host.upper && host.upper_closed;
        rest.lower = cut;
    }
    if (!(carved.lower < carved.upper) || !(rest.lower < rest.upper)) {
        out.failure = "intermediate state would swallow its host state";
        return out;
    }
    if (carved.contains(m0)) {
        out.failure = "intermediate state would contain the default policy";
        return out;
    }

    TelicRepresentation next = repr_;
    for (auto& s : next.states)
        if (s.id == host.id) s = rest;
    next.states.push_back(carved);
    std::sort(next.states.begin(), next.states.end(), [](const auto& a, const auto& b) { return a.lower < b.lower; });
    const int count = static_cast<int>(next.states.size());
    for (int i = 0; i < count; ++i)
        next.states[i].rank = next.goal.direction == Direction::higher_preferred ? i : count - 1 - i;

    auto problem = std::make_shared<TabularControlProblem>(family_, std::move(next));
    out.record.intermediate = carved.id;
    out.record.intermediate_distance = problem->distance(base, carved.id);
    out.record.intermediate_policy = constrained_approach(*problem, base, carved.id, delta).policy;
    out.problem = std::move(problem);
    return out;
}

std::string TabularControlProblem::describe(std::span<const double> policy) const {
    std::ostringstream out;
    out.precision(9);
    out << "theta=" << ControlProblem::describe(policy)
        << " mass=" << expected_statistic(family_->distribution(policy), indicator_);
    return out.str();
}

} // namespace telic
