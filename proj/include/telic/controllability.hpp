#pragma once
// Telic controllability: budgeted policy updates, reachable-state search and
// representation learning by state splitting.
//
// Policies are plain parameter vectors interpreted by a ControlProblem. All
// complexities are per-step KL divergences in nats.

#include "telic/experience.hpp"
#include "telic/goal.hpp"
#include "telic/learning.hpp"

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace telic {

using Policy = std::vector<double>;

struct StateInfo {
    int id = 0;
    std::string name;
    int rank = 0;
};

struct SplitRecord {
    int original = 0;
    int intermediate = -1;
    double t_max = 0.0;
    std::string p_m_summary;
    std::string direction;
    double p_m_divergence = 0.0; // KL(P_M || P_pi0)
    double intermediate_distance = 0.0; // telic distance from P_pi0 to S_M
    Policy intermediate_policy;
};

class ControlProblem;

struct SplitOutcome {
    std::shared_ptr<const ControlProblem> problem;
    SplitRecord record;
    std::string failure;

    bool ok() const noexcept { return failure.empty(); }
};

/// A policy family together with a telic representation over its experience
/// laws.
class ControlProblem {
public:
    virtual ~ControlProblem() = default;

    virtual std::size_t dimension() const = 0;

    /// States ordered by increasing rank.
    virtual std::vector<StateInfo> states() const = 0;

    virtual int classify(std::span<const double> policy) const = 0;

    /// Telic distance from the policy's experience law to the state; +inf when
    /// the state cannot be reached within its support.
    virtual double distance(std::span<const double> policy, int state) const = 0;

    virtual double complexity(std::span<const double> policy, std::span<const double> base) const = 0;

    /// Unconstrained coordinates used by the optimizer.
    virtual Policy to_free(std::span<const double> policy) const = 0;
    virtual Policy from_free(std::span<const double> free) const = 0;

    /// Optimizer starting points, in free coordinates, for an update from base.
    virtual std::vector<Policy> starts(std::span<const double> base) const;

    /// Inserts an intermediate state between the base policy's state and
    /// `state`, which is assumed unreachable.
    virtual SplitOutcome split(int state, std::span<const double> base, double delta, double epsilon) const = 0;

    virtual std::string describe(std::span<const double> policy) const;

    StateInfo info(int state) const;
    std::string state_name(int state) const;
};

struct ApproachResult {
    Policy policy;
    double distance = 0.0;
    double complexity = 0.0;
    bool converged = true;
};

struct ApproachSettings {
    double initial_penalty = 1.0;
    int penalty_rounds = 20;
    int inner_iterations = 60;
    double gradient_step = 1e-6;
    double improvement_tol = 1e-12;
};

using PolicyCost = std::function<double(std::span<const double>)>;

/// Approximately argmin cost(pi) over pi with complexity(pi, base) <= delta,
/// from each start (free coordinates). Falls back to base when no start
/// improves on it.
ApproachResult minimize_within_budget(const ControlProblem& problem, std::span<const double> base,
                                      const PolicyCost& cost, double delta, const std::vector<Policy>& starts,
                                      const ApproachSettings& settings = {});

/// Approximately argmin distance(pi, state) over pi with
/// complexity(pi, base) <= delta, by a quadratic-penalty method with
/// doubling weight and backtracking gradient descent, followed by a bisection
/// back onto the budget boundary when the iterate is infeasible.
ApproachResult constrained_approach(const ControlProblem& problem, std::span<const double> base, int state,
                                    double delta, const ApproachSettings& settings = {});

struct WitnessStep {
    Policy policy;
    int state = 0;
    double complexity = 0.0; // relative to the previous step's policy
};

/// Policy chain from pi0 ending in the target state. chain.size() - 1 updates.
struct Witness {
    int state = 0;
    std::vector<WitnessStep> chain;

    std::size_t updates() const noexcept { return chain.empty() ? 0 : chain.size() - 1; }
};

struct ReachabilityReport {
    std::vector<int> reachable;
    std::vector<int> unreachable;
    std::map<int, Witness> witnesses;

    bool reaches(int state) const;
    bool complete() const noexcept { return unreachable.empty(); }
};

/// A reached policy from which later searches may continue, with its chain
/// from pi0.
struct Anchor {
    Policy policy;
    std::vector<Policy> chain;
};

/// Depth-first search for reachable states. Starts at pi0, then at each anchor.
ReachabilityReport find_reachable_states(const ControlProblem& problem, std::span<const double> pi0, double delta,
                                         const std::vector<Anchor>& anchors = {},
                                         const ApproachSettings& settings = {});

/// Independent check of every witness chain: starts at pi0, each policy
/// classifies as its recorded state, each update costs at most delta + 1e-9,
/// and the chain ends in its target. Returns the list of violations.
std::vector<std::string> verify_witnesses(const ControlProblem& problem, const ReachabilityReport& report,
                                          std::span<const double> pi0, double delta);

struct MixtureResult {
    double t_max = 0.0;
    double divergence = 0.0;
};

/// Largest t in [0, 1] with kl_at(t) <= delta, for kl_at nondecreasing with
/// kl_at(0) = 0.
MixtureResult max_feasible_mixture(const std::function<double(double)>& kl_at, double delta);

struct TabularMixture {
    double t_max = 0.0;
    ExperienceDistribution p_m;
};

/// Largest t with KL(t P* + (1 - t) P0 || P0) <= delta and the mixture there.
TabularMixture max_feasible_mixture(const ExperienceDistribution& p_star, const ExperienceDistribution& p0,
                                    double delta);

/// Checks the state is unreachable, then splits it.
SplitOutcome split_state(const ControlProblem& problem, int state, std::span<const double> pi0, double delta,
                         double epsilon, const std::vector<Anchor>& anchors = {});

struct LearnSettings {
    int max_rounds = 32;
    bool reanchor = true;
    ApproachSettings approach;
};

struct LearnResult {
    std::shared_ptr<const ControlProblem> problem;
    ReachabilityReport report;
    std::vector<SplitRecord> splits;
    std::vector<std::string> split_failures;
    std::vector<Anchor> anchors;
    std::vector<std::string> violations;
    int rounds = 0;
    bool controllable = false;
};

LearnResult learn_controllable_representation(std::shared_ptr<const ControlProblem> problem,
                                              std::span<const double> pi0, double delta, double epsilon,
                                              const LearnSettings& settings = {},
                                              std::vector<Anchor> anchors = {});

/// Feature-mass bins over an enumerable parametric family.
class TabularControlProblem : public ControlProblem {
public:
    TabularControlProblem(std::shared_ptr<const ParametricFamily> family, TelicRepresentation repr);

    std::size_t dimension() const override { return family_->dimension(); }
    std::vector<StateInfo> states() const override;
    int classify(std::span<const double> policy) const override;
    double distance(std::span<const double> policy, int state) const override;
    double complexity(std::span<const double> policy, std::span<const double> base) const override;
    Policy to_free(std::span<const double> policy) const override;
    Policy from_free(std::span<const double> free) const override;
    std::vector<Policy> starts(std::span<const double> base) const override;
    SplitOutcome split(int state, std::span<const double> base, double delta, double epsilon) const override;
    std::string describe(std::span<const double> policy) const override;

    const TelicRepresentation& representation() const noexcept { return repr_; }
    const ParametricFamily& family() const noexcept { return *family_; }

private:
    std::shared_ptr<const ParametricFamily> family_;
    TelicRepresentation repr_;
    std::vector<double> indicator_;
};

} // namespace telic
