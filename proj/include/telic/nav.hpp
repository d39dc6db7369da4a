#pragma once
// One-dimensional Gaussian random walk with target regions.
//
// A walk starts at 0 and adds N(mu, sigma) increments for T steps, so the
// final position is N(T mu, sqrt(T) sigma). Telic states are defined by region
// margins: the margin of region X is p(X) - max over the other regions, the
// policy is in S_X when that margin is at least epsilon, and in S_0 otherwise.

#include "telic/controllability.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace telic::nav {

struct GaussianStepPolicy {
    double mu = 0.0;
    double sigma = 1.0;
};

struct Region {
    std::string name;
    double center = 0.0;
    double radius = 1.0;

    double lower() const noexcept { return center - radius; }
    double upper() const noexcept { return center + radius; }
};

inline const std::string kNeutral = "S_0";

std::string state_label(const std::string& region_name);

struct NavTask {
    std::size_t horizon = 30;
    std::vector<Region> regions;
    double epsilon = 0.1;
    double delta = 1.0;
    GaussianStepPolicy pi0;
    /// Radius of a region inserted by a split, before clipping against the
    /// existing regions.
    double split_radius = 1.0;
    /// State labels in increasing preference; must name S_0 and every region.
    std::vector<std::string> order;

    const Region& region(const std::string& name) const;
    bool has_region(const std::string& name) const;
};

/// Throws PreconditionError listing the first violated constraint.
void validate(const NavTask& task);

/// T = 30, R centered at 2, L at -2, unit radii, epsilon 0.1, delta 1,
/// pi0 = (0, 1), order L < 0 < R.
NavTask default_task();

struct FinalLaw {
    double mean = 0.0;
    double std = 1.0;
};

FinalLaw final_position_distribution(const GaussianStepPolicy& pol, std::size_t horizon);

/// Mass of [a, b] under N(mean, std), computed from the nearer tail.
double interval_mass(double mean, double std, double a, double b);

double region_probability(const GaussianStepPolicy& pol, std::size_t horizon, const Region& region);

/// p(R) - p(L).
double delta_p(const GaussianStepPolicy& pol, const NavTask& task);

/// Region masses in task order.
std::vector<double> region_masses(const GaussianStepPolicy& pol, const NavTask& task);

/// p(X) - max over the other regions of p(Y).
double margin(const GaussianStepPolicy& pol, const NavTask& task, const std::string& region_name);

std::string classify(const GaussianStepPolicy& pol, const NavTask& task);

double gaussian_step_kl(const GaussianStepPolicy& pol, const GaussianStepPolicy& pol0);

struct Trajectories {
    std::size_t count = 0;
    std::size_t horizon = 0;
    std::vector<double> positions; // count rows of horizon + 1 positions
    std::vector<std::string> labels; // region containing the final position, or "none"

    double at(std::size_t walk, std::size_t step) const { return positions[walk * (horizon + 1) + step]; }
};

Trajectories simulate_trajectories(const GaussianStepPolicy& pol, const NavTask& task, std::size_t count,
                                   std::uint64_t seed);

/// A Gaussian reweighted by a constant factor on each region and on the
/// complement of all regions (the last weight). Weights are expected to be
/// normalized so that the atom masses sum to one.
struct TiltedGaussian {
    FinalLaw base;
    std::vector<Region> regions;
    std::vector<double> weights;

    std::size_t atom_of(double x) const;
    double density(double x) const;
    /// Base masses of each region and of the complement.
    std::vector<double> base_masses() const;
    /// Masses of each atom under the tilted law.
    std::vector<double> masses() const;
    /// E[x] and E[x^2] under the tilted law.
    std::array<double, 2> moments() const;
};

/// (1 - t) * base + t * tilted, which is again a tilted Gaussian.
TiltedGaussian mix_with_base(const TiltedGaussian& tilted, double t);

/// KL(mix_with_base(tilted, t) || base) by adaptive Simpson over mean +- 10
/// std, split at region edges, absolute tolerance 1e-9.
double mixture_kl_quadrature(const TiltedGaussian& tilted, double t);

/// The same divergence from the per-atom closed form.
double mixture_kl_closed(const TiltedGaussian& tilted, double t);

/// Linear constraint coeff . q >= bound on atom masses.
struct AtomConstraint {
    std::vector<double> coeff;
    double bound = 0.0;
};

struct AtomProjection {
    std::vector<double> q;
    double rate = 0.0;
    bool feasible = true;
    bool converged = true;
};

/// min sum q log(q / p) subject to the constraints and sum q = 1, by
/// projected Newton ascent on the nonnegative dual multipliers. An infeasible
/// constraint set gives feasible = false and rate = +inf.
AtomProjection project_atoms(const std::vector<double>& p, const std::vector<AtomConstraint>& constraints);

struct StateProjection {
    TiltedGaussian projected;
    double rate = 0.0;
    bool feasible = true;
};

/// Information projection of the final-position law onto a telic state.
/// S_0 with several regions is a union of convex pieces; the cheapest piece
/// wins.
StateProjection project_onto_state(const GaussianStepPolicy& pol, const NavTask& task, const std::string& label);

double telic_distance(const GaussianStepPolicy& pol, const NavTask& task, const std::string& label);

struct GradientStep {
    GaussianStepPolicy policy;
    std::array<double, 2> gradient{};
    double distance_before = 0.0;
    double distance_after = 0.0;
    int halvings = 0;
};

/// Analytic gradient in (mu, sigma) of KL(P* || P_pol) for a fixed tilted P*.
std::array<double, 2> kl_gradient(const TiltedGaussian& p_star, const GaussianStepPolicy& pol, std::size_t horizon);

/// One re-projected telic gradient step with halving on increase; sigma is
/// floored at 1e-6.
GradientStep telic_gradient_step(const GaussianStepPolicy& pol, const NavTask& task, const std::string& label,
                                 double eta);

/// Control problem over (mu, sigma) with free coordinates (mu, log sigma).
class NavControlProblem : public ControlProblem {
public:
    explicit NavControlProblem(NavTask task);

    std::size_t dimension() const override { return 2; }
    std::vector<StateInfo> states() const override;
    int classify(std::span<const double> policy) const override;
    double distance(std::span<const double> policy, int state) const override;
    double complexity(std::span<const double> policy, std::span<const double> base) const override;
    Policy to_free(std::span<const double> policy) const override;
    Policy from_free(std::span<const double> free) const override;
    std::vector<Policy> starts(std::span<const double> base) const override;
    SplitOutcome split(int state, std::span<const double> base, double delta, double epsilon) const override;
    std::string describe(std::span<const double> policy) const override;

    const NavTask& task() const noexcept { return task_; }
    int state_id(const std::string& label) const;
    const std::string& label(int state) const;

    static Policy encode(const GaussianStepPolicy& pol) { return {pol.mu, pol.sigma}; }
    static GaussianStepPolicy decode(std::span<const double> policy) { return {policy[0], policy[1]}; }

private:
    NavTask task_;
    std::vector<std::string> labels_; // index = state id
};

struct PhaseCell {
    double mu = 0.0;
    double sigma = 0.0;
    double delta_p = 0.0;
    std::string label;
    double complexity = 0.0;
    bool within_budget = false;
};

struct PhaseGrid {
    std::vector<double> mu_axis;
    std::vector<double> sigma_axis;
    std::vector<PhaseCell> cells; // sigma-major: cells[i * mu_axis.size() + j]
};

PhaseGrid phase_grid(const NavTask& task, std::array<double, 2> mu_range, std::array<double, 2> sigma_range,
                     std::size_t mu_resolution, std::size_t sigma_resolution);

/// Value maximized by a tradeoff curve: the region margin for S_X, and minus
/// the largest region margin for S_0 (a policy is in S_0 when it exceeds
/// -epsilon).
double state_score(const GaussianStepPolicy& pol, const NavTask& task, const std::string& label);

struct CurvePoint {
    std::string state;
    double budget = 0.0;
    double score = 0.0;
    GaussianStepPolicy argmax;
    bool ok = true;
};

/// For each state and each budget c on an even grid over [0, delta_max]: the
/// best score among policies within complexity c of pol0.
std::vector<CurvePoint> tradeoff_curves(const NavTask& task, const GaussianStepPolicy& pol0, double delta_max,
                                        std::size_t steps, const std::vector<std::string>& labels = {});

struct GranularityPoint {
    std::string state;
    double epsilon = 0.0;
    double complexity = 0.0; // +inf when unreachable within the search cap
    bool reachable = false;
};

/// Minimum complexity from pol0 that reaches each state defined at each
/// epsilon, searched up to delta_max.
std::vector<GranularityPoint> granularity_curves(const NavTask& task, const GaussianStepPolicy& pol0,
                                                 const std::vector<double>& epsilons, double delta_max,
                                                 std::size_t steps, const std::vector<std::string>& labels = {});

struct ScenarioStage {
    int stage = 0;
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ScenarioSettings {
    double shifted_center = 2.5;
    std::string shifted_region = "R";
    int max_rounds = 8;
    bool reanchor = true;
    std::size_t max_chain = 2;
};

struct ScenarioReport {
    std::vector<ScenarioStage> stages;
    NavTask base;
    NavTask shifted;
    NavTask final_task;
    ReachabilityReport base_reachability;
    ReachabilityReport shifted_reachability;
    LearnResult learned;
    bool passed = false;
};

ScenarioReport run_goal_shift_scenario(const NavTask& base, const ScenarioSettings& settings = {});

} // namespace telic::nav
