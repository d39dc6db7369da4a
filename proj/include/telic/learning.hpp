#pragma once
// Telic distance, information projection onto interval states of a linear
// statistic, and policy-gradient learning over parametric policy families.

#include "telic/experience.hpp"
#include "telic/goal.hpp"

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace telic {

enum class PolicyFamily { bernoulli_bandit, gaussian_step, tabular };

std::string family_name(PolicyFamily family);

struct PolicyParams {
    PolicyFamily family = PolicyFamily::tabular;
    std::vector<double> theta;
};

/// A linear statistic s(h) over H_n (canonical order) and the interval its
/// expectation must reach. A feature-mass state uses the feature indicator.
struct StatisticTarget {
    std::vector<double> values;
    double lower = 0.0;
    double upper = 1.0;
    bool upper_closed = true;
};

StatisticTarget feature_target(const TelicRepresentation& repr, const TelicState& state, const ExperienceSpace& space,
                               std::size_t n);

double expected_statistic(const ExperienceDistribution& p, std::span<const double> values);

/// Distance kept from an open upper edge when projecting onto it.
inline constexpr double kOpenEdgeInset = 1e-9;
inline constexpr double kTiltTolerance = 1e-10;
inline constexpr int kTiltMaxIterations = 200;

struct ProjectionResult {
    ExperienceDistribution projected;
    double rate = 0.0;
    double lambda = 0.0;
    double statistic = 0.0;
    int iterations = 0;
    bool converged = true;
};

/// P(h) * exp(lambda * s(h)), normalized.
ExperienceDistribution exponential_tilt(const ExperienceDistribution& p, std::span<const double> values, double lambda);

/// Information projection of p onto {Q : E_Q[s] in the target interval}.
/// Identity when p already satisfies the target; otherwise the tilt that puts
/// the expectation on the nearest edge. Throws InfeasibleError when the edge
/// lies outside the range of s on the support of p.
ProjectionResult project_onto_interval(const ExperienceDistribution& p, const StatisticTarget& target);

ProjectionResult information_projection(const ExperienceDistribution& p, const TelicState& state,
                                        const TelicRepresentation& repr);

double telic_distance(const ExperienceDistribution& p, const TelicState& state, const TelicRepresentation& repr);

/// A parametric policy family whose induced experience law is enumerable.
class ParametricFamily {
public:
    virtual ~ParametricFamily() = default;

    virtual PolicyFamily family() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual const ExperienceSpace& space() const = 0;
    virtual std::size_t horizon() const = 0;
    virtual ExperienceDistribution distribution(std::span<const double> theta) const = 0;

    /// Projects theta back into the feasible parameter set.
    virtual std::vector<double> clamp(std::vector<double> theta) const { return theta; }

    /// Gradient in theta of KL(target || P_theta). The default uses central
    /// differences with step 1e-5.
    virtual std::vector<double> kl_gradient(const ExperienceDistribution& target, std::span<const double> theta) const;

    /// Parameters maximizing P_theta(h) within the family.
    virtual std::vector<double> fit(const Experience& h) const = 0;

    /// Per-step policy complexity KL(P_theta || P_base) / n.
    double complexity(std::span<const double> theta, std::span<const double> base) const;
};

/// History-independent softmax policy over A in a fixed tabular environment.
/// theta holds |A| - 1 logits; the last action has logit 0.
class StationarySoftmaxFamily : public ParametricFamily {
public:
    StationarySoftmaxFamily(TabularEnvironment env, std::size_t horizon);

    PolicyFamily family() const override { return PolicyFamily::tabular; }
    std::size_t dimension() const override { return env_.space().action_count() - 1; }
    const ExperienceSpace& space() const override { return env_.space(); }
    std::size_t horizon() const override { return horizon_; }
    ExperienceDistribution distribution(std::span<const double> theta) const override;
    std::vector<double> fit(const Experience& h) const override;

    std::vector<double> action_probabilities(std::span<const double> theta) const;
    std::vector<double> logits_for(std::span<const double> probs) const;

private:
    TabularEnvironment env_;
    std::size_t horizon_;
};

/// History-conditioned softmax policy: |A| - 1 logits per decision prefix.
class TabularSoftmaxFamily : public ParametricFamily {
public:
    TabularSoftmaxFamily(TabularEnvironment env, std::size_t horizon);

    PolicyFamily family() const override { return PolicyFamily::tabular; }
    std::size_t dimension() const override { return prefixes_.size() * (env_.space().action_count() - 1); }
    const ExperienceSpace& space() const override { return env_.space(); }
    std::size_t horizon() const override { return horizon_; }
    ExperienceDistribution distribution(std::span<const double> theta) const override;
    std::vector<double> fit(const Experience& h) const override;

    TabularPolicy policy(std::span<const double> theta) const;
    const std::vector<History>& prefixes() const noexcept { return prefixes_; }

private:
    TabularEnvironment env_;
    std::size_t horizon_;
    std::vector<History> prefixes_;
};

double bernoulli_step_kl(double theta, double theta0);

/// KL(N(mu, sigma) || N(mu0, sigma0)) per step, in nats.
double gaussian_step_kl(double mu, double sigma, double mu0, double sigma0);

/// Per-step KL for the closed-form families (bernoulli-bandit, gaussian-step).
/// Throws ShapeError on family mismatch or for the tabular family, which needs
/// a ParametricFamily.
double policy_complexity(const PolicyParams& pi, const PolicyParams& pi0);

enum class ProjectionMode { reprojected, frozen };

struct GradientStep {
    std::vector<double> theta;
    std::vector<double> gradient;
    double distance_before = 0.0;
    double distance_after = 0.0;
    double step_size = 0.0;
    int halvings = 0;
};

inline constexpr int kMaxHalvings = 10;

/// One descent step on KL(P* || P_theta). With `frozen` set, P* is held fixed;
/// otherwise it is re-projected from the current P_theta. The step is halved
/// while the distance increases; exhausting kMaxHalvings throws NumericalError.
GradientStep policy_gradient_step(const ParametricFamily& family, std::span<const double> theta,
                                  const StatisticTarget& target, double eta,
                                  const ExperienceDistribution* frozen = nullptr);

GradientStep policy_gradient_step(const ParametricFamily& family, const PolicyParams& theta, const TelicState& state,
                                  const TelicRepresentation& repr, double eta);

struct TraceRow {
    int iteration = 0;
    std::vector<double> theta;
    double distance = 0.0;
    std::vector<double> gradient;
};

struct LearningRun {
    std::vector<TraceRow> trace;
    std::vector<double> theta;
    bool converged = false;
};

LearningRun run_policy_gradient(const ParametricFamily& family, std::vector<double> theta0,
                                const StatisticTarget& target, double eta, int iterations,
                                ProjectionMode mode = ProjectionMode::reprojected, double distance_tol = 1e-14);

/// State of the family member that best explains h.
const TelicState& estimate_telic_state(const Experience& h, const TelicRepresentation& repr,
                                       const ParametricFamily& family);

/// Action distribution assigned to the estimated state. Throws ConfigError when
/// the table has no rule for it.
const std::vector<double>& telic_conditioned_action(const TelicState& estimated,
                                                    const std::map<int, std::vector<double>>& table);

} // namespace telic
