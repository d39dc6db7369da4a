#pragma once
// Two-armed Bernoulli bandit: closed-form sequence probabilities, expected-wins
// states, the analytic telic gradient and the probability-matching optimum.
//
// Each step is (outcome, action) with the action chosen first and the outcome
// drawn from the chosen arm. Observation "1" is a win, "0" a loss.

#include "telic/experience.hpp"
#include "telic/goal.hpp"
#include "telic/learning.hpp"

#include <string>
#include <vector>

namespace telic::bandit {

struct Params {
    double p_left = 0.5;
    double p_right = 0.5;
    std::size_t horizon = 1;
};

void validate(const Params& params);

struct Counts {
    std::size_t left = 0;
    std::size_t right = 0;
    std::size_t left_wins = 0;
    std::size_t right_wins = 0;
};

inline constexpr Symbol kWin = 0;
inline constexpr Symbol kLoss = 1;
inline constexpr Symbol kLeft = 0;
inline constexpr Symbol kRight = 1;

inline constexpr double kThetaFloor = 1e-6;

const ExperienceSpace& space();

TabularEnvironment environment(const Params& params);
TabularPolicy policy(double theta);

Counts counts(const Experience& h);

/// theta^N_L (1-theta)^N_R p_L^N_L1 (1-p_L)^(N_L-N_L1) p_R^N_R1 (1-p_R)^(N_R-N_R1).
double sequence_probability(double theta, const Params& params, const Experience& h);

/// P_theta over H_N from the closed form.
ExperienceDistribution distribution(double theta, const Params& params);

/// Win count of every experience of H_N in canonical order.
std::vector<double> win_counts(std::size_t horizon);

double expected_wins(const ExperienceDistribution& p);

/// {P : |E_P[wins] - j| <= tol} on the wins scale.
TelicState wins_telic_state(double j, double tol);

/// Range of win counts that has positive probability for theta in (0, 1).
std::pair<double, double> reachable_wins(const Params& params);

/// Projection target for j clamped into the reachable range.
StatisticTarget wins_target(const Params& params, double j, double tol);

/// d/dtheta KL(P* || P_theta) = E*[N_R] / (1 - theta) - E*[N_L] / theta.
/// Throws PreconditionError at theta in {0, 1}.
double telic_gradient(double theta, const ExperienceDistribution& p_star);

/// E*[N_L / (N_L + N_R)].
double probability_matching_theta(const ExperienceDistribution& p_star);

/// E*[N_L] / N, the root of the gradient.
double gradient_root_theta(const ExperienceDistribution& p_star);

/// Bernoulli policy family with the analytic gradient.
class BernoulliFamily : public ParametricFamily {
public:
    explicit BernoulliFamily(Params params);

    PolicyFamily family() const override { return PolicyFamily::bernoulli_bandit; }
    std::size_t dimension() const override { return 1; }
    const ExperienceSpace& space() const override { return bandit::space(); }
    std::size_t horizon() const override { return params_.horizon; }
    ExperienceDistribution distribution(std::span<const double> theta) const override;
    std::vector<double> clamp(std::vector<double> theta) const override;
    std::vector<double> kl_gradient(const ExperienceDistribution& target, std::span<const double> theta) const override;
    std::vector<double> fit(const Experience& h) const override;

    const Params& params() const noexcept { return params_; }

private:
    Params params_;
};

struct TraceRow {
    int iteration = 0;
    double theta = 0.0;
    double distance = 0.0;
    double gradient = 0.0;
};

struct Run {
    std::vector<TraceRow> trace;
    double theta_final = 0.0;
    double theta_star = 0.0;      // probability matching on the terminal projection
    double theta_star_root = 0.0; // E*[N_L] / N on the terminal projection
    double distance_final = 0.0;
    bool converged = false;
    std::string failure;
};

Run run_learning(const Params& params, double j, double tol, double eta, int iterations, double theta0,
                 ProjectionMode mode = ProjectionMode::reprojected);

} // namespace telic::bandit
