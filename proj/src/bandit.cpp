#include "telic/bandit.hpp"

#include "telic/error.hpp"
#include "telic/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace telic::bandit {

void validate(const Params& params) {
    auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in_unit(params.p_left) || !in_unit(params.p_right))
        throw PreconditionError("bandit win probabilities must lie in [0, 1]");
    if (params.horizon < 1) throw PreconditionError("bandit horizon must be at least 1");
}

const ExperienceSpace& space() {
    static const ExperienceSpace s({"1", "0"}, {"L", "R"}, StepOrder::action_first);
    return s;
}

TabularEnvironment environment(const Params& params) {
    validate(params);
    return TabularEnvironment::from_rule(space(), params.horizon, [&](const History& prefix) {
        const double p = prefix.back() == kLeft ? params.p_left : params.p_right;
        return std::vector<double>{p, 1.0 - p};
    });
}

TabularPolicy policy(double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw PreconditionError("theta must lie in [0, 1]");
    return TabularPolicy::stationary(space(), {theta, 1.0 - theta});
}

Counts counts(const Experience& h) {
    Counts c;
    for (const Step& s : h.steps) {
        if (s.action > kRight || s.observation > kLoss) throw ShapeError("experience is not over the bandit alphabet");
        const bool win = s.observation == kWin;
        if (s.action == kLeft) {
            ++c.left;
            c.left_wins += win;
        } else {
            ++c.right;
            c.right_wins += win;
        }
    }
    return c;
}

namespace {

double power(double base, std::size_t exponent) {
    return exponent == 0 ? 1.0 : std::pow(base, static_cast<double>(exponent));
}

} // namespace

double sequence_probability(double theta, const Params& params, const Experience& h) {
    const Counts c = counts(h);
    return power(theta, c.left) * power(1.0 - theta, c.right) * power(params.p_left, c.left_wins) *
           power(1.0 - params.p_left, c.left - c.left_wins) * power(params.p_right, c.right_wins) *
           power(1.0 - params.p_right, c.right - c.right_wins);
}

ExperienceDistribution distribution(double theta, const Params& params) {
    validate(params);
    const std::size_t count = space().checked_count(params.horizon);
    std::vector<double> mass(count);
    for (std::size_t i = 0; i < count; ++i)
        mass[i] = sequence_probability(theta, params, space().experience_at(i, params.horizon));
    return ExperienceDistribution(space(), params.horizon, std::move(mass));
}

std::vector<double> win_counts(std::size_t horizon) {
    const std::size_t count = space().checked_count(horizon);
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Counts c = counts(space().experience_at(i, horizon));
        out[i] = static_cast<double>(c.left_wins + c.right_wins);
    }
    return out;
}

double expected_wins(const ExperienceDistribution& p) {
    if (!(p.space() == space())) throw ShapeError("distribution is not over the bandit alphabet");
    return expected_statistic(p, win_counts(p.length()));
}

TelicState wins_telic_state(double j, double tol) {
    if (!(tol >= 0.0)) throw PreconditionError("wins tolerance must be nonnegative");
    TelicState s;
    s.id = 0;
    s.name = "wins";
    s.lower = j - tol;
    s.upper = j + tol;
    s.upper_closed = true;
    return s;
}

std::pair<double, double> reachable_wins(const Params& params) {
    const auto n = static_cast<double>(params.horizon);
    const double lo = std::min(params.p_left, params.p_right) < 1.0 ? 0.0 : n;
    const double hi = std::max(params.p_left, params.p_right) > 0.0 ? n : 0.0;
    return {lo, hi};
}

StatisticTarget wins_target(const Params& params, double j, double tol) {
    validate(params);
    const auto [lo, hi] = reachable_wins(params);
    const TelicState s = wins_telic_state(std::clamp(j, lo, hi), tol);
    return {win_counts(params.horizon), s.lower, s.upper, true};
}

double telic_gradient(double theta, const ExperienceDistribution& p_star) {
    if (!(theta > 0.0 && theta < 1.0)) throw PreconditionError("bandit gradient is unbounded at theta in {0, 1}");
    double left = 0.0, right = 0.0;
    for (std::size_t i = 0; i < p_star.size(); ++i) {
        if (p_star[i] == 0.0) continue;
        const Counts c = counts(p_star.experience(i));
        left += p_star[i] * static_cast<double>(c.left);
        right += p_star[i] * static_cast<double>(c.right);
    }
    return right / (1.0 - theta) - left / theta;
}

double probability_matching_theta(const ExperienceDistribution& p_star) {
    if (p_star.length() == 0) throw PreconditionError("probability matching needs at least one step");
    double acc = 0.0;
    for (std::size_t i = 0; i < p_star.size(); ++i) {
        if (p_star[i] == 0.0) continue;
        const Counts c = counts(p_star.experience(i));
        acc += p_star[i] * static_cast<double>(c.left) / static_cast<double>(c.left + c.right);
    }
    return acc;
}

double gradient_root_theta(const ExperienceDistribution& p_star) {
    if (p_star.length() == 0) throw PreconditionError("probability matching needs at least one step");
    double acc = 0.0;
    for (std::size_t i = 0; i < p_star.size(); ++i)
        if (p_star[i] != 0.0) acc += p_star[i] * static_cast<double>(counts(p_star.experience(i)).left);
    return acc / static_cast<double>(p_star.length());
}

BernoulliFamily::BernoulliFamily(Params params) : params_(params) { validate(params_); }

ExperienceDistribution BernoulliFamily::distribution(std::span<const double> theta) const {
    if (theta.size() != 1) throw ShapeError("bernoulli family has one parameter");
    return bandit::distribution(theta[0], params_);
}

std::vector<double> BernoulliFamily::clamp(std::vector<double> theta) const {
    for (double& t : theta) t = std::clamp(t, kThetaFloor, 1.0 - kThetaFloor);
    return theta;
}

std::vector<double> BernoulliFamily::kl_gradient(const ExperienceDistribution& target,
                                                 std::span<const double> theta) const {
    if (theta.size() != 1) throw ShapeError("bernoulli family has one parameter");
    return {telic_gradient(theta[0], target)};
}

std::vector<double> BernoulliFamily::fit(const Experience& h) const {
    if (h.steps.empty()) return {0.5};
    const Counts c = counts(h);
    return {static_cast<double>(c.left) / static_cast<double>(h.steps.size())};
}

Run run_learning(const Params& params, double j, double tol, double eta, int iterations, double theta0,
                 ProjectionMode mode) {
    const BernoulliFamily family(params);
    const StatisticTarget target = wins_target(params, j, tol);
    Run out;
    try {
        const LearningRun run = run_policy_gradient(family, {theta0}, target, eta, iterations, mode);
        for (const auto& row : run.trace)
            out.trace.push_back({row.iteration, row.theta[0], row.distance, row.gradient[0]});
        out.theta_final = run.theta[0];
        out.converged = run.converged;
    } catch (const NumericalError& e) {
        out.failure = e.what();
    }
    if (out.failure.empty()) {
        const auto terminal = project_onto_interval(bandit::distribution(out.theta_final, params), target);
        out.theta_star = probability_matching_theta(terminal.projected);
        out.theta_star_root = gradient_root_theta(terminal.projected);
        out.distance_final = terminal.rate;
    }
    return out;
}

} // namespace telic::bandit
