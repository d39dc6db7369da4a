#include "telic/learning.hpp"

#include "telic/error.hpp"
#include "telic/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace telic {

std::string family_name(PolicyFamily family) {
    switch (family) {
    case PolicyFamily::bernoulli_bandit: return "bernoulli-bandit";
    case PolicyFamily::gaussian_step: return "gaussian-step";
    case PolicyFamily::tabular: return "tabular";
    }
    return "unknown";
}

StatisticTarget feature_target(const TelicRepresentation& repr, const TelicState& state, const ExperienceSpace& space,
                               std::size_t n) {
    return {repr.goal.feature.indicator(space, n), state.lower, state.upper, state.upper_closed};
}

double expected_statistic(const ExperienceDistribution& p, std::span<const double> values) {
    if (values.size() != p.size()) throw ShapeError("statistic length differs from distribution size");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += p[i] * values[i];
    return acc;
}

ExperienceDistribution exponential_tilt(const ExperienceDistribution& p, std::span<const double> values, double lambda) {
    if (values.size() != p.size()) throw ShapeError("statistic length differs from distribution size");
    std::vector<double> logw(p.size(), -kInf);
    double top = -kInf;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        logw[i] = std::log(p[i]) + lambda * values[i];
        top = std::max(top, logw[i]);
    }
    std::vector<double> mass(p.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (logw[i] == -kInf) continue;
        mass[i] = std::exp(logw[i] - top);
        total += mass[i];
    }
    for (double& m : mass) m /= total;
    return ExperienceDistribution(p.space(), p.length(), std::move(mass));
}

namespace {

// Conditions p on the experiences where the statistic attains `level`.
ExperienceDistribution restrict_to_level(const ExperienceDistribution& p, std::span<const double> values, double level) {
    std::vector<double> mass(p.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0 && values[i] == level) {
            mass[i] = p[i];
            total += p[i];
        }
    for (double& m : mass) m /= total;
    return ExperienceDistribution(p.space(), p.length(), std::move(mass));
}

} // namespace

ProjectionResult project_onto_interval(const ExperienceDistribution& p, const StatisticTarget& target) {
    const auto& s = target.values;
    const double m0 = expected_statistic(p, s);
    const bool inside =
        m0 >= target.lower && (m0 < target.upper || (target.upper_closed && m0 <= target.upper));
    if (inside) return {p, 0.0, 0.0, m0, 0, true};

    double smin = kInf, smax = -kInf;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) {
            smin = std::min(smin, s[i]);
            smax = std::max(smax, s[i]);
        }

    const bool from_below = m0 < target.lower;
    const double goal = from_below ? target.lower
                                   : (target.upper_closed ? target.upper : target.upper - kOpenEdgeInset);
    auto infeasible = [&] {
        std::ostringstream msg;
        msg << "target statistic " << goal << " is outside the reachable range [" << smin << ", " << smax
            << "] of the base distribution";
        return InfeasibleError(msg.str());
    };
    if (from_below && goal > smax) throw infeasible();
    if (!from_below && goal < smin) throw infeasible();
    if ((from_below && goal == smax) || (!from_below && goal == smin)) {
        auto projected = restrict_to_level(p, s, goal);
        const double rate = kl_divergence(projected, p);
        return {std::move(projected), rate, from_below ? kInf : -kInf, goal, 0, true};
    }

    auto mean_at = [&](double lambda) { return expected_statistic(exponential_tilt(p, s, lambda), s); };

    // Bracket [inner, outer] with the mean on the near side of goal at inner
    // and on the far side at outer; the returned tilt is always the outer one
    // so the expectation never falls short of the target edge.
    const double sign = from_below ? 1.0 : -1.0;
    double inner = 0.0;
    double outer = sign;
    auto reached = [&](double mean) { return from_below ? mean >= goal : mean <= goal; };
    int iterations = 0;
    while (!reached(mean_at(outer))) {
        inner = outer;
        outer *= 2.0;
        if (++iterations > kTiltMaxIterations) throw NumericalError("could not bracket the tilting parameter");
    }
    double outer_mean = mean_at(outer);
    for (int it = 0; it < kTiltMaxIterations && std::abs(outer_mean - goal) > kTiltTolerance; ++it) {
        const double mid = 0.5 * (inner + outer);
        const double mean = mean_at(mid);
        ++iterations;
        if (reached(mean)) {
            outer = mid;
            outer_mean = mean;
        } else {
            inner = mid;
        }
    }
    auto projected = exponential_tilt(p, s, outer);
    const double rate = kl_divergence(projected, p);
    const bool converged = std::abs(outer_mean - goal) <= kTiltTolerance;
    return {std::move(projected), rate, outer, outer_mean, iterations, converged};
}

ProjectionResult information_projection(const ExperienceDistribution& p, const TelicState& state,
                                        const TelicRepresentation& repr) {
    return project_onto_interval(p, feature_target(repr, state, p.space(), p.length()));
}

double telic_distance(const ExperienceDistribution& p, const TelicState& state, const TelicRepresentation& repr) {
    return information_projection(p, state, repr).rate;
}

std::vector<double> ParametricFamily::kl_gradient(const ExperienceDistribution& target,
                                                  std::span<const double> theta) const {
    return central_gradient([&](std::span<const double> x) { return kl_divergence(target, distribution(x)); }, theta,
                            1e-5);
}

double ParametricFamily::complexity(std::span<const double> theta, std::span<const double> base) const {
    if (horizon() == 0) return 0.0;
    return kl_divergence(distribution(theta), distribution(base)) / static_cast<double>(horizon());
}

namespace {

std::vector<double> softmax_with_reference(std::span<const double> logits) {
    std::vector<double> z(logits.begin(), logits.end());
    z.push_back(0.0);
    const double norm = log_sum_exp(z);
    for (double& v : z) v = std::exp(v - norm);
    return z;
}

void check_dimension(const ParametricFamily& f, std::span<const double> theta) {
    if (theta.size() != f.dimension())
        throw ShapeError("expected " + std::to_string(f.dimension()) + " parameters, got " +
                         std::to_string(theta.size()));
}

constexpr double kFitFloor = 1e-6;

} // namespace

StationarySoftmaxFamily::StationarySoftmaxFamily(TabularEnvironment env, std::size_t horizon)
    : env_(std::move(env)), horizon_(horizon) {
    if (env_.space().action_count() < 2) throw ShapeError("softmax family needs at least two actions");
}

std::vector<double> StationarySoftmaxFamily::action_probabilities(std::span<const double> theta) const {
    check_dimension(*this, theta);
    return softmax_with_reference(theta);
}

std::vector<double> StationarySoftmaxFamily::logits_for(std::span<const double> probs) const {
    if (probs.size() != env_.space().action_count()) throw ShapeError("probability vector has wrong size");
    std::vector<double> out(dimension());
    for (std::size_t a = 0; a < out.size(); ++a) out[a] = std::log(probs[a] / probs.back());
    return out;
}

ExperienceDistribution StationarySoftmaxFamily::distribution(std::span<const double> theta) const {
    return induced_distribution(TabularPolicy::stationary(env_.space(), action_probabilities(theta)), env_, horizon_);
}

std::vector<double> StationarySoftmaxFamily::fit(const Experience& h) const {
    const std::size_t na = env_.space().action_count();
    if (h.steps.empty()) return std::vector<double>(dimension(), 0.0);
    std::vector<double> probs(na, 0.0);
    for (const Step& s : h.steps) probs.at(s.action) += 1.0;
    double total = 0.0;
    for (double& p : probs) {
        p = std::max(p / static_cast<double>(h.steps.size()), kFitFloor);
        total += p;
    }
    for (double& p : probs) p /= total;
    return logits_for(probs);
}

TabularSoftmaxFamily::TabularSoftmaxFamily(TabularEnvironment env, std::size_t horizon)
    : env_(std::move(env)), horizon_(horizon), prefixes_(decision_prefixes(env_.space(), horizon)) {
    if (env_.space().action_count() < 2) throw ShapeError("softmax family needs at least two actions");
}

TabularPolicy TabularSoftmaxFamily::policy(std::span<const double> theta) const {
    check_dimension(*this, theta);
    const std::size_t block = env_.space().action_count() - 1;
    TabularPolicy out(env_.space());
    for (std::size_t k = 0; k < prefixes_.size(); ++k)
        out.set(prefixes_[k], softmax_with_reference(theta.subspan(k * block, block)));
    return out;
}

ExperienceDistribution TabularSoftmaxFamily::distribution(std::span<const double> theta) const {
    return induced_distribution(policy(theta), env_, horizon_);
}

std::vector<double> TabularSoftmaxFamily::fit(const Experience& h) const {
    // The likelihood is maximized by putting all mass on the observed action at
    // every visited prefix; the floor keeps the logits finite.
    const ExperienceSpace& space = env_.space();
    const std::size_t na = space.action_count();
    const std::size_t block = na - 1;
    std::vector<double> theta(dimension(), 0.0);
    const bool action_first = space.order() == StepOrder::action_first;
    for (std::size_t i = 0; i < h.steps.size() && i < horizon_; ++i) {
        const History prefix = space.history_prefix(h, 2 * i + (action_first ? 0 : 1));
        auto it = std::find(prefixes_.begin(), prefixes_.end(), prefix);
        if (it == prefixes_.end()) continue;
        const auto k = static_cast<std::size_t>(it - prefixes_.begin());
        std::vector<double> probs(na, kFitFloor);
        probs[h.steps[i].action] = 1.0 - kFitFloor * static_cast<double>(na - 1);
        for (std::size_t a = 0; a < block; ++a) theta[k * block + a] = std::log(probs[a] / probs.back());
    }
    return theta;
}

double bernoulli_step_kl(double theta, double theta0) { return binary_kl(theta, theta0); }

double gaussian_step_kl(double mu, double sigma, double mu0, double sigma0) {
    if (!(sigma > 0.0) || !(sigma0 > 0.0)) throw PreconditionError("gaussian step policies need sigma > 0");
    const double d = mu - mu0;
    return std::log(sigma0 / sigma) + (sigma * sigma + d * d) / (2.0 * sigma0 * sigma0) - 0.5;
}

double policy_complexity(const PolicyParams& pi, const PolicyParams& pi0) {
    if (pi.family != pi0.family) throw ShapeError("policy families differ");
    switch (pi.family) {
    case PolicyFamily::bernoulli_bandit:
        if (pi.theta.size() != 1 || pi0.theta.size() != 1) throw ShapeError("bernoulli policies have one parameter");
        return bernoulli_step_kl(pi.theta[0], pi0.theta[0]);
    case PolicyFamily::gaussian_step:
        if (pi.theta.size() != 2 || pi0.theta.size() != 2) throw ShapeError("gaussian-step policies have two parameters");
        return gaussian_step_kl(pi.theta[0], pi.theta[1], pi0.theta[0], pi0.theta[1]);
    case PolicyFamily::tabular: break;
    }
    throw ShapeError("tabular complexity needs a ParametricFamily");
}

GradientStep policy_gradient_step(const ParametricFamily& family, std::span<const double> theta,
                                  const StatisticTarget& target, double eta, const ExperienceDistribution* frozen) {
    if (!(eta > 0.0)) throw PreconditionError("learning rate must be positive");
    GradientStep out;
    out.theta.assign(theta.begin(), theta.end());
    const auto p = family.distribution(theta);
    const ExperienceDistribution p_star = frozen ? *frozen : project_onto_interval(p, target).projected;
    out.distance_before = kl_divergence(p_star, p);
    out.distance_after = out.distance_before;
    out.gradient = family.kl_gradient(p_star, theta);
    for (double g : out.gradient)
        if (!std::isfinite(g)) {
            std::ostringstream msg;
            msg << "non-finite telic gradient at theta = [";
            for (std::size_t i = 0; i < theta.size(); ++i) msg << (i ? ", " : "") << theta[i];
            msg << "], distance " << out.distance_before;
            throw NumericalError(msg.str());
        }
    if (out.distance_before == 0.0 || norm2(out.gradient) == 0.0) return out;

    auto distance_at = [&](std::span<const double> x) {
        const auto q = family.distribution(x);
        return frozen ? kl_divergence(*frozen, q) : project_onto_interval(q, target).rate;
    };
    double step = eta;
    for (int h = 0; h <= kMaxHalvings; ++h) {
        std::vector<double> candidate(theta.begin(), theta.end());
        for (std::size_t i = 0; i < candidate.size(); ++i) candidate[i] -= step * out.gradient[i];
        candidate = family.clamp(std::move(candidate));
        const double d = distance_at(candidate);
        if (d <= out.distance_before * (1.0 + 1e-12) + 1e-15) {
            out.theta = std::move(candidate);
            out.distance_after = d;
            out.step_size = step;
            out.halvings = h;
            return out;
        }
        step *= 0.5;
    }
    std::ostringstream msg;
    msg << "telic distance increased after " << kMaxHalvings << " step halvings (eta " << eta << ", distance "
        << out.distance_before << ")";
    throw NumericalError(msg.str());
}

GradientStep policy_gradient_step(const ParametricFamily& family, const PolicyParams& theta, const TelicState& state,
                                  const TelicRepresentation& repr, double eta) {
    if (theta.family != family.family()) throw ShapeError("policy family does not match the parametric family");
    return policy_gradient_step(family, theta.theta, feature_target(repr, state, family.space(), family.horizon()), eta);
}

LearningRun run_policy_gradient(const ParametricFamily& family, std::vector<double> theta0,
                                const StatisticTarget& target, double eta, int iterations, ProjectionMode mode,
                                double distance_tol) {
    if (iterations < 0) throw PreconditionError("iteration count must be nonnegative");
    LearningRun run;
    run.theta = family.clamp(std::move(theta0));
    std::optional<ExperienceDistribution> frozen;
    if (mode == ProjectionMode::frozen)
        frozen.emplace(project_onto_interval(family.distribution(run.theta), target).projected);
    for (int it = 0; it <= iterations; ++it) {
        const GradientStep step =
            policy_gradient_step(family, run.theta, target, eta, frozen ? &*frozen : nullptr);
        run.trace.push_back({it, run.theta, step.distance_before, step.gradient});
        const bool settled = (mode == ProjectionMode::reprojected && step.distance_before <= distance_tol) ||
                             norm2(step.gradient) < 1e-12;
        if (settled) {
            run.converged = true;
            break;
        }
        if (it == iterations) break;
        run.theta = step.theta;
    }
    return run;
}

const TelicState& estimate_telic_state(const Experience& h, const TelicRepresentation& repr,
                                       const ParametricFamily& family) {
    const auto theta = family.fit(h);
    for (double v : theta)
        if (!std::isfinite(v)) throw NumericalError("maximum-likelihood fit did not converge");
    return assign_state(family.distribution(theta), repr);
}

const std::vector<double>& telic_conditioned_action(const TelicState& estimated,
                                                    const std::map<int, std::vector<double>>& table) {
    auto it = table.find(estimated.id);
    if (it == table.end())
        throw ConfigError("no action rule for telic state " + std::to_string(estimated.id) + " (" + estimated.name + ")");
    return it->second;
}

} // namespace telic
