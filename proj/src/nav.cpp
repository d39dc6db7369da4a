#include "telic/nav.hpp"

#include "telic/error.hpp"
#include "telic/learning.hpp"
#include "telic/numeric.hpp"
#include "telic/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace telic::nav {

std::string state_label(const std::string& region_name) { return "S_" + region_name; }

const Region& NavTask::region(const std::string& name) const {
    for (const auto& r : regions)
        if (r.name == name) return r;
    throw PreconditionError("unknown region " + name);
}

bool NavTask::has_region(const std::string& name) const {
    return std::any_of(regions.begin(), regions.end(), [&](const Region& r) { return r.name == name; });
}

void validate(const NavTask& task) {
    if (task.horizon < 1) throw PreconditionError("horizon must be at least 1");
    if (task.regions.empty()) throw PreconditionError("at least one region is required");
    std::set<std::string> expected{kNeutral};
    for (std::size_t i = 0; i < task.regions.size(); ++i) {
        const Region& a = task.regions[i];
        if (a.name.empty()) throw PreconditionError("region names must be nonempty");
        if (!std::isfinite(a.center) || !(a.radius > 0.0) || !std::isfinite(a.radius))
            throw PreconditionError("region " + a.name + " needs a finite center and positive radius");
        if (!expected.insert(state_label(a.name)).second)
            throw PreconditionError("duplicate region name " + a.name);
        for (std::size_t j = 0; j < i; ++j) {
            const Region& b = task.regions[j];
            if (a.upper() > b.lower() && b.upper() > a.lower())
                throw PreconditionError("regions " + b.name + " and " + a.name + " overlap");
        }
    }
    if (!(task.epsilon > 0.0 && task.epsilon < 1.0)) throw PreconditionError("epsilon must lie in (0, 1)");
    if (!(task.delta >= 0.0) || !std::isfinite(task.delta))
        throw PreconditionError("complexity budget must be finite and nonnegative");
    if (!(task.pi0.sigma > 0.0) || !std::isfinite(task.pi0.mu))
        throw PreconditionError("default policy needs a finite mean and positive sigma");
    if (!(task.split_radius > 0.0)) throw PreconditionError("split radius must be positive");
    const std::set<std::string> ordered(task.order.begin(), task.order.end());
    if (ordered != expected || task.order.size() != expected.size())
        throw PreconditionError("state order must list S_0 and every region state exactly once");
}

NavTask default_task() {
    NavTask t;
    t.horizon = 30;
    t.regions = {{"R", 2.0, 1.0}, {"L", -2.0, 1.0}};
    t.epsilon = 0.1;
    t.delta = 1.0;
    t.pi0 = {0.0, 1.0};
    t.order = {"S_L", kNeutral, "S_R"};
    return t;
}

FinalLaw final_position_distribution(const GaussianStepPolicy& pol, std::size_t horizon) {
    if (!(pol.sigma > 0.0)) throw PreconditionError("step sigma must be positive");
    const double t = static_cast<double>(horizon);
    return {t * pol.mu, std::sqrt(t) * pol.sigma};
}

double interval_mass(double mean, double std, double a, double b) {
    if (!(b > a)) return 0.0;
    const double za = (a - mean) / std;
    const double zb = (b - mean) / std;
    constexpr double r = 0.70710678118654752440;
    if (za >= 0.0) return 0.5 * (std::erfc(za * r) - std::erfc(zb * r));
    if (zb <= 0.0) return 0.5 * (std::erfc(-zb * r) - std::erfc(-za * r));
    return 1.0 - 0.5 * std::erfc(-za * r) - 0.5 * std::erfc(zb * r);
}

double region_probability(const GaussianStepPolicy& pol, std::size_t horizon, const Region& region) {
    const FinalLaw law = final_position_distribution(pol, horizon);
    return interval_mass(law.mean, law.std, region.lower(), region.upper());
}

std::vector<double> region_masses(const GaussianStepPolicy& pol, const NavTask& task) {
    std::vector<double> out;
    for (const auto& r : task.regions) out.push_back(region_probability(pol, task.horizon, r));
    return out;
}

double delta_p(const GaussianStepPolicy& pol, const NavTask& task) {
    return region_probability(pol, task.horizon, task.region("R")) -
           region_probability(pol, task.horizon, task.region("L"));
}

namespace {

double margin_of(const std::vector<double>& masses, std::size_t x) {
    double rival = 0.0;
    for (std::size_t y = 0; y < masses.size(); ++y)
        if (y != x) rival = std::max(rival, masses[y]);
    return masses[x] - rival;
}

std::size_t region_index(const NavTask& task, const std::string& name) {
    for (std::size_t i = 0; i < task.regions.size(); ++i)
        if (task.regions[i].name == name) return i;
    throw PreconditionError("unknown region " + name);
}

// Region index for a state label, or regions.size() for S_0.
std::size_t label_index(const NavTask& task, const std::string& label) {
    if (label == kNeutral) return task.regions.size();
    if (label.rfind("S_", 0) != 0) throw PreconditionError("unknown telic state " + label);
    return region_index(task, label.substr(2));
}

} // namespace

double margin(const GaussianStepPolicy& pol, const NavTask& task, const std::string& region_name) {
    return margin_of(region_masses(pol, task), region_index(task, region_name));
}

std::string classify(const GaussianStepPolicy& pol, const NavTask& task) {
    const auto masses = region_masses(pol, task);
    for (std::size_t x = 0; x < masses.size(); ++x)
        if (margin_of(masses, x) >= task.epsilon) return state_label(task.regions[x].name);
    return kNeutral;
}

double gaussian_step_kl(const GaussianStepPolicy& pol, const GaussianStepPolicy& pol0) {
    return telic::gaussian_step_kl(pol.mu, pol.sigma, pol0.mu, pol0.sigma);
}

Trajectories simulate_trajectories(const GaussianStepPolicy& pol, const NavTask& task, std::size_t count,
                                   std::uint64_t seed) {
    if (!(pol.sigma > 0.0)) throw PreconditionError("step sigma must be positive");
    Trajectories out;
    out.count = count;
    out.horizon = task.horizon;
    out.positions.reserve(count * (task.horizon + 1));
    Rng rng(seed);
    for (std::size_t w = 0; w < count; ++w) {
        double x = 0.0;
        out.positions.push_back(x);
        for (std::size_t t = 0; t < task.horizon; ++t) {
            x += pol.mu + pol.sigma * rng.normal();
            out.positions.push_back(x);
        }
        std::string label = "none";
        for (const auto& r : task.regions)
            if (x >= r.lower() && x <= r.upper()) {
                label = r.name;
                break;
            }
        out.labels.push_back(label);
    }
    return out;
}

std::size_t TiltedGaussian::atom_of(double x) const {
    for (std::size_t i = 0; i < regions.size(); ++i)
        if (x >= regions[i].lower() && x <= regions[i].upper()) return i;
    return regions.size();
}

double TiltedGaussian::density(double x) const {
    return normal_pdf((x - base.mean) / base.std) / base.std * weights[atom_of(x)];
}

std::vector<double> TiltedGaussian::base_masses() const {
    std::vector<double> out;
    double inside = 0.0;
    for (const auto& r : regions) {
        out.push_back(interval_mass(base.mean, base.std, r.lower(), r.upper()));
        inside += out.back();
    }
    out.push_back(std::max(0.0, 1.0 - inside));
    return out;
}

std::vector<double> TiltedGaussian::masses() const {
    auto out = base_masses();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= weights[i];
    return out;
}

std::array<double, 2> TiltedGaussian::moments() const {
    const double m = base.mean;
    const double s = base.std;
    auto z_phi = [](double z) { return std::isfinite(z) ? z * normal_pdf(z) : 0.0; };
    auto phi = [](double z) { return std::isfinite(z) ? normal_pdf(z) : 0.0; };
    double rest1 = m;
    double rest2 = s * s + m * m;
    double e1 = 0.0;
    double e2 = 0.0;
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const double za = (regions[i].lower() - m) / s;
        const double zb = (regions[i].upper() - m) / s;
        const double m0 = interval_mass(m, s, regions[i].lower(), regions[i].upper());
        const double y1 = s * (phi(za) - phi(zb));
        const double y2 = s * s * (m0 + z_phi(za) - z_phi(zb));
        const double m1 = m * m0 + y1;
        const double m2 = y2 + 2.0 * m * y1 + m * m * m0;
        rest1 -= m1;
        rest2 -= m2;
        e1 += weights[i] * m1;
        e2 += weights[i] * m2;
    }
    e1 += weights.back() * rest1;
    e2 += weights.back() * rest2;
    return {e1, e2};
}

TiltedGaussian mix_with_base(const TiltedGaussian& tilted, double t) {
    TiltedGaussian out = tilted;
    for (double& w : out.weights) w = t * w + (1.0 - t);
    return out;
}

double mixture_kl_closed(const TiltedGaussian& tilted, double t) {
    const auto p = tilted.base_masses();
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double v = t * tilted.weights[i] + (1.0 - t);
        if (p[i] > 0.0 && v > 0.0) sum += p[i] * v * std::log(v);
    }
    return sum;
}

double mixture_kl_quadrature(const TiltedGaussian& tilted, double t) {
    const double lo = tilted.base.mean - 10.0 * tilted.base.std;
    const double hi = tilted.base.mean + 10.0 * tilted.base.std;
    std::vector<double> cuts{lo, hi};
    for (const auto& r : tilted.regions)
        for (double e : {r.lower(), r.upper()})
            if (e > lo && e < hi) cuts.push_back(e);
    std::sort(cuts.begin(), cuts.end());
    const double tol = 1e-9 / static_cast<double>(cuts.size());
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double a = cuts[k];
        const double b = cuts[k + 1];
        if (!(b > a)) continue;
        const double v = t * tilted.weights[tilted.atom_of(0.5 * (a + b))] + (1.0 - t);
        if (!(v > 0.0)) continue;
        const double c = v * std::log(v);
        const double m = tilted.base.mean;
        const double s = tilted.base.std;
        sum += adaptive_simpson([&](double x) { return c * normal_pdf((x - m) / s) / s; }, a, b, tol);
    }
    return sum;
}

namespace {

// Solves H x = r by Gaussian elimination with partial pivoting; false when
// H is numerically singular.
bool solve_small(std::vector<std::vector<double>> h, std::vector<double>& r) {
    const std::size_t n = r.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t i = c + 1; i < n; ++i)
            if (std::abs(h[i][c]) > std::abs(h[piv][c])) piv = i;
        if (!(std::abs(h[piv][c]) > 1e-300)) return false;
        std::swap(h[c], h[piv]);
        std::swap(r[c], r[piv]);
        for (std::size_t i = c + 1; i < n; ++i) {
            const double f = h[i][c] / h[c][c];
            for (std::size_t j = c; j < n; ++j) h[i][j] -= f * h[c][j];
            r[i] -= f * r[c];
        }
    }
    for (std::size_t c = n; c-- > 0;) {
        for (std::size_t j = c + 1; j < n; ++j) r[c] -= h[c][j] * r[j];
        r[c] /= h[c][c];
    }
    return std::all_of(r.begin(), r.end(), [](double v) { return std::isfinite(v); });
}

} // namespace

AtomProjection project_atoms(const std::vector<double>& p, const std::vector<AtomConstraint>& constraints) {
    const std::size_t n = p.size();
    const std::size_t m = constraints.size();
    for (const auto& c : constraints)
        if (c.coeff.size() != n) throw ShapeError("constraint length does not match the atom count");
    std::vector<double> logp(n);
    for (std::size_t i = 0; i < n; ++i) logp[i] = p[i] > 0.0 ? std::log(p[i]) : -kInf;

    // Dual: maximize lambda . b - log sum p exp(lambda . A) over lambda >= 0.
    std::vector<double> s(n);
    auto tilt = [&](const std::vector<double>& lambda) {
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = logp[i];
            if (!std::isfinite(s[i])) continue;
            for (std::size_t k = 0; k < m; ++k) s[i] += lambda[k] * constraints[k].coeff[i];
        }
        const double lse = log_sum_exp(s);
        for (double& v : s) v = std::isfinite(v) ? std::exp(v - lse) : 0.0;
        double g = -lse;
        for (std::size_t k = 0; k < m; ++k) g += lambda[k] * constraints[k].bound;
        return g;
    };
    auto expectation = [&](std::size_t k) {
        double e = 0.0;
        for (std::size_t i = 0; i < n; ++i) e += constraints[k].coeff[i] * s[i];
        return e;
    };

    AtomProjection out;
    std::vector<double> lambda(m, 0.0);
    double g = tilt(lambda);
    out.converged = m == 0;
    for (int iter = 0; iter < 500 && m > 0; ++iter) {
        std::vector<double> grad(m);
        std::vector<std::size_t> active;
        double worst = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            grad[k] = constraints[k].bound - expectation(k);
            if (lambda[k] > 0.0 || grad[k] > 0.0) {
                active.push_back(k);
                worst = std::max(worst, std::abs(grad[k]));
            }
        }
        if (worst < 1e-14) {
            out.converged = true;
            break;
        }
        // Newton direction on the free multipliers; the dual Hessian is minus
        // the covariance of the constraint rows under the current tilt.
        const std::size_t f = active.size();
        std::vector<double> mean(f);
        for (std::size_t a = 0; a < f; ++a) mean[a] = expectation(active[a]);
        std::vector<std::vector<double>> cov(f, std::vector<double>(f, 0.0));
        for (std::size_t a = 0; a < f; ++a)
            for (std::size_t b = 0; b < f; ++b) {
                double c = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    c += s[i] * (constraints[active[a]].coeff[i] - mean[a]) * (constraints[active[b]].coeff[i] - mean[b]);
                cov[a][b] = c + (a == b ? 1e-13 : 0.0);
            }
        std::vector<double> dir(f);
        for (std::size_t a = 0; a < f; ++a) dir[a] = grad[active[a]];
        if (!solve_small(cov, dir))
            for (std::size_t a = 0; a < f; ++a) dir[a] = grad[active[a]];

        bool moved = false;
        for (double step = 1.0; step > 1e-12 && !moved; step *= 0.5) {
            std::vector<double> trial = lambda;
            for (std::size_t a = 0; a < f; ++a) trial[active[a]] = std::max(0.0, lambda[active[a]] + step * dir[a]);
            double gain = 0.0;
            for (std::size_t k = 0; k < m; ++k) gain += grad[k] * (trial[k] - lambda[k]);
            const std::vector<double> keep = s;
            const double gt = tilt(trial);
            if (gt >= g + 1e-4 * gain && gain > 0.0) {
                lambda = std::move(trial);
                g = gt;
                moved = true;
            } else {
                s = keep;
            }
        }
        if (!moved) {
            out.converged = worst < 1e-9;
            break;
        }
    }
    tilt(lambda);
    out.q = s;
    double rate = 0.0;
    for (std::size_t i = 0; i < n; ++i) rate += kl_term(out.q[i], p[i]);
    out.rate = rate;
    for (const auto& c : constraints) {
        double lhs = 0.0;
        for (std::size_t i = 0; i < n; ++i) lhs += c.coeff[i] * out.q[i];
        if (lhs < c.bound - 1e-9) out.feasible = false;
    }
    if (!out.feasible) out.rate = kInf;
    return out;
}

StateProjection project_onto_state(const GaussianStepPolicy& pol, const NavTask& task, const std::string& label) {
    const std::size_t target = label_index(task, label);
    const std::size_t k = task.regions.size();
    StateProjection out;
    out.projected.base = final_position_distribution(pol, task.horizon);
    out.projected.regions = task.regions;
    out.projected.weights.assign(k + 1, 1.0);
    if (classify(pol, task) == label) return out;

    const auto p = out.projected.base_masses();
    auto difference = [&](std::size_t x, std::size_t y, double bound) {
        AtomConstraint c{std::vector<double>(k + 1, 0.0), bound};
        c.coeff[x] = 1.0;
        if (y < k) c.coeff[y] = -1.0;
        return c;
    };
    // Each piece is a list of constraints; y == k stands for the empty rival.
    std::vector<std::vector<AtomConstraint>> pieces;
    if (target < k) {
        std::vector<AtomConstraint> piece;
        for (std::size_t y = 0; y < k; ++y)
            if (y != target) piece.push_back(difference(target, y, task.epsilon));
        if (k == 1) piece.push_back(difference(target, k, task.epsilon));
        pieces.push_back(std::move(piece));
    } else if (k == 1) {
        AtomConstraint c{std::vector<double>(k + 1, 0.0), -(task.epsilon - kOpenEdgeInset)};
        c.coeff[0] = -1.0;
        pieces.push_back({c});
    } else {
        // S_0 holds exactly when some region y is within epsilon of every other
        // region while y itself does not lead some region w by epsilon.
        const double open = task.epsilon - kOpenEdgeInset;
        auto at_most = [&](std::size_t x, std::size_t y) {
            AtomConstraint c = difference(x, y, 0.0);
            for (double& a : c.coeff) a = -a;
            c.bound = -open;
            return c;
        };
        for (std::size_t y = 0; y < k; ++y)
            for (std::size_t w = 0; w < k; ++w) {
                if (w == y) continue;
                std::vector<AtomConstraint> piece;
                for (std::size_t z = 0; z < k; ++z)
                    if (z != y) piece.push_back(at_most(z, y));
                piece.push_back(at_most(y, w));
                pieces.push_back(std::move(piece));
            }
    }

    out.rate = kInf;
    out.feasible = false;
    for (const auto& piece : pieces) {
        const AtomProjection proj = project_atoms(p, piece);
        if (!proj.feasible || !(proj.rate < out.rate)) continue;
        out.rate = proj.rate;
        out.feasible = true;
        for (std::size_t i = 0; i <= k; ++i) out.projected.weights[i] = p[i] > 0.0 ? proj.q[i] / p[i] : 0.0;
    }
    return out;
}

double telic_distance(const GaussianStepPolicy& pol, const NavTask& task, const std::string& label) {
    return project_onto_state(pol, task, label).rate;
}

std::array<double, 2> kl_gradient(const TiltedGaussian& p_star, const GaussianStepPolicy& pol, std::size_t horizon) {
    const FinalLaw law = final_position_distribution(pol, horizon);
    const auto [e1, e2] = p_star.moments();
    const double m = law.mean;
    const double s = law.std;
    const double centered = e1 - m;
    const double spread = e2 - 2.0 * m * e1 + m * m;
    const double d_mean = -centered / (s * s);
    const double d_std = -(spread - s * s) / (s * s * s);
    const double t = static_cast<double>(horizon);
    return {t * d_mean, std::sqrt(t) * d_std};
}

GradientStep telic_gradient_step(const GaussianStepPolicy& pol, const NavTask& task, const std::string& label,
                                 double eta) {
    if (!(eta > 0.0)) throw PreconditionError("step size must be positive");
    GradientStep out;
    out.policy = pol;
    const StateProjection proj = project_onto_state(pol, task, label);
    if (!proj.feasible) throw InfeasibleError("state " + label + " cannot be reached from this policy");
    out.distance_before = proj.rate;
    out.distance_after = proj.rate;
    if (proj.rate == 0.0) return out;
    out.gradient = kl_gradient(proj.projected, pol, task.horizon);
    if (!std::isfinite(out.gradient[0]) || !std::isfinite(out.gradient[1]))
        throw NumericalError("non-finite telic gradient");
    double step = eta;
    for (;;) {
        GaussianStepPolicy next{pol.mu - step * out.gradient[0], std::max(1e-6, pol.sigma - step * out.gradient[1])};
        const double d = telic_distance(next, task, label);
        if (d <= out.distance_before * (1.0 + 1e-12) + 1e-15) {
            out.policy = next;
            out.distance_after = d;
            return out;
        }
        if (out.halvings == kMaxHalvings) throw NumericalError("telic distance kept increasing after step halving");
        ++out.halvings;
        step *= 0.5;
    }
}

NavControlProblem::NavControlProblem(NavTask task) : task_(std::move(task)) {
    validate(task_);
    labels_.push_back(kNeutral);
    for (const auto& r : task_.regions) labels_.push_back(state_label(r.name));
}

std::vector<StateInfo> NavControlProblem::states() const {
    std::vector<StateInfo> out;
    for (std::size_t rank = 0; rank < task_.order.size(); ++rank)
        out.push_back({state_id(task_.order[rank]), task_.order[rank], static_cast<int>(rank)});
    return out;
}

int NavControlProblem::state_id(const std::string& label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if (labels_[i] == label) return static_cast<int>(i);
    throw PreconditionError("unknown telic state " + label);
}

const std::string& NavControlProblem::label(int state) const {
    if (state < 0 || static_cast<std::size_t>(state) >= labels_.size())
        throw PreconditionError("unknown telic state id " + std::to_string(state));
    return labels_[static_cast<std::size_t>(state)];
}

int NavControlProblem::classify(std::span<const double> policy) const {
    return state_id(nav::classify(decode(policy), task_));
}

double NavControlProblem::distance(std::span<const double> policy, int state) const {
    return telic_distance(decode(policy), task_, label(state));
}

double NavControlProblem::complexity(std::span<const double> policy, std::span<const double> base) const {
    return gaussian_step_kl(decode(policy), decode(base));
}

Policy NavControlProblem::to_free(std::span<const double> policy) const { return {policy[0], std::log(policy[1])}; }

Policy NavControlProblem::from_free(std::span<const double> free) const {
    return {free[0], std::clamp(std::exp(free[1]), 1e-6, 1e6)};
}

std::vector<Policy> NavControlProblem::starts(std::span<const double> base) const {
    double reach = 0.0;
    for (const auto& r : task_.regions) reach = std::max(reach, std::abs(r.center));
    const double shift = std::max(reach, 1.0) / static_cast<double>(task_.horizon);
    const Policy b = to_free(base);
    std::vector<Policy> out{b};
    for (double dm : {-shift, 0.0, shift})
        for (double ds : {-0.5, 0.0, 0.5})
            if (dm != 0.0 || ds != 0.0) out.push_back({b[0] + dm, b[1] + ds});
    return out;
}

SplitOutcome NavControlProblem::split(int state, std::span<const double> base, double delta, double) const {
    SplitOutcome out;
    out.record.original = state;
    const std::string& target = label(state);
    if (target == kNeutral) {
        out.failure = "the neutral state is never split";
        return out;
    }
    const GaussianStepPolicy pol = decode(base);
    const StateProjection proj = project_onto_state(pol, task_, target);
    if (!proj.feasible) {
        out.failure = "projection onto " + target + " is infeasible";
        return out;
    }
    const MixtureResult mix =
        max_feasible_mixture([&](double t) { return mixture_kl_quadrature(proj.projected, t); }, delta);
    const TiltedGaussian p_m = mix_with_base(proj.projected, mix.t_max);
    const std::size_t target_index = label_index(task_, target);
    {
        const auto [e1, e2] = p_m.moments();
        std::ostringstream summary;
        summary.precision(9);
        summary << "mean=" << e1 << " std=" << std::sqrt(std::max(0.0, e2 - e1 * e1))
                << " target_mass=" << p_m.masses()[target_index];
        out.record.p_m_summary = summary.str();
    }
    out.record.t_max = mix.t_max;
    out.record.p_m_divergence = mix.divergence;
    const int here = info(classify(base)).rank;
    const int there = info(state).rank;
    out.record.direction = there > here ? "up" : "down";

    const ApproachResult approach = constrained_approach(*this, base, state, delta);
    if (classify(approach.policy) == state) {
        out.failure = "state " + target + " is reachable from the base policy";
        return out;
    }
    const double center = static_cast<double>(task_.horizon) * approach.policy[0];
    double radius = task_.split_radius;
    for (const auto& r : task_.regions) {
        if (center >= r.lower() && center <= r.upper()) {
            out.failure = "intermediate center " + std::to_string(center) + " lies inside region " + r.name;
            return out;
        }
        radius = std::min(radius, center < r.lower() ? r.lower() - center : center - r.upper());
    }
    if (radius < 1e-3) {
        out.failure = "no room for an intermediate region";
        return out;
    }

    std::string name = "M";
    for (int n = 2; task_.has_region(name); ++n) name = "M" + std::to_string(n);
    NavTask next = task_;
    next.regions.push_back({name, center, radius});
    auto pos = std::find(next.order.begin(), next.order.end(), target);
    if (there < here) ++pos;
    next.order.insert(pos, state_label(name));

    auto problem = std::make_shared<NavControlProblem>(std::move(next));
    const int intermediate = problem->state_id(state_label(name));
    if (problem->classify(base) == intermediate) {
        out.failure = "the base policy would already lie in the intermediate state";
        return out;
    }
    out.record.intermediate = intermediate;
    out.record.intermediate_distance = problem->distance(base, intermediate);
    out.record.intermediate_policy = constrained_approach(*problem, base, intermediate, delta).policy;
    out.problem = std::move(problem);
    return out;
}

std::string NavControlProblem::describe(std::span<const double> policy) const {
    std::ostringstream out;
    out.precision(9);
    out << "mu=" << policy[0] << " sigma=" << policy[1] << " state=" << nav::classify(decode(policy), task_);
    return out.str();
}

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n < 2) return {lo};
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

std::vector<std::string> default_labels(const NavTask& task) {
    std::vector<std::string> out;
    for (const auto& r : task.regions) out.push_back(state_label(r.name));
    return out;
}

} // namespace

PhaseGrid phase_grid(const NavTask& task, std::array<double, 2> mu_range, std::array<double, 2> sigma_range,
                     std::size_t mu_resolution, std::size_t sigma_resolution) {
    validate(task);
    if (mu_resolution < 1 || sigma_resolution < 1) throw PreconditionError("grid resolution must be positive");
    if (!(sigma_range[0] > 0.0) || sigma_range[1] < sigma_range[0] || mu_range[1] < mu_range[0])
        throw PreconditionError("invalid phase-grid ranges");
    PhaseGrid grid;
    grid.mu_axis = linspace(mu_range[0], mu_range[1], mu_resolution);
    grid.sigma_axis = linspace(sigma_range[0], sigma_range[1], sigma_resolution);
    grid.cells.resize(grid.mu_axis.size() * grid.sigma_axis.size());
    parallel_for(grid.cells.size(), [&](std::size_t idx) {
        const std::size_t i = idx / grid.mu_axis.size();
        const std::size_t j = idx % grid.mu_axis.size();
        const GaussianStepPolicy pol{grid.mu_axis[j], grid.sigma_axis[i]};
        PhaseCell& c = grid.cells[idx];
        c.mu = pol.mu;
        c.sigma = pol.sigma;
        c.delta_p = task.has_region("R") && task.has_region("L") ? delta_p(pol, task) : 0.0;
        c.label = classify(pol, task);
        c.complexity = gaussian_step_kl(pol, task.pi0);
        c.within_budget = c.complexity <= task.delta;
    });
    return grid;
}

double state_score(const GaussianStepPolicy& pol, const NavTask& task, const std::string& label) {
    const auto masses = region_masses(pol, task);
    const std::size_t x = label_index(task, label);
    if (x < masses.size()) return margin_of(masses, x);
    double best = -kInf;
    for (std::size_t y = 0; y < masses.size(); ++y) best = std::max(best, margin_of(masses, y));
    return -best;
}

namespace {

struct BestScore {
    double score;
    GaussianStepPolicy argmax;
    bool ok;
};

BestScore best_score(const NavControlProblem& problem, const GaussianStepPolicy& pol0, const std::string& label,
                     double budget, const GaussianStepPolicy& warm, bool wide) {
    const NavTask& task = problem.task();
    const Policy base = NavControlProblem::encode(pol0);
    if (budget <= 0.0) return {state_score(pol0, task, label), pol0, true};
    std::vector<Policy> starts = wide ? problem.starts(base) : std::vector<Policy>{problem.to_free(base)};
    starts.push_back(problem.to_free(NavControlProblem::encode(warm)));
    const ApproachResult r = minimize_within_budget(
        problem, base,
        [&](std::span<const double> p) { return -state_score(NavControlProblem::decode(p), task, label); }, budget,
        starts);
    BestScore out{-r.distance, NavControlProblem::decode(r.policy), r.converged};
    // The warm start stays feasible for any larger budget.
    if (gaussian_step_kl(warm, pol0) <= budget) {
        const double w = state_score(warm, task, label);
        if (w > out.score) out = {w, warm, out.ok};
    }
    return out;
}

std::vector<CurvePoint> curve_for(const NavControlProblem& problem, const GaussianStepPolicy& pol0,
                                  const std::string& label, const std::vector<double>& budgets) {
    std::vector<CurvePoint> out;
    GaussianStepPolicy warm = pol0;
    for (double c : budgets) {
        const BestScore b = best_score(problem, pol0, label, c, warm, true);
        warm = b.argmax;
        out.push_back({label, c, b.score, b.argmax, b.ok});
    }
    return out;
}

} // namespace

std::vector<CurvePoint> tradeoff_curves(const NavTask& task, const GaussianStepPolicy& pol0, double delta_max,
                                        std::size_t steps, const std::vector<std::string>& labels) {
    if (!(delta_max >= 0.0) || steps < 1) throw PreconditionError("tradeoff curves need delta_max >= 0 and steps >= 1");
    const NavControlProblem problem(task);
    const auto names = labels.empty() ? default_labels(task) : labels;
    for (const auto& n : names) label_index(task, n);
    const auto budgets = linspace(0.0, delta_max, steps + 1);
    std::vector<std::vector<CurvePoint>> curves(names.size());
    parallel_for(names.size(), [&](std::size_t i) { curves[i] = curve_for(problem, pol0, names[i], budgets); });
    std::vector<CurvePoint> out;
    for (auto& c : curves) out.insert(out.end(), c.begin(), c.end());
    return out;
}

std::vector<GranularityPoint> granularity_curves(const NavTask& task, const GaussianStepPolicy& pol0,
                                                 const std::vector<double>& epsilons, double delta_max,
                                                 std::size_t steps, const std::vector<std::string>& labels) {
    if (!(delta_max >= 0.0) || steps < 1) throw PreconditionError("granularity curves need delta_max >= 0 and steps >= 1");
    for (double e : epsilons)
        if (!(e > 0.0 && e < 1.0)) throw PreconditionError("epsilon values must lie in (0, 1)");
    const NavControlProblem problem(task);
    const auto names = labels.empty() ? default_labels(task) : labels;
    for (const auto& n : names) label_index(task, n);
    const auto budgets = linspace(0.0, delta_max, steps + 1);

    std::vector<std::vector<GranularityPoint>> rows(names.size());
    parallel_for(names.size(), [&](std::size_t li) {
        const std::string& name = names[li];
        const auto curve = curve_for(problem, pol0, name, budgets);
        for (double eps : epsilons) {
            // S_0 holds when the score exceeds -epsilon, a region state when it
            // reaches epsilon.
            auto reached = [&](double score) { return name == kNeutral ? score > -eps : score >= eps; };
            GranularityPoint point{name, eps, kInf, false};
            std::size_t hit = 0;
            while (hit < curve.size() && !reached(curve[hit].score)) ++hit;
            if (hit == curve.size()) {
                rows[li].push_back(point);
                continue;
            }
            point.reachable = true;
            if (hit == 0) {
                point.complexity = 0.0;
                rows[li].push_back(point);
                continue;
            }
            double lo = curve[hit - 1].budget;
            double hi = curve[hit].budget;
            GaussianStepPolicy warm = curve[hit - 1].argmax;
            while (hi - lo > 1e-5 * std::max(1.0, hi)) {
                const double mid = 0.5 * (lo + hi);
                const BestScore b = best_score(problem, pol0, name, mid, warm, false);
                if (reached(b.score)) {
                    hi = mid;
                } else {
                    lo = mid;
                    warm = b.argmax;
                }
            }
            point.complexity = hi;
            rows[li].push_back(point);
        }
    });
    std::vector<GranularityPoint> out;
    for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    return out;
}

namespace {

std::string join_states(const ControlProblem& problem, const std::vector<int>& ids) {
    std::string out;
    for (int id : ids) out += (out.empty() ? "" : " ") + problem.state_name(id);
    return out.empty() ? "none" : out;
}

} // namespace

ScenarioReport run_goal_shift_scenario(const NavTask& base, const ScenarioSettings& settings) {
    validate(base);
    ScenarioReport out;
    out.base = base;
    const Policy pi0 = NavControlProblem::encode(base.pi0);

    const NavControlProblem base_problem(base);
    out.base_reachability = find_reachable_states(base_problem, pi0, base.delta);
    out.stages.push_back({1, "base representation controllable", out.base_reachability.complete(),
                          "unreachable: " + join_states(base_problem, out.base_reachability.unreachable)});

    out.shifted = base;
    bool shifted_ok = false;
    std::string detail;
    for (auto& r : out.shifted.regions)
        if (r.name == settings.shifted_region) {
            std::ostringstream d;
            d << r.name << " center " << r.center << " -> " << settings.shifted_center;
            r.center = settings.shifted_center;
            detail = d.str();
            shifted_ok = true;
        }
    if (!shifted_ok) throw PreconditionError("unknown region " + settings.shifted_region);
    validate(out.shifted);
    out.stages.push_back({2, "goal shift", true, detail});

    auto shifted_problem = std::make_shared<NavControlProblem>(out.shifted);
    const int target = shifted_problem->state_id(state_label(settings.shifted_region));
    out.shifted_reachability = find_reachable_states(*shifted_problem, pi0, base.delta);
    out.stages.push_back({3, "shifted target unreachable", !out.shifted_reachability.reaches(target),
                          "unreachable: " + join_states(*shifted_problem, out.shifted_reachability.unreachable)});

    LearnSettings learn;
    learn.max_rounds = settings.max_rounds;
    learn.reanchor = settings.reanchor;
    out.learned = learn_controllable_representation(shifted_problem, pi0, base.delta, base.epsilon, learn);
    {
        std::ostringstream d;
        d << out.learned.splits.size() << " split(s)";
        for (const auto& f : out.learned.split_failures) d << "; " << f;
        out.stages.push_back({4, "one intermediate state inserted", out.learned.splits.size() == 1, d.str()});
    }

    const auto& final_problem = dynamic_cast<const NavControlProblem&>(*out.learned.problem);
    out.final_task = final_problem.task();
    std::size_t longest = 0;
    for (const auto& [id, w] : out.learned.report.witnesses) longest = std::max(longest, w.updates());
    {
        std::ostringstream d;
        d << "unreachable: " << join_states(final_problem, out.learned.report.unreachable)
          << "; longest chain " << longest << " update(s); " << out.learned.violations.size() << " violation(s)";
        const bool ok = out.learned.controllable && out.learned.violations.empty() && longest <= settings.max_chain &&
                        out.final_task.regions.size() == base.regions.size() + 1;
        out.stages.push_back({5, "refined representation controllable", ok, d.str()});
    }
    out.passed = std::all_of(out.stages.begin(), out.stages.end(), [](const ScenarioStage& s) { return s.passed; });
    return out;
}

} // namespace telic::nav
