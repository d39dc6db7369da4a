#include "telic/experience.hpp"

#include "telic/error.hpp"
#include "telic/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace telic {

namespace {

void check_probability_vector(const std::vector<double>& probs, std::size_t expected, const std::string& what) {
    if (probs.size() != expected)
        throw ShapeError(what + ": expected " + std::to_string(expected) + " entries, got " +
                         std::to_string(probs.size()));
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw PreconditionError(what + ": negative or non-finite entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kNormalizationTolerance)
        throw PreconditionError(what + ": entries sum to " + std::to_string(sum) + ", not 1");
}

Symbol lookup(const std::vector<std::string>& names, const std::string& name, const char* kind) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ShapeError(std::string("unknown ") + kind + " symbol '" + name + "'");
    return static_cast<Symbol>(it - names.begin());
}

// Walks every prefix of length < 2*horizon tokens and collects those at which
// the next token has the requested kind.
void collect_prefixes(const ExperienceSpace& space, std::size_t horizon, bool want_action, History& prefix,
                      std::vector<History>& out) {
    const std::size_t tokens = 2 * horizon;
    if (prefix.size() >= tokens) return;
    const bool action_first = space.order() == StepOrder::action_first;
    const bool next_is_action = (prefix.size() % 2 == 0) == action_first;
    if (next_is_action == want_action) out.push_back(prefix);
    const std::size_t width = next_is_action ? space.action_count() : space.observation_count();
    for (std::size_t s = 0; s < width; ++s) {
        prefix.push_back(static_cast<Symbol>(s));
        collect_prefixes(space, horizon, want_action, prefix, out);
        prefix.pop_back();
    }
}

} // namespace

ExperienceSpace::ExperienceSpace(std::vector<std::string> observations, std::vector<std::string> actions,
                                 StepOrder order)
    : observations_(std::move(observations)), actions_(std::move(actions)), order_(order) {
    if (observations_.empty() || actions_.empty()) throw ShapeError("alphabets must be nonempty");
    auto unique = [](std::vector<std::string> v) {
        std::sort(v.begin(), v.end());
        return std::adjacent_find(v.begin(), v.end()) == v.end();
    };
    if (!unique(observations_) || !unique(actions_)) throw ShapeError("alphabet symbols must be distinct");
}

Symbol ExperienceSpace::observation(const std::string& name) const { return lookup(observations_, name, "observation"); }

Symbol ExperienceSpace::action(const std::string& name) const { return lookup(actions_, name, "action"); }

double ExperienceSpace::experience_count(std::size_t n) const {
    return std::pow(static_cast<double>(step_codes()), static_cast<double>(n));
}

std::size_t ExperienceSpace::checked_count(std::size_t n, std::uint64_t cap) const {
    const double required = experience_count(n);
    if (required > static_cast<double>(cap)) {
        std::ostringstream msg;
        msg << "enumerating H_" << n << " needs " << required << " experiences, cap is " << cap;
        throw SizingError(msg.str(), required, static_cast<double>(cap));
    }
    return static_cast<std::size_t>(std::llround(required));
}

std::size_t ExperienceSpace::index_of(const Experience& h) const {
    validate(h);
    std::size_t index = 0;
    for (const Step& s : h.steps) index = index * step_codes() + s.observation * action_count() + s.action;
    return index;
}

Experience ExperienceSpace::experience_at(std::size_t index, std::size_t n) const {
    Experience h;
    h.steps.resize(n);
    for (std::size_t i = n; i-- > 0;) {
        const std::size_t code = index % step_codes();
        index /= step_codes();
        h.steps[i] = Step{static_cast<Symbol>(code / action_count()), static_cast<Symbol>(code % action_count())};
    }
    if (index != 0) throw ShapeError("experience index out of range");
    return h;
}

void ExperienceSpace::validate(const Experience& h) const {
    for (const Step& s : h.steps) {
        if (s.observation >= observation_count()) throw ShapeError("observation symbol outside alphabet");
        if (s.action >= action_count()) throw ShapeError("action symbol outside alphabet");
    }
}

History ExperienceSpace::history_prefix(const Experience& h, std::size_t stop) const {
    History out;
    out.reserve(stop);
    for (const Step& s : h.steps) {
        if (order_ == StepOrder::observation_first) {
            if (out.size() == stop) break;
            out.push_back(s.observation);
            if (out.size() == stop) break;
            out.push_back(s.action);
        } else {
            if (out.size() == stop) break;
            out.push_back(s.action);
            if (out.size() == stop) break;
            out.push_back(s.observation);
        }
    }
    return out;
}

std::string ExperienceSpace::describe(const Experience& h) const {
    std::string out;
    for (std::size_t i = 0; i < h.steps.size(); ++i) {
        if (i) out += ' ';
        out += '(' + observations_.at(h.steps[i].observation) + ',' + actions_.at(h.steps[i].action) + ')';
    }
    return out;
}

std::string ExperienceSpace::describe_history(const History& prefix) const {
    const bool action_first = order_ == StepOrder::action_first;
    std::string out;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (i) out += ',';
        const bool is_action = (i % 2 == 0) == action_first;
        const auto& names = is_action ? actions_ : observations_;
        out += prefix[i] < names.size() ? names[prefix[i]] : "?";
    }
    return out;
}

ConditionalTable::ConditionalTable(std::string name, std::size_t outcomes)
    : name_(std::move(name)), outcomes_(outcomes) {}

void ConditionalTable::check(const std::vector<double>& probs) const {
    check_probability_vector(probs, outcomes_, name_);
}

void ConditionalTable::set(History prefix, std::vector<double> probs) {
    check(probs);
    entries_[std::move(prefix)] = std::move(probs);
}

void ConditionalTable::set_default(std::vector<double> probs) {
    check(probs);
    fallback_ = std::move(probs);
}

const std::vector<double>& ConditionalTable::at(const History& prefix, const ExperienceSpace& space) const {
    auto it = entries_.find(prefix);
    if (it != entries_.end()) return it->second;
    if (fallback_) return *fallback_;
    throw UndefinedConditional(name_, space.describe_history(prefix));
}

TabularPolicy::TabularPolicy(ExperienceSpace space)
    : space_(std::move(space)), table_("policy", space_.action_count()) {}

TabularPolicy TabularPolicy::stationary(ExperienceSpace space, std::vector<double> probs) {
    TabularPolicy out(std::move(space));
    out.table_.set_default(std::move(probs));
    return out;
}

TabularPolicy TabularPolicy::from_rule(ExperienceSpace space, std::size_t horizon,
                                       const std::function<std::vector<double>(const History&)>& rule) {
    TabularPolicy out(std::move(space));
    for (History& prefix : decision_prefixes(out.space_, horizon)) {
        auto probs = rule(prefix);
        out.table_.set(std::move(prefix), std::move(probs));
    }
    return out;
}

TabularEnvironment::TabularEnvironment(ExperienceSpace space)
    : space_(std::move(space)), table_("environment", space_.observation_count()) {}

TabularEnvironment TabularEnvironment::stationary(ExperienceSpace space, std::vector<double> probs) {
    TabularEnvironment out(std::move(space));
    out.table_.set_default(std::move(probs));
    return out;
}

TabularEnvironment TabularEnvironment::from_rule(ExperienceSpace space, std::size_t horizon,
                                                 const std::function<std::vector<double>(const History&)>& rule) {
    TabularEnvironment out(std::move(space));
    for (History& prefix : emission_prefixes(out.space_, horizon)) {
        auto probs = rule(prefix);
        out.table_.set(std::move(prefix), std::move(probs));
    }
    return out;
}

std::vector<History> decision_prefixes(const ExperienceSpace& space, std::size_t horizon) {
    std::vector<History> out;
    History prefix;
    collect_prefixes(space, horizon, true, prefix, out);
    return out;
}

std::vector<History> emission_prefixes(const ExperienceSpace& space, std::size_t horizon) {
    std::vector<History> out;
    History prefix;
    collect_prefixes(space, horizon, false, prefix, out);
    return out;
}

ExperienceDistribution::ExperienceDistribution(ExperienceSpace space, std::size_t length, std::vector<double> mass)
    : space_(std::move(space)), length_(length), mass_(std::move(mass)) {
    const std::size_t expected = space_.checked_count(length_, std::max<std::uint64_t>(kDefaultEnumerationCap, mass_.size()));
    if (mass_.size() != expected)
        throw ShapeError("distribution over H_" + std::to_string(length_) + " needs " + std::to_string(expected) +
                         " masses, got " + std::to_string(mass_.size()));
    check_probability_vector(mass_, expected, "experience distribution");
}

ExperienceDistribution ExperienceDistribution::point_mass(ExperienceSpace space, const Experience& h) {
    const std::size_t n = h.length();
    std::vector<double> mass(space.checked_count(n), 0.0);
    mass[space.index_of(h)] = 1.0;
    return ExperienceDistribution(std::move(space), n, std::move(mass));
}

double ExperienceDistribution::probability(const Experience& h) const {
    if (h.length() != length_) throw ShapeError("experience length differs from distribution length");
    return mass_[space_.index_of(h)];
}

void ExperienceDistribution::require_compatible(const ExperienceDistribution& other) const {
    if (length_ != other.length_) throw ShapeError("distributions have different experience lengths");
    if (!(space_ == other.space_)) throw ShapeError("distributions use different alphabets");
}

double experience_probability(const TabularPolicy& policy, const TabularEnvironment& env, const Experience& h) {
    const ExperienceSpace& space = policy.space();
    if (!(space == env.space())) throw ShapeError("policy and environment use different alphabets");
    space.validate(h);
    const bool action_first = space.order() == StepOrder::action_first;
    double prob = 1.0;
    History prefix;
    prefix.reserve(2 * h.length());
    for (const Step& s : h.steps) {
        for (int half = 0; half < 2; ++half) {
            const bool is_action = (half == 0) == action_first;
            const Symbol sym = is_action ? s.action : s.observation;
            const auto& cond = is_action ? policy.conditional(prefix) : env.conditional(prefix);
            prob *= cond[sym];
            prefix.push_back(sym);
        }
    }
    return prob;
}

namespace {

struct Enumerator {
    const TabularPolicy& policy;
    const TabularEnvironment& env;
    const ExperienceSpace& space;
    std::size_t n;
    std::vector<double>& mass;
    History prefix;

    // Depth-first over steps; each leaf's canonical index is accumulated from
    // step codes so no experience needs to be re-encoded.
    void walk(std::size_t depth, std::size_t index, double prob) {
        if (depth == n) {
            mass[index] = prob;
            return;
        }
        const bool action_first = space.order() == StepOrder::action_first;
        const std::size_t na = space.action_count();
        const std::size_t no = space.observation_count();
        if (!action_first) {
            const auto& obs = env.conditional(prefix);
            for (std::size_t o = 0; o < no; ++o) {
                prefix.push_back(static_cast<Symbol>(o));
                const auto& act = policy.conditional(prefix);
                for (std::size_t a = 0; a < na; ++a) {
                    prefix.push_back(static_cast<Symbol>(a));
                    walk(depth + 1, index * space.step_codes() + o * na + a, prob * obs[o] * act[a]);
                    prefix.pop_back();
                }
                prefix.pop_back();
            }
        } else {
            const auto& act = policy.conditional(prefix);
            for (std::size_t a = 0; a < na; ++a) {
                prefix.push_back(static_cast<Symbol>(a));
                const auto& obs = env.conditional(prefix);
                for (std::size_t o = 0; o < no; ++o) {
                    prefix.push_back(static_cast<Symbol>(o));
                    walk(depth + 1, index * space.step_codes() + o * na + a, prob * act[a] * obs[o]);
                    prefix.pop_back();
                }
                prefix.pop_back();
            }
        }
    }
};

} // namespace

ExperienceDistribution induced_distribution(const TabularPolicy& policy, const TabularEnvironment& env, std::size_t n,
                                            std::uint64_t cap) {
    const ExperienceSpace& space = policy.space();
    if (!(space == env.space())) throw ShapeError("policy and environment use different alphabets");
    std::vector<double> mass(space.checked_count(n, cap), 0.0);
    Enumerator walker{policy, env, space, n, mass, {}};
    walker.walk(0, 0, 1.0);
    return ExperienceDistribution(space, n, std::move(mass));
}

std::vector<Experience> sample_experiences(const TabularPolicy& policy, const TabularEnvironment& env, std::size_t n,
                                           std::size_t count, std::uint64_t seed) {
    if (count == 0) throw PreconditionError("sample count must be at least 1");
    const ExperienceSpace& space = policy.space();
    if (!(space == env.space())) throw ShapeError("policy and environment use different alphabets");
    const bool action_first = space.order() == StepOrder::action_first;
    Rng rng(seed);
    std::vector<Experience> out;
    out.reserve(count);
    History prefix;
    for (std::size_t k = 0; k < count; ++k) {
        Experience h;
        h.steps.resize(n);
        prefix.clear();
        for (std::size_t i = 0; i < n; ++i) {
            for (int half = 0; half < 2; ++half) {
                const bool is_action = (half == 0) == action_first;
                const auto& cond = is_action ? policy.conditional(prefix) : env.conditional(prefix);
                const auto sym = static_cast<Symbol>(rng.discrete(cond));
                (is_action ? h.steps[i].action : h.steps[i].observation) = sym;
                prefix.push_back(sym);
            }
        }
        out.push_back(std::move(h));
    }
    return out;
}

ExperienceDistribution empirical_distribution(const ExperienceSpace& space, std::span<const Experience> samples) {
    if (samples.empty()) throw PreconditionError("empirical distribution needs at least one sample");
    const std::size_t n = samples.front().length();
    std::vector<double> counts(space.checked_count(n), 0.0);
    for (const Experience& h : samples) {
        if (h.length() != n) throw ShapeError("samples have mixed lengths");
        counts[space.index_of(h)] += 1.0;
    }
    const double total = static_cast<double>(samples.size());
    for (double& c : counts) c /= total;
    return ExperienceDistribution(space, n, std::move(counts));
}

double kl_divergence(const ExperienceDistribution& p, const ExperienceDistribution& q) {
    p.require_compatible(q);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double term = kl_term(p[i], q[i]);
        if (term == kInf) return kInf;
        acc += term;
    }
    return std::max(acc, 0.0);
}

double total_variation(const ExperienceDistribution& p, const ExperienceDistribution& q) {
    p.require_compatible(q);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return 0.5 * acc;
}

ExperienceDistribution mixture(const ExperienceDistribution& p, const ExperienceDistribution& q, double t) {
    p.require_compatible(q);
    if (!(t >= 0.0 && t <= 1.0)) throw PreconditionError("mixture weight must lie in [0, 1]");
    std::vector<double> mass(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) mass[i] = (1.0 - t) * p[i] + t * q[i];
    return ExperienceDistribution(p.space(), p.length(), std::move(mass));
}

} // namespace telic
