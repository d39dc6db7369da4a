#include "telic/goal.hpp"

#include "telic/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace telic {

std::vector<double> FeatureSet::indicator(const ExperienceSpace& space, std::size_t n) const {
    const std::size_t count = space.checked_count(n);
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = contains(space.experience_at(i, n)) ? 1.0 : 0.0;
    return out;
}

FeatureSet all_experiences() {
    return {"all", [](const Experience&) { return true; }};
}

FeatureSet no_experiences() {
    return {"none", [](const Experience&) { return false; }};
}

FeatureSet observation_count_at_least(Symbol observation, std::size_t count) {
    return {"observation-count-at-least", [observation, count](const Experience& h) {
                return static_cast<std::size_t>(std::count_if(h.steps.begin(), h.steps.end(), [&](const Step& s) {
                           return s.observation == observation;
                       })) >= count;
            }};
}

FeatureSet action_count_at_least(Symbol action, std::size_t count) {
    return {"action-count-at-least", [action, count](const Experience& h) {
                return static_cast<std::size_t>(std::count_if(h.steps.begin(), h.steps.end(), [&](const Step& s) {
                           return s.action == action;
                       })) >= count;
            }};
}

FeatureSet observation_at_step(Symbol observation, std::size_t step) {
    return {"observation-at-step", [observation, step](const Experience& h) {
                return step < h.steps.size() && h.steps[step].observation == observation;
            }};
}

FeatureSet make_feature(const std::string& name, const std::map<std::string, double>& numeric,
                        const std::map<std::string, std::string>& symbols, const ExperienceSpace& space) {
    auto number = [&](const std::string& key) {
        auto it = numeric.find(key);
        if (it == numeric.end()) throw ConfigError("feature '" + name + "' needs numeric parameter '" + key + "'");
        if (it->second < 0 || it->second != std::floor(it->second))
            throw ConfigError("feature parameter '" + key + "' must be a nonnegative integer");
        return static_cast<std::size_t>(it->second);
    };
    auto symbol = [&](const std::string& key) {
        auto it = symbols.find(key);
        if (it == symbols.end()) throw ConfigError("feature '" + name + "' needs symbol parameter '" + key + "'");
        return it->second;
    };
    if (name == "all") return all_experiences();
    if (name == "none") return no_experiences();
    if (name == "observation-count-at-least")
        return observation_count_at_least(space.observation(symbol("symbol")), number("count"));
    if (name == "action-count-at-least") return action_count_at_least(space.action(symbol("symbol")), number("count"));
    if (name == "observation-at-step") return observation_at_step(space.observation(symbol("symbol")), number("step"));
    throw ConfigError("unknown feature '" + name + "'");
}

const TelicState& TelicRepresentation::state(int id) const {
    for (const auto& s : states)
        if (s.id == id) return s;
    throw PreconditionError("no telic state with id " + std::to_string(id));
}

const TelicState& TelicRepresentation::state_for(double value) const {
    for (const auto& s : states)
        if (s.contains(value)) return s;
    throw PreconditionError("value " + std::to_string(value) + " is not covered by the representation");
}

int TelicRepresentation::next_id() const {
    int top = -1;
    for (const auto& s : states) top = std::max(top, s.id);
    return top + 1;
}

double feature_mass(const ExperienceDistribution& p, const FeatureSet& phi) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0 && phi.contains(p.experience(i))) acc += p[i];
    return std::clamp(acc, 0.0, 1.0);
}

Preference prefers_masses(const Goal& g, double mass_a, double mass_b) {
    if (std::abs(mass_a - mass_b) <= g.epsilon) return Preference::equivalent;
    const bool a_higher = mass_a > mass_b;
    const bool a_wins = (g.direction == Direction::higher_preferred) == a_higher;
    return a_wins ? Preference::a_preferred : Preference::b_preferred;
}

Preference prefers(const Goal& g, const ExperienceDistribution& a, const ExperienceDistribution& b) {
    a.require_compatible(b);
    return prefers_masses(g, feature_mass(a, g.feature), feature_mass(b, g.feature));
}

TelicRepresentation bin_partition(const Goal& g) {
    if (!(g.epsilon > 0.0 && g.epsilon <= 1.0)) throw PreconditionError("epsilon must lie in (0, 1]");
    TelicRepresentation out{g, {}};
    const double inverse = 1.0 / g.epsilon;
    const auto bins = static_cast<int>(std::ceil(inverse - 1e-9));
    // Edges k/m are correctly rounded when eps = 1/m, so a mass of exactly 0.3
    // lands in the bin starting at 0.3.
    const bool reciprocal = std::abs(inverse - std::round(inverse)) < 1e-9;
    auto edge = [&](int k) { return reciprocal ? k / std::round(inverse) : k * g.epsilon; };
    for (int k = 0; k < bins; ++k) {
        TelicState s;
        s.id = k;
        s.lower = edge(k);
        s.upper = (k + 1 == bins) ? 1.0 : edge(k + 1);
        s.upper_closed = (k + 1 == bins);
        s.rank = g.direction == Direction::higher_preferred ? k : bins - 1 - k;
        s.name = "bin" + std::to_string(k);
        out.states.push_back(s);
    }
    return out;
}

const TelicState& assign_state(const ExperienceDistribution& p, const TelicRepresentation& repr) {
    return repr.state_for(feature_mass(p, repr.goal.feature));
}

void check_partition(const TelicRepresentation& repr) {
    if (repr.states.empty()) throw PreconditionError("representation has no states");
    auto sorted = repr.states;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.lower < b.lower; });
    if (sorted.front().lower != 0.0) throw PreconditionError("states do not cover 0");
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        if (sorted[i].upper_closed) throw PreconditionError("only the top state may be closed above");
        if (sorted[i].upper != sorted[i + 1].lower) throw PreconditionError("states overlap or leave a gap");
        if (!(sorted[i].lower < sorted[i].upper)) throw PreconditionError("empty state interval");
    }
    if (sorted.back().upper != 1.0 || !sorted.back().upper_closed) throw PreconditionError("states do not cover 1");
    std::set<int> ranks, ids;
    for (const auto& s : sorted) {
        ranks.insert(s.rank);
        ids.insert(s.id);
    }
    if (ranks.size() != sorted.size()) throw PreconditionError("state ranks are not a strict order");
    if (ids.size() != sorted.size()) throw PreconditionError("state ids are not distinct");
}

} // namespace telic
