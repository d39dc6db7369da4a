#pragma once
// Goals as feature-mass preferences with finite sensitivity, and the telic
// state partitions they induce.

#include "telic/experience.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace telic {

/// A named subset of experiences, given as a membership predicate.
struct FeatureSet {
    std::string id;
    std::function<bool(const Experience&)> contains;

    /// Indicator of membership for every experience of H_n in canonical order.
    std::vector<double> indicator(const ExperienceSpace& space, std::size_t n) const;
};

/// Registry of named predicates usable from configuration files.
/// Known names: "all", "none", "observation-count-at-least" {symbol, count},
/// "action-count-at-least" {symbol, count}, "observation-at-step" {symbol, step}.
FeatureSet make_feature(const std::string& name, const std::map<std::string, double>& numeric,
                        const std::map<std::string, std::string>& symbols, const ExperienceSpace& space);

FeatureSet all_experiences();
FeatureSet no_experiences();
FeatureSet observation_count_at_least(Symbol observation, std::size_t count);
FeatureSet action_count_at_least(Symbol action, std::size_t count);
FeatureSet observation_at_step(Symbol observation, std::size_t step);

enum class Direction { higher_preferred, lower_preferred };

struct Goal {
    FeatureSet feature;
    double epsilon = 0.1;
    Direction direction = Direction::higher_preferred;
};

enum class Preference { a_preferred, b_preferred, equivalent };

/// One telic state: the distributions whose statistic lies in
/// [lower, upper) or [lower, upper] when upper_closed.
struct TelicState {
    int id = 0;
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
    bool upper_closed = false;
    int rank = 0;

    bool contains(double value) const noexcept {
        return value >= lower && (value < upper || (upper_closed && value == upper));
    }
};

/// A goal together with an ordered set of disjoint states covering [0, 1].
/// States are kept sorted by lower edge; ranks give the preference order.
struct TelicRepresentation {
    Goal goal;
    std::vector<TelicState> states;

    const TelicState& state(int id) const;
    const TelicState& state_for(double value) const;
    int next_id() const;
};

double feature_mass(const ExperienceDistribution& p, const FeatureSet& phi);

/// Raw epsilon-equivalence comparison of feature masses.
Preference prefers(const Goal& g, const ExperienceDistribution& a, const ExperienceDistribution& b);

/// Comparison on already computed masses.
Preference prefers_masses(const Goal& g, double mass_a, double mass_b);

/// Epsilon-width bins [k eps, (k+1) eps), top bin closed at 1.
TelicRepresentation bin_partition(const Goal& g);

const TelicState& assign_state(const ExperienceDistribution& p, const TelicRepresentation& repr);

/// Throws PreconditionError unless the states are disjoint, cover [0, 1] and
/// have distinct ranks and ids.
void check_partition(const TelicRepresentation& repr);

} // namespace telic
