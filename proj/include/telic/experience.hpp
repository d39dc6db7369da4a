#pragma once
// Experiences, tabular policies and environments, and exact or empirical
// distributions over fixed-length experiences.
//
// An experience of length n is a sequence of n steps, each an
// (observation, action) pair. Symbols are indices into the ordered alphabets of
// an ExperienceSpace. Within a step the temporal order is observation then
// action by default; StepOrder::action_first is used by benches where the
// observation is the outcome of the action taken in the same step.
//
// Canonical enumeration of H_n is odometer order over step codes, where the
// code of a step is observation * |A| + action (observation varies slowest
// within a step, the first step varies slowest overall).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace telic {

using Symbol = std::uint32_t;

struct Step {
    Symbol observation = 0;
    Symbol action = 0;

    auto operator<=>(const Step&) const = default;
};

struct Experience {
    std::vector<Step> steps;

    std::size_t length() const noexcept { return steps.size(); }
    auto operator<=>(const Experience&) const = default;
};

/// Interleaved symbol stream of a history prefix, in temporal order.
using History = std::vector<Symbol>;

enum class StepOrder { observation_first, action_first };

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

class ExperienceSpace {
public:
    ExperienceSpace(std::vector<std::string> observations, std::vector<std::string> actions,
                    StepOrder order = StepOrder::observation_first);

    std::size_t observation_count() const noexcept { return observations_.size(); }
    std::size_t action_count() const noexcept { return actions_.size(); }
    std::size_t step_codes() const noexcept { return observations_.size() * actions_.size(); }
    StepOrder order() const noexcept { return order_; }

    const std::vector<std::string>& observations() const noexcept { return observations_; }
    const std::vector<std::string>& actions() const noexcept { return actions_; }

    Symbol observation(const std::string& name) const;
    Symbol action(const std::string& name) const;

    /// |H_n| as a double so oversized spaces can be reported without overflow.
    double experience_count(std::size_t n) const;

    /// Throws SizingError when |H_n| exceeds cap.
    std::size_t checked_count(std::size_t n, std::uint64_t cap = kDefaultEnumerationCap) const;

    std::size_t index_of(const Experience& h) const;
    Experience experience_at(std::size_t index, std::size_t n) const;

    /// Throws ShapeError if a symbol lies outside the alphabets.
    void validate(const Experience& h) const;

    /// Temporal token stream of h truncated before token `stop`.
    History history_prefix(const Experience& h, std::size_t stop) const;

    std::string describe(const Experience& h) const;
    std::string describe_history(const History& prefix) const;

    bool operator==(const ExperienceSpace&) const = default;

private:
    std::vector<std::string> observations_;
    std::vector<std::string> actions_;
    StepOrder order_;
};

/// Map from history prefixes to conditional probability vectors, with an
/// optional history-independent default.
class ConditionalTable {
public:
    ConditionalTable(std::string name, std::size_t outcomes);

    void set(History prefix, std::vector<double> probs);
    void set_default(std::vector<double> probs);

    /// Throws UndefinedConditional naming the prefix when neither an entry nor a
    /// default exists.
    const std::vector<double>& at(const History& prefix, const ExperienceSpace& space) const;

    bool has(const History& prefix) const { return entries_.contains(prefix) || fallback_.has_value(); }
    std::size_t outcomes() const noexcept { return outcomes_; }
    const std::string& name() const noexcept { return name_; }

private:
    void check(const std::vector<double>& probs) const;

    std::string name_;
    std::size_t outcomes_;
    std::map<History, std::vector<double>> entries_;
    std::optional<std::vector<double>> fallback_;
};

/// pi(a_i | history up to the point of choosing a_i).
class TabularPolicy {
public:
    explicit TabularPolicy(ExperienceSpace space);

    /// History-independent action distribution.
    static TabularPolicy stationary(ExperienceSpace space, std::vector<double> probs);

    /// Fills every decision prefix up to `horizon` steps from `rule`.
    static TabularPolicy from_rule(ExperienceSpace space, std::size_t horizon,
                                   const std::function<std::vector<double>(const History&)>& rule);

    void set(History prefix, std::vector<double> probs) { table_.set(std::move(prefix), std::move(probs)); }
    const std::vector<double>& conditional(const History& prefix) const { return table_.at(prefix, space_); }
    const ExperienceSpace& space() const noexcept { return space_; }

private:
    ExperienceSpace space_;
    ConditionalTable table_;
};

/// e(o_i | history up to the point of emitting o_i).
class TabularEnvironment {
public:
    explicit TabularEnvironment(ExperienceSpace space);

    static TabularEnvironment stationary(ExperienceSpace space, std::vector<double> probs);

    static TabularEnvironment from_rule(ExperienceSpace space, std::size_t horizon,
                                        const std::function<std::vector<double>(const History&)>& rule);

    void set(History prefix, std::vector<double> probs) { table_.set(std::move(prefix), std::move(probs)); }
    const std::vector<double>& conditional(const History& prefix) const { return table_.at(prefix, space_); }
    const ExperienceSpace& space() const noexcept { return space_; }

private:
    ExperienceSpace space_;
    ConditionalTable table_;
};

/// Every history prefix at which the agent picks an action, for steps 1..horizon,
/// in canonical order.
std::vector<History> decision_prefixes(const ExperienceSpace& space, std::size_t horizon);

/// Every history prefix at which the environment emits an observation.
std::vector<History> emission_prefixes(const ExperienceSpace& space, std::size_t horizon);

/// Dense probability mass over H_n in canonical order.
class ExperienceDistribution {
public:
    /// Throws PreconditionError unless masses are nonnegative and sum to 1
    /// within 1e-9. Masses are never renormalized.
    ExperienceDistribution(ExperienceSpace space, std::size_t length, std::vector<double> mass);

    static ExperienceDistribution point_mass(ExperienceSpace space, const Experience& h);

    const ExperienceSpace& space() const noexcept { return space_; }
    std::size_t length() const noexcept { return length_; }
    std::size_t size() const noexcept { return mass_.size(); }
    std::span<const double> masses() const noexcept { return mass_; }
    double operator[](std::size_t index) const { return mass_[index]; }
    double probability(const Experience& h) const;
    Experience experience(std::size_t index) const { return space_.experience_at(index, length_); }

    /// Throws ShapeError unless both distributions live on the same H_n.
    void require_compatible(const ExperienceDistribution& other) const;

private:
    ExperienceSpace space_;
    std::size_t length_;
    std::vector<double> mass_;
};

inline constexpr double kNormalizationTolerance = 1e-9;

/// Chain-rule probability of h under the policy and environment.
double experience_probability(const TabularPolicy& policy, const TabularEnvironment& env,
                              const Experience& h);

/// P_pi over H_n by exhaustive enumeration.
ExperienceDistribution induced_distribution(const TabularPolicy& policy, const TabularEnvironment& env,
                                            std::size_t n,
                                            std::uint64_t cap = kDefaultEnumerationCap);

/// `count` i.i.d. experiences drawn step by step, without materializing P_pi.
std::vector<Experience> sample_experiences(const TabularPolicy& policy, const TabularEnvironment& env,
                                           std::size_t n, std::size_t count, std::uint64_t seed);

ExperienceDistribution empirical_distribution(const ExperienceSpace& space,
                                              std::span<const Experience> samples);

/// KL(P || Q) in nats; +inf when P is not absolutely continuous w.r.t. Q.
double kl_divergence(const ExperienceDistribution& p, const ExperienceDistribution& q);

double total_variation(const ExperienceDistribution& p, const ExperienceDistribution& q);

/// (1 - t) * P + t * Q.
ExperienceDistribution mixture(const ExperienceDistribution& p, const ExperienceDistribution& q, double t);

} // namespace telic
