#include "telic/cli.hpp"

#include "telic/error.hpp"
#include "telic/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace telic::cli {

using json = nlohmann::json;

std::vector<std::string> bench_names() {
    return {"bandit", "nav-phase", "nav-scenario", "nav-curves", "controllability-toy"};
}

std::string bench_summary(const std::string& bench) {
    if (bench == "bandit") return "two-armed bandit telic gradient descent: bandit_trace.csv, bandit_summary.csv";
    if (bench == "nav-phase")
        return "random-walk phase grids and trajectories: phase_grid.csv, phase_grid_wide.csv, trajectories.csv";
    if (bench == "nav-scenario")
        return "goal shift and state splitting: scenario_report.csv, reachability.csv, splits.csv, witnesses.csv, "
               "regions.csv, phase_grid_{base,shifted,final}.csv";
    if (bench == "nav-curves") return "complexity tradeoffs: tradeoff_curves.csv, granularity_curves.csv";
    if (bench == "controllability-toy")
        return "tabular representation learning: reachability.csv, splits.csv, witnesses.csv, states.csv";
    throw ConfigError("unknown bench '" + bench + "'");
}

json read_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    if (!in.good() && !in.eof()) throw IoError("error reading config file " + path.string());
    try {
        return json::parse(text.str());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

namespace {

struct Range {
    double lo = -kInf;
    double hi = kInf;
    bool lo_open = false;
    bool hi_open = false;

    bool contains(double v) const {
        return (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
    }

    std::string text() const {
        std::ostringstream out;
        out << (lo_open ? '(' : '[') << lo << ", " << hi << (hi_open ? ')' : ']');
        return out.str();
    }
};

const Range kAny{-kInf, kInf, true, true};
const Range kPositive{0.0, kInf, true, true};
const Range kNonnegative{0.0, kInf, false, true};
const Range kUnitOpen{0.0, 1.0, true, true};
const Range kUnitClosed{0.0, 1.0, false, false};

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

class Checker {
public:
    std::vector<Violation> violations;

    void fail(const std::string& field, const std::string& message) { violations.push_back({field, message}); }

    /// False (with a violation) unless j is an object; reports unknown keys.
    bool object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!j.is_object()) {
            fail(path, "must be an object");
            return false;
        }
        for (const auto& [key, value] : j.items()) {
            const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
            if (!known) fail(join(path, key), "unknown key");
        }
        return true;
    }

    bool number(const json& obj, const std::string& path, const char* key, double& dst, const Range& range) {
        if (!obj.contains(key)) return false;
        const json& v = obj.at(key);
        const std::string field = join(path, key);
        if (!v.is_number()) {
            fail(field, "must be a number");
            return false;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x) || !range.contains(x)) {
            fail(field, "must lie in " + range.text());
            return false;
        }
        dst = x;
        return true;
    }

    template <typename Int>
    bool integer(const json& obj, const std::string& path, const char* key, Int& dst, long long lo, long long hi) {
        if (!obj.contains(key)) return false;
        const json& v = obj.at(key);
        const std::string field = join(path, key);
        if (!v.is_number_integer()) {
            fail(field, "must be an integer");
            return false;
        }
        const long long x = v.is_number_unsigned() && v.get<unsigned long long>() > 9'000'000'000'000'000'000ull
                                ? hi + 1
                                : v.get<long long>();
        if (x < lo || x > hi) {
            fail(field, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
            return false;
        }
        dst = static_cast<Int>(x);
        return true;
    }

    bool boolean(const json& obj, const std::string& path, const char* key, bool& dst) {
        if (!obj.contains(key)) return false;
        if (!obj.at(key).is_boolean()) {
            fail(join(path, key), "must be true or false");
            return false;
        }
        dst = obj.at(key).get<bool>();
        return true;
    }

    bool text(const json& obj, const std::string& path, const char* key, std::string& dst,
              const std::vector<std::string>& choices = {}) {
        if (!obj.contains(key)) return false;
        const std::string field = join(path, key);
        if (!obj.at(key).is_string()) {
            fail(field, "must be a string");
            return false;
        }
        const std::string v = obj.at(key).get<std::string>();
        if (!choices.empty() && std::find(choices.begin(), choices.end(), v) == choices.end()) {
            std::string list;
            for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
            fail(field, "must be one of: " + list);
            return false;
        }
        dst = v;
        return true;
    }

    bool pair(const json& obj, const std::string& path, const char* key, std::array<double, 2>& dst,
              const Range& range) {
        if (!obj.contains(key)) return false;
        const json& v = obj.at(key);
        const std::string field = join(path, key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            fail(field, "must be a two-element array [low, high]");
            return false;
        }
        const double a = v[0].get<double>();
        const double b = v[1].get<double>();
        if (!range.contains(a) || !range.contains(b)) {
            fail(field, "bounds must lie in " + range.text());
            return false;
        }
        if (!(a < b)) {
            fail(field, "low must be below high");
            return false;
        }
        dst = {a, b};
        return true;
    }

    void policy(const json& obj, const std::string& path, nav::GaussianStepPolicy& dst) {
        if (!object(obj, path, {"mu", "sigma"})) return;
        number(obj, path, "mu", dst.mu, kAny);
        number(obj, path, "sigma", dst.sigma, kPositive);
    }

    void grid(const json& obj, const std::string& path, GridSpec& g) {
        if (!object(obj, path, {"mu_range", "sigma_range", "mu_resolution", "sigma_resolution"})) return;
        pair(obj, path, "mu_range", g.mu_range, kAny);
        pair(obj, path, "sigma_range", g.sigma_range, kPositive);
        integer(obj, path, "mu_resolution", g.mu_resolution, 2, 2000);
        integer(obj, path, "sigma_resolution", g.sigma_resolution, 2, 2000);
    }

    void task(const json& obj, const std::string& path, nav::NavTask& t, double delta_scale) {
        if (!object(obj, path, {"horizon", "regions", "epsilon", "delta", "pi0", "order", "split_radius"})) return;
        const std::size_t before = violations.size();
        integer(obj, path, "horizon", t.horizon, 1, 100000);
        number(obj, path, "epsilon", t.epsilon, kUnitOpen);
        if (number(obj, path, "delta", t.delta, kNonnegative)) t.delta *= delta_scale;
        else t.delta *= 1.0;
        number(obj, path, "split_radius", t.split_radius, kPositive);
        if (obj.contains("pi0")) policy(obj.at("pi0"), join(path, "pi0"), t.pi0);
        if (obj.contains("regions")) {
            const json& rs = obj.at("regions");
            const std::string field = join(path, "regions");
            if (!rs.is_array() || rs.empty()) {
                fail(field, "must be a nonempty array of regions");
            } else {
                t.regions.clear();
                for (std::size_t i = 0; i < rs.size(); ++i) {
                    const std::string rp = field + "[" + std::to_string(i) + "]";
                    nav::Region r;
                    if (!object(rs[i], rp, {"name", "center", "radius"})) continue;
                    if (!text(rs[i], rp, "name", r.name)) fail(join(rp, "name"), "is required");
                    else if (r.name.empty() || r.name.find_first_of(", \"") != std::string::npos)
                        fail(join(rp, "name"), "must be nonempty without commas, spaces or quotes");
                    if (!number(rs[i], rp, "center", r.center, kAny)) {
                        if (!rs[i].contains("center")) fail(join(rp, "center"), "is required");
                    }
                    number(rs[i], rp, "radius", r.radius, kPositive);
                    t.regions.push_back(r);
                }
                if (!obj.contains("order")) {
                    // Regions left of the start rank below S_0, the rest above.
                    std::vector<nav::Region> sorted = t.regions;
                    std::sort(sorted.begin(), sorted.end(),
                              [](const auto& a, const auto& b) { return a.center < b.center; });
                    t.order.clear();
                    bool neutral = false;
                    for (const auto& r : sorted) {
                        if (!neutral && r.center >= 0.0) {
                            t.order.push_back(nav::kNeutral);
                            neutral = true;
                        }
                        t.order.push_back(nav::state_label(r.name));
                    }
                    if (!neutral) t.order.push_back(nav::kNeutral);
                }
            }
        }
        if (obj.contains("order")) {
            const json& o = obj.at("order");
            if (!o.is_array() || !std::all_of(o.begin(), o.end(), [](const json& x) { return x.is_string(); })) {
                fail(join(path, "order"), "must be an array of state labels");
            } else {
                t.order = o.get<std::vector<std::string>>();
            }
        }
        if (violations.size() == before) {
            try {
                nav::validate(t);
            } catch (const Error& e) {
                fail(path, e.what());
            }
        }
    }
};

double delta_scale(const std::string& units) { return units == "bits" ? kNatsPerBit : 1.0; }

void check_bandit(Checker& c, const json& j, const std::string& path, BanditBench& b) {
    if (!c.object(j, path,
                  {"horizon", "p_left", "p_right", "target_wins", "tolerance", "eta", "iterations", "theta0",
                   "projection"}))
        return;
    c.integer(j, path, "horizon", b.params.horizon, 1, 9);
    c.number(j, path, "p_left", b.params.p_left, kUnitClosed);
    c.number(j, path, "p_right", b.params.p_right, kUnitClosed);
    c.number(j, path, "target_wins", b.target_wins, kNonnegative);
    c.number(j, path, "tolerance", b.tolerance, kNonnegative);
    c.number(j, path, "eta", b.eta, kPositive);
    c.integer(j, path, "iterations", b.iterations, 1, 10'000'000);
    c.number(j, path, "theta0", b.theta0, kUnitOpen);
    std::string mode;
    if (c.text(j, path, "projection", mode, {"reprojected", "frozen"}))
        b.mode = mode == "frozen" ? ProjectionMode::frozen : ProjectionMode::reprojected;
    if (b.target_wins > static_cast<double>(b.params.horizon))
        c.fail(join(path, "target_wins"), "must not exceed the horizon");
}

void check_phase(Checker& c, const json& j, const std::string& path, NavPhaseBench& b, double scale) {
    b.task.delta *= scale;
    if (!c.object(j, path, {"task", "grid", "wide_mu_range", "trajectory_count", "trajectory_policies"})) return;
    if (j.contains("task")) c.task(j.at("task"), join(path, "task"), b.task, scale);
    if (j.contains("grid")) c.grid(j.at("grid"), join(path, "grid"), b.grid);
    c.pair(j, path, "wide_mu_range", b.wide_mu_range, kAny);
    c.integer(j, path, "trajectory_count", b.trajectory_count, 0, 100000);
    if (j.contains("trajectory_policies")) {
        const json& ps = j.at("trajectory_policies");
        const std::string field = join(path, "trajectory_policies");
        if (!ps.is_array()) {
            c.fail(field, "must be an array of {mu, sigma}");
        } else {
            b.trajectory_policies.assign(ps.size(), {});
            for (std::size_t i = 0; i < ps.size(); ++i)
                c.policy(ps[i], field + "[" + std::to_string(i) + "]", b.trajectory_policies[i]);
        }
    }
}

void check_scenario(Checker& c, const json& j, const std::string& path, NavScenarioBench& b, double scale) {
    b.task.delta *= scale;
    if (!c.object(j, path, {"task", "shifted_region", "shifted_center", "max_rounds", "reanchor", "max_chain", "grid"}))
        return;
    if (j.contains("task")) c.task(j.at("task"), join(path, "task"), b.task, scale);
    c.text(j, path, "shifted_region", b.settings.shifted_region);
    c.number(j, path, "shifted_center", b.settings.shifted_center, kAny);
    c.integer(j, path, "max_rounds", b.settings.max_rounds, 1, 64);
    c.boolean(j, path, "reanchor", b.settings.reanchor);
    c.integer(j, path, "max_chain", b.settings.max_chain, 1, 64);
    if (j.contains("grid")) c.grid(j.at("grid"), join(path, "grid"), b.grid);
    if (!b.task.has_region(b.settings.shifted_region))
        c.fail(join(path, "shifted_region"), "names no region of the task");
}

void check_curves(Checker& c, const json& j, const std::string& path, NavCurvesBench& b, double scale) {
    b.task.delta *= scale;
    if (!c.object(j, path,
                  {"task", "pol0", "delta_max", "steps", "epsilons", "granularity_delta_max", "granularity_steps",
                   "states"}))
        return;
    if (j.contains("task")) c.task(j.at("task"), join(path, "task"), b.task, scale);
    b.pol0 = b.task.pi0;
    if (j.contains("pol0")) c.policy(j.at("pol0"), join(path, "pol0"), b.pol0);
    if (c.number(j, path, "delta_max", b.delta_max, kPositive)) b.delta_max *= scale;
    c.integer(j, path, "steps", b.steps, 1, 1000);
    if (c.number(j, path, "granularity_delta_max", b.granularity_delta_max, kPositive))
        b.granularity_delta_max *= scale;
    c.integer(j, path, "granularity_steps", b.granularity_steps, 1, 1000);
    if (j.contains("epsilons")) {
        const json& e = j.at("epsilons");
        const std::string field = join(path, "epsilons");
        if (!e.is_array() || e.empty()) {
            c.fail(field, "must be a nonempty array of numbers in (0, 1)");
        } else {
            b.epsilons.clear();
            for (std::size_t i = 0; i < e.size(); ++i) {
                if (!e[i].is_number() || !kUnitOpen.contains(e[i].get<double>()))
                    c.fail(field + "[" + std::to_string(i) + "]", "must lie in (0, 1)");
                else
                    b.epsilons.push_back(e[i].get<double>());
            }
        }
    }
    if (j.contains("states")) {
        const json& s = j.at("states");
        const std::string field = join(path, "states");
        if (!s.is_array() || !std::all_of(s.begin(), s.end(), [](const json& x) { return x.is_string(); })) {
            c.fail(field, "must be an array of state labels");
        } else {
            b.states = s.get<std::vector<std::string>>();
            for (const auto& label : b.states)
                if (std::find(b.task.order.begin(), b.task.order.end(), label) == b.task.order.end())
                    c.fail(field, "unknown state '" + label + "'");
        }
    }
}

void check_toy(Checker& c, const json& j, const std::string& path, ToyBench& b) {
    if (!c.object(j, path,
                  {"horizon", "p_left", "p_right", "feature", "bin_width", "split_epsilon", "delta", "theta0",
                   "max_rounds", "reanchor", "direction"}))
        return;
    c.integer(j, path, "horizon", b.params.horizon, 1, 9);
    c.number(j, path, "p_left", b.params.p_left, kUnitClosed);
    c.number(j, path, "p_right", b.params.p_right, kUnitClosed);
    c.number(j, path, "bin_width", b.bin_width, {0.0, 1.0, true, false});
    c.number(j, path, "split_epsilon", b.split_epsilon, {0.0, 1.0, true, false});
    c.number(j, path, "delta", b.delta, kNonnegative);
    c.number(j, path, "theta0", b.theta0, kUnitOpen);
    c.integer(j, path, "max_rounds", b.max_rounds, 1, 64);
    c.boolean(j, path, "reanchor", b.reanchor);
    std::string dir;
    if (c.text(j, path, "direction", dir, {"higher", "lower"}))
        b.direction = dir == "lower" ? Direction::lower_preferred : Direction::higher_preferred;
    if (j.contains("feature")) {
        const json& f = j.at("feature");
        const std::string fp = join(path, "feature");
        if (c.object(f, fp, {"name", "symbol", "count", "step"})) {
            c.text(f, fp, "name", b.feature);
            b.feature_numeric.clear();
            b.feature_symbols.clear();
            for (const char* key : {"count", "step"}) {
                double v = 0.0;
                if (c.number(f, fp, key, v, kNonnegative)) b.feature_numeric[key] = v;
            }
            std::string symbol;
            if (c.text(f, fp, "symbol", symbol)) b.feature_symbols["symbol"] = symbol;
        }
    }
    try {
        make_feature(b.feature, b.feature_numeric, b.feature_symbols, bandit::space());
    } catch (const Error& e) {
        c.fail(join(path, "feature"), e.what());
    }
}

} // namespace

ConfigCheck check_config(const json& input, const Overrides& overrides) {
    ConfigCheck out;
    Checker c;
    json doc = input;
    if (!doc.is_object()) {
        c.fail("<root>", "config must be a JSON object");
        out.violations = c.violations;
        return out;
    }
    if (overrides.seed) doc["seed"] = *overrides.seed;
    if (overrides.units) doc["units"] = *overrides.units;
    if (overrides.output) doc["output"] = *overrides.output;

    RunConfig& cfg = out.config;
    int version = 0;
    if (!doc.contains("schema_version")) c.fail("schema_version", "is required");
    else if (c.integer(doc, "", "schema_version", version, 0, 1'000'000) && version != kSchemaVersion)
        c.fail("schema_version", "unsupported version " + std::to_string(version) + "; expected " +
                                     std::to_string(kSchemaVersion));
    if (!doc.contains("bench")) c.fail("bench", "is required");
    c.text(doc, "", "bench", cfg.bench, bench_names());
    c.integer(doc, "", "seed", cfg.seed, 0, std::numeric_limits<long long>::max());
    c.text(doc, "", "units", cfg.units, {"nats", "bits"});
    c.text(doc, "", "output", cfg.output);
    if (cfg.output.empty() && doc.contains("output")) c.fail("output", "must be a nonempty path");

    std::set<std::string> allowed{"schema_version", "bench", "seed", "units", "output"};
    if (!cfg.bench.empty()) allowed.insert(cfg.bench);
    for (const auto& [key, value] : doc.items())
        if (!allowed.contains(key)) c.fail(key, "unknown key");

    const double scale = delta_scale(cfg.units);
    const json empty = json::object();
    const json& block = !cfg.bench.empty() && doc.contains(cfg.bench) ? doc.at(cfg.bench) : empty;
    if (cfg.bench == "bandit") {
        BanditBench b;
        check_bandit(c, block, "bandit", b);
        cfg.params = b;
    } else if (cfg.bench == "nav-phase") {
        NavPhaseBench b;
        check_phase(c, block, "nav-phase", b, scale);
        cfg.params = b;
    } else if (cfg.bench == "nav-scenario") {
        NavScenarioBench b;
        check_scenario(c, block, "nav-scenario", b, scale);
        cfg.params = b;
    } else if (cfg.bench == "nav-curves") {
        NavCurvesBench b;
        check_curves(c, block, "nav-curves", b, scale);
        cfg.params = b;
    } else if (cfg.bench == "controllability-toy") {
        if (cfg.units != "nats")
            c.fail("units", "controllability-toy takes delta in nats only; got " + cfg.units);
        ToyBench b;
        check_toy(c, block, "controllability-toy", b);
        cfg.params = b;
    }
    cfg.echo = doc;
    out.violations = c.violations;
    return out;
}

} // namespace telic::cli
