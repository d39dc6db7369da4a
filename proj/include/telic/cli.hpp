#pragma once
// Batch experiment driver: JSON configs, benches producing CSV tables, and
// atomic output with a hashed run manifest.

#include "telic/bandit.hpp"
#include "telic/csv.hpp"
#include "telic/nav.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace telic::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

struct BanditBench {
    bandit::Params params{0.8, 0.4, 4};
    double target_wins = 2.8;
    double tolerance = 0.0;
    double eta = 0.05;
    int iterations = 500;
    double theta0 = 0.5;
    ProjectionMode mode = ProjectionMode::reprojected;
};

struct GridSpec {
    std::array<double, 2> mu_range{-0.3, 0.3};
    std::array<double, 2> sigma_range{0.05, 2.0};
    std::size_t mu_resolution = 61;
    std::size_t sigma_resolution = 40;
};

struct NavPhaseBench {
    nav::NavTask task = nav::default_task();
    GridSpec grid;
    std::array<double, 2> wide_mu_range{-2.0, 2.0};
    std::size_t trajectory_count = 500;
    std::vector<nav::GaussianStepPolicy> trajectory_policies{{0.0, 1.0}, {0.1, 1.0}, {-0.1, 1.0}, {0.0, 0.3}};
};

struct NavScenarioBench {
    nav::NavTask task = nav::default_task();
    nav::ScenarioSettings settings;
    GridSpec grid;
};

struct NavCurvesBench {
    nav::NavTask task = nav::default_task();
    nav::GaussianStepPolicy pol0{0.0, 1.0};
    double delta_max = 1.0;
    std::size_t steps = 20;
    std::vector<double> epsilons{0.5, 0.3, 0.2, 0.1, 0.05, 0.02};
    double granularity_delta_max = 2.0;
    std::size_t granularity_steps = 20;
    std::vector<std::string> states; // empty: every region state
};

struct ToyBench {
    bandit::Params params{0.9, 0.1, 2};
    std::string feature = "observation-count-at-least";
    std::map<std::string, double> feature_numeric{{"count", 2.0}};
    std::map<std::string, std::string> feature_symbols{{"symbol", "1"}};
    double bin_width = 1.0 / 3.0;
    double split_epsilon = 0.1;
    double delta = 0.2;
    double theta0 = 0.5;
    int max_rounds = 8;
    bool reanchor = true;
    Direction direction = Direction::higher_preferred;
};

using BenchParams = std::variant<BanditBench, NavPhaseBench, NavScenarioBench, NavCurvesBench, ToyBench>;

struct RunConfig {
    std::string bench;
    std::uint64_t seed = 0;
    std::string units = "nats";
    std::string output;
    nlohmann::json echo; // the validated input with overrides applied
    BenchParams params;
};

struct Violation {
    std::string field;
    std::string message;
};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> units;
    std::optional<std::string> output;
};

struct ConfigCheck {
    std::vector<Violation> violations;
    RunConfig config; // meaningful only when violations is empty
};

std::vector<std::string> bench_names();
std::string bench_summary(const std::string& bench);

/// Parses and range-checks a config document, listing every violation.
ConfigCheck check_config(const nlohmann::json& doc, const Overrides& overrides = {});

/// Reads a file; throws IoError when unreadable and ConfigError on bad JSON.
nlohmann::json read_config(const std::filesystem::path& path);

struct Artifact {
    std::string name;
    std::string content;
};

struct BenchResult {
    std::vector<Artifact> artifacts;
    std::string status = "ok";
    std::vector<std::string> warnings;
};

/// Runs the configured bench. Throws NumericalError when a computation fails.
BenchResult run_bench(const RunConfig& config);

std::string sha256_hex(std::string_view data);

/// Writes the artifacts and manifest.json into a fresh temporary directory
/// next to `out`, then promotes them by rename. Throws IoError.
nlohmann::json write_outputs(const RunConfig& config, const BenchResult& result, const std::filesystem::path& out,
                             double wall_seconds);

/// Full command-line entry point; returns the process exit status.
int main_entry(int argc, char** argv);

} // namespace telic::cli
