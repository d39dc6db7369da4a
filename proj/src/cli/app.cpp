#include "telic/cli.hpp"

#include "telic/error.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

namespace telic::cli {

namespace {

int report_violations(const std::vector<Violation>& violations) {
    std::cerr << "config has " << violations.size() << " violation(s):\n";
    for (const auto& v : violations) std::cerr << "  " << v.field << ": " << v.message << "\n";
    return kExitConfig;
}

ConfigCheck load(const std::string& path, const Overrides& overrides) {
    return check_config(read_config(path), overrides);
}

int run_command(const std::string& config_path, const Overrides& overrides) {
    const ConfigCheck check = load(config_path, overrides);
    if (!check.violations.empty()) return report_violations(check.violations);
    const RunConfig& cfg = check.config;
    if (cfg.output.empty()) return report_violations({{"output", "is required (set it in the config or pass --out)"}});

    const auto start = std::chrono::steady_clock::now();
    const BenchResult result = run_bench(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_outputs(cfg, result, cfg.output, wall);

    std::cout << cfg.bench << ": " << result.status << ", " << result.artifacts.size() << " artifact(s) in "
              << cfg.output << " (" << wall << " s)\n";
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    return kExitOk;
}

} // namespace

int main_entry(int argc, char** argv) {
    CLI::App app{"telic: goal-relative experience learning benches"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    std::string units;

    auto* run = app.add_subcommand("run", "run a bench and write CSV artifacts with a manifest");
    run->add_option("--config", config_path, "JSON config file")->required();
    auto* out_opt = run->add_option("--out", out, "output directory (overrides the config)");
    auto* seed_opt = run->add_option("--seed", seed, "random seed (overrides the config)");
    auto* units_opt = run->add_option("--units", units, "nats or bits (overrides the config)");

    auto* validate = app.add_subcommand("validate", "check a config without running it");
    validate->add_option("--config", config_path, "JSON config file")->required();
    auto* vunits_opt = validate->add_option("--units", units, "nats or bits (overrides the config)");

    auto* list = app.add_subcommand("list-benches", "list the available benches");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (list->parsed()) {
            for (const auto& b : bench_names()) std::cout << b << "\t" << bench_summary(b) << "\n";
            return kExitOk;
        }
        Overrides overrides;
        if (*units_opt || *vunits_opt) overrides.units = units;
        if (run->parsed()) {
            if (*out_opt) overrides.output = out;
            if (*seed_opt) overrides.seed = seed;
            return run_command(config_path, overrides);
        }
        const ConfigCheck check = load(config_path, overrides);
        if (!check.violations.empty()) return report_violations(check.violations);
        std::cout << "config ok: bench " << check.config.bench << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const PreconditionError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ShapeError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}

} // namespace telic::cli
