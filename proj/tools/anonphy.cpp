// anonphy command-line front end: runs preset or file-defined experiments and
// writes CSV, manifest and optional SVG artifacts.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anonphy/anonphy.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitFailures = 3;

struct RunArgs {
    std::string target;
    std::string config;
    std::string out = "results";
    long long seed = -1;
    int blocks = 0;
    int jobs = 1;
    bool fast = false;
    bool plots = false;
    bool quiet = false;
};

// Leftover "--key value" / "--key=value" pairs become config overrides.
void apply_overrides(anonphy::Experiment& e, const std::vector<std::string>& extras) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
        std::string tok = extras[i];
        if (tok.rfind("--", 0) != 0)
            throw anonphy::ConfigError("command line", 0, "unexpected argument '" + tok + "'");
        tok = tok.substr(2);
        std::string key, value;
        if (const auto eq = tok.find('='); eq != std::string::npos) {
            key = tok.substr(0, eq);
            value = tok.substr(eq + 1);
        } else {
            if (i + 1 >= extras.size())
                throw anonphy::ConfigError("command line", 0, "missing value for --" + tok);
            key = tok;
            value = extras[++i];
        }
        try {
            anonphy::set_key(e, key, value);
        } catch (const std::invalid_argument& err) {
            throw anonphy::ConfigError("command line", 0, std::string(err.what()) + " (--" + key + ")");
        }
    }
}

int run_command(const RunArgs& a, const std::vector<std::string>& extras, const std::vector<std::string>& argv) {
    anonphy::Experiment e;
    try {
        if (!a.config.empty() && !a.target.empty())
            throw anonphy::ConfigError("command line", 0, "give either a preset or --config, not both");
        if (!a.config.empty()) {
            e = anonphy::load_experiment_file(a.config);
            if (a.fast) std::cerr << "note: --fast ignored with --config (set `fast = true` next to `preset`)\n";
        } else if (!a.target.empty()) {
            try {
                e = anonphy::make_preset(a.target, a.fast);
            } catch (const std::invalid_argument& err) {
                throw anonphy::ConfigError("command line", 0, err.what());
            }
        } else {
            throw anonphy::ConfigError("command line", 0, "missing preset name or --config path");
        }
        apply_overrides(e, extras);
        if (a.seed >= 0) {
            e.base.seed = static_cast<std::uint64_t>(a.seed);
        } else if (!e.seed_explicit) {
            if (const char* env = std::getenv("ANONPHY_SEED"); env && *env) {
                try {
                    anonphy::set_key(e, "seed", env);
                } catch (const std::invalid_argument& err) {
                    throw anonphy::ConfigError("ANONPHY_SEED", 0, err.what());
                }
            }
        }
        if (a.blocks > 0) e.base.n_blocks = a.blocks;
        anonphy::validate_experiment(e);
    } catch (const anonphy::ConfigError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitConfig;
    }

    anonphy::SweepOptions opt;
    opt.jobs = a.jobs;
    opt.keep_records = e.name.rfind("isa-convergence", 0) == 0;
    if (!a.quiet) {
        opt.progress = [](long done, long total) {
            std::cerr << "\r  " << done << "/" << total << " blocks" << std::flush;
            if (done == total) std::cerr << "\n";
        };
    }

    std::cerr << "running " << e.name << " (seed " << e.base.seed << ", " << e.base.n_blocks << " blocks/point)\n";
    const anonphy::ExperimentRun run = anonphy::run_experiment(e, opt);
    for (const auto& path : anonphy::write_outputs(run, a.out, a.plots, argv)) std::cout << path.string() << "\n";

    std::cerr << "done in " << run.wall_seconds << " s, " << run.failed_blocks << "/" << run.total_blocks
              << " blocks lost to solver failures\n";
    if (run.over_failure_budget()) {
        std::cerr << "error: solver failures exceed the budget of " << e.base.failure_budget * 100.0 << "%\n";
        return kExitFailures;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physical-layer anonymous communication simulator"};
    app.set_version_flag("--version", ANONPHY_VERSION);
    app.require_subcommand(1);

    RunArgs args;
    auto* run = app.add_subcommand("run", "Run a preset or a config-file experiment");
    run->add_option("preset", args.target, "Preset name (see `anonphy list`)");
    run->add_option("--config", args.config, "Experiment config file (INI-style sections of key = value)");
    run->add_option("--seed", args.seed, "Master seed (falls back to ANONPHY_SEED, then the config)")
        ->check(CLI::NonNegativeNumber);
    run->add_option("--blocks", args.blocks, "Blocks per sweep point")->check(CLI::PositiveNumber);
    run->add_option("--jobs", args.jobs, "Worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", args.out, "Output directory")->capture_default_str();
    run->add_flag("--fast", args.fast, "Use the small-array variant of a preset");
    run->add_flag("--plots", args.plots, "Also write DER/SER plots as SVG");
    run->add_flag("-q,--quiet", args.quiet, "No progress output");
    run->allow_extras();
    run->footer("Any other --key value pair overrides the configuration field of the same name,\n"
                "e.g. --n_blocks 100 --precoders [ISA,SVD] --snr_grid [0,20].");

    auto* list = app.add_subcommand("list", "List the built-in presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        if (code == 0) return kExitOk;
        const bool bad_value = dynamic_cast<const CLI::ValidationError*>(&err) != nullptr ||
                               dynamic_cast<const CLI::ConversionError*>(&err) != nullptr;
        return bad_value ? kExitConfig : kExitUsage;
    }

    if (*list) {
        for (const auto& name : anonphy::preset_names()) {
            const auto e = anonphy::make_preset(name);
            std::cout << name << "  (" << anonphy::to_string(e.base.scenario) << ", " << e.base.n_r << "x"
                      << e.base.n_t << ", axis " << anonphy::to_string(e.axis.kind) << ")\n";
        }
        return kExitOk;
    }
    try {
        return run_command(args, run->remaining(), std::vector<std::string>(argv, argv + argc));
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitUsage;
    }
}
