// Command-line front end: one subcommand per experiment kind, plus `list`
// and `validate`. Outputs are deterministic functions of (config, seed); the
// manifest next to each data file records the effective configuration.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tsc/harness.hpp"

namespace {

int resolve_workers(int flag_value) {
    // The env var overrides the flag; this is the only env-var knob.
    if (const char* env = std::getenv("TSC_LAB_WORKERS")) {
        try {
            int w = std::stoi(env);
            if (w >= 1) return w;
        } catch (...) {
        }
        std::cerr << "warning: ignoring malformed TSC_LAB_WORKERS\n";
    }
    return flag_value;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-stage contact process laboratory"};
    app.require_subcommand(1);

    // list
    CLI::App* list = app.add_subcommand("list", "list the available experiment kinds");

    // validate
    std::string validate_path;
    CLI::App* validate =
        app.add_subcommand("validate", "parse a config and print its normalized echo");
    validate->add_option("config", validate_path, "config file path")->required();

    // experiment subcommands
    struct Common {
        std::string config;
        std::string out;
        std::string format;
        std::int64_t seed = -1;
        int workers = 1;
        bool has_seed = false;
    };
    std::vector<std::pair<CLI::App*, std::shared_ptr<Common>>> runs;
    for (const auto& [kind, desc] : tsc::list_experiments()) {
        auto common = std::make_shared<Common>();
        CLI::App* sub = app.add_subcommand(kind, desc);
        sub->add_option("--config", common->config, "config file (flat key = value)");
        sub->add_option("--out", common->out, "output path prefix");
        sub->add_option("--format", common->format, "data format: csv or json");
        sub->add_option("--seed", common->seed, "master seed override");
        sub->add_option("--workers", common->workers, "worker threads (env TSC_LAB_WORKERS overrides)");
        runs.emplace_back(sub, common);
    }

    CLI11_PARSE(app, argc, argv);

    if (list->parsed()) {
        for (const auto& [kind, desc] : tsc::list_experiments()) {
            std::cout << kind << "\t" << desc << "\n";
        }
        return 0;
    }
    if (validate->parsed()) {
        try {
            tsc::ExperimentConfig cfg = tsc::parse_config_file(validate_path);
            std::cout << tsc::validate_config(cfg);
            return 0;
        } catch (const tsc::ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        }
    }

    for (const auto& [sub, common] : runs) {
        if (!sub->parsed()) continue;
        tsc::ExperimentConfig cfg;
        try {
            if (!common->config.empty()) {
                cfg = tsc::parse_config_file(common->config);
                if (!cfg.kind.empty() && cfg.kind != sub->get_name()) {
                    std::cerr << "config error: experiment: config says '" << cfg.kind
                              << "' but the subcommand is '" << sub->get_name() << "'\n";
                    return 2;
                }
            }
            cfg.kind = sub->get_name();
        } catch (const tsc::ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        }
        tsc::RunOptions opts;
        if (sub->count("--seed")) {
            opts.seed_override = static_cast<std::uint64_t>(common->seed);
        }
        opts.out_path = common->out;
        opts.format = common->format;
        opts.workers = resolve_workers(common->workers);
        return tsc::run_experiment(cfg, opts);
    }
    return 1;
}
