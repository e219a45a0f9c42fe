#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsc/errors.hpp"

namespace tsc {

// Flat key = value config, '#' comments, no nesting.
struct ExperimentConfig {
    std::string kind;
    std::map<std::string, std::string> kv;  // without the 'experiment' key
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

struct RunOptions {
    std::optional<std::uint64_t> seed_override;
    std::string out_path;         // data written to <out>.csv / <out>.json etc.
    std::string format = "csv";   // csv | json
    int workers = 1;
};

// Experiment kinds with one-line descriptions, in listing order.
std::vector<std::pair<std::string, std::string>> list_experiments();

// Parses and applies defaults without running; returns the normalized echo
// (sorted key = value lines, defaults included). Throws ConfigError.
std::string validate_config(const ExperimentConfig& cfg);

// Runs the experiment, writes data + manifest files, returns the exit code:
// 0 ok, 2 config error, 3 gate failure, 4 budget exceeded, 5 domain/size
// errors, 1 anything else. Error text goes to stderr.
int run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

}  // namespace tsc
