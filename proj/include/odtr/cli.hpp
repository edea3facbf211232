#pragma once

// Command-line driver: `simulate`, `fit` and `evaluate`, each reading a JSON
// run configuration. Exit status is 0 on success, 2 for configuration or
// input errors and 1 for anything else.

#include <iosfwd>
#include <string>

namespace odtr::cli {

struct Options {
    int threads = 1;
    bool full_scale = false;  // 1000 replications
    bool smoke = false;       // 20 replications
    bool negate_y = false;
};

int cmd_simulate(const std::string& config_path, const Options& opts, std::ostream& log);
int cmd_fit(const std::string& config_path, const Options& opts, std::ostream& log);
int cmd_evaluate(const std::string& config_path, const Options& opts, std::ostream& log);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace odtr::cli
