#pragma once

// CSV ingestion, run-configuration parsing and report writers.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "odtr/core.hpp"
#include "odtr/simulation.hpp"

namespace odtr::io {

struct CsvOptions {
    bool negate_y = false;
};

struct IngestResult {
    Dataset data;
    // Y as read (after negation) maps to (Y - y_offset) / y_scale.
    double y_offset = 0.0;
    double y_scale = 1.0;
    std::vector<std::string> notes;
};

// Header row required. Column "A" holds 0/1, column "Y" a number; every other
// column is a covariate. Empty or "NA" covariate cells are replaced by the
// column median and flagged in an added "<name>_missing" column. Y already on
// [0, 1] is kept; otherwise it is min-max scaled. Throws DataError.
IngestResult parse_dataset_csv(std::istream& in, const CsvOptions& opts = {});
IngestResult read_dataset_csv(const std::string& path, const CsvOptions& opts = {});

void write_dataset_csv(std::ostream& out, const Dataset& data);

enum class ReferenceRule { None, Optimal, TreatAll, TreatNone };

struct RunConfig {
    std::optional<std::string> mode;
    int dgp = 1;
    std::size_t n = 1000;
    int reps = 200;
    std::uint64_t seed = 0;
    // Empty means every value ("all").
    std::vector<Library> libraries{Library::ParametricPlusMLBlip};
    std::vector<Metalearner> metalearners{Metalearner::Discrete};
    std::vector<Risk> risks{Risk::MSE};
    bool any_all = false;
    int folds = 10;
    std::string input_csv;
    std::string output_dir = "odtr_out";
    bool full_scale = false;
    bool negate_y = false;
    std::string model;
    ReferenceRule reference_rule = ReferenceRule::None;
    EvaluationSample evaluation = EvaluationSample::Fresh;
    std::size_t eval_rows = 10000;
};

// Unknown keys and wrongly typed values throw InvalidConfiguration.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig read_run_config(const std::string& path);

// Cartesian product of the configured library, metalearner and risk values.
// When any of them is "all", invalid triples are skipped; otherwise every
// triple must be valid.
std::vector<EnsembleConfig> expand_configs(const RunConfig& config);

// Formatting shared by every writer: "%.10g", and NA for non-finite values.
std::string format_number(double x);

void write_summary_csv(std::ostream& out, const MetricsReport& report);
void write_replications_csv(std::ostream& out, const MetricsReport& report);

}  // namespace odtr::io
