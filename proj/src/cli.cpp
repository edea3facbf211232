#include "odtr/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "odtr/io.hpp"
#include "odtr/kernels.hpp"
#include "odtr/simulation.hpp"
#include "odtr/superlearner.hpp"

namespace odtr::cli {
namespace {

constexpr const char* kVersion = "1.0.0";
constexpr std::size_t kTruthDraws = 1000000;

std::filesystem::path prepare_output(const std::string& dir) {
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw InvalidConfiguration("cannot create output directory " + dir + ": " + ec.message());
    return p;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

io::RunConfig load(const std::string& path, const char* mode) {
    auto c = io::read_run_config(path);
    if (c.mode && *c.mode != mode)
        throw InvalidConfiguration("config mode \"" + *c.mode + "\" does not match the " + mode + " command");
    if (const char* env = std::getenv("ODTR_SEED")) {
        char* end = nullptr;
        errno = 0;
        const unsigned long long s = std::strtoull(env, &end, 10);
        if (*env == '\0' || *end != '\0' || errno == ERANGE || *env == '-')
            throw InvalidConfiguration(std::string("ODTR_SEED is not an unsigned integer: ") + env);
        c.seed = s;
    }
    return c;
}

template <class F>
int guarded(std::ostream& log, F&& body) {
    try {
        body();
        return 0;
    } catch (const InvalidConfiguration& e) {
        log << "error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        log << "error: " << e.what() << '\n';
        return 2;
    } catch (const PositivityViolation& e) {
        log << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int cmd_simulate(const std::string& config_path, const Options& opts, std::ostream& log) {
    return guarded(log, [&] {
        const auto c = load(config_path, "simulate");
        ExperimentSpec spec;
        spec.dgp = parse_dgp(c.dgp);
        spec.n = c.n;
        spec.reps = c.reps;
        if (c.full_scale || opts.full_scale) spec.reps = 1000;
        if (opts.smoke) spec.reps = 20;
        spec.configs = io::expand_configs(c);
        spec.seed = c.seed;
        spec.threads = std::max(1, opts.threads);
        spec.evaluation = c.evaluation;
        spec.eval_rows = c.eval_rows;
        spec.truth_draws = kTruthDraws;
        for (const auto& cfg : spec.configs)
            if (static_cast<std::size_t>(cfg.folds) > spec.n)
                throw InvalidConfiguration("folds exceed n");

        const auto dir = prepare_output(c.output_dir);
        const auto report = run_experiment(spec);
        {
            auto out = open_output(dir / "summary.csv");
            io::write_summary_csv(out, report);
        }
        {
            auto out = open_output(dir / "replications.csv");
            io::write_replications_csv(out, report);
        }
        nlohmann::json m;
        m["tool"] = "odtr";
        m["version"] = kVersion;
        m["mode"] = "simulate";
        m["simd"] = std::string(kernels::isa_name(kernels::active_isa()));
        m["dgp"] = c.dgp;
        m["n"] = spec.n;
        m["reps"] = spec.reps;
        m["seed"] = spec.seed;
        m["folds"] = c.folds;
        m["evaluation_sample"] = spec.evaluation == EvaluationSample::Fresh ? "fresh" : "estimation";
        m["eval_rows"] = spec.eval_rows;
        m["truth_draws"] = spec.truth_draws;
        m["optimal_value"] = report.optimal_value;
        auto& cfgs = m["configs"] = nlohmann::json::array();
        for (const auto& cfg : spec.configs) cfgs.push_back(cfg.label());
        m["seed_streams"] = {
            {"data", "derive_seed(seed, \"replication.data\", r)"},
            {"evaluation", "derive_seed(seed, \"replication.eval\", r)"},
            {"fit", "derive_seed(seed, \"replication.fit\", r)"},
            {"truth", "derive_seed(seed, \"truth\")"},
        };
        write_json(dir / "manifest.json", m);
        log << "wrote " << report.summary.size() << " summary rows to " << (dir / "summary.csv").string() << '\n';
    });
}

int cmd_fit(const std::string& config_path, const Options& opts, std::ostream& log) {
    return guarded(log, [&] {
        const auto c = load(config_path, "fit");
        if (c.input_csv.empty()) throw InvalidConfiguration("fit needs input_csv");
        const auto configs = io::expand_configs(c);
        if (configs.size() != 1)
            throw InvalidConfiguration("fit needs exactly one library, metalearner and risk");
        const auto ingest = io::read_dataset_csv(c.input_csv, {c.negate_y || opts.negate_y});
        const auto& data = ingest.data;
        const auto fit = fit_odtr_superlearner(data, configs.front());

        const auto dir = prepare_output(c.output_dir);
        {
            auto out = open_output(dir / "rule.csv");
            out << "row,treatment,blip\n";
            for (std::size_t i = 0; i < data.size(); ++i)
                out << i + 1 << ',' << fit.training_rule[i] << ','
                    << (fit.training_blip.empty() ? "NA" : io::format_number(fit.training_blip[i])) << '\n';
        }
        {
            auto out = open_output(dir / "alpha.csv");
            out << "candidate,weight,cv_risk\n";
            for (std::size_t j = 0; j < fit.candidates.size(); ++j)
                out << fit.candidates[j].name << ',' << io::format_number(fit.alpha.alpha[j]) << ','
                    << io::format_number(fit.candidate_cv_risks[j]) << '\n';
        }
        double treated = 0.0;
        for (int a : fit.training_rule) treated += a;
        nlohmann::json s;
        s["n"] = data.size();
        s["covariates"] = data.column_names;
        s["config"] = configs.front().label();
        s["folds"] = configs.front().folds;
        s["seed"] = configs.front().seed;
        s["fraction_treated"] = treated / static_cast<double>(data.size());
        s["cv_risk"] = fit.cv_risk;
        s["y_offset"] = ingest.y_offset;
        s["y_scale"] = ingest.y_scale;
        s["negate_y"] = c.negate_y || opts.negate_y;
        s["ingestion_notes"] = ingest.notes;
        s["diagnostics"] = fit.diagnostics;
        write_json(dir / "fit_summary.json", s);
        write_json(dir / "model.json", to_json(fit));
        log << "fraction treated " << io::format_number(s["fraction_treated"].get<double>()) << '\n';
    });
}

int cmd_evaluate(const std::string& config_path, const Options&, std::ostream& log) {
    return guarded(log, [&] {
        const auto c = load(config_path, "evaluate");
        const Dgp dgp = parse_dgp(c.dgp);
        if (c.model.empty() == (c.reference_rule == io::ReferenceRule::None))
            throw InvalidConfiguration("evaluate needs exactly one of model or reference_rule");

        const Dataset sample = dgp_sample(dgp, c.eval_rows, derive_seed(c.seed, "evaluate"));
        std::vector<int> rule;
        std::string label;
        if (!c.model.empty()) {
            std::ifstream in(c.model);
            if (!in) throw DataError("cannot open fit artifact " + c.model);
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw DataError("fit artifact " + c.model + " is not valid JSON: " + e.what());
            }
            const auto fit = fitted_odtr_from_json(j);
            rule = fit.predict(sample.W).rule.assignment;
            label = fit.config.label();
        } else {
            switch (c.reference_rule) {
                case io::ReferenceRule::Optimal:
                    rule = optimal_rule(dgp, sample.W).assignment;
                    label = "optimal";
                    break;
                case io::ReferenceRule::TreatAll:
                    rule.assign(sample.size(), 1);
                    label = "treat_all";
                    break;
                default:
                    rule.assign(sample.size(), 0);
                    label = "treat_none";
                    break;
            }
        }
        const double optimal = monte_carlo_optimal(dgp, kTruthDraws, derive_seed(c.seed, "truth")).value;
        const auto m = evaluate_rule_metrics(dgp, sample.W, rule, optimal);
        nlohmann::json out;
        out["rule"] = label;
        out["dgp"] = c.dgp;
        out["eval_rows"] = c.eval_rows;
        out["seed"] = c.seed;
        out["accuracy"] = m.accuracy;
        out["value"] = m.value;
        out["regret_approx"] = m.regret;
        out["fraction_treated"] = m.fraction_treated;
        out["optimal_value"] = optimal;
        const auto dir = prepare_output(c.output_dir);
        write_json(dir / "metrics.json", out);
        log << "accuracy " << io::format_number(m.accuracy) << ", value " << io::format_number(m.value) << '\n';
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimal dynamic treatment rules with a SuperLearner ensemble"};
    app.require_subcommand(1);
    std::string config;
    Options opts;

    auto* sim = app.add_subcommand("simulate", "Run the simulation study");
    auto* fit = app.add_subcommand("fit", "Fit a rule to a CSV dataset");
    auto* eval = app.add_subcommand("evaluate", "Score a fitted or reference rule against a known DGP");
    for (auto* sub : {sim, fit, eval}) {
        sub->add_option("--config", config, "JSON run configuration")->required();
        sub->add_option("--threads", opts.threads, "Worker threads")->check(CLI::PositiveNumber);
    }
    sim->add_flag("--full-scale", opts.full_scale, "Use 1000 replications");
    sim->add_flag("--smoke", opts.smoke, "Use 20 replications");
    fit->add_flag("--negate-y", opts.negate_y, "Negate Y at ingestion (for loss-type outcomes)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    if (sim->parsed()) return cmd_simulate(config, opts, err);
    if (fit->parsed()) return cmd_fit(config, opts, err);
    return cmd_evaluate(config, opts, err);
}

}  // namespace odtr::cli
