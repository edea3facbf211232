#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "odtr/cli.hpp"
#include "odtr/io.hpp"
#include "odtr/simulation.hpp"

using namespace odtr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("odtr_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path operator/(const std::string& s) const { return path / s; }
};

struct RunResult {
    int code;
    std::string out, err;
};

RunResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "odtr");
    std::vector<const char*> argv;
    for (auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string write_config(const TempDir& dir, const std::string& name, const json& j) {
    const auto p = dir / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

json small_simulation(const fs::path& out) {
    return {{"mode", "simulate"}, {"dgp", 2}, {"n", 120}, {"reps", 2}, {"seed", 5},
            {"library", "parametric_blip"}, {"metalearner", "discrete"}, {"risk", "mse"},
            {"folds", 3}, {"eval_rows", 1000}, {"output_dir", out.string()}};
}

std::string csv_of(const Dataset& d) {
    std::ostringstream s;
    io::write_dataset_csv(s, d);
    return s.str();
}

}  // namespace

TEST_CASE("run configuration parsing") {
    const auto c = io::parse_run_config(json{{"mode", "fit"}, {"library", "ml_blip"}, {"metalearner", "blip"},
                                             {"risk", "mean_outcome"}, {"folds", 4}, {"seed", 11}});
    CHECK(*c.mode == "fit");
    CHECK(c.libraries == std::vector<Library>{Library::MLBlip});
    CHECK(c.folds == 4);
    const auto configs = io::expand_configs(c);
    REQUIRE(configs.size() == 1);
    CHECK(configs[0] == EnsembleConfig{Library::MLBlip, Metalearner::BlipCombination, Risk::MeanOutcomeUnderRule, 4, 11});

    const auto all = io::parse_run_config(json{{"library", "all"}, {"metalearner", "all"}, {"risk", "all"}});
    CHECK(io::expand_configs(all).size() == 19);
    const auto some = io::parse_run_config(json{{"library", {"ml_blip", "ml_blip_plus_maximizers"}}, {"metalearner", "all"}, {"risk", "mean_outcome"}});
    CHECK(io::expand_configs(some).size() == 5);

    CHECK_THROWS_AS(io::parse_run_config(json{{"colour", 1}}), InvalidConfiguration);
    CHECK_THROWS_AS(io::parse_run_config(json{{"folds", "ten"}}), InvalidConfiguration);
    CHECK_THROWS_AS(io::parse_run_config(json{{"folds", 1}}), InvalidConfiguration);
    CHECK_THROWS_AS(io::parse_run_config(json{{"seed", -3}}), InvalidConfiguration);
    CHECK_THROWS_AS(io::parse_run_config(json{{"mode", "train"}}), InvalidConfiguration);
    CHECK_THROWS_AS(io::parse_run_config(json{{"library", "forest"}}), InvalidConfiguration);
    CHECK_THROWS_AS(io::expand_configs(io::parse_run_config(
                        json{{"library", "all_blip_plus_maximizers"}, {"metalearner", "blip"}, {"risk", "mean_outcome"}})),
                    InvalidConfiguration);
    CHECK(io::format_number(0.1) == "0.1");
    CHECK(io::format_number(std::nan("")) == "NA");
}

TEST_CASE("CSV ingestion") {
    SUBCASE("round trip") {
        const auto d = dgp_sample(Dgp::Two, 20, 1);
        std::istringstream in(csv_of(d));
        const auto r = io::parse_dataset_csv(in);
        CHECK(r.data.size() == 20);
        CHECK(r.data.column_names == d.column_names);
        CHECK(r.data.A == d.A);
        CHECK(r.data.Y == d.Y);
        for (std::size_t i = 0; i < 20; ++i) CHECK(r.data.W(i, 2) == doctest::Approx(d.W(i, 2)).epsilon(1e-9));
        CHECK(r.y_offset == 0.0);
        CHECK(r.y_scale == 1.0);
    }
    SUBCASE("missing covariates are imputed by the median with an indicator") {
        std::istringstream in("age,A,Y,dose\n10,1,0.5,1\nNA,0,0.2,2\n30,1,0.1,\n20,0,0.9,4\n");
        const auto r = io::parse_dataset_csv(in);
        CHECK(r.data.column_names == std::vector<std::string>{"age", "dose", "age_missing", "dose_missing"});
        CHECK(r.data.W(1, 0) == 20.0);
        CHECK(r.data.W(2, 1) == 2.0);
        CHECK(r.data.W(1, 2) == 1.0);
        CHECK(r.data.W(0, 2) == 0.0);
        CHECK(r.data.W(2, 3) == 1.0);
        CHECK(!r.notes.empty());
    }
    SUBCASE("outcomes outside [0, 1] are min-max scaled") {
        std::istringstream in("W,A,Y\n1,0,10\n2,1,20\n3,0,30\n");
        const auto r = io::parse_dataset_csv(in);
        CHECK(r.data.Y == std::vector<double>{0.0, 0.5, 1.0});
        CHECK(r.y_offset == 10.0);
        CHECK(r.y_scale == 20.0);
        std::istringstream neg("W,A,Y\n1,0,0.2\n2,1,0.9\n3,0,0.4\n");
        const auto n = io::parse_dataset_csv(neg, {true});
        // -Y lies outside [0, 1], so it is rescaled and larger original Y becomes smaller.
        CHECK(n.data.Y[1] == 0.0);
        CHECK(n.data.Y[0] == 1.0);
    }
    SUBCASE("errors name the problem") {
        std::istringstream noA("W,T,Y\n1,0,0\n");
        CHECK_THROWS_WITH_AS(io::parse_dataset_csv(noA), doctest::Contains("\"A\""), DataError);
        std::istringstream badY("W,A,Y\n1,0,x\n");
        CHECK_THROWS_WITH_AS(io::parse_dataset_csv(badY), doctest::Contains("Y"), DataError);
        std::istringstream badA("W,A,Y\n1,2,0\n");
        CHECK_THROWS_AS(io::parse_dataset_csv(badA), DataError);
        std::istringstream ragged("W,A,Y\n1,0\n");
        CHECK_THROWS_AS(io::parse_dataset_csv(ragged), DataError);
    }
}

TEST_CASE("simulate writes deterministic artifacts") {
    TempDir dir;
    const auto cfg = write_config(dir, "sim.json", small_simulation(dir / "a"));
    const auto r = run_cli({"simulate", "--config", cfg});
    REQUIRE_MESSAGE(r.code == 0, r.err);

    const auto summary = lines(slurp(dir / "a/summary.csv"));
    REQUIRE(summary.size() == 3);
    CHECK(summary[0] ==
          "config,reps_ok,reps_failed,mean_accuracy,mean_regret,var_regret,relative_variance,mean_value,value_p025,"
          "value_p975,mean_fraction_treated");
    CHECK(summary[1].rfind("parametric_blip/discrete/mse,2,0,", 0) == 0);
    CHECK(summary[2].rfind("glm_baseline,2,0,", 0) == 0);
    CHECK(lines(slurp(dir / "a/replications.csv")).size() == 5);
    const auto manifest = json::parse(slurp(dir / "a/manifest.json"));
    CHECK(manifest["reps"] == 2);
    CHECK(manifest["seed"] == 5);
    CHECK(manifest["configs"].size() == 1);
    CHECK(!manifest.contains("threads"));

    // Same config twice and with more threads: identical bytes.
    const auto cfg_b = write_config(dir, "sim_b.json", small_simulation(dir / "b"));
    REQUIRE(run_cli({"simulate", "--config", cfg_b, "--threads", "3"}).code == 0);
    for (const char* f : {"summary.csv", "replications.csv", "manifest.json"})
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    REQUIRE(run_cli({"simulate", "--config", cfg}).code == 0);
    CHECK(lines(slurp(dir / "a/summary.csv")) == summary);
}

TEST_CASE("simulate rejects an invalid triple and names the rule") {
    TempDir dir;
    auto j = small_simulation(dir / "x");
    j["metalearner"] = "vote";
    const auto r = run_cli({"simulate", "--config", write_config(dir, "bad.json", j)});
    CHECK(r.code == 2);
    CHECK(r.err.find("MSE") != std::string::npos);
    CHECK(run_cli({"simulate"}).code == 2);
    CHECK(run_cli({"simulate", "--config", (dir / "missing.json").string()}).code == 2);
    j["mode"] = "fit";
    CHECK(run_cli({"simulate", "--config", write_config(dir, "mode.json", j)}).code == 2);
}

TEST_CASE("fit on a CSV") {
    TempDir dir;
    const auto data = dgp_sample(Dgp::Two, 1000, 31);
    std::ofstream(dir / "data.csv") << csv_of(data);
    const json j{{"mode", "fit"}, {"input_csv", (dir / "data.csv").string()}, {"library", "parametric_plus_ml_blip"},
                 {"metalearner", "blip"}, {"risk", "mse"}, {"seed", 3}, {"output_dir", (dir / "out").string()}};
    const auto r = run_cli({"fit", "--config", write_config(dir, "fit.json", j)});
    REQUIRE_MESSAGE(r.code == 0, r.err);

    const auto rule = lines(slurp(dir / "out/rule.csv"));
    REQUIRE(rule.size() == 1001);
    CHECK(rule[0] == "row,treatment,blip");
    double treated = 0;
    for (std::size_t i = 1; i < rule.size(); ++i) {
        const auto c1 = rule[i].find(',');
        const int a = std::stoi(rule[i].substr(c1 + 1));
        CHECK((a == 0 || a == 1));
        treated += a;
    }
    CHECK(std::abs(treated / 1000.0 - 0.540) < 0.15);

    const auto alpha = lines(slurp(dir / "out/alpha.csv"));
    CHECK(alpha[0] == "candidate,weight,cv_risk");
    double sum = 0;
    for (std::size_t i = 1; i < alpha.size(); ++i) {
        const auto a = alpha[i].find(','), b = alpha[i].find(',', a + 1);
        sum += std::stod(alpha[i].substr(a + 1, b - a - 1));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    const auto summary = json::parse(slurp(dir / "out/fit_summary.json"));
    CHECK(summary["fraction_treated"].get<double>() == doctest::Approx(treated / 1000.0));

    // The saved model evaluates on a DGP and agrees with itself on reload.
    const json e{{"mode", "evaluate"}, {"dgp", 2}, {"model", (dir / "out/model.json").string()}, {"eval_rows", 5000},
                 {"output_dir", (dir / "eval").string()}};
    const auto ev = run_cli({"evaluate", "--config", write_config(dir, "eval.json", e)});
    REQUIRE_MESSAGE(ev.code == 0, ev.err);
    const auto m = json::parse(slurp(dir / "eval/metrics.json"));
    CHECK(m["accuracy"].get<double>() > 0.7);
    CHECK(m["rule"] == "parametric_plus_ml_blip/blip/mse");

    // Fitting twice gives identical files.
    json j2 = j;
    j2["output_dir"] = (dir / "out2").string();
    REQUIRE(run_cli({"fit", "--config", write_config(dir, "fit2.json", j2)}).code == 0);
    for (const char* f : {"rule.csv", "alpha.csv", "fit_summary.json", "model.json"})
        CHECK(slurp(dir / "out" / f) == slurp(dir / "out2" / f));
}

TEST_CASE("fit input errors exit with status 2") {
    TempDir dir;
    std::ofstream(dir / "noA.csv") << "W1,T,Y\n1,0,0\n2,1,1\n";
    std::ofstream(dir / "onearm.csv") << "W1,A,Y\n1,1,0\n2,1,1\n3,1,0\n4,1,1\n";
    auto cfg = [&](const std::string& csv, const std::string& name) {
        return write_config(dir, name, json{{"mode", "fit"}, {"input_csv", (dir / csv).string()}, {"folds", 2},
                                            {"library", "ml_blip"}, {"output_dir", (dir / "o").string()}});
    };
    const auto a = run_cli({"fit", "--config", cfg("noA.csv", "a.json")});
    CHECK(a.code == 2);
    CHECK(a.err.find("\"A\"") != std::string::npos);
    CHECK(run_cli({"fit", "--config", cfg("onearm.csv", "b.json")}).code == 2);
    CHECK(run_cli({"fit", "--config", cfg("absent.csv", "c.json")}).code == 2);
    const auto many = write_config(dir, "d.json", json{{"mode", "fit"}, {"input_csv", (dir / "noA.csv").string()}, {"library", "all"}});
    CHECK(run_cli({"fit", "--config", many}).code == 2);
}

TEST_CASE("evaluate reference rules") {
    TempDir dir;
    auto eval = [&](int dgp, const std::string& rule) {
        const json j{{"mode", "evaluate"}, {"dgp", dgp}, {"reference_rule", rule}, {"eval_rows", 200000},
                     {"output_dir", (dir / rule).string()}};
        const auto r = run_cli({"evaluate", "--config", write_config(dir, rule + ".json", j)});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        return json::parse(slurp(dir / rule / "metrics.json"));
    };
    CHECK(eval(1, "optimal")["accuracy"] == 1.0);
    CHECK(std::abs(eval(1, "treat_all")["value"].get<double>() - 0.4638) < 0.005);
    CHECK(std::abs(eval(2, "treat_none")["value"].get<double>() - 0.5000) < 0.005);

    const json missing{{"mode", "evaluate"}, {"dgp", 1}, {"model", (dir / "nope.json").string()},
                       {"output_dir", (dir / "m").string()}};
    CHECK(run_cli({"evaluate", "--config", write_config(dir, "missing.json", missing)}).code == 2);
    std::ofstream(dir / "garbage.json") << "{ not json";
    const json garbage{{"mode", "evaluate"}, {"dgp", 1}, {"model", (dir / "garbage.json").string()}};
    CHECK(run_cli({"evaluate", "--config", write_config(dir, "garbage_cfg.json", garbage)}).code == 2);
    const json both{{"mode", "evaluate"}, {"dgp", 1}};
    CHECK(run_cli({"evaluate", "--config", write_config(dir, "both.json", both)}).code == 2);
}

TEST_CASE("ODTR_SEED overrides the configured seed") {
    TempDir dir;
    const json j{{"mode", "evaluate"}, {"dgp", 2}, {"reference_rule", "treat_all"}, {"eval_rows", 1000},
                 {"seed", 1}, {"output_dir", (dir / "o").string()}};
    const auto cfg = write_config(dir, "e.json", j);
    ::setenv("ODTR_SEED", "77", 1);
    const auto r = run_cli({"evaluate", "--config", cfg});
    ::setenv("ODTR_SEED", "abc", 1);
    const auto bad = run_cli({"evaluate", "--config", cfg});
    ::unsetenv("ODTR_SEED");
    REQUIRE(r.code == 0);
    CHECK(json::parse(slurp(dir / "o/metrics.json"))["seed"] == 77);
    CHECK(bad.code == 2);
}
