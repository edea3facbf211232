#include "odtr/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace odtr {

// ---------------------------------------------------------------------------
// Dataset

void Dataset::validate() const {
    const std::size_t n = A.size();
    if (n == 0) throw DataError("dataset has no rows");
    if (W.cols() == 0) throw DataError("dataset has no covariates");
    if (W.rows() != n || Y.size() != n)
        throw DataError("W, A and Y must have the same number of rows");
    if (!column_names.empty() && column_names.size() != W.cols())
        throw DataError("column_names does not match the covariate count");
    for (double v : W.data())
        if (!std::isfinite(v)) throw DataError("covariates contain a non-finite value");
    for (int a : A)
        if (a != 0 && a != 1) throw DataError("treatment values must be 0 or 1");
    for (double y : Y) {
        if (!std::isfinite(y)) throw DataError("outcome contains a non-finite value");
        if (y < 0.0 || y > 1.0) throw DataError("outcome must lie in [0, 1]");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.W = W.select_rows(rows);
    out.A.reserve(rows.size());
    out.Y.reserve(rows.size());
    for (std::size_t i : rows) {
        out.A.push_back(A[i]);
        out.Y.push_back(Y[i]);
    }
    out.column_names = column_names;
    return out;
}

Dataset Dataset::make(Matrix W, std::vector<int> A, std::vector<double> Y,
                      std::vector<std::string> column_names) {
    Dataset d;
    if (column_names.empty())
        for (std::size_t j = 0; j < W.cols(); ++j) column_names.push_back("W" + std::to_string(j + 1));
    d.W = std::move(W);
    d.A = std::move(A);
    d.Y = std::move(Y);
    d.column_names = std::move(column_names);
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------
// TreatmentRule

double TreatmentRule::fraction_treated() const {
    if (assignment.empty()) return 0.0;
    const auto treated = std::count(assignment.begin(), assignment.end(), 1);
    return static_cast<double>(treated) / static_cast<double>(assignment.size());
}

TreatmentRule TreatmentRule::constant(std::size_t n, int value) {
    return TreatmentRule{std::vector<int>(n, value != 0 ? 1 : 0)};
}

TreatmentRule TreatmentRule::from_scores(std::span<const double> scores) {
    TreatmentRule r;
    r.assignment.resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) r.assignment[i] = scores[i] > 0.0 ? 1 : 0;
    return r;
}

// ---------------------------------------------------------------------------
// Config names

std::string_view to_string(Library v) {
    switch (v) {
        case Library::ParametricBlip: return "parametric_blip";
        case Library::MLBlip: return "ml_blip";
        case Library::ParametricPlusMLBlip: return "parametric_plus_ml_blip";
        case Library::MLBlipPlusMaximizers: return "ml_blip_plus_maximizers";
        case Library::AllBlipPlusMaximizers: return "all_blip_plus_maximizers";
    }
    return "?";
}

std::string_view to_string(Metalearner v) {
    switch (v) {
        case Metalearner::Discrete: return "discrete";
        case Metalearner::BlipCombination: return "blip";
        case Metalearner::VoteCombination: return "vote";
    }
    return "?";
}

std::string_view to_string(Risk v) {
    switch (v) {
        case Risk::MSE: return "mse";
        case Risk::MeanOutcomeUnderRule: return "mean_outcome";
    }
    return "?";
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

Library parse_library(std::string_view s) {
    const std::string v = lower(s);
    for (Library lib : kAllLibraries)
        if (v == to_string(lib)) return lib;
    if (v == "parametricblip") return Library::ParametricBlip;
    if (v == "mlblip") return Library::MLBlip;
    if (v == "parametricplusmlblip") return Library::ParametricPlusMLBlip;
    if (v == "mlblipplusmaximizers") return Library::MLBlipPlusMaximizers;
    if (v == "allblipplusmaximizers") return Library::AllBlipPlusMaximizers;
    throw InvalidConfiguration("unknown library '" + std::string(s) + "'");
}

Metalearner parse_metalearner(std::string_view s) {
    const std::string v = lower(s);
    if (v == "discrete") return Metalearner::Discrete;
    if (v == "blip" || v == "blipcombination" || v == "blip_combination")
        return Metalearner::BlipCombination;
    if (v == "vote" || v == "votecombination" || v == "vote_combination")
        return Metalearner::VoteCombination;
    throw InvalidConfiguration("unknown metalearner '" + std::string(s) + "'");
}

Risk parse_risk(std::string_view s) {
    const std::string v = lower(s);
    if (v == "mse") return Risk::MSE;
    if (v == "mean_outcome" || v == "meanoutcomeunderrule" || v == "mean_outcome_under_rule")
        return Risk::MeanOutcomeUnderRule;
    throw InvalidConfiguration("unknown risk '" + std::string(s) + "'");
}

bool is_blip_only(Library lib) {
    return lib == Library::ParametricBlip || lib == Library::MLBlip ||
           lib == Library::ParametricPlusMLBlip;
}

bool contains_ml(Library lib) { return lib != Library::ParametricBlip; }

bool contains_parametric(Library lib) {
    return lib == Library::ParametricBlip || lib == Library::ParametricPlusMLBlip ||
           lib == Library::AllBlipPlusMaximizers;
}

std::string EnsembleConfig::label() const {
    std::string s(to_string(library));
    s += '/';
    s += to_string(metalearner);
    s += '/';
    s += to_string(risk);
    return s;
}

// ---------------------------------------------------------------------------
// Compatibility matrix
//
// Direct maximizers and static rules produce no blip, so a library holding
// them can neither be averaged on the blip scale nor scored by MSE against the
// pseudo-outcome. A vote produces no blip either, so it cannot be scored by MSE.

std::optional<std::string> config_violation(const EnsembleConfig& config) {
    if (config.metalearner == Metalearner::BlipCombination && !is_blip_only(config.library))
        return std::string("blip-combination metalearner requires a blip-only library");
    if (config.risk == Risk::MSE && !is_blip_only(config.library))
        return std::string("MSE risk requires a blip-only library");
    if (config.risk == Risk::MSE && config.metalearner == Metalearner::VoteCombination)
        return std::string("MSE risk cannot score the vote-combination metalearner");
    return std::nullopt;
}

EnsembleConfig validate_config(const EnsembleConfig& config) {
    if (config.folds < 2)
        throw InvalidConfiguration("folds must be at least 2");
    if (auto why = config_violation(config))
        throw InvalidConfiguration("invalid configuration " + config.label() + ": " + *why);
    return config;
}

std::vector<EnsembleConfig> all_valid_configs(int folds, std::uint64_t seed) {
    std::vector<EnsembleConfig> out;
    for (Library lib : kAllLibraries)
        for (Metalearner m : kAllMetalearners)
            for (Risk r : kAllRisks) {
                EnsembleConfig c{lib, m, r, folds, seed};
                if (!config_violation(c)) out.push_back(c);
            }
    return out;
}

// ---------------------------------------------------------------------------
// Folds

std::vector<std::size_t> FoldAssignment::validation_rows(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] == fold) rows.push_back(i);
    return rows;
}

std::vector<std::size_t> FoldAssignment::training_rows(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != fold) rows.push_back(i);
    return rows;
}

FoldAssignment make_folds(std::size_t n, int folds, std::uint64_t seed) {
    if (folds < 2) throw std::invalid_argument("make_folds: need at least 2 folds");
    if (static_cast<std::size_t>(folds) > n)
        throw std::invalid_argument("make_folds: more folds than rows");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed, "folds", n);
    // Fisher-Yates with an explicit index draw so the permutation is the same
    // under any standard library.
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
        std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }

    FoldAssignment out;
    out.folds = folds;
    out.fold_of.assign(n, 0);
    for (std::size_t k = 0; k < n; ++k)
        out.fold_of[order[k]] = static_cast<int>(k % static_cast<std::size_t>(folds)) + 1;
    return out;
}

// ---------------------------------------------------------------------------
// WeightVector

bool WeightVector::on_simplex(double tol) const {
    if (alpha.empty()) return false;
    double s = 0.0;
    for (double a : alpha) {
        if (!(a >= -tol)) return false;
        s += a;
    }
    return std::abs(s - 1.0) <= tol;
}

bool WeightVector::is_vertex() const {
    int ones = 0;
    for (double a : alpha) {
        if (a == 1.0)
            ++ones;
        else if (a != 0.0)
            return false;
    }
    return ones == 1;
}

void WeightVector::require_simplex(double tol) const {
    if (!on_simplex(tol)) throw std::invalid_argument("weight vector is not on the simplex");
}

WeightVector WeightVector::vertex(std::size_t J, std::size_t j) {
    WeightVector w{std::vector<double>(J, 0.0)};
    w.alpha.at(j) = 1.0;
    return w;
}

WeightVector WeightVector::uniform(std::size_t J) {
    return WeightVector{std::vector<double>(J, 1.0 / static_cast<double>(J))};
}

// ---------------------------------------------------------------------------
// Seeds

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index) {
    // FNV-1a over the stream name, then mixed with root and index.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : stream) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(root ^ h) + index);
}

}  // namespace odtr
