#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "odtr/matrix.hpp"

namespace odtr {

// ---------------------------------------------------------------------------
// Errors

class DataError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvalidConfiguration : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// One treatment arm is missing, so g(A|W) cannot be bounded away from 0.
class PositivityViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Data

// Point-treatment observations (W, A, Y). Y is expected on [0, 1]; the CSV
// ingestion layer rescales outcomes before constructing a Dataset.
struct Dataset {
    Matrix W;
    std::vector<int> A;
    std::vector<double> Y;
    std::vector<std::string> column_names;

    std::size_t size() const { return A.size(); }
    std::size_t covariates() const { return W.cols(); }

    // Throws DataError when any invariant is broken.
    void validate() const;

    Dataset subset(std::span<const std::size_t> rows) const;

    static Dataset make(Matrix W, std::vector<int> A, std::vector<double> Y,
                        std::vector<std::string> column_names = {});
};

// Realized treatment decisions, one per row, each exactly 0 or 1.
struct TreatmentRule {
    std::vector<int> assignment;

    std::size_t size() const { return assignment.size(); }
    double fraction_treated() const;

    static TreatmentRule constant(std::size_t n, int value);
    // indicator(score > 0); a score of exactly 0 maps to control.
    static TreatmentRule from_scores(std::span<const double> scores);
};

// ---------------------------------------------------------------------------
// Ensemble configuration

enum class Library {
    ParametricBlip,         // univariate GLMs, one per covariate
    MLBlip,                 // glm, mean, glm.interaction, tree, neural net
    ParametricPlusMLBlip,   // union of the two above
    MLBlipPlusMaximizers,   // MLBlip + Q-learning, OWL, treat-all, treat-none
    AllBlipPlusMaximizers,  // ParametricPlusMLBlip + the same maximizers and static rules
};

enum class Metalearner { Discrete, BlipCombination, VoteCombination };

enum class Risk { MSE, MeanOutcomeUnderRule };

inline constexpr Library kAllLibraries[] = {Library::ParametricBlip, Library::MLBlip,
                                            Library::ParametricPlusMLBlip,
                                            Library::MLBlipPlusMaximizers,
                                            Library::AllBlipPlusMaximizers};
inline constexpr Metalearner kAllMetalearners[] = {Metalearner::Discrete,
                                                   Metalearner::BlipCombination,
                                                   Metalearner::VoteCombination};
inline constexpr Risk kAllRisks[] = {Risk::MSE, Risk::MeanOutcomeUnderRule};

std::string_view to_string(Library v);
std::string_view to_string(Metalearner v);
std::string_view to_string(Risk v);
// Accept the names produced by to_string. Throw InvalidConfiguration otherwise.
Library parse_library(std::string_view s);
Metalearner parse_metalearner(std::string_view s);
Risk parse_risk(std::string_view s);

bool is_blip_only(Library lib);
bool contains_ml(Library lib);
bool contains_parametric(Library lib);

struct EnsembleConfig {
    Library library = Library::ParametricPlusMLBlip;
    Metalearner metalearner = Metalearner::Discrete;
    Risk risk = Risk::MSE;
    int folds = 10;
    std::uint64_t seed = 0;

    std::string label() const;
    friend bool operator==(const EnsembleConfig&, const EnsembleConfig&) = default;
};

// Name of the compatibility rule the triple breaks, or nullopt if the
// (library, metalearner, risk) combination can be built.
std::optional<std::string> config_violation(const EnsembleConfig& config);

// Returns the config unchanged or throws InvalidConfiguration naming the rule.
EnsembleConfig validate_config(const EnsembleConfig& config);

// Every valid (library, metalearner, risk) triple in a fixed order.
std::vector<EnsembleConfig> all_valid_configs(int folds, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Cross-validation folds

struct FoldAssignment {
    std::vector<int> fold_of;  // values in 1..folds
    int folds = 0;

    std::size_t size() const { return fold_of.size(); }
    std::vector<std::size_t> validation_rows(int fold) const;
    std::vector<std::size_t> training_rows(int fold) const;
};

// Balanced random partition of n rows into V folds. Deterministic in (n, V, seed).
FoldAssignment make_folds(std::size_t n, int folds, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Simplex weights

struct WeightVector {
    std::vector<double> alpha;

    std::size_t size() const { return alpha.size(); }
    bool on_simplex(double tol = 1e-9) const;
    bool is_vertex() const;
    // Throws std::invalid_argument when off the simplex by more than tol.
    void require_simplex(double tol = 1e-9) const;

    static WeightVector vertex(std::size_t J, std::size_t j);
    static WeightVector uniform(std::size_t J);
};

// ---------------------------------------------------------------------------
// Random streams
//
// All randomness derives from one root seed. A stream is identified by a name
// and an integer index so that the state a computation sees never depends on
// execution order or thread count.

using Rng = std::mt19937_64;

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t root, std::string_view stream, std::uint64_t index = 0) {
    return Rng(derive_seed(root, stream, index));
}

// Uniform on [0, 1) from 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace odtr
