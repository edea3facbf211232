#pragma once

// The ODTR SuperLearner: cross-validated candidate fitting with nuisances
// refit inside every training fold, weight optimization on the validation
// predictions, and a full-data refit combined with the chosen weights.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "odtr/blip_learners.hpp"
#include "odtr/core.hpp"
#include "odtr/direct_learners.hpp"
#include "odtr/risk.hpp"

namespace odtr {

enum class CandidateKind { Blip, Owl, Static };

struct CandidateSpec {
    CandidateKind kind = CandidateKind::Blip;
    BlipLearnerSpec blip{};
    OwlSpec owl{};
    StaticRuleSpec fixed{};
    std::string name;

    bool blip_based() const { return kind == CandidateKind::Blip; }
};

// Candidates of a library in canonical order:
// glm.W1..glm.Wp, glm, mean, glm.interaction, rpart, nnet, qlearning, owl,
// treat_all, treat_none (each library keeps the ones it contains).
std::vector<CandidateSpec> library_candidates(Library library,
                                              std::span<const std::string> column_names);

// A candidate refit on the full data. `score` is the blip for blip-based
// candidates and a decision function otherwise; the rule treats where it is > 0.
struct FittedCandidate {
    std::string name;
    bool blip_based = false;
    models::RegressorPtr score;
};

struct CrossValidatedLibrary {
    std::vector<CandidateSpec> specs;  // survivors, aligned with preds and refits
    CandidatePredictions preds;
    std::vector<FittedCandidate> refits;
    std::vector<std::string> diagnostics;
};

// Steps shared by every configuration built on the same rows, folds and seed.
// A candidate that throws on any fold or on the full-data refit is dropped
// with a diagnostic; PositivityViolation propagates.
CrossValidatedLibrary cross_validate_candidates(const Dataset& data,
                                                std::span<const CandidateSpec> specs, int folds,
                                                std::uint64_t seed);

struct RulePrediction {
    TreatmentRule rule;
    std::optional<std::vector<double>> blip;
};

struct FittedODTR {
    EnsembleConfig config;
    std::vector<FittedCandidate> candidates;
    WeightVector alpha;
    std::vector<double> candidate_cv_risks;
    double cv_risk = 0.0;
    FoldAssignment folds;
    std::vector<std::string> diagnostics;
    std::vector<std::string> column_names;
    std::size_t covariates = 0;
    // The final rule (and blip, when there is one) on the training rows.
    std::vector<int> training_rule;
    std::vector<double> training_blip;

    bool has_blip() const;
    RulePrediction predict(const Matrix& W) const;
    std::optional<std::size_t> selected() const;  // Discrete only
};

FittedODTR fit_odtr_superlearner(const Dataset& data, const EnsembleConfig& config);

// Fits several configurations that share folds and seed, cross-validating the
// union of their libraries once. Each result equals fit_odtr_superlearner on
// that configuration alone.
std::vector<FittedODTR> fit_odtr_superlearners(const Dataset& data,
                                               std::span<const EnsembleConfig> configs);

RulePrediction predict_rule(const FittedODTR& fit, const Matrix& W);

nlohmann::json to_json(const FittedODTR& fit);
FittedODTR fitted_odtr_from_json(const nlohmann::json& j);

}  // namespace odtr
