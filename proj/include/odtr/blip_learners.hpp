#pragma once

// Candidate learners that estimate the blip B(W) = Q(1, W) - Q(0, W), either
// by regressing the pseudo-outcome D on W or, for Q-learning, by taking the
// treatment contrast of the fitted outcome regression. Each fit implies the
// rule indicator(B(W) > 0).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "odtr/core.hpp"
#include "odtr/models.hpp"
#include "odtr/nuisance.hpp"

namespace odtr {

enum class BlipKind {
    UnivariateGlm,   // D ~ 1 + W_j
    MainTermsGlm,    // D ~ 1 + W
    MeanOnly,        // D ~ 1
    InteractionGlm,  // D ~ 1 + W + all pairwise products
    RegressionTree,
    NeuralNet,
    QLearningPlugin,  // Q(1, W) - Q(0, W), ignores D
};

struct BlipLearnerSpec {
    BlipKind kind = BlipKind::MainTermsGlm;
    int covariate = -1;  // UnivariateGlm only
    models::TreeParams tree{};
    models::NetParams net{};

    // Short identifier ("glm.W1", "rpart", ...). Covariate names default to W1..Wp.
    std::string name(std::span<const std::string> column_names = {}) const;
    // Throws InvalidConfiguration for out-of-range hyperparameters.
    void validate(std::size_t covariates) const;
};

class BlipSurface {
public:
    explicit BlipSurface(models::RegressorPtr model) : model_(std::move(model)) {}
    std::vector<double> predict(const Matrix& W) const { return model_->predict(W); }
    const models::RegressorPtr& model() const { return model_; }

private:
    models::RegressorPtr model_;
};

struct BlipFit {
    BlipSurface surface;
    std::vector<std::string> diagnostics;
};

// D must come from nuisances fit on the same rows as `data`.
BlipFit fit_blip_learner(const BlipLearnerSpec& spec, const Dataset& data,
                         std::span<const double> D, const OutcomeRegression& Q,
                         std::uint64_t seed);

TreatmentRule rule_from_blip(const BlipSurface& blip, const Matrix& W);
TreatmentRule rule_from_blip(std::span<const double> blip);

}  // namespace odtr
