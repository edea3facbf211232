#include "odtr/blip_learners.hpp"

namespace odtr {

std::string BlipLearnerSpec::name(std::span<const std::string> column_names) const {
    switch (kind) {
        case BlipKind::UnivariateGlm: {
            const auto j = static_cast<std::size_t>(covariate);
            const std::string col =
                j < column_names.size() ? column_names[j] : "W" + std::to_string(covariate + 1);
            return "glm." + col;
        }
        case BlipKind::MainTermsGlm: return "glm";
        case BlipKind::MeanOnly: return "mean";
        case BlipKind::InteractionGlm: return "glm.interaction";
        case BlipKind::RegressionTree: return "rpart";
        case BlipKind::NeuralNet: return "nnet";
        case BlipKind::QLearningPlugin: return "qlearning";
    }
    return "?";
}

void BlipLearnerSpec::validate(std::size_t covariates) const {
    if (kind == BlipKind::UnivariateGlm &&
        (covariate < 0 || static_cast<std::size_t>(covariate) >= covariates))
        throw InvalidConfiguration("univariate GLM covariate index out of range");
    if (kind == BlipKind::RegressionTree && (tree.max_depth < 1 || tree.max_depth > 30 ||
                                             tree.min_leaf < 1))
        throw InvalidConfiguration("tree needs 1 <= max_depth <= 30 and min_leaf >= 1");
    if (kind == BlipKind::NeuralNet &&
        (net.hidden < 1 || net.decay < 0.0 || net.steps < 1 || !(net.step_size > 0.0) ||
         net.restarts < 1 || !(net.init_range > 0.0)))
        throw InvalidConfiguration("neural net hyperparameters out of range");
}

BlipFit fit_blip_learner(const BlipLearnerSpec& spec, const Dataset& data,
                         std::span<const double> D, const OutcomeRegression& Q,
                         std::uint64_t seed) {
    using namespace models;
    spec.validate(data.covariates());
    if (D.size() != data.size()) throw std::invalid_argument("fit_blip_learner: D length mismatch");

    BlipFit out{BlipSurface(nullptr), {}};
    switch (spec.kind) {
        case BlipKind::UnivariateGlm:
            out.surface = BlipSurface(fit_linear({Terms::Single, spec.covariate}, data.W, D));
            break;
        case BlipKind::MainTermsGlm:
            out.surface = BlipSurface(fit_linear({Terms::Main}, data.W, D));
            break;
        case BlipKind::MeanOnly: {
            double s = 0.0;
            for (double d : D) s += d;
            out.surface = BlipSurface(std::make_shared<ConstantModel>(s / static_cast<double>(D.size())));
            break;
        }
        case BlipKind::InteractionGlm:
            out.surface = BlipSurface(fit_linear({Terms::Pairwise}, data.W, D));
            break;
        case BlipKind::RegressionTree:
            out.surface = BlipSurface(fit_tree(data.W, D, spec.tree));
            break;
        case BlipKind::NeuralNet: {
            NetFit fit = fit_net(data.W, D, spec.net, seed);
            if (!fit.improved_to_end)
                out.diagnostics.push_back("nnet: objective rose before the step limit; best iterate returned");
            out.surface = BlipSurface(fit.net);
            break;
        }
        case BlipKind::QLearningPlugin:
            out.surface = BlipSurface(std::make_shared<TreatmentContrast>(Q.model()));
            break;
    }
    return out;
}

TreatmentRule rule_from_blip(const BlipSurface& blip, const Matrix& W) {
    return TreatmentRule::from_scores(blip.predict(W));
}

TreatmentRule rule_from_blip(std::span<const double> blip) { return TreatmentRule::from_scores(blip); }

}  // namespace odtr
