#include "odtr/nuisance.hpp"

#include <algorithm>
#include <functional>

namespace odtr {

OutcomeRegression::OutcomeRegression(std::vector<std::string> names, std::vector<double> cv_risks,
                                     std::shared_ptr<const models::StackedRegressor> stack,
                                     std::vector<std::string> warnings)
    : names_(std::move(names)),
      cv_risks_(std::move(cv_risks)),
      stack_(std::move(stack)),
      warnings_(std::move(warnings)) {}

void OutcomeRegression::predict(std::span<const int> a, const Matrix& W,
                                std::span<double> out) const {
    std::vector<double> ad(a.begin(), a.end());
    stack_->predict(models::with_treatment_column(ad, W), out);
}

std::vector<double> OutcomeRegression::predict_at(int a, const Matrix& W) const {
    std::vector<double> out(W.rows());
    stack_->predict(models::with_constant_treatment(static_cast<double>(a), W), out);
    return out;
}

namespace {

using Fitter = std::function<models::RegressorPtr(const Matrix&, std::span<const double>)>;

struct NamedFitter {
    std::string name;
    Fitter fit;
};

std::vector<NamedFitter> outcome_candidates(const OutcomeStackOptions& opts) {
    using namespace models;
    return {
        {"mean",
         [](const Matrix&, std::span<const double> y) -> RegressorPtr {
             double s = 0.0;
             for (double v : y) s += v;
             return std::make_shared<ConstantModel>(s / static_cast<double>(y.size()));
         }},
        {"glm",
         [](const Matrix& X, std::span<const double> y) -> RegressorPtr {
             return fit_logistic({Terms::Main}, X, y);
         }},
        {"glm.interaction",
         [](const Matrix& X, std::span<const double> y) -> RegressorPtr {
             return fit_logistic({Terms::Pairwise}, X, y);
         }},
        {"tree",
         [tree = opts.tree](const Matrix& X, std::span<const double> y) -> RegressorPtr {
             return fit_tree(X, y, tree);
         }},
    };
}

std::vector<double> select(std::span<const double> v, std::span<const std::size_t> idx) {
    std::vector<double> out(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) out[k] = v[idx[k]];
    return out;
}

}  // namespace

OutcomeRegression fit_outcome_regression(const Dataset& data, const FoldAssignment& folds,
                                         const OutcomeStackOptions& opts) {
    const std::size_t n = data.size();
    if (folds.size() != n) throw std::invalid_argument("fit_outcome_regression: fold size mismatch");
    std::vector<double> a(data.A.begin(), data.A.end());
    const Matrix X = models::with_treatment_column(a, data.W);

    std::vector<std::string> warnings;
    std::vector<std::string> names;
    std::vector<std::vector<double>> cv_preds;
    std::vector<models::RegressorPtr> full_fits;

    for (const auto& cand : outcome_candidates(opts)) {
        std::vector<double> cv(n);
        try {
            for (int v = 1; v <= folds.folds; ++v) {
                const auto train = folds.training_rows(v);
                const auto valid = folds.validation_rows(v);
                if (valid.empty()) continue;
                const auto model = cand.fit(X.select_rows(train), select(data.Y, train));
                const auto pred = model->predict(X.select_rows(valid));
                for (std::size_t k = 0; k < valid.size(); ++k) cv[valid[k]] = pred[k];
            }
            full_fits.push_back(cand.fit(X, data.Y));
        } catch (const models::SingularDesign& e) {
            warnings.push_back("outcome regression: dropped " + cand.name + " (" + e.what() + ")");
            continue;
        }
        names.push_back(cand.name);
        cv_preds.push_back(std::move(cv));
    }
    if (names.empty()) throw std::runtime_error("fit_outcome_regression: every candidate failed");

    std::vector<double> risks;
    for (const auto& p : cv_preds) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (data.Y[i] - p[i]) * (data.Y[i] - p[i]);
        risks.push_back(s / static_cast<double>(n));
    }
    auto weights = simplex_least_squares_eg(cv_preds, data.Y, opts.weights);
    auto stack = std::make_shared<models::StackedRegressor>(std::move(full_fits), std::move(weights));
    return OutcomeRegression(std::move(names), std::move(risks), std::move(stack), std::move(warnings));
}

// ---------------------------------------------------------------------------

TreatmentMechanism::TreatmentMechanism(double treated_probability)
    : p1_(std::clamp(treated_probability, kTruncation, 1.0 - kTruncation)) {}

std::vector<double> TreatmentMechanism::predict(std::span<const int> a) const {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = prob(a[i]);
    return out;
}

TreatmentMechanism fit_treatment_mechanism(const Dataset& data) {
    std::size_t treated = 0;
    for (int a : data.A) treated += a == 1 ? 1 : 0;
    if (treated == 0 || treated == data.size())
        throw PositivityViolation("treatment mechanism: only one treatment arm is observed");
    return TreatmentMechanism(static_cast<double>(treated) / static_cast<double>(data.size()));
}

// ---------------------------------------------------------------------------

NuisancePredictions predict_nuisance(const OutcomeRegression& Q, const TreatmentMechanism& g,
                                     const Dataset& data) {
    NuisancePredictions out;
    out.Q1 = Q.predict_at(1, data.W);
    out.Q0 = Q.predict_at(0, data.W);
    out.QA.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.QA[i] = data.A[i] == 1 ? out.Q1[i] : out.Q0[i];
    out.gA = g.predict(data.A);
    return out;
}

std::vector<double> pseudo_outcome(const Dataset& data, const NuisancePredictions& nuisance) {
    std::vector<double> D(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        D[i] = pseudo_outcome_value(data.Y[i], data.A[i], nuisance.gA[i], nuisance.Q1[i],
                                    nuisance.Q0[i]);
    return D;
}

std::vector<double> pseudo_outcome(const Dataset& data, const OutcomeRegression& Q,
                                   const TreatmentMechanism& g) {
    return pseudo_outcome(data, predict_nuisance(Q, g, data));
}

}  // namespace odtr
