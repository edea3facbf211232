#include "odtr/superlearner.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "odtr/kernels.hpp"
#include "odtr/nuisance.hpp"

namespace odtr {
namespace {

CandidateSpec blip_spec(BlipKind kind, int covariate, std::span<const std::string> names) {
    CandidateSpec c;
    c.kind = CandidateKind::Blip;
    c.blip.kind = kind;
    c.blip.covariate = covariate;
    c.name = c.blip.name(names);
    return c;
}

CandidateSpec static_spec(int value) {
    CandidateSpec c;
    c.kind = CandidateKind::Static;
    c.fixed.value = value;
    c.name = value ? "treat_all" : "treat_none";
    return c;
}

struct Nuisances {
    TreatmentMechanism g{0.5};
    OutcomeRegression Q;
    std::vector<double> D;
};

Nuisances fit_nuisances(const Dataset& train, int folds, std::uint64_t seed, std::uint64_t index) {
    Nuisances nu;
    nu.g = fit_treatment_mechanism(train);
    const int inner = std::min<int>(folds, static_cast<int>(train.size()));
    nu.Q = fit_outcome_regression(train, make_folds(train.size(), inner,
                                                    derive_seed(seed, "nuisance.folds", index)));
    nu.D = pseudo_outcome(train, nu.Q, nu.g);
    return nu;
}

FittedCandidate fit_candidate(const CandidateSpec& spec, const Dataset& train, const Nuisances& nu,
                              std::uint64_t seed, std::vector<std::string>& notes) {
    FittedCandidate out{spec.name, spec.blip_based(), nullptr};
    switch (spec.kind) {
        case CandidateKind::Blip: {
            auto fit = fit_blip_learner(spec.blip, train, nu.D, nu.Q, seed);
            for (auto& d : fit.diagnostics) notes.push_back(spec.name + ": " + d);
            out.score = fit.surface.model();
            break;
        }
        case CandidateKind::Owl: {
            auto fit = fit_owl(spec.owl, train, nu.g, seed);
            for (auto& d : fit.diagnostics) notes.push_back(spec.name + ": " + d);
            out.score = fit.decision;
            break;
        }
        case CandidateKind::Static:
            out.score = static_decision(spec.fixed);
            break;
    }
    return out;
}

}  // namespace

std::vector<CandidateSpec> library_candidates(Library library,
                                              std::span<const std::string> column_names) {
    std::vector<CandidateSpec> out;
    if (contains_parametric(library))
        for (std::size_t j = 0; j < column_names.size(); ++j)
            out.push_back(blip_spec(BlipKind::UnivariateGlm, static_cast<int>(j), column_names));
    if (contains_ml(library))
        for (BlipKind k : {BlipKind::MainTermsGlm, BlipKind::MeanOnly, BlipKind::InteractionGlm,
                           BlipKind::RegressionTree, BlipKind::NeuralNet})
            out.push_back(blip_spec(k, -1, column_names));
    if (!is_blip_only(library)) {
        out.push_back(blip_spec(BlipKind::QLearningPlugin, -1, column_names));
        CandidateSpec owl;
        owl.kind = CandidateKind::Owl;
        owl.name = "owl";
        out.push_back(owl);
        out.push_back(static_spec(1));
        out.push_back(static_spec(0));
    }
    return out;
}

CrossValidatedLibrary cross_validate_candidates(const Dataset& data,
                                                std::span<const CandidateSpec> specs, int folds,
                                                std::uint64_t seed) {
    data.validate();
    const std::size_t n = data.size();
    const std::size_t J = specs.size();
    if (J == 0) throw InvalidConfiguration("empty candidate library");

    CrossValidatedLibrary out;
    CandidatePredictions& p = out.preds;
    p.folds = make_folds(n, folds, seed);
    p.A = data.A;
    p.Y = data.Y;
    p.QA.resize(n);
    p.Q1.resize(n);
    p.Q0.resize(n);
    p.gA.resize(n);
    p.D.resize(n);
    std::vector<std::vector<double>> scores(J, std::vector<double>(n));
    std::vector<bool> failed(J, false);
    std::vector<std::string> notes;

    for (int v = 1; v <= folds; ++v) {
        const auto train_rows = p.folds.training_rows(v);
        const auto valid_rows = p.folds.validation_rows(v);
        const Dataset train = data.subset(train_rows);
        const Dataset valid = data.subset(valid_rows);
        const Nuisances nu = fit_nuisances(train, folds, seed, static_cast<std::uint64_t>(v));

        const auto np = predict_nuisance(nu.Q, nu.g, valid);
        const auto Dv = pseudo_outcome(valid, np);
        for (std::size_t k = 0; k < valid_rows.size(); ++k) {
            const std::size_t i = valid_rows[k];
            p.QA[i] = np.QA[k];
            p.Q1[i] = np.Q1[k];
            p.Q0[i] = np.Q0[k];
            p.gA[i] = np.gA[k];
            p.D[i] = Dv[k];
        }

        for (std::size_t j = 0; j < J; ++j) {
            if (failed[j]) continue;
            try {
                const auto fc = fit_candidate(specs[j], train, nu,
                                              derive_seed(seed, "candidate." + specs[j].name, v),
                                              notes);
                const auto pred = fc.score->predict(valid.W);
                for (std::size_t k = 0; k < valid_rows.size(); ++k) scores[j][valid_rows[k]] = pred[k];
            } catch (const PositivityViolation&) {
                throw;
            } catch (const std::exception& e) {
                failed[j] = true;
                out.diagnostics.push_back("dropped " + specs[j].name + " (fold " +
                                          std::to_string(v) + "): " + e.what());
            }
        }
    }

    const Nuisances full = fit_nuisances(data, folds, seed, 0);
    std::vector<FittedCandidate> refits(J);
    for (std::size_t j = 0; j < J; ++j) {
        if (failed[j]) continue;
        try {
            refits[j] = fit_candidate(specs[j], data, full,
                                      derive_seed(seed, "candidate." + specs[j].name, 0), notes);
        } catch (const PositivityViolation&) {
            throw;
        } catch (const std::exception& e) {
            failed[j] = true;
            out.diagnostics.push_back("dropped " + specs[j].name + " (full-data refit): " + e.what());
        }
    }

    for (std::size_t j = 0; j < J; ++j) {
        if (failed[j]) continue;
        out.specs.push_back(specs[j]);
        out.refits.push_back(std::move(refits[j]));
        p.names.push_back(specs[j].name);
        p.blip.push_back(specs[j].blip_based() ? scores[j] : std::vector<double>{});
        p.rule.push_back(TreatmentRule::from_scores(scores[j]).assignment);
    }
    for (auto& w : full.Q.warnings()) out.diagnostics.push_back(w);
    std::sort(notes.begin(), notes.end());
    notes.erase(std::unique(notes.begin(), notes.end()), notes.end());
    for (auto& d : notes) out.diagnostics.push_back(d);
    if (out.specs.empty()) throw std::runtime_error("every candidate in the library failed");
    return out;
}

// ---------------------------------------------------------------------------

bool FittedODTR::has_blip() const {
    if (config.metalearner == Metalearner::BlipCombination) return true;
    if (config.metalearner == Metalearner::Discrete) {
        const auto j = selected();
        return j && candidates[*j].blip_based;
    }
    return false;
}

std::optional<std::size_t> FittedODTR::selected() const {
    if (config.metalearner != Metalearner::Discrete) return std::nullopt;
    for (std::size_t j = 0; j < alpha.size(); ++j)
        if (alpha.alpha[j] == 1.0) return j;
    return std::nullopt;
}

RulePrediction FittedODTR::predict(const Matrix& W) const {
    if (W.cols() != covariates)
        throw DataError("predict_rule: expected " + std::to_string(covariates) + " covariates, got " +
                        std::to_string(W.cols()));
    RulePrediction out;
    switch (config.metalearner) {
        case Metalearner::Discrete: {
            const auto j = selected();
            if (!j) throw std::logic_error("discrete fit without a selected candidate");
            auto s = candidates[*j].score->predict(W);
            out.rule = TreatmentRule::from_scores(s);
            if (candidates[*j].blip_based) out.blip = std::move(s);
            break;
        }
        case Metalearner::BlipCombination: {
            std::vector<double> b(W.rows(), 0.0);
            for (std::size_t j = 0; j < candidates.size(); ++j)
                if (alpha.alpha[j] != 0.0)
                    kernels::axpy(alpha.alpha[j], candidates[j].score->predict(W), b);
            out.rule = TreatmentRule::from_scores(b);
            out.blip = std::move(b);
            break;
        }
        case Metalearner::VoteCombination: {
            std::vector<double> votes(W.rows(), 0.0);
            for (std::size_t j = 0; j < candidates.size(); ++j) {
                if (alpha.alpha[j] == 0.0) continue;
                const auto s = candidates[j].score->predict(W);
                for (std::size_t i = 0; i < s.size(); ++i)
                    if (s[i] > 0.0) votes[i] += alpha.alpha[j];
            }
            out.rule.assignment.resize(W.rows());
            for (std::size_t i = 0; i < votes.size(); ++i) out.rule.assignment[i] = votes[i] > 0.5;
            break;
        }
    }
    return out;
}

RulePrediction predict_rule(const FittedODTR& fit, const Matrix& W) { return fit.predict(W); }

namespace {

FittedODTR assemble(const Dataset& data, const EnsembleConfig& config,
                    const CrossValidatedLibrary& cv) {
    const auto wanted = library_candidates(config.library, data.column_names);
    std::vector<std::size_t> idx;
    FittedODTR fit;
    fit.config = config;
    for (const auto& w : wanted) {
        const auto it = std::find_if(cv.specs.begin(), cv.specs.end(),
                                     [&](const CandidateSpec& s) { return s.name == w.name; });
        if (it == cv.specs.end()) {
            fit.diagnostics.push_back("candidate " + w.name + " unavailable after cross-validation");
            continue;
        }
        idx.push_back(static_cast<std::size_t>(it - cv.specs.begin()));
    }
    if (idx.empty()) throw std::runtime_error("every candidate in the library failed");
    const auto preds = cv.preds.select(idx);
    const auto weights = optimize_weights(preds, config.risk, config.metalearner, config.seed);

    for (std::size_t j : idx) fit.candidates.push_back(cv.refits[j]);
    fit.alpha = weights.alpha;
    fit.candidate_cv_risks = weights.candidate_risks;
    fit.cv_risk = weights.cv_risk;
    fit.folds = cv.preds.folds;
    // Diagnostics about candidates outside this library are left out.
    for (const auto& d : cv.diagnostics) {
        bool other = false;
        for (std::size_t j = 0; j < cv.specs.size(); ++j) {
            if (std::find(idx.begin(), idx.end(), j) != idx.end()) continue;
            const auto& nm = cv.specs[j].name;
            if (d.rfind(nm + ":", 0) == 0) other = true;
        }
        if (!other) fit.diagnostics.push_back(d);
    }
    fit.column_names = data.column_names;
    fit.covariates = data.covariates();
    auto pred = fit.predict(data.W);
    fit.training_rule = std::move(pred.rule.assignment);
    if (pred.blip) fit.training_blip = std::move(*pred.blip);
    return fit;
}

}  // namespace

std::vector<FittedODTR> fit_odtr_superlearners(const Dataset& data,
                                               std::span<const EnsembleConfig> configs) {
    if (configs.empty()) return {};
    for (const auto& c : configs) {
        validate_config(c);
        if (c.folds != configs[0].folds || c.seed != configs[0].seed)
            throw InvalidConfiguration("configurations fitted together must share folds and seed");
    }
    data.validate();
    if (static_cast<std::size_t>(configs[0].folds) > data.size())
        throw InvalidConfiguration("more folds than observations");

    // Union of the libraries in canonical order.
    std::vector<CandidateSpec> all;
    for (const auto& s : library_candidates(Library::AllBlipPlusMaximizers, data.column_names)) {
        const bool needed = std::any_of(configs.begin(), configs.end(), [&](const EnsembleConfig& c) {
            const auto lib = library_candidates(c.library, data.column_names);
            return std::any_of(lib.begin(), lib.end(),
                               [&](const CandidateSpec& x) { return x.name == s.name; });
        });
        if (needed) all.push_back(s);
    }
    const auto cv = cross_validate_candidates(data, all, configs[0].folds, configs[0].seed);
    std::vector<FittedODTR> out;
    for (const auto& c : configs) out.push_back(assemble(data, c, cv));
    return out;
}

FittedODTR fit_odtr_superlearner(const Dataset& data, const EnsembleConfig& config) {
    return fit_odtr_superlearners(data, std::span<const EnsembleConfig>(&config, 1)).front();
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const FittedODTR& fit) {
    nlohmann::json j;
    j["library"] = to_string(fit.config.library);
    j["metalearner"] = to_string(fit.config.metalearner);
    j["risk"] = to_string(fit.config.risk);
    j["folds"] = fit.config.folds;
    j["seed"] = fit.config.seed;
    j["covariates"] = fit.covariates;
    j["column_names"] = fit.column_names;
    j["alpha"] = fit.alpha.alpha;
    j["candidate_cv_risks"] = fit.candidate_cv_risks;
    j["cv_risk"] = fit.cv_risk;
    j["fold_of"] = fit.folds.fold_of;
    j["diagnostics"] = fit.diagnostics;
    auto& cands = j["candidates"] = nlohmann::json::array();
    for (const auto& c : fit.candidates)
        cands.push_back({{"name", c.name}, {"blip_based", c.blip_based}, {"model", c.score->to_json()}});
    return j;
}

FittedODTR fitted_odtr_from_json(const nlohmann::json& j) {
    try {
        FittedODTR fit;
        fit.config.library = parse_library(j.at("library").get<std::string>());
        fit.config.metalearner = parse_metalearner(j.at("metalearner").get<std::string>());
        fit.config.risk = parse_risk(j.at("risk").get<std::string>());
        fit.config.folds = j.at("folds").get<int>();
        fit.config.seed = j.at("seed").get<std::uint64_t>();
        validate_config(fit.config);
        fit.covariates = j.at("covariates").get<std::size_t>();
        fit.column_names = j.at("column_names").get<std::vector<std::string>>();
        fit.alpha.alpha = j.at("alpha").get<std::vector<double>>();
        fit.candidate_cv_risks = j.at("candidate_cv_risks").get<std::vector<double>>();
        fit.cv_risk = j.at("cv_risk").get<double>();
        fit.folds.fold_of = j.at("fold_of").get<std::vector<int>>();
        fit.folds.folds = fit.config.folds;
        fit.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
        for (const auto& c : j.at("candidates"))
            fit.candidates.push_back({c.at("name").get<std::string>(), c.at("blip_based").get<bool>(),
                                      models::regressor_from_json(c.at("model"))});
        if (fit.candidates.size() != fit.alpha.size())
            throw DataError("fit artifact: weight count does not match candidates");
        fit.alpha.require_simplex();
        return fit;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("fit artifact: ") + e.what());
    }
}

}  // namespace odtr
