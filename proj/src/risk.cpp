#include "odtr/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <unordered_map>

#include "odtr/kernels.hpp"
#include "odtr/simplex.hpp"

namespace odtr {
namespace {

double logit_clamped(double q, double c) {
    q = std::clamp(q, c, 1.0 - c);
    return std::log(q / (1.0 - q));
}

std::size_t vertex_index(const WeightVector& alpha) {
    return static_cast<std::size_t>(
        std::max_element(alpha.alpha.begin(), alpha.alpha.end()) - alpha.alpha.begin());
}

struct Solved {
    double epsilon = 0.0;
    double score = 0.0;  // unnormalized
    int steps = 0;
    bool bisection = false;
};

// Root of sum_i w_i (y_i - expit(off_i + eps)); tol applies to score / scale.
Solved solve_fluctuation(std::span<const double> off, std::span<const double> w,
                         std::span<const double> y, double scale, const TmleOptions& opts) {
    const auto& k = kernels::active();
    const std::size_t m = off.size();
    Solved out;
    if (m == 0) return out;
    auto score_at = [&](double eps, double* info) {
        double s = 0.0, h = 0.0;
        k.logistic_score(off.data(), w.data(), y.data(), eps, m, &s, &h);
        if (info) *info = h;
        return s;
    };

    double eps = 0.0, info = 0.0;
    double s = score_at(eps, &info);
    bool converged = std::abs(s) / scale < opts.tolerance;
    while (!converged && out.steps < opts.max_newton) {
        if (!(info > 0.0) || !std::isfinite(s)) break;
        eps += s / info;
        ++out.steps;
        if (!std::isfinite(eps) || std::abs(eps) > opts.bracket) break;
        s = score_at(eps, &info);
        converged = std::abs(s) / scale < opts.tolerance;
    }
    if (converged) {
        out.epsilon = eps;
        out.score = s;
        return out;
    }

    // The score is nonincreasing in eps, so bisect on the bracket.
    out.bisection = true;
    double lo = -opts.bracket, hi = opts.bracket;
    const double slo = score_at(lo, nullptr), shi = score_at(hi, nullptr);
    if (slo <= 0.0) {
        out.epsilon = lo;
        out.score = slo;
        return out;
    }
    if (shi >= 0.0) {
        out.epsilon = hi;
        out.score = shi;
        return out;
    }
    double mid = 0.0, smid = 0.0;
    for (int it = 0; it < 400; ++it) {
        mid = 0.5 * (lo + hi);
        smid = score_at(mid, nullptr);
        if (std::abs(smid) / scale < opts.tolerance || hi - lo < 1e-15) break;
        (smid > 0.0 ? lo : hi) = mid;
    }
    out.epsilon = mid;
    out.score = smid;
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

bool CandidatePredictions::all_blip() const {
    for (const auto& b : blip)
        if (b.empty()) return false;
    return true;
}

void CandidatePredictions::validate() const {
    const std::size_t n = rows();
    auto check = [n](std::size_t m, const char* what) {
        if (m != n) throw std::invalid_argument(std::string("candidate predictions: bad length of ") + what);
    };
    check(folds.size(), "folds");
    check(Y.size(), "Y");
    check(QA.size(), "QA");
    check(Q1.size(), "Q1");
    check(Q0.size(), "Q0");
    check(gA.size(), "gA");
    check(D.size(), "D");
    if (blip.size() != names.size() || rule.size() != names.size())
        throw std::invalid_argument("candidate predictions: candidate count mismatch");
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (!blip[j].empty()) check(blip[j].size(), "blip");
        check(rule[j].size(), "rule");
    }
}

CandidatePredictions CandidatePredictions::select(std::span<const std::size_t> candidates) const {
    CandidatePredictions out;
    out.folds = folds;
    out.A = A;
    out.Y = Y;
    out.QA = QA;
    out.Q1 = Q1;
    out.Q0 = Q0;
    out.gA = gA;
    out.D = D;
    for (std::size_t j : candidates) {
        out.names.push_back(names.at(j));
        out.blip.push_back(blip[j]);
        out.rule.push_back(rule[j]);
    }
    return out;
}

std::vector<double> combine_blip(const CandidatePredictions& preds, const WeightVector& alpha) {
    alpha.require_simplex();
    if (alpha.size() != preds.candidates())
        throw std::invalid_argument("combine_blip: weight count mismatch");
    std::vector<double> out(preds.rows(), 0.0);
    for (std::size_t j = 0; j < alpha.size(); ++j) {
        if (preds.blip[j].empty())
            throw std::invalid_argument("combine_blip: candidate " + preds.names[j] + " has no blip");
        if (preds.blip[j].size() != out.size())
            throw std::invalid_argument("combine_blip: candidate " + preds.names[j] + " has the wrong length");
        if (alpha.alpha[j] != 0.0) kernels::axpy(alpha.alpha[j], preds.blip[j], out);
    }
    return out;
}

TreatmentRule combine_vote(const CandidatePredictions& preds, const WeightVector& alpha) {
    alpha.require_simplex();
    if (alpha.size() != preds.candidates())
        throw std::invalid_argument("combine_vote: weight count mismatch");
    std::vector<double> votes(preds.rows(), 0.0);
    for (std::size_t j = 0; j < alpha.size(); ++j) {
        const double a = alpha.alpha[j];
        if (preds.rule[j].size() != votes.size())
            throw std::invalid_argument("combine_vote: candidate " + preds.names[j] + " has the wrong length");
        if (a == 0.0) continue;
        for (std::size_t i = 0; i < votes.size(); ++i)
            if (preds.rule[j][i] == 1) votes[i] += a;
    }
    TreatmentRule r;
    r.assignment.resize(votes.size());
    for (std::size_t i = 0; i < votes.size(); ++i) r.assignment[i] = votes[i] > 0.5 ? 1 : 0;
    return r;
}

RiskValue risk_mse(std::span<const double> blip, std::span<const double> D) {
    if (blip.size() != D.size() || D.empty())
        throw std::invalid_argument("risk_mse: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < D.size(); ++i) s += (D[i] - blip[i]) * (D[i] - blip[i]);
    return {s / static_cast<double>(D.size()), Risk::MSE};
}

// ---------------------------------------------------------------------------

TmleResult target_mean_under_rule(const TmleFoldInput& f, const TmleOptions& opts) {
    const std::size_t n = f.A.size();
    if (n == 0) throw std::invalid_argument("target_mean_under_rule: empty fold");
    std::vector<double> off, w, y, offd(n);
    for (std::size_t i = 0; i < n; ++i) {
        offd[i] = logit_clamped(f.d[i] == 1 ? f.Q1[i] : f.Q0[i], opts.clamp);
        if (f.A[i] != f.d[i]) continue;
        off.push_back(logit_clamped(f.QA[i], opts.clamp));
        w.push_back(1.0 / f.gA[i]);
        y.push_back(f.Y[i]);
    }
    const double nd = static_cast<double>(n);
    const Solved s = solve_fluctuation(off, w, y, nd, opts);
    TmleResult r;
    r.epsilon = s.epsilon;
    r.score = s.score / nd;
    r.newton_steps = s.steps;
    r.bisection = s.bisection;
    r.estimate = kernels::active().sum_expit(offd.data(), s.epsilon, n) / nd;
    return r;
}

RuleValueEstimator::RuleValueEstimator(const CandidatePredictions& p, TmleOptions opts)
    : opts_(opts), A_(p.A), Y_(p.Y) {
    const std::size_t n = p.rows();
    offA_.resize(n);
    off1_.resize(n);
    off0_.resize(n);
    invg_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        offA_[i] = logit_clamped(p.QA[i], opts.clamp);
        off1_[i] = logit_clamped(p.Q1[i], opts.clamp);
        off0_[i] = logit_clamped(p.Q0[i], opts.clamp);
        invg_[i] = 1.0 / p.gA[i];
    }
    for (int v = 1; v <= p.folds.folds; ++v) {
        Fold f{p.folds.validation_rows(v)};
        if (!f.rows.empty()) folds_.push_back(std::move(f));
    }
    off_buf_.reserve(n);
    w_buf_.reserve(n);
    y_buf_.reserve(n);
    offd_buf_.reserve(n);
}

CvTmleResult RuleValueEstimator::evaluate(std::span<const int> rule) const {
    if (rule.size() != A_.size()) throw std::invalid_argument("rule value: length mismatch");
    CvTmleResult out;
    double total = 0.0;
    for (const auto& f : folds_) {
        off_buf_.clear();
        w_buf_.clear();
        y_buf_.clear();
        offd_buf_.clear();
        for (std::size_t i : f.rows) {
            offd_buf_.push_back(rule[i] == 1 ? off1_[i] : off0_[i]);
            if (A_[i] != rule[i]) continue;
            off_buf_.push_back(offA_[i]);
            w_buf_.push_back(invg_[i]);
            y_buf_.push_back(Y_[i]);
        }
        const double nv = static_cast<double>(f.rows.size());
        const Solved s = solve_fluctuation(off_buf_, w_buf_, y_buf_, nv, opts_);
        TmleResult r;
        r.epsilon = s.epsilon;
        r.score = s.score / nv;
        r.newton_steps = s.steps;
        r.bisection = s.bisection;
        r.estimate = kernels::active().sum_expit(offd_buf_.data(), s.epsilon, f.rows.size()) / nv;
        total += r.estimate * nv;
        out.folds.push_back(r);
    }
    out.estimate = total / static_cast<double>(A_.size());
    return out;
}

double RuleValueEstimator::estimate(std::span<const int> rule) const {
    return evaluate(rule).estimate;
}

CvTmleResult tmle_mean_under_rule(const CandidatePredictions& preds, std::span<const int> rule,
                                  const TmleOptions& opts) {
    return RuleValueEstimator(preds, opts).evaluate(rule);
}

// ---------------------------------------------------------------------------

namespace {

class RiskEvaluator {
public:
    RiskEvaluator(const CandidatePredictions& p, Risk risk, Metalearner m)
        : p_(p), risk_(risk), m_(m) {
        if (risk == Risk::MSE && m == Metalearner::VoteCombination)
            throw InvalidConfiguration("the vote metalearner has no blip for the MSE risk");
        if (m == Metalearner::BlipCombination && !p.all_blip())
            throw InvalidConfiguration("blip combination needs blip-based candidates");
        if (risk == Risk::MeanOutcomeUnderRule) value_.emplace(p);
    }

    double operator()(const WeightVector& alpha) {
        switch (m_) {
            case Metalearner::Discrete: {
                const std::size_t j = vertex_index(alpha);
                if (risk_ == Risk::MSE) {
                    if (p_.blip[j].empty())
                        throw InvalidConfiguration("MSE risk needs a blip for " + p_.names[j]);
                    return risk_mse(p_.blip[j], p_.D).value;
                }
                return rule_risk(p_.rule[j]);
            }
            case Metalearner::BlipCombination: {
                const auto b = combine_blip(p_, alpha);
                if (risk_ == Risk::MSE) return risk_mse(b, p_.D).value;
                return rule_risk(TreatmentRule::from_scores(b).assignment);
            }
            case Metalearner::VoteCombination:
                return rule_risk(combine_vote(p_, alpha).assignment);
        }
        return std::numeric_limits<double>::infinity();
    }

private:
    double rule_risk(const std::vector<int>& rule) {
        std::string key(rule.size(), '0');
        for (std::size_t i = 0; i < rule.size(); ++i) key[i] = rule[i] ? '1' : '0';
        const auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const double r = -value_->estimate(rule);
        cache_.emplace(std::move(key), r);
        return r;
    }

    const CandidatePredictions& p_;
    Risk risk_;
    Metalearner m_;
    std::optional<RuleValueEstimator> value_;
    std::unordered_map<std::string, double> cache_;
};

}  // namespace

double cv_risk(const CandidatePredictions& preds, Risk risk, Metalearner metalearner,
               const WeightVector& alpha) {
    alpha.require_simplex();
    return RiskEvaluator(preds, risk, metalearner)(alpha);
}

WeightFit optimize_weights(const CandidatePredictions& preds, Risk risk, Metalearner metalearner,
                           std::uint64_t seed, const WeightSearchOptions& opts) {
    preds.validate();
    const std::size_t J = preds.candidates();
    if (J == 0) throw std::invalid_argument("optimize_weights: no candidates");
    RiskEvaluator eval(preds, risk, metalearner);

    WeightFit fit;
    fit.candidate_risks.resize(J);
    std::size_t best_vertex = 0;
    for (std::size_t j = 0; j < J; ++j) {
        fit.candidate_risks[j] = eval(WeightVector::vertex(J, j));
        if (fit.candidate_risks[j] < fit.candidate_risks[best_vertex]) best_vertex = j;
    }
    fit.alpha = WeightVector::vertex(J, best_vertex);
    fit.cv_risk = fit.candidate_risks[best_vertex];
    if (J == 1 || metalearner == Metalearner::Discrete) return fit;

    if (metalearner == Metalearner::BlipCombination && risk == Risk::MSE) {
        const EgOptions eg{opts.eg_iterations, opts.eg_step, 0.0, opts.eg_tolerance};
        auto alpha = simplex_least_squares_eg(preds.blip, preds.D, eg);
        alpha = simplex_least_squares_exact(preds.blip, preds.D, std::move(alpha));
        WeightVector w{std::move(alpha)};
        const double r = eval(w);
        if (r < fit.cv_risk) {
            fit.alpha = std::move(w);
            fit.cv_risk = r;
        }
        return fit;
    }

    // Derivative-free search. Only strict improvements replace the incumbent,
    // so the first minimizer in evaluation order is kept.
    auto consider = [&](WeightVector w) {
        const double r = eval(w);
        if (r < fit.cv_risk) {
            fit.cv_risk = r;
            fit.alpha = std::move(w);
            return true;
        }
        return false;
    };
    consider(WeightVector::uniform(J));
    Rng rng = make_rng(seed, "alpha.dirichlet");
    for (int d = 0; d < opts.dirichlet_draws; ++d) {
        std::vector<double> a(J);
        double s = 0.0;
        for (auto& v : a) {
            v = -std::log1p(-uniform01(rng));
            s += v;
        }
        for (auto& v : a) v /= s;
        consider(WeightVector{std::move(a)});
    }

    const int grid = std::max(opts.grid_points, 2);
    for (int round = 0; round < opts.pair_rounds; ++round) {
        bool improved = false;
        for (std::size_t j = 0; j + 1 < J; ++j)
            for (std::size_t k = j + 1; k < J; ++k) {
                const double mass = fit.alpha.alpha[j] + fit.alpha.alpha[k];
                if (mass <= 0.0) continue;
                const WeightVector base = fit.alpha;
                for (int g = 0; g < grid; ++g) {
                    const double t = static_cast<double>(g) / static_cast<double>(grid - 1);
                    WeightVector w = base;
                    w.alpha[j] = t * mass;
                    w.alpha[k] = mass - w.alpha[j];
                    if (w.alpha == fit.alpha.alpha) continue;
                    improved = consider(std::move(w)) || improved;
                }
            }
        if (!improved) break;
    }
    return fit;
}

}  // namespace odtr
