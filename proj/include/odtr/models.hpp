#pragma once

// Fitted regressors shared by the nuisance and candidate learners.
//
// A Regressor maps a covariate matrix to one real prediction per row. Fitted
// regressors are immutable and held through shared_ptr<const Regressor>, so
// a fit can be shared across threads and across candidates (the Q-learning
// candidate reuses the outcome regression, for instance).

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "odtr/matrix.hpp"

namespace odtr::models {

class SingularDesign : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Design expansion

enum class Terms {
    Intercept,  // [1]
    Main,       // [1, x_1..x_p]
    Pairwise,   // [1, x_1..x_p, x_i x_j for i < j]
    Single,     // [1, x_column]
};

struct FeatureMap {
    Terms terms = Terms::Main;
    int column = -1;  // only for Terms::Single

    std::size_t width(std::size_t p) const;
    Matrix expand(const Matrix& X) const;
};

enum class Link { Identity, Logit };

// ---------------------------------------------------------------------------
// Regressors

class Regressor {
public:
    virtual ~Regressor() = default;
    virtual void predict(const Matrix& X, std::span<double> out) const = 0;
    virtual nlohmann::json to_json() const = 0;

    std::vector<double> predict(const Matrix& X) const {
        std::vector<double> out(X.rows());
        predict(X, out);
        return out;
    }
};

using RegressorPtr = std::shared_ptr<const Regressor>;

RegressorPtr regressor_from_json(const nlohmann::json& j);

class ConstantModel final : public Regressor {
public:
    explicit ConstantModel(double value) : value_(value) {}
    using Regressor::predict;
    void predict(const Matrix& X, std::span<double> out) const override;
    nlohmann::json to_json() const override;
    double value() const { return value_; }

private:
    double value_;
};

class LinearModel final : public Regressor {
public:
    LinearModel(FeatureMap map, Link link, std::vector<double> beta)
        : map_(map), link_(link), beta_(std::move(beta)) {}
    using Regressor::predict;
    void predict(const Matrix& X, std::span<double> out) const override;
    nlohmann::json to_json() const override;
    const std::vector<double>& coefficients() const { return beta_; }
    const FeatureMap& features() const { return map_; }
    Link link() const { return link_; }

private:
    FeatureMap map_;
    Link link_;
    std::vector<double> beta_;
};

struct TreeParams {
    int max_depth = 4;
    int min_leaf = 10;
    // A split must reduce the squared error by at least this fraction of the
    // root node's squared error.
    double complexity = 0.01;
};

class RegressionTree final : public Regressor {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
        friend bool operator==(const Node&, const Node&) = default;
    };

    explicit RegressionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}
    using Regressor::predict;
    void predict(const Matrix& X, std::span<double> out) const override;
    nlohmann::json to_json() const override;
    const std::vector<Node>& nodes() const { return nodes_; }
    int depth() const;

private:
    std::vector<Node> nodes_;
};

struct NetParams {
    int hidden = 8;
    double decay = 0.01;
    int steps = 500;
    double step_size = 0.01;
    int restarts = 3;
    double init_range = 0.7;
};

// Single hidden layer of tanh units with a linear output.
class NeuralNet final : public Regressor {
public:
    NeuralNet(std::size_t inputs, std::size_t hidden, std::vector<double> params);
    using Regressor::predict;
    void predict(const Matrix& X, std::span<double> out) const override;
    nlohmann::json to_json() const override;

    // Layout: U (hidden x inputs, row-major), b1 (hidden), v (hidden), b2.
    static std::size_t param_count(std::size_t inputs, std::size_t hidden) {
        return hidden * inputs + 2 * hidden + 1;
    }
    const std::vector<double>& params() const { return params_; }

private:
    std::size_t inputs_;
    std::size_t hidden_;
    std::vector<double> params_;
};

// Convex combination of member regressors.
class StackedRegressor final : public Regressor {
public:
    StackedRegressor(std::vector<RegressorPtr> members, std::vector<double> weights);
    using Regressor::predict;
    void predict(const Matrix& X, std::span<double> out) const override;
    nlohmann::json to_json() const override;
    const std::vector<RegressorPtr>& members() const { return members_; }
    const std::vector<double>& weights() const { return weights_; }

private:
    std::vector<RegressorPtr> members_;
    std::vector<double> weights_;
};

// Treatment contrast of a model over [A | W]: f([1 | W]) - f([0 | W]).
class TreatmentContrast final : public Regressor {
public:
    explicit TreatmentContrast(RegressorPtr outcome_model) : model_(std::move(outcome_model)) {}
    using Regressor::predict;
    void predict(const Matrix& W, std::span<double> out) const override;
    nlohmann::json to_json() const override;

private:
    RegressorPtr model_;
};

// [a | W] with the treatment column first.
Matrix with_treatment_column(std::span<const double> a, const Matrix& W);
Matrix with_constant_treatment(double a, const Matrix& W);

// ---------------------------------------------------------------------------
// Fitting

// Solves the k x k symmetric system G x = b in place by Cholesky.
// G is row-major; returns false if G is not numerically positive definite.
bool cholesky_solve(std::vector<double> G, std::vector<double>& b, std::size_t k);

// Least squares with the normal equations. When the Gram matrix is singular a
// ridge jitter of 1e-8 is added to its diagonal if allowed, otherwise
// SingularDesign is thrown.
std::shared_ptr<const LinearModel> fit_linear(FeatureMap map, const Matrix& X,
                                              std::span<const double> y, bool allow_jitter = true);

// Logistic regression by iteratively reweighted least squares with step
// halving. y may be fractional in [0, 1] (quasi-binomial). Throws
// SingularDesign when the design itself is rank deficient.
std::shared_ptr<const LinearModel> fit_logistic(FeatureMap map, const Matrix& X,
                                                std::span<const double> y);

// Variance-reduction regression tree. Splits are searched exhaustively over
// midpoints of sorted distinct values; ties go to the lowest covariate index,
// then the lowest threshold.
std::shared_ptr<const RegressionTree> fit_tree(const Matrix& X, std::span<const double> y,
                                               TreeParams params = {});

struct NetFit {
    std::shared_ptr<const NeuralNet> net;
    double objective = 0.0;     // penalized training loss of the returned weights
    bool converged = false;     // gradient norm fell below 1e-6
    bool improved_to_end = true;  // last iterate was the best one of its restart
};

// Full-batch gradient descent on mean squared error plus decay * |theta|^2.
// Each restart draws its initial weights from derive_seed(seed, "nnet", r)
// and keeps its best iterate; the restart with the lowest objective wins.
NetFit fit_net(const Matrix& X, std::span<const double> y, NetParams params, std::uint64_t seed);

}  // namespace odtr::models
