#include <algorithm>

#include "odtr/kernels.hpp"
#include "odtr/models.hpp"

namespace odtr::models {

using nlohmann::json;

void ConstantModel::predict(const Matrix& X, std::span<double> out) const {
    std::fill_n(out.begin(), X.rows(), value_);
}

json ConstantModel::to_json() const { return {{"type", "constant"}, {"value", value_}}; }

StackedRegressor::StackedRegressor(std::vector<RegressorPtr> members, std::vector<double> weights)
    : members_(std::move(members)), weights_(std::move(weights)) {
    if (members_.size() != weights_.size() || members_.empty())
        throw std::invalid_argument("StackedRegressor: members and weights differ in length");
}

void StackedRegressor::predict(const Matrix& X, std::span<double> out) const {
    std::fill_n(out.begin(), X.rows(), 0.0);
    std::vector<double> tmp(X.rows());
    for (std::size_t m = 0; m < members_.size(); ++m) {
        if (weights_[m] == 0.0) continue;
        members_[m]->predict(X, tmp);
        kernels::axpy(weights_[m], tmp, out.first(X.rows()));
    }
}

json StackedRegressor::to_json() const {
    json members = json::array();
    for (const auto& m : members_) members.push_back(m->to_json());
    return {{"type", "stack"}, {"members", members}, {"weights", weights_}};
}

Matrix with_treatment_column(std::span<const double> a, const Matrix& W) {
    Matrix X(W.rows(), W.cols() + 1);
    std::copy(a.begin(), a.end(), X.col(0).begin());
    for (std::size_t j = 0; j < W.cols(); ++j)
        std::copy_n(W.col(j).begin(), W.rows(), X.col(j + 1).begin());
    return X;
}

Matrix with_constant_treatment(double a, const Matrix& W) {
    const std::vector<double> col(W.rows(), a);
    return with_treatment_column(col, W);
}

void TreatmentContrast::predict(const Matrix& W, std::span<double> out) const {
    std::vector<double> q0(W.rows());
    model_->predict(with_constant_treatment(1.0, W), out);
    model_->predict(with_constant_treatment(0.0, W), q0);
    for (std::size_t i = 0; i < W.rows(); ++i) out[i] -= q0[i];
}

json TreatmentContrast::to_json() const { return {{"type", "contrast"}, {"model", model_->to_json()}}; }

namespace {

std::string_view terms_name(Terms t) {
    switch (t) {
        case Terms::Intercept: return "intercept";
        case Terms::Main: return "main";
        case Terms::Pairwise: return "pairwise";
        case Terms::Single: return "single";
    }
    return "?";
}

Terms parse_terms(const std::string& s) {
    if (s == "intercept") return Terms::Intercept;
    if (s == "main") return Terms::Main;
    if (s == "pairwise") return Terms::Pairwise;
    if (s == "single") return Terms::Single;
    throw std::invalid_argument("unknown feature terms '" + s + "'");
}

}  // namespace

json LinearModel::to_json() const {
    return {{"type", "linear"},
            {"terms", terms_name(map_.terms)},
            {"column", map_.column},
            {"link", link_ == Link::Logit ? "logit" : "identity"},
            {"beta", beta_}};
}

json RegressionTree::to_json() const {
    json nodes = json::array();
    for (const auto& n : nodes_)
        nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.value}));
    return {{"type", "tree"}, {"nodes", nodes}};
}

json NeuralNet::to_json() const {
    return {{"type", "net"}, {"inputs", inputs_}, {"hidden", hidden_}, {"params", params_}};
}

RegressorPtr regressor_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "constant") return std::make_shared<ConstantModel>(j.at("value").get<double>());
    if (type == "linear") {
        FeatureMap map{parse_terms(j.at("terms").get<std::string>()), j.at("column").get<int>()};
        const Link link = j.at("link").get<std::string>() == "logit" ? Link::Logit : Link::Identity;
        return std::make_shared<LinearModel>(map, link, j.at("beta").get<std::vector<double>>());
    }
    if (type == "tree") {
        std::vector<RegressionTree::Node> nodes;
        for (const auto& a : j.at("nodes"))
            nodes.push_back({a.at(0).get<int>(), a.at(1).get<double>(), a.at(2).get<int>(),
                             a.at(3).get<int>(), a.at(4).get<double>()});
        if (nodes.empty()) throw std::invalid_argument("tree without nodes");
        return std::make_shared<RegressionTree>(std::move(nodes));
    }
    if (type == "net")
        return std::make_shared<NeuralNet>(j.at("inputs").get<std::size_t>(),
                                           j.at("hidden").get<std::size_t>(),
                                           j.at("params").get<std::vector<double>>());
    if (type == "stack") {
        std::vector<RegressorPtr> members;
        for (const auto& m : j.at("members")) members.push_back(regressor_from_json(m));
        return std::make_shared<StackedRegressor>(std::move(members),
                                                  j.at("weights").get<std::vector<double>>());
    }
    if (type == "contrast") return std::make_shared<TreatmentContrast>(regressor_from_json(j.at("model")));
    throw std::invalid_argument("unknown regressor type '" + type + "'");
}

}  // namespace odtr::models
