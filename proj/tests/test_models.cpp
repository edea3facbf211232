#include <cmath>
#include <random>

#include "doctest.h"
#include "odtr/models.hpp"

using namespace odtr;
using namespace odtr::models;

namespace {

Matrix random_matrix(std::size_t n, std::size_t p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    Matrix X(n, p);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < n; ++i) X(i, j) = d(rng);
    return X;
}

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_same_predictions(const Regressor& a, const Regressor& b, const Matrix& X) {
    const auto pa = a.predict(X), pb = b.predict(X);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);
}

}  // namespace

TEST_CASE("feature maps") {
    Matrix X(2, 3);
    X(0, 0) = 1; X(0, 1) = 2; X(0, 2) = 3;
    X(1, 0) = -1; X(1, 1) = 0; X(1, 2) = 4;
    CHECK(FeatureMap{Terms::Intercept}.width(3) == 1);
    CHECK(FeatureMap{Terms::Main}.width(3) == 4);
    CHECK(FeatureMap{Terms::Pairwise}.width(3) == 7);
    CHECK(FeatureMap{Terms::Single, 1}.width(3) == 2);
    const Matrix P = FeatureMap{Terms::Pairwise}.expand(X);
    // [1, x1, x2, x3, x1x2, x1x3, x2x3]
    CHECK(P(0, 0) == 1.0);
    CHECK(P(0, 4) == 2.0);
    CHECK(P(0, 5) == 3.0);
    CHECK(P(0, 6) == 6.0);
    CHECK(P(1, 5) == -4.0);
    const Matrix S = FeatureMap{Terms::Single, 2}.expand(X);
    CHECK(S.cols() == 2);
    CHECK(S(1, 1) == 4.0);
}

TEST_CASE("least squares recovers an exact linear relation") {
    const Matrix X = random_matrix(50, 2, 1);
    std::vector<double> y(50);
    for (std::size_t i = 0; i < 50; ++i) y[i] = 1.5 - 2.0 * X(i, 0) + 0.25 * X(i, 1);
    const auto m = fit_linear({Terms::Main}, X, y);
    REQUIRE(m->coefficients().size() == 3);
    CHECK(m->coefficients()[0] == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(m->coefficients()[1] == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(m->coefficients()[2] == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("singular designs") {
    Matrix X(10, 2);
    std::vector<double> y(10);
    for (std::size_t i = 0; i < 10; ++i) {
        X(i, 0) = static_cast<double>(i);
        X(i, 1) = 2.0 * static_cast<double>(i);
        y[i] = static_cast<double>(i % 2);
    }
    CHECK_THROWS_AS(fit_linear({Terms::Main}, X, y, false), SingularDesign);
    CHECK_NOTHROW(fit_linear({Terms::Main}, X, y, true));
    CHECK_THROWS_AS(fit_logistic({Terms::Main}, X, y), SingularDesign);
}

TEST_CASE("cholesky solve") {
    std::vector<double> G{4, 2, 2, 3};
    std::vector<double> b{2, 1};
    REQUIRE(cholesky_solve(G, b, 2));
    CHECK(b[0] == doctest::Approx(0.5));
    CHECK(b[1] == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<double> bad{1, 2, 2, 1};
    std::vector<double> rhs{1, 1};
    CHECK(!cholesky_solve(bad, rhs, 2));
}

TEST_CASE("logistic regression satisfies the score equations") {
    const std::size_t n = 2000;
    const Matrix X = random_matrix(n, 2, 7);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = u(rng) < expit(0.3 + X(i, 0) - 0.5 * X(i, 1)) ? 1.0 : 0.0;
    const auto m = fit_logistic({Terms::Main}, X, y);
    CHECK(m->link() == Link::Logit);
    const auto p = m->predict(X);
    // Independent check: X'(y - p) = 0 at the MLE.
    double s0 = 0, s1 = 0, s2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - p[i];
        s0 += r;
        s1 += r * X(i, 0);
        s2 += r * X(i, 1);
    }
    CHECK(std::abs(s0) < 1e-6 * n);
    CHECK(std::abs(s1) < 1e-6 * n);
    CHECK(std::abs(s2) < 1e-6 * n);
    CHECK(m->coefficients()[1] == doctest::Approx(1.0).epsilon(0.2));
    for (double v : p) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("regression tree recovers a step") {
    const std::size_t n = 400;
    const Matrix X = random_matrix(n, 3, 3);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = X(i, 1) > 0.2 ? 1.0 : 0.0;
    const auto t = fit_tree(X, y, {4, 5, 0.01});
    REQUIRE(t->nodes().size() == 3);
    CHECK(t->nodes()[0].feature == 1);
    CHECK(t->depth() == 1);
    const auto p = t->predict(X);
    for (std::size_t i = 0; i < n; ++i) CHECK(p[i] == y[i]);

    SUBCASE("constant outcome gives a single leaf") {
        std::vector<double> c(n, 0.3);
        const auto leaf = fit_tree(X, c);
        CHECK(leaf->nodes().size() == 1);
        CHECK(leaf->predict(X)[0] == doctest::Approx(0.3));
    }
    SUBCASE("depth and leaf size limits hold") {
        std::vector<double> noisy(n);
        for (std::size_t i = 0; i < n; ++i) noisy[i] = X(i, 0) + X(i, 2) * X(i, 1);
        const auto deep = fit_tree(X, noisy, {3, 20, 0.0});
        CHECK(deep->depth() <= 3);
        std::vector<int> count(deep->nodes().size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            int k = 0;
            while (deep->nodes()[k].feature >= 0)
                k = X(i, deep->nodes()[k].feature) <= deep->nodes()[k].threshold ? deep->nodes()[k].left
                                                                                   : deep->nodes()[k].right;
            ++count[k];
        }
        for (std::size_t k = 0; k < count.size(); ++k)
            if (deep->nodes()[k].feature < 0) CHECK(count[k] >= 20);
    }
}

TEST_CASE("complexity threshold prunes weak splits") {
    const std::size_t n = 300;
    const Matrix X = random_matrix(n, 1, 4);
    std::vector<double> y(n);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> e;
    for (std::size_t i = 0; i < n; ++i) y[i] = e(rng);
    const auto loose = fit_tree(X, y, {6, 5, 0.0});
    const auto strict = fit_tree(X, y, {6, 5, 0.5});
    CHECK(strict->nodes().size() < loose->nodes().size());
    CHECK(strict->nodes().size() == 1);
}

TEST_CASE("neural net fits a smooth function and is seed deterministic") {
    const std::size_t n = 300;
    const Matrix X = random_matrix(n, 2, 11);
    std::vector<double> y(n);
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = std::tanh(X(i, 0)) + 0.5 * X(i, 1);
        mean += y[i] / n;
    }
    NetParams p;
    p.steps = 2000;
    p.step_size = 0.05;
    const auto a = fit_net(X, y, p, 42);
    const auto b = fit_net(X, y, p, 42);
    check_same_predictions(*a.net, *b.net, X);
    CHECK(a.objective == b.objective);
    double sse = 0, sst = 0;
    const auto pr = a.net->predict(X);
    for (std::size_t i = 0; i < n; ++i) {
        sse += (y[i] - pr[i]) * (y[i] - pr[i]);
        sst += (y[i] - mean) * (y[i] - mean);
    }
    CHECK(sse < 0.2 * sst);
    CHECK(a.net->params().size() == NeuralNet::param_count(2, p.hidden));
}

TEST_CASE("stack and contrast") {
    auto c1 = std::make_shared<ConstantModel>(1.0);
    auto c2 = std::make_shared<ConstantModel>(3.0);
    const StackedRegressor s({c1, c2}, {0.25, 0.75});
    const Matrix X(4, 2);
    for (double v : s.predict(X)) CHECK(v == doctest::Approx(2.5));
    CHECK_THROWS(StackedRegressor({c1, c2}, {0.5}));

    // Outcome model y = 0.2 + 0.3 a + 0.1 w, so the contrast is 0.3 everywhere.
    auto lin = std::make_shared<LinearModel>(FeatureMap{Terms::Main}, Link::Identity, std::vector<double>{0.2, 0.3, 0.1});
    const TreatmentContrast contrast(lin);
    Matrix W = random_matrix(5, 1, 2);
    for (double v : contrast.predict(W)) CHECK(v == doctest::Approx(0.3));
    const std::vector<double> a{1, 0, 1, 0, 1};
    const Matrix AW = with_treatment_column(a, W);
    CHECK(AW.cols() == 2);
    CHECK(AW(2, 0) == 1.0);
    CHECK(AW(2, 1) == W(2, 0));
    CHECK(with_constant_treatment(0.0, W)(4, 0) == 0.0);
}

TEST_CASE("serialization round-trips every regressor") {
    const Matrix X = random_matrix(60, 3, 21);
    std::vector<double> y(60);
    for (std::size_t i = 0; i < 60; ++i) y[i] = X(i, 0) > 0 ? 0.8 : 0.1;
    std::vector<RegressorPtr> models{
        std::make_shared<ConstantModel>(0.125),
        fit_linear({Terms::Pairwise}, X, y),
        fit_logistic({Terms::Single, 0}, X, y),
        fit_tree(X, y, {3, 5, 0.0}),
        fit_net(X, y, {4, 0.01, 50, 0.01, 1, 0.7}, 3).net,
    };
    models.push_back(std::make_shared<StackedRegressor>(std::vector<RegressorPtr>{models[1], models[3]},
                                                        std::vector<double>{0.4, 0.6}));
    for (const auto& m : models) {
        const auto j = m->to_json();
        const auto back = regressor_from_json(nlohmann::json::parse(j.dump()));
        CHECK(back->to_json() == j);
        check_same_predictions(*m, *back, X);
    }
    std::vector<double> a(60);
    for (std::size_t i = 0; i < 60; ++i) a[i] = static_cast<double>(i % 2);
    const TreatmentContrast contrast(fit_linear({Terms::Main}, with_treatment_column(a, X), y));
    const auto back = regressor_from_json(nlohmann::json::parse(contrast.to_json().dump()));
    check_same_predictions(contrast, *back, X);
    CHECK_THROWS(regressor_from_json(nlohmann::json{{"type", "forest"}}));
}
