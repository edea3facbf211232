#include <algorithm>
#include <cmath>
#include <numeric>

#include "odtr/models.hpp"

namespace odtr::models {
namespace {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, std::span<const double> y, TreeParams params)
        : X_(X), y_(y), params_(params) {}

    std::vector<RegressionTree::Node> build() {
        std::vector<std::size_t> rows(X_.rows());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        double s = 0.0, ss = 0.0;
        for (double v : y_) {
            s += v;
            ss += v * v;
        }
        root_sse_ = ss - s * s / static_cast<double>(y_.size());
        grow(rows, 0);
        return std::move(nodes_);
    }

private:
    int grow(const std::vector<std::size_t>& rows, int depth) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        double s = 0.0;
        for (std::size_t i : rows) s += y_[i];
        nodes_[id].value = s / static_cast<double>(rows.size());

        if (depth >= params_.max_depth) return id;
        const Split split = best_split(rows, s);
        if (split.feature < 0) return id;

        std::vector<std::size_t> left, right;
        const auto x = X_.col(split.feature);
        for (std::size_t i : rows) (x[i] <= split.threshold ? left : right).push_back(i);

        nodes_[id].feature = split.feature;
        nodes_[id].threshold = split.threshold;
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    Split best_split(const std::vector<std::size_t>& rows, double total) const {
        const std::size_t n = rows.size();
        const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_leaf));
        Split best;
        if (n < 2 * min_leaf) return best;

        double sum_sq = 0.0;
        for (std::size_t i : rows) sum_sq += y_[i] * y_[i];
        const double parent = total * total / static_cast<double>(n);
        const double sse = sum_sq - parent;
        if (!(sse > 1e-12 * std::max(1.0, sum_sq))) return best;
        const double min_gain =
            std::max(1e-12 * std::max(1.0, sum_sq), params_.complexity * root_sse_);

        std::vector<std::pair<double, double>> sorted(n);  // (x, y)
        for (std::size_t f = 0; f < X_.cols(); ++f) {
            const auto x = X_.col(f);
            for (std::size_t k = 0; k < n; ++k) sorted[k] = {x[rows[k]], y_[rows[k]]};
            std::sort(sorted.begin(), sorted.end());

            double left_sum = 0.0;
            for (std::size_t k = 0; k + 1 < n; ++k) {
                left_sum += sorted[k].second;
                const std::size_t nl = k + 1;
                const std::size_t nr = n - nl;
                if (nl < min_leaf) continue;
                if (nr < min_leaf) break;
                if (sorted[k].first == sorted[k + 1].first) continue;
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(nl) +
                                    right_sum * right_sum / static_cast<double>(nr) - parent;
                if (gain > min_gain && gain > best.gain) {
                    best.feature = static_cast<int>(f);
                    best.threshold = 0.5 * (sorted[k].first + sorted[k + 1].first);
                    best.gain = gain;
                }
            }
        }
        return best;
    }

    const Matrix& X_;
    std::span<const double> y_;
    TreeParams params_;
    double root_sse_ = 0.0;
    std::vector<RegressionTree::Node> nodes_;
};

}  // namespace

std::shared_ptr<const RegressionTree> fit_tree(const Matrix& X, std::span<const double> y,
                                               TreeParams params) {
    if (X.rows() == 0 || X.rows() != y.size())
        throw std::invalid_argument("fit_tree: empty or mismatched data");
    return std::make_shared<RegressionTree>(TreeBuilder(X, y, params).build());
}

void RegressionTree::predict(const Matrix& X, std::span<double> out) const {
    for (std::size_t i = 0; i < X.rows(); ++i) {
        int id = 0;
        while (nodes_[id].feature >= 0) {
            const auto& node = nodes_[id];
            id = X(i, static_cast<std::size_t>(node.feature)) <= node.threshold ? node.left
                                                                                : node.right;
        }
        out[i] = nodes_[id].value;
    }
}

int RegressionTree::depth() const {
    // Nodes are stored in preorder; walk with an explicit stack.
    int deepest = 0;
    std::vector<std::pair<int, int>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [id, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (nodes_[id].feature >= 0) {
            stack.emplace_back(nodes_[id].left, d + 1);
            stack.emplace_back(nodes_[id].right, d + 1);
        }
    }
    return deepest;
}

}  // namespace odtr::models
