#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "wimpute/regressors.hpp"

namespace wimpute {

namespace {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, const Vector& y, const Vector& w, const ForestSpec& spec, std::uint64_t seed)
        : x_(x), y_(y), w_(w), spec_(spec), rng_(seed) {}

    RegressionTree build() {
        std::vector<Index> rows;
        for (Index k = 0; k < y_.size(); ++k) {
            if (w_[k] > 0.0) rows.push_back(k);
        }
        grow(rows, 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<Index>& rows, int depth) {
        double total_w = 0.0;
        double total_wy = 0.0;
        double y_min = y_[rows.front()];
        double y_max = y_min;
        for (Index k : rows) {
            total_w += w_[k];
            total_wy += w_[k] * y_[k];
            y_min = std::min(y_min, y_[k]);
            y_max = std::max(y_max, y_[k]);
        }
        const int id = static_cast<int>(tree_.nodes.size());
        TreeNode node;
        // Clamp guards against rounding drift in the weighted mean.
        node.value = std::clamp(total_wy / total_w, y_min, y_max);
        node.weight = total_w;
        tree_.nodes.push_back(node);

        if (depth >= spec_.max_depth || total_w < 2.0 * spec_.min_leaf_weight || y_min == y_max) return id;

        const SplitChoice best = find_split(rows, total_w, total_wy);
        if (best.feature < 0) return id;

        std::vector<Index> left;
        std::vector<Index> right;
        for (Index k : rows) {
            (x_(k, best.feature) <= best.threshold ? left : right).push_back(k);
        }
        rows.clear();
        rows.shrink_to_fit();
        tree_.nodes[static_cast<std::size_t>(id)].feature = best.feature;
        tree_.nodes[static_cast<std::size_t>(id)].threshold = best.threshold;
        const int l = grow(left, depth + 1);
        tree_.nodes[static_cast<std::size_t>(id)].left = l;
        const int r = grow(right, depth + 1);
        tree_.nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    std::vector<int> candidate_features() {
        const int p = static_cast<int>(x_.cols());
        std::vector<int> feats(static_cast<std::size_t>(p));
        std::iota(feats.begin(), feats.end(), 0);
        if (spec_.feature_subsample >= 1.0) return feats;
        const int m = std::max(1, static_cast<int>(std::lround(spec_.feature_subsample * p)));
        std::shuffle(feats.begin(), feats.end(), rng_);
        feats.resize(static_cast<std::size_t>(m));
        std::sort(feats.begin(), feats.end());
        return feats;
    }

    // Maximizes SL^2/WL + SR^2/WR (equivalently the weighted variance
    // reduction). Features are scanned in ascending index and thresholds in
    // ascending value, and only a strictly better score replaces the
    // incumbent, so ties resolve to the lowest feature then lowest threshold.
    SplitChoice find_split(const std::vector<Index>& rows, double total_w, double total_wy) {
        const double parent = total_wy * total_wy / total_w;
        double wyy = 0.0;
        for (Index k : rows) wyy += w_[k] * y_[k] * y_[k];
        const double min_gain = 1e-12 * std::max(wyy, 1e-300);

        SplitChoice best;
        best.score = parent + min_gain;
        std::vector<Index> order(rows);
        for (int f : candidate_features()) {
            std::sort(order.begin(), order.end(), [&](Index a, Index b) {
                const double xa = x_(a, f);
                const double xb = x_(b, f);
                return xa < xb || (xa == xb && a < b);
            });
            double wl = 0.0;
            double sl = 0.0;
            for (std::size_t t = 0; t + 1 < order.size(); ++t) {
                const Index k = order[t];
                wl += w_[k];
                sl += w_[k] * y_[k];
                const double xv = x_(k, f);
                const double xn = x_(order[t + 1], f);
                if (xv == xn) continue;
                const double wr = total_w - wl;
                if (wl < spec_.min_leaf_weight || wr < spec_.min_leaf_weight) continue;
                const double sr = total_wy - sl;
                const double score = sl * sl / wl + sr * sr / wr;
                if (score > best.score) {
                    best.score = score;
                    best.feature = f;
                    best.threshold = 0.5 * (xv + xn);
                    // Midpoint can round onto the upper value for adjacent doubles.
                    if (!(best.threshold < xn)) best.threshold = xv;
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    const Vector& y_;
    const Vector& w_;
    const ForestSpec& spec_;
    std::mt19937_64 rng_;
    RegressionTree tree_;
};

}  // namespace

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    std::size_t id = 0;
    while (!nodes[id].is_leaf()) {
        const TreeNode& n = nodes[id];
        id = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
    }
    return nodes[id].value;
}

int RegressionTree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

RegressionTree fit_weighted_tree(const Matrix& x, const Vector& y, const Vector& w, const ForestSpec& spec,
                                 std::uint64_t seed) {
    if (x.rows() != y.size() || y.size() != w.size()) throw std::invalid_argument("fit_weighted_tree: size mismatch");
    if ((w.array() < 0.0).any() || !(w.sum() > 0.0)) {
        throw std::invalid_argument("fit_weighted_tree: weights must be nonnegative with a positive sum");
    }
    return TreeBuilder(x, y, w, spec, seed).build();
}

ForestModel fit_weighted_forest(const Matrix& x, const Vector& y, const Vector& w, const ForestSpec& spec) {
    RegressorSpec{RegressorKind::forest, 0.0, spec, {}}.validate();
    if (x.rows() != y.size() || y.size() != w.size()) throw std::invalid_argument("fit_weighted_forest: size mismatch");
    if ((w.array() < 0.0).any() || !w.allFinite() || !(w.sum() > 0.0)) {
        throw std::invalid_argument("fit_weighted_forest: weights must be nonnegative with a positive sum");
    }
    ForestModel forest;
    forest.n_features = x.cols();
    const Index support = (w.array() > 0.0).count();
    for (int t = 0; t < spec.n_trees; ++t) {
        const std::uint64_t tree_seed = spec.seed + static_cast<std::uint64_t>(t);
        if (!spec.bootstrap) {
            forest.trees.push_back(fit_weighted_tree(x, y, w, spec, tree_seed));
            continue;
        }
        std::mt19937_64 rng(tree_seed ^ 0x9e3779b97f4a7c15ULL);
        std::discrete_distribution<Index> draw(w.data(), w.data() + w.size());
        Vector counts = Vector::Zero(w.size());
        for (Index s = 0; s < support; ++s) counts[draw(rng)] += 1.0;
        forest.trees.push_back(fit_weighted_tree(x, y, counts, spec, tree_seed));
    }
    return forest;
}

Vector predict(const ForestModel& model, const Matrix& x) {
    if (x.cols() != model.n_features) throw std::invalid_argument("predict: width mismatch");
    Vector out = Vector::Zero(x.rows());
    for (Index k = 0; k < x.rows(); ++k) {
        double acc = 0.0;
        for (const auto& tree : model.trees) acc += tree.predict(x.row(k));
        out[k] = acc / static_cast<double>(model.trees.size());
    }
    return out;
}

}  // namespace wimpute
