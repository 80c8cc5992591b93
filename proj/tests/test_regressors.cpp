#include <doctest.h>

#include <cmath>
#include <random>

#include "wimpute/data.hpp"
#include "wimpute/regressors.hpp"

using namespace wimpute;

namespace {

Matrix random_matrix(Index n, Index p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Matrix m(n, p);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    return m;
}

Vector random_weights(Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    Vector w(n);
    for (Index k = 0; k < n; ++k) w[k] = u(rng);
    return w;
}

ForestSpec deterministic_tree() {
    ForestSpec s;
    s.n_trees = 1;
    s.bootstrap = false;
    s.feature_subsample = 1.0;
    s.min_leaf_weight = 1.0;
    s.max_depth = 6;
    return s;
}

}  // namespace

TEST_CASE("ridge: exact line with lambda = 0") {
    Matrix x(5, 1);
    x << 0, 1, 2, 3, 4;
    const Vector y = 2.0 * x.col(0);
    const RidgeModel m = fit_weighted_ridge(x, y, Vector::Ones(5), 0.0);
    CHECK(std::abs(m.coefficients[0] - 2.0) < 1e-10);
    CHECK(std::abs(m.intercept) < 1e-10);
}

TEST_CASE("ridge: huge lambda shrinks slope, intercept to weighted mean") {
    Matrix x(4, 1);
    x << 0, 1, 2, 3;
    Vector y(4);
    y << 1, 3, 2, 7;
    Vector w(4);
    w << 1, 2, 1, 4;
    const RidgeModel m = fit_weighted_ridge(x, y, w, 1e9);
    const double wmean = w.dot(y) / w.sum();
    CHECK(std::abs(m.coefficients[0]) < 1e-6);
    CHECK(std::abs(m.intercept - wmean) < 1e-6 * std::abs(wmean));
}

TEST_CASE("ridge: zero-weight point is ignored") {
    Matrix x(3, 1);
    x << 1, 2, 3;
    Vector y(3);
    y << 1, 2, 10;
    Vector w(3);
    w << 1, 1, 0;
    const RidgeModel m = fit_weighted_ridge(x, y, w, 0.0);
    CHECK(std::abs(m.coefficients[0] - 1.0) < 1e-10);
    CHECK(std::abs(m.intercept) < 1e-10);
}

TEST_CASE("ridge: normal-equation residual below 1e-8 on random problems") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix x = random_matrix(200, 6, seed);
        const Vector y = random_matrix(200, 1, seed + 100).col(0) * 5.0;
        const Vector w = random_weights(200, seed + 200);
        for (double lambda : {0.0, 1e-6, 0.5, 10.0}) {
            const RidgeModel m = fit_weighted_ridge(x, y, w, lambda);
            CHECK(ridge_normal_equation_residual(m, x, y, w) < 1e-8);
        }
    }
}

TEST_CASE("ridge: weight scaling trades against lambda, and singular system") {
    const Matrix x = random_matrix(50, 3, 1);
    const Vector y = random_matrix(50, 1, 2).col(0);
    const Vector w = random_weights(50, 3);
    // (X'cWX + lambda I) = c (X'WX + (lambda / c) I)
    const RidgeModel a = fit_weighted_ridge(x, y, w, 0.1);
    const RidgeModel b = fit_weighted_ridge(x, y, 7.5 * w, 0.75);
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(a.intercept == doctest::Approx(b.intercept).epsilon(1e-10));
    const RidgeModel c = fit_weighted_ridge(x, y, w, 0.0);
    const RidgeModel d = fit_weighted_ridge(x, y, 7.5 * w, 0.0);
    CHECK((c.coefficients - d.coefficients).cwiseAbs().maxCoeff() < 1e-10);

    Matrix dup(10, 2);
    dup.col(0) = random_matrix(10, 1, 4).col(0);
    dup.col(1) = dup.col(0);
    CHECK_THROWS_AS(fit_weighted_ridge(dup, Vector::Ones(10), Vector::Ones(10), 0.0), std::runtime_error);
    CHECK_NOTHROW(fit_weighted_ridge(dup, Vector::Ones(10), Vector::Ones(10), 1e-3));
}

TEST_CASE("predict examples") {
    RidgeModel r;
    r.coefficients = Vector::Constant(1, 2.0);
    r.intercept = 1.0;
    CHECK(predict(r, Matrix::Constant(1, 1, 3.0))[0] == doctest::Approx(7.0));
    CHECK(predict(r, Matrix(0, 1)).size() == 0);
    CHECK_THROWS(predict(r, Matrix(2, 2)));

    ForestModel f;
    f.n_features = 2;
    for (int t = 0; t < 3; ++t) {
        RegressionTree tree;
        TreeNode leaf;
        leaf.value = 4.5;
        tree.nodes.push_back(leaf);
        f.trees.push_back(tree);
    }
    const Vector p = predict(f, random_matrix(5, 2, 1));
    CHECK((p.array() == 4.5).all());
}

TEST_CASE("weighted_mse examples") {
    Vector y = Vector::Zero(2);
    Vector pred(2);
    pred << 1, -1;
    CHECK(weighted_mse(pred, y, Vector::Ones(2)) == doctest::Approx(1.0));
    Vector w(2);
    w << 3, 1;
    CHECK(weighted_mse(pred, y, w) == doctest::Approx(1.0));
    pred << 2, 0;
    w << 1, 3;
    CHECK(weighted_mse(pred, y, w) == doctest::Approx(1.0));
    CHECK(weighted_mse(y, y, w) == 0.0);
}

TEST_CASE("forest: constant target predicts the constant") {
    const Matrix x = random_matrix(60, 3, 5);
    const Vector y = Vector::Constant(60, 3.25);
    ForestSpec spec;
    spec.n_trees = 10;
    const ForestModel f = fit_weighted_forest(x, y, random_weights(60, 6), spec);
    const Vector p = predict(f, random_matrix(20, 3, 7));
    CHECK((p.array() - 3.25).abs().maxCoeff() < 1e-12);
    for (const auto& t : f.trees) CHECK(t.nodes.size() == 1);
}

TEST_CASE("forest: integer weights equal row replication in deterministic mode") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> wi(0, 4);
    std::uniform_int_distribution<int> yi(-40, 40);
    for (int rep = 0; rep < 10; ++rep) {
        const Index n = 40;
        const Matrix x = random_matrix(n, 3, 50 + rep);
        Vector y(n), w(n);
        for (Index k = 0; k < n; ++k) {
            y[k] = 0.25 * yi(rng);  // dyadic values keep every sum exact
            w[k] = wi(rng);
        }
        w[0] = 1.0;
        const Index total = static_cast<Index>(w.sum());
        Matrix xr(total, 3);
        Vector yr(total);
        Index t = 0;
        for (Index k = 0; k < n; ++k) {
            for (int c = 0; c < static_cast<int>(w[k]); ++c, ++t) {
                xr.row(t) = x.row(k);
                yr[t] = y[k];
            }
        }
        const ForestSpec spec = deterministic_tree();
        const RegressionTree a = fit_weighted_tree(x, y, w, spec, 1);
        const RegressionTree b = fit_weighted_tree(xr, yr, Vector::Ones(total), spec, 1);
        CHECK(a.nodes == b.nodes);
        CHECK(a.nodes.size() > 1);

        ForestSpec fspec = spec;
        const ForestModel fa = fit_weighted_forest(x, y, w, fspec);
        const ForestModel fb = fit_weighted_forest(xr, yr, Vector::Ones(total), fspec);
        CHECK(fa.trees[0].nodes == fb.trees[0].nodes);
    }
}

TEST_CASE("forest: replication equivalence with non-dyadic targets up to rounding") {
    const Index n = 30;
    const Matrix x = random_matrix(n, 2, 9);
    const Vector y = random_matrix(n, 1, 10).col(0);
    Vector w(n);
    for (Index k = 0; k < n; ++k) w[k] = 1 + (k % 3);
    const Index total = static_cast<Index>(w.sum());
    Matrix xr(total, 2);
    Vector yr(total);
    Index t = 0;
    for (Index k = 0; k < n; ++k) {
        for (int c = 0; c < static_cast<int>(w[k]); ++c, ++t) {
            xr.row(t) = x.row(k);
            yr[t] = y[k];
        }
    }
    const RegressionTree a = fit_weighted_tree(x, y, w, deterministic_tree(), 1);
    const RegressionTree b = fit_weighted_tree(xr, yr, Vector::Ones(total), deterministic_tree(), 1);
    REQUIRE(a.nodes.size() == b.nodes.size());
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
        CHECK(a.nodes[i].feature == b.nodes[i].feature);
        CHECK(a.nodes[i].threshold == b.nodes[i].threshold);
        CHECK(a.nodes[i].left == b.nodes[i].left);
        CHECK(a.nodes[i].value == doctest::Approx(b.nodes[i].value).epsilon(1e-12));
    }
}

TEST_CASE("forest: first split matches an exhaustive scan on a step function") {
    // y jumps between x0 = 0.4 and x0 = 0.6; x1 is noise.
    const Index n = 20;
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix x(n, 2);
    Vector y(n);
    for (Index k = 0; k < n; ++k) {
        x(k, 0) = k < 10 ? 0.04 * k : 0.6 + 0.04 * (k - 10);
        x(k, 1) = u(rng);
        y[k] = (x(k, 0) > 0.5 ? 3.0 : -1.0) + 0.1 * (u(rng) - 0.5);
    }
    Vector w(n);
    for (Index k = 0; k < n; ++k) w[k] = 0.5 + u(rng);

    // exhaustive oracle: minimize weighted SSE over every (feature, midpoint)
    int best_f = -1;
    double best_t = 0.0;
    double best_sse = 1e300;
    for (int f = 0; f < 2; ++f) {
        std::vector<double> vals(x.col(f).data(), x.col(f).data() + n);
        std::sort(vals.begin(), vals.end());
        for (Index i = 0; i + 1 < n; ++i) {
            const double thr = 0.5 * (vals[static_cast<std::size_t>(i)] + vals[static_cast<std::size_t>(i) + 1]);
            double wl = 0, sl = 0, wr = 0, sr = 0;
            for (Index k = 0; k < n; ++k) {
                if (x(k, f) <= thr) {
                    wl += w[k];
                    sl += w[k] * y[k];
                } else {
                    wr += w[k];
                    sr += w[k] * y[k];
                }
            }
            if (wl < 1.0 || wr < 1.0) continue;
            double sse = 0.0;
            for (Index k = 0; k < n; ++k) {
                const double mu = x(k, f) <= thr ? sl / wl : sr / wr;
                sse += w[k] * (y[k] - mu) * (y[k] - mu);
            }
            if (sse < best_sse - 1e-12) {
                best_sse = sse;
                best_f = f;
                best_t = thr;
            }
        }
    }
    const RegressionTree tree = fit_weighted_tree(x, y, w, deterministic_tree(), 0);
    CHECK(tree.nodes[0].feature == best_f);
    CHECK(tree.nodes[0].threshold == doctest::Approx(best_t));
    CHECK(tree.nodes[0].feature == 0);
    CHECK(tree.nodes[0].threshold > 0.36);
    CHECK(tree.nodes[0].threshold < 0.6);
}

TEST_CASE("forest: split ties go to the lowest feature") {
    Matrix x(4, 2);
    x << 0, 0, 0, 0, 1, 1, 1, 1;
    Vector y(4);
    y << 0, 0, 1, 1;
    const RegressionTree t = fit_weighted_tree(x, y, Vector::Ones(4), deterministic_tree(), 0);
    CHECK(t.nodes[0].feature == 0);
}

TEST_CASE("forest: predictions stay within the target range and builds are reproducible") {
    const Matrix x = random_matrix(300, 4, 13);
    Vector y = x.col(0).array().square() + x.col(1).array();
    const Vector w = random_weights(300, 14);
    ForestSpec spec;
    spec.n_trees = 20;
    spec.seed = 3;
    const ForestModel a = fit_weighted_forest(x, y, w, spec);
    const ForestModel b = fit_weighted_forest(x, y, w, spec);
    const Matrix q = random_matrix(200, 4, 15) * 3.0;
    const Vector pa = predict(a, q);
    CHECK((pa - predict(b, q)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(pa.minCoeff() >= y.minCoeff());
    CHECK(pa.maxCoeff() <= y.maxCoeff());
    for (const auto& t : a.trees) CHECK(t.depth() <= spec.max_depth);
}

TEST_CASE("forest: min_leaf_weight is a weight mass") {
    const Matrix x = random_matrix(100, 2, 16);
    const Vector y = x.col(0);
    ForestSpec spec = deterministic_tree();
    spec.min_leaf_weight = 5.0;
    const RegressionTree t = fit_weighted_tree(x, y, Vector::Constant(100, 0.2), spec, 0);
    for (const auto& n : t.nodes) CHECK(n.weight >= 5.0 - 1e-12);
    CHECK(t.nodes.size() <= 7);
}

TEST_CASE("mlp: analytic gradient matches central differences") {
    const Matrix x = random_matrix(5, 3, 17);
    const Vector y = random_matrix(5, 1, 18).col(0);
    Vector w(5);
    w << 1.0, 0.5, 2.0, 0.0, 1.5;
    MlpSpec spec;
    spec.hidden_units = 4;
    spec.epochs = 1;
    spec.seed = 19;
    const MlpModel model = fit_weighted_mlp(x, y, w, spec);
    const Vector theta = mlp_flatten(model);
    const MlpLossGradient lg = mlp_loss_gradient(model, x, y, w);
    REQUIRE(lg.gradient.size() == theta.size());
    double worst = 0.0;
    const double h = 1e-5;
    for (Index i = 0; i < theta.size(); ++i) {
        Vector tp = theta, tm = theta;
        tp[i] += h;
        tm[i] -= h;
        const double fp = mlp_loss_gradient(mlp_unflatten(tp, 3, 4), x, y, w).loss;
        const double fm = mlp_loss_gradient(mlp_unflatten(tm, 3, 4), x, y, w).loss;
        const double fd = (fp - fm) / (2 * h);
        const double denom = std::max(std::abs(fd) + std::abs(lg.gradient[i]), 1e-8);
        worst = std::max(worst, std::abs(fd - lg.gradient[i]) / denom);
    }
    CHECK(worst < 1e-4);
    CHECK((mlp_flatten(mlp_unflatten(theta, 3, 4)) - theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mlp: zero-weight rows equal deleting them") {
    const Matrix x = random_matrix(40, 2, 20);
    const Vector y = x.col(0) - 0.5 * x.col(1);
    Vector w = random_weights(40, 21);
    RowIndices keep;
    for (Index k = 0; k < 40; ++k) {
        if (k % 4 == 0) {
            w[k] = 0.0;
        } else {
            keep.push_back(k);
        }
    }
    MlpSpec spec;
    spec.epochs = 10;
    spec.batch_size = 8;
    spec.seed = 22;
    const MlpModel a = fit_weighted_mlp(x, y, w, spec);
    const MlpModel b = fit_weighted_mlp(select_rows(x, keep), select_rows(y, keep), select_rows(w, keep), spec);
    CHECK(std::abs(a.loss_trace.back() - b.loss_trace.back()) < 1e-10);
}

TEST_CASE("mlp: learns a linear target") {
    // y = 3x with x and y standardized, as the engine feeds the learner
    const Matrix raw = random_matrix(500, 1, 23);
    Matrix xy(500, 2);
    xy.col(0) = raw.col(0);
    xy.col(1) = 3.0 * raw.col(0);
    const Matrix z = standardize(xy).first;
    const Matrix x = z.leftCols(1);
    const Vector y = z.col(1);
    MlpSpec spec;
    spec.epochs = 500;
    spec.seed = 24;
    const MlpModel m = fit_weighted_mlp(x, y, Vector::Ones(500), spec);
    const double rmse = std::sqrt((predict(m, x) - y).squaredNorm() / 500.0);
    CHECK(rmse < 0.05);
    // smoothed loss trace (window 5) never increases
    const auto& tr = m.loss_trace;
    for (std::size_t e = 5; e + 5 <= tr.size(); e += 5) {
        double prev = 0, cur = 0;
        for (std::size_t k = 0; k < 5; ++k) {
            prev += tr[e - 5 + k];
            cur += tr[e + k];
        }
        CHECK(cur <= prev + 1e-12);
    }
}

TEST_CASE("mlp: divergence aborts") {
    const Matrix x = random_matrix(50, 2, 25) * 100.0;
    const Vector y = x.col(0) * 1e4;
    MlpSpec spec;
    spec.learning_rate = 50.0;
    spec.epochs = 50;
    CHECK_THROWS_AS(fit_weighted_mlp(x, y, Vector::Ones(50), spec), std::runtime_error);
}

TEST_CASE("fit_regressor dispatch and spec validation") {
    const Matrix x = random_matrix(80, 3, 26);
    const Vector y = x.col(0);
    for (auto kind : {RegressorKind::ridge, RegressorKind::forest, RegressorKind::mlp}) {
        RegressorSpec spec;
        spec.kind = kind;
        spec.forest.n_trees = 5;
        spec.mlp.epochs = 5;
        const FittedRegressor f = fit_regressor(spec, x, y, Vector::Ones(80));
        CHECK(f.kind() == kind);
        CHECK(f.input_width() == 3);
        CHECK(predict(f, x).allFinite());
        CHECK(regressor_kind_from_string(to_string(kind)) == kind);
    }
    CHECK_THROWS(regressor_kind_from_string("svm"));
    RegressorSpec bad;
    bad.ridge_lambda = -1.0;
    CHECK_THROWS(bad.validate());
    CHECK_THROWS(fit_weighted_ridge(x, y, -Vector::Ones(80), 0.0));
}
