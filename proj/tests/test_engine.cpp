#include <doctest.h>

#include <cmath>
#include <random>

#include "wimpute/engine.hpp"
#include "wimpute/mask_sim.hpp"
#include "wimpute/metrics.hpp"
#include "wimpute/synthetic.hpp"

using namespace wimpute;

namespace {

MaskedDataset from_rows(const Matrix& m, const BoolMatrix& obs) {
    return MaskedDataset(DataMatrix(m, default_column_names(m.cols())), MaskMatrix{obs});
}

MaskSimulation masked_synthetic(double alpha, std::uint64_t seed, double nonlinearity = 0.5, Index n = 1000) {
    SyntheticDatasetSpec s;
    s.n = n;
    s.nonlinearity = nonlinearity;
    s.seed = seed;
    const DataMatrix data = generate_synthetic(s);
    MarSpec spec = select_random_spec(data, 4, 4, seed + 1);
    spec.alpha = alpha;
    spec.seed = seed + 2;
    return apply_mar_mask(data, spec);
}

bool observed_cells_equal(const Matrix& completed, const MaskedDataset& ds) {
    for (Index j = 0; j < ds.cols(); ++j) {
        for (Index k = 0; k < ds.rows(); ++k) {
            if (ds.mask().observed(k, j) && completed(k, j) != ds.data().values(k, j)) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("initial_impute examples") {
    Matrix m(3, 2);
    m << 1, 7, 0, 5, 3, 9;
    BoolMatrix obs = BoolMatrix::Constant(3, 2, true);
    obs(1, 0) = false;
    const MaskedDataset a = initial_impute(from_rows(m, obs));
    CHECK(a.completed()(1, 0) == 2.0);

    Matrix two(2, 2);
    two << 0, 1, 5, 2;
    BoolMatrix o2 = BoolMatrix::Constant(2, 2, true);
    o2(0, 0) = false;
    CHECK(initial_impute(from_rows(two, o2)).completed()(0, 0) == 5.0);

    const MaskedDataset full = initial_impute(from_rows(m, BoolMatrix::Constant(3, 2, true)));
    CHECK(full.completed() == m);
}

TEST_CASE("visitation_order examples") {
    Matrix m = Matrix::Random(20, 5);
    BoolMatrix obs = BoolMatrix::Constant(20, 5, true);
    for (Index k = 0; k < 10; ++k) obs(k, 1) = false;
    for (Index k = 0; k < 5; ++k) obs(k + 10, 3) = false;
    const MaskedDataset ds = from_rows(m, obs);
    CHECK(visitation_order(ds, VisitationPolicy::ascending_missing_count) == std::vector<Index>{3, 1});
    CHECK(visitation_order(ds, VisitationPolicy::explicit_order, {1, 3}) == std::vector<Index>{1, 3});
    CHECK_THROWS_AS(visitation_order(ds, VisitationPolicy::explicit_order, {1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(visitation_order(ds, VisitationPolicy::explicit_order, {1}), std::invalid_argument);

    BoolMatrix tie = BoolMatrix::Constant(20, 5, true);
    for (Index k = 0; k < 5; ++k) {
        tie(k, 4) = false;
        tie(k + 5, 2) = false;
    }
    CHECK(visitation_order(from_rows(m, tie), VisitationPolicy::ascending_missing_count) == std::vector<Index>{2, 4});
}

TEST_CASE("impute with no missing data returns the input") {
    const Matrix m = Matrix::Random(10, 3);
    const ImputationResult r = impute(from_rows(m, BoolMatrix::Constant(10, 3, true)), ImputationConfig{});
    CHECK(r.completed == m);
    CHECK(r.per_sweep.empty());
}

TEST_CASE("noiseless linear column is recovered") {
    const Index n = 400;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    Matrix m(n, 2);
    for (Index k = 0; k < n; ++k) {
        m(k, 0) = nd(rng);
        m(k, 1) = 2.0 * m(k, 0);
    }
    MarSpec spec;
    spec.missing_cols = {1};
    spec.predictor_sets = {{0}};
    spec.alpha = 2.0;
    spec.seed = 3;
    const MaskSimulation sim = apply_mar_mask(DataMatrix(m, {"x1", "x2"}), spec);
    ImputationConfig cfg;
    cfg.regressor.ridge_lambda = 1e-8;
    cfg.gamma = 2;
    const ImputationResult r = impute(sim.dataset, cfg);
    CHECK((r.completed.col(1) - 2.0 * m.col(0)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("weighting corrects shift for a misspecified linear model") {
    // X2 = X1 + 0.5 X1^2 + noise, missingness concentrated at large X1.
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 35; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> nd;
        Matrix m(1000, 2);
        for (Index k = 0; k < 1000; ++k) {
            m(k, 0) = nd(rng);
            m(k, 1) = m(k, 0) + 0.5 * m(k, 0) * m(k, 0) + 0.3 * nd(rng);
        }
        MarSpec spec;
        spec.missing_cols = {1};
        spec.predictor_sets = {{0}};
        spec.alpha = -3.0;
        spec.seed = seed + 100;
        const MaskSimulation sim = apply_mar_mask(DataMatrix(m, {"x1", "x2"}), spec);
        ImputationConfig cfg;
        const double rw = rmse_masked(m, impute(sim.dataset, cfg).completed, sim.dataset.mask());
        cfg.weighted = false;
        const double ru = rmse_masked(m, impute(sim.dataset, cfg).completed, sim.dataset.mask());
        wins += rw < ru;
    }
    CHECK(wins > 17);
}

TEST_CASE("observed cells are never altered and runs are deterministic") {
    const MaskSimulation sim = masked_synthetic(2.0, 4);
    for (auto kind : {RegressorKind::ridge, RegressorKind::forest, RegressorKind::mlp}) {
        ImputationConfig cfg;
        cfg.regressor.kind = kind;
        cfg.regressor.forest.n_trees = 10;
        cfg.regressor.mlp.epochs = 5;
        cfg.gamma = 3;
        cfg.seed = 9;
        const ImputationResult a = impute(sim.dataset, cfg);
        const ImputationResult b = impute(sim.dataset, cfg);
        CHECK(observed_cells_equal(a.completed, sim.dataset));
        CHECK(a.completed.allFinite());
        CHECK(a.completed == b.completed);
        CHECK(a.per_sweep.size() == 3);
        for (const auto& it : a.per_sweep) {
            CHECK(it.columns.size() == 4);
            for (const auto& c : it.columns) {
                CHECK(std::isfinite(c.weighted_train_mse));
                CHECK(std::isfinite(c.mean_abs_update));
                CHECK(c.effective_sample_size > 0.0);
            }
        }
    }
}

TEST_CASE("unweighted mode is bit-identical to weighted mode with forced unit weights") {
    const MaskSimulation sim = masked_synthetic(3.0, 5);
    for (auto kind : {RegressorKind::ridge, RegressorKind::forest, RegressorKind::mlp}) {
        ImputationConfig cfg;
        cfg.regressor.kind = kind;
        cfg.regressor.forest.n_trees = 5;
        cfg.regressor.mlp.epochs = 3;
        cfg.gamma = 2;
        cfg.weighted = true;
        const WeightProvider unit = [](const MaskedDataset& ds, Index column) {
            return ColumnWeights{Vector::Ones(ds.rows() - ds.mask().missing_count(column)), true, std::nullopt};
        };
        const Matrix forced = impute(sim.dataset, cfg, unit).completed;
        cfg.weighted = false;
        CHECK(impute(sim.dataset, cfg).completed == forced);
    }
}

TEST_CASE("weights are re-estimated for every column and sweep") {
    const MaskSimulation sim = masked_synthetic(1.0, 6);
    int calls = 0;
    ImputationConfig cfg;
    cfg.gamma = 3;
    const WeightProvider base = default_weight_provider(cfg);
    const WeightProvider counting = [&](const MaskedDataset& ds, Index c) {
        ++calls;
        return base(ds, c);
    };
    impute(sim.dataset, cfg, counting);
    CHECK(calls == 3 * 4);
}

TEST_CASE("errors carry sweep and column context") {
    const MaskSimulation sim = masked_synthetic(1.0, 7);
    const WeightProvider broken = [](const MaskedDataset&, Index) -> ColumnWeights {
        throw std::runtime_error("boom");
    };
    try {
        impute(sim.dataset, ImputationConfig{}, broken);
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("sweep 0") != std::string::npos);
        CHECK(msg.find("column") != std::string::npos);
        CHECK(msg.find("boom") != std::string::npos);
    }
    ImputationConfig bad;
    bad.gamma = 0;
    CHECK_THROWS_AS(impute(sim.dataset, bad), std::invalid_argument);
}

TEST_CASE("impute_column_step with unit weights is an OLS step") {
    const MaskSimulation sim = masked_synthetic(1.0, 8);
    MaskedDataset ds = initial_impute(sim.dataset);
    const Index column = sim.mechanism.spec.missing_cols[0];
    const RowPartition part = partition_by_column(ds, column);
    const Matrix predictors = drop_column(ds.completed(), column);
    const RidgeModel ols = fit_weighted_ridge(select_rows(predictors, part.observed),
                                              select_rows(Vector(ds.data().values.col(column)), part.observed),
                                              Vector::Ones(static_cast<Index>(part.observed.size())), 0.0);
    const Vector expected = predict(ols, select_rows(predictors, part.missing));

    ImputationConfig cfg;
    cfg.weighted = false;
    cfg.regressor.ridge_lambda = 0.0;
    const MaskedDataset before = ds;
    impute_column_step(ds, column, cfg, 0);
    const Vector got = select_rows(Vector(ds.completed().col(column)), part.missing);
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(observed_cells_equal(ds.completed(), before));
    for (Index j = 0; j < ds.cols(); ++j) {
        if (j != column) CHECK(ds.completed().col(j) == before.completed().col(j));
    }
}

TEST_CASE("a converged state is a fixed point of the ridge step") {
    const MaskSimulation sim = masked_synthetic(1.0, 10);
    ImputationConfig cfg;
    cfg.weighted = false;
    cfg.gamma = 200;
    const ImputationResult r = impute(sim.dataset, cfg);
    MaskedDataset ds = sim.dataset;
    for (Index c : sim.mechanism.spec.missing_cols) {
        const RowPartition p = partition_by_column(ds, c);
        ds.set_missing(c, p.missing, select_rows(Vector(r.completed.col(c)), p.missing));
    }
    for (Index c : visitation_order(ds, cfg.visitation)) {
        const ColumnDiagnostics d = impute_column_step(ds, c, cfg, 0);
        CHECK(d.mean_abs_update < 1e-8);
    }
}

TEST_CASE("monotone refinement on linear-Gaussian data") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const MaskSimulation sim = masked_synthetic(2.0, 20 + seed, 0.0);
        const Matrix& truth = sim.dataset.data().values;
        const double rmse0 = rmse_masked(truth, initial_impute(sim.dataset).completed(), sim.dataset.mask());
        ImputationConfig cfg;
        cfg.gamma = 3;
        for (bool weighted : {true, false}) {
            cfg.weighted = weighted;
            const double rmse3 = rmse_masked(truth, impute(sim.dataset, cfg).completed, sim.dataset.mask());
            CHECK(rmse3 <= rmse0);
        }
    }
}

TEST_CASE("diagnostics carry the propensity fit and a 20-bin weight histogram") {
    SyntheticDatasetSpec g;
    g.n = 1000;
    const DataMatrix data = generate_synthetic(g);
    MarSpec s = select_random_spec(data, 2, 2, 3);
    s.alpha = 2.0;
    const MaskedDataset ds = apply_mar_mask(data, s).dataset;
    ImputationConfig cfg;
    cfg.gamma = 1;
    const ImputationResult w = impute(ds, cfg);
    REQUIRE(w.per_sweep.size() == 1);
    for (const auto& c : w.per_sweep[0].columns) {
        REQUIRE(c.propensity.has_value());
        CHECK(c.propensity->coefficients.size() == data.cols() - 1);
        CHECK(c.weight_histogram.counts.size() == 20);
        Index total = 0;
        for (Index k : c.weight_histogram.counts) total += k;
        CHECK(total == ds.rows() - ds.mask().missing_count(c.column));
    }
    cfg.weighted = false;
    const ImputationResult u = impute(ds, cfg);
    for (const auto& c : u.per_sweep[0].columns) {
        CHECK_FALSE(c.propensity.has_value());
        CHECK(c.effective_sample_size == doctest::Approx(static_cast<double>(c.weight_histogram.counts[0])));
    }
}
