#include "wimpute/engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace wimpute {

void ImputationConfig::validate() const {
    regressor.validate();
    if (gamma < 1) throw std::invalid_argument("ImputationConfig: gamma must be >= 1");
    if (!(clip_epsilon > 0.0 && clip_epsilon < 0.5)) {
        throw std::invalid_argument("ImputationConfig: clip_epsilon must lie in (0, 0.5)");
    }
    if (propensity_l2 < 0.0) throw std::invalid_argument("ImputationConfig: propensity_l2 must be >= 0");
}

MaskedDataset initial_impute(MaskedDataset ds) {
    for (Index j = 0; j < ds.cols(); ++j) {
        const RowPartition part = partition_by_column(ds, j);
        if (part.missing.empty()) continue;
        if (part.observed.empty()) {
            throw std::invalid_argument("initial_impute: column " + std::to_string(j) + " has no observed entries");
        }
        double acc = 0.0;
        for (Index k : part.observed) acc += ds.data().values(k, j);
        const double mean = acc / static_cast<double>(part.observed.size());
        ds.set_missing(j, part.missing, Vector::Constant(static_cast<Index>(part.missing.size()), mean));
    }
    return ds;
}

std::vector<Index> visitation_order(const MaskedDataset& ds, VisitationPolicy policy,
                                    const std::vector<Index>& explicit_order) {
    std::vector<Index> cols = imputed_columns(ds.mask());
    if (policy == VisitationPolicy::explicit_order) {
        std::vector<Index> sorted = explicit_order;
        std::sort(sorted.begin(), sorted.end());
        if (sorted != cols) {
            throw std::invalid_argument("visitation order must be a permutation of the columns with missing values");
        }
        return explicit_order;
    }
    std::stable_sort(cols.begin(), cols.end(), [&](Index a, Index b) {
        return ds.mask().missing_count(a) < ds.mask().missing_count(b);
    });
    return cols;
}

WeightProvider default_weight_provider(const ImputationConfig& cfg) {
    if (!cfg.weighted) {
        return [](const MaskedDataset& ds, Index column) {
            const Index n_obs = ds.rows() - ds.mask().missing_count(column);
            return ColumnWeights{Vector::Ones(n_obs), true, std::nullopt};
        };
    }
    WeightOptions opts;
    opts.clip_epsilon = cfg.clip_epsilon;
    opts.propensity.l2 = cfg.propensity_l2;
    return [opts](const MaskedDataset& ds, Index column) {
        WeightEstimate est = estimate_weights(ds, column, opts);
        return ColumnWeights{std::move(est.weights.weights), est.model.converged, est.model};
    };
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
    for (std::uint64_t v : {a, b}) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 0xbf58476d1ce4e5b9ULL;
        h ^= h >> 31;
    }
    return h;
}

}  // namespace

ColumnDiagnostics impute_column_step(MaskedDataset& ds, Index column, const ImputationConfig& cfg, int sweep,
                                     const WeightProvider& weights) {
    const RowPartition part = partition_by_column(ds, column);
    ColumnDiagnostics diag;
    diag.column = column;
    if (part.missing.empty()) return diag;

    const ColumnWeights cw = (weights ? weights : default_weight_provider(cfg))(ds, column);
    if (cw.weights.size() != static_cast<Index>(part.observed.size())) {
        throw std::runtime_error("weight provider returned " + std::to_string(cw.weights.size()) + " weights for " +
                                 std::to_string(part.observed.size()) + " observed rows");
    }
    diag.propensity_converged = cw.propensity_converged;
    diag.effective_sample_size = effective_sample_size(cw.weights);
    diag.propensity = cw.propensity;
    diag.weight_histogram = weight_histogram(cw.weights, 20);

    const Matrix predictors = drop_column(ds.completed(), column);
    const Matrix x_obs_raw = select_rows(predictors, part.observed);
    const auto [x_obs, stats] = standardize(x_obs_raw);
    const Matrix x_miss = standardize(select_rows(predictors, part.missing), stats).first;

    Vector y = select_rows(Vector(ds.completed().col(column)), part.observed);
    const double y_mean = y.mean();
    const double y_sd = std::sqrt((y.array() - y_mean).square().mean());
    const double y_scale = y_sd > 0.0 ? y_sd : 1.0;
    const Vector y_std = (y.array() - y_mean) / y_scale;

    RegressorSpec spec = cfg.regressor;
    const std::uint64_t model_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(column),
                                              static_cast<std::uint64_t>(sweep));
    spec.forest.seed = model_seed;
    spec.mlp.seed = model_seed;
    const FittedRegressor model = fit_regressor(spec, x_obs, y_std, cw.weights);

    diag.weighted_train_mse = weighted_mse(model, x_obs, y_std, cw.weights) * y_scale * y_scale;
    const Vector update = (predict(model, x_miss).array() * y_scale + y_mean).matrix();
    if (!update.allFinite()) throw std::runtime_error("regressor produced non-finite imputations");
    const Vector previous = select_rows(Vector(ds.completed().col(column)), part.missing);
    diag.mean_abs_update = (update - previous).cwiseAbs().mean();
    ds.set_missing(column, part.missing, update);
    return diag;
}

ImputationResult impute(const MaskedDataset& ds, const ImputationConfig& cfg, const WeightProvider& weights) {
    cfg.validate();
    ImputationResult result;
    result.config = cfg;
    const std::vector<Index> order = visitation_order(ds, cfg.visitation, cfg.order);
    if (order.empty()) {
        result.completed = ds.completed();
        return result;
    }
    MaskedDataset work = initial_impute(ds);
    const WeightProvider provider = weights ? weights : default_weight_provider(cfg);
    for (int sweep = 0; sweep < cfg.gamma; ++sweep) {
        IterationDiagnostics it;
        it.sweep = sweep;
        for (Index column : order) {
            try {
                it.columns.push_back(impute_column_step(work, column, cfg, sweep, provider));
            } catch (const std::exception& e) {
                throw std::runtime_error("sweep " + std::to_string(sweep) + ", column " + std::to_string(column) +
                                         ": " + e.what());
            }
        }
        result.per_sweep.push_back(std::move(it));
    }
    result.completed = work.completed();
    return result;
}

}  // namespace wimpute
