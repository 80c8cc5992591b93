#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "wimpute/data.hpp"
#include "wimpute/propensity.hpp"
#include "wimpute/regressors.hpp"

namespace wimpute {

enum class VisitationPolicy { ascending_missing_count, explicit_order };

struct ImputationConfig {
    RegressorSpec regressor;
    bool weighted = true;
    int gamma = 5;  ///< number of full sweeps
    VisitationPolicy visitation = VisitationPolicy::ascending_missing_count;
    std::vector<Index> order;  ///< used with VisitationPolicy::explicit_order
    double clip_epsilon = 1e-3;
    double propensity_l2 = 1e-4;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ColumnDiagnostics {
    Index column = 0;
    double weighted_train_mse = 0.0;
    double mean_abs_update = 0.0;
    double effective_sample_size = 0.0;
    bool propensity_converged = true;
    std::optional<PropensityModel> propensity;  ///< absent in unweighted mode
    WeightHistogram weight_histogram;           ///< 20 bins over the training weights
};

struct IterationDiagnostics {
    int sweep = 0;
    std::vector<ColumnDiagnostics> columns;
};

struct ImputationResult {
    Matrix completed;
    std::vector<IterationDiagnostics> per_sweep;
    ImputationConfig config;
};

struct ColumnWeights {
    Vector weights;  ///< one per observed row of the column, ascending row order
    bool propensity_converged = true;
    std::optional<PropensityModel> propensity;
};

/// Supplies training weights for a column. The engine uses estimate_weights
/// in weighted mode and unit weights otherwise; tests may inject their own.
using WeightProvider = std::function<ColumnWeights(const MaskedDataset&, Index column)>;

/// Fills every missing cell with its column's observed mean.
MaskedDataset initial_impute(MaskedDataset ds);

/// Columns with missing cells in visiting order.
std::vector<Index> visitation_order(const MaskedDataset& ds, VisitationPolicy policy,
                                    const std::vector<Index>& explicit_order = {});

/// One column update: weights, fit on observed rows against the other
/// completed columns (standardized with observed-row statistics), then
/// overwrite the missing cells of `column`.
ColumnDiagnostics impute_column_step(MaskedDataset& ds, Index column, const ImputationConfig& cfg, int sweep,
                                     const WeightProvider& weights = {});

/// Round-robin imputation: initial mean fill, then `gamma` sweeps over the
/// visitation order. Errors are rethrown with column and sweep context.
ImputationResult impute(const MaskedDataset& ds, const ImputationConfig& cfg, const WeightProvider& weights = {});

/// Default weight provider for a config (estimated weights or unit weights).
WeightProvider default_weight_provider(const ImputationConfig& cfg);

}  // namespace wimpute
