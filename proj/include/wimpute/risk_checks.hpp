#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wimpute/data.hpp"
#include "wimpute/mask_sim.hpp"

namespace wimpute {

/// Gaussian design with known structure. The first `n_base` columns are
/// fully observed standard normal features (optionally truncated to
/// [-truncation, truncation] to bound propensities); the remaining columns
/// are x = coefficients * base + noise_sd * e, one row of `coefficients` per
/// maskable column. `mechanism` plants missingness; its missing columns
/// must be maskable ones and its predictors base ones.
struct SyntheticSpec {
    Index n = 200000;
    Index n_base = 1;
    Matrix coefficients;  ///< n_maskable x n_base
    double noise_sd = 0.5;
    double truncation = 0.0;  ///< 0 = untruncated
    MarSpec mechanism;
    std::uint64_t seed = 0;

    Index d() const { return n_base + coefficients.rows(); }
};

struct SyntheticSample {
    DataMatrix data;
    MaskedDataset masked;
    CalibratedMechanism mechanism;
};

SyntheticSample generate_sample(const SyntheticSpec& spec);

/// g_i(x~): imputation of `column` for one row given its observed entries.
using ImputationMap =
    std::function<double(Index column, const Eigen::RowVectorXd& values, const Eigen::Array<bool, 1, Eigen::Dynamic>& observed)>;

/// Constant per-column imputation with the observed means of `ds`.
ImputationMap mean_imputation_map(const MaskedDataset& ds);

/// Imputes the true value (the zero-loss oracle).
ImputationMap oracle_map(const DataMatrix& truth);

struct IdentityCheck {
    double lhs = 0.0;
    double rhs = 0.0;

    double relative_gap() const;
};

/// Monte-Carlo check of the coordinatewise decomposition of the joint
/// masked-cell MSE. lhs is the joint per-row loss on one sample; rhs sums
/// P(R_i = 0) times the conditional MSE of coordinate i on an independent
/// sample drawn with seed + 1 (or on the same sample, where the identity is
/// exact, when `independent_sample` is false).
IdentityCheck check_risk_decomposition(const SyntheticSpec& spec, const ImputationMap& g,
                                       bool independent_sample = true);

/// lhs: E[(g_i - X_i)^2 | R_i = 0] estimated on missing rows.
/// rhs: self-normalized E[w (g_i - X_i)^2 | R_i = 1] with true mechanism
/// weights (1 - p)/p, or unit weights when `use_weights` is false.
/// Throws if any true propensity falls outside (0.01, 0.99).
IdentityCheck check_weighting_identity(const SyntheticSpec& spec, const ImputationMap& g, Index column,
                                       bool use_weights = true);

/// Fits x_column ~ 1 + base features + indicators of the other maskable
/// columns on the rows where `column` is missing and returns the largest
/// absolute indicator coefficient. Throws if an indicator is constant on
/// those rows.
double check_linear_ignores_indicators(const SyntheticSample& sample, Index n_base, Index column);
double check_linear_ignores_indicators(const SyntheticSpec& spec, Index column);

/// Variant of `spec` whose column `dependent` is missing based on the value
/// of column `driver` (a maskable column), i.e. not at random.
SyntheticSample generate_mnar_sample(const SyntheticSpec& spec, Index dependent, Index driver);

struct CheckOutcome {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    std::string comparison;  ///< "<" or ">"
    bool passed = false;
};

/// Canonical specs used by the verify command and the acceptance suite.
SyntheticSpec decomposition_spec(std::uint64_t seed = 11);
SyntheticSpec weighting_spec(std::uint64_t seed = 12);
SyntheticSpec indicator_spec(std::uint64_t seed = 13);

/// Runs every identity check at its canonical settings.
std::vector<CheckOutcome> run_identity_suite();

}  // namespace wimpute
