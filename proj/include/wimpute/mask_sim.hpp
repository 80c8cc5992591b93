#pragma once

#include <cstdint>
#include <vector>

#include "wimpute/data.hpp"

namespace wimpute {

/// Logistic MAR mechanism description: each missing column i_k is observed
/// with probability sigmoid(alpha * sum_{j in C_k} z_j + beta_k), where z are
/// the standardized predictor columns.
struct MarSpec {
    std::vector<Index> missing_cols;
    std::vector<std::vector<Index>> predictor_sets;  ///< one per missing column
    double alpha = 0.0;
    double target_missing_rate = 0.3;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument when the spec is malformed for width d.
    void validate(Index d) const;
};

struct CalibratedMechanism {
    MarSpec spec;
    std::vector<double> intercepts;  ///< beta per missing column
    Matrix probabilities;            ///< n x |missing_cols|, P(observed)

    /// Mean missingness probability for missing column k.
    double expected_missing_rate(std::size_t k) const;
};

/// 1 / (1 + exp(-z)), evaluated without overflow for any finite z.
double sigmoid(double z);
double logit(double p);

/// Intercept beta such that mean(1 - sigmoid(scores + beta)) matches
/// `target_rate` within 1e-4, by bisection on [-50, 50] (at most 200 steps).
/// Throws std::runtime_error when the interval does not bracket the target.
double calibrate_intercept(const Vector& scores, double target_rate);

struct MaskSimulation {
    MaskedDataset dataset;
    CalibratedMechanism mechanism;
};

/// Plants missingness into a complete matrix. Deterministic in spec.seed.
/// A draw that leaves some column fully missing is retried once with
/// seed + 1; a second failure throws.
MaskSimulation apply_mar_mask(const DataMatrix& data, const MarSpec& spec);

/// Samples missing columns uniformly without replacement, then for each a
/// predictor set from the remaining columns.
MarSpec select_random_spec(Index d, int n_missing_cols, int n_predictors, std::uint64_t seed);
inline MarSpec select_random_spec(const DataMatrix& data, int n_missing_cols, int n_predictors, std::uint64_t seed) {
    return select_random_spec(data.cols(), n_missing_cols, n_predictors, seed);
}

}  // namespace wimpute
