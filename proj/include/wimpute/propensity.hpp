#pragma once

#include <vector>

#include "wimpute/data.hpp"

namespace wimpute {

/// L2-penalized logistic model for P(R_i = 1 | completed covariates).
struct PropensityModel {
    Vector coefficients;
    double intercept = 0.0;
    double l2_penalty = 0.0;
    bool converged = false;
    int iterations = 0;
    double max_abs_gradient = 0.0;

    Vector predict_proba(const Matrix& x) const;
};

struct PropensityOptions {
    /// Penalty on the mean log-likelihood scale; the intercept is unpenalized.
    double l2 = 1e-4;
    double gradient_tolerance = 1e-8;
    int max_iterations = 100;
};

/// Maximizes (1/n) sum log-likelihood - (l2/2) |coefficients|^2 by Newton/IRLS
/// with step halving. Single-class labels throw; non-convergence is reported
/// through `converged`, never silently.
PropensityModel fit_propensity(const Matrix& x, const std::vector<bool>& labels, const PropensityOptions& opts = {});

struct WeightVector {
    Vector weights;
    double clip_epsilon = 1e-3;
    bool normalized = false;
};

/// (1 - eta) / eta with eta clipped to [eps, 1 - eps].
double odds_weight(double eta, double clip_epsilon);

/// Clip, convert to odds and rescale to mean one.
WeightVector weights_from_propensity(const Vector& eta, double clip_epsilon = 1e-3);

/// Rescales to mean one. Requires a positive sum.
Vector normalize_mean_one(const Vector& w);

/// (sum w)^2 / sum w^2
double effective_sample_size(const Vector& w);

struct WeightEstimate {
    PropensityModel model;
    WeightVector weights;  ///< aligned with `rows`
    RowIndices rows;       ///< rows where column i is observed, ascending
};

struct WeightOptions {
    PropensityOptions propensity;
    double clip_epsilon = 1e-3;
};

/// Importance weights for the observed rows of `column`: a propensity model
/// fit on every row (labels = mask column, predictors = the other completed
/// columns standardized over all rows), evaluated at the observed rows.
WeightEstimate estimate_weights(const MaskedDataset& ds, Index column, const WeightOptions& opts = {});

struct WeightHistogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<Index> counts;
};

WeightHistogram weight_histogram(const Vector& w, int bins = 20);

}  // namespace wimpute
