#pragma once

#include <vector>

#include "wimpute/data.hpp"

namespace wimpute {

struct MetricsReport {
    double rmse = 0.0;
    double wasserstein = 0.0;
    std::vector<double> per_column_wasserstein;
    Index masked_cell_count = 0;
};

/// Root mean squared error over the cells where mask is false.
double rmse_masked(const Matrix& truth, const Matrix& imputed, const MaskMatrix& mask);

/// W1 between two equal-size empirical samples: mean |a_(k) - b_(k)| over the
/// sorted samples.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

/// Sum over columns of W1 between full true and imputed columns.
std::pair<double, std::vector<double>> wasserstein_marginal_sum(const Matrix& truth, const Matrix& imputed);

MetricsReport evaluate_imputation(const Matrix& truth, const Matrix& imputed, const MaskMatrix& mask);

struct WilcoxonResult {
    double statistic = 0.0;  ///< W+, the sum of ranks of positive differences
    double w_minus = 0.0;
    double z_score = 0.0;
    double p_value = 1.0;
    int n_pairs = 0;       ///< pairs retained after dropping zero differences
    int n_zero_diffs = 0;
};

/// Two-sided paired signed-rank test on x - y. Zero differences are dropped,
/// tied magnitudes share average ranks, and the p-value uses the normal
/// approximation with tie-corrected variance and a 0.5 continuity
/// correction. Throws std::invalid_argument with fewer than `min_pairs`
/// nonzero differences.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y, int min_pairs = 10);

/// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& values);

double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b);

/// Standard normal upper tail P(Z > z).
double normal_sf(double z);

}  // namespace wimpute
