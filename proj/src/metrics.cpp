#include "wimpute/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace wimpute {

double rmse_masked(const Matrix& truth, const Matrix& imputed, const MaskMatrix& mask) {
    if (truth.rows() != imputed.rows() || truth.cols() != imputed.cols() || truth.rows() != mask.rows() ||
        truth.cols() != mask.cols()) {
        throw std::invalid_argument("rmse_masked: shape mismatch");
    }
    double acc = 0.0;
    Index count = 0;
    for (Index j = 0; j < truth.cols(); ++j) {
        for (Index k = 0; k < truth.rows(); ++k) {
            if (mask.observed(k, j)) continue;
            const double e = truth(k, j) - imputed(k, j);
            acc += e * e;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("rmse_masked: no masked cells");
    return std::sqrt(acc / static_cast<double>(count));
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein_1d: empty sample");
    if (a.size() != b.size()) throw std::invalid_argument("wasserstein_1d: samples must have equal length");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += std::abs(a[k] - b[k]);
    return acc / static_cast<double>(a.size());
}

std::pair<double, std::vector<double>> wasserstein_marginal_sum(const Matrix& truth, const Matrix& imputed) {
    if (truth.rows() != imputed.rows() || truth.cols() != imputed.cols()) {
        throw std::invalid_argument("wasserstein_marginal_sum: shape mismatch");
    }
    std::vector<double> per(static_cast<std::size_t>(truth.cols()));
    double total = 0.0;
    for (Index j = 0; j < truth.cols(); ++j) {
        std::vector<double> a(truth.col(j).data(), truth.col(j).data() + truth.rows());
        std::vector<double> b(imputed.col(j).data(), imputed.col(j).data() + imputed.rows());
        per[static_cast<std::size_t>(j)] = wasserstein_1d(std::move(a), std::move(b));
        total += per[static_cast<std::size_t>(j)];
    }
    return {total, per};
}

MetricsReport evaluate_imputation(const Matrix& truth, const Matrix& imputed, const MaskMatrix& mask) {
    MetricsReport r;
    r.rmse = rmse_masked(truth, imputed, mask);
    auto [w, per] = wasserstein_marginal_sum(truth, imputed);
    r.wasserstein = w;
    r.per_column_wasserstein = std::move(per);
    r.masked_cell_count = mask.total_missing();
    return r;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) ranks[order[t]] = avg;
        i = j;
    }
    return ranks;
}

double normal_sf(double z) {
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y, int min_pairs) {
    if (x.size() != y.size()) throw std::invalid_argument("wilcoxon_signed_rank: paired vectors differ in length");
    WilcoxonResult r;
    std::vector<double> diffs;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        if (d == 0.0) {
            ++r.n_zero_diffs;
        } else {
            diffs.push_back(d);
        }
    }
    if (diffs.empty()) throw std::invalid_argument("wilcoxon_signed_rank: no nonzero pairs");
    if (static_cast<int>(diffs.size()) < min_pairs) {
        throw std::invalid_argument("wilcoxon_signed_rank: only " + std::to_string(diffs.size()) +
                                    " nonzero pairs, need " + std::to_string(min_pairs));
    }
    r.n_pairs = static_cast<int>(diffs.size());
    std::vector<double> mags(diffs.size());
    std::transform(diffs.begin(), diffs.end(), mags.begin(), [](double d) { return std::abs(d); });
    const std::vector<double> ranks = average_ranks(mags);
    for (std::size_t k = 0; k < diffs.size(); ++k) {
        (diffs[k] > 0.0 ? r.statistic : r.w_minus) += ranks[k];
    }

    const double n = static_cast<double>(diffs.size());
    const double mean = n * (n + 1.0) / 4.0;
    double tie_term = 0.0;
    std::vector<double> sorted = mags;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i + 1;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    const double dev = r.statistic - mean;
    const double corrected = std::max(0.0, std::abs(dev) - 0.5);
    r.z_score = var > 0.0 ? std::copysign(corrected / std::sqrt(var), dev) : 0.0;
    r.p_value = std::min(1.0, 2.0 * normal_sf(std::abs(r.z_score)));
    return r;
}

double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman_correlation: bad lengths");
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const Eigen::Map<const Vector> va(ra.data(), static_cast<Index>(ra.size()));
    const Eigen::Map<const Vector> vb(rb.data(), static_cast<Index>(rb.size()));
    const Vector ca = va.array() - va.mean();
    const Vector cb = vb.array() - vb.mean();
    const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
    return denom > 0.0 ? ca.dot(cb) / denom : 0.0;
}

}  // namespace wimpute
