#include "wimpute/mask_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>

namespace wimpute {

namespace {

// Probabilities are kept inside (kOverlapFloor, 1 - kOverlapFloor).
constexpr double kOverlapFloor = 1e-12;
constexpr double kRateTolerance = 1e-4;
constexpr int kMaxBisection = 200;

double mean_missing_rate(const Vector& scores, double beta) {
    double acc = 0.0;
    for (Index k = 0; k < scores.size(); ++k) acc += sigmoid(-(scores[k] + beta));
    return acc / static_cast<double>(scores.size());
}

}  // namespace

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double logit(double p) {
    return std::log(p / (1.0 - p));
}

void MarSpec::validate(Index d) const {
    if (missing_cols.empty()) throw std::invalid_argument("MarSpec: no missing columns");
    if (!(target_missing_rate > 0.0 && target_missing_rate < 1.0)) {
        throw std::invalid_argument("MarSpec: target missing rate must lie in (0, 1)");
    }
    if (predictor_sets.size() != missing_cols.size()) {
        throw std::invalid_argument("MarSpec: need one predictor set per missing column");
    }
    std::set<Index> missing(missing_cols.begin(), missing_cols.end());
    if (missing.size() != missing_cols.size()) throw std::invalid_argument("MarSpec: duplicate missing column");
    for (Index c : missing_cols) {
        if (c < 0 || c >= d) throw std::invalid_argument("MarSpec: missing column out of range");
    }
    for (const auto& preds : predictor_sets) {
        if (preds.empty() && alpha != 0.0) {
            throw std::invalid_argument("MarSpec: empty predictor set with nonzero alpha");
        }
        for (Index c : preds) {
            if (c < 0 || c >= d) throw std::invalid_argument("MarSpec: predictor column out of range");
            if (missing.count(c)) {
                throw std::invalid_argument("MarSpec: predictor column " + std::to_string(c) +
                                            " is itself a missing column");
            }
        }
    }
}

double CalibratedMechanism::expected_missing_rate(std::size_t k) const {
    return 1.0 - probabilities.col(static_cast<Index>(k)).mean();
}

double calibrate_intercept(const Vector& scores, double target_rate) {
    if (scores.size() == 0) throw std::invalid_argument("calibrate_intercept: empty score vector");
    if (!scores.allFinite()) throw std::invalid_argument("calibrate_intercept: non-finite score");
    if (!(target_rate > 0.01 && target_rate < 0.99)) {
        throw std::invalid_argument("calibrate_intercept: target rate must lie in (0.01, 0.99)");
    }
    // Missing rate is decreasing in beta.
    double lo = -50.0;
    double hi = 50.0;
    if (mean_missing_rate(scores, lo) < target_rate || mean_missing_rate(scores, hi) > target_rate) {
        throw std::runtime_error("calibrate_intercept: [-50, 50] does not bracket the target rate " +
                                 std::to_string(target_rate));
    }
    double mid = 0.0;
    for (int it = 0; it < kMaxBisection && hi - lo > 1e-13; ++it) {
        mid = 0.5 * (lo + hi);
        if (mean_missing_rate(scores, mid) > target_rate) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid = 0.5 * (lo + hi);
    if (std::abs(mean_missing_rate(scores, mid) - target_rate) > kRateTolerance) {
        throw std::runtime_error("calibrate_intercept: bisection did not reach the target rate");
    }
    return mid;
}

namespace {

BoolMatrix draw_mask(const CalibratedMechanism& mech, Index n, Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    BoolMatrix observed = BoolMatrix::Constant(n, d, true);
    for (std::size_t k = 0; k < mech.spec.missing_cols.size(); ++k) {
        const Index col = mech.spec.missing_cols[k];
        for (Index r = 0; r < n; ++r) {
            observed(r, col) = unif(rng) < mech.probabilities(r, static_cast<Index>(k));
        }
    }
    return observed;
}

bool mask_usable(const BoolMatrix& observed) {
    for (Index j = 0; j < observed.cols(); ++j) {
        if (!observed.col(j).any()) return false;
    }
    for (Index k = 0; k < observed.rows(); ++k) {
        if (!observed.row(k).any()) return false;
    }
    return true;
}

}  // namespace

MaskSimulation apply_mar_mask(const DataMatrix& data, const MarSpec& spec) {
    if (!data.is_complete()) throw std::invalid_argument("apply_mar_mask: data must be complete");
    spec.validate(data.cols());
    const Index n = data.rows();

    const auto [z, stats] = standardize(data.values);
    CalibratedMechanism mech;
    mech.spec = spec;
    mech.probabilities.resize(n, static_cast<Index>(spec.missing_cols.size()));
    for (std::size_t k = 0; k < spec.missing_cols.size(); ++k) {
        Vector scores = Vector::Zero(n);
        for (Index c : spec.predictor_sets[k]) scores += z.col(c);
        scores *= spec.alpha;
        const double beta = calibrate_intercept(scores, spec.target_missing_rate);
        mech.intercepts.push_back(beta);
        for (Index r = 0; r < n; ++r) {
            mech.probabilities(r, static_cast<Index>(k)) =
                std::clamp(sigmoid(scores[r] + beta), kOverlapFloor, 1.0 - kOverlapFloor);
        }
    }

    BoolMatrix observed = draw_mask(mech, n, data.cols(), spec.seed);
    if (!mask_usable(observed)) {
        observed = draw_mask(mech, n, data.cols(), spec.seed + 1);
        if (!mask_usable(observed)) {
            throw std::runtime_error("apply_mar_mask: drawn mask leaves a column or row entirely missing");
        }
    }
    return {MaskedDataset(data, MaskMatrix{std::move(observed)}), std::move(mech)};
}

MarSpec select_random_spec(Index d, int n_missing_cols, int n_predictors, std::uint64_t seed) {
    if (n_missing_cols < 1 || n_missing_cols > 4) {
        throw std::invalid_argument("select_random_spec: missing column count must be in [1, 4]");
    }
    if (n_predictors < 0 || n_predictors > 4) {
        throw std::invalid_argument("select_random_spec: predictor count must be in [0, 4]");
    }
    if (d <= n_missing_cols || d - n_missing_cols < n_predictors) {
        throw std::invalid_argument("select_random_spec: " + std::to_string(d) + " columns cannot host " +
                                    std::to_string(n_missing_cols) + " missing columns with " +
                                    std::to_string(n_predictors) + " predictors each");
    }
    std::mt19937_64 rng(seed);
    std::vector<Index> cols(static_cast<std::size_t>(d));
    std::iota(cols.begin(), cols.end(), Index{0});
    std::shuffle(cols.begin(), cols.end(), rng);

    MarSpec spec;
    spec.seed = seed;
    spec.missing_cols.assign(cols.begin(), cols.begin() + n_missing_cols);
    std::sort(spec.missing_cols.begin(), spec.missing_cols.end());
    std::vector<Index> rest(cols.begin() + n_missing_cols, cols.end());
    std::sort(rest.begin(), rest.end());
    for (int k = 0; k < n_missing_cols; ++k) {
        std::vector<Index> pool = rest;
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(static_cast<std::size_t>(n_predictors));
        std::sort(pool.begin(), pool.end());
        spec.predictor_sets.push_back(std::move(pool));
    }
    return spec;
}

}  // namespace wimpute
