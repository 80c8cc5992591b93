#include "wimpute/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wimpute/mask_sim.hpp"

namespace wimpute {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

struct Objective {
    double value;
    Vector gradient;
    Vector probs;
};

// Parameter layout: [intercept, coefficients...]
Objective evaluate(const Matrix& x, const Vector& y, const Vector& params, double l2) {
    const Index n = x.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    const auto coef = params.tail(x.cols());
    const Vector z = (x * coef).array() + params[0];
    Objective o;
    o.probs.resize(n);
    double ll = 0.0;
    for (Index k = 0; k < n; ++k) {
        o.probs[k] = sigmoid(z[k]);
        ll += y[k] * z[k] - softplus(z[k]);
    }
    o.value = ll * inv_n - 0.5 * l2 * coef.squaredNorm();
    const Vector resid = y - o.probs;
    o.gradient.resize(params.size());
    o.gradient[0] = resid.sum() * inv_n;
    o.gradient.tail(x.cols()) = x.transpose() * resid * inv_n - l2 * coef;
    return o;
}

}  // namespace

Vector PropensityModel::predict_proba(const Matrix& x) const {
    if (x.cols() != coefficients.size()) {
        throw std::invalid_argument("PropensityModel: predictor width mismatch");
    }
    Vector z = (x * coefficients).array() + intercept;
    for (Index k = 0; k < z.size(); ++k) z[k] = sigmoid(z[k]);
    return z;
}

PropensityModel fit_propensity(const Matrix& x, const std::vector<bool>& labels, const PropensityOptions& opts) {
    const Index n = x.rows();
    const Index p = x.cols();
    if (static_cast<Index>(labels.size()) != n) throw std::invalid_argument("fit_propensity: label count mismatch");
    if (opts.l2 < 0.0) throw std::invalid_argument("fit_propensity: negative penalty");
    Vector y(n);
    Index positives = 0;
    for (Index k = 0; k < n; ++k) {
        y[k] = labels[static_cast<std::size_t>(k)] ? 1.0 : 0.0;
        positives += labels[static_cast<std::size_t>(k)] ? 1 : 0;
    }
    if (positives == 0 || positives == n) {
        throw std::invalid_argument("fit_propensity: labels contain a single class");
    }

    Vector params = Vector::Zero(p + 1);
    params[0] = logit(static_cast<double>(positives) / static_cast<double>(n));
    Objective cur = evaluate(x, y, params, opts.l2);

    Matrix design(n, p + 1);
    design.col(0).setOnes();
    design.rightCols(p) = x;

    PropensityModel model;
    model.l2_penalty = opts.l2;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        if (cur.gradient.cwiseAbs().maxCoeff() < opts.gradient_tolerance) break;
        // Negative Hessian of the mean penalized log-likelihood.
        const Vector s = cur.probs.array() * (1.0 - cur.probs.array());
        Matrix h = design.transpose() * (design.array().colwise() * s.array()).matrix() / static_cast<double>(n);
        h.diagonal().tail(p).array() += opts.l2;
        h.diagonal().array() += 1e-12;
        const Vector step = h.ldlt().solve(cur.gradient);

        // Rounding slack so that steps at the optimum are not rejected.
        const double floor = cur.value - 1e-14 * std::max(1.0, std::abs(cur.value));
        double t = 1.0;
        Objective next = evaluate(x, y, params + step, opts.l2);
        while (next.value < floor && t > 1e-10) {
            t *= 0.5;
            next = evaluate(x, y, params + t * step, opts.l2);
        }
        if (next.value < floor) break;
        params += t * step;
        cur = std::move(next);
    }
    model.iterations = it;
    model.max_abs_gradient = cur.gradient.cwiseAbs().maxCoeff();
    model.converged = model.max_abs_gradient < opts.gradient_tolerance;
    model.intercept = params[0];
    model.coefficients = params.tail(p);
    return model;
}

double odds_weight(double eta, double clip_epsilon) {
    const double e = std::clamp(eta, clip_epsilon, 1.0 - clip_epsilon);
    return (1.0 - e) / e;
}

Vector normalize_mean_one(const Vector& w) {
    const double total = w.sum();
    if (!(total > 0.0)) throw std::invalid_argument("normalize_mean_one: weights must have a positive sum");
    return w * (static_cast<double>(w.size()) / total);
}

WeightVector weights_from_propensity(const Vector& eta, double clip_epsilon) {
    if (!(clip_epsilon > 0.0 && clip_epsilon < 0.5)) {
        throw std::invalid_argument("weights_from_propensity: clip epsilon must lie in (0, 0.5)");
    }
    Vector raw(eta.size());
    for (Index k = 0; k < eta.size(); ++k) raw[k] = odds_weight(eta[k], clip_epsilon);
    WeightVector out;
    out.clip_epsilon = clip_epsilon;
    out.weights = eta.size() > 0 ? normalize_mean_one(raw) : raw;
    out.normalized = true;
    return out;
}

double effective_sample_size(const Vector& w) {
    const double sq = w.squaredNorm();
    return sq > 0.0 ? w.sum() * w.sum() / sq : 0.0;
}

WeightEstimate estimate_weights(const MaskedDataset& ds, Index column, const WeightOptions& opts) {
    const RowPartition part = partition_by_column(ds, column);
    if (part.missing.empty()) {
        throw std::invalid_argument("estimate_weights: column " + std::to_string(column) +
                                    " is fully observed and has nothing to impute");
    }
    if (!ds.completed().allFinite()) {
        throw std::invalid_argument("estimate_weights: completed matrix has unfilled cells");
    }
    const auto [x, stats] = standardize(drop_column(ds.completed(), column));
    std::vector<bool> labels(static_cast<std::size_t>(ds.rows()));
    for (Index k = 0; k < ds.rows(); ++k) labels[static_cast<std::size_t>(k)] = ds.mask().observed(k, column);

    WeightEstimate est;
    est.model = fit_propensity(x, labels, opts.propensity);
    est.rows = part.observed;
    est.weights = weights_from_propensity(est.model.predict_proba(select_rows(x, part.observed)), opts.clip_epsilon);
    return est;
}

WeightHistogram weight_histogram(const Vector& w, int bins) {
    WeightHistogram h;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    if (w.size() == 0) return h;
    h.lo = w.minCoeff();
    h.hi = w.maxCoeff();
    const double width = (h.hi - h.lo) / bins;
    for (Index k = 0; k < w.size(); ++k) {
        int b = width > 0.0 ? static_cast<int>((w[k] - h.lo) / width) : 0;
        b = std::clamp(b, 0, bins - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    return h;
}

}  // namespace wimpute
