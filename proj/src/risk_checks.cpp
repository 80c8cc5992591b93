#include "wimpute/risk_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>

#include "wimpute/propensity.hpp"
#include "wimpute/regressors.hpp"
#include "wimpute/synthetic.hpp"

namespace wimpute {

namespace {

DataMatrix generate_values(const SyntheticSpec& spec) {
    if (spec.coefficients.cols() != spec.n_base) {
        throw std::invalid_argument("SyntheticSpec: coefficient width must equal n_base");
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index d = spec.d();
    Matrix x(spec.n, d);
    for (Index k = 0; k < spec.n; ++k) {
        for (Index j = 0; j < spec.n_base; ++j) {
            double z = normal(rng);
            while (spec.truncation > 0.0 && std::abs(z) > spec.truncation) z = normal(rng);
            x(k, j) = z;
        }
        for (Index m = 0; m < spec.coefficients.rows(); ++m) {
            x(k, spec.n_base + m) = x.row(k).head(spec.n_base).dot(spec.coefficients.row(m)) +
                                    spec.noise_sd * normal(rng);
        }
    }
    return DataMatrix(std::move(x), default_column_names(d));
}

void check_mechanism_targets(const SyntheticSpec& spec) {
    for (Index c : spec.mechanism.missing_cols) {
        if (c < spec.n_base) throw std::invalid_argument("SyntheticSpec: base columns must stay observed");
    }
    for (const auto& preds : spec.mechanism.predictor_sets) {
        for (Index c : preds) {
            if (c >= spec.n_base) throw std::invalid_argument("SyntheticSpec: predictors must be base columns");
        }
    }
}

Eigen::RowVectorXd tilde_row(const MaskedDataset& ds, Index k) {
    Eigen::RowVectorXd row = ds.data().values.row(k);
    for (Index j = 0; j < ds.cols(); ++j) {
        if (!ds.mask().observed(k, j)) row[j] = std::numeric_limits<double>::quiet_NaN();
    }
    return row;
}

// Squared error of g's prediction of `column` at row k, with that cell hidden
// even where it is observed.
double loss_at(const MaskedDataset& ds, const ImputationMap& g, Index k, Index column) {
    Eigen::Array<bool, 1, Eigen::Dynamic> obs = ds.mask().observed.row(k);
    Eigen::RowVectorXd row = tilde_row(ds, k);
    obs[column] = false;
    row[column] = std::numeric_limits<double>::quiet_NaN();
    const double e = g(column, row, obs) - ds.data().values(k, column);
    return e * e;
}

}  // namespace

SyntheticSample generate_sample(const SyntheticSpec& spec) {
    check_mechanism_targets(spec);
    DataMatrix data = generate_values(spec);
    MarSpec mech = spec.mechanism;
    mech.seed = spec.seed ^ 0x5bd1e995ULL;
    MaskSimulation sim = apply_mar_mask(data, mech);
    return {std::move(data), std::move(sim.dataset), std::move(sim.mechanism)};
}

ImputationMap mean_imputation_map(const MaskedDataset& ds) {
    Vector means(ds.cols());
    for (Index j = 0; j < ds.cols(); ++j) {
        const RowPartition part = partition_by_column(ds, j);
        double acc = 0.0;
        for (Index k : part.observed) acc += ds.data().values(k, j);
        means[j] = part.observed.empty() ? 0.0 : acc / static_cast<double>(part.observed.size());
    }
    return [means](Index column, const Eigen::RowVectorXd& values, const Eigen::Array<bool, 1, Eigen::Dynamic>& obs) {
        return obs[column] ? values[column] : means[column];
    };
}

ImputationMap oracle_map(const DataMatrix& truth) {
    // Rows are identified by their observed entries, so the oracle is only
    // valid on the dataset it was built from; it looks rows up by position.
    auto lookup = std::make_shared<Matrix>(truth.values);
    auto cursor = std::make_shared<Index>(0);
    return [lookup, cursor](Index column, const Eigen::RowVectorXd& values,
                            const Eigen::Array<bool, 1, Eigen::Dynamic>& obs) {
        if (obs[column]) return values[column];
        // Find the truth row agreeing on every observed entry.
        for (Index tries = 0; tries < lookup->rows(); ++tries) {
            const Index k = (*cursor + tries) % lookup->rows();
            bool match = true;
            for (Index j = 0; j < values.size() && match; ++j) {
                if (obs[j] && (*lookup)(k, j) != values[j]) match = false;
            }
            if (match) {
                *cursor = k;
                return (*lookup)(k, column);
            }
        }
        throw std::runtime_error("oracle_map: row not found in the truth table");
    };
}

double IdentityCheck::relative_gap() const {
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    return scale > 0.0 ? std::abs(lhs - rhs) / scale : 0.0;
}

IdentityCheck check_risk_decomposition(const SyntheticSpec& spec, const ImputationMap& g, bool independent_sample) {
    const SyntheticSample a = generate_sample(spec);
    SyntheticSpec other = spec;
    other.seed = spec.seed + 1;
    const SyntheticSample b = independent_sample ? generate_sample(other) : a;
    const std::vector<Index> cols = imputed_columns(a.masked.mask());

    IdentityCheck out;
    double joint = 0.0;
    for (Index k = 0; k < a.masked.rows(); ++k) {
        for (Index i : cols) {
            if (!a.masked.mask().observed(k, i)) joint += loss_at(a.masked, g, k, i);
        }
    }
    out.lhs = joint / static_cast<double>(a.masked.rows());

    for (Index i : imputed_columns(b.masked.mask())) {
        const RowPartition part = partition_by_column(b.masked, i);
        double acc = 0.0;
        for (Index k : part.missing) acc += loss_at(b.masked, g, k, i);
        const double p_missing = static_cast<double>(part.missing.size()) / static_cast<double>(b.masked.rows());
        out.rhs += p_missing * acc / static_cast<double>(part.missing.size());
    }
    return out;
}

IdentityCheck check_weighting_identity(const SyntheticSpec& spec, const ImputationMap& g, Index column,
                                       bool use_weights) {
    const SyntheticSample s = generate_sample(spec);
    const auto& probs = s.mechanism.probabilities;
    if (probs.minCoeff() <= 0.01 || probs.maxCoeff() >= 0.99) {
        throw std::invalid_argument("check_weighting_identity: true propensities leave (0.01, 0.99); overlap too weak");
    }
    const auto& cols = s.mechanism.spec.missing_cols;
    const auto it = std::find(cols.begin(), cols.end(), column);
    if (it == cols.end()) throw std::invalid_argument("check_weighting_identity: column is not masked by the spec");
    const Index mech_col = static_cast<Index>(it - cols.begin());

    const RowPartition part = partition_by_column(s.masked, column);
    IdentityCheck out;
    double acc = 0.0;
    for (Index k : part.missing) acc += loss_at(s.masked, g, k, column);
    out.lhs = acc / static_cast<double>(part.missing.size());

    double wsum = 0.0;
    double wloss = 0.0;
    for (Index k : part.observed) {
        const double p = probs(k, mech_col);
        const double w = use_weights ? (1.0 - p) / p : 1.0;
        wsum += w;
        wloss += w * loss_at(s.masked, g, k, column);
    }
    out.rhs = wloss / wsum;
    return out;
}

double check_linear_ignores_indicators(const SyntheticSample& sample, Index n_base, Index column) {
    const MaskedDataset& ds = sample.masked;
    const RowPartition part = partition_by_column(ds, column);
    if (part.missing.empty()) throw std::invalid_argument("check_linear_ignores_indicators: column has no missing rows");
    std::vector<Index> indicators;
    for (Index j : imputed_columns(ds.mask())) {
        if (j != column) indicators.push_back(j);
    }
    if (indicators.empty()) throw std::invalid_argument("check_linear_ignores_indicators: no other indicators to test");

    const Index m = static_cast<Index>(part.missing.size());
    Matrix x(m, n_base + static_cast<Index>(indicators.size()));
    Vector y(m);
    for (Index t = 0; t < m; ++t) {
        const Index k = part.missing[static_cast<std::size_t>(t)];
        x.row(t).head(n_base) = ds.data().values.row(k).head(n_base);
        for (std::size_t q = 0; q < indicators.size(); ++q) {
            x(t, n_base + static_cast<Index>(q)) = ds.mask().observed(k, indicators[q]) ? 1.0 : 0.0;
        }
        y[t] = ds.data().values(k, column);
    }
    for (std::size_t q = 0; q < indicators.size(); ++q) {
        const auto col = x.col(n_base + static_cast<Index>(q));
        if ((col.array() == col[0]).all()) {
            throw std::invalid_argument("check_linear_ignores_indicators: indicator of column " + std::to_string(indicators[q]) +
                                        " is constant where the target is missing (collinear with the intercept)");
        }
    }
    const RidgeModel fit = fit_weighted_ridge(x, y, Vector::Ones(m), 1e-6);
    return fit.coefficients.tail(static_cast<Index>(indicators.size())).cwiseAbs().maxCoeff();
}

double check_linear_ignores_indicators(const SyntheticSpec& spec, Index column) {
    return check_linear_ignores_indicators(generate_sample(spec), spec.n_base, column);
}

SyntheticSample generate_mnar_sample(const SyntheticSpec& spec, Index dependent, Index driver) {
    check_mechanism_targets(spec);
    DataMatrix data = generate_values(spec);
    const auto& cols = spec.mechanism.missing_cols;
    if (std::find(cols.begin(), cols.end(), dependent) == cols.end() ||
        std::find(cols.begin(), cols.end(), driver) == cols.end() || dependent == driver) {
        throw std::invalid_argument("generate_mnar_sample: dependent and driver must be distinct masked columns");
    }
    const Matrix z = standardize(data.values).first;
    std::mt19937_64 rng(spec.seed ^ 0x2545f4914f6cdd1dULL);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    CalibratedMechanism mech;
    mech.spec = spec.mechanism;
    mech.probabilities.resize(spec.n, static_cast<Index>(cols.size()));
    BoolMatrix observed = BoolMatrix::Constant(spec.n, data.cols(), true);
    for (std::size_t q = 0; q < cols.size(); ++q) {
        Vector scores = Vector::Zero(spec.n);
        if (cols[q] == dependent) {
            scores = z.col(driver);
        } else {
            for (Index c : spec.mechanism.predictor_sets[q]) scores += z.col(c);
        }
        scores *= spec.mechanism.alpha;
        const double beta = calibrate_intercept(scores, spec.mechanism.target_missing_rate);
        mech.intercepts.push_back(beta);
        for (Index k = 0; k < spec.n; ++k) {
            const double p = sigmoid(scores[k] + beta);
            mech.probabilities(k, static_cast<Index>(q)) = p;
            observed(k, cols[q]) = unif(rng) < p;
        }
    }
    MaskedDataset masked(data, MaskMatrix{std::move(observed)});
    return {std::move(data), std::move(masked), std::move(mech)};
}

SyntheticSpec decomposition_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.n = 200000;
    s.n_base = 1;
    s.coefficients.resize(2, 1);
    s.coefficients << 0.8, -0.6;
    s.noise_sd = 0.5;
    s.mechanism.missing_cols = {1, 2};
    s.mechanism.predictor_sets = {{0}, {0}};
    s.mechanism.alpha = 1.0;
    s.mechanism.target_missing_rate = 0.3;
    s.seed = seed;
    return s;
}

SyntheticSpec weighting_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.n = 200000;
    s.n_base = 2;
    s.coefficients.resize(1, 2);
    s.coefficients << 1.5, 0.5;
    s.noise_sd = 0.5;
    s.truncation = 1.5;
    s.mechanism.missing_cols = {2};
    s.mechanism.predictor_sets = {{0}};
    s.mechanism.alpha = 2.0;
    s.mechanism.target_missing_rate = 0.5;
    s.seed = seed;
    return s;
}

SyntheticSpec indicator_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.n = 50000;
    s.n_base = 3;
    s.coefficients.resize(2, 3);
    s.coefficients << 0.8, -0.5, 0.3, 0.4, 0.6, -0.7;
    s.noise_sd = 0.1;
    s.mechanism.missing_cols = {3, 4};
    s.mechanism.predictor_sets = {{0, 1}, {1, 2}};
    s.mechanism.alpha = 3.0;
    s.mechanism.target_missing_rate = 0.3;
    s.seed = seed;
    return s;
}

namespace {

// Linear map g(x) = intercept + slope * x[predictor] fit by least squares on
// the observed rows of `column` in a pilot sample.
ImputationMap pilot_linear_map(const SyntheticSpec& spec, Index column, Index predictor) {
    SyntheticSpec pilot = spec;
    pilot.seed = spec.seed + 100;
    const SyntheticSample s = generate_sample(pilot);
    const RowPartition part = partition_by_column(s.masked, column);
    const Matrix x = select_rows(Matrix(s.data.values.col(predictor)), part.observed);
    const Vector y = select_rows(Vector(s.data.values.col(column)), part.observed);
    const RidgeModel fit = fit_weighted_ridge(x, y, Vector::Ones(y.size()), 0.0);
    const double slope = fit.coefficients[0];
    const double intercept = fit.intercept;
    return [=](Index c, const Eigen::RowVectorXd& values, const Eigen::Array<bool, 1, Eigen::Dynamic>& obs) {
        if (obs[c]) return values[c];
        return intercept + slope * values[predictor];
    };
}

CheckOutcome outcome(std::string name, double value, double threshold, bool below) {
    CheckOutcome o;
    o.name = std::move(name);
    o.value = value;
    o.threshold = threshold;
    o.comparison = below ? "<" : ">";
    o.passed = below ? value < threshold : value > threshold;
    return o;
}

}  // namespace

std::vector<CheckOutcome> run_identity_suite() {
    std::vector<CheckOutcome> out;

    const SyntheticSpec dspec = decomposition_spec();
    SyntheticSpec dpilot = dspec;
    dpilot.seed = dspec.seed + 100;
    const ImputationMap mean_map = mean_imputation_map(generate_sample(dpilot).masked);
    out.push_back(outcome("risk_decomposition_relative_gap", check_risk_decomposition(dspec, mean_map).relative_gap(),
                          0.02, true));

    const SyntheticSpec wspec = weighting_spec();
    const ImputationMap linear = pilot_linear_map(wspec, 2, 1);
    out.push_back(outcome("weighting_identity_relative_gap",
                          check_weighting_identity(wspec, linear, 2, true).relative_gap(), 0.03, true));
    out.push_back(outcome("weighting_identity_ablated_relative_gap",
                          check_weighting_identity(wspec, linear, 2, false).relative_gap(), 0.10, false));

    out.push_back(outcome("linear_ignores_indicators_max_abs_coef",
                          check_linear_ignores_indicators(indicator_spec(), 3), 0.02, true));
    return out;
}

}  // namespace wimpute
