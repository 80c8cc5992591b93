#include "wimpute/regressors.hpp"

#include <cmath>
#include <stdexcept>

namespace wimpute {

std::string to_string(RegressorKind kind) {
    switch (kind) {
        case RegressorKind::ridge: return "ridge";
        case RegressorKind::forest: return "forest";
        case RegressorKind::mlp: return "mlp";
    }
    return "unknown";
}

RegressorKind regressor_kind_from_string(const std::string& name) {
    if (name == "ridge" || name == "linear") return RegressorKind::ridge;
    if (name == "forest" || name == "rf") return RegressorKind::forest;
    if (name == "mlp") return RegressorKind::mlp;
    throw std::invalid_argument("unknown regressor kind '" + name + "'");
}

void RegressorSpec::validate() const {
    if (ridge_lambda < 0.0) throw std::invalid_argument("ridge_lambda must be nonnegative");
    if (kind == RegressorKind::forest) {
        if (forest.n_trees < 1) throw std::invalid_argument("forest.n_trees must be positive");
        if (forest.max_depth < 0) throw std::invalid_argument("forest.max_depth must be nonnegative");
        if (!(forest.min_leaf_weight > 0.0)) throw std::invalid_argument("forest.min_leaf_weight must be positive");
        if (!(forest.feature_subsample > 0.0 && forest.feature_subsample <= 1.0)) {
            throw std::invalid_argument("forest.feature_subsample must lie in (0, 1]");
        }
    }
    if (kind == RegressorKind::mlp) {
        if (mlp.hidden_units < 1) throw std::invalid_argument("mlp.hidden_units must be positive");
        if (!(mlp.learning_rate > 0.0)) throw std::invalid_argument("mlp.learning_rate must be positive");
        if (mlp.epochs < 1) throw std::invalid_argument("mlp.epochs must be positive");
        if (mlp.batch_size < 1) throw std::invalid_argument("mlp.batch_size must be positive");
    }
}

RegressorKind FittedRegressor::kind() const {
    switch (model.index()) {
        case 0: return RegressorKind::ridge;
        case 1: return RegressorKind::forest;
        default: return RegressorKind::mlp;
    }
}

Index FittedRegressor::input_width() const {
    return std::visit(
        [](const auto& m) -> Index {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, RidgeModel>) {
                return m.coefficients.size();
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                return m.n_features;
            } else {
                return m.input_width();
            }
        },
        model);
}

namespace {

void check_fit_inputs(const Matrix& x, const Vector& y, const Vector& w) {
    if (x.rows() != y.size() || y.size() != w.size()) throw std::invalid_argument("fit: row count mismatch");
    if (x.cols() < 1) throw std::invalid_argument("fit: need at least one predictor");
    if ((w.array() < 0.0).any() || !w.allFinite()) throw std::invalid_argument("fit: weights must be finite and >= 0");
    if (!(w.sum() > 0.0)) throw std::invalid_argument("fit: weights must have a positive sum");
    if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("fit: non-finite inputs");
}

}  // namespace

RidgeModel fit_weighted_ridge(const Matrix& x, const Vector& y, const Vector& w, double lambda) {
    check_fit_inputs(x, y, w);
    if (lambda < 0.0) throw std::invalid_argument("fit_weighted_ridge: lambda must be nonnegative");
    const double total = w.sum();
    const Eigen::RowVectorXd x_mean = (w.transpose() * x) / total;
    const double y_mean = w.dot(y) / total;
    const Matrix xc = x.rowwise() - x_mean;
    const Vector yc = y.array() - y_mean;
    const Matrix xw = xc.array().colwise() * w.array();

    Matrix a = xw.transpose() * xc;
    a.diagonal().array() += lambda;
    const Vector b = xw.transpose() * yc;

    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
        throw std::runtime_error("fit_weighted_ridge: weighted normal equations are singular; use lambda > 0");
    }
    RidgeModel m;
    m.lambda = lambda;
    m.coefficients = llt.solve(b);
    m.intercept = y_mean - x_mean.dot(m.coefficients);
    return m;
}

double ridge_normal_equation_residual(const RidgeModel& model, const Matrix& x, const Vector& y, const Vector& w) {
    const Index p = x.cols();
    Matrix z(x.rows(), p + 1);
    z.col(0).setOnes();
    z.rightCols(p) = x;
    const Matrix zw = z.array().colwise() * w.array();
    Matrix a = zw.transpose() * z;
    a.diagonal().tail(p).array() += model.lambda;
    Vector theta(p + 1);
    theta[0] = model.intercept;
    theta.tail(p) = model.coefficients;
    return (a * theta - zw.transpose() * y).cwiseAbs().maxCoeff();
}

FittedRegressor fit_regressor(const RegressorSpec& spec, const Matrix& x, const Vector& y, const Vector& w) {
    spec.validate();
    switch (spec.kind) {
        case RegressorKind::ridge: return {fit_weighted_ridge(x, y, w, spec.ridge_lambda)};
        case RegressorKind::forest: return {fit_weighted_forest(x, y, w, spec.forest)};
        case RegressorKind::mlp: return {fit_weighted_mlp(x, y, w, spec.mlp)};
    }
    throw std::logic_error("unreachable");
}

Vector predict(const RidgeModel& model, const Matrix& x) {
    if (x.cols() != model.coefficients.size()) throw std::invalid_argument("predict: width mismatch");
    return (x * model.coefficients).array() + model.intercept;
}

Vector predict(const FittedRegressor& model, const Matrix& x) {
    return std::visit([&](const auto& m) { return predict(m, x); }, model.model);
}

double weighted_mse(const Vector& prediction, const Vector& y, const Vector& w) {
    if (prediction.size() != y.size() || y.size() != w.size()) {
        throw std::invalid_argument("weighted_mse: length mismatch");
    }
    const double total = w.sum();
    if (!(total > 0.0)) throw std::invalid_argument("weighted_mse: weights must have a positive sum");
    return w.dot((prediction - y).array().square().matrix()) / total;
}

double weighted_mse(const FittedRegressor& model, const Matrix& x, const Vector& y, const Vector& w) {
    return weighted_mse(predict(model, x), y, w);
}

}  // namespace wimpute
