#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "wimpute/data.hpp"

namespace wimpute {

enum class RegressorKind { ridge, forest, mlp };

std::string to_string(RegressorKind kind);
RegressorKind regressor_kind_from_string(const std::string& name);

struct ForestSpec {
    int n_trees = 100;
    int max_depth = 8;
    double min_leaf_weight = 5.0;  ///< weight mass, not a row count
    double feature_subsample = 1.0 / 3.0;
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

struct MlpSpec {
    int hidden_units = 32;
    double learning_rate = 0.01;
    int epochs = 60;
    int batch_size = 64;
    std::uint64_t seed = 0;
};

struct RegressorSpec {
    RegressorKind kind = RegressorKind::ridge;
    double ridge_lambda = 1e-6;
    ForestSpec forest;
    MlpSpec mlp;

    void validate() const;
};

struct RidgeModel {
    Vector coefficients;
    double intercept = 0.0;
    double lambda = 0.0;
};

struct TreeNode {
    int feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    double weight = 0.0;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

/// Nodes in depth-first order, root at index 0; x[feature] <= threshold goes left.
struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    int depth() const;
};

struct ForestModel {
    std::vector<RegressionTree> trees;
    Index n_features = 0;
};

/// One tanh hidden layer, linear output.
struct MlpModel {
    Matrix hidden_weights;  ///< hidden_units x p
    Vector hidden_bias;
    Vector output_weights;  ///< hidden_units
    double output_bias = 0.0;
    std::vector<double> loss_trace;  ///< weighted training loss after each epoch

    Index input_width() const { return hidden_weights.cols(); }
};

struct FittedRegressor {
    std::variant<RidgeModel, ForestModel, MlpModel> model;

    RegressorKind kind() const;
    Index input_width() const;
};

/// Minimizes sum w (y - b0 - x'b)^2 + lambda |b|^2; the intercept is not
/// penalized. Throws when the system is singular (lambda = 0, rank deficient).
RidgeModel fit_weighted_ridge(const Matrix& x, const Vector& y, const Vector& w, double lambda);

/// Max-norm residual of the weighted normal equations for the design [1, X]
/// with penalty diag(0, lambda, ..., lambda).
double ridge_normal_equation_residual(const RidgeModel& model, const Matrix& x, const Vector& y, const Vector& w);

/// CART ensemble. With bootstrap on, each tree sees a resample drawn with
/// probability proportional to w and counts multiplicities as weights;
/// without it each tree uses w directly. Tree t is seeded with seed + t.
ForestModel fit_weighted_forest(const Matrix& x, const Vector& y, const Vector& w, const ForestSpec& spec);

/// Single tree grown on explicit per-row weights (no resampling).
RegressionTree fit_weighted_tree(const Matrix& x, const Vector& y, const Vector& w, const ForestSpec& spec,
                                 std::uint64_t seed);

/// Mini-batch SGD on the normalized weighted squared loss. Rows with zero
/// weight are removed before batching. Throws if the loss exceeds 1e10.
MlpModel fit_weighted_mlp(const Matrix& x, const Vector& y, const Vector& w, const MlpSpec& spec);

struct MlpLossGradient {
    double loss = 0.0;
    Vector gradient;  ///< layout of mlp_flatten
};

/// sum w (g(x) - y)^2 / sum w and its gradient with respect to all parameters.
MlpLossGradient mlp_loss_gradient(const MlpModel& model, const Matrix& x, const Vector& y, const Vector& w);
Vector mlp_flatten(const MlpModel& model);
MlpModel mlp_unflatten(const Vector& params, Index input_width, Index hidden_units);

FittedRegressor fit_regressor(const RegressorSpec& spec, const Matrix& x, const Vector& y, const Vector& w);

Vector predict(const RidgeModel& model, const Matrix& x);
Vector predict(const ForestModel& model, const Matrix& x);
Vector predict(const MlpModel& model, const Matrix& x);
Vector predict(const FittedRegressor& model, const Matrix& x);

/// sum w (yhat - y)^2 / sum w
double weighted_mse(const Vector& prediction, const Vector& y, const Vector& w);
double weighted_mse(const FittedRegressor& model, const Matrix& x, const Vector& y, const Vector& w);

}  // namespace wimpute
