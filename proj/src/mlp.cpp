#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "wimpute/regressors.hpp"

namespace wimpute {

namespace {

constexpr double kDivergenceLoss = 1e10;

MlpModel init_mlp(Index p, int hidden, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double a1 = std::sqrt(6.0 / static_cast<double>(p + hidden));
    const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
    std::uniform_real_distribution<double> u1(-a1, a1);
    std::uniform_real_distribution<double> u2(-a2, a2);
    MlpModel m;
    m.hidden_weights.resize(hidden, p);
    for (Index r = 0; r < hidden; ++r) {
        for (Index c = 0; c < p; ++c) m.hidden_weights(r, c) = u1(rng);
    }
    m.hidden_bias = Vector::Zero(hidden);
    m.output_weights.resize(hidden);
    for (Index r = 0; r < hidden; ++r) m.output_weights[r] = u2(rng);
    m.output_bias = 0.0;
    return m;
}

struct Gradient {
    Matrix hidden_weights;
    Vector hidden_bias;
    Vector output_weights;
    double output_bias = 0.0;
};

// Loss and gradient over the rows in `rows` (all rows when empty).
double loss_and_gradient(const MlpModel& m, const Matrix& x, const Vector& y, const Vector& w,
                         const std::vector<Index>& rows, Gradient* grad) {
    const Index hidden = m.hidden_weights.rows();
    if (grad) {
        grad->hidden_weights = Matrix::Zero(hidden, m.hidden_weights.cols());
        grad->hidden_bias = Vector::Zero(hidden);
        grad->output_weights = Vector::Zero(hidden);
        grad->output_bias = 0.0;
    }
    const std::size_t count = rows.empty() ? static_cast<std::size_t>(x.rows()) : rows.size();
    double total_w = 0.0;
    for (std::size_t t = 0; t < count; ++t) total_w += w[rows.empty() ? static_cast<Index>(t) : rows[t]];
    if (!(total_w > 0.0)) return 0.0;

    double loss = 0.0;
    Vector h(hidden);
    for (std::size_t t = 0; t < count; ++t) {
        const Index k = rows.empty() ? static_cast<Index>(t) : rows[t];
        h = (m.hidden_weights * x.row(k).transpose() + m.hidden_bias).array().tanh();
        const double out = m.output_weights.dot(h) + m.output_bias;
        const double r = out - y[k];
        loss += w[k] * r * r;
        if (grad) {
            const double dout = 2.0 * w[k] * r / total_w;
            grad->output_weights += dout * h;
            grad->output_bias += dout;
            const Vector dpre = (dout * m.output_weights.array() * (1.0 - h.array().square())).matrix();
            grad->hidden_weights.noalias() += dpre * x.row(k);
            grad->hidden_bias += dpre;
        }
    }
    return loss / total_w;
}

}  // namespace

Vector mlp_flatten(const MlpModel& m) {
    const Index h = m.hidden_weights.rows();
    const Index p = m.hidden_weights.cols();
    Vector v(h * p + 2 * h + 1);
    v.head(h * p) = Eigen::Map<const Vector>(m.hidden_weights.data(), h * p);
    v.segment(h * p, h) = m.hidden_bias;
    v.segment(h * p + h, h) = m.output_weights;
    v[h * p + 2 * h] = m.output_bias;
    return v;
}

MlpModel mlp_unflatten(const Vector& params, Index input_width, Index hidden_units) {
    const Index h = hidden_units;
    const Index p = input_width;
    if (params.size() != h * p + 2 * h + 1) throw std::invalid_argument("mlp_unflatten: parameter count mismatch");
    MlpModel m;
    m.hidden_weights = Eigen::Map<const Matrix>(params.data(), h, p);
    m.hidden_bias = params.segment(h * p, h);
    m.output_weights = params.segment(h * p + h, h);
    m.output_bias = params[h * p + 2 * h];
    return m;
}

MlpLossGradient mlp_loss_gradient(const MlpModel& model, const Matrix& x, const Vector& y, const Vector& w) {
    Gradient g;
    MlpLossGradient out;
    out.loss = loss_and_gradient(model, x, y, w, {}, &g);
    MlpModel as_model;
    as_model.hidden_weights = std::move(g.hidden_weights);
    as_model.hidden_bias = std::move(g.hidden_bias);
    as_model.output_weights = std::move(g.output_weights);
    as_model.output_bias = g.output_bias;
    out.gradient = mlp_flatten(as_model);
    return out;
}

MlpModel fit_weighted_mlp(const Matrix& x, const Vector& y, const Vector& w, const MlpSpec& spec) {
    RegressorSpec{RegressorKind::mlp, 0.0, {}, spec}.validate();
    if (x.rows() != y.size() || y.size() != w.size()) throw std::invalid_argument("fit_weighted_mlp: size mismatch");
    if ((w.array() < 0.0).any() || !w.allFinite() || !(w.sum() > 0.0)) {
        throw std::invalid_argument("fit_weighted_mlp: weights must be nonnegative with a positive sum");
    }
    RowIndices keep;
    for (Index k = 0; k < w.size(); ++k) {
        if (w[k] > 0.0) keep.push_back(k);
    }
    const Matrix xs = select_rows(x, keep);
    const Vector ys = select_rows(y, keep);
    const Vector ws = select_rows(w, keep);

    MlpModel m = init_mlp(x.cols(), spec.hidden_units, spec.seed);
    std::mt19937_64 rng(spec.seed + 1);
    std::vector<Index> order(keep.size());
    std::iota(order.begin(), order.end(), Index{0});
    const std::size_t batch = static_cast<std::size_t>(spec.batch_size);
    Gradient g;
    std::vector<Index> rows;
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                        order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + batch)));
            loss_and_gradient(m, xs, ys, ws, rows, &g);
            m.hidden_weights -= spec.learning_rate * g.hidden_weights;
            m.hidden_bias -= spec.learning_rate * g.hidden_bias;
            m.output_weights -= spec.learning_rate * g.output_weights;
            m.output_bias -= spec.learning_rate * g.output_bias;
        }
        const double loss = loss_and_gradient(m, xs, ys, ws, {}, nullptr);
        if (!std::isfinite(loss) || loss > kDivergenceLoss) {
            throw std::runtime_error("fit_weighted_mlp: training diverged at epoch " + std::to_string(epoch) +
                                     " (loss " + std::to_string(loss) + "); lower the learning rate");
        }
        m.loss_trace.push_back(loss);
    }
    return m;
}

Vector predict(const MlpModel& model, const Matrix& x) {
    if (x.cols() != model.input_width()) throw std::invalid_argument("predict: width mismatch");
    const Matrix pre = (model.hidden_weights * x.transpose()).colwise() + model.hidden_bias;
    return (pre.array().tanh().matrix().transpose() * model.output_weights).array() + model.output_bias;
}

}  // namespace wimpute
