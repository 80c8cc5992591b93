#include "wimpute/json_io.hpp"

#include <stdexcept>
#include <string>

namespace wimpute {

void require_known_keys(const json& j, std::initializer_list<const char*> allowed, const char* context) {
    if (!j.is_object()) throw std::invalid_argument(std::string(context) + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw std::invalid_argument(std::string(context) + ": unknown key '" + key + "'");
    }
}

json to_json(const RegressorSpec& spec) {
    json j;
    j["kind"] = to_string(spec.kind);
    j["ridge_lambda"] = spec.ridge_lambda;
    j["forest"] = {{"n_trees", spec.forest.n_trees},
                   {"max_depth", spec.forest.max_depth},
                   {"min_leaf_weight", spec.forest.min_leaf_weight},
                   {"feature_subsample", spec.forest.feature_subsample},
                   {"bootstrap", spec.forest.bootstrap}};
    j["mlp"] = {{"hidden_units", spec.mlp.hidden_units},
                {"learning_rate", spec.mlp.learning_rate},
                {"epochs", spec.mlp.epochs},
                {"batch_size", spec.mlp.batch_size}};
    return j;
}

RegressorSpec regressor_spec_from_json(const json& j) {
    require_known_keys(j, {"kind", "ridge_lambda", "forest", "mlp"}, "regressor");
    RegressorSpec s;
    if (j.contains("kind")) s.kind = regressor_kind_from_string(j.at("kind").get<std::string>());
    s.ridge_lambda = j.value("ridge_lambda", s.ridge_lambda);
    if (j.contains("forest")) {
        const json& f = j.at("forest");
        require_known_keys(f, {"n_trees", "max_depth", "min_leaf_weight", "feature_subsample", "bootstrap"},
                           "regressor.forest");
        s.forest.n_trees = f.value("n_trees", s.forest.n_trees);
        s.forest.max_depth = f.value("max_depth", s.forest.max_depth);
        s.forest.min_leaf_weight = f.value("min_leaf_weight", s.forest.min_leaf_weight);
        s.forest.feature_subsample = f.value("feature_subsample", s.forest.feature_subsample);
        s.forest.bootstrap = f.value("bootstrap", s.forest.bootstrap);
    }
    if (j.contains("mlp")) {
        const json& m = j.at("mlp");
        require_known_keys(m, {"hidden_units", "learning_rate", "epochs", "batch_size"}, "regressor.mlp");
        s.mlp.hidden_units = m.value("hidden_units", s.mlp.hidden_units);
        s.mlp.learning_rate = m.value("learning_rate", s.mlp.learning_rate);
        s.mlp.epochs = m.value("epochs", s.mlp.epochs);
        s.mlp.batch_size = m.value("batch_size", s.mlp.batch_size);
    }
    s.validate();
    return s;
}

json to_json(const ImputationConfig& cfg) {
    json j;
    j["regressor"] = to_json(cfg.regressor);
    j["weighted"] = cfg.weighted;
    j["gamma"] = cfg.gamma;
    if (cfg.visitation == VisitationPolicy::explicit_order) {
        j["visitation"] = cfg.order;
    } else {
        j["visitation"] = "ascending_missing_count";
    }
    j["clip_epsilon"] = cfg.clip_epsilon;
    j["propensity_l2"] = cfg.propensity_l2;
    j["seed"] = cfg.seed;
    return j;
}

ImputationConfig imputation_config_from_json(const json& j) {
    require_known_keys(j, {"regressor", "weighted", "gamma", "visitation", "clip_epsilon", "propensity_l2", "seed"},
                       "config");
    ImputationConfig c;
    if (j.contains("regressor")) c.regressor = regressor_spec_from_json(j.at("regressor"));
    c.weighted = j.value("weighted", c.weighted);
    c.gamma = j.value("gamma", c.gamma);
    if (j.contains("visitation")) {
        const json& v = j.at("visitation");
        if (v.is_string()) {
            if (v.get<std::string>() != "ascending_missing_count") {
                throw std::invalid_argument("config.visitation: expected 'ascending_missing_count' or a column list");
            }
            c.visitation = VisitationPolicy::ascending_missing_count;
        } else {
            c.visitation = VisitationPolicy::explicit_order;
            c.order = v.get<std::vector<Index>>();
        }
    }
    c.clip_epsilon = j.value("clip_epsilon", c.clip_epsilon);
    c.propensity_l2 = j.value("propensity_l2", c.propensity_l2);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

json to_json(const MarSpec& spec) {
    return {{"missing_cols", spec.missing_cols},
            {"predictor_sets", spec.predictor_sets},
            {"alpha", spec.alpha},
            {"target_missing_rate", spec.target_missing_rate},
            {"seed", spec.seed}};
}

MarSpec mar_spec_from_json(const json& j) {
    require_known_keys(j, {"missing_cols", "predictor_sets", "alpha", "target_missing_rate", "seed"}, "mechanism");
    MarSpec s;
    s.missing_cols = j.at("missing_cols").get<std::vector<Index>>();
    s.predictor_sets = j.at("predictor_sets").get<std::vector<std::vector<Index>>>();
    s.alpha = j.value("alpha", s.alpha);
    s.target_missing_rate = j.value("target_missing_rate", s.target_missing_rate);
    s.seed = j.value("seed", s.seed);
    return s;
}

json to_json(const CalibratedMechanism& mech) {
    json rates = json::array();
    for (std::size_t k = 0; k < mech.intercepts.size(); ++k) rates.push_back(mech.expected_missing_rate(k));
    return {{"spec", to_json(mech.spec)}, {"intercepts", mech.intercepts}, {"expected_missing_rates", rates}};
}

json to_json(const MetricsReport& report) {
    return {{"rmse", report.rmse},
            {"wasserstein", report.wasserstein},
            {"per_column_wasserstein", report.per_column_wasserstein},
            {"masked_cell_count", report.masked_cell_count}};
}

json to_json(const WilcoxonResult& r) {
    return {{"statistic", r.statistic}, {"w_minus", r.w_minus},   {"z_score", r.z_score},
            {"p_value", r.p_value},     {"n_pairs", r.n_pairs}, {"n_zero_diffs", r.n_zero_diffs}};
}

json to_json(const std::vector<IterationDiagnostics>& per_sweep) {
    json out = json::array();
    for (const auto& it : per_sweep) {
        json cols = json::array();
        for (const auto& c : it.columns) {
            cols.push_back({{"column", c.column},
                            {"weighted_train_mse", c.weighted_train_mse},
                            {"mean_abs_update", c.mean_abs_update},
                            {"effective_sample_size", c.effective_sample_size},
                            {"propensity_converged", c.propensity_converged},
                            {"weight_histogram",
                             {{"lo", c.weight_histogram.lo}, {"hi", c.weight_histogram.hi}, {"counts", c.weight_histogram.counts}}}});
            if (c.propensity) {
                cols.back()["propensity"] = {{"intercept", c.propensity->intercept},
                                             {"coefficients", std::vector<double>(c.propensity->coefficients.begin(), c.propensity->coefficients.end())},
                                             {"iterations", c.propensity->iterations},
                                             {"max_abs_gradient", c.propensity->max_abs_gradient}};
            } else {
                cols.back()["propensity"] = nullptr;
            }
        }
        out.push_back({{"sweep", it.sweep}, {"columns", cols}});
    }
    return out;
}

}  // namespace wimpute
