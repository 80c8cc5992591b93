#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "wimpute/benchmark.hpp"
#include "wimpute/json_io.hpp"
#include "wimpute/mask_sim.hpp"
#include "wimpute/metrics.hpp"
#include "wimpute/risk_checks.hpp"
#include "wimpute/synthetic.hpp"

using namespace wimpute;

namespace {

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

// "0,2,5" -> {0, 2, 5}
std::vector<Index> parse_index_list(const std::string& text) {
    std::vector<Index> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const long long v = std::stoll(item, &used);
        if (used != item.size()) throw std::invalid_argument("bad column index '" + item + "'");
        out.push_back(static_cast<Index>(v));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Covariate-shift-weighted round-robin imputation"};
    app.require_subcommand(1);

    // generate
    SyntheticDatasetSpec gen;
    std::string gen_out;
    auto* generate = app.add_subcommand("generate", "Write the synthetic benchmark table as CSV");
    generate->add_option("--rows", gen.n, "Number of rows")->capture_default_str();
    generate->add_option("--cols", gen.d, "Number of columns")->capture_default_str();
    generate->add_option("--latent", gen.latent, "Latent factors")->capture_default_str();
    generate->add_option("--nonlinearity", gen.nonlinearity, "Quadratic bend (0 = linear-Gaussian)")->capture_default_str();
    generate->add_option("--noise", gen.noise, "Noise scale")->capture_default_str();
    generate->add_option("--seed", gen.seed, "Seed")->capture_default_str();
    generate->add_option("--output", gen_out, "Output CSV")->required();

    // simulate-mask
    std::string sm_input, sm_output, sm_mech;
    MarSpec sm_spec;
    std::string sm_missing;
    std::vector<std::string> sm_predictors;
    int sm_n_missing = 4, sm_n_predictors = 4;
    auto* simulate = app.add_subcommand("simulate-mask", "Plant a calibrated logistic MAR mask");
    simulate->add_option("--input", sm_input, "Complete CSV with header")->required();
    simulate->add_option("--alpha", sm_spec.alpha, "Mechanism strength")->capture_default_str();
    simulate->add_option("--rate", sm_spec.target_missing_rate, "Target missing rate per column")->capture_default_str();
    simulate->add_option("--missing-cols", sm_missing, "Comma-separated columns to mask (random spec if omitted)");
    simulate->add_option("--predictors", sm_predictors,
                         "One comma-separated predictor set per missing column, e.g. --predictors 0,1 2,3");
    simulate->add_option("--n-missing", sm_n_missing, "Random spec: number of masked columns")->capture_default_str();
    simulate->add_option("--n-predictors", sm_n_predictors, "Random spec: predictors per column")->capture_default_str();
    simulate->add_option("--seed", sm_spec.seed, "Seed")->capture_default_str();
    simulate->add_option("--output", sm_output, "Masked CSV (empty field = missing)")->required();
    simulate->add_option("--mechanism", sm_mech, "Mechanism JSON output");

    // impute
    std::string im_input, im_config, im_output, im_diag;
    bool im_unweighted = false;
    auto* imp = app.add_subcommand("impute", "Round-robin imputation of a masked CSV");
    imp->add_option("--input", im_input, "Masked CSV")->required();
    imp->add_option("--config", im_config, "ImputationConfig JSON");
    imp->add_flag("--unweighted", im_unweighted, "Force the unweighted baseline");
    imp->add_option("--output", im_output, "Completed CSV")->required();
    imp->add_option("--diagnostics", im_diag, "Per-sweep diagnostics JSON");

    // metrics
    std::string me_truth, me_imputed, me_mask, me_out;
    auto* met = app.add_subcommand("metrics", "RMSE over masked cells and marginal W1 sum");
    met->add_option("--truth", me_truth, "Complete ground-truth CSV")->required();
    met->add_option("--imputed", me_imputed, "Completed CSV")->required();
    met->add_option("--mask", me_mask, "Masked CSV; empty fields mark the evaluated cells")->required();
    met->add_option("--output", me_out, "JSON output (stdout if omitted)");

    // verify
    std::string ve_out;
    auto* ver = app.add_subcommand("verify", "Monte-Carlo identity checks; pass/fail JSON table");
    ver->add_option("--output", ve_out, "JSON output (stdout if omitted)");

    // benchmark
    std::string be_grid, be_out, be_summary;
    BenchmarkOptions be_opts;
    auto* bench = app.add_subcommand("benchmark", "Paired weighted vs unweighted grid");
    bench->add_option("--grid", be_grid, "Grid JSON (built-in default grid if omitted)");
    bench->add_option("--out", be_out, "Results CSV")->required();
    bench->add_option("--summary", be_summary, "Summary JSON");
    bench->add_option("--jobs", be_opts.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_flag("--timing", be_opts.timing, "Record wall_time_ms (results are then not byte-reproducible)");

    // sweep
    std::string sw_grid, sw_kind, sw_out;
    std::vector<double> sw_values;
    BenchmarkOptions sw_opts;
    auto* sweep = app.add_subcommand("sweep", "Sensitivity sweep over rows, features or missing rate");
    sweep->add_option("--grid", sw_grid, "Grid JSON (built-in default grid if omitted)");
    sweep->add_option("--kind", sw_kind, "rows | features | rate")->required();
    sweep->add_option("--values", sw_values, "Sweep values")->required();
    sweep->add_option("--out", sw_out, "Sweep CSV")->required();
    sweep->add_option("--jobs", sw_opts.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) {
            const DataMatrix d = generate_synthetic(gen);
            save_csv(gen_out, d.values, d.column_names);
        } else if (*simulate) {
            const DataMatrix data = load_csv(sm_input, true);
            MarSpec spec = sm_spec;
            if (sm_missing.empty()) {
                if (!sm_predictors.empty()) throw std::invalid_argument("--predictors requires --missing-cols");
                const MarSpec random = select_random_spec(data, sm_n_missing, sm_n_predictors, sm_spec.seed);
                spec.missing_cols = random.missing_cols;
                spec.predictor_sets = random.predictor_sets;
            } else {
                spec.missing_cols = parse_index_list(sm_missing);
                for (const auto& p : sm_predictors) spec.predictor_sets.push_back(parse_index_list(p));
            }
            const MaskSimulation sim = apply_mar_mask(data, spec);
            save_masked_csv(sm_output, data.values, sim.dataset.mask(), data.column_names);
            if (!sm_mech.empty()) write_text(sm_mech, to_json(sim.mechanism).dump(2) + "\n");
        } else if (*imp) {
            const MaskedDataset ds = load_masked_csv(im_input, true);
            ImputationConfig cfg = im_config.empty() ? ImputationConfig{} : imputation_config_from_json(read_json(im_config));
            if (im_unweighted) cfg.weighted = false;
            const ImputationResult res = impute(ds, cfg);
            save_csv(im_output, res.completed, ds.data().column_names);
            if (!im_diag.empty()) {
                const json j = {{"config", to_json(res.config)}, {"per_sweep", to_json(res.per_sweep)}};
                write_text(im_diag, j.dump(2) + "\n");
            }
        } else if (*met) {
            const DataMatrix truth = load_csv(me_truth, true);
            const DataMatrix imputed = load_csv(me_imputed, true);
            const MaskedDataset masked = load_masked_csv(me_mask, true);
            if (!truth.is_complete() || !imputed.is_complete()) {
                throw std::invalid_argument("--truth and --imputed must be complete");
            }
            const MetricsReport rep = evaluate_imputation(truth.values, imputed.values, masked.mask());
            write_text(me_out, to_json(rep).dump(2) + "\n");
        } else if (*ver) {
            json table = json::array();
            bool all = true;
            for (const auto& o : run_identity_suite()) {
                table.push_back({{"check", o.name},
                                 {"value", o.value},
                                 {"threshold", o.threshold},
                                 {"comparison", o.comparison},
                                 {"passed", o.passed}});
                all = all && o.passed;
            }
            write_text(ve_out, json{{"all_passed", all}, {"checks", table}}.dump(2) + "\n");
            return all ? 0 : 1;
        } else if (*bench) {
            const ExperimentGrid grid = be_grid.empty() ? ExperimentGrid::defaults() : load_experiment_grid(be_grid);
            const BenchmarkResult res = run_benchmark(grid, be_opts);
            write_text(be_out, format_results_csv(res.records));
            if (!be_summary.empty()) write_text(be_summary, summary_json(grid, res).dump(2) + "\n");
            for (const auto& f : res.failures) {
                std::cerr << "failed: seed " << f.seed << " alpha " << f.alpha << " " << f.model
                          << (f.weighted ? " weighted: " : " unweighted: ") << f.message << "\n";
            }
            return res.failures.empty() ? 0 : 1;
        } else if (*sweep) {
            const ExperimentGrid grid = sw_grid.empty() ? ExperimentGrid::defaults() : load_experiment_grid(sw_grid);
            const SweepResult res =
                sensitivity_sweep(sweep_kind_from_string(sw_kind), sw_values, grid, load_dataset(grid.dataset), sw_opts);
            for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
            for (const auto& f : res.failures) std::cerr << "failed: seed " << f.seed << " " << f.message << "\n";
            write_text(sw_out, format_sweep_csv(res.points));
            return res.failures.empty() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
