#include <doctest.h>

#include <bit>
#include <fstream>
#include <set>
#include <sstream>

#include "wimpute/benchmark.hpp"

using namespace wimpute;

namespace {

ExperimentGrid small_grid() {
    ExperimentGrid g = ExperimentGrid::defaults();
    g.dataset.synthetic.n = 400;
    g.seeds = {0, 1, 2};
    g.alphas = {-2, 0, 2};
    return g;
}

std::size_t count_lines(const std::string& s) {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("default grid matches the paired design") {
    const ExperimentGrid g = ExperimentGrid::defaults();
    CHECK(g.seeds.size() == 35);
    CHECK(g.alphas == std::vector<double>{-3, -2, -1, 0, 1, 2, 3});
    CHECK(g.missing_rate == 0.3);
    CHECK(g.models.size() == 1);
    CHECK(g.models[0].config.regressor.kind == RegressorKind::ridge);
    CHECK(g.dataset.synthetic.n == 5000);
    CHECK(g.dataset.synthetic.d == 10);
}

TEST_CASE("one seed, alpha 0, ridge pair gives two records sharing the mask") {
    ExperimentGrid g = small_grid();
    g.seeds = {4};
    g.alphas = {0.0};
    const BenchmarkResult r = run_benchmark(g);
    REQUIRE(r.records.size() == 2);
    CHECK(r.failures.empty());
    CHECK(r.records[0].weighted);
    CHECK_FALSE(r.records[1].weighted);
    CHECK(r.records[0].seed == r.records[1].seed);
    CHECK(r.records[0].wall_time_ms == 0.0);
    CHECK(pair_records(r.records).size() == 1);
}

TEST_CASE("pairing integrity: both twins see bit-identical masked input") {
    // Forcing unit weights on the weighted twin must reproduce the unweighted
    // twin exactly, which only happens when the masked inputs coincide.
    ExperimentGrid g = small_grid();
    g.seeds = {3};
    g.alphas = {2.0};
    const DataMatrix data = load_dataset(g.dataset);
    const BenchmarkResult r = run_benchmark(g, data);
    REQUIRE(r.records.size() == 2);
    MarSpec spec = select_random_spec(data.cols(), g.n_missing_cols, g.n_predictors, cell_seed(g.base_seed, 3));
    spec.alpha = 2.0;
    spec.target_missing_rate = g.missing_rate;
    spec.seed = cell_seed(g.base_seed, 3, std::bit_cast<std::uint64_t>(2.0));
    const MaskSimulation sim = apply_mar_mask(data, spec);
    ImputationConfig cfg = g.models[0].config;
    cfg.weighted = false;
    cfg.seed = cell_seed(g.base_seed, 3, std::bit_cast<std::uint64_t>(2.0), 1);
    const MetricsReport rep = evaluate_imputation(data.values, impute(sim.dataset, cfg).completed, sim.dataset.mask());
    CHECK(rep.rmse == r.records[1].rmse);
}

TEST_CASE("record count and CSV schema") {
    ExperimentGrid g = small_grid();
    ModelConfig forest;
    forest.label = "forest";
    forest.config.regressor.kind = RegressorKind::forest;
    forest.config.regressor.forest.n_trees = 5;
    forest.config.gamma = 2;
    g.models.push_back(forest);
    const BenchmarkResult r = run_benchmark(g);
    CHECK(r.records.size() + r.failures.size() == 3 * 3 * 2 * 2);
    const std::string csv = format_results_csv(r.records);
    CHECK(csv.rfind("seed,alpha,model,weighted,rmse,wasserstein,wall_time_ms\n", 0) == 0);
    CHECK(count_lines(csv) == r.records.size() + 1);
    // merged in (seed, alpha, model, weighted first) order
    for (std::size_t k = 1; k < r.records.size(); ++k) {
        const auto& a = r.records[k - 1];
        const auto& b = r.records[k];
        const bool ordered = a.seed < b.seed || (a.seed == b.seed && a.alpha <= b.alpha);
        CHECK(ordered);
    }
}

TEST_CASE("results are byte-identical across job counts") {
    const ExperimentGrid g = small_grid();
    BenchmarkOptions one, four;
    four.jobs = 4;
    const std::string a = format_results_csv(run_benchmark(g, one).records);
    const std::string b = format_results_csv(run_benchmark(g, four).records);
    CHECK(a == b);
    CHECK(a == format_results_csv(run_benchmark(g, one).records));
}

TEST_CASE("failures are recorded and the grid continues") {
    ExperimentGrid g = small_grid();
    g.dataset.synthetic.n = 6;  // too few rows for 30% masks of 4 columns to stay valid everywhere
    g.seeds = {0, 1, 2, 3, 4, 5, 6, 7};
    g.alphas = {3.0};
    const BenchmarkResult r = run_benchmark(g);
    CHECK(r.records.size() + r.failures.size() == 16);
    for (const auto& f : r.failures) CHECK_FALSE(f.message.empty());
}

TEST_CASE("alpha profile") {
    std::vector<RunRecord> recs;
    auto add = [&](std::uint64_t seed, double alpha, double rw, double ru) {
        recs.push_back({seed, alpha, "ridge", true, rw, 2 * rw, 0});
        recs.push_back({seed, alpha, "ridge", false, ru, 2 * ru, 0});
    };
    add(0, 1.0, 0.9, 1.0);
    add(0, -1.0, 0.5, 1.0);
    add(1, 1.0, 0.7, 1.0);
    const auto prof = summarize_alpha_profile(recs);
    REQUIRE(prof.size() == 2);
    CHECK(prof[0].alpha == -1.0);
    CHECK(prof[0].mean_rmse_ratio == doctest::Approx(0.5));
    CHECK(prof[0].n_cells == 1);
    CHECK(prof[1].mean_rmse_ratio == doctest::Approx(0.8));
    CHECK(prof[1].mean_wasserstein_ratio == doctest::Approx(0.8));
    CHECK(summarize_alpha_profile(recs, "forest").empty());
}

TEST_CASE("summary JSON carries means, tests, profile and raw cells") {
    ExperimentGrid g = small_grid();
    g.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    g.alphas = {0.0, 3.0};
    const BenchmarkResult r = run_benchmark(g);
    const json s = summary_json(g, r);
    CHECK(s["n_records"] == 44);
    CHECK(s["models"].size() == 1);
    CHECK(s["models"][0]["n_pairs"] == 22);
    CHECK(s["models"][0]["wilcoxon_rmse"].is_object());
    CHECK(s["alpha_profile"]["ridge"].size() == 2);
    CHECK(s["cells"].size() == 22);
    CHECK(s["grid"]["seeds"].size() == 11);

    g.seeds = {0};
    const json t = summary_json(g, run_benchmark(g));
    CHECK(t["models"][0]["wilcoxon_rmse"].is_null());
}

TEST_CASE("grid JSON round trip and validation") {
    ExperimentGrid g = small_grid();
    g.base_seed = 42;
    const ExperimentGrid back = experiment_grid_from_json(to_json(g));
    CHECK(back.seeds == g.seeds);
    CHECK(back.alphas == g.alphas);
    CHECK(back.base_seed == 42);
    CHECK(back.dataset.synthetic.n == 400);
    CHECK(to_json(back) == to_json(g));

    const ExperimentGrid counted = experiment_grid_from_json(json::parse(R"({"seeds": 5, "alphas": [0]})"));
    CHECK(counted.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});

    CHECK_THROWS_AS(experiment_grid_from_json(json::parse(R"({"seedz": 5})")), std::invalid_argument);
    CHECK_THROWS(experiment_grid_from_json(json::parse(R"({"missing_rate": 1.5})")));
    CHECK_THROWS(experiment_grid_from_json(json::parse(R"({"models": [{"config": {"weighted": true}}]})")));
    CHECK_THROWS(experiment_grid_from_json(
        json::parse(R"({"models": [{"label": "a"}, {"label": "a"}]})")));
    const ExperimentGrid m = experiment_grid_from_json(
        json::parse(R"({"models": [{"config": {"regressor": {"kind": "mlp", "mlp": {"epochs": 3}}, "gamma": 2}}]})"));
    CHECK(m.models[0].label == "mlp");
    CHECK(m.models[0].config.regressor.mlp.epochs == 3);
}

TEST_CASE("CSV dataset source resolves relative to the grid file") {
    const auto dir = std::filesystem::temp_directory_path() / "wimpute_grid_test";
    std::filesystem::create_directories(dir);
    SyntheticDatasetSpec spec;
    spec.n = 300;
    const DataMatrix d = generate_synthetic(spec);
    save_csv(dir / "data.csv", d.values, d.column_names);
    std::ofstream(dir / "grid.json") << R"({"dataset": {"csv": "data.csv"}, "seeds": 1, "alphas": [1]})";
    const ExperimentGrid g = load_experiment_grid(dir / "grid.json");
    const DataMatrix loaded = load_dataset(g.dataset);
    CHECK(loaded.rows() == 300);
    CHECK(run_benchmark(g).records.size() == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("sensitivity sweeps") {
    ExperimentGrid g = small_grid();
    g.seeds = {0};
    g.alphas = {3.0};
    const DataMatrix data = load_dataset(g.dataset);

    SUBCASE("rate sweep gives one ratio per value") {
        const SweepResult r = sensitivity_sweep(SweepKind::rate, {0.1, 0.3, 0.5}, g, data);
        CHECK(r.points.size() == 3);
        CHECK(r.warnings.empty());
    }
    SUBCASE("rows sweep at full size reproduces the main grid cell") {
        const SweepResult r = sensitivity_sweep(SweepKind::rows, {200, 400}, g, data);
        REQUIRE(r.points.size() == 2);
        const BenchmarkResult main = run_benchmark(g, data);
        CHECK(r.points[1].rmse_weighted == main.records[0].rmse);
        CHECK(r.points[1].rmse_unweighted == main.records[1].rmse);
    }
    SUBCASE("features below the feasible minimum are skipped with a warning") {
        const SweepResult r = sensitivity_sweep(SweepKind::features, {5, 8, 10}, g, data);
        CHECK(r.warnings.size() == 1);
        CHECK(r.points.size() == 2);
    }
    CHECK(sweep_kind_from_string("rows") == SweepKind::rows);
    CHECK_THROWS(sweep_kind_from_string("cols"));
}
