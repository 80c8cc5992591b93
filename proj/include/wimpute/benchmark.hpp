#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wimpute/engine.hpp"
#include "wimpute/json_io.hpp"
#include "wimpute/synthetic.hpp"

namespace wimpute {

/// A user CSV (complete, with header) or the built-in synthetic table.
struct DatasetSource {
    std::optional<std::filesystem::path> csv;
    SyntheticDatasetSpec synthetic;
};

DataMatrix load_dataset(const DatasetSource& source);

/// One model of the paired design. The grid runs it twice per cell, with
/// `weighted` forced to true and false; everything else is shared.
struct ModelConfig {
    std::string label;
    ImputationConfig config;
};

struct ExperimentGrid {
    DatasetSource dataset;
    std::vector<std::uint64_t> seeds;
    std::vector<double> alphas;
    double missing_rate = 0.3;
    int n_missing_cols = 4;
    int n_predictors = 4;
    std::vector<ModelConfig> models;
    std::uint64_t base_seed = 0;

    /// 35 seeds, alpha in -3..3, 30% missingness, ridge pair, synthetic data.
    static ExperimentGrid defaults();
    void validate() const;
};

json to_json(const ExperimentGrid& grid);
/// Missing keys take the defaults() values.
ExperimentGrid experiment_grid_from_json(const json& j);
ExperimentGrid load_experiment_grid(const std::filesystem::path& path);

struct RunRecord {
    std::uint64_t seed = 0;
    double alpha = 0.0;
    std::string model;
    bool weighted = false;
    double rmse = 0.0;
    double wasserstein = 0.0;
    double wall_time_ms = 0.0;
};

struct RunFailure {
    std::uint64_t seed = 0;
    double alpha = 0.0;
    std::string model;
    bool weighted = false;
    std::string message;
};

struct BenchmarkResult {
    std::vector<RunRecord> records;  ///< (seed, alpha, model, weighted first) order
    std::vector<RunFailure> failures;
};

struct BenchmarkOptions {
    int jobs = 1;
    bool timing = false;  ///< record wall_time_ms; otherwise 0 so output is reproducible
};

/// Derived per-cell seeds. The random spec depends on the seed only, the
/// mask on (seed, alpha bits), the model seed on (seed, alpha bits, model index + 1).
std::uint64_t cell_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

BenchmarkResult run_benchmark(const ExperimentGrid& grid, const DataMatrix& data, const BenchmarkOptions& opts = {});
BenchmarkResult run_benchmark(const ExperimentGrid& grid, const BenchmarkOptions& opts = {});

/// seed,alpha,model,weighted,rmse,wasserstein,wall_time_ms
std::string format_results_csv(const std::vector<RunRecord>& records);

struct PairedCell {
    std::uint64_t seed = 0;
    double alpha = 0.0;
    std::string model;
    RunRecord weighted;
    RunRecord unweighted;

    double rmse_ratio() const { return weighted.rmse / unweighted.rmse; }
    double wasserstein_ratio() const { return weighted.wasserstein / unweighted.wasserstein; }
};

/// Cells where both twins succeeded, in record order.
std::vector<PairedCell> pair_records(const std::vector<RunRecord>& records);

struct AlphaRatio {
    double alpha = 0.0;
    double mean_rmse_ratio = 0.0;
    double mean_wasserstein_ratio = 0.0;
    int n_cells = 0;
};

/// Per-alpha mean over seeds of the weighted/unweighted ratios for one
/// model (all models when `model` is empty), ordered by alpha.
std::vector<AlphaRatio> summarize_alpha_profile(const std::vector<RunRecord>& records, const std::string& model = "");

struct ModelSummary {
    std::string model;
    int n_pairs = 0;
    double mean_rmse_weighted = 0.0;
    double mean_rmse_unweighted = 0.0;
    double mean_wasserstein_weighted = 0.0;
    double mean_wasserstein_unweighted = 0.0;
    double mean_rmse_ratio = 0.0;
    double mean_wasserstein_ratio = 0.0;
    std::optional<WilcoxonResult> rmse_test;  ///< absent with fewer than 10 informative pairs
    std::optional<WilcoxonResult> wasserstein_test;
};

std::vector<ModelSummary> summarize_models(const std::vector<RunRecord>& records);

/// Means, ratios, tests, alpha profile, raw per-cell values, failures and
/// the grid echo.
json summary_json(const ExperimentGrid& grid, const BenchmarkResult& result);

enum class SweepKind { rows, features, rate };
std::string to_string(SweepKind kind);
SweepKind sweep_kind_from_string(const std::string& name);

struct SweepPoint {
    SweepKind kind = SweepKind::rate;
    double value = 0.0;
    std::uint64_t seed = 0;
    double alpha = 0.0;
    std::string model;
    double rmse_weighted = 0.0;
    double rmse_unweighted = 0.0;
    double rmse_ratio = 0.0;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::vector<std::string> warnings;  ///< skipped values
    std::vector<RunFailure> failures;
};

/// For each value: rows subsamples rows before masking (values >= n use the
/// data unchanged), features keeps the first `value` columns, rate sets the
/// target missing rate. Each (value, seed, alpha, model) emits one ratio.
SweepResult sensitivity_sweep(SweepKind kind, const std::vector<double>& values, const ExperimentGrid& grid,
                              const DataMatrix& data, const BenchmarkOptions& opts = {});

/// kind,value,seed,alpha,model,rmse_weighted,rmse_unweighted,rmse_ratio
std::string format_sweep_csv(const std::vector<SweepPoint>& points);

}  // namespace wimpute
