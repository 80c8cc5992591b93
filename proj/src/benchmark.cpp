#include "wimpute/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "wimpute/mask_sim.hpp"
#include "wimpute/metrics.hpp"

namespace wimpute {

DataMatrix load_dataset(const DatasetSource& source) {
    if (source.csv) {
        DataMatrix data = load_csv(*source.csv, true);
        if (!data.is_complete()) throw std::invalid_argument("benchmark dataset must be complete: " + source.csv->string());
        return data;
    }
    return generate_synthetic(source.synthetic);
}

ExperimentGrid ExperimentGrid::defaults() {
    ExperimentGrid g;
    for (std::uint64_t s = 0; s < 35; ++s) g.seeds.push_back(s);
    for (int a = -3; a <= 3; ++a) g.alphas.push_back(a);
    ModelConfig ridge;
    ridge.label = "ridge";
    ridge.config.regressor.kind = RegressorKind::ridge;
    g.models.push_back(ridge);
    return g;
}

void ExperimentGrid::validate() const {
    if (seeds.empty()) throw std::invalid_argument("grid: seeds must not be empty");
    if (alphas.empty()) throw std::invalid_argument("grid: alphas must not be empty");
    if (models.empty()) throw std::invalid_argument("grid: models must not be empty");
    if (!(missing_rate > 0.01 && missing_rate < 0.99)) throw std::invalid_argument("grid: missing_rate must be in (0.01, 0.99)");
    if (n_missing_cols < 1 || n_predictors < 1) throw std::invalid_argument("grid: n_missing_cols and n_predictors must be >= 1");
    for (double a : alphas) {
        if (!std::isfinite(a)) throw std::invalid_argument("grid: alphas must be finite");
    }
    std::vector<std::string> labels;
    for (const auto& m : models) {
        m.config.validate();
        if (m.label.empty()) throw std::invalid_argument("grid: model label must not be empty");
        if (std::find(labels.begin(), labels.end(), m.label) != labels.end()) {
            throw std::invalid_argument("grid: duplicate model label '" + m.label + "'");
        }
        labels.push_back(m.label);
    }
}

json to_json(const ExperimentGrid& g) {
    json j;
    if (g.dataset.csv) {
        j["dataset"] = {{"csv", g.dataset.csv->string()}};
    } else {
        const auto& s = g.dataset.synthetic;
        j["dataset"] = {{"synthetic",
                         {{"n", s.n}, {"d", s.d}, {"latent", s.latent}, {"nonlinearity", s.nonlinearity},
                          {"noise", s.noise}, {"seed", s.seed}}}};
    }
    j["seeds"] = g.seeds;
    j["alphas"] = g.alphas;
    j["missing_rate"] = g.missing_rate;
    j["n_missing_cols"] = g.n_missing_cols;
    j["n_predictors"] = g.n_predictors;
    j["base_seed"] = g.base_seed;
    json models = json::array();
    for (const auto& m : g.models) {
        json c = to_json(m.config);
        c.erase("weighted");
        models.push_back({{"label", m.label}, {"config", c}});
    }
    j["models"] = models;
    return j;
}

ExperimentGrid experiment_grid_from_json(const json& j) {
    require_known_keys(j, {"dataset", "seeds", "alphas", "missing_rate", "n_missing_cols", "n_predictors", "base_seed",
                           "models"},
                       "grid");
    ExperimentGrid g = ExperimentGrid::defaults();
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        require_known_keys(d, {"csv", "synthetic"}, "grid.dataset");
        if (d.contains("csv") && d.contains("synthetic")) {
            throw std::invalid_argument("grid.dataset: give either 'csv' or 'synthetic', not both");
        }
        if (d.contains("csv")) g.dataset.csv = d.at("csv").get<std::string>();
        if (d.contains("synthetic")) {
            const json& s = d.at("synthetic");
            require_known_keys(s, {"n", "d", "latent", "nonlinearity", "noise", "seed"}, "grid.dataset.synthetic");
            auto& t = g.dataset.synthetic;
            t.n = s.value("n", t.n);
            t.d = s.value("d", t.d);
            t.latent = s.value("latent", t.latent);
            t.nonlinearity = s.value("nonlinearity", t.nonlinearity);
            t.noise = s.value("noise", t.noise);
            t.seed = s.value("seed", t.seed);
        }
    }
    if (j.contains("seeds")) {
        const json& s = j.at("seeds");
        g.seeds.clear();
        if (s.is_number_integer()) {
            const auto count = s.get<std::int64_t>();
            if (count < 1) throw std::invalid_argument("grid.seeds: count must be >= 1");
            for (std::int64_t k = 0; k < count; ++k) g.seeds.push_back(static_cast<std::uint64_t>(k));
        } else {
            g.seeds = s.get<std::vector<std::uint64_t>>();
        }
    }
    if (j.contains("alphas")) g.alphas = j.at("alphas").get<std::vector<double>>();
    g.missing_rate = j.value("missing_rate", g.missing_rate);
    g.n_missing_cols = j.value("n_missing_cols", g.n_missing_cols);
    g.n_predictors = j.value("n_predictors", g.n_predictors);
    g.base_seed = j.value("base_seed", g.base_seed);
    if (j.contains("models")) {
        g.models.clear();
        for (const json& m : j.at("models")) {
            require_known_keys(m, {"label", "config"}, "grid.models[]");
            ModelConfig mc;
            if (m.contains("config")) {
                if (m.at("config").contains("weighted")) {
                    throw std::invalid_argument("grid.models[].config: 'weighted' is set by the paired design");
                }
                mc.config = imputation_config_from_json(m.at("config"));
            }
            mc.label = m.value("label", to_string(mc.config.regressor.kind));
            g.models.push_back(std::move(mc));
        }
    }
    g.validate();
    return g;
}

ExperimentGrid load_experiment_grid(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open grid file: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("grid file " + path.string() + ": " + e.what());
    }
    ExperimentGrid g = experiment_grid_from_json(j);
    if (g.dataset.csv && g.dataset.csv->is_relative()) g.dataset.csv = path.parent_path() / *g.dataset.csv;
    return g;
}

std::uint64_t cell_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    // splitmix64 finalizer folded over the coordinates
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(base);
    for (std::uint64_t v : {a, b, c}) h = mix(h ^ mix(v));
    return h;
}

namespace {

// Runs `n_tasks` tasks over `jobs` threads; task t writes only its own slot.
void parallel_for(std::size_t n_tasks, int jobs, const std::function<void(std::size_t)>& task) {
    const std::size_t workers = std::min<std::size_t>(std::max(1, jobs), n_tasks);
    if (workers <= 1) {
        for (std::size_t t = 0; t < n_tasks; ++t) task(t);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t t = next++; t < n_tasks; t = next++) task(t);
        });
    }
    for (auto& th : pool) th.join();
}

struct CellOutput {
    std::vector<RunRecord> records;
    std::vector<RunFailure> failures;
};

struct CellInput {
    std::uint64_t seed = 0;
    double alpha = 0.0;
    double missing_rate = 0.3;
};

// Seeds key on the alpha value, so a grid restricted to a subset of alphas
// reproduces the matching cells of the full grid.
std::uint64_t alpha_key(double alpha) {
    return std::bit_cast<std::uint64_t>(alpha == 0.0 ? 0.0 : alpha);
}

CellOutput run_cell(const ExperimentGrid& grid, const DataMatrix& data, const CellInput& cell, bool timing) {
    CellOutput out;
    auto fail_all = [&](const std::string& what) {
        for (const auto& m : grid.models) {
            for (bool weighted : {true, false}) {
                out.failures.push_back({cell.seed, cell.alpha, m.label, weighted, what});
            }
        }
    };

    std::optional<MaskSimulation> sim;
    try {
        MarSpec spec = select_random_spec(data.cols(), grid.n_missing_cols, grid.n_predictors,
                                          cell_seed(grid.base_seed, cell.seed));
        spec.alpha = cell.alpha;
        spec.target_missing_rate = cell.missing_rate;
        spec.seed = cell_seed(grid.base_seed, cell.seed, alpha_key(cell.alpha));
        sim.emplace(apply_mar_mask(data, spec));
    } catch (const std::exception& e) {
        fail_all(std::string("mask simulation: ") + e.what());
        return out;
    }

    for (std::size_t m = 0; m < grid.models.size(); ++m) {
        ImputationConfig cfg = grid.models[m].config;
        cfg.seed = cell_seed(grid.base_seed, cell.seed, alpha_key(cell.alpha), m + 1);
        for (bool weighted : {true, false}) {
            cfg.weighted = weighted;
            try {
                const auto start = std::chrono::steady_clock::now();
                const ImputationResult res = impute(sim->dataset, cfg);
                const auto stop = std::chrono::steady_clock::now();
                const MetricsReport rep = evaluate_imputation(data.values, res.completed, sim->dataset.mask());
                if (!std::isfinite(rep.rmse) || !std::isfinite(rep.wasserstein)) {
                    throw std::runtime_error("non-finite metrics");
                }
                RunRecord r;
                r.seed = cell.seed;
                r.alpha = cell.alpha;
                r.model = grid.models[m].label;
                r.weighted = weighted;
                r.rmse = rep.rmse;
                r.wasserstein = rep.wasserstein;
                r.wall_time_ms = timing ? std::chrono::duration<double, std::milli>(stop - start).count() : 0.0;
                out.records.push_back(std::move(r));
            } catch (const std::exception& e) {
                out.failures.push_back({cell.seed, cell.alpha, grid.models[m].label, weighted, e.what()});
            }
        }
    }
    return out;
}

// Shortest text that round-trips exactly.
std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

BenchmarkResult run_benchmark(const ExperimentGrid& grid, const DataMatrix& data, const BenchmarkOptions& opts) {
    grid.validate();
    std::vector<CellInput> cells;
    for (std::uint64_t seed : grid.seeds) {
        for (double alpha : grid.alphas) cells.push_back({seed, alpha, grid.missing_rate});
    }
    std::vector<CellOutput> outputs(cells.size());
    parallel_for(cells.size(), opts.jobs, [&](std::size_t t) { outputs[t] = run_cell(grid, data, cells[t], opts.timing); });

    BenchmarkResult result;
    for (auto& o : outputs) {
        std::move(o.records.begin(), o.records.end(), std::back_inserter(result.records));
        std::move(o.failures.begin(), o.failures.end(), std::back_inserter(result.failures));
    }
    return result;
}

BenchmarkResult run_benchmark(const ExperimentGrid& grid, const BenchmarkOptions& opts) {
    return run_benchmark(grid, load_dataset(grid.dataset), opts);
}

std::string format_results_csv(const std::vector<RunRecord>& records) {
    std::ostringstream os;
    os << "seed,alpha,model,weighted,rmse,wasserstein,wall_time_ms\n";
    for (const auto& r : records) {
        os << r.seed << ',' << fmt_double(r.alpha) << ',' << r.model << ',' << (r.weighted ? "true" : "false") << ','
           << fmt_double(r.rmse) << ',' << fmt_double(r.wasserstein) << ',' << fmt_double(r.wall_time_ms) << '\n';
    }
    return os.str();
}

std::vector<PairedCell> pair_records(const std::vector<RunRecord>& records) {
    std::vector<PairedCell> cells;
    std::map<std::tuple<std::uint64_t, double, std::string>, std::size_t> index;
    std::vector<std::pair<std::optional<RunRecord>, std::optional<RunRecord>>> halves;
    std::vector<std::tuple<std::uint64_t, double, std::string>> keys;
    for (const auto& r : records) {
        auto key = std::make_tuple(r.seed, r.alpha, r.model);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, halves.size()).first;
            halves.emplace_back();
            keys.push_back(key);
        }
        (r.weighted ? halves[it->second].first : halves[it->second].second) = r;
    }
    for (std::size_t k = 0; k < halves.size(); ++k) {
        if (!halves[k].first || !halves[k].second) continue;
        PairedCell c;
        std::tie(c.seed, c.alpha, c.model) = keys[k];
        c.weighted = *halves[k].first;
        c.unweighted = *halves[k].second;
        cells.push_back(std::move(c));
    }
    return cells;
}

std::vector<AlphaRatio> summarize_alpha_profile(const std::vector<RunRecord>& records, const std::string& model) {
    std::map<double, AlphaRatio> by_alpha;
    for (const auto& c : pair_records(records)) {
        if (!model.empty() && c.model != model) continue;
        AlphaRatio& a = by_alpha[c.alpha];
        a.alpha = c.alpha;
        a.mean_rmse_ratio += c.rmse_ratio();
        a.mean_wasserstein_ratio += c.wasserstein_ratio();
        ++a.n_cells;
    }
    std::vector<AlphaRatio> out;
    for (auto& [alpha, a] : by_alpha) {
        a.mean_rmse_ratio /= a.n_cells;
        a.mean_wasserstein_ratio /= a.n_cells;
        out.push_back(a);
    }
    return out;
}

std::vector<ModelSummary> summarize_models(const std::vector<RunRecord>& records) {
    const std::vector<PairedCell> cells = pair_records(records);
    std::vector<std::string> order;
    for (const auto& c : cells) {
        if (std::find(order.begin(), order.end(), c.model) == order.end()) order.push_back(c.model);
    }
    std::vector<ModelSummary> out;
    for (const auto& name : order) {
        ModelSummary s;
        s.model = name;
        std::vector<double> rw, ru, ww, wu;
        double ratio = 0.0;
        double wratio = 0.0;
        for (const auto& c : cells) {
            if (c.model != name) continue;
            rw.push_back(c.weighted.rmse);
            ru.push_back(c.unweighted.rmse);
            ww.push_back(c.weighted.wasserstein);
            wu.push_back(c.unweighted.wasserstein);
            ratio += c.rmse_ratio();
            wratio += c.wasserstein_ratio();
        }
        const double n = static_cast<double>(rw.size());
        s.n_pairs = static_cast<int>(rw.size());
        auto mean = [n](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / n; };
        s.mean_rmse_weighted = mean(rw);
        s.mean_rmse_unweighted = mean(ru);
        s.mean_wasserstein_weighted = mean(ww);
        s.mean_wasserstein_unweighted = mean(wu);
        s.mean_rmse_ratio = ratio / n;
        s.mean_wasserstein_ratio = wratio / n;
        try {
            s.rmse_test = wilcoxon_signed_rank(rw, ru);
        } catch (const std::invalid_argument&) {
        }
        try {
            s.wasserstein_test = wilcoxon_signed_rank(ww, wu);
        } catch (const std::invalid_argument&) {
        }
        out.push_back(std::move(s));
    }
    return out;
}

json summary_json(const ExperimentGrid& grid, const BenchmarkResult& result) {
    json j;
    j["grid"] = to_json(grid);
    j["n_records"] = result.records.size();
    j["n_failures"] = result.failures.size();

    json models = json::array();
    const auto summaries = summarize_models(result.records);
    for (const auto& s : summaries) {
        models.push_back({{"model", s.model},
                          {"n_pairs", s.n_pairs},
                          {"mean_rmse_weighted", s.mean_rmse_weighted},
                          {"mean_rmse_unweighted", s.mean_rmse_unweighted},
                          {"mean_wasserstein_weighted", s.mean_wasserstein_weighted},
                          {"mean_wasserstein_unweighted", s.mean_wasserstein_unweighted},
                          {"mean_rmse_ratio", s.mean_rmse_ratio},
                          {"mean_wasserstein_ratio", s.mean_wasserstein_ratio},
                          {"wilcoxon_rmse", s.rmse_test ? to_json(*s.rmse_test) : json(nullptr)},
                          {"wilcoxon_wasserstein", s.wasserstein_test ? to_json(*s.wasserstein_test) : json(nullptr)}});
    }
    j["models"] = models;

    json profile = json::object();
    if (grid.alphas.size() >= 2) {
        for (const auto& s : summaries) {
            json rows = json::array();
            for (const auto& a : summarize_alpha_profile(result.records, s.model)) {
                rows.push_back({{"alpha", a.alpha},
                                {"mean_rmse_ratio", a.mean_rmse_ratio},
                                {"mean_wasserstein_ratio", a.mean_wasserstein_ratio},
                                {"n_cells", a.n_cells}});
            }
            profile[s.model] = rows;
        }
    }
    j["alpha_profile"] = profile;

    json cells = json::array();
    for (const auto& c : pair_records(result.records)) {
        cells.push_back({{"seed", c.seed},
                         {"alpha", c.alpha},
                         {"model", c.model},
                         {"rmse_weighted", c.weighted.rmse},
                         {"rmse_unweighted", c.unweighted.rmse},
                         {"wasserstein_weighted", c.weighted.wasserstein},
                         {"wasserstein_unweighted", c.unweighted.wasserstein}});
    }
    j["cells"] = cells;

    json failures = json::array();
    for (const auto& f : result.failures) {
        failures.push_back({{"seed", f.seed}, {"alpha", f.alpha}, {"model", f.model}, {"weighted", f.weighted},
                            {"message", f.message}});
    }
    j["failures"] = failures;
    return j;
}

std::string to_string(SweepKind kind) {
    switch (kind) {
        case SweepKind::rows: return "rows";
        case SweepKind::features: return "features";
        case SweepKind::rate: return "rate";
    }
    return "?";
}

SweepKind sweep_kind_from_string(const std::string& name) {
    if (name == "rows") return SweepKind::rows;
    if (name == "features") return SweepKind::features;
    if (name == "rate") return SweepKind::rate;
    throw std::invalid_argument("unknown sweep kind '" + name + "' (expected rows, features or rate)");
}

SweepResult sensitivity_sweep(SweepKind kind, const std::vector<double>& values, const ExperimentGrid& grid,
                              const DataMatrix& data, const BenchmarkOptions& opts) {
    grid.validate();
    SweepResult result;
    struct Task {
        double value;
        CellInput cell;
    };
    std::vector<Task> tasks;
    for (double v : values) {
        std::string why;
        if (kind == SweepKind::rate && !(v > 0.01 && v < 0.99)) why = "rate must be in (0.01, 0.99)";
        if (kind == SweepKind::features &&
            (v != std::floor(v) || v < grid.n_missing_cols + grid.n_predictors || v > static_cast<double>(data.cols()))) {
            why = "needs an integer in [" + std::to_string(grid.n_missing_cols + grid.n_predictors) + ", " +
                  std::to_string(data.cols()) + "]";
        }
        if (kind == SweepKind::rows && (v != std::floor(v) || v < 10)) why = "needs an integer >= 10";
        if (!why.empty()) {
            result.warnings.push_back(to_string(kind) + " = " + fmt_double(v) + " skipped: " + why);
            continue;
        }
        for (std::uint64_t seed : grid.seeds) {
            for (double alpha : grid.alphas) {
                const double rate = kind == SweepKind::rate ? v : grid.missing_rate;
                tasks.push_back({v, {seed, alpha, rate}});
            }
        }
    }

    std::vector<CellOutput> outputs(tasks.size());
    parallel_for(tasks.size(), opts.jobs, [&](std::size_t t) {
        const Task& task = tasks[t];
        if (kind == SweepKind::rate) {
            outputs[t] = run_cell(grid, data, task.cell, false);
        } else if (kind == SweepKind::features) {
            const Index keep = static_cast<Index>(task.value);
            const std::vector<std::string> names(data.column_names.begin(), data.column_names.begin() + keep);
            outputs[t] = run_cell(grid, DataMatrix(data.values.leftCols(keep), names), task.cell, false);
        } else {
            const Index keep = static_cast<Index>(task.value);
            if (keep >= data.rows()) {
                outputs[t] = run_cell(grid, data, task.cell, false);
            } else {
                RowIndices rows(static_cast<std::size_t>(data.rows()));
                std::iota(rows.begin(), rows.end(), Index{0});
                std::mt19937_64 rng(cell_seed(grid.base_seed, task.cell.seed, 0x726f7773ULL));
                std::shuffle(rows.begin(), rows.end(), rng);
                rows.resize(static_cast<std::size_t>(keep));
                std::sort(rows.begin(), rows.end());
                outputs[t] = run_cell(grid, DataMatrix(select_rows(data.values, rows), data.column_names), task.cell, false);
            }
        }
    });

    for (std::size_t t = 0; t < tasks.size(); ++t) {
        for (const auto& c : pair_records(outputs[t].records)) {
            SweepPoint p;
            p.kind = kind;
            p.value = tasks[t].value;
            p.seed = c.seed;
            p.alpha = c.alpha;
            p.model = c.model;
            p.rmse_weighted = c.weighted.rmse;
            p.rmse_unweighted = c.unweighted.rmse;
            p.rmse_ratio = c.rmse_ratio();
            result.points.push_back(p);
        }
        for (auto& f : outputs[t].failures) {
            f.message = to_string(kind) + " = " + fmt_double(tasks[t].value) + ": " + f.message;
            result.failures.push_back(std::move(f));
        }
    }
    return result;
}

std::string format_sweep_csv(const std::vector<SweepPoint>& points) {
    std::ostringstream os;
    os << "kind,value,seed,alpha,model,rmse_weighted,rmse_unweighted,rmse_ratio\n";
    for (const auto& p : points) {
        os << to_string(p.kind) << ',' << fmt_double(p.value) << ',' << p.seed << ',' << fmt_double(p.alpha) << ','
           << p.model << ',' << fmt_double(p.rmse_weighted) << ',' << fmt_double(p.rmse_unweighted) << ','
           << fmt_double(p.rmse_ratio) << '\n';
    }
    return os.str();
}

}  // namespace wimpute
