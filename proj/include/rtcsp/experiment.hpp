#pragma once

// Config-file driven experiment layer shared by the CLI and the
// acceptance suite. Parses "rtcsp-experiment/1" JSON (unknown keys
// rejected), resolves the dataset (manifest or synthetic), and runs
// the evaluate / tune / curve / mvr protocols into named artifacts
// (CSV, JSON, optional SVG). Artifacts are built as strings so that a
// rerun with the same config and seed is bitwise comparable.

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rtcsp/data_io.hpp"
#include "rtcsp/errors.hpp"
#include "rtcsp/eval.hpp"
#include "rtcsp/svg_plot.hpp"

namespace rtcsp {

struct ExperimentConfig {
    std::optional<std::string> manifest_path; // exactly one of these two
    std::optional<SynthConfig> synth;

    std::vector<std::string> methods{"csp", "rtcsp_ssf", "rtcsp_combine", "rtcsp_ensemble",
                                     "composite_csp"};
    int n_pairs = 3;
    std::uint64_t seed = 42;
    int n_seeds = 5;                 // learning-curve repetitions
    std::vector<double> fractions;   // curve / mvr fractions
    int runs = 50;                   // mvr repetitions
    double alpha = 0.05 / 9.0;
    std::string output_dir = "out";
    LambdaSpec lambda;
    int smoothing_window = 0;        // 0 -> length/10 rule
    int threads = 1;
};

inline std::string format_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// config parsing

inline SynthConfig parse_synth_config(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j,
        {"schema", "n_subjects", "n_classes", "channels", "samples", "fs", "trials_per_class",
         "test_trials_per_class", "source_variance_profiles", "mixing_perturbation_scale",
         "scale_jitter", "noise_level", "seed"},
        "synth");
    SynthConfig cfg;
    cfg.n_subjects = j.value("n_subjects", cfg.n_subjects);
    cfg.n_classes = j.value("n_classes", cfg.n_classes);
    cfg.channels = j.value("channels", cfg.channels);
    cfg.samples = j.value("samples", cfg.samples);
    cfg.fs = j.value("fs", cfg.fs);
    cfg.trials_per_class = j.value("trials_per_class", cfg.trials_per_class);
    cfg.test_trials_per_class = j.value("test_trials_per_class", cfg.test_trials_per_class);
    if (j.contains("source_variance_profiles"))
        cfg.source_variance_profiles =
            j.at("source_variance_profiles").get<std::vector<std::vector<double>>>();
    cfg.mixing_perturbation_scale =
        j.value("mixing_perturbation_scale", cfg.mixing_perturbation_scale);
    cfg.scale_jitter = j.value("scale_jitter", cfg.scale_jitter);
    cfg.noise_level = j.value("noise_level", cfg.noise_level);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.validate();
    return cfg;
}

inline LambdaSpec parse_lambda_spec(const nlohmann::json& j) {
    detail::reject_unknown_keys(j, {"mode", "value", "k", "grid"}, "lambda");
    LambdaSpec spec;
    const std::string mode = j.value("mode", "fixed");
    if (mode == "fixed")
        spec.mode = LambdaSpec::Mode::Fixed;
    else if (mode == "kfold")
        spec.mode = LambdaSpec::Mode::TuneKfold;
    else if (mode == "loocv")
        spec.mode = LambdaSpec::Mode::TuneLoocv;
    else
        throw ConfigError("lambda.mode must be fixed, kfold or loocv (got '" + mode + "')");
    spec.fixed = j.value("value", spec.fixed);
    if (!(spec.fixed >= 0.0 && spec.fixed <= 1.0))
        throw ConfigError("lambda.value must lie in [0, 1]");
    spec.k = j.value("k", spec.k);
    if (spec.k < 2)
        throw ConfigError("lambda.k must be at least 2");
    if (j.contains("grid")) {
        spec.grid = j.at("grid").get<std::vector<double>>();
        for (double g : spec.grid)
            if (!(g >= 0.0 && g <= 1.0))
                throw ConfigError("lambda.grid values must lie in [0, 1]");
    }
    return spec;
}

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j,
        {"schema", "dataset", "methods", "n_pairs", "seed", "n_seeds", "fractions", "runs",
         "alpha", "output_dir", "lambda", "smoothing_window", "threads"},
        "experiment");
    if (j.value("schema", "") != "rtcsp-experiment/1")
        throw ConfigError("experiment: expected schema 'rtcsp-experiment/1', got '"
                          + j.value("schema", "") + "'");
    ExperimentConfig cfg;
    if (!j.contains("dataset"))
        throw ConfigError("experiment: missing 'dataset'");
    const auto& ds = j.at("dataset");
    detail::reject_unknown_keys(ds, {"manifest", "synth"}, "experiment.dataset");
    if (ds.contains("manifest") == ds.contains("synth"))
        throw ConfigError("experiment.dataset: give exactly one of 'manifest' or 'synth'");
    if (ds.contains("manifest"))
        cfg.manifest_path = ds.at("manifest").get<std::string>();
    else
        cfg.synth = parse_synth_config(ds.at("synth"));

    if (j.contains("methods")) {
        cfg.methods = j.at("methods").get<std::vector<std::string>>();
        if (cfg.methods.empty())
            throw ConfigError("experiment.methods must not be empty");
    }
    cfg.n_pairs = j.value("n_pairs", cfg.n_pairs);
    if (cfg.n_pairs < 1)
        throw ConfigError("experiment.n_pairs must be positive");
    cfg.seed = j.value("seed", cfg.seed);
    cfg.n_seeds = j.value("n_seeds", cfg.n_seeds);
    if (cfg.n_seeds < 1)
        throw ConfigError("experiment.n_seeds must be positive");
    if (j.contains("fractions"))
        cfg.fractions = j.at("fractions").get<std::vector<double>>();
    cfg.runs = j.value("runs", cfg.runs);
    if (cfg.runs < 2)
        throw ConfigError("experiment.runs must be at least 2");
    cfg.alpha = j.value("alpha", cfg.alpha);
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw ConfigError("experiment.alpha must lie in (0, 1)");
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    if (j.contains("lambda")) cfg.lambda = parse_lambda_spec(j.at("lambda"));
    cfg.smoothing_window = j.value("smoothing_window", 0);
    if (cfg.smoothing_window < 0)
        throw ConfigError("experiment.smoothing_window must be >= 0");
    cfg.threads = j.value("threads", 1);
    if (cfg.threads < 0)
        throw ConfigError("experiment.threads must be >= 0");
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("missing config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return parse_experiment_config(j);
}

/// Resolves the configured dataset; manifest paths are taken relative
/// to the config file's directory.
inline Dataset resolve_dataset(const ExperimentConfig& cfg,
                               const std::filesystem::path& config_dir) {
    if (cfg.synth) return synth_generate(*cfg.synth);
    std::filesystem::path p = *cfg.manifest_path;
    if (p.is_relative()) p = config_dir / p;
    return load_dataset(p);
}

inline std::vector<Method> resolve_methods(const ExperimentConfig& cfg, int n_pairs) {
    std::vector<Method> methods;
    for (const std::string& name : cfg.methods) {
        if (name == "csp")
            methods.push_back(make_method(Strategy::CspBaseline, n_pairs));
        else if (name == "rtcsp_ssf")
            methods.push_back(make_method(Strategy::Ssf, n_pairs));
        else if (name == "rtcsp_combine")
            methods.push_back(make_method(Strategy::Combine, n_pairs));
        else if (name == "rtcsp_ensemble")
            methods.push_back(make_method(Strategy::Ensemble, n_pairs));
        else if (name == "composite_csp")
            methods.push_back(make_method(Strategy::CompositeCsp, n_pairs, {}, cfg.lambda));
        else
            throw ConfigError("unknown method '" + name + "'");
    }
    return methods;
}

// ---------------------------------------------------------------------------
// runners

struct Artifacts {
    std::vector<std::pair<std::string, std::string>> files; // name -> content
    bool all_cells_failed = false;

    void add(std::string name, std::string content) {
        files.emplace_back(std::move(name), std::move(content));
    }
};

inline void write_artifacts(const Artifacts& artifacts, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : artifacts.files) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out)
            throw IoError("cannot write " + (dir / name).string());
        out << content;
    }
}

inline Artifacts run_evaluate(const ExperimentConfig& cfg, const Dataset& dataset) {
    const AccuracyTable table =
        evaluate_methods(dataset, resolve_methods(cfg, cfg.n_pairs), cfg.threads);

    std::string csv = "subject";
    for (const auto& name : table.method_names) csv += "," + name;
    csv += "\n";
    for (std::size_t t = 0; t < table.subject_ids.size(); ++t) {
        csv += table.subject_ids[t];
        for (const auto& cell : table.cells[t])
            csv += "," + (cell.ok ? format_g(cell.accuracy_pct) : std::string("failed"));
        csv += "\n";
    }
    csv += "mean";
    for (double m : table.column_means()) csv += "," + format_g(m);
    csv += "\n";

    std::string cells_csv = "subject,method,status,n_correct,n_total,accuracy_pct,error\n";
    nlohmann::json jcells = nlohmann::json::array();
    for (std::size_t t = 0; t < table.subject_ids.size(); ++t)
        for (std::size_t m = 0; m < table.method_names.size(); ++m) {
            const AccuracyCell& cell = table.cells[t][m];
            cells_csv += table.subject_ids[t] + "," + table.method_names[m] + ","
                         + (cell.ok ? "ok" : "failed") + "," + std::to_string(cell.n_correct)
                         + "," + std::to_string(cell.n_total) + ","
                         + format_g(cell.accuracy_pct) + ",\"" + cell.error + "\"\n";
            jcells.push_back({{"subject", table.subject_ids[t]},
                              {"method", table.method_names[m]},
                              {"ok", cell.ok},
                              {"n_correct", cell.n_correct},
                              {"n_total", cell.n_total},
                              {"accuracy_pct", cell.accuracy_pct},
                              {"error", cell.error}});
        }

    nlohmann::json summary{{"dataset", table.dataset},
                           {"methods", table.method_names},
                           {"subjects", table.subject_ids},
                           {"column_means", table.column_means()},
                           {"cells", std::move(jcells)}};

    Artifacts out;
    out.all_cells_failed = table.all_failed();
    out.add("accuracy.csv", std::move(csv));
    out.add("accuracy_cells.csv", std::move(cells_csv));
    out.add("accuracy.json", summary.dump(2) + "\n");
    return out;
}

inline Artifacts run_tune(const ExperimentConfig& cfg, const Dataset& dataset) {
    std::string csv = "subject,lambda,folds_used\n";
    std::string grid_csv = "subject,lambda,mean_validation_error\n";
    nlohmann::json jsubjects = nlohmann::json::array();
    for (std::size_t t = 0; t < dataset.subjects.size(); ++t) {
        std::vector<SubjectData> sources;
        for (std::size_t s = 0; s < dataset.subjects.size(); ++s)
            if (s != t) sources.push_back(dataset.subjects[s].train);
        LambdaSpec spec = cfg.lambda;
        if (spec.mode == LambdaSpec::Mode::Fixed) spec.mode = LambdaSpec::Mode::TuneKfold;
        const TuneResult r = tune_lambda(sources, dataset.subjects[t].train, spec, cfg.n_pairs);
        const std::string& id = dataset.subjects[t].train.subject_id;
        csv += id + "," + format_g(r.lambda) + "," + std::to_string(r.folds_used) + "\n";
        for (std::size_t g = 0; g < r.grid.size(); ++g)
            grid_csv += id + "," + format_g(r.grid[g]) + "," + format_g(r.mean_error[g]) + "\n";
        jsubjects.push_back({{"subject", id},
                             {"lambda", r.lambda},
                             {"folds_used", r.folds_used},
                             {"grid", r.grid},
                             {"mean_error", r.mean_error}});
    }
    Artifacts out;
    out.add("lambda.csv", std::move(csv));
    out.add("lambda_grid.csv", std::move(grid_csv));
    out.add("lambda.json", nlohmann::json{{"subjects", std::move(jsubjects)}}.dump(2) + "\n");
    return out;
}

inline Artifacts run_curve(const ExperimentConfig& cfg, const Dataset& dataset,
                           bool emit_plot) {
    if (cfg.fractions.empty())
        throw ConfigError("curve: config needs a 'fractions' list");
    const CurveResult curve =
        learning_curve(dataset, resolve_methods(cfg, cfg.n_pairs), cfg.fractions, cfg.n_seeds,
                       cfg.seed, cfg.smoothing_window, cfg.threads);

    std::string runs_csv = "fraction,method,seed,subject,accuracy_pct\n";
    for (const CurveRow& row : curve.rows)
        runs_csv += format_g(row.fraction) + "," + row.method + ","
                    + std::to_string(row.seed_index) + "," + row.subject_id + ","
                    + format_g(row.accuracy_pct) + "\n";

    std::string mean_csv = "fraction,method,mean_accuracy_pct,smoothed_accuracy_pct\n";
    for (std::size_t m = 0; m < curve.methods.size(); ++m)
        for (std::size_t f = 0; f < curve.fractions_used.size(); ++f)
            mean_csv += format_g(curve.fractions_used[f]) + "," + curve.methods[m] + ","
                        + format_g(curve.mean_series[m][f]) + ","
                        + format_g(curve.smoothed_series[m][f]) + "\n";

    nlohmann::json summary{{"methods", curve.methods},
                           {"fractions_used", curve.fractions_used},
                           {"fractions_skipped", curve.fractions_skipped},
                           {"smoothing_window", curve.smoothing_window},
                           {"n_seeds", cfg.n_seeds},
                           {"seed", cfg.seed}};

    Artifacts out;
    out.add("curve_runs.csv", std::move(runs_csv));
    out.add("curve_mean.csv", std::move(mean_csv));
    out.add("curve.json", summary.dump(2) + "\n");
    if (emit_plot && !curve.fractions_used.empty()) {
        std::vector<SvgSeries> series;
        for (std::size_t m = 0; m < curve.methods.size(); ++m)
            series.push_back(
                SvgSeries{curve.methods[m], curve.fractions_used, curve.smoothed_series[m]});
        out.add("curve.svg",
                svg_line_plot(dataset.name + ": accuracy vs training fraction",
                              "training fraction", "test accuracy (%)", series));
    }
    return out;
}

inline Artifacts run_mvr(const ExperimentConfig& cfg, const Dataset& dataset, bool emit_plot) {
    if (cfg.fractions.empty())
        throw ConfigError("mvr: config needs a 'fractions' list");

    std::string runs_csv = "fraction,run,mvr_base,mvr_rt\n";
    std::string summary_csv = "fraction,runs_ok,runs_failed,mean_base,mean_rt,se_base,se_rt,"
                              "t_statistic,p_value,sign_test_p,alpha,significant\n";
    nlohmann::json jreports = nlohmann::json::array();
    std::vector<SvgBarGroup> bars;
    for (double fraction : cfg.fractions) {
        const MvrReport r = mvr_experiment(dataset, fraction, cfg.runs, cfg.seed, cfg.alpha,
                                           {}, cfg.threads);
        for (std::size_t i = 0; i < r.base_values.size(); ++i)
            runs_csv += format_g(fraction) + "," + std::to_string(i) + ","
                        + format_g(r.base_values[i]) + "," + format_g(r.rt_values[i]) + "\n";
        summary_csv += format_g(fraction) + "," + std::to_string(r.base_values.size()) + ","
                       + std::to_string(r.runs_failed) + "," + format_g(r.mean_base) + ","
                       + format_g(r.mean_rt) + "," + format_g(r.se_base) + ","
                       + format_g(r.se_rt) + "," + format_g(r.t_statistic) + ","
                       + format_g(r.p_value) + "," + format_g(r.sign_test_p) + ","
                       + format_g(r.alpha) + "," + (r.significant ? "1" : "0") + "\n";
        jreports.push_back({{"fraction", fraction},
                            {"runs_ok", r.base_values.size()},
                            {"runs_failed", r.runs_failed},
                            {"mean_base", r.mean_base},
                            {"mean_rt", r.mean_rt},
                            {"se_base", r.se_base},
                            {"se_rt", r.se_rt},
                            {"t_statistic", r.t_statistic},
                            {"p_value", r.p_value},
                            {"sign_test_p", r.sign_test_p},
                            {"alpha", r.alpha},
                            {"significant", r.significant}});
        bars.push_back(SvgBarGroup{format_g(100.0 * fraction) + "%",
                                   {r.mean_base, r.mean_rt},
                                   {r.se_base, r.se_rt}});
    }

    Artifacts out;
    out.add("mvr_runs.csv", std::move(runs_csv));
    out.add("mvr_summary.csv", std::move(summary_csv));
    out.add("mvr.json", nlohmann::json{{"reports", std::move(jreports)}}.dump(2) + "\n");
    if (emit_plot)
        out.add("mvr.svg", svg_bar_plot(dataset.name + ": mean-variance-ratio on test data",
                                        "MVR", {"csp", "rtcsp_ssf"}, bars));
    return out;
}

} // namespace rtcsp
