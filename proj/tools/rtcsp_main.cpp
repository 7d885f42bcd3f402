// rtcsp command-line interface.
//
// Subcommands:
//   synth          generate a synthetic dataset into the container format
//   evaluate       per-subject accuracy table over the configured methods
//   tune           composite-CSP lambda tuning per target subject
//   curve          limited-training-data learning curves
//   mvr            mean-variance-ratio generalization study
//   align-inspect  dump the per-class alignment maps for a subject pair
//
// All experiment commands are driven by a single JSON config file;
// flags only control output (--out, --no-plot, --threads,
// --seed-override). Exit codes: 0 success, 2 config error, 3 total
// experiment failure, 4 I/O error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "rtcsp/experiment.hpp"
#include "rtcsp/serialize.hpp"

namespace fs = std::filesystem;
using namespace rtcsp;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    bool no_plot = false;
    int threads = -1; // -1: keep config value; 0: hardware concurrency
    long long seed_override = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_plot = true) {
    cmd->add_option("--config", flags.config_path, "JSON config file")->required();
    cmd->add_option("--out", flags.out_dir, "output directory (overrides the config)");
    if (with_plot) cmd->add_flag("--no-plot", flags.no_plot, "skip SVG emission");
    cmd->add_option("--threads", flags.threads,
                    "worker threads (0 = all cores; results do not depend on this)");
    cmd->add_option("--seed-override", flags.seed_override,
                    "replace the experiment seed from the config");
}

ExperimentConfig load_config_with_flags(const CommonFlags& flags) {
    ExperimentConfig cfg = load_experiment_config(flags.config_path);
    if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;
    if (flags.seed_override >= 0)
        cfg.seed = static_cast<std::uint64_t>(flags.seed_override);
    if (flags.threads == 0)
        cfg.threads = static_cast<int>(std::thread::hardware_concurrency());
    else if (flags.threads > 0)
        cfg.threads = flags.threads;
    if (cfg.threads == 0) cfg.threads = static_cast<int>(std::thread::hardware_concurrency());
    return cfg;
}

int run_synth(const std::string& config_path, const std::string& out_dir) {
    std::ifstream in(config_path);
    if (!in)
        throw IoError("missing config file: " + config_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synth config: ") + e.what());
    }
    if (j.value("schema", "rtcsp-synth/1") != "rtcsp-synth/1")
        throw ConfigError("synth config: expected schema 'rtcsp-synth/1'");
    const SynthConfig cfg = parse_synth_config(j);
    const Dataset ds = synth_generate(cfg);
    const fs::path manifest = save_dataset(ds, out_dir);

    int total_train = 0, total_test = 0;
    for (const auto& s : ds.subjects) {
        total_train += static_cast<int>(s.train.trials.size());
        total_test += static_cast<int>(s.test.trials.size());
    }
    std::printf("wrote %s\n", manifest.string().c_str());
    std::printf("subjects: %zu, classes: %zu, train trials: %d, test trials: %d\n",
                ds.subjects.size(), ds.classes.size(), total_train, total_test);
    return 0;
}

int run_align_inspect(const CommonFlags& flags, const std::string& source_id,
                      const std::string& target_id, const std::string& out_file) {
    const ExperimentConfig cfg = load_config_with_flags(flags);
    const Dataset ds = resolve_dataset(cfg, fs::path(flags.config_path).parent_path());

    const SubjectData* source = nullptr;
    const SubjectData* target = nullptr;
    for (const auto& s : ds.subjects) {
        if (s.train.subject_id == source_id) source = &s.train;
        if (s.train.subject_id == target_id) target = &s.train;
    }
    if (!source || !target)
        throw ConfigError("align-inspect: unknown subject id '"
                          + (source ? target_id : source_id) + "'");

    const SubjectAlignment sa = align_subject(source->covariances, source->labels,
                                              target->covariances, target->labels);
    nlohmann::json out{{"schema", "rtcsp-alignment/1"},
                       {"source", source_id},
                       {"target", target_id},
                       {"maps", nlohmann::json::array()}};
    for (const AlignmentMap& map : sa.maps) out["maps"].push_back(to_json(map));

    if (out_file.empty()) {
        std::cout << out.dump(2) << "\n";
    } else {
        std::ofstream f(out_file);
        if (!f)
            throw IoError("cannot write " + out_file);
        f << out.dump(2) << "\n";
        std::printf("wrote %s\n", out_file.c_str());
    }
    return 0;
}

int dispatch(const std::string& command, const CommonFlags& flags) {
    const ExperimentConfig cfg = load_config_with_flags(flags);
    const Dataset ds = resolve_dataset(cfg, fs::path(flags.config_path).parent_path());

    Artifacts artifacts;
    if (command == "evaluate")
        artifacts = run_evaluate(cfg, ds);
    else if (command == "tune")
        artifacts = run_tune(cfg, ds);
    else if (command == "curve")
        artifacts = run_curve(cfg, ds, !flags.no_plot);
    else
        artifacts = run_mvr(cfg, ds, !flags.no_plot);

    write_artifacts(artifacts, cfg.output_dir);
    for (const auto& [name, content] : artifacts.files)
        std::printf("wrote %s (%zu bytes)\n", (fs::path(cfg.output_dir) / name).string().c_str(),
                    content.size());
    if (artifacts.all_cells_failed) {
        std::fprintf(stderr, "error: every cell of the experiment failed\n");
        return 3;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Riemannian Transfer CSP experiment harness"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_config, synth_out = "synth_out";
    synth->add_option("--config", synth_config, "synth JSON config")->required();
    synth->add_option("--out", synth_out, "output directory");

    CommonFlags eval_flags, tune_flags, curve_flags, mvr_flags, align_flags;
    auto* evaluate = app.add_subcommand("evaluate", "accuracy table over methods");
    add_common(evaluate, eval_flags, false);
    auto* tune = app.add_subcommand("tune", "composite-CSP lambda tuning");
    add_common(tune, tune_flags, false);
    auto* curve = app.add_subcommand("curve", "limited-training-data learning curves");
    add_common(curve, curve_flags);
    auto* mvr = app.add_subcommand("mvr", "mean-variance-ratio study");
    add_common(mvr, mvr_flags);

    auto* align = app.add_subcommand("align-inspect", "dump alignment maps for a pair");
    std::string align_source, align_target, align_out;
    add_common(align, align_flags, false);
    align->add_option("--source", align_source, "source subject id")->required();
    align->add_option("--target", align_target, "target subject id")->required();
    align->add_option("--out-file", align_out, "write JSON here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return run_synth(synth_config, synth_out);
        if (evaluate->parsed()) return dispatch("evaluate", eval_flags);
        if (tune->parsed()) return dispatch("tune", tune_flags);
        if (curve->parsed()) return dispatch("curve", curve_flags);
        if (mvr->parsed()) return dispatch("mvr", mvr_flags);
        if (align->parsed())
            return run_align_inspect(align_flags, align_source, align_target, align_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return 4;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return 4;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
