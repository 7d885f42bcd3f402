#pragma once

// Dataset container format, train/test loading, stratified
// subsampling, and a seeded synthetic multi-subject generator.
//
// On-disk layout ("rtcsp-dataset/1"):
//   manifest.json      schema, fs, channels, samples, class alphabet,
//                      covariance estimator, optional channel subset /
//                      names / bandpass, and one entry per subject
//                      naming its trial and label files
//   <subject>_*.f64    raw little-endian IEEE-754 doubles, one trial
//                      after another, each row-major C x T
//   <subject>_*.labels one integer label per line, UTF-8
//
// The trial count of a file is implied by its size, which must divide
// exactly and match the label line count.

#include <json.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "rtcsp/errors.hpp"
#include "rtcsp/rng.hpp"
#include "rtcsp/signal.hpp"
#include "rtcsp/transfer.hpp"

namespace rtcsp {

struct SubjectSplit {
    SubjectData train;
    SubjectData test;
};

struct Dataset {
    std::string name;
    double fs = 0.0;
    std::vector<Label> classes;
    CovarianceEstimator estimator = CovarianceEstimator::Plain;
    std::vector<SubjectSplit> subjects;
};

// ---------------------------------------------------------------------------
// raw trial / label files

inline void write_trials_f64(const std::filesystem::path& path,
                             const std::vector<Trial>& trials) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open for writing: " + path.string());
    std::vector<double> buffer;
    for (const Trial& t : trials) {
        buffer.resize(static_cast<std::size_t>(t.data.size()));
        std::size_t k = 0;
        for (int i = 0; i < t.channels(); ++i)
            for (int j = 0; j < t.samples(); ++j) buffer[k++] = t.data(i, j);
        out.write(reinterpret_cast<const char*>(buffer.data()),
                  static_cast<std::streamsize>(buffer.size() * sizeof(double)));
    }
    if (!out)
        throw IoError("write failed: " + path.string());
}

inline std::vector<Trial> read_trials_f64(const std::filesystem::path& path, int channels,
                                          int samples, double fs,
                                          const std::vector<std::string>& names = {}) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec)
        throw IoError("missing trial file: " + path.string());
    const std::uintmax_t trial_bytes =
        static_cast<std::uintmax_t>(channels) * samples * sizeof(double);
    if (trial_bytes == 0 || size % trial_bytes != 0)
        throw FormatError("trial file " + path.string() + ": size " + std::to_string(size)
                          + " bytes is not a multiple of the declared trial size "
                          + std::to_string(trial_bytes) + " (mismatch at offset "
                          + std::to_string((size / trial_bytes) * trial_bytes) + ")");
    const std::size_t count = static_cast<std::size_t>(size / trial_bytes);

    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open: " + path.string());
    std::vector<Trial> trials;
    trials.reserve(count);
    std::vector<double> buffer(static_cast<std::size_t>(channels) * samples);
    for (std::size_t n = 0; n < count; ++n) {
        in.read(reinterpret_cast<char*>(buffer.data()),
                static_cast<std::streamsize>(buffer.size() * sizeof(double)));
        if (!in)
            throw FormatError("trial file " + path.string() + ": truncated read at trial "
                              + std::to_string(n));
        Eigen::MatrixXd data(channels, samples);
        std::size_t k = 0;
        for (int i = 0; i < channels; ++i)
            for (int j = 0; j < samples; ++j) data(i, j) = buffer[k++];
        trials.emplace_back(std::move(data), fs, names);
    }
    return trials;
}

inline void write_labels(const std::filesystem::path& path, const std::vector<Label>& labels) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open for writing: " + path.string());
    for (Label l : labels) out << l << '\n';
}

inline std::vector<Label> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("missing label file: " + path.string());
    std::vector<Label> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            labels.push_back(std::stoi(line));
        } catch (const std::exception&) {
            throw FormatError("label file " + path.string() + ": bad line "
                              + std::to_string(labels.size() + 1) + " ('" + line + "')");
        }
    }
    return labels;
}

// ---------------------------------------------------------------------------
// manifest

struct ManifestSubject {
    std::string subject_id;
    std::string train_file;
    std::string test_file;
    std::string train_labels;
    std::string test_labels;
};

struct DatasetManifest {
    std::string name;
    double fs = 0.0;
    int channels = 0;
    int samples = 0;
    std::vector<Label> classes;
    std::vector<std::string> channel_names;   // optional
    std::vector<int> channel_subset;          // optional
    CovarianceEstimator estimator = CovarianceEstimator::Plain;
    std::optional<BandpassSpec> bandpass;
    std::vector<ManifestSubject> subjects;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                const std::vector<std::string>& known,
                                const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError(where + ": unknown key '" + key + "'");
}

} // namespace detail

inline DatasetManifest parse_manifest(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j,
        {"schema", "name", "fs", "channels", "samples", "classes", "channel_names",
         "channel_subset", "covariance_estimator", "bandpass", "subjects"},
        "manifest");
    if (j.value("schema", "") != "rtcsp-dataset/1")
        throw ConfigError("manifest: expected schema 'rtcsp-dataset/1', got '"
                          + j.value("schema", "") + "'");
    DatasetManifest m;
    m.name = j.at("name").get<std::string>();
    m.fs = j.at("fs").get<double>();
    m.channels = j.at("channels").get<int>();
    m.samples = j.at("samples").get<int>();
    m.classes = j.at("classes").get<std::vector<Label>>();
    if (m.channels < 2 || m.samples < 1 || m.fs <= 0.0 || m.classes.size() < 2)
        throw ConfigError("manifest: channels/samples/fs/classes out of range");
    if (j.contains("channel_names"))
        m.channel_names = j.at("channel_names").get<std::vector<std::string>>();
    if (j.contains("channel_subset")) {
        m.channel_subset = j.at("channel_subset").get<std::vector<int>>();
        for (int idx : m.channel_subset)
            if (idx < 0 || idx >= m.channels)
                throw ConfigError("manifest: channel_subset index " + std::to_string(idx)
                                  + " out of range for " + std::to_string(m.channels)
                                  + " channels");
        if (m.channel_subset.size() < 2)
            throw ConfigError("manifest: channel_subset must keep at least 2 channels");
    }
    const std::string est = j.value("covariance_estimator", "plain");
    if (est == "plain")
        m.estimator = CovarianceEstimator::Plain;
    else if (est == "ledoit_wolf")
        m.estimator = CovarianceEstimator::LedoitWolf;
    else
        throw ConfigError("manifest: unknown covariance_estimator '" + est + "'");
    if (j.contains("bandpass") && !j.at("bandpass").is_null()) {
        const auto& b = j.at("bandpass");
        detail::reject_unknown_keys(b, {"low_hz", "high_hz", "order", "zero_phase"},
                                    "manifest.bandpass");
        BandpassSpec spec;
        spec.low_hz = b.at("low_hz").get<double>();
        spec.high_hz = b.at("high_hz").get<double>();
        spec.order = b.value("order", 5);
        spec.zero_phase = b.value("zero_phase", true);
        m.bandpass = spec;
    }
    for (const auto& js : j.at("subjects")) {
        detail::reject_unknown_keys(
            js, {"subject_id", "train_file", "test_file", "label_files"}, "manifest.subjects");
        const auto& lf = js.at("label_files");
        m.subjects.push_back(ManifestSubject{js.at("subject_id").get<std::string>(),
                                             js.at("train_file").get<std::string>(),
                                             js.at("test_file").get<std::string>(),
                                             lf.at("train").get<std::string>(),
                                             lf.at("test").get<std::string>()});
    }
    if (m.subjects.empty())
        throw ConfigError("manifest: no subjects");
    return m;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json j{{"schema", "rtcsp-dataset/1"},
                     {"name", m.name},
                     {"fs", m.fs},
                     {"channels", m.channels},
                     {"samples", m.samples},
                     {"classes", m.classes},
                     {"covariance_estimator",
                      m.estimator == CovarianceEstimator::Plain ? "plain" : "ledoit_wolf"}};
    if (!m.channel_names.empty()) j["channel_names"] = m.channel_names;
    if (!m.channel_subset.empty()) j["channel_subset"] = m.channel_subset;
    if (m.bandpass)
        j["bandpass"] = {{"low_hz", m.bandpass->low_hz},
                         {"high_hz", m.bandpass->high_hz},
                         {"order", m.bandpass->order},
                         {"zero_phase", m.bandpass->zero_phase}};
    j["subjects"] = nlohmann::json::array();
    for (const ManifestSubject& s : m.subjects)
        j["subjects"].push_back(
            {{"subject_id", s.subject_id},
             {"train_file", s.train_file},
             {"test_file", s.test_file},
             {"label_files", {{"train", s.train_labels}, {"test", s.test_labels}}}});
    return j;
}

namespace detail {

inline Trial apply_channel_subset(const Trial& t, const std::vector<int>& subset) {
    if (subset.empty()) return t;
    Eigen::MatrixXd data(static_cast<Eigen::Index>(subset.size()), t.samples());
    std::vector<std::string> names;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        data.row(static_cast<Eigen::Index>(i)) = t.data.row(subset[i]);
        if (!t.channel_names.empty()) names.push_back(t.channel_names[subset[i]]);
    }
    return Trial(std::move(data), t.fs, std::move(names));
}

inline SubjectData load_partition(const DatasetManifest& m,
                                  const std::filesystem::path& base,
                                  const std::string& subject_id,
                                  const std::string& trial_file,
                                  const std::string& label_file) {
    std::vector<Trial> trials =
        read_trials_f64(base / trial_file, m.channels, m.samples, m.fs, m.channel_names);
    const std::vector<Label> labels = read_labels(base / label_file);
    if (labels.size() != trials.size())
        throw FormatError("subject " + subject_id + ": " + trial_file + " holds "
                          + std::to_string(trials.size()) + " trials but " + label_file
                          + " holds " + std::to_string(labels.size()) + " labels");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (std::find(m.classes.begin(), m.classes.end(), labels[i]) == m.classes.end())
            throw FormatError("label file " + label_file + ": line " + std::to_string(i + 1)
                              + " has label " + std::to_string(labels[i])
                              + " outside the declared alphabet");
    for (Trial& t : trials) {
        t = apply_channel_subset(t, m.channel_subset);
        if (m.bandpass) t = butterworth_bandpass(t, *m.bandpass);
    }
    return make_subject_data(subject_id, std::move(trials), labels, m.estimator);
}

} // namespace detail

/// Loads a dataset: trials read, channel subset applied, bandpass
/// applied per manifest, covariances computed with the declared
/// estimator. Ordering is exactly the manifest/subject file order.
inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in)
        throw IoError("missing manifest: " + manifest_path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest " + manifest_path.string() + ": " + e.what());
    }
    const DatasetManifest m = parse_manifest(j);
    const std::filesystem::path base = manifest_path.parent_path();

    Dataset ds;
    ds.name = m.name;
    ds.fs = m.fs;
    ds.classes = m.classes;
    ds.estimator = m.estimator;
    for (const ManifestSubject& s : m.subjects)
        ds.subjects.push_back(SubjectSplit{
            detail::load_partition(m, base, s.subject_id, s.train_file, s.train_labels),
            detail::load_partition(m, base, s.subject_id, s.test_file, s.test_labels)});
    return ds;
}

/// Writes a dataset in the container format. Trials must share one
/// C x T shape.
inline std::filesystem::path save_dataset(const Dataset& ds,
                                          const std::filesystem::path& dir) {
    if (ds.subjects.empty() || ds.subjects[0].train.trials.empty())
        throw InvalidInput("save_dataset: empty dataset");
    const Trial& first = ds.subjects[0].train.trials[0];
    DatasetManifest m;
    m.name = ds.name;
    m.fs = ds.fs;
    m.channels = first.channels();
    m.samples = first.samples();
    m.classes = ds.classes;
    m.estimator = ds.estimator;

    std::filesystem::create_directories(dir);
    for (const SubjectSplit& subj : ds.subjects) {
        for (const SubjectData* part : {&subj.train, &subj.test})
            for (const Trial& t : part->trials)
                if (t.channels() != m.channels || t.samples() != m.samples)
                    throw InvalidInput("save_dataset: trials of subject " + part->subject_id
                                       + " do not share the manifest C x T shape");
        const std::string id = subj.train.subject_id;
        ManifestSubject ms{id, id + "_train.f64", id + "_test.f64", id + "_train.labels",
                           id + "_test.labels"};
        write_trials_f64(dir / ms.train_file, subj.train.trials);
        write_trials_f64(dir / ms.test_file, subj.test.trials);
        write_labels(dir / ms.train_labels, subj.train.labels);
        write_labels(dir / ms.test_labels, subj.test.labels);
        m.subjects.push_back(std::move(ms));
    }
    const std::filesystem::path manifest_path = dir / "manifest.json";
    std::ofstream out(manifest_path);
    if (!out)
        throw IoError("cannot write manifest: " + manifest_path.string());
    out << manifest_to_json(m).dump(2) << '\n';
    return manifest_path;
}

// ---------------------------------------------------------------------------
// stratified subsampling

/// Keeps ceil(p * N_c) trials per class, chosen by a seeded shuffle,
/// in their original relative order. p = 1 is the identity.
inline SubjectData subsample_training(const SubjectData& subject, double fraction,
                                      std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw InvalidInput("subsample_training: fraction must lie in (0, 1]");
    Rng rng(mix_seed(seed, 0x5ab5a));
    std::vector<std::size_t> keep;
    for (Label c : subject.alphabet()) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < subject.labels.size(); ++i)
            if (subject.labels[i] == c) idx.push_back(i);
        const std::size_t take =
            static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(idx.size())));
        if (take < 2)
            throw DegenerateInput("subsample_training: fraction "
                                  + std::to_string(fraction) + " leaves class "
                                  + std::to_string(c) + " with fewer than 2 trials");
        rng.shuffle(idx);
        keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(keep.begin(), keep.end());

    SubjectData out;
    out.subject_id = subject.subject_id;
    for (std::size_t i : keep) {
        out.trials.push_back(subject.trials[i]);
        out.labels.push_back(subject.labels[i]);
        out.covariances.push_back(subject.covariances[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// synthetic generator

/// Linear mixing model: per subject, observation = (base mixing +
/// perturbation) x bandlimited latent sources with class-dependent
/// variances, plus sensor noise. Everything flows from the seed.
struct SynthConfig {
    int n_subjects = 6;
    int n_classes = 2;
    int channels = 8;
    int samples = 256;
    double fs = 250.0;
    int trials_per_class = 40;
    int test_trials_per_class = 0; // 0 -> same as trials_per_class
    /// n_classes rows, one variance per latent source; empty selects a
    /// default with one boosted and one damped latent per class.
    std::vector<std::vector<double>> source_variance_profiles;
    double mixing_perturbation_scale = 0.1;
    double scale_jitter = 0.0;
    double noise_level = 0.05;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_subjects < 1 || n_classes < 2 || channels < 2 || samples < 8
            || trials_per_class < 1 || test_trials_per_class < 0)
            throw ConfigError("synth: counts out of range");
        if (fs <= 0.0 || noise_level < 0.0 || mixing_perturbation_scale < 0.0
            || scale_jitter < 0.0)
            throw ConfigError("synth: negative scale parameter");
        if (!source_variance_profiles.empty()) {
            if (static_cast<int>(source_variance_profiles.size()) != n_classes)
                throw ConfigError("synth: need one variance profile per class");
            const std::size_t latents = source_variance_profiles[0].size();
            for (const auto& row : source_variance_profiles) {
                if (row.size() != latents || row.empty())
                    throw ConfigError("synth: ragged variance profiles");
                for (double v : row)
                    if (!(v > 0.0))
                        throw ConfigError("synth: variances must be positive");
            }
            if (static_cast<int>(latents) > channels)
                throw ConfigError("synth: more latent sources than channels");
        }
    }
};

namespace detail {

inline std::vector<std::vector<double>> default_profiles(int n_classes, int n_latent) {
    std::vector<std::vector<double>> profiles(n_classes,
                                              std::vector<double>(n_latent, 1.0));
    for (int c = 0; c < n_classes; ++c) {
        profiles[c][c % n_latent] = 2.0;
        profiles[c][(c + 1) % n_latent] = 0.5;
    }
    return profiles;
}

} // namespace detail

inline Dataset synth_generate(const SynthConfig& config) {
    config.validate();
    const auto profiles =
        config.source_variance_profiles.empty()
            ? detail::default_profiles(config.n_classes, config.channels)
            : config.source_variance_profiles;
    const int n_latent = static_cast<int>(profiles[0].size());
    const int test_count = config.test_trials_per_class > 0 ? config.test_trials_per_class
                                                            : config.trials_per_class;

    Rng rng(mix_seed(config.seed, 0x9a7e));

    // shared base mixing with orthonormal columns
    Eigen::MatrixXd g(config.channels, n_latent);
    for (int i = 0; i < config.channels; ++i)
        for (int j = 0; j < n_latent; ++j) g(i, j) = rng.normal();
    const Eigen::MatrixXd base_mixing =
        Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ()
        * Eigen::MatrixXd::Identity(config.channels, n_latent);

    // bandlimited latents: white noise through the default band scaled
    // to the sampling rate (8-30 Hz at fs = 250)
    BandpassSpec band;
    band.low_hz = 0.032 * config.fs;
    band.high_hz = 0.12 * config.fs;
    band.order = 4;

    Dataset ds;
    ds.name = "synth";
    ds.fs = config.fs;
    for (int c = 1; c <= config.n_classes; ++c) ds.classes.push_back(c);
    ds.estimator = CovarianceEstimator::Plain;

    for (int s = 0; s < config.n_subjects; ++s) {
        Eigen::MatrixXd mixing = base_mixing;
        for (int i = 0; i < config.channels; ++i)
            for (int j = 0; j < n_latent; ++j)
                mixing(i, j) += config.mixing_perturbation_scale * rng.normal()
                                / std::sqrt(static_cast<double>(config.channels));
        mixing *= 1.0 + config.scale_jitter * rng.uniform(-1.0, 1.0);

        auto gen_partition = [&](int per_class) {
            std::vector<Trial> trials;
            std::vector<Label> labels;
            for (int c = 1; c <= config.n_classes; ++c) {
                for (int k = 0; k < per_class; ++k) {
                    Eigen::MatrixXd latents(n_latent, config.samples);
                    for (int l = 0; l < n_latent; ++l)
                        for (int j = 0; j < config.samples; ++j)
                            latents(l, j) = rng.normal();
                    Trial raw(std::move(latents), config.fs);
                    Trial filtered = butterworth_bandpass(raw, band);
                    for (int l = 0; l < n_latent; ++l) {
                        const double rms = std::sqrt(
                            filtered.data.row(l).squaredNorm() / config.samples);
                        filtered.data.row(l) *=
                            std::sqrt(profiles[c - 1][l]) / (rms > 0.0 ? rms : 1.0);
                    }
                    Eigen::MatrixXd x = mixing * filtered.data;
                    if (config.noise_level > 0.0)
                        for (int i = 0; i < config.channels; ++i)
                            for (int j = 0; j < config.samples; ++j)
                                x(i, j) += config.noise_level * rng.normal();
                    trials.emplace_back(std::move(x), config.fs);
                    labels.push_back(c);
                }
            }
            return std::pair{std::move(trials), std::move(labels)};
        };

        char id[16];
        std::snprintf(id, sizeof(id), "s%02d", s + 1);
        auto [train_trials, train_labels] = gen_partition(config.trials_per_class);
        auto [test_trials, test_labels] = gen_partition(test_count);
        ds.subjects.push_back(SubjectSplit{
            make_subject_data(id, std::move(train_trials), std::move(train_labels),
                              ds.estimator),
            make_subject_data(id, std::move(test_trials), std::move(test_labels),
                              ds.estimator)});
    }
    return ds;
}

} // namespace rtcsp
