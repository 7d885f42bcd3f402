#pragma once

// Experiment harness: per-subject accuracy tables (each subject in
// turn is the target, all remaining subjects are full sources), lambda
// tuning by cross-validation on the target's training data, limited-
// training-data learning curves with moving-average smoothing, and the
// mean-variance-ratio (MVR) generalization study with a one-sided
// paired test at alpha = 0.05/9.

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "rtcsp/data_io.hpp"
#include "rtcsp/errors.hpp"
#include "rtcsp/transfer.hpp"

namespace rtcsp {

namespace detail {

/// Runs f(0..n-1) on up to `threads` workers. Tasks write to
/// preallocated slots, so results do not depend on the thread count.
template <typename F>
void parallel_for(int n, int threads, F&& f) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) f(i);
        });
    for (auto& t : pool) t.join();
}

} // namespace detail

// ---------------------------------------------------------------------------
// methods

struct LambdaSpec {
    enum class Mode { Fixed, TuneKfold, TuneLoocv };
    Mode mode = Mode::Fixed;
    double fixed = 0.5;
    int k = 10;
    std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
};

struct Method {
    std::string name;
    std::function<TransferModel(const std::vector<SubjectData>&, const SubjectData&)> train;
};

struct TuneResult {
    double lambda = 0.0;
    std::vector<double> grid;
    std::vector<double> mean_error; // aligned with grid
    int folds_used = 0;
};

/// Picks the lambda with minimal mean validation error over
/// cross-validation splits of the target's training data; sources are
/// used in full on every split. Ties go to the smaller lambda.
inline TuneResult tune_lambda(const std::vector<SubjectData>& sources,
                              const SubjectData& target, const LambdaSpec& spec, int n_pairs,
                              const TransferOptions& opt = {}) {
    if (spec.grid.empty())
        throw InvalidInput("tune_lambda: empty grid");
    TuneResult result;
    result.grid = spec.grid;
    std::sort(result.grid.begin(), result.grid.end());
    if (result.grid.size() == 1) {
        result.lambda = result.grid[0];
        result.mean_error.assign(1, 0.0);
        return result;
    }

    const int m = static_cast<int>(target.trials.size());
    const int k = spec.mode == LambdaSpec::Mode::TuneLoocv ? m : std::min(spec.k, m);
    if (k < 2)
        throw InvalidInput("tune_lambda: target training set too small for the scheme");

    // fold of trial i = i mod k; build the per-fold training subsets
    // once, skipping folds whose training side loses a class
    struct Fold {
        SubjectData train;
        std::vector<std::size_t> validation;
    };
    std::vector<Fold> folds;
    for (int fold = 0; fold < k; ++fold) {
        Fold f;
        f.train.subject_id = target.subject_id;
        for (std::size_t i = 0; i < target.trials.size(); ++i) {
            if (static_cast<int>(i % k) == fold) {
                f.validation.push_back(i);
            } else {
                f.train.trials.push_back(target.trials[i]);
                f.train.labels.push_back(target.labels[i]);
                f.train.covariances.push_back(target.covariances[i]);
            }
        }
        if (f.validation.empty()) continue;
        if (distinct_labels(f.train.labels).size() != target.alphabet().size()) {
            std::cerr << "[rtcsp] warning: tune_lambda skipping fold " << fold
                      << " (class missing from the training side)\n";
            continue;
        }
        folds.push_back(std::move(f));
    }
    if (folds.empty())
        throw InvalidInput("tune_lambda: every fold was skipped");
    result.folds_used = static_cast<int>(folds.size());

    result.mean_error.reserve(result.grid.size());
    double best_err = std::numeric_limits<double>::infinity();
    for (double lambda : result.grid) {
        double err_sum = 0.0;
        for (const Fold& f : folds) {
            const TransferModel model = composite_csp(sources, f.train, lambda, n_pairs, opt);
            int wrong = 0;
            for (std::size_t i : f.validation)
                if (predict(model, target.trials[i]).label != target.labels[i]) ++wrong;
            err_sum += static_cast<double>(wrong) / f.validation.size();
        }
        const double mean_err = err_sum / folds.size();
        result.mean_error.push_back(mean_err);
        if (mean_err < best_err) {
            best_err = mean_err;
            result.lambda = lambda;
        }
    }
    return result;
}

inline Method make_method(Strategy strategy, int n_pairs, const TransferOptions& opt = {},
                          const LambdaSpec& lambda = {}) {
    Method m;
    m.name = strategy_name(strategy);
    switch (strategy) {
        case Strategy::CspBaseline:
            m.train = [n_pairs, opt](const std::vector<SubjectData>&, const SubjectData& t) {
                return csp_baseline(t, n_pairs, opt);
            };
            break;
        case Strategy::Ssf:
            m.train = [n_pairs, opt](const std::vector<SubjectData>& s, const SubjectData& t) {
                return rtcsp_ssf(s, t, n_pairs, opt);
            };
            break;
        case Strategy::Combine:
            m.train = [n_pairs, opt](const std::vector<SubjectData>& s, const SubjectData& t) {
                return rtcsp_combine(s, t, n_pairs, opt);
            };
            break;
        case Strategy::Ensemble:
            m.train = [n_pairs, opt](const std::vector<SubjectData>& s, const SubjectData& t) {
                return rtcsp_ensemble(s, t, n_pairs, opt);
            };
            break;
        case Strategy::CompositeCsp:
            m.train = [n_pairs, opt, lambda](const std::vector<SubjectData>& s,
                                             const SubjectData& t) {
                double value = lambda.fixed;
                if (lambda.mode != LambdaSpec::Mode::Fixed)
                    value = tune_lambda(s, t, lambda, n_pairs, opt).lambda;
                return composite_csp(s, t, value, n_pairs, opt);
            };
            break;
    }
    return m;
}

// ---------------------------------------------------------------------------
// accuracy tables

struct AccuracyCell {
    bool ok = false;
    double accuracy_pct = 0.0;
    int n_correct = 0;
    int n_total = 0;
    std::string error;
};

struct AccuracyTable {
    std::string dataset;
    std::vector<std::string> subject_ids;
    std::vector<std::string> method_names;
    std::vector<std::vector<AccuracyCell>> cells; // [subject][method]

    std::vector<double> column_means() const {
        std::vector<double> means(method_names.size(), 0.0);
        for (std::size_t m = 0; m < method_names.size(); ++m) {
            double sum = 0.0;
            int n = 0;
            for (const auto& row : cells)
                if (row[m].ok) {
                    sum += row[m].accuracy_pct;
                    ++n;
                }
            means[m] = n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
        }
        return means;
    }

    bool all_failed() const {
        for (const auto& row : cells)
            for (const auto& cell : row)
                if (cell.ok) return false;
        return true;
    }
};

inline AccuracyCell score_model(const TransferModel& model, const SubjectData& test) {
    AccuracyCell cell;
    cell.n_total = static_cast<int>(test.trials.size());
    for (std::size_t i = 0; i < test.trials.size(); ++i)
        if (predict(model, test.trials[i]).label == test.labels[i]) ++cell.n_correct;
    cell.accuracy_pct = 100.0 * cell.n_correct / std::max(1, cell.n_total);
    cell.ok = true;
    return cell;
}

/// Evaluates one method over every subject-as-target; a failing cell
/// is recorded instead of aborting the table.
inline std::vector<AccuracyCell>
evaluate_method(const Method& method, const Dataset& dataset,
                const std::function<SubjectData(const SubjectData&, std::size_t)>&
                    target_transform = {}) {
    std::vector<AccuracyCell> column(dataset.subjects.size());
    for (std::size_t t = 0; t < dataset.subjects.size(); ++t) {
        std::vector<SubjectData> sources;
        for (std::size_t s = 0; s < dataset.subjects.size(); ++s)
            if (s != t) sources.push_back(dataset.subjects[s].train);
        try {
            const SubjectData target = target_transform
                                           ? target_transform(dataset.subjects[t].train, t)
                                           : dataset.subjects[t].train;
            column[t] = score_model(method.train(sources, target), dataset.subjects[t].test);
        } catch (const Error& e) {
            column[t].ok = false;
            column[t].error = e.what();
        }
    }
    return column;
}

inline AccuracyTable evaluate_methods(const Dataset& dataset,
                                      const std::vector<Method>& methods, int threads = 1) {
    AccuracyTable table;
    table.dataset = dataset.name;
    for (const auto& subj : dataset.subjects) table.subject_ids.push_back(subj.train.subject_id);
    for (const auto& m : methods) table.method_names.push_back(m.name);
    table.cells.assign(dataset.subjects.size(),
                       std::vector<AccuracyCell>(methods.size()));
    detail::parallel_for(static_cast<int>(methods.size()), threads, [&](int m) {
        const std::vector<AccuracyCell> column = evaluate_method(methods[m], dataset);
        for (std::size_t t = 0; t < column.size(); ++t) table.cells[t][m] = column[t];
    });
    return table;
}

/// Training labels permuted by a seeded shuffle; the leak guard trains
/// on these while testing against the true test labels.
inline SubjectData shuffle_labels(const SubjectData& subject, std::uint64_t seed) {
    SubjectData out = subject;
    Rng rng(mix_seed(seed, 0x5417));
    rng.shuffle(out.labels);
    return out;
}

// ---------------------------------------------------------------------------
// learning curves

/// Centered moving average; edge windows shrink to the available
/// samples instead of padding.
inline std::vector<double> moving_average(const std::vector<double>& series, int window) {
    if (window < 1)
        throw InvalidInput("moving_average: window must be >= 1");
    if (window > static_cast<int>(series.size()))
        throw InvalidInput("moving_average: window exceeds series length");
    std::vector<double> out(series.size());
    const int lo_off = (window - 1) / 2;
    const int hi_off = window / 2;
    for (int i = 0; i < static_cast<int>(series.size()); ++i) {
        const int lo = std::max(0, i - lo_off);
        const int hi = std::min(static_cast<int>(series.size()) - 1, i + hi_off);
        double sum = 0.0;
        for (int j = lo; j <= hi; ++j) sum += series[j];
        out[i] = sum / (hi - lo + 1);
    }
    return out;
}

inline int default_smoothing_window(std::size_t length) {
    return std::max(1, static_cast<int>(std::lround(static_cast<double>(length) / 10.0)));
}

struct CurveRow {
    double fraction;
    std::string method;
    int seed_index;
    std::string subject_id;
    double accuracy_pct;
};

struct CurveResult {
    std::vector<std::string> methods;
    std::vector<double> fractions_used;    // fractions that were not skipped
    std::vector<double> fractions_skipped;
    std::vector<CurveRow> rows;            // one per (fraction, method, seed, subject)
    // mean over subjects and seeds: [method][fraction index]
    std::vector<std::vector<double>> mean_series;
    std::vector<std::vector<double>> smoothed_series;
    int smoothing_window = 1;
};

/// Limited-training-data curves: per fraction, each target's training
/// partition is stratifiedly subsampled (sources stay complete), all
/// methods are evaluated, and accuracies are averaged over subjects
/// and seeds. Fractions that leave a class with fewer trials than a
/// method can use are skipped with a warning.
inline CurveResult learning_curve(const Dataset& dataset, const std::vector<Method>& methods,
                                  const std::vector<double>& fractions, int n_seeds,
                                  std::uint64_t base_seed, int smoothing_window = 0,
                                  int threads = 1) {
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (!(fractions[i] > 0.0 && fractions[i] <= 1.0))
            throw InvalidInput("learning_curve: fractions must lie in (0, 1]");
        if (i > 0 && fractions[i] <= fractions[i - 1])
            throw InvalidInput("learning_curve: fractions must be ascending");
    }
    if (n_seeds < 1)
        throw InvalidInput("learning_curve: need at least one seed");

    CurveResult result;
    for (const Method& m : methods) result.methods.push_back(m.name);

    const int n_subjects = static_cast<int>(dataset.subjects.size());
    for (double fraction : fractions) {
        struct Eval {
            std::vector<double> acc; // per method
            bool degenerate = false;
            std::string error;
        };
        std::vector<Eval> evals(static_cast<std::size_t>(n_seeds) * n_subjects);
        detail::parallel_for(
            static_cast<int>(evals.size()), threads, [&](int slot) {
                const int seed_idx = slot / n_subjects;
                const std::size_t t = static_cast<std::size_t>(slot % n_subjects);
                Eval& ev = evals[static_cast<std::size_t>(slot)];
                std::vector<SubjectData> sources;
                for (std::size_t s = 0; s < dataset.subjects.size(); ++s)
                    if (s != t) sources.push_back(dataset.subjects[s].train);
                try {
                    const SubjectData sub = subsample_training(
                        dataset.subjects[t].train, fraction,
                        mix_seed(base_seed, static_cast<std::uint64_t>(seed_idx), t));
                    for (const Method& m : methods)
                        ev.acc.push_back(
                            score_model(m.train(sources, sub), dataset.subjects[t].test)
                                .accuracy_pct);
                } catch (const DegenerateInput& e) {
                    ev.degenerate = true;
                    ev.error = e.what();
                }
            });

        const auto degenerate =
            std::find_if(evals.begin(), evals.end(), [](const Eval& e) { return e.degenerate; });
        if (degenerate != evals.end()) {
            std::cerr << "[rtcsp] warning: skipping fraction " << fraction << " ("
                      << degenerate->error << ")\n";
            result.fractions_skipped.push_back(fraction);
            continue;
        }

        result.fractions_used.push_back(fraction);
        for (std::size_t m = 0; m < methods.size(); ++m) {
            if (result.mean_series.size() <= m) result.mean_series.emplace_back();
            double sum = 0.0;
            for (int slot = 0; slot < static_cast<int>(evals.size()); ++slot) {
                const int seed_idx = slot / n_subjects;
                const std::size_t t = static_cast<std::size_t>(slot % n_subjects);
                const double acc = evals[static_cast<std::size_t>(slot)].acc[m];
                sum += acc;
                result.rows.push_back(CurveRow{fraction, methods[m].name, seed_idx,
                                               dataset.subjects[t].train.subject_id, acc});
            }
            result.mean_series[m].push_back(sum / evals.size());
        }
    }

    if (!result.fractions_used.empty()) {
        result.smoothing_window = smoothing_window > 0
                                      ? smoothing_window
                                      : default_smoothing_window(result.fractions_used.size());
        result.smoothing_window =
            std::min(result.smoothing_window, static_cast<int>(result.fractions_used.size()));
        for (const auto& series : result.mean_series)
            result.smoothed_series.push_back(moving_average(series, result.smoothing_window));
    }
    return result;
}

// ---------------------------------------------------------------------------
// mean-variance-ratio experiment

/// max/min of the two projected channel variances of a single trial
/// under a one-pair filter.
inline double mvr_trial(const SpatialFilter& filter, const Trial& trial) {
    if (filter.n_pairs != 1 || filter.W.cols() != 2)
        throw InvalidInput("mvr_trial: filter must hold exactly one pair");
    if (filter.channels() != trial.channels())
        throw InvalidInput("mvr_trial: filter/trial channel mismatch");
    const Eigen::MatrixXd projected = filter.W.transpose() * trial.data;
    const double v1 = projected.row(0).squaredNorm() / trial.samples();
    const double v2 = projected.row(1).squaredNorm() / trial.samples();
    if (!(v1 > 0.0) || !(v2 > 0.0))
        throw DegenerateInput("mvr_trial: zero projected variance");
    return std::max(v1, v2) / std::min(v1, v2);
}

/// One-sided paired t-test of diff > 0 on run-level differences.
inline double paired_t_pvalue_greater(const std::vector<double>& diffs) {
    const int n = static_cast<int>(diffs.size());
    if (n < 2)
        throw InvalidInput("paired_t_pvalue_greater: need at least 2 paired values");
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= n;
    double var = 0.0;
    for (double d : diffs) var += (d - mean) * (d - mean);
    var /= (n - 1);
    if (var == 0.0) return mean > 0.0 ? 0.0 : 0.5;
    const double t = mean / std::sqrt(var / n);
    const boost::math::students_t dist(n - 1);
    return boost::math::cdf(boost::math::complement(dist, t));
}

/// Sign test of diff > 0: P(Bin(#nonzero, 1/2) >= #positive).
inline double sign_test_pvalue_greater(const std::vector<double>& diffs) {
    int nonzero = 0, positive = 0;
    for (double d : diffs) {
        if (d != 0.0) ++nonzero;
        if (d > 0.0) ++positive;
    }
    if (nonzero == 0) return 0.5;
    const boost::math::binomial dist(nonzero, 0.5);
    if (positive == 0) return 1.0;
    return boost::math::cdf(boost::math::complement(dist, positive - 1));
}

struct MvrReport {
    double fraction = 0.0;
    int runs_requested = 0;
    int runs_failed = 0;
    std::vector<double> base_values; // MVR(W_base) per successful run
    std::vector<double> rt_values;   // MVR(W_RT) per successful run
    double mean_base = 0.0, mean_rt = 0.0;
    double se_base = 0.0, se_rt = 0.0;
    double t_statistic = 0.0;
    double p_value = 1.0;      // one-sided paired t-test, rt > base
    double sign_test_p = 1.0;
    double alpha = 0.05 / 9.0;
    bool significant = false;
};

namespace detail {

inline double stderr_of(const std::vector<double>& v) {
    const int n = static_cast<int>(v.size());
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= (n - 1);
    return std::sqrt(var / n);
}

} // namespace detail

/// MVR study for one training-data fraction: every run subsamples each
/// target's training data (sources stay complete), builds the one-pair
/// baseline and RTCSP-SSF filters, averages per-trial variance ratios
/// over that subject's test trials, then averages across subjects.
/// Requires a two-class dataset.
inline MvrReport mvr_experiment(const Dataset& dataset, double fraction, int runs,
                                std::uint64_t seed, double alpha = 0.05 / 9.0,
                                const TransferOptions& opt = {}, int threads = 1) {
    if (runs < 2)
        throw InvalidInput("mvr_experiment: need at least 2 runs");
    for (const auto& subj : dataset.subjects)
        if (subj.train.alphabet().size() != 2)
            throw InvalidInput("mvr_experiment: requires a two-class dataset (subject "
                               + subj.train.subject_id + ")");

    MvrReport report;
    report.fraction = fraction;
    report.runs_requested = runs;
    report.alpha = alpha;

    struct RunOutcome {
        bool ok = false;
        double base = 0.0, rt = 0.0;
        std::string error;
    };
    std::vector<RunOutcome> outcomes(static_cast<std::size_t>(runs));
    detail::parallel_for(runs, threads, [&](int r) {
        RunOutcome& out = outcomes[static_cast<std::size_t>(r)];
        try {
            double base_sum = 0.0, rt_sum = 0.0;
            for (std::size_t t = 0; t < dataset.subjects.size(); ++t) {
                std::vector<SubjectData> sources;
                for (std::size_t s = 0; s < dataset.subjects.size(); ++s)
                    if (s != t) sources.push_back(dataset.subjects[s].train);
                const SubjectData sub = subsample_training(
                    dataset.subjects[t].train, fraction,
                    mix_seed(seed, static_cast<std::uint64_t>(r), t));
                const SpatialFilter w_base =
                    csp_baseline(sub, 1, opt).members[0].tasks[0].filter;
                const SpatialFilter w_rt =
                    rtcsp_ssf(sources, sub, 1, opt).members[0].tasks[0].filter;
                double base_mvr = 0.0, rt_mvr = 0.0;
                const SubjectData& test = dataset.subjects[t].test;
                for (const Trial& trial : test.trials) {
                    base_mvr += mvr_trial(w_base, trial);
                    rt_mvr += mvr_trial(w_rt, trial);
                }
                base_sum += base_mvr / test.trials.size();
                rt_sum += rt_mvr / test.trials.size();
            }
            out.base = base_sum / dataset.subjects.size();
            out.rt = rt_sum / dataset.subjects.size();
            out.ok = true;
        } catch (const Error& e) {
            out.error = e.what();
        }
    });

    std::vector<double> diffs;
    for (const RunOutcome& out : outcomes) {
        if (!out.ok) {
            ++report.runs_failed;
            continue;
        }
        report.base_values.push_back(out.base);
        report.rt_values.push_back(out.rt);
        diffs.push_back(out.rt - out.base);
    }
    if (diffs.size() < 2)
        throw NumericalFailure("mvr_experiment: fewer than 2 successful runs");

    const int n = static_cast<int>(diffs.size());
    for (double v : report.base_values) report.mean_base += v;
    report.mean_base /= n;
    for (double v : report.rt_values) report.mean_rt += v;
    report.mean_rt /= n;
    report.se_base = detail::stderr_of(report.base_values);
    report.se_rt = detail::stderr_of(report.rt_values);

    double mean_diff = 0.0, var_diff = 0.0;
    for (double d : diffs) mean_diff += d;
    mean_diff /= n;
    for (double d : diffs) var_diff += (d - mean_diff) * (d - mean_diff);
    var_diff /= (n - 1);
    report.t_statistic = var_diff > 0.0 ? mean_diff / std::sqrt(var_diff / n)
                                        : (mean_diff > 0.0 ? 1e300 : 0.0);
    report.p_value = paired_t_pvalue_greater(diffs);
    report.sign_test_p = sign_test_pvalue_greater(diffs);
    report.significant = report.p_value < alpha;
    return report;
}

} // namespace rtcsp
