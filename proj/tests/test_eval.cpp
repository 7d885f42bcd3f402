#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rtcsp/eval.hpp"
#include "test_util.hpp"

using namespace rtcsp;

namespace {

SynthConfig eval_config(std::uint64_t seed, int n_subjects = 3, int trials_per_class = 12) {
    SynthConfig cfg;
    cfg.n_subjects = n_subjects;
    cfg.n_classes = 2;
    cfg.channels = 6;
    cfg.samples = 200;
    cfg.trials_per_class = trials_per_class;
    cfg.test_trials_per_class = 10;
    cfg.mixing_perturbation_scale = 0.08;
    cfg.noise_level = 0.05;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("evaluate_methods reaches perfect accuracy on separable data") {
    SynthConfig cfg = eval_config(801, 2, 20);
    cfg.noise_level = 0.0;
    cfg.mixing_perturbation_scale = 0.02;
    cfg.source_variance_profiles = {{4.0, 1.0, 1.0, 1.0, 1.0, 1.0},
                                    {1.0, 4.0, 1.0, 1.0, 1.0, 1.0}};
    const Dataset ds = synth_generate(cfg);
    const AccuracyTable table =
        evaluate_methods(ds, {make_method(Strategy::CspBaseline, 2)});
    for (const auto& row : table.cells) {
        REQUIRE(row[0].ok);
        CHECK(row[0].accuracy_pct == 100.0);
    }
}

TEST_CASE("accuracy table mean column equals the mean of subject cells") {
    const Dataset ds = synth_generate(eval_config(802));
    const AccuracyTable table = evaluate_methods(
        ds, {make_method(Strategy::CspBaseline, 2), make_method(Strategy::Ssf, 2)});
    const std::vector<double> means = table.column_means();
    REQUIRE(means.size() == 2);
    for (std::size_t m = 0; m < 2; ++m) {
        double sum = 0.0;
        for (const auto& row : table.cells) sum += row[m].accuracy_pct;
        CHECK(means[m] == Catch::Approx(sum / table.cells.size()).margin(1e-9));
    }
}

TEST_CASE("evaluation results are independent of the thread count") {
    const Dataset ds = synth_generate(eval_config(803));
    const std::vector<Method> methods{make_method(Strategy::CspBaseline, 2),
                                      make_method(Strategy::Ssf, 2),
                                      make_method(Strategy::Ensemble, 2)};
    const AccuracyTable one = evaluate_methods(ds, methods, 1);
    const AccuracyTable four = evaluate_methods(ds, methods, 4);
    for (std::size_t t = 0; t < one.cells.size(); ++t)
        for (std::size_t m = 0; m < methods.size(); ++m) {
            CHECK(one.cells[t][m].ok == four.cells[t][m].ok);
            CHECK(one.cells[t][m].accuracy_pct == four.cells[t][m].accuracy_pct);
        }
}

TEST_CASE("shuffled training labels keep every method at chance level") {
    // aggregate over seeds; binomial 95% band around 1/2
    const std::vector<Method> methods{make_method(Strategy::CspBaseline, 2),
                                      make_method(Strategy::Ssf, 2)};
    std::vector<int> correct(methods.size(), 0);
    int total = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Dataset ds = synth_generate(eval_config(900 + seed));
        for (auto& subj : ds.subjects) subj.train = shuffle_labels(subj.train, seed);
        const AccuracyTable table = evaluate_methods(ds, methods);
        for (const auto& row : table.cells)
            for (std::size_t m = 0; m < methods.size(); ++m) {
                REQUIRE(row[m].ok);
                correct[m] += row[m].n_correct;
                if (m == 0) total += row[m].n_total;
            }
    }
    const double band = 1.96 * std::sqrt(0.25 / total);
    for (std::size_t m = 0; m < methods.size(); ++m) {
        const double acc = static_cast<double>(correct[m]) / total;
        CHECK(acc > 0.5 - band - 0.08); // small slack over the pure binomial band:
        CHECK(acc < 0.5 + band + 0.08); // per-seed predictions are correlated
    }
}

TEST_CASE("tune_lambda evaluates the full grid and breaks ties toward smaller lambda") {
    const Dataset ds = synth_generate(eval_config(804, 3, 14));
    std::vector<SubjectData> sources;
    for (std::size_t s = 1; s < ds.subjects.size(); ++s)
        sources.push_back(ds.subjects[s].train);

    LambdaSpec spec;
    spec.mode = LambdaSpec::Mode::TuneKfold;
    spec.k = 7;
    const TuneResult r = tune_lambda(sources, ds.subjects[0].train, spec, 2);
    CHECK(r.grid.size() == 9);
    CHECK(r.mean_error.size() == 9);
    CHECK(r.folds_used == 7);
    // the reported lambda is the grid argmin, smallest on ties
    double best = 1e300;
    double expect = 0.0;
    for (std::size_t i = 0; i < r.grid.size(); ++i)
        if (r.mean_error[i] < best) {
            best = r.mean_error[i];
            expect = r.grid[i];
        }
    CHECK(r.lambda == expect);

    // single-value grid short-circuits
    LambdaSpec single;
    single.grid = {0.3};
    CHECK(tune_lambda(sources, ds.subjects[0].train, single, 2).lambda == 0.3);

    LambdaSpec empty;
    empty.grid = {};
    CHECK_THROWS_AS(tune_lambda(sources, ds.subjects[0].train, empty, 2), InvalidInput);
}

TEST_CASE("tune_lambda loocv runs one fold per trial") {
    SynthConfig cfg = eval_config(805, 2, 6);
    const Dataset ds = synth_generate(cfg);
    std::vector<SubjectData> sources{ds.subjects[1].train};
    LambdaSpec spec;
    spec.mode = LambdaSpec::Mode::TuneLoocv;
    spec.grid = {0.2, 0.8};
    const TuneResult r = tune_lambda(sources, ds.subjects[0].train, spec, 2);
    CHECK(r.folds_used == 12); // 6 per class, every trial its own fold
}

TEST_CASE("tuned lambda prefers sources when the target matches them") {
    // subjects share one mixing (zero shift) and the target is data-
    // poor, so heavier source weight should win the validation and the
    // tuned lambda should land in the upper half of the grid in at
    // least 70% of the seeds
    int upper = 0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        SynthConfig cfg;
        cfg.n_subjects = 4;
        cfg.n_classes = 2;
        cfg.channels = 4;
        cfg.samples = 64;
        cfg.trials_per_class = 30;
        cfg.test_trials_per_class = 2;
        cfg.source_variance_profiles = {{1.3, 1.0, 1.0, 1.0}, {1.0, 1.3, 1.0, 1.0}};
        cfg.mixing_perturbation_scale = 0.0;
        cfg.noise_level = 0.6;
        cfg.seed = 820 + s;
        const Dataset ds = synth_generate(cfg);
        std::vector<SubjectData> sources;
        for (std::size_t i = 1; i < ds.subjects.size(); ++i)
            sources.push_back(ds.subjects[i].train);
        const SubjectData target =
            subsample_training(ds.subjects[0].train, 0.2, 77 + s);
        LambdaSpec spec;
        spec.mode = LambdaSpec::Mode::TuneKfold;
        spec.k = 6;
        const TuneResult r = tune_lambda(sources, target, spec, 1);
        if (r.lambda >= 0.5) ++upper;
    }
    CHECK(upper >= 14);
}

TEST_CASE("moving_average closed forms") {
    CHECK(moving_average({1.0, 5.0, 9.0}, 1) == std::vector<double>{1.0, 5.0, 9.0});
    CHECK(moving_average({3.0, 3.0, 3.0, 3.0}, 3) == std::vector<double>{3.0, 3.0, 3.0, 3.0});
    const std::vector<double> smoothed = moving_average({1.0, 2.0, 3.0, 4.0, 5.0}, 3);
    const std::vector<double> expected{1.5, 2.0, 3.0, 4.0, 4.5};
    REQUIRE(smoothed.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i)
        CHECK(smoothed[i] == Catch::Approx(expected[i]).margin(1e-12));
    CHECK_THROWS_AS(moving_average({1.0, 2.0}, 3), InvalidInput);
    CHECK_THROWS_AS(moving_average({1.0, 2.0}, 0), InvalidInput);

    CHECK(default_smoothing_window(91) == 9);
    CHECK(default_smoothing_window(81) == 8);
    CHECK(default_smoothing_window(3) == 1);
}

TEST_CASE("learning_curve at fraction 1.0 matches evaluate_methods") {
    const Dataset ds = synth_generate(eval_config(806));
    const std::vector<Method> methods{make_method(Strategy::CspBaseline, 2)};
    const AccuracyTable table = evaluate_methods(ds, methods);
    const CurveResult curve = learning_curve(ds, methods, {0.5, 1.0}, 1, 42);
    REQUIRE(curve.fractions_used.size() == 2);
    double expect = 0.0;
    for (const auto& row : table.cells) expect += row[0].accuracy_pct;
    expect /= table.cells.size();
    CHECK(curve.mean_series[0][1] == Catch::Approx(expect).margin(1e-12));
    // rows: fractions x methods x seeds x subjects
    CHECK(curve.rows.size() == 2 * 1 * 1 * ds.subjects.size());
}

TEST_CASE("learning_curve skips degenerate fractions with a warning") {
    const Dataset ds = synth_generate(eval_config(807, 2, 10));
    const std::vector<Method> methods{make_method(Strategy::CspBaseline, 2)};
    const CurveResult curve = learning_curve(ds, methods, {0.05, 0.5, 1.0}, 1, 7);
    CHECK(curve.fractions_skipped == std::vector<double>{0.05});
    CHECK(curve.fractions_used == std::vector<double>{0.5, 1.0});
    CHECK(curve.smoothed_series.size() == 1);

    CHECK_THROWS_AS(learning_curve(ds, methods, {0.5, 0.2}, 1, 7), InvalidInput);
    CHECK_THROWS_AS(learning_curve(ds, methods, {0.5, 1.2}, 1, 7), InvalidInput);
}

TEST_CASE("learning_curve of a planted noise-free dataset is nondecreasing-ish") {
    SynthConfig cfg = eval_config(808, 2, 30);
    cfg.noise_level = 0.0;
    cfg.mixing_perturbation_scale = 0.0;
    cfg.source_variance_profiles = {{3.0, 1.0, 1.0, 1.0, 1.0, 1.0},
                                    {1.0, 3.0, 1.0, 1.0, 1.0, 1.0}};
    const Dataset ds = synth_generate(cfg);
    const CurveResult curve = learning_curve(
        ds, {make_method(Strategy::CspBaseline, 2)}, {0.2, 0.6, 1.0}, 4, 3);
    REQUIRE(curve.mean_series.size() == 1);
    // strongly separable: accuracy near ceiling everywhere, and the
    // full-data point is at least as good as the smallest fraction
    CHECK(curve.mean_series[0].back() >= curve.mean_series[0].front() - 1.0);
    CHECK(curve.mean_series[0].back() > 95.0);
}

TEST_CASE("mvr_trial closed forms") {
    SpatialFilter f;
    f.n_pairs = 1;
    f.W = Eigen::MatrixXd::Identity(2, 2);
    f.eigenvalues = Eigen::Vector2d(0.8, 0.2);

    Eigen::MatrixXd data(2, 100);
    Rng rng(809);
    for (int j = 0; j < 100; ++j) {
        data(0, j) = 2.0 * rng.normal(); // variance 4
        data(1, j) = rng.normal();       // variance 1
    }
    const Trial trial(data, 100.0);
    const double v1 = data.row(0).squaredNorm() / 100.0;
    const double v2 = data.row(1).squaredNorm() / 100.0;
    CHECK(mvr_trial(f, trial) == Catch::Approx(std::max(v1, v2) / std::min(v1, v2)));

    // equal variances -> ratio 1 (minimum possible)
    Eigen::MatrixXd eq(2, 4);
    eq << 1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0;
    CHECK(mvr_trial(f, Trial(eq, 100.0)) == Catch::Approx(1.0));

    // scale invariance
    CHECK(mvr_trial(f, Trial(3.7 * data, 100.0)) == Catch::Approx(mvr_trial(f, trial)));

    SpatialFilter wide = f;
    wide.n_pairs = 2;
    wide.W = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(mvr_trial(wide, trial), InvalidInput);
}

TEST_CASE("paired t and sign test edge cases") {
    CHECK(paired_t_pvalue_greater({0.0, 0.0, 0.0, 0.0}) == 0.5);
    CHECK(paired_t_pvalue_greater({1.0, 1.0, 1.0}) == 0.0);
    CHECK(paired_t_pvalue_greater({1.0, 1.2, 0.9, 1.1}) < 1e-3);
    CHECK(paired_t_pvalue_greater({-1.0, -1.2, -0.9, -1.1}) > 0.999);
    // symmetric diffs -> p around 0.5
    const double p = paired_t_pvalue_greater({0.5, -0.5, 0.4, -0.4});
    CHECK(p > 0.3);
    CHECK(p < 0.7);

    CHECK(sign_test_pvalue_greater({0.0, 0.0}) == 0.5);
    CHECK(sign_test_pvalue_greater({1.0, 2.0, 3.0, 4.0}) == Catch::Approx(1.0 / 16.0));
    CHECK(sign_test_pvalue_greater({-1.0, -2.0}) == 1.0);
}

TEST_CASE("mvr_experiment null case: zero effect when sources are ignored") {
    // single-subject dataset: RTCSP-SSF with zero sources equals the
    // baseline, so the paired diffs are identically zero
    const Dataset ds = synth_generate(eval_config(810, 1, 14));
    const MvrReport report = mvr_experiment(ds, 0.6, 6, 11);
    CHECK(report.runs_failed == 0);
    REQUIRE(report.base_values.size() == 6);
    for (std::size_t r = 0; r < report.base_values.size(); ++r)
        CHECK(report.base_values[r] == Catch::Approx(report.rt_values[r]).margin(1e-12));
    CHECK(report.p_value >= 0.5);
    CHECK_FALSE(report.significant);
}

TEST_CASE("mvr_experiment bookkeeping and reproducibility") {
    const Dataset ds = synth_generate(eval_config(811, 3, 14));
    const MvrReport a = mvr_experiment(ds, 0.5, 5, 13);
    const MvrReport b = mvr_experiment(ds, 0.5, 5, 13, 0.05 / 9.0, {}, 3);
    CHECK(a.base_values.size() + a.runs_failed == 5);
    REQUIRE(a.base_values.size() == b.base_values.size());
    for (std::size_t i = 0; i < a.base_values.size(); ++i) {
        CHECK(a.base_values[i] == b.base_values[i]); // thread-count independent
        CHECK(a.rt_values[i] == b.rt_values[i]);
        CHECK(a.base_values[i] >= 1.0); // MVR is a max/min ratio
        CHECK(a.rt_values[i] >= 1.0);
    }
    CHECK(a.alpha == Catch::Approx(0.05 / 9.0));

    // multiclass datasets are rejected
    SynthConfig cfg = eval_config(812, 2, 8);
    cfg.n_classes = 3;
    const Dataset multi = synth_generate(cfg);
    CHECK_THROWS_AS(mvr_experiment(multi, 0.5, 4, 1), InvalidInput);
}

TEST_CASE("mvr averaging order matches a hand-built two-subject fixture") {
    // two subjects; compute MVR(W, S_k) per subject by hand, then the
    // across-subject average, and compare with the report means
    const Dataset ds = synth_generate(eval_config(813, 2, 14));
    const double fraction = 0.8;
    const std::uint64_t seed = 21;
    const MvrReport report = mvr_experiment(ds, fraction, 2, seed);

    // reproduce run 0 by hand
    double base_sum = 0.0, rt_sum = 0.0;
    for (std::size_t t = 0; t < 2; ++t) {
        std::vector<SubjectData> sources{ds.subjects[1 - t].train};
        const SubjectData sub =
            subsample_training(ds.subjects[t].train, fraction, mix_seed(seed, 0, t));
        const SpatialFilter w_base = csp_baseline(sub, 1).members[0].tasks[0].filter;
        const SpatialFilter w_rt = rtcsp_ssf(sources, sub, 1).members[0].tasks[0].filter;
        double mb = 0.0, mr = 0.0;
        for (const Trial& trial : ds.subjects[t].test.trials) {
            mb += mvr_trial(w_base, trial);
            mr += mvr_trial(w_rt, trial);
        }
        base_sum += mb / ds.subjects[t].test.trials.size();
        rt_sum += mr / ds.subjects[t].test.trials.size();
    }
    CHECK(report.base_values[0] == Catch::Approx(base_sum / 2.0).margin(1e-12));
    CHECK(report.rt_values[0] == Catch::Approx(rt_sum / 2.0).margin(1e-12));
}
