#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "rtcsp/signal.hpp"
#include "test_util.hpp"

using namespace rtcsp;

namespace {

Trial sinusoid_trial(double freq_hz, double fs, int samples, int channels = 2,
                     double amplitude = 1.0) {
    Eigen::MatrixXd data(channels, samples);
    for (int ch = 0; ch < channels; ++ch)
        for (int n = 0; n < samples; ++n)
            data(ch, n) = amplitude * std::sin(2.0 * M_PI * freq_hz * n / fs + 0.3 * ch);
    return Trial(data, fs);
}

double rms(const Eigen::VectorXd& x) { return std::sqrt(x.squaredNorm() / x.size()); }

} // namespace

TEST_CASE("bandpass keeps a passband sinusoid at full amplitude") {
    const Trial in = sinusoid_trial(20.0, 250.0, 1000);
    const Trial out = butterworth_bandpass(in, BandpassSpec{});
    // interior section, away from any residual edge transients
    const Eigen::VectorXd mid_in = in.data.row(0).segment(100, 800).transpose();
    const Eigen::VectorXd mid_out = out.data.row(0).segment(100, 800).transpose();
    CHECK(rms(mid_out) / rms(mid_in) == Catch::Approx(1.0).margin(0.01));
}

TEST_CASE("bandpass attenuates a stopband sinusoid, matching the designed response") {
    const Trial in = sinusoid_trial(2.0, 250.0, 1000);
    const Trial out = butterworth_bandpass(in, BandpassSpec{});
    const double ratio = rms(out.data.row(0).transpose()) / rms(in.data.row(0).transpose());
    CHECK(ratio < 0.05);

    // oracle: attenuation of the designed transfer function at 2 Hz
    // (zero-phase filtering applies the magnitude twice). The interior,
    // away from edge transients, must sit near that attenuation; 1e-4
    // allows for the transient decay floor.
    const SosFilter f = design_butterworth_bandpass(8.0, 30.0, 5, 250.0);
    const double h2 = f.magnitude_at(2.0, 250.0);
    CHECK(h2 * h2 < 1e-6);
    const double mid_ratio = rms(out.data.row(0).segment(200, 600).transpose())
                             / rms(in.data.row(0).segment(200, 600).transpose());
    CHECK(mid_ratio < 1e-4);
    CHECK(mid_ratio >= h2 * h2 * 0.1);
    CHECK(f.magnitude_at(std::sqrt(8.0 * 30.0), 250.0) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("bandpass removes DC") {
    Eigen::MatrixXd data = Eigen::MatrixXd::Constant(2, 600, 3.5);
    const Trial out = butterworth_bandpass(Trial(data, 250.0), BandpassSpec{});
    CHECK(std::abs(out.data.row(0).mean()) < 1e-6 * 3.5);
}

TEST_CASE("bandpass is linear") {
    Rng rng(201);
    const Trial x(test_util::random_matrix(rng, 3, 400), 250.0);
    const Trial y(test_util::random_matrix(rng, 3, 400), 250.0);
    const double a = 1.7, b = -0.6;
    const Trial combo(a * x.data + b * y.data, 250.0);
    const BandpassSpec spec{};
    const Eigen::MatrixXd lhs = butterworth_bandpass(combo, spec).data;
    const Eigen::MatrixXd rhs =
        a * butterworth_bandpass(x, spec).data + b * butterworth_bandpass(y, spec).data;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9 * lhs.cwiseAbs().maxCoeff());
}

TEST_CASE("zero-phase filtering introduces no group delay") {
    const Trial in = sinusoid_trial(15.0, 250.0, 1200);
    const Trial out = butterworth_bandpass(in, BandpassSpec{});
    const Eigen::VectorXd raw = in.data.row(0).segment(100, 1000).transpose();
    int best_lag = -99;
    double best = -1e300;
    for (int lag = -6; lag <= 6; ++lag) {
        const Eigen::VectorXd shifted = out.data.row(0).segment(100 + lag, 1000).transpose();
        const double corr = raw.dot(shifted);
        if (corr > best) {
            best = corr;
            best_lag = lag;
        }
    }
    CHECK(best_lag == 0);
}

TEST_CASE("causal mode matches zero-phase passband gain but delays the signal") {
    const Trial in = sinusoid_trial(15.0, 250.0, 1200);
    BandpassSpec causal{};
    causal.zero_phase = false;
    const Trial out = butterworth_bandpass(in, causal);
    const Eigen::VectorXd mid = out.data.row(0).segment(400, 700).transpose();
    CHECK(rms(mid) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(0.02));
}

TEST_CASE("bandpass rejects invalid bands and orders") {
    const Trial in = sinusoid_trial(15.0, 250.0, 300);
    CHECK_THROWS_AS(butterworth_bandpass(in, BandpassSpec{8.0, 130.0, 5, true}), InvalidInput);
    CHECK_THROWS_AS(butterworth_bandpass(in, BandpassSpec{30.0, 8.0, 5, true}), InvalidInput);
    CHECK_THROWS_AS(butterworth_bandpass(in, BandpassSpec{0.0, 30.0, 5, true}), InvalidInput);
    CHECK_THROWS_AS(butterworth_bandpass(in, BandpassSpec{8.0, 30.0, 0, true}), InvalidInput);
}

TEST_CASE("trial_covariance closed forms and explicit oracle") {
    // orthogonal unit-norm rows -> I / C
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 90);
    x(0, 0) = 1.0;
    x(1, 1) = 1.0;
    x(2, 2) = 1.0;
    const SpdMatrix cov = trial_covariance(Trial(x, 100.0));
    CHECK((cov.mat() - Eigen::MatrixXd::Identity(3, 3) / 3.0).cwiseAbs().maxCoeff() < 1e-14);

    Rng rng(202);
    const Eigen::MatrixXd r = test_util::random_matrix(rng, 4, 100);
    const SpdMatrix c2 = trial_covariance(Trial(r, 100.0));
    CHECK(c2.mat().trace() == Catch::Approx(1.0).margin(1e-12));
    const Eigen::MatrixXd oracle = (r * r.transpose()) / (r * r.transpose()).trace();
    CHECK((c2.mat() - oracle).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS(trial_covariance(Trial(Eigen::MatrixXd::Zero(2, 50), 100.0)),
                    DegenerateInput);
}

TEST_CASE("ledoit_wolf shrinks little when samples are plentiful") {
    Rng rng(203);
    const int c = 4;
    const int t = 10 * c * c * 10; // T >> C
    const Eigen::MatrixXd mix = test_util::random_invertible(rng, c);
    const Trial trial(mix * test_util::random_matrix(rng, c, t), 100.0);
    const Eigen::MatrixXd lw = ledoit_wolf_covariance(trial).mat();
    const Eigen::MatrixXd plain = trial_covariance(trial).mat();
    CHECK((lw - plain).norm() / plain.norm() < 0.05);
}

TEST_CASE("ledoit_wolf restores rank on duplicated channels") {
    Rng rng(204);
    Eigen::MatrixXd data(2, 200);
    data.row(0) = test_util::random_matrix(rng, 1, 200);
    data.row(1) = data.row(0);
    const Trial trial(data, 100.0);
    CHECK_THROWS_AS(trial_covariance(trial), DomainError); // raw covariance is singular
    const SpdMatrix lw = ledoit_wolf_covariance(trial);
    const SymEig eig = sym_eig(lw.mat());
    CHECK(eig.eigenvalues.minCoeff() > 0.0);
    CHECK(lw.mat().trace() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("ledoit_wolf approaches the population covariance on iid data") {
    Rng rng(205);
    const Trial trial(test_util::random_matrix(rng, 4, 1000), 100.0);
    const Eigen::MatrixXd lw = ledoit_wolf_covariance(trial).mat();
    const Eigen::MatrixXd target = Eigen::MatrixXd::Identity(4, 4) / 4.0;
    CHECK((lw - target).norm() / target.norm() < 0.10);
}

TEST_CASE("both covariance estimators return unit-trace SPD matrices") {
    Rng rng(206);
    for (int rep = 0; rep < 5; ++rep) {
        const Trial trial(test_util::random_matrix(rng, 5, 120), 100.0);
        for (const auto est : {CovarianceEstimator::Plain, CovarianceEstimator::LedoitWolf}) {
            const SpdMatrix cov = estimate_covariance(trial, est);
            CHECK(cov.mat().trace() == Catch::Approx(1.0).margin(1e-12));
            CHECK(sym_eig(cov.mat()).eigenvalues.minCoeff() > 0.0);
        }
    }
}

TEST_CASE("Trial validation") {
    CHECK_THROWS_AS(Trial(Eigen::MatrixXd::Zero(1, 50), 100.0), InvalidInput);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 50);
    bad(0, 3) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Trial(bad, 100.0), InvalidInput);
    CHECK_THROWS_AS(Trial(Eigen::MatrixXd::Zero(2, 50), 0.0), InvalidInput);
}
