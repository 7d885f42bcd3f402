#pragma once

// Trial preprocessing: Butterworth bandpass filtering and per-trial
// covariance estimation (trace-normalized X X' and Ledoit-Wolf
// shrinkage toward scaled identity).

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rtcsp/errors.hpp"
#include "rtcsp/spd.hpp"

namespace rtcsp {

/// One motor-imagery epoch: channels x samples plus sampling rate.
struct Trial {
    Eigen::MatrixXd data; // C x T
    double fs = 0.0;
    std::vector<std::string> channel_names; // optional, empty or size C

    Trial() = default;
    Trial(Eigen::MatrixXd d, double sampling_rate,
          std::vector<std::string> names = {})
        : data(std::move(d)), fs(sampling_rate), channel_names(std::move(names)) {
        validate();
    }

    int channels() const noexcept { return static_cast<int>(data.rows()); }
    int samples() const noexcept { return static_cast<int>(data.cols()); }

    void validate() const {
        if (channels() < 2)
            throw InvalidInput("Trial: need at least 2 channels");
        if (fs <= 0.0)
            throw InvalidInput("Trial: sampling rate must be positive");
        if (!channel_names.empty() && static_cast<int>(channel_names.size()) != channels())
            throw InvalidInput("Trial: channel_names size does not match channel count");
        if (!data.allFinite())
            throw InvalidInput("Trial: data contains NaN or Inf");
        if (samples() <= channels())
            std::cerr << "[rtcsp] warning: trial has T <= C (" << samples() << " <= "
                      << channels() << "); covariance may be rank-deficient\n";
    }
};

struct BandpassSpec {
    double low_hz = 8.0;
    double high_hz = 30.0;
    int order = 5;
    bool zero_phase = true;
};

struct Biquad {
    double b0, b1, b2; // numerator
    double a1, a2;     // denominator (a0 == 1)
};

/// Butterworth bandpass as a cascade of second-order sections.
struct SosFilter {
    std::vector<Biquad> sections;

    /// |H(e^{i 2 pi f / fs})| of the designed digital filter.
    double magnitude_at(double freq_hz, double fs) const {
        const std::complex<double> z = std::polar(1.0, 2.0 * M_PI * freq_hz / fs);
        const std::complex<double> zi = 1.0 / z;
        std::complex<double> h = 1.0;
        for (const Biquad& s : sections)
            h *= (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
        return std::abs(h);
    }
};

/// Designs an order-`order` Butterworth bandpass via the bilinear
/// transform with frequency prewarping. The digital filter has 2*order
/// poles; zeros sit at z = +1 and z = -1.
inline SosFilter design_butterworth_bandpass(double low_hz, double high_hz, int order,
                                             double fs) {
    if (order < 1)
        throw InvalidInput("butterworth: order must be >= 1");
    if (!(0.0 < low_hz && low_hz < high_hz && high_hz < fs / 2.0))
        throw InvalidInput("butterworth: need 0 < low < high < fs/2 (got low=" +
                           std::to_string(low_hz) + ", high=" + std::to_string(high_hz) +
                           ", fs=" + std::to_string(fs) + ")");

    using cplx = std::complex<double>;
    const double k = 2.0 * fs; // bilinear constant
    const double w1 = k * std::tan(M_PI * low_hz / fs);
    const double w2 = k * std::tan(M_PI * high_hz / fs);
    const double bw = w2 - w1;
    const double w0sq = w1 * w2;

    // analog bandpass poles from the lowpass prototype
    std::vector<cplx> analog_poles;
    analog_poles.reserve(2 * static_cast<std::size_t>(order));
    for (int i = 1; i <= order; ++i) {
        const double theta = M_PI * (2.0 * i + order - 1.0) / (2.0 * order);
        const cplx proto(std::cos(theta), std::sin(theta));
        const cplx s = proto * (bw / 2.0);
        const cplx disc = std::sqrt(s * s - w0sq);
        analog_poles.push_back(s + disc);
        analog_poles.push_back(s - disc);
    }

    // bilinear transform; gain = bw^order * k^order / prod(k - p)
    std::vector<cplx> digital_poles;
    digital_poles.reserve(analog_poles.size());
    cplx denom = 1.0;
    for (const cplx& p : analog_poles) {
        digital_poles.push_back((k + p) / (k - p));
        denom *= (k - p);
    }
    const double gain = std::real(std::pow(cplx(bw * k, 0.0), order) / denom);
    if (!(gain > 0.0) || !std::isfinite(gain))
        throw NumericalFailure("butterworth: non-positive or non-finite design gain");

    for (const cplx& zp : digital_poles)
        if (std::abs(zp) >= 1.0)
            throw NumericalFailure("butterworth: designed filter is unstable (pole magnitude "
                                   + std::to_string(std::abs(zp)) + ")");

    // pair poles into biquads: conjugate pairs together, real poles in pairs
    std::vector<cplx> complex_reps;
    std::vector<double> real_poles;
    for (const cplx& zp : digital_poles) {
        if (std::abs(zp.imag()) < 1e-14)
            real_poles.push_back(zp.real());
        else if (zp.imag() > 0.0)
            complex_reps.push_back(zp);
    }

    SosFilter out;
    const double per_section_gain = std::pow(gain, 1.0 / order);
    auto push_section = [&](double a1, double a2) {
        // zeros at +1 and -1: b = g * (1, 0, -1)
        out.sections.push_back({per_section_gain, 0.0, -per_section_gain, a1, a2});
    };
    for (const cplx& zp : complex_reps)
        push_section(-2.0 * zp.real(), std::norm(zp));
    for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2)
        push_section(-(real_poles[i] + real_poles[i + 1]), real_poles[i] * real_poles[i + 1]);
    if (real_poles.size() % 2 != 0)
        throw NumericalFailure("butterworth: unpaired real pole"); // cannot happen by construction
    return out;
}

namespace detail {

/// Direct form II transposed. When match_step_state is set, each
/// section starts in its steady state for a constant input equal to the
/// first sample, so a constant signal produces no switch-on transient.
inline void sos_filter_inplace(const SosFilter& f, Eigen::VectorXd& x,
                               bool match_step_state = false) {
    double level = x.size() > 0 ? x[0] : 0.0;
    for (const Biquad& s : f.sections) {
        double z1 = 0.0, z2 = 0.0;
        if (match_step_state) {
            const double dc_gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
            const double y0 = dc_gain * level;
            z1 = y0 - s.b0 * level;
            z2 = s.b2 * level - s.a2 * y0;
            level = y0;
        }
        for (Eigen::Index n = 0; n < x.size(); ++n) {
            const double in = x[n];
            const double y = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * y + z2;
            z2 = s.b2 * in - s.a2 * y;
            x[n] = y;
        }
    }
}

/// Reflect-pad (no edge duplication), filter forward and backward,
/// trim the padding.
inline Eigen::VectorXd filtfilt_channel(const SosFilter& f, const Eigen::VectorXd& x,
                                        int pad_len) {
    const Eigen::Index t = x.size();
    if (pad_len >= t)
        pad_len = static_cast<int>(t) - 1;
    Eigen::VectorXd ext(t + 2 * pad_len);
    for (int i = 0; i < pad_len; ++i) ext[i] = x[pad_len - i];
    ext.segment(pad_len, t) = x;
    for (int i = 0; i < pad_len; ++i) ext[pad_len + t + i] = x[t - 2 - i];

    sos_filter_inplace(f, ext, true);
    ext.reverseInPlace();
    sos_filter_inplace(f, ext, true);
    ext.reverseInPlace();
    return ext.segment(pad_len, t);
}

} // namespace detail

/// Filters every channel independently. Zero-phase mode runs the filter
/// forward then backward over a reflect-padded extension of length
/// 3*(2*order+1) per side, which is trimmed afterwards.
inline Trial butterworth_bandpass(const Trial& trial, const BandpassSpec& spec) {
    const SosFilter f = design_butterworth_bandpass(spec.low_hz, spec.high_hz, spec.order,
                                                    trial.fs);
    const int pad_len = 3 * (2 * spec.order + 1);
    Trial out = trial;
    for (int ch = 0; ch < trial.channels(); ++ch) {
        Eigen::VectorXd x = trial.data.row(ch).transpose();
        if (spec.zero_phase) {
            out.data.row(ch) = detail::filtfilt_channel(f, x, pad_len).transpose();
        } else {
            detail::sos_filter_inplace(f, x);
            out.data.row(ch) = x.transpose();
        }
    }
    return out;
}

/// Trace-normalized trial covariance X X' / tr(X X'), not mean-centered.
inline SpdMatrix trial_covariance(const Trial& trial) {
    const Eigen::MatrixXd xxt = trial.data * trial.data.transpose();
    const double tr = xxt.trace();
    if (!(tr > 0.0))
        throw DegenerateInput("trial_covariance: zero-signal trial (trace of X X' is zero)");
    return SpdMatrix(xxt / tr);
}

/// Ledoit-Wolf shrinkage of the per-trial second-moment matrix toward
/// scaled identity, (1 - rho) S + rho (tr S / C) I, with rho estimated
/// over the T sample vectors (samples assumed centered, consistent with
/// the X X' covariance convention). The result is trace-normalized.
inline SpdMatrix ledoit_wolf_covariance(const Trial& trial) {
    const int c = trial.channels();
    const double t = static_cast<double>(trial.samples());
    const Eigen::MatrixXd s = trial.data * trial.data.transpose() / t;
    const double tr = s.trace();
    if (!(tr > 0.0))
        throw DegenerateInput("ledoit_wolf_covariance: zero-signal trial");

    const double m = tr / c;
    const Eigen::MatrixXd centered = s - m * Eigen::MatrixXd::Identity(c, c);
    const double d2 = centered.squaredNorm() / c;

    // sum_t ||x_t x_t' - S||_F^2 == sum_t ||x_t||^4 - T ||S||_F^2
    double sum4 = 0.0;
    for (int j = 0; j < trial.samples(); ++j) {
        const double n2 = trial.data.col(j).squaredNorm();
        sum4 += n2 * n2;
    }
    const double bbar2 = (sum4 - t * s.squaredNorm()) / (t * t * c);
    const double b2 = std::min(std::max(bbar2, 0.0), d2);
    const double rho = d2 > 0.0 ? b2 / d2 : 0.0;

    Eigen::MatrixXd shrunk = (1.0 - rho) * s;
    shrunk.diagonal().array() += rho * m;
    return SpdMatrix(shrunk / shrunk.trace());
}

enum class CovarianceEstimator { Plain, LedoitWolf };

inline SpdMatrix estimate_covariance(const Trial& trial, CovarianceEstimator est) {
    return est == CovarianceEstimator::Plain ? trial_covariance(trial)
                                             : ledoit_wolf_covariance(trial);
}

} // namespace rtcsp
