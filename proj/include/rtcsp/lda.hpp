#pragma once

// Two-class linear discriminant analysis on log-variance features,
// plus the majority vote used by the ensemble strategy.

#include <Eigen/Dense>

#include <cmath>
#include <iostream>
#include <map>
#include <vector>

#include "rtcsp/csp.hpp"
#include "rtcsp/errors.hpp"

namespace rtcsp {

struct LdaConfig {
    /// Ridge added to the pooled covariance as ridge_scale * tr/F. A
    /// nonzero default keeps the solve well posed when COMBINE stacks
    /// few rows; set to 0 for the textbook estimator.
    double ridge_scale = 1e-6;
    bool equal_priors = false;
};

struct LdaModel {
    Eigen::VectorXd weights;     // cov^{-1} (mu_pos - mu_neg)
    double bias = 0.0;           // includes the log-prior offset
    Eigen::MatrixXd class_means; // 2 x F, row 0 = negative, row 1 = positive
    Eigen::MatrixXd shared_cov;  // F x F pooled within-class covariance (ridge added)
    Eigen::Vector2d priors;      // (negative, positive)
    int n_train = 0;

    double decision_value(const Eigen::VectorXd& x) const {
        if (x.size() != weights.size())
            throw InvalidInput("LdaModel: feature length mismatch");
        return weights.dot(x) + bias;
    }
};

/// Fits LDA on rows of `features` with labels in {-1, +1}. The pooled
/// within-class covariance uses the unbiased N-2 divisor; the decision
/// surface passes through the prior-weighted midpoint.
inline LdaModel lda_fit(const Eigen::MatrixXd& features, const std::vector<Label>& labels,
                        const LdaConfig& config = {}) {
    const Eigen::Index n = features.rows();
    const Eigen::Index f = features.cols();
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw InvalidInput("lda_fit: feature/label count mismatch");

    Eigen::VectorXd mu_pos = Eigen::VectorXd::Zero(f), mu_neg = Eigen::VectorXd::Zero(f);
    int n_pos = 0, n_neg = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (labels[i] > 0) {
            mu_pos += features.row(i).transpose();
            ++n_pos;
        } else {
            mu_neg += features.row(i).transpose();
            ++n_neg;
        }
    }
    if (n_pos == 0 || n_neg == 0)
        throw InvalidInput("lda_fit: both classes must be present");
    mu_pos /= n_pos;
    mu_neg /= n_neg;
    if (n < f)
        std::cerr << "[rtcsp] warning: LDA fit with fewer samples (" << n
                  << ") than features (" << f << ")\n";

    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(f, f);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd d =
            features.row(i).transpose() - (labels[i] > 0 ? mu_pos : mu_neg);
        scatter.noalias() += d * d.transpose();
    }
    const double divisor = n > 2 ? static_cast<double>(n - 2) : 1.0;
    Eigen::MatrixXd cov = scatter / divisor;
    double ridge = config.ridge_scale * cov.trace() / static_cast<double>(f);
    if (config.ridge_scale > 0.0 && !(ridge > 0.0))
        ridge = config.ridge_scale; // degenerate zero-scatter fit
    cov.diagonal().array() += ridge;

    LdaModel model;
    model.n_train = static_cast<int>(n);
    model.shared_cov = cov;
    model.class_means.resize(2, f);
    model.class_means.row(0) = mu_neg.transpose();
    model.class_means.row(1) = mu_pos.transpose();
    if (config.equal_priors)
        model.priors = Eigen::Vector2d(0.5, 0.5);
    else
        model.priors = Eigen::Vector2d(static_cast<double>(n_neg) / n,
                                       static_cast<double>(n_pos) / n);

    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw NumericalFailure("lda_fit: pooled covariance is not positive definite");
    model.weights = llt.solve(mu_pos - mu_neg);
    model.bias = -model.weights.dot(0.5 * (mu_pos + mu_neg))
                 + std::log(model.priors[1] / model.priors[0]);
    return model;
}

/// Posterior probability of the positive class: logistic of the signed
/// decision value (the log-prior offset is part of the bias).
inline double lda_posterior(const LdaModel& model, const Eigen::VectorXd& feature) {
    return 1.0 / (1.0 + std::exp(-model.decision_value(feature)));
}

inline Label lda_predict(const LdaModel& model, const Eigen::VectorXd& feature) {
    return model.decision_value(feature) > 0.0 ? +1 : -1;
}

/// Modal label; ties go to tie_breaker.
inline Label majority_vote(const std::vector<Label>& votes, Label tie_breaker) {
    if (votes.empty())
        throw InvalidInput("majority_vote: empty vote list");
    std::map<Label, int> counts;
    for (Label v : votes) ++counts[v];
    int best = 0;
    bool tied = false;
    Label winner = votes.front();
    for (const auto& [label, count] : counts) {
        if (count > best) {
            best = count;
            winner = label;
            tied = false;
        } else if (count == best) {
            tied = true;
        }
    }
    return tied ? tie_breaker : winner;
}

} // namespace rtcsp
