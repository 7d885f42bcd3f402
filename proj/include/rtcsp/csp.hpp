#pragma once

// Common spatial patterns. Filters solve the symmetric-definite
// generalized eigenproblem
//
//   Sigma_neg w = lambda (Sigma_neg + Sigma_pos) w
//
// by Cholesky reduction: Sigma_sum = L L', standard symmetric problem
// on L^{-1} Sigma_neg L^{-T}, eigenvectors back-transformed as
// W = L^{-T} V. Columns are W' Sigma_sum W-orthonormal. Retained
// eigenvalues live in (0, 1) and pair up as lambda_neg + lambda_pos = 1
// per direction.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <vector>

#include "rtcsp/errors.hpp"
#include "rtcsp/signal.hpp"
#include "rtcsp/spd.hpp"

namespace rtcsp {

using Label = int;

/// CSP projection: C x 2n filter matrix with the retained generalized
/// eigenvalues. The first n_pairs columns carry the largest
/// eigenvalues (descending), the last n_pairs the smallest.
struct SpatialFilter {
    Eigen::MatrixXd W;          // C x 2n
    Eigen::VectorXd eigenvalues; // length 2n, matching columns
    int n_pairs = 0;

    int channels() const noexcept { return static_cast<int>(W.rows()); }
};

struct FeatureVector {
    Eigen::VectorXd values;
    std::optional<Label> label;
};

/// Arithmetic mean of the covariances whose label equals class_id.
inline SpdMatrix class_mean_covariance(const std::vector<SpdMatrix>& covs,
                                       const std::vector<Label>& labels, Label class_id) {
    if (covs.size() != labels.size())
        throw InvalidInput("class_mean_covariance: covariance/label count mismatch");
    Eigen::MatrixXd acc;
    int count = 0;
    for (std::size_t i = 0; i < covs.size(); ++i) {
        if (labels[i] != class_id) continue;
        if (count == 0)
            acc = covs[i].mat();
        else
            acc += covs[i].mat();
        ++count;
    }
    if (count == 0)
        throw InvalidInput("class_mean_covariance: no trials with class "
                           + std::to_string(class_id));
    return SpdMatrix(acc / static_cast<double>(count));
}

namespace detail {

// Reproducible column signs: the entry of largest magnitude is positive
// (first such index on ties).
inline void fix_column_signs(Eigen::MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        Eigen::Index imax = 0;
        m.col(j).cwiseAbs().maxCoeff(&imax);
        if (m(imax, j) < 0.0) m.col(j) = -m.col(j);
    }
}

} // namespace detail

inline SpatialFilter csp_filters(const SpdMatrix& sigma_neg, const SpdMatrix& sigma_pos,
                                 int n_pairs) {
    const int c = sigma_neg.dim();
    if (sigma_pos.dim() != c)
        throw InvalidInput("csp_filters: class covariances differ in dimension");
    if (n_pairs < 1 || 2 * n_pairs > c)
        throw InvalidInput("csp_filters: need 1 <= 2*n_pairs <= channel count (n_pairs="
                           + std::to_string(n_pairs) + ", C=" + std::to_string(c) + ")");

    const Eigen::MatrixXd sum = sigma_neg.mat() + sigma_pos.mat();
    Eigen::LLT<Eigen::MatrixXd> llt(sum);
    if (llt.info() != Eigen::Success)
        throw DomainError("csp_filters: class covariance sum is not positive definite; "
                          "consider Ledoit-Wolf shrinkage");
    const Eigen::MatrixXd l = llt.matrixL();

    // M = L^{-1} Sigma_neg L^{-T}
    Eigen::MatrixXd m = l.triangularView<Eigen::Lower>().solve(sigma_neg.mat());
    m = l.triangularView<Eigen::Lower>().solve(m.transpose().eval());
    const SymEig eig = sym_eig(0.5 * (m + m.transpose()));

    const Eigen::MatrixXd w_full =
        l.transpose().triangularView<Eigen::Upper>().solve(eig.eigenvectors);

    SpatialFilter out;
    out.n_pairs = n_pairs;
    out.W.resize(c, 2 * n_pairs);
    out.eigenvalues.resize(2 * n_pairs);
    for (int k = 0; k < n_pairs; ++k) {
        out.W.col(k) = w_full.col(k);
        out.eigenvalues[k] = eig.eigenvalues[k];
        out.W.col(n_pairs + k) = w_full.col(c - n_pairs + k);
        out.eigenvalues[n_pairs + k] = eig.eigenvalues[c - n_pairs + k];
    }
    detail::fix_column_signs(out.W);
    return out;
}

/// f = log(diag(W' X X' W)): element-wise log of the projected
/// channel variances (unnormalized, matching the X X' convention).
inline FeatureVector log_variance_features(const SpatialFilter& filter, const Trial& trial) {
    if (filter.channels() != trial.channels())
        throw InvalidInput("log_variance_features: filter/trial channel mismatch");
    const Eigen::MatrixXd projected = filter.W.transpose() * trial.data;
    FeatureVector f;
    f.values.resize(projected.rows());
    for (Eigen::Index j = 0; j < projected.rows(); ++j) {
        const double v = projected.row(j).squaredNorm();
        if (!(v > 0.0) || !std::isfinite(v))
            throw DegenerateInput("log_variance_features: non-positive projected variance in "
                                  "component " + std::to_string(j));
        f.values[j] = std::log(v);
    }
    return f;
}

/// Same features computed from a covariance-like matrix instead of a
/// raw trial: log(diag(W' Sigma W)).
inline FeatureVector log_variance_features(const SpatialFilter& filter,
                                           const Eigen::MatrixXd& sigma) {
    if (filter.channels() != sigma.rows() || sigma.rows() != sigma.cols())
        throw InvalidInput("log_variance_features: filter/covariance dimension mismatch");
    FeatureVector f;
    f.values.resize(filter.W.cols());
    for (Eigen::Index j = 0; j < filter.W.cols(); ++j) {
        const double v = filter.W.col(j).dot(sigma * filter.W.col(j));
        if (!(v > 0.0) || !std::isfinite(v))
            throw DegenerateInput("log_variance_features: non-positive projected variance in "
                                  "component " + std::to_string(j));
        f.values[j] = std::log(v);
    }
    return f;
}

struct OvrTask {
    Label positive_class;
    std::vector<Label> binarized; // +1 for positive_class, -1 otherwise
};

inline std::vector<Label> distinct_labels(const std::vector<Label>& labels) {
    std::set<Label> s(labels.begin(), labels.end());
    return std::vector<Label>(s.begin(), s.end());
}

/// One-vs-rest decomposition, one task per class in ascending label
/// order.
inline std::vector<OvrTask> ovr_tasks(const std::vector<Label>& labels) {
    const std::vector<Label> classes = distinct_labels(labels);
    if (classes.size() < 2)
        throw InvalidInput("ovr_tasks: need at least 2 distinct classes");
    std::vector<OvrTask> tasks;
    tasks.reserve(classes.size());
    for (Label c : classes) {
        OvrTask t;
        t.positive_class = c;
        t.binarized.reserve(labels.size());
        for (Label l : labels) t.binarized.push_back(l == c ? +1 : -1);
        tasks.push_back(std::move(t));
    }
    return tasks;
}

} // namespace rtcsp
