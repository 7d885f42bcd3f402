#pragma once

// Per-class alignment of source covariances to a target subject.
//
// Both class sets are mapped to the tangent space at their own
// Riemannian mean and flattened (vec of the upper triangle, dimension
// d = C(C+1)/2). The top two principal directions P_S, P_T of each
// cloud are extracted, the 2x2 second-moment matrices in those planes
// are Cholesky-factored as L_S L_S' and L_T L_T', and each source
// vector x is recolored as
//
//   x_al = P_T' L_T L_S^{-1} P_S x
//
// before being mapped back to the manifold at the target mean M_T.
// By construction the P_T-projection of the aligned cloud has second
// moment exactly L_T L_T'.
//
// The 2x2 second moments are divided by the trial count so that
// L_T L_S^{-1} does not pick up a spurious sqrt(M/N) factor when the
// two sides have different numbers of trials; the count_normalized
// option restores the literal unnormalized products for comparison.
//
// PCA runs uncentered: at the Karcher mean the tangent vectors sum to
// zero up to solver tolerance, so centering would be a no-op.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <map>
#include <string>
#include <vector>

#include "rtcsp/csp.hpp"
#include "rtcsp/errors.hpp"
#include "rtcsp/spd.hpp"

namespace rtcsp {

/// Per-class alignment artifacts defining the source-to-target
/// transform.
struct AlignmentMap {
    Label class_id = 0;
    SpdMatrix M_S;  // source class Riemannian mean
    SpdMatrix M_T;  // target class Riemannian mean
    Eigen::MatrixXd P_S; // 2 x d, orthonormal rows
    Eigen::MatrixXd P_T; // 2 x d, orthonormal rows
    Eigen::Matrix2d L_S; // lower-triangular, positive diagonal
    Eigen::Matrix2d L_T;
};

struct AlignOptions {
    /// Divide PC-space second moments by the trial count (see header
    /// comment). Off reproduces the literal unnormalized products.
    bool count_normalized = true;
    double mean_tol = 1e-8;
    int mean_max_iter = 100;
};

/// Riemannian mean of the set plus the stacked tangent rows
/// vec(Log_mean(cov_i)); rows sum to ~0 by Karcher stationarity.
inline std::pair<SpdMatrix, Eigen::MatrixXd>
tangent_vectors_at_mean(const std::vector<SpdMatrix>& covs, const AlignOptions& opt = {}) {
    if (covs.size() < 2)
        throw InvalidInput("tangent_vectors_at_mean: need at least 2 covariances");
    const SpdMatrix mean = riemannian_mean(covs, opt.mean_tol, opt.mean_max_iter);
    const int d = mean.dim() * (mean.dim() + 1) / 2;
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(covs.size()), d);
    for (std::size_t i = 0; i < covs.size(); ++i)
        rows.row(static_cast<Eigen::Index>(i)) = log_map(mean, covs[i]).vec().transpose();
    return {mean, rows};
}

/// Top two right singular vectors of the (uncentered) data matrix as
/// rows, ordered by singular value, signs fixed so the
/// largest-magnitude entry of each row is positive.
inline Eigen::MatrixXd top2_pca(const Eigen::MatrixXd& vectors) {
    if (vectors.rows() < 2)
        throw InvalidInput("top2_pca: need at least 2 rows");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(vectors, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv.size() < 2 || sv[1] < 1e-12 * sv[0])
        throw DegenerateInput("top2_pca: data has numerical rank < 2 (singular values "
                              + std::to_string(sv[0]) + ", "
                              + std::to_string(sv.size() > 1 ? sv[1] : 0.0) + ")");
    Eigen::MatrixXd p = svd.matrixV().leftCols(2).transpose();
    for (int r = 0; r < 2; ++r) {
        Eigen::Index imax = 0;
        p.row(r).cwiseAbs().maxCoeff(&imax);
        if (p(r, imax) < 0.0) p.row(r) = -p.row(r);
    }
    return p;
}

/// Cholesky factor of the second moment of the rows projected into the
/// plane spanned by P.
inline Eigen::Matrix2d pc_space_cholesky(const Eigen::MatrixXd& p,
                                         const Eigen::MatrixXd& vectors,
                                         bool count_normalized = true) {
    if (p.rows() != 2 || p.cols() != vectors.cols())
        throw InvalidInput("pc_space_cholesky: P must be 2 x d matching the vectors");
    const Eigen::MatrixXd projected = p * vectors.transpose(); // 2 x N
    Eigen::Matrix2d g = projected * projected.transpose();
    if (count_normalized) g /= static_cast<double>(vectors.rows());
    const Eigen::LLT<Eigen::Matrix2d> llt(g);
    if (llt.info() != Eigen::Success)
        throw DegenerateInput("pc_space_cholesky: PC-space second moment is not positive "
                              "definite");
    return llt.matrixL();
}

struct ClassAlignment {
    std::vector<SpdMatrix> aligned;
    AlignmentMap map;
};

/// Aligns one class of source covariances to the same class of target
/// covariances. Both sides need at least 3 trials: with 2 the tangent
/// rows are antipodal and rank 1.
inline ClassAlignment align_class(const std::vector<SpdMatrix>& source_covs,
                                  const std::vector<SpdMatrix>& target_covs,
                                  Label class_id = 0, const AlignOptions& opt = {}) {
    if (source_covs.size() < 2 || target_covs.size() < 2)
        throw InvalidInput("align_class: both sides need at least 2 covariances");
    if (source_covs.size() < 3 || target_covs.size() < 3)
        throw DegenerateInput("align_class: class " + std::to_string(class_id)
                              + " has fewer than 3 trials on one side; rank-2 PCA needs 3+");
    if (source_covs[0].dim() != target_covs[0].dim())
        throw InvalidInput("align_class: channel count mismatch between source and target");

    try {
        auto [m_s, rows_s] = tangent_vectors_at_mean(source_covs, opt);
        auto [m_t, rows_t] = tangent_vectors_at_mean(target_covs, opt);

        ClassAlignment out{{},
                           AlignmentMap{class_id, m_s, m_t, top2_pca(rows_s), top2_pca(rows_t),
                                        Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero()}};
        out.map.L_S = pc_space_cholesky(out.map.P_S, rows_s, opt.count_normalized);
        out.map.L_T = pc_space_cholesky(out.map.P_T, rows_t, opt.count_normalized);

        // x_al = P_T' L_T L_S^{-1} P_S x per source row
        const Eigen::MatrixXd projected = out.map.P_S * rows_s.transpose(); // 2 x N
        const Eigen::MatrixXd recolored =
            out.map.L_T
            * out.map.L_S.triangularView<Eigen::Lower>().solve(projected); // 2 x N
        const Eigen::MatrixXd aligned_rows = out.map.P_T.transpose() * recolored; // d x N

        out.aligned.reserve(source_covs.size());
        for (Eigen::Index i = 0; i < aligned_rows.cols(); ++i)
            out.aligned.push_back(exp_map(m_t, mat_from_vec(aligned_rows.col(i))));
        return out;
    } catch (const DegenerateInput& e) {
        throw DegenerateInput("align_class: class " + std::to_string(class_id) + ": "
                              + e.what());
    }
}

struct SubjectAlignment {
    std::vector<SpdMatrix> covs;   // aligned source covariances, input order
    std::vector<Label> labels;     // unchanged source labels
    std::vector<AlignmentMap> maps; // one per class, ascending class label
};

/// Aligns a labeled source covariance set to a labeled target set,
/// class by class. Every class present in the source must exist in the
/// target.
inline SubjectAlignment align_subject(const std::vector<SpdMatrix>& source_covs,
                                      const std::vector<Label>& source_labels,
                                      const std::vector<SpdMatrix>& target_covs,
                                      const std::vector<Label>& target_labels,
                                      const AlignOptions& opt = {}) {
    if (source_covs.size() != source_labels.size()
        || target_covs.size() != target_labels.size())
        throw InvalidInput("align_subject: covariance/label count mismatch");

    SubjectAlignment out;
    out.covs.reserve(source_covs.size());
    out.labels = source_labels;
    // placeholder slots, filled per class in input order
    std::vector<int> slot(source_covs.size(), -1);

    for (Label c : distinct_labels(source_labels)) {
        std::vector<SpdMatrix> src, tgt;
        std::vector<std::size_t> src_idx;
        for (std::size_t i = 0; i < source_covs.size(); ++i)
            if (source_labels[i] == c) {
                src.push_back(source_covs[i]);
                src_idx.push_back(i);
            }
        for (std::size_t j = 0; j < target_covs.size(); ++j)
            if (target_labels[j] == c) tgt.push_back(target_covs[j]);
        if (tgt.empty())
            throw MissingClassError("align_subject: class " + std::to_string(c)
                                    + " present in source but absent in target");

        ClassAlignment ca = align_class(src, tgt, c, opt);
        for (std::size_t k = 0; k < src_idx.size(); ++k)
            slot[src_idx[k]] = static_cast<int>(out.covs.size()) + static_cast<int>(k);
        for (auto& m : ca.aligned) out.covs.push_back(std::move(m));
        out.maps.push_back(std::move(ca.map));
    }

    // restore input order
    std::vector<SpdMatrix> ordered;
    ordered.reserve(out.covs.size());
    for (std::size_t i = 0; i < slot.size(); ++i) ordered.push_back(out.covs[slot[i]]);
    out.covs = std::move(ordered);
    return out;
}

} // namespace rtcsp
