#pragma once

// Linear-algebra primitives on the manifold of symmetric positive
// definite matrices: spectral matrix functions, the affine-invariant
// metric, Log/Exp maps, the Riemannian (Karcher) mean and the
// upper-triangular tangent vectorization.
//
// Conventions:
//   Log_A(X) = A^{1/2} log(A^{-1/2} X A^{-1/2}) A^{1/2}
//   Exp_A(S) = A^{1/2} exp(A^{-1/2} S A^{-1/2}) A^{1/2}
// so that Log_A(A) = 0 and Exp_A(Log_A(X)) = X.
//
//   delta(X1, X2) = sqrt( sum_k log^2 lambda_k )   with lambda_k the
// eigenvalues of X1^{-1} X2. The square root makes delta a true metric
// (symmetry, triangle inequality, congruence invariance); a squared
// accessor is provided for objectives that only need the order.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rtcsp/errors.hpp"

namespace rtcsp {

inline double max_abs(const Eigen::MatrixXd& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol) {
    if (m.rows() != m.cols()) return false;
    const double scale = max_abs(m);
    return max_abs(m - m.transpose()) <= rel_tol * (scale > 0.0 ? scale : 1.0);
}

/// Symmetric positive definite matrix. Symmetry and positive
/// definiteness are checked at construction; the stored matrix is
/// symmetrized so downstream code can rely on exact symmetry.
class SpdMatrix {
public:
    explicit SpdMatrix(Eigen::MatrixXd entries) {
        if (entries.rows() != entries.cols() || entries.rows() < 1)
            throw InvalidInput("SpdMatrix: entries must be a square matrix");
        if (!is_symmetric(entries, 1e-10))
            throw InvalidInput("SpdMatrix: matrix is not symmetric within 1e-10 relative");
        entries_ = 0.5 * (entries + entries.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(entries_, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            throw NumericalFailure("SpdMatrix: eigenvalue check failed to converge");
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw DomainError("SpdMatrix: matrix is not positive definite (min eigenvalue "
                              + std::to_string(es.eigenvalues().minCoeff()) + ")");
    }

    int dim() const noexcept { return static_cast<int>(entries_.rows()); }
    const Eigen::MatrixXd& mat() const noexcept { return entries_; }
    double operator()(int i, int j) const { return entries_(i, j); }

private:
    Eigen::MatrixXd entries_;
};

struct SymEig {
    Eigen::VectorXd eigenvalues;  // descending
    Eigen::MatrixXd eigenvectors; // columns, orthonormal
};

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order.
inline SymEig sym_eig(const Eigen::MatrixXd& s) {
    if (s.rows() != s.cols())
        throw InvalidInput("sym_eig: matrix must be square");
    if (!is_symmetric(s, 1e-10))
        throw InvalidInput("sym_eig: matrix is not symmetric within tolerance");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()));
    if (es.info() != Eigen::Success)
        throw NumericalFailure("sym_eig: eigensolver did not converge");
    const int n = static_cast<int>(s.rows());
    SymEig out;
    out.eigenvalues = es.eigenvalues().reverse();
    out.eigenvectors.resize(n, n);
    for (int k = 0; k < n; ++k) out.eigenvectors.col(k) = es.eigenvectors().col(n - 1 - k);
    return out;
}

namespace detail {

template <typename F>
Eigen::MatrixXd spectral_apply(const SymEig& eig, F&& f) {
    Eigen::VectorXd mapped(eig.eigenvalues.size());
    for (Eigen::Index k = 0; k < mapped.size(); ++k) mapped[k] = f(eig.eigenvalues[k]);
    Eigen::MatrixXd m = eig.eigenvectors * mapped.asDiagonal() * eig.eigenvectors.transpose();
    return 0.5 * (m + m.transpose());
}

// log/sqrt/inv_sqrt need strictly positive spectra. Eigenvalues at or
// below 1e-12 * lambda_max are an error, not something to floor:
// callers needing regularization must shrink upstream.
inline void require_positive_spectrum(const SymEig& eig, const char* op) {
    const double lmax = eig.eigenvalues[0];
    if (!(lmax > 0.0) || eig.eigenvalues[eig.eigenvalues.size() - 1] <= 1e-12 * lmax)
        throw DomainError(std::string(op)
                          + ": matrix is not positive definite enough (min/max eigenvalue ratio "
                            "below 1e-12)");
}

} // namespace detail

inline Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& s) {
    return detail::spectral_apply(sym_eig(s), [](double x) { return std::exp(x); });
}

inline Eigen::MatrixXd matrix_log(const Eigen::MatrixXd& s) {
    const SymEig eig = sym_eig(s);
    detail::require_positive_spectrum(eig, "matrix_log");
    return detail::spectral_apply(eig, [](double x) { return std::log(x); });
}

inline Eigen::MatrixXd matrix_sqrt(const Eigen::MatrixXd& s) {
    const SymEig eig = sym_eig(s);
    detail::require_positive_spectrum(eig, "matrix_sqrt");
    return detail::spectral_apply(eig, [](double x) { return std::sqrt(x); });
}

inline Eigen::MatrixXd matrix_inv_sqrt(const Eigen::MatrixXd& s) {
    const SymEig eig = sym_eig(s);
    detail::require_positive_spectrum(eig, "matrix_inv_sqrt");
    return detail::spectral_apply(eig, [](double x) { return 1.0 / std::sqrt(x); });
}

/// sqrt and inverse sqrt from a single eigendecomposition.
struct SqrtPair {
    Eigen::MatrixXd sqrt;
    Eigen::MatrixXd inv_sqrt;
};

inline SqrtPair sqrt_pair(const SpdMatrix& a) {
    const SymEig eig = sym_eig(a.mat());
    detail::require_positive_spectrum(eig, "sqrt_pair");
    return {detail::spectral_apply(eig, [](double x) { return std::sqrt(x); }),
            detail::spectral_apply(eig, [](double x) { return 1.0 / std::sqrt(x); })};
}

/// Flatten the upper triangle of a symmetric matrix row-major over
/// i <= j, unweighted. Exact inverse of mat_from_vec.
inline Eigen::VectorXd vec_upper(const Eigen::MatrixXd& s) {
    if (!is_symmetric(s, 1e-12))
        throw InvalidInput("vec_upper: matrix is not symmetric within tolerance");
    const int c = static_cast<int>(s.rows());
    Eigen::VectorXd v(c * (c + 1) / 2);
    int k = 0;
    for (int i = 0; i < c; ++i)
        for (int j = i; j < c; ++j) v[k++] = s(i, j);
    return v;
}

inline Eigen::MatrixXd mat_from_vec(const Eigen::VectorXd& v) {
    // invert L = c(c+1)/2
    const auto len = v.size();
    const int c = static_cast<int>((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0 + 0.5);
    if (static_cast<Eigen::Index>(c) * (c + 1) / 2 != len)
        throw InvalidInput("mat_from_vec: length " + std::to_string(len)
                           + " is not a triangular number");
    Eigen::MatrixXd s(c, c);
    int k = 0;
    for (int i = 0; i < c; ++i)
        for (int j = i; j < c; ++j) {
            s(i, j) = v[k];
            s(j, i) = v[k];
            ++k;
        }
    return s;
}

/// Element of the tangent space at a base point: the symmetric matrix
/// and its upper-triangular flattening are kept together.
class TangentVector {
public:
    TangentVector(SpdMatrix base, Eigen::MatrixXd sym) : base_(std::move(base)) {
        if (sym.rows() != base_.dim() || sym.cols() != base_.dim())
            throw InvalidInput("TangentVector: dimension mismatch with base point");
        if (!is_symmetric(sym, 1e-12))
            throw InvalidInput("TangentVector: matrix is not symmetric within 1e-12 relative");
        sym_ = 0.5 * (sym + sym.transpose());
        vec_ = vec_upper(sym_);
    }

    const SpdMatrix& base() const noexcept { return base_; }
    const Eigen::MatrixXd& sym() const noexcept { return sym_; }
    const Eigen::VectorXd& vec() const noexcept { return vec_; }
    int dim() const noexcept { return base_.dim(); }

private:
    SpdMatrix base_;
    Eigen::MatrixXd sym_;
    Eigen::VectorXd vec_;
};

/// Logarithm map: tangent vector at A pointing to X.
inline TangentVector log_map(const SpdMatrix& a, const SpdMatrix& x) {
    if (a.dim() != x.dim())
        throw InvalidInput("log_map: dimension mismatch");
    const SqrtPair p = sqrt_pair(a);
    const Eigen::MatrixXd inner = p.inv_sqrt * x.mat() * p.inv_sqrt;
    const Eigen::MatrixXd s = p.sqrt * matrix_log(0.5 * (inner + inner.transpose())) * p.sqrt;
    return TangentVector(a, 0.5 * (s + s.transpose()));
}

/// Exponential map applied to a raw symmetric matrix in T_A.
inline SpdMatrix exp_map(const SpdMatrix& a, const Eigen::MatrixXd& sym) {
    if (sym.rows() != a.dim() || sym.cols() != a.dim())
        throw InvalidInput("exp_map: dimension mismatch");
    if (!is_symmetric(sym, 1e-10))
        throw InvalidInput("exp_map: tangent matrix is not symmetric");
    const SqrtPair p = sqrt_pair(a);
    const Eigen::MatrixXd inner = p.inv_sqrt * sym * p.inv_sqrt;
    const Eigen::MatrixXd m = p.sqrt * matrix_exp(0.5 * (inner + inner.transpose())) * p.sqrt;
    return SpdMatrix(0.5 * (m + m.transpose()));
}

inline SpdMatrix exp_map(const SpdMatrix& a, const TangentVector& s) {
    const double scale = max_abs(a.mat());
    if (s.dim() != a.dim() || max_abs(s.base().mat() - a.mat()) > 1e-10 * scale)
        throw InvalidInput("exp_map: tangent vector is not based at the given point");
    return exp_map(a, s.sym());
}

/// AIRM inner product tr(A^{-1} S1 A^{-1} S2) of two tangent vectors at A.
inline double airm_inner(const SpdMatrix& a, const TangentVector& s1, const TangentVector& s2) {
    if (s1.dim() != a.dim() || s2.dim() != a.dim())
        throw InvalidInput("airm_inner: dimension mismatch");
    const double scale = max_abs(a.mat());
    if (max_abs(s1.base().mat() - a.mat()) > 1e-10 * scale
        || max_abs(s2.base().mat() - a.mat()) > 1e-10 * scale)
        throw InvalidInput("airm_inner: tangent vectors are not based at the given point");
    const Eigen::MatrixXd ai = a.mat().llt().solve(Eigen::MatrixXd::Identity(a.dim(), a.dim()));
    return (ai * s1.sym() * ai * s2.sym()).trace();
}

inline double airm_distance_squared(const SpdMatrix& x1, const SpdMatrix& x2) {
    if (x1.dim() != x2.dim())
        throw InvalidInput("airm_distance: dimension mismatch");
    // eigenvalues of X1^{-1} X2 = eigenvalues of X1^{-1/2} X2 X1^{-1/2}
    const Eigen::MatrixXd ih = matrix_inv_sqrt(x1.mat());
    const Eigen::MatrixXd w = ih * x2.mat() * ih;
    const SymEig eig = sym_eig(0.5 * (w + w.transpose()));
    detail::require_positive_spectrum(eig, "airm_distance");
    double sum = 0.0;
    for (Eigen::Index k = 0; k < eig.eigenvalues.size(); ++k) {
        const double l = std::log(eig.eigenvalues[k]);
        sum += l * l;
    }
    return sum;
}

inline double airm_distance(const SpdMatrix& x1, const SpdMatrix& x2) {
    return std::sqrt(airm_distance_squared(x1, x2));
}

/// Riemannian (Karcher) mean by fixed-point iteration with unit step,
/// initialized at the arithmetic mean. Stops when the Frechet gradient
/// norm ||(1/n) sum Log_mu(X_i)||_F drops to tol.
inline SpdMatrix riemannian_mean(std::span<const SpdMatrix> set, double tol = 1e-8,
                                 int max_iter = 100) {
    if (set.empty())
        throw InvalidInput("riemannian_mean: empty set");
    const int c = set[0].dim();
    for (const SpdMatrix& x : set)
        if (x.dim() != c)
            throw InvalidInput("riemannian_mean: matrices must share one dimension");

    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(c, c);
    for (const SpdMatrix& x : set) acc += x.mat();
    SpdMatrix mu(acc / static_cast<double>(set.size()));

    double grad_norm = 0.0;
    for (int iter = 0; iter <= max_iter; ++iter) {
        const SqrtPair p = sqrt_pair(mu);
        Eigen::MatrixXd whitened_mean = Eigen::MatrixXd::Zero(c, c);
        for (const SpdMatrix& x : set) {
            const Eigen::MatrixXd w = p.inv_sqrt * x.mat() * p.inv_sqrt;
            whitened_mean += matrix_log(0.5 * (w + w.transpose()));
        }
        whitened_mean /= static_cast<double>(set.size());
        grad_norm = (p.sqrt * whitened_mean * p.sqrt).norm();
        if (grad_norm <= tol)
            return mu;
        if (iter == max_iter)
            break;
        const Eigen::MatrixXd next = p.sqrt * matrix_exp(whitened_mean) * p.sqrt;
        mu = SpdMatrix(0.5 * (next + next.transpose()));
    }
    if (grad_norm > 100.0 * tol) {
        std::ostringstream oss;
        oss << "riemannian_mean: no convergence after " << max_iter
            << " iterations (gradient norm " << grad_norm << ", tol " << tol << ", n = "
            << set.size() << ", dim = " << c << ")";
        throw NumericalFailure(oss.str());
    }
    return mu;
}

inline SpdMatrix riemannian_mean(const std::vector<SpdMatrix>& set, double tol = 1e-8,
                                 int max_iter = 100) {
    return riemannian_mean(std::span<const SpdMatrix>(set.data(), set.size()), tol, max_iter);
}

} // namespace rtcsp
