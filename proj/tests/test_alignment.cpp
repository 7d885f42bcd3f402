#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "rtcsp/alignment.hpp"
#include "test_util.hpp"

using namespace rtcsp;
using test_util::random_matrix;
using test_util::random_spd;
using test_util::random_symmetric;

namespace {

/// Cloud of SPD matrices scattered around a random trace-normalized
/// base point, mimicking per-class trial covariances.
std::vector<SpdMatrix> spd_cloud(Rng& rng, int dim, int count, double spread = 0.15) {
    Eigen::MatrixXd base_m = random_spd(rng, dim, 0.4).mat();
    const SpdMatrix base(base_m / base_m.trace());
    std::vector<SpdMatrix> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i)
        out.push_back(exp_map(base, random_symmetric(rng, dim, spread / dim)));
    return out;
}

Eigen::MatrixXd rows_of(const std::vector<SpdMatrix>& covs) {
    auto [mean, rows] = tangent_vectors_at_mean(covs);
    (void)mean;
    return rows;
}

} // namespace

TEST_CASE("tangent_vectors_at_mean on duplicate and commuting sets") {
    Rng rng(501);
    const SpdMatrix a = random_spd(rng, 4);
    auto [mean, rows] = tangent_vectors_at_mean({a, a});
    CHECK((mean.mat() - a.mat()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(rows.cwiseAbs().maxCoeff() < 1e-10);

    Eigen::Vector2d d1(1.0, 4.0), d2(4.0, 1.0);
    auto [mid, rows2] =
        tangent_vectors_at_mean({SpdMatrix(d1.asDiagonal()), SpdMatrix(d2.asDiagonal())});
    CHECK((rows2.row(0) + rows2.row(1)).cwiseAbs().maxCoeff() < 1e-7);

    CHECK_THROWS_AS(tangent_vectors_at_mean({a}), InvalidInput);
}

TEST_CASE("tangent rows at the Karcher mean sum to about zero") {
    Rng rng(502);
    const auto cloud = spd_cloud(rng, 6, 25);
    const Eigen::MatrixXd rows = rows_of(cloud);
    CHECK(rows.colwise().sum().norm() < 1e-6);
}

TEST_CASE("top2_pca recovers an exact coordinate plane") {
    Rng rng(503);
    const int n = 30, d = 9;
    Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(n, d);
    for (int i = 0; i < n; ++i) {
        rows(i, 2) = 3.0 * rng.normal();
        rows(i, 5) = 1.0 * rng.normal();
    }
    const Eigen::MatrixXd p = top2_pca(rows);
    CHECK((p * p.transpose() - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
    Eigen::MatrixXd planted = Eigen::MatrixXd::Zero(d, d);
    planted(2, 2) = 1.0;
    planted(5, 5) = 1.0;
    CHECK((p.transpose() * p - planted).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("top2_pca rejects rank-1 data") {
    Eigen::MatrixXd rows(2, 5);
    rows.row(0) << 1.0, -2.0, 0.5, 3.0, 0.0;
    rows.row(1) = -rows.row(0);
    CHECK_THROWS_AS(top2_pca(rows), DegenerateInput);
    CHECK_THROWS_AS(top2_pca(rows.topRows(1)), InvalidInput);
}

TEST_CASE("top2_pca recovers a planted dominant plane from a known basis") {
    Rng rng(504);
    const int d = 10;
    // orthonormal pair from QR of a random matrix
    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(rng, d, d)).householderQ();
    const Eigen::VectorXd b1 = q.col(0), b2 = q.col(1);
    Eigen::MatrixXd rows(50, d);
    for (int i = 0; i < 50; ++i)
        rows.row(i) =
            (std::sqrt(10.0) * rng.normal() * b1 + rng.normal() * b2).transpose();
    const Eigen::MatrixXd p = top2_pca(rows);
    // principal angles: singular values of P B are cosines; all ~1
    const Eigen::MatrixXd basis = (Eigen::MatrixXd(d, 2) << b1, b2).finished();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(p * basis);
    CHECK(svd.singularValues().minCoeff() > 1.0 - 1e-9);
    // sign convention: largest-magnitude entry of each row positive
    for (int r = 0; r < 2; ++r) {
        Eigen::Index imax = 0;
        p.row(r).cwiseAbs().maxCoeff(&imax);
        CHECK(p(r, imax) > 0.0);
    }
}

TEST_CASE("pc_space_cholesky closed forms and reconstruction") {
    Rng rng(505);
    const int d = 6, n = 40;
    // rows chosen so the PC-space covariance is exactly known: put
    // mass on the first two coordinates only
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(2, d);
    p(0, 0) = 1.0;
    p(1, 1) = 1.0;

    Eigen::MatrixXd eye_rows = Eigen::MatrixXd::Zero(n, d);
    for (int i = 0; i < n / 2; ++i) {
        eye_rows(2 * i, 0) = 1.0;
        eye_rows(2 * i + 1, 1) = 1.0;
    }
    eye_rows *= std::sqrt(2.0); // second moment = I after 1/N
    const Eigen::Matrix2d l_eye = pc_space_cholesky(p, eye_rows);
    CHECK((l_eye - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::MatrixXd scaled = eye_rows;
    scaled.col(0) *= 2.0; // PC covariance diag(4, 1)
    const Eigen::Matrix2d l_diag = pc_space_cholesky(p, scaled);
    CHECK(l_diag(0, 0) == Catch::Approx(2.0).margin(1e-12));
    CHECK(l_diag(1, 1) == Catch::Approx(1.0).margin(1e-12));
    CHECK(l_diag(0, 1) == 0.0);

    const Eigen::MatrixXd rows = random_matrix(rng, n, d);
    const Eigen::MatrixXd pr = top2_pca(rows);
    const Eigen::Matrix2d l = pc_space_cholesky(pr, rows);
    const Eigen::Matrix2d g = (pr * rows.transpose() * rows * pr.transpose()) / n;
    CHECK((l * l.transpose() - g).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(l(0, 0) > 0.0);
    CHECK(l(1, 1) > 0.0);
}

TEST_CASE("align_class recoloring identity") {
    Rng rng(506);
    for (int rep = 0; rep < 5; ++rep) {
        const int n = 10 + static_cast<int>(rng.bounded(20));
        const int m = n + 5; // source/target counts differ
        const auto src = spd_cloud(rng, 5, n);
        const auto tgt = spd_cloud(rng, 5, m);
        const ClassAlignment ca = align_class(src, tgt);

        Eigen::MatrixXd aligned_rows(n, 15);
        for (int i = 0; i < n; ++i)
            aligned_rows.row(i) = log_map(ca.map.M_T, ca.aligned[i]).vec().transpose();
        const Eigen::MatrixXd proj = ca.map.P_T * aligned_rows.transpose();
        const Eigen::Matrix2d second_moment = (proj * proj.transpose()) / n;
        const Eigen::Matrix2d expected = ca.map.L_T * ca.map.L_T.transpose();
        CHECK((second_moment - expected).cwiseAbs().maxCoeff() < 1e-10);

        // all aligned matrices SPD with sane traces
        for (const SpdMatrix& s : ca.aligned) {
            CHECK(sym_eig(s.mat()).eigenvalues.minCoeff() > 0.0);
            CHECK(s.mat().trace() > 0.1 * tgt[0].mat().trace());
            CHECK(s.mat().trace() < 10.0 * tgt[0].mat().trace());
        }
    }
}

TEST_CASE("align_class self-alignment consistency") {
    Rng rng(507);
    const auto covs = spd_cloud(rng, 4, 15);
    const ClassAlignment ca = align_class(covs, covs);
    CHECK((ca.map.P_S - ca.map.P_T).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ca.map.L_S - ca.map.L_T).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::MatrixXd aligned_rows(15, 10);
    for (int i = 0; i < 15; ++i)
        aligned_rows.row(i) = log_map(ca.map.M_T, ca.aligned[i]).vec().transpose();
    const Eigen::MatrixXd proj = ca.map.P_T * aligned_rows.transpose();
    const Eigen::Matrix2d second_moment = (proj * proj.transpose()) / 15.0;
    CHECK((second_moment - ca.map.L_T * ca.map.L_T.transpose()).cwiseAbs().maxCoeff()
          < 1e-10);

    // P_S P_S' == I within 1e-10 (AlignmentMap invariant)
    CHECK((ca.map.P_S * ca.map.P_S.transpose() - Eigen::Matrix2d::Identity())
              .cwiseAbs()
              .maxCoeff()
          < 1e-10);
}

TEST_CASE("align_class refuses undersized classes") {
    Rng rng(508);
    const auto big = spd_cloud(rng, 4, 10);
    const std::vector<SpdMatrix> two{big[0], big[1]};
    const std::vector<SpdMatrix> one{big[0]};
    CHECK_THROWS_AS(align_class(two, big), DegenerateInput);
    CHECK_THROWS_AS(align_class(big, two), DegenerateInput);
    CHECK_THROWS_AS(align_class(one, big), InvalidInput);
    // dimension mismatch
    const auto other = spd_cloud(rng, 5, 10);
    CHECK_THROWS_AS(align_class(big, other), InvalidInput);
}

TEST_CASE("align_subject aligns class by class and preserves order") {
    Rng rng(509);
    const int per_class = 8;
    std::vector<SpdMatrix> src, tgt;
    std::vector<Label> src_y, tgt_y;
    for (Label c : {1, 2}) {
        for (const auto& s : spd_cloud(rng, 4, per_class)) {
            src.push_back(s);
            src_y.push_back(c);
        }
        for (const auto& s : spd_cloud(rng, 4, per_class + 3)) {
            tgt.push_back(s);
            tgt_y.push_back(c);
        }
    }
    const SubjectAlignment sa = align_subject(src, src_y, tgt, tgt_y);
    REQUIRE(sa.maps.size() == 2);
    CHECK(sa.maps[0].class_id == 1);
    CHECK(sa.maps[1].class_id == 2);
    CHECK(sa.covs.size() == src.size());
    CHECK(sa.labels == src_y);

    // permuting source trial order permutes output identically
    std::vector<std::size_t> perm(src.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng shuffler(99);
    shuffler.shuffle(perm);
    std::vector<SpdMatrix> src_p;
    std::vector<Label> src_y_p;
    for (std::size_t i : perm) {
        src_p.push_back(src[i]);
        src_y_p.push_back(src_y[i]);
    }
    const SubjectAlignment sa_p = align_subject(src_p, src_y_p, tgt, tgt_y);
    for (std::size_t i = 0; i < perm.size(); ++i)
        CHECK((sa_p.covs[i].mat() - sa.covs[perm[i]].mat()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("align_subject with four classes produces four maps") {
    Rng rng(510);
    std::vector<SpdMatrix> src, tgt;
    std::vector<Label> src_y, tgt_y;
    for (Label c : {1, 2, 3, 4}) {
        for (const auto& s : spd_cloud(rng, 4, 6)) {
            src.push_back(s);
            src_y.push_back(c);
        }
        for (const auto& s : spd_cloud(rng, 4, 6)) {
            tgt.push_back(s);
            tgt_y.push_back(c);
        }
    }
    const SubjectAlignment sa = align_subject(src, src_y, tgt, tgt_y);
    CHECK(sa.maps.size() == 4);
}

TEST_CASE("align_subject reports missing classes") {
    Rng rng(511);
    std::vector<SpdMatrix> src, tgt;
    std::vector<Label> src_y, tgt_y;
    for (Label c : {1, 2}) {
        for (const auto& s : spd_cloud(rng, 4, 6)) {
            src.push_back(s);
            src_y.push_back(c);
        }
    }
    for (const auto& s : spd_cloud(rng, 4, 6)) {
        tgt.push_back(s);
        tgt_y.push_back(1); // class 2 missing from target
    }
    CHECK_THROWS_AS(align_subject(src, src_y, tgt, tgt_y), MissingClassError);
}

TEST_CASE("alignment is deterministic") {
    Rng rng(512);
    const auto src = spd_cloud(rng, 4, 9);
    const auto tgt = spd_cloud(rng, 4, 12);
    const ClassAlignment a = align_class(src, tgt);
    const ClassAlignment b = align_class(src, tgt);
    for (std::size_t i = 0; i < a.aligned.size(); ++i)
        CHECK((a.aligned[i].mat() - b.aligned[i].mat()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("strict unnormalized cholesky mode differs when counts differ") {
    Rng rng(513);
    const auto src = spd_cloud(rng, 4, 8);
    const auto tgt = spd_cloud(rng, 4, 20);
    AlignOptions strict;
    strict.count_normalized = false;
    const ClassAlignment a = align_class(src, tgt);
    const ClassAlignment b = align_class(src, tgt, 0, strict);
    // recoloring scale differs by ~sqrt(M/N) between the modes
    CHECK((a.aligned[0].mat() - b.aligned[0].mat()).cwiseAbs().maxCoeff() > 1e-6);
    // normalized mode: L factors comparable across different counts
    CHECK((b.map.L_T * b.map.L_T.transpose()).trace()
          == Catch::Approx((a.map.L_T * a.map.L_T.transpose()).trace() * 20.0).epsilon(1e-10));
}
