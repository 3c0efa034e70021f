#ifndef GRUV_RUV_CLASSIC_HPP
#define GRUV_RUV_CLASSIC_HPP

#include "core.hpp"
#include "numeric.hpp"

#include <string>

/**
 * @file ruv_classic.hpp
 *
 * @brief SVD-based estimators of the unwanted-variation basis from negative-control genes.
 */

namespace gruv {

/**
 * @brief Orthogonal split of sample space into the covariate span and its complement.
 *
 * `r1` (n-by-d) is an orthonormal basis of span(X) and `r0` (n-by-(n-d)) completes it to an orthogonal matrix.
 */
struct RotationPair {
    Matrix r0;
    Matrix r1;
};

/**
 * Rotation for a covariate matrix with d columns, from a full Householder QR.
 * For a single covariate `r1 = x / |x|`.
 */
inline RotationPair build_rotation(const Matrix& x) {
    const Index n = x.rows(), d = x.cols();
    if (d < 1 || d >= n) {
        throw Error("covariate matrix must have between 1 and n - 1 columns");
    }
    if (x.norm() == 0) {
        throw Error("degenerate covariate");
    }
    Eigen::HouseholderQR<Matrix> qr(x);
    const Matrix r = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
    const double rmax = r.diagonal().cwiseAbs().maxCoeff();
    if (r.diagonal().cwiseAbs().minCoeff() <= 1e-12 * rmax) {
        throw Error("degenerate covariate");
    }
    Matrix q = qr.householderQ() * Matrix::Identity(n, n);
    for (Index c = 0; c < d; ++c) {
        if (r(c, c) < 0) {
            q.col(c) *= -1.0;
        }
    }
    return RotationPair{q.rightCols(n - d), q.leftCols(d)};
}

inline RotationPair build_rotation(const Vector& x) {
    return build_rotation(Matrix(x));
}

namespace detail {

inline bool singular_tie(const Vector& s, int k) {
    return k < s.size() && std::abs(s(k - 1) - s(k)) <= 1e-10 * std::max(1.0, s(0));
}

inline void require_rank(const Vector& s, int k, const char* message) {
    if (s.size() < k || !(s(0) > 0) || s(k - 1) <= 1e-10 * s(0)) {
        throw Error(message);
    }
}

}

/**
 * RUV2: leading `k` left singular vectors of the column-centered control block.
 * Only `|controls| >= k` is required here; see `StudyDesign::validate()` for the full pipeline check.
 */
inline FactorEstimate ruv2(const ExpressionMatrix& y, const StudyDesign& design) {
    const int k = design.k;
    if (k < 1) {
        throw Error("k must be at least 1");
    }
    design.validate_controls(y.p());
    if (static_cast<Index>(design.controls.size()) < k || y.n() < k) {
        throw Error("control matrix rank < k");
    }

    const Matrix yc = center_columns(y.select(design.controls));
    Eigen::BDCSVD<Matrix> svd(yc, Eigen::ComputeThinU);
    const Vector& s = svd.singularValues();
    detail::require_rank(s, k, "control matrix rank < k");

    FactorEstimate out;
    out.method = FactorMethod::RUV2;
    out.w_hat = svd.matrixU().leftCols(k);
    fix_signs(out.w_hat);
    if (detail::singular_tie(s, k)) {
        out.spectrum_tie = true;
        out.diagnostics.push_back("tied singular values at position k");
    }
    return out;
}

/**
 * RUV4: factor analysis of the data rotated orthogonally to the covariate,
 * followed by a least-squares back-solve of the covariate-direction component from the control genes.
 */
inline FactorEstimate ruv4(const ExpressionMatrix& y, const StudyDesign& design) {
    const int k = design.k;
    if (k < 1) {
        throw Error("k must be at least 1");
    }
    if (design.covariate.size() != y.n()) {
        throw Error("covariate length does not match the number of samples");
    }
    design.validate_controls(y.p());
    if (static_cast<Index>(design.controls.size()) < k) {
        throw Error("control matrix rank < k");
    }
    if (y.n() - 1 < k) {
        throw Error("rotated space has fewer than k dimensions");
    }

    const Matrix ystar = center_columns(y.values());
    const auto rot = build_rotation(Vector(center_vector(design.covariate)));

    const Matrix rotated = rot.r0.transpose() * ystar;
    Eigen::BDCSVD<Matrix> svd(rotated, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    detail::require_rank(s, k, "rotated data rank < k");

    const Matrix u = svd.matrixU().leftCols(k);
    // k-by-p loadings, so that u * loadings is the rank-k truncation.
    const Matrix loadings = s.head(k).asDiagonal() * svd.matrixV().leftCols(k).transpose();

    Matrix control_loadings(k, static_cast<Index>(design.controls.size()));
    for (std::size_t c = 0; c < design.controls.size(); ++c) {
        control_loadings.col(static_cast<Index>(c)) = loadings.col(design.controls[c]);
    }
    const Matrix gram = control_loadings * control_loadings.transpose();
    Eigen::LDLT<Matrix> gram_solver(gram);
    const Vector gd = gram_solver.vectorD().cwiseAbs();
    if (gram_solver.info() != Eigen::Success || !(gd.maxCoeff() > 0) || gd.minCoeff() <= 1e-12 * gd.maxCoeff()) {
        throw Error("control loadings rank-deficient");
    }

    Matrix ystar_controls(y.n(), static_cast<Index>(design.controls.size()));
    for (std::size_t c = 0; c < design.controls.size(); ++c) {
        ystar_controls.col(static_cast<Index>(c)) = ystar.col(design.controls[c]);
    }
    const Matrix rhs = control_loadings * (rot.r1.transpose() * ystar_controls).transpose();
    const Matrix r1w = gram_solver.solve(rhs).transpose();

    FactorEstimate out;
    out.method = FactorMethod::RUV4;
    out.w_hat = rot.r0 * u + rot.r1 * r1w;
    fix_signs(out.w_hat);
    if (detail::singular_tie(s, k)) {
        out.spectrum_tie = true;
        out.diagnostics.push_back("tied singular values at position k");
    }
    return out;
}

}

#endif
