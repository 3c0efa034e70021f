#ifndef GRUV_NUMERIC_HPP
#define GRUV_NUMERIC_HPP

#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

/**
 * @file numeric.hpp
 *
 * @brief Small dense linear-algebra and order-statistic helpers shared by the estimators.
 */

namespace gruv {

/**
 * Flip column signs so that the largest-magnitude entry of every column is nonnegative.
 * The first entry wins when magnitudes tie.
 */
inline void fix_signs(Matrix& m) {
    for (Index c = 0; c < m.cols(); ++c) {
        Index best = 0;
        double best_abs = -1;
        for (Index r = 0; r < m.rows(); ++r) {
            const double a = std::abs(m(r, c));
            if (a > best_abs) {
                best_abs = a;
                best = r;
            }
        }
        if (m(best, c) < 0) {
            m.col(c) *= -1.0;
        }
    }
}

/**
 * Orthonormal basis of the column space of `a`, which must have full column rank.
 */
inline Matrix orthonormal_basis(const Matrix& a, double rel_tol = 1e-10) {
    if (a.cols() == 0) {
        return Matrix(a.rows(), 0);
    }
    if (a.cols() > a.rows()) {
        throw Error("basis is rank-deficient: more columns than rows");
    }
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    if (!(s(0) > 0) || s(s.size() - 1) <= rel_tol * s(0)) {
        throw Error("basis is rank-deficient");
    }
    return svd.matrixU();
}

/**
 * @brief Eigen-decomposition of a symmetric matrix with eigenvalues in nonincreasing order.
 */
struct SymmetricEigen {
    Vector values;
    Matrix vectors;
};

inline SymmetricEigen descending_eigen(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    if (es.info() != Eigen::Success) {
        throw Error("symmetric eigen-decomposition failed");
    }
    SymmetricEigen out;
    out.values = es.eigenvalues().reverse();
    out.vectors = es.eigenvectors().rowwise().reverse();
    return out;
}

/**
 * Sample quantile with linear interpolation between order statistics, i.e., position `prob * (n - 1)`.
 * `sorted` must be sorted in nondecreasing order.
 */
inline double quantile_sorted(const std::vector<double>& sorted, double prob) {
    if (sorted.empty()) {
        throw Error("quantile of an empty sample");
    }
    const double pos = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, 0.5);
}

template<class Derived>
double median(const Eigen::DenseBase<Derived>& x) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(x.size()));
    for (Index i = 0; i < x.size(); ++i) {
        v.push_back(x.derived().coeff(i));
    }
    return median(std::move(v));
}

/**
 * Median absolute deviation scaled by 1.4826 for consistency at the normal.
 */
inline double scaled_mad(const std::vector<double>& values) {
    const double m = median(values);
    std::vector<double> dev(values.size());
    std::transform(values.begin(), values.end(), dev.begin(), [m](double v) { return std::abs(v - m); });
    return 1.4826 * median(std::move(dev));
}

/**
 * Upper tail probability of a chi-square variable with one degree of freedom.
 */
inline double chisq1_upper(double statistic) {
    if (!(statistic > 0)) {
        return 1.0;
    }
    return std::erfc(std::sqrt(statistic / 2.0));
}

}

#endif
