#ifndef GRUV_GAMMA_LSE_HPP
#define GRUV_GAMMA_LSE_HPP

#include "core.hpp"
#include "numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

/**
 * @file gamma_lse.hpp
 *
 * @brief Per-gene regression `Y_ij = eta_j' Z_i + e_ij` with `Z_i = (1, X_i, W_i')'`,
 * fitted by least squares or by the minimum gamma-divergence criterion, with Bonferroni calling.
 */

namespace gruv {

enum class ColumnRole { Intercept, Covariate, Unwanted };

/**
 * @brief Regression design `[1, X, W]`.
 */
class RegressionDesign {
public:
    RegressionDesign() = default;

    RegressionDesign(const Vector& covariate, const Matrix& unwanted) {
        const Index n = covariate.size();
        if (unwanted.rows() != n && unwanted.cols() > 0) {
            throw Error("unwanted-variation basis has the wrong number of rows");
        }
        z_.resize(n, 2 + unwanted.cols());
        z_.col(0).setOnes();
        z_.col(1) = covariate;
        if (unwanted.cols() > 0) {
            z_.rightCols(unwanted.cols()) = unwanted;
        }
        roles_.assign(static_cast<std::size_t>(z_.cols()), ColumnRole::Unwanted);
        roles_[0] = ColumnRole::Intercept;
        roles_[1] = ColumnRole::Covariate;

        if (!z_.allFinite()) {
            throw Error("design matrix contains non-finite values");
        }
        if (n <= z_.cols()) {
            throw Error("design has at least as many columns as samples");
        }
        const Vector s = Eigen::JacobiSVD<Matrix>(z_).singularValues();
        if (!(s(s.size() - 1) > 1e-10 * s(0))) {
            throw Error("design matrix is rank-deficient");
        }
    }

    const Matrix& z() const { return z_; }
    const std::vector<ColumnRole>& column_roles() const { return roles_; }
    Index n() const { return z_.rows(); }
    Index cols() const { return z_.cols(); }

    static constexpr Index beta_index = 1;

private:
    Matrix z_;
    std::vector<ColumnRole> roles_;
};

/**
 * Design for a factor estimate. For gamma-RUV the location column is dropped
 * when it lies within 1e-6 radians of span(1, X), which leaves the spanned space unchanged.
 */
inline RegressionDesign make_design(const Vector& covariate, const FactorEstimate& factors) {
    if (factors.method != FactorMethod::GammaRUV || factors.w_hat.cols() == 0) {
        return RegressionDesign(covariate, factors.w_hat);
    }
    const Index n = covariate.size();
    Matrix base(n, 2);
    base.col(0).setOnes();
    base.col(1) = covariate;
    const Vector mu = factors.w_hat.col(0);
    const double norm = mu.norm();
    bool drop = !(norm > 0);
    if (!drop) {
        const Matrix q = Eigen::HouseholderQR<Matrix>(base).householderQ() * Matrix::Identity(n, 2);
        const Vector resid = mu - q * (q.transpose() * mu);
        drop = resid.norm() / norm < std::sin(1e-6);
    }
    if (drop) {
        return RegressionDesign(covariate, factors.w_hat.rightCols(factors.w_hat.cols() - 1));
    }
    return RegressionDesign(covariate, factors.w_hat);
}

/**
 * @brief Fitted per-gene regression and its test of `beta_j = 0`.
 *
 * `eta = (delta, beta, alpha')`; `beta_var` is the variance of the `beta` estimate
 * and `pvalue = 1 - F_chisq1(beta^2 / beta_var)`. `weights` sum to one.
 */
struct GeneTest {
    Vector eta;
    double sigma2 = 0;
    double beta_var = 0;
    double pvalue = 1;
    Vector weights;
    int iterations = 0;
    bool converged = true;
    bool variance_collapse = false;

    double beta() const { return eta(RegressionDesign::beta_index); }
    Vector alpha() const { return eta.tail(eta.size() - 2); }
};

namespace detail {

inline void finish_test(GeneTest& t) {
    t.pvalue = chisq1_upper(t.beta() * t.beta() / t.beta_var);
}

inline Vector weighted_solve(const Matrix& z, const Vector& y, const Vector& w) {
    const Vector sw = w.cwiseSqrt();
    return (sw.asDiagonal() * z).colPivHouseholderQr().solve(sw.asDiagonal() * y);
}

/**
 * Normalized weights proportional to `f(y_i | z_i)^gamma`.
 */
inline Vector regression_weights(const Vector& resid, double sigma2, double gamma) {
    const Index n = resid.size();
    if (gamma == 0) {
        return Vector::Constant(n, 1.0 / static_cast<double>(n));
    }
    Vector logw = (-0.5 * gamma / sigma2) * resid.array().square();
    logw.array() -= logw.maxCoeff();
    Vector w = logw.array().exp();
    return w / w.sum();
}

}

/**
 * Classical least squares with `sigma^2 = RSS / (n - cols)` and the normal-theory variance of `beta`.
 */
inline GeneTest fit_lse(const Vector& y, const RegressionDesign& design) {
    const Matrix& z = design.z();
    const Index n = design.n(), q = design.cols();
    if (y.size() != n) {
        throw Error("response length does not match the design");
    }
    if (n <= q) {
        throw Error("design matrix is rank-deficient");
    }

    GeneTest out;
    Eigen::ColPivHouseholderQR<Matrix> qr(z);
    if (qr.rank() < q) {
        throw Error("design matrix is rank-deficient");
    }
    out.eta = qr.solve(y);
    const double rss = (y - z * out.eta).squaredNorm();
    out.sigma2 = std::max(rss / static_cast<double>(n - q), 1e-300);
    const Matrix ztz_inv = (z.transpose() * z).ldlt().solve(Matrix::Identity(q, q));
    out.beta_var = out.sigma2 * ztz_inv(RegressionDesign::beta_index, RegressionDesign::beta_index);
    out.weights = Vector::Constant(n, 1.0 / static_cast<double>(n));
    out.iterations = 0;
    detail::finish_test(out);
    return out;
}

/**
 * Sandwich estimate `A^-1 B A^-T` of the asymptotic covariance of `sqrt(n) (theta_hat - theta)`,
 * `theta = (eta, sigma^2)`, for the gamma-regression estimating functions
 *
 *     psi_i = u_i * ( r_i z_i / s ,  (r_i^2 / s - 1 / (gamma + 1)) / (2 s) ),  u_i = exp(-gamma r_i^2 / (2 s)),
 *
 * which are the gradients of the summands of the criterion up to a common positive factor.
 * At gamma = 0 these are the normal likelihood scores. Derivatives are analytic.
 */
inline Matrix sandwich_covariance(const Vector& y, const RegressionDesign& design, const GeneTest& fit, const GammaConfig& cfg) {
    const Matrix& z = design.z();
    const Index n = design.n(), q = design.cols(), dim = q + 1;
    const double gamma = cfg.gamma, s = fit.sigma2, c = 1.0 / (gamma + 1.0);
    if (!(s > 0)) {
        throw Error("non-identified fit");
    }

    const Vector r = y - z * fit.eta;
    Vector logu = (-0.5 * gamma / s) * r.array().square();
    logu.array() -= logu.maxCoeff();
    const Vector u = logu.array().exp();

    Matrix a = Matrix::Zero(dim, dim), b = Matrix::Zero(dim, dim);
    Vector psi(dim);
    for (Index i = 0; i < n; ++i) {
        const double ri = r(i), r2 = ri * ri, ui = u(i);
        const auto zi = z.row(i).transpose();
        const double g = r2 / s - c;

        psi.head(q) = (ui * ri / s) * zi;
        psi(q) = ui * g / (2 * s);
        b.noalias() += psi * psi.transpose();

        // Negative Jacobian blocks of psi_i.
        a.topLeftCorner(q, q).noalias() -= (ui / s * (gamma * r2 / s - 1.0)) * (zi * zi.transpose());
        a.block(0, q, q, 1) -= (ui * ri / (s * s) * (gamma * r2 / (2 * s) - 1.0)) * zi;
        a.block(q, 0, 1, q) -= (ui * ri / (2 * s * s) * (gamma * g - 2.0)) * zi.transpose();
        a(q, q) -= ui / (2 * s * s) * (g * gamma * r2 / (2 * s) - r2 / s - g);
    }
    a /= static_cast<double>(n);
    b /= static_cast<double>(n);

    Eigen::FullPivLU<Matrix> lu(a);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
        throw Error("non-identified fit");
    }
    const Matrix ainv = lu.inverse();
    Matrix out = ainv * b * ainv.transpose();
    return 0.5 * (out + out.transpose());
}

/**
 * gamma-LSE: fixed point of
 *
 *     eta     = (Z' Om Z)^-1 Z' Om y
 *     sigma^2 = (gamma + 1) r' Om r / tr(Om),   Om = diag{f(y_i | z_i)^gamma},
 *
 * started from least squares. The test uses `beta_var = [S]_beta / n` from `sandwich_covariance()`.
 * Non-convergence is flagged with the last iterate kept; a fitted variance below
 * `1e-12 var(y)` stops the iteration with `variance_collapse` set.
 */
inline GeneTest fit_gamma_lse(const Vector& y, const RegressionDesign& design, const GammaConfig& cfg) {
    cfg.validate();
    const Matrix& z = design.z();
    const Index n = design.n();
    if (y.size() != n) {
        throw Error("response length does not match the design");
    }

    GeneTest out;
    {
        const auto init = fit_lse(y, design);
        out.eta = init.eta;
        out.sigma2 = (y - z * out.eta).squaredNorm() / static_cast<double>(n);
    }
    const double var_y = (y.array() - y.mean()).square().sum() / static_cast<double>(n);
    const double collapse = 1e-12 * var_y;
    if (!(out.sigma2 > collapse)) {
        out.variance_collapse = true;
    }

    out.converged = false;
    for (int it = 1; it <= cfg.max_iter && !out.variance_collapse; ++it) {
        const Vector w = detail::regression_weights(y - z * out.eta, out.sigma2, cfg.gamma);
        const Vector eta = detail::weighted_solve(z, y, w);
        const Vector r = y - z * eta;
        const double sigma2 = (cfg.gamma + 1.0) * w.dot(r.cwiseAbs2());

        const double deta = (eta - out.eta).norm() / (1.0 + eta.norm());
        const double dsig = std::abs(sigma2 - out.sigma2) / (1.0 + sigma2);
        out.eta = eta;
        out.sigma2 = sigma2;
        out.iterations = it;
        if (!(sigma2 > collapse)) {
            out.variance_collapse = true;
            break;
        }
        if (std::max(deta, dsig) < cfg.tol) {
            out.converged = true;
            break;
        }
    }

    if (out.variance_collapse) {
        out.sigma2 = std::max(out.sigma2, 1e-300);
        out.weights = detail::regression_weights(y - z * out.eta, out.sigma2, cfg.gamma);
        out.beta_var = std::numeric_limits<double>::min();
        out.converged = false;
        detail::finish_test(out);
        return out;
    }

    out.weights = detail::regression_weights(y - z * out.eta, out.sigma2, cfg.gamma);
    const Matrix s = sandwich_covariance(y, design, out, cfg);
    out.beta_var = s(RegressionDesign::beta_index, RegressionDesign::beta_index) / static_cast<double>(n);
    detail::finish_test(out);
    return out;
}

/**
 * @brief Genes called by Bonferroni at family-wise level alpha.
 */
struct DeCallSet {
    std::vector<Index> indices;
    double threshold = 0;
};

/**
 * Indices with `pvalue < alpha / p`, where p counts every test passed in.
 * With `exclude_controls` the control genes still count towards p but are never called.
 */
inline DeCallSet call_de_genes(const std::vector<double>& pvalues, const StudyDesign& design, bool exclude_controls = false) {
    DeCallSet out;
    const auto p = pvalues.size();
    out.threshold = design.fwer_alpha / static_cast<double>(p);
    std::vector<char> is_control(p, 0);
    if (exclude_controls) {
        for (auto c : design.controls) {
            if (c >= 0 && static_cast<std::size_t>(c) < p) {
                is_control[static_cast<std::size_t>(c)] = 1;
            }
        }
    }
    for (std::size_t j = 0; j < p; ++j) {
        if (!is_control[j] && pvalues[j] < out.threshold) {
            out.indices.push_back(static_cast<Index>(j));
        }
    }
    return out;
}

inline DeCallSet call_de_genes(const std::vector<GeneTest>& tests, const StudyDesign& design, bool exclude_controls = false) {
    std::vector<double> pv;
    pv.reserve(tests.size());
    for (const auto& t : tests) {
        pv.push_back(t.pvalue);
    }
    return call_de_genes(pv, design, exclude_controls);
}

}

#endif
