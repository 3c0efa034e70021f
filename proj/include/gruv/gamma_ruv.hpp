#ifndef GRUV_GAMMA_RUV_HPP
#define GRUV_GAMMA_RUV_HPP

#include "core.hpp"
#include "numeric.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

/**
 * @file gamma_ruv.hpp
 *
 * @brief Robust estimation of the unwanted-variation basis by minimum gamma-divergence location/scatter.
 *
 * The columns of the centered control block are treated as observations in sample space,
 * `Y_j = mu + Gamma nu_j + e_j`, so that `span([mu, Gamma]) = span(W)`.
 * Fitting a multivariate normal by the minimum gamma-divergence criterion leads to the reweighted fixed point
 *
 *     mu    = sum_j w_j Y_j / sum_j w_j
 *     Sigma = (gamma + 1) sum_j w_j (Y_j - mu)(Y_j - mu)' / sum_j w_j
 *
 * with `w_j = f(Y_j; mu, Sigma)^gamma`.
 * The normalizing constant of the density is common to all observations and cancels,
 * so only `-gamma/2` times the squared Mahalanobis distance enters the log-weights.
 */

namespace gruv {

/**
 * @brief Result of the location/scatter fixed point.
 *
 * `weights` are the normalized density weights of the observations at the returned `(mu, sigma)`.
 */
struct LocationScatter {
    Vector mu;
    Matrix sigma;
    Vector weights;
    int iterations = 0;
    bool converged = false;
    bool ridge_applied = false;
    std::vector<std::string> diagnostics;
};

namespace detail {

inline void symmetrize(Matrix& m) {
    m = (0.5 * (m + m.transpose())).eval();
}

/**
 * Adds the relative ridge when there are too few observations or the scatter is numerically singular.
 * A trace at or below `negligible` counts as a null scatter and receives `ridge` itself.
 */
inline bool regularize_scatter(Matrix& sigma, Index nobs, double ridge, double negligible = 0) {
    const Index dim = sigma.rows();
    bool needed = nobs <= dim;
    if (!needed) {
        const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(sigma, Eigen::EigenvaluesOnly).eigenvalues();
        const double lmax = ev.maxCoeff();
        needed = !(lmax > 0) || ev.minCoeff() < 1e-12 * lmax;
    }
    if (!needed) {
        return false;
    }
    const double tr = sigma.trace();
    const double amount = tr > negligible ? ridge * tr / static_cast<double>(dim) : ridge;
    sigma.diagonal().array() += amount;
    return true;
}

/**
 * Normalized gamma-weights of the observations (columns of `obs`) under N(mu, sigma).
 * Distances are evaluated through the eigen-decomposition of `sigma`, clamping eigenvalues at a tiny floor.
 */
inline Vector location_scatter_weights(const Matrix& obs, const Vector& mu, const Matrix& sigma, double gamma, int nthreads) {
    const Index m = obs.cols();
    if (gamma == 0) {
        return Vector::Constant(m, 1.0 / static_cast<double>(m));
    }

    const auto eig = descending_eigen(sigma);
    const double floor = std::max(eig.values(0), std::numeric_limits<double>::min()) * 1e-300;
    const Vector inv_sqrt = eig.values.cwiseMax(floor).cwiseSqrt().cwiseInverse();
    const Matrix whiten = inv_sqrt.asDiagonal() * eig.vectors.transpose();

    Vector logw(m);
    parallel_for(static_cast<std::size_t>(m), nthreads, [&](std::size_t j) {
        const Index jj = static_cast<Index>(j);
        logw(jj) = -0.5 * gamma * (whiten * (obs.col(jj) - mu)).squaredNorm();
    });
    logw.array() -= logw.maxCoeff();
    Vector w = logw.array().exp();
    w /= w.sum();
    return w;
}

inline void weighted_moments(const Matrix& obs, const Vector& w, double gamma, Vector& mu, Matrix& sigma) {
    mu = obs * w;
    const Matrix dev = obs.colwise() - mu;
    sigma = (gamma + 1.0) * (dev * w.asDiagonal() * dev.transpose());
    symmetrize(sigma);
}

}

/**
 * Solve the gamma-weighted location/scatter equations for the observations stored in the columns of `obs`.
 *
 * Starts from the coordinatewise median and a diagonal of squared scaled MADs.
 * Iterates until `max(|dmu| / (1 + |mu|), |dSigma|_F / (1 + |Sigma|_F)) < tol`;
 * running out of iterations is reported through `converged = false` rather than an exception.
 */
inline LocationScatter fit_location_scatter(const Matrix& obs, const GammaConfig& cfg, int nthreads = 1) {
    cfg.validate();
    const Index dim = obs.rows(), m = obs.cols();
    if (dim < 1 || m < 1) {
        throw Error("location/scatter fit needs at least one observation");
    }
    if (!obs.allFinite()) {
        throw Error("location/scatter fit needs finite observations");
    }

    LocationScatter out;
    if (m <= dim) {
        out.diagnostics.push_back("fewer observations than dimensions; ridge added to every scatter iterate");
    }

    Vector mu(dim);
    Matrix sigma = Matrix::Zero(dim, dim);
    for (Index i = 0; i < dim; ++i) {
        std::vector<double> row(static_cast<std::size_t>(m));
        for (Index j = 0; j < m; ++j) {
            row[static_cast<std::size_t>(j)] = obs(i, j);
        }
        mu(i) = median(row);
        const double s = scaled_mad(row);
        sigma(i, i) = s * s;
    }
    // Scatter traces below rounding level of the data are treated as exactly zero.
    const double scale = 1e-12 * obs.cwiseAbs().maxCoeff();
    const double negligible = static_cast<double>(dim) * scale * scale;
    if (detail::regularize_scatter(sigma, m, cfg.ridge, negligible)) {
        out.ridge_applied = true;
    }

    Vector mu_next;
    Matrix sigma_next;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        const Vector w = detail::location_scatter_weights(obs, mu, sigma, cfg.gamma, nthreads);
        detail::weighted_moments(obs, w, cfg.gamma, mu_next, sigma_next);
        if (detail::regularize_scatter(sigma_next, m, cfg.ridge, negligible)) {
            out.ridge_applied = true;
        }

        const double dmu = (mu_next - mu).norm() / (1.0 + mu_next.norm());
        const double dsigma = (sigma_next - sigma).norm() / (1.0 + sigma_next.norm());
        mu = mu_next;
        sigma = sigma_next;
        out.iterations = it;
        if (std::max(dmu, dsigma) < cfg.tol) {
            out.converged = true;
            break;
        }
    }

    if (out.ridge_applied && m > dim) {
        out.diagnostics.push_back("scatter numerically singular; ridge added");
    }
    if (!out.converged) {
        out.diagnostics.push_back("location/scatter iteration did not converge");
    }
    out.mu = std::move(mu);
    out.sigma = std::move(sigma);
    out.weights = detail::location_scatter_weights(obs, out.mu, out.sigma, cfg.gamma, nthreads);
    return out;
}

/**
 * Robust basis `[mu, Gamma_k]`: the fitted location followed by the `k` leading eigenvectors of the fitted scatter.
 * The eigenvectors are sign-fixed like the classical estimators, and the full spectrum is kept for choosing `k`.
 */
inline FactorEstimate extract_basis(const LocationScatter& ls, int k) {
    const Index n = ls.sigma.rows();
    if (k < 1) {
        throw Error("k must be at least 1");
    }
    if (k >= n) {
        throw Error("k must be smaller than the number of samples");
    }
    const auto eig = descending_eigen(ls.sigma);
    if (eig.values(k - 1) < 0) {
        throw Error("scatter has fewer than k nonnegative eigenvalues");
    }

    FactorEstimate out;
    out.method = FactorMethod::GammaRUV;
    Matrix gamma_k = eig.vectors.leftCols(k);
    fix_signs(gamma_k);
    out.w_hat.resize(n, k + 1);
    out.w_hat.col(0) = ls.mu;
    out.w_hat.rightCols(k) = gamma_k;
    out.eigenvalues = eig.values;
    out.iterations = ls.iterations;
    out.converged = ls.converged;
    out.diagnostics = ls.diagnostics;

    const double scale = std::max(std::abs(eig.values(0)), std::numeric_limits<double>::min());
    if (std::abs(eig.values(k - 1) - eig.values(k)) <= 1e-10 * scale) {
        out.spectrum_tie = true;
        out.diagnostics.push_back("tied scatter eigenvalues at position k");
    }
    return out;
}

/**
 * Cumulative proportions `r_m = sum_{i<=m} l_i / sum_i l_i` of a nonincreasing spectrum, negative values clamped at zero.
 */
inline Vector eigenvalue_ratios(const Vector& spectrum) {
    const Vector clamped = spectrum.cwiseMax(0.0);
    const double total = clamped.sum();
    if (!(total > 0)) {
        throw Error("null scatter");
    }
    Vector out(clamped.size());
    double run = 0;
    for (Index i = 0; i < clamped.size(); ++i) {
        run += clamped(i);
        out(i) = run / total;
    }
    out(out.size() - 1) = 1.0;
    return out;
}

inline Vector eigenvalue_ratios(const LocationScatter& ls) {
    return eigenvalue_ratios(Vector(descending_eigen(ls.sigma).values));
}

/**
 * Knee of a cumulative-ratio curve: the `m` (1-based) maximizing `r_m - m / length`.
 * This is the number of eigenvalues above the average eigenvalue.
 */
inline int ratio_knee(const Vector& ratios) {
    const auto len = static_cast<double>(ratios.size());
    int best = 1;
    double best_gap = -std::numeric_limits<double>::infinity();
    for (Index m = 0; m < ratios.size(); ++m) {
        const double gap = ratios(m) - static_cast<double>(m + 1) / len;
        if (gap > best_gap) {
            best_gap = gap;
            best = static_cast<int>(m + 1);
        }
    }
    return best;
}

/**
 * gamma-RUV on an expression matrix: center, fit the control block, and extract `[mu, Gamma_k]`.
 */
inline FactorEstimate gamma_ruv(const ExpressionMatrix& y, const StudyDesign& design, const GammaConfig& cfg, int nthreads = 1) {
    design.validate_controls(y.p());
    if (design.controls.empty()) {
        throw Error("gamma-RUV needs negative control genes");
    }
    const Matrix controls = center_columns(y.select(design.controls));
    const auto ls = fit_location_scatter(controls, cfg, nthreads);
    return extract_basis(ls, design.k);
}

}

#endif
