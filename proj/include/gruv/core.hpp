#ifndef GRUV_CORE_HPP
#define GRUV_CORE_HPP

#include "Eigen/Dense"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

/**
 * @file core.hpp
 *
 * @brief Shared data model for the two-stage unwanted-variation/testing pipeline.
 *
 * Expression data are stored as an n-by-p matrix with samples (chips) in rows and genes in columns.
 * Eigen's default column-major layout keeps every gene contiguous, and a gene subset is always
 * selected by a list of column indices.
 */

namespace gruv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/**
 * @brief Error raised for invalid inputs and failed numerical preconditions.
 */
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * @brief Expression measurements with sample and gene labels.
 *
 * Requires at least two samples and one gene, finite values and unique labels.
 * Missing labels are generated as `s1..sn` and `g1..gp`.
 */
class ExpressionMatrix {
public:
    ExpressionMatrix() = default;

    explicit ExpressionMatrix(Matrix values,
                              std::vector<std::string> gene_ids = {},
                              std::vector<std::string> sample_ids = {})
        : values_(std::move(values)), gene_ids_(std::move(gene_ids)), sample_ids_(std::move(sample_ids)) {
        if (values_.rows() < 2) {
            throw Error("expression matrix needs at least 2 samples");
        }
        if (values_.cols() < 1) {
            throw Error("expression matrix needs at least 1 gene");
        }
        if (!values_.allFinite()) {
            throw Error("expression matrix contains missing or non-finite values");
        }
        fill_labels(gene_ids_, values_.cols(), "g", "gene");
        fill_labels(sample_ids_, values_.rows(), "s", "sample");
    }

    const Matrix& values() const { return values_; }
    const std::vector<std::string>& gene_ids() const { return gene_ids_; }
    const std::vector<std::string>& sample_ids() const { return sample_ids_; }

    Index n() const { return values_.rows(); }
    Index p() const { return values_.cols(); }

    /**
     * Columns of the matrix at `columns`, in the given order.
     */
    Matrix select(const std::vector<Index>& columns) const {
        Matrix out(values_.rows(), static_cast<Index>(columns.size()));
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const Index j = columns[c];
            if (j < 0 || j >= values_.cols()) {
                throw Error("column index out of range");
            }
            out.col(static_cast<Index>(c)) = values_.col(j);
        }
        return out;
    }

private:
    static void fill_labels(std::vector<std::string>& labels, Index expected, const char* prefix, const char* what) {
        if (labels.empty()) {
            labels.reserve(static_cast<std::size_t>(expected));
            for (Index i = 0; i < expected; ++i) {
                labels.push_back(prefix + std::to_string(i + 1));
            }
            return;
        }
        if (static_cast<Index>(labels.size()) != expected) {
            throw Error(std::string("number of ") + what + " ids does not match the matrix");
        }
        std::unordered_set<std::string> seen;
        for (const auto& l : labels) {
            if (!seen.insert(l).second) {
                throw Error(std::string("duplicate ") + what + " id '" + l + "'");
            }
        }
    }

    Matrix values_;
    std::vector<std::string> gene_ids_;
    std::vector<std::string> sample_ids_;
};

/**
 * @brief Covariate of interest, negative-control genes and model dimensions.
 */
struct StudyDesign {
    Vector covariate;
    std::vector<Index> controls;
    int k = 1;
    double fwer_alpha = 0.05;

    /**
     * Full check of the design against an n-by-p matrix.
     * The classical estimators only need a subset of these conditions and check their own.
     */
    void validate(Index n, Index p) const {
        if (covariate.size() != n) {
            throw Error("covariate length does not match the number of samples");
        }
        if (!covariate.allFinite()) {
            throw Error("covariate contains non-finite values");
        }
        if (covariate.maxCoeff() == covariate.minCoeff()) {
            throw Error("degenerate covariate");
        }
        if (k < 1) {
            throw Error("k must be at least 1");
        }
        if (!(fwer_alpha > 0.0 && fwer_alpha < 1.0)) {
            throw Error("fwer_alpha must lie in (0, 1)");
        }
        validate_controls(p);
        if (static_cast<Index>(controls.size()) < k + 2) {
            throw Error("need at least k + 2 negative control genes");
        }
    }

    void validate_controls(Index p) const {
        std::unordered_set<Index> seen;
        for (auto c : controls) {
            if (c < 0 || c >= p) {
                throw Error("control gene index out of range");
            }
            if (!seen.insert(c).second) {
                throw Error("duplicate control gene index");
            }
        }
    }
};

enum class FactorMethod { RUV2, RUV4, GammaRUV, TrueW, None };

inline const char* to_string(FactorMethod m) {
    switch (m) {
        case FactorMethod::RUV2: return "ruv2";
        case FactorMethod::RUV4: return "ruv4";
        case FactorMethod::GammaRUV: return "gamma";
        case FactorMethod::TrueW: return "true_w";
        case FactorMethod::None: return "ignore_w";
    }
    return "unknown";
}

/**
 * @brief Estimated basis of the unwanted variation.
 *
 * `w_hat` has k columns for RUV2/RUV4 and k + 1 for gamma-RUV (location first).
 * `eigenvalues` holds the full nonincreasing spectrum of the robust scatter, and is empty for other methods.
 */
struct FactorEstimate {
    Matrix w_hat;
    FactorMethod method = FactorMethod::None;
    Vector eigenvalues;
    int iterations = 0;
    bool converged = true;
    bool spectrum_tie = false;
    std::vector<std::string> diagnostics;
};

/**
 * @brief Settings of the gamma-divergence fixed-point solvers.
 *
 * `gamma = 0` is the maximum-likelihood limit and reproduces the non-robust estimators.
 * `ridge` is relative: the added diagonal is `ridge * trace(Sigma) / n`, or `ridge` itself when the trace vanishes.
 * Both solvers start from deterministic estimates, so no seed is involved.
 */
struct GammaConfig {
    double gamma = 0.5;
    int max_iter = 500;
    double tol = 1e-8;
    double ridge = 1e-8;

    void validate() const {
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
            throw Error("gamma must be a finite nonnegative number");
        }
        if (max_iter < 1) {
            throw Error("max_iter must be positive");
        }
        if (!(tol > 0.0)) {
            throw Error("tol must be positive");
        }
        if (!(ridge >= 0.0)) {
            throw Error("ridge must be nonnegative");
        }
    }
};

/**
 * Subtract the mean from `x`.
 */
inline Vector center_vector(const Vector& x) {
    if (x.size() < 2) {
        throw Error("centering needs at least 2 values");
    }
    return x.array() - x.mean();
}

/**
 * Column-centered matrix, i.e., `(I - 11'/n) Y`.
 */
inline Matrix center_columns(const Matrix& y) {
    Matrix out = y;
    out.rowwise() -= y.colwise().mean();
    return out;
}

inline ExpressionMatrix center_columns(const ExpressionMatrix& y) {
    return ExpressionMatrix(center_columns(y.values()), y.gene_ids(), y.sample_ids());
}

}

#endif
