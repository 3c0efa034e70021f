#ifndef GRUV_METRICS_HPP
#define GRUV_METRICS_HPP

#include "core.hpp"
#include "gamma_lse.hpp"
#include "numeric.hpp"
#include "simgen.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>
#include <vector>

/**
 * @file metrics.hpp
 *
 * @brief Evaluation of testing pipelines: AUC, TP/FP, RLE statistics and subspace recovery.
 */

namespace gruv {

/**
 * Mann-Whitney estimate of P(p_de < p_null), with ties counted as 1/2.
 */
inline double auc_pvalues(const std::vector<double>& p_de, const std::vector<double>& p_null) {
    if (p_de.empty() || p_null.empty()) {
        throw Error("AUC needs two nonempty groups");
    }
    struct Entry {
        double value;
        bool de;
    };
    std::vector<Entry> all;
    all.reserve(p_de.size() + p_null.size());
    for (double v : p_de) {
        all.push_back({v, true});
    }
    for (double v : p_null) {
        all.push_back({v, false});
    }
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });

    // Sum of the (average) ascending ranks of the null group.
    double null_rank_sum = 0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].value == all[i].value) {
            ++j;
        }
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) {
            if (!all[t].de) {
                null_rank_sum += avg_rank;
            }
        }
        i = j;
    }
    const auto m = static_cast<double>(p_null.size());
    const double u = null_rank_sum - m * (m + 1) / 2;
    return u / (m * static_cast<double>(p_de.size()));
}

struct TpFp {
    int tp = 0;
    int fp = 0;
};

inline TpFp tp_fp(const DeCallSet& calls, const std::vector<Index>& truth) {
    const std::unordered_set<Index> de(truth.begin(), truth.end());
    TpFp out;
    for (auto j : calls.indices) {
        if (de.count(j)) {
            ++out.tp;
        } else {
            ++out.fp;
        }
    }
    return out;
}

inline TpFp tp_fp(const DeCallSet& calls, const GroundTruth& truth) {
    return tp_fp(calls, truth.de_genes());
}

/**
 * @brief Relative log expression summary: per-chip quartiles of `Y_ij - m_j`, `m_j` the gene median over chips.
 */
struct RleSummary {
    struct Chip {
        double median;
        double q1;
        double q3;
        double iqr;
    };
    std::vector<Chip> per_chip;
    double mean_iqr = 0;
    double sd_iqr = 0;
    Vector m;
};

/**
 * Quartiles use linear interpolation between order statistics (position `prob * (p - 1)`).
 * `sd_iqr` is the standard deviation of the per-chip IQRs across chips.
 */
inline RleSummary rle_summary(const Matrix& adjusted) {
    const Index n = adjusted.rows(), p = adjusted.cols();
    RleSummary out;
    out.m.resize(p);
    for (Index j = 0; j < p; ++j) {
        out.m(j) = median(adjusted.col(j));
    }
    out.per_chip.reserve(static_cast<std::size_t>(n));
    std::vector<double> row(static_cast<std::size_t>(p));
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) {
            row[static_cast<std::size_t>(j)] = adjusted(i, j) - out.m(j);
        }
        std::sort(row.begin(), row.end());
        RleSummary::Chip chip{quantile_sorted(row, 0.5), quantile_sorted(row, 0.25), quantile_sorted(row, 0.75), 0};
        chip.iqr = chip.q3 - chip.q1;
        out.per_chip.push_back(chip);
        out.mean_iqr += chip.iqr;
    }
    out.mean_iqr /= static_cast<double>(n);
    if (n > 1) {
        double ss = 0;
        for (const auto& c : out.per_chip) {
            ss += (c.iqr - out.mean_iqr) * (c.iqr - out.mean_iqr);
        }
        out.sd_iqr = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return out;
}

inline RleSummary rle_summary(const ExpressionMatrix& adjusted) {
    return rle_summary(adjusted.values());
}

/**
 * Cosines of the principal angles between span(a) and span(b), nonincreasing, clamped to [0, 1].
 */
inline Vector principal_angles(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw Error("bases live in spaces of different dimension");
    }
    const Matrix qa = orthonormal_basis(a), qb = orthonormal_basis(b);
    Vector s = Eigen::JacobiSVD<Matrix>(qa.transpose() * qb).singularValues();
    return s.cwiseMin(1.0).cwiseMax(0.0);
}

/**
 * Largest principal angle in radians.
 */
inline double max_principal_angle(const Matrix& a, const Matrix& b) {
    const Vector c = principal_angles(a, b);
    return std::acos(c(c.size() - 1));
}

}

#endif
