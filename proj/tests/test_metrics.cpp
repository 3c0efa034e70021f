#include "gruv/metrics.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace gruv;

TEST(Auc, Examples) {
    EXPECT_DOUBLE_EQ(auc_pvalues({0.001, 0.01}, {0.2, 0.5, 0.9}), 1.0);
    EXPECT_DOUBLE_EQ(auc_pvalues({0.3, 0.3}, {0.3, 0.3, 0.3}), 0.5);
    EXPECT_DOUBLE_EQ(auc_pvalues({0.01, 0.2}, {0.05, 0.5}), 0.75);
    EXPECT_DOUBLE_EQ(auc_pvalues({0.9}, {0.1}), 0.0);
}

TEST(Auc, EmptyGroupRejected) {
    EXPECT_THROW(auc_pvalues({}, {0.1}), Error);
    EXPECT_THROW(auc_pvalues({0.1}, {}), Error);
}

TEST(Auc, MatchesPairwiseCount) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> level(0, 20);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> de(37), null(53);
        // Coarse values so that ties are frequent.
        for (auto& v : de) {
            v = level(rng) / 40.0;
        }
        for (auto& v : null) {
            v = level(rng) / 20.0;
        }
        EXPECT_NEAR(auc_pvalues(de, null), oracle::pairwise_auc(de, null), 1e-12);
    }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> de(40), null(60);
    for (auto& v : de) {
        v = u(rng) * u(rng);
    }
    for (auto& v : null) {
        v = u(rng);
    }
    const double base = auc_pvalues(de, null);
    const auto transform = [](std::vector<double> v) {
        for (auto& x : v) {
            x = -std::log10(1.0 - 0.5 * x) + x * x * x;
        }
        return v;
    };
    EXPECT_DOUBLE_EQ(auc_pvalues(transform(de), transform(null)), base);
}

TEST(TpFp, Examples) {
    std::vector<Index> truth;
    for (Index j = 0; j < 100; ++j) {
        truth.push_back(j);
    }
    DeCallSet calls;
    auto r = tp_fp(calls, truth);
    EXPECT_EQ(r.tp, 0);
    EXPECT_EQ(r.fp, 0);
    calls.indices = truth;
    r = tp_fp(calls, truth);
    EXPECT_EQ(r.tp, 100);
    EXPECT_EQ(r.fp, 0);
    calls.indices.push_back(499);
    r = tp_fp(calls, truth);
    EXPECT_EQ(r.tp, 100);
    EXPECT_EQ(r.fp, 1);
    EXPECT_EQ(static_cast<std::size_t>(r.tp + r.fp), calls.indices.size());
}

TEST(TpFp, GroundTruthOverload) {
    GroundTruth gt;
    gt.beta = Vector::Zero(10);
    gt.beta(2) = 1.1;
    gt.beta(5) = 0.8;
    DeCallSet calls;
    calls.indices = {2, 3, 9};
    const auto r = tp_fp(calls, gt);
    EXPECT_EQ(r.tp, 1);
    EXPECT_EQ(r.fp, 2);
}

TEST(Rle, ConstantMatrix) {
    const auto s = rle_summary(Matrix::Constant(5, 8, 3.25));
    ASSERT_EQ(s.per_chip.size(), 5u);
    for (const auto& c : s.per_chip) {
        EXPECT_EQ(c.median, 0.0);
        EXPECT_EQ(c.q1, 0.0);
        EXPECT_EQ(c.q3, 0.0);
        EXPECT_EQ(c.iqr, 0.0);
    }
    EXPECT_EQ(s.mean_iqr, 0.0);
    EXPECT_TRUE(s.m.isApprox(Vector::Constant(8, 3.25)));
}

TEST(Rle, HandQuartiles) {
    // Two zero chips make every gene median zero, so chip 0 keeps its values {-1, 0, 1, 2}.
    Matrix y = Matrix::Zero(3, 4);
    y.row(0) << -1, 0, 1, 2;
    const auto s = rle_summary(y);
    EXPECT_DOUBLE_EQ(s.per_chip[0].q1, -0.25);
    EXPECT_DOUBLE_EQ(s.per_chip[0].median, 0.5);
    EXPECT_DOUBLE_EQ(s.per_chip[0].q3, 1.25);
    EXPECT_DOUBLE_EQ(s.per_chip[0].iqr, 1.5);
    EXPECT_DOUBLE_EQ(s.mean_iqr, 0.5);
}

TEST(Rle, MatchesHandQuantiles) {
    std::mt19937_64 rng(3);
    const Matrix y = oracle::random_matrix(7, 31, rng);
    const auto s = rle_summary(y);
    double mean = 0;
    for (Index i = 0; i < 7; ++i) {
        std::vector<double> row;
        for (Index j = 0; j < 31; ++j) {
            std::vector<double> col(y.col(j).data(), y.col(j).data() + 7);
            row.push_back(y(i, j) - oracle::linear_quantile(col, 0.5));
        }
        const auto& c = s.per_chip[static_cast<std::size_t>(i)];
        EXPECT_NEAR(c.q1, oracle::linear_quantile(row, 0.25), 1e-14);
        EXPECT_NEAR(c.q3, oracle::linear_quantile(row, 0.75), 1e-14);
        EXPECT_NEAR(c.median, oracle::linear_quantile(row, 0.5), 1e-14);
        EXPECT_GE(c.iqr, 0.0);
        mean += c.iqr;
    }
    EXPECT_NEAR(s.mean_iqr, mean / 7, 1e-14);
}

TEST(Rle, GeneOffsetInvariance) {
    std::mt19937_64 rng(4);
    const Matrix y = oracle::random_matrix(9, 50, rng);
    const Vector offsets = oracle::random_vector(50, rng, 10.0);
    const auto a = rle_summary(y);
    const auto b = rle_summary(Matrix(y.rowwise() + offsets.transpose()));
    for (std::size_t i = 0; i < a.per_chip.size(); ++i) {
        EXPECT_NEAR(a.per_chip[i].iqr, b.per_chip[i].iqr, 1e-12);
    }
}

TEST(PrincipalAngles, Examples) {
    EXPECT_TRUE(principal_angles(Matrix::Identity(4, 2), Matrix::Identity(4, 2)).isApprox(Vector::Ones(2)));

    Matrix a = Matrix::Zero(3, 1), b = Matrix::Zero(3, 1);
    a(0, 0) = 1;
    b(1, 0) = 1;
    EXPECT_NEAR(principal_angles(a, b)(0), 0.0, 1e-15);
    EXPECT_NEAR(max_principal_angle(a, b), M_PI / 2, 1e-12);

    Matrix c = Matrix::Zero(3, 2), d = Matrix::Zero(3, 2);
    c(0, 0) = c(1, 1) = 1;
    d(0, 0) = 1;
    d(1, 1) = d(2, 1) = 1 / std::sqrt(2.0);
    const Vector cos = principal_angles(c, d);
    EXPECT_NEAR(cos(0), 1.0, 1e-12);
    EXPECT_NEAR(cos(1), 1 / std::sqrt(2.0), 1e-12);
}

TEST(PrincipalAngles, SymmetricAndBasisFree) {
    std::mt19937_64 rng(5);
    const Matrix a = oracle::random_matrix(10, 3, rng), b = oracle::random_matrix(10, 3, rng);
    const Vector ab = principal_angles(a, b), ba = principal_angles(b, a);
    EXPECT_LT((ab - ba).cwiseAbs().maxCoeff(), 1e-12);
    const Matrix mix = oracle::random_matrix(3, 3, rng);
    EXPECT_LT((principal_angles(a * mix, b) - ab).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(max_principal_angle(a, b), oracle::max_angle(a, b), 1e-8);
    for (Index i = 1; i < ab.size(); ++i) {
        EXPECT_LE(ab(i), ab(i - 1));
    }
}

TEST(PrincipalAngles, RankDeficiencyRejected) {
    Matrix a = Matrix::Zero(4, 2);
    a(0, 0) = a(0, 1) = 1;
    EXPECT_THROW(principal_angles(a, Matrix::Identity(4, 2)), Error);
    EXPECT_THROW(principal_angles(Matrix::Identity(4, 2), Matrix::Identity(3, 2)), Error);
}
