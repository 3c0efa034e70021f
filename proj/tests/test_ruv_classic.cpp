#include "gruv/ruv_classic.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace gruv;

namespace {

ExpressionMatrix as_expression(const Matrix& m) {
    return ExpressionMatrix(m);
}

std::vector<Index> range(Index from, Index to) {
    std::vector<Index> out;
    for (Index j = from; j < to; ++j) {
        out.push_back(j);
    }
    return out;
}

// Noiseless data Y = X beta + W alpha with centered X, W and beta zero on the controls.
struct Noiseless {
    Vector x;
    Matrix w;
    Matrix y;
    std::vector<Index> controls;
};

Noiseless make_noiseless(Index n, Index p, Index k, Index ncontrols, std::mt19937_64& rng) {
    Noiseless d;
    d.x = center_vector(oracle::random_vector(n, rng));
    d.w = center_columns(oracle::random_matrix(n, k, rng));
    Vector beta = oracle::random_vector(p, rng);
    beta.tail(ncontrols).setZero();
    d.y = d.x * beta.transpose() + d.w * oracle::random_matrix(k, p, rng);
    d.controls = range(p - ncontrols, p);
    return d;
}

}

TEST(BuildRotation, AxisCovariate) {
    Vector x(3);
    x << 1, 0, 0;
    const auto rot = build_rotation(x);
    EXPECT_TRUE(rot.r1.col(0).isApprox(x));
    EXPECT_LT((rot.r0.transpose() * x).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_TRUE((rot.r0.transpose() * rot.r0).isApprox(Matrix::Identity(2, 2)));
}

TEST(BuildRotation, DiagonalCovariate) {
    Vector x(2);
    x << 1, 1;
    x /= std::sqrt(2.0);
    const auto rot = build_rotation(x);
    EXPECT_TRUE(rot.r1.col(0).isApprox(x));
    Vector other(2);
    other << 1, -1;
    other /= std::sqrt(2.0);
    EXPECT_NEAR(std::abs(rot.r0.col(0).dot(other)), 1.0, 1e-14);
}

TEST(BuildRotation, RandomCovariatesAreOrthogonal) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const Vector x = oracle::random_vector(6, rng);
        const auto rot = build_rotation(x);
        EXPECT_LT((rot.r0.transpose() * x).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((rot.r0.transpose() * rot.r0 - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_TRUE(rot.r1.col(0).isApprox(x / x.norm(), 1e-12));
        Matrix full(6, 6);
        full << rot.r0, rot.r1;
        EXPECT_LT((full.transpose() * full - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
        // X is reproduced by its projection on span(r1).
        EXPECT_LT((rot.r1 * (rot.r1.transpose() * x) - x).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(BuildRotation, SeveralCovariates) {
    std::mt19937_64 rng(5);
    const Matrix x = oracle::random_matrix(7, 2, rng);
    const auto rot = build_rotation(x);
    EXPECT_EQ(rot.r1.cols(), 2);
    EXPECT_LT((rot.r0.transpose() * x).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((rot.r1 * (rot.r1.transpose() * x) - x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(BuildRotation, ZeroCovariateRejected) {
    try {
        build_rotation(Vector(Vector::Zero(4)));
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "degenerate covariate");
    }
}

TEST(Ruv2, ExactRankOne) {
    std::mt19937_64 rng(7);
    const Vector u = center_vector(oracle::random_vector(8, rng));
    const Vector v = oracle::random_vector(5, rng);
    Matrix y = Matrix::Zero(8, 9);
    y.rightCols(5) = u * v.transpose();
    StudyDesign d;
    d.covariate = oracle::random_vector(8, rng);
    d.controls = range(4, 9);
    d.k = 1;
    const auto est = ruv2(as_expression(y), d);
    ASSERT_EQ(est.w_hat.cols(), 1);
    EXPECT_NEAR(std::abs(est.w_hat.col(0).dot(u / u.norm())), 1.0, 1e-12);
    EXPECT_EQ(est.method, FactorMethod::RUV2);
}

TEST(Ruv2, FullRankControlBlock) {
    std::mt19937_64 rng(8);
    const Matrix y = oracle::random_matrix(6, 5, rng);
    StudyDesign d;
    d.covariate = oracle::random_vector(6, rng);
    d.controls = {2, 3, 4};
    d.k = 3;
    const auto est = ruv2(as_expression(y), d);
    const Matrix yc = center_columns(Matrix(y.rightCols(3)));
    EXPECT_LT(oracle::max_angle(est.w_hat, yc), 1e-10);
}

TEST(Ruv2, NoiselessSpanRecovery) {
    std::mt19937_64 rng(9);
    const auto d = make_noiseless(20, 60, 3, 30, rng);
    StudyDesign design;
    design.covariate = d.x;
    design.controls = d.controls;
    design.k = 3;
    const auto est = ruv2(as_expression(d.y), design);
    EXPECT_LT(oracle::max_angle(est.w_hat, d.w), 1e-8);
    EXPECT_LT((est.w_hat.transpose() * est.w_hat - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ruv2, RankDeficiencyRejected) {
    std::mt19937_64 rng(10);
    const Vector u = center_vector(oracle::random_vector(8, rng));
    Matrix y = u * oracle::random_vector(6, rng).transpose();
    StudyDesign d;
    d.covariate = oracle::random_vector(8, rng);
    d.controls = range(0, 6);
    d.k = 2;
    try {
        ruv2(as_expression(y), d);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "control matrix rank < k");
    }
}

TEST(Ruv2, SignConvention) {
    std::mt19937_64 rng(12);
    const Matrix y = oracle::random_matrix(10, 30, rng);
    StudyDesign d;
    d.covariate = oracle::random_vector(10, rng);
    d.controls = range(0, 30);
    d.k = 4;
    const auto a = ruv2(as_expression(y), d);
    const auto b = ruv2(as_expression(-y), d);
    EXPECT_LT((a.w_hat - b.w_hat).cwiseAbs().maxCoeff(), 1e-10);
    for (Index c = 0; c < a.w_hat.cols(); ++c) {
        Index arg;
        a.w_hat.col(c).cwiseAbs().maxCoeff(&arg);
        EXPECT_GE(a.w_hat(arg, c), 0);
    }
}

TEST(Ruv2, TiedSingularValuesFlagged) {
    // Two orthogonal centered directions with identical energy.
    Matrix y = Matrix::Zero(4, 2);
    y << 1, 1, -1, 1, 1, -1, -1, -1;
    StudyDesign d;
    d.covariate = Vector::LinSpaced(4, 0, 1);
    d.controls = {0, 1};
    d.k = 1;
    const auto est = ruv2(as_expression(y), d);
    EXPECT_TRUE(est.spectrum_tie);
    EXPECT_FALSE(est.diagnostics.empty());
}

TEST(Ruv4, NoiselessSpanRecovery) {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 10; ++rep) {
        const auto d = make_noiseless(20, 80, 3, 30, rng);
        StudyDesign design;
        design.covariate = d.x;
        design.controls = d.controls;
        design.k = 3;
        const auto est = ruv4(as_expression(d.y), design);
        ASSERT_EQ(est.w_hat.cols(), 3);
        EXPECT_LT(oracle::max_angle(est.w_hat, d.w), 1e-8);
        // The back-solved covariate-direction component is consistent with the same change of basis:
        // W_hat = W T for a single T.
        const Matrix t = oracle::normal_equations(d.w, est.w_hat.col(0));
        EXPECT_LT((d.w * t - est.w_hat.col(0)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Ruv4, OrthogonalCovariateBackSolve) {
    std::mt19937_64 rng(14);
    const Index n = 12, p = 40, k = 2;
    Matrix w = center_columns(oracle::random_matrix(n, k, rng));
    Vector x = center_vector(oracle::random_vector(n, rng));
    // Make X orthogonal to the columns of W.
    x -= w * oracle::normal_equations(w, x);
    Vector beta = oracle::random_vector(p, rng);
    beta.tail(20).setZero();
    const Matrix y = x * beta.transpose() + w * oracle::random_matrix(k, p, rng);
    StudyDesign design;
    design.covariate = x;
    design.controls = range(20, 40);
    design.k = k;
    const auto est = ruv4(as_expression(y), design);
    const auto rot = build_rotation(x);
    EXPECT_LT((rot.r1.transpose() * est.w_hat).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((rot.r1.transpose() * w).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(oracle::max_angle(est.w_hat, w), 1e-8);
}

TEST(Ruv4, Preconditions) {
    std::mt19937_64 rng(15);
    const Matrix y = oracle::random_matrix(10, 20, rng);
    StudyDesign design;
    design.covariate = oracle::random_vector(10, rng);
    design.controls = range(10, 20);
    design.k = 0;
    EXPECT_THROW(ruv4(as_expression(y), design), Error);
    EXPECT_THROW(ruv2(as_expression(y), design), Error);
    design.k = 10;
    EXPECT_THROW(ruv4(as_expression(y), design), Error);
    design.k = 2;
    design.covariate = Vector::Zero(10);
    EXPECT_THROW(ruv4(as_expression(y), design), Error);
}

TEST(Ruv4, ControlLoadingsRankDeficient) {
    std::mt19937_64 rng(16);
    Matrix y = oracle::random_matrix(10, 20, rng);
    y.rightCols(5).setZero();
    StudyDesign design;
    design.covariate = oracle::random_vector(10, rng);
    design.controls = range(15, 20);
    design.k = 2;
    try {
        ruv4(as_expression(y), design);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "control loadings rank-deficient");
    }
}

TEST(RuvClassic, NoiseLadderRecoversSpan) {
    std::mt19937_64 rng(17);
    const Index n = 30, p = 300, k = 3;
    const Vector x = center_vector(oracle::random_vector(n, rng));
    const Matrix w = center_columns(oracle::random_matrix(n, k, rng));
    Vector beta = oracle::random_vector(p, rng);
    beta.tail(100).setZero();
    const Matrix signal = x * beta.transpose() + w * oracle::random_matrix(k, p, rng);
    const Matrix noise = oracle::random_matrix(n, p, rng);
    StudyDesign design;
    design.covariate = x;
    design.controls = range(200, 300);
    design.k = k;

    double prev2 = 10, prev4 = 10;
    for (double scale : {1.0, 0.1, 0.01}) {
        const auto y = as_expression(signal + scale * noise);
        const double a2 = oracle::max_angle(ruv2(y, design).w_hat, w);
        const double a4 = oracle::max_angle(ruv4(y, design).w_hat, w);
        EXPECT_LT(a2, prev2);
        EXPECT_LT(a4, prev4);
        prev2 = a2;
        prev4 = a4;
    }
    EXPECT_LT(prev2, 1e-2);
    EXPECT_LT(prev4, 1e-2);
}
