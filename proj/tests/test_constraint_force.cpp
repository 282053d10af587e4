#include <gtest/gtest.h>

#include <cmath>

#include "recon/constraint_force/forces.hpp"
#include "recon/problems/measurements.hpp"

using namespace recon;
using namespace recon::constraint_force;

namespace {

std::vector<std::array<double, 2>> grid_1d(int c) {
    std::vector<std::array<double, 2>> out;
    for (const auto& p : problems::uniform_grid_1d(c)) out.push_back({p[0], 0.0});
    return out;
}

std::vector<std::array<double, 2>> grid_2d(int c) {
    std::vector<std::array<double, 2>> out;
    for (const auto& p : problems::uniform_grid_2d(c)) out.push_back({p[0], p[1]});
    return out;
}

}  // namespace

TEST(Gamma, HatInterpolationProperty) {
    const auto set = ConstraintForceSet::hats(grid_1d(5), 1.0 / 6);
    EXPECT_NEAR(set.eval(2, 0.5), 1.0, 1e-15);
    EXPECT_NEAR(set.eval(2, 1.0 / 3), 0.0, 1e-15);
    EXPECT_NEAR(set.eval(2, 2.0 / 3), 0.0, 1e-15);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            EXPECT_NEAR(set.eval(i, (j + 1) / 6.0), i == j ? 1.0 : 0.0, 1e-14);
    EXPECT_EQ(set.eval(0, 0.0), 0.0);
    EXPECT_NEAR(set.eval(4, 1.0), 0.0, 1e-14);
}

TEST(Gamma, ClippedHatApexAndSupport) {
    const auto set = ConstraintForceSet::clipped_hats({{0.5, 0.0}}, {20.0});
    EXPECT_DOUBLE_EQ(set.eval(0, 0.5), 20.0);
    EXPECT_NEAR(set.eval(0, 0.45), 0.0, 1e-12);
    EXPECT_GT(set.eval(0, 0.4501), 0.0);
    EXPECT_EQ(set.eval(0, 0.4499), 0.0);
    EXPECT_EQ(set.eval(0, 0.5501), 0.0);
}

TEST(Gamma, GaussianValues) {
    const auto set = ConstraintForceSet::gaussians({{0.5, 0.5}}, 2, 25.0);
    const double c[2] = {0.5, 0.5}, y[2] = {0.5, 0.9};
    EXPECT_DOUBLE_EQ(set.eval(0, c), 1.0);
    EXPECT_NEAR(set.eval(0, y), std::exp(-2.0), 1e-15);
}

TEST(Gamma, IndexOutOfRangeRejected) {
    const auto set = ConstraintForceSet::hats(grid_1d(3), 0.25);
    EXPECT_THROW(set.eval(3, 0.5), InvalidArgument);
    EXPECT_THROW(set.eval(-1, 0.5), InvalidArgument);
    EXPECT_THROW(family_from_string("box"), InvalidArgument);
}

TEST(Gamma, ShapesAreNonNegative) {
    const auto hats = ConstraintForceSet::hats(grid_1d(4), 0.2);
    const auto clipped = ConstraintForceSet::clipped_hats(grid_1d(2), {6.0, 20.0});
    for (int k = 0; k <= 200; ++k) {
        const double x = k / 200.0;
        for (int i = 0; i < 4; ++i) EXPECT_GE(hats.eval(i, x), 0.0);
        for (int i = 0; i < 2; ++i) EXPECT_GE(clipped.eval(i, x), 0.0);
    }
}

TEST(Gram, AdjacentHatsMatchClosedForm) {
    const double h = 1.0 / 6;
    const auto set = ConstraintForceSet::hats(grid_1d(5), h);
    const Matrix g = gram_matrix(set, rule_for(set));
    for (int i = 0; i < 5; ++i) {
        EXPECT_NEAR(g(i, i), 2 * h / 3, 1e-10);
        if (i + 1 < 5) EXPECT_NEAR(g(i, i + 1), h / 6, 1e-10);
        if (i + 2 < 5) EXPECT_NEAR(g(i, i + 2), 0.0, 1e-14);
    }
    EXPECT_TRUE(g.isApprox(g.transpose(), 0.0));
}

TEST(Gram, DisjointNormalizedHatsGiveIdentity) {
    const auto set = ConstraintForceSet::clipped_hats(grid_1d(3), {20.0, 20.0, 20.0});
    const auto rule = rule_for(set);
    const auto n = set.normalized(rule);
    EXPECT_TRUE(n.is_normalized());
    const Matrix g = gram_matrix(n, rule);
    EXPECT_LE((g - Matrix::Identity(3, 3)).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Gram, NormalizedGaussianGrid) {
    const auto rule = numerics::tensor_gauss_legendre(64);
    const auto set = ConstraintForceSet::gaussians(grid_2d(9), 2, 25.0).normalized(rule);
    const Matrix g = gram_matrix(set, rule);
    for (int i = 0; i < 9; ++i) {
        EXPECT_NEAR(g(i, i), 1.0, 1e-10);
        for (int j = 0; j < 9; ++j)
            if (i != j) {
                EXPECT_GT(g(i, j), 0.0);
                EXPECT_LT(g(i, j), 1.0);
            }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    EXPECT_GE(es.eigenvalues().minCoeff(), 0.0);
}

TEST(Gram, PermutationSimilarity) {
    auto centers = grid_1d(4);
    const auto a = ConstraintForceSet::clipped_hats(centers, {6.0, 8.0, 10.0, 12.0});
    const auto b = ConstraintForceSet::clipped_hats({centers[2], centers[0], centers[3], centers[1]},
                                                    {10.0, 6.0, 12.0, 8.0});
    const Matrix ga = gram_matrix(a, rule_for(a)), gb = gram_matrix(b, rule_for(b));
    const int perm[4] = {2, 0, 3, 1};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) EXPECT_NEAR(gb(i, j), ga(perm[i], perm[j]), 1e-12);
}

TEST(TotalForce, ClosedFormValues) {
    EXPECT_EQ(total_force(Matrix::Identity(2, 2), Vector(Vector::Zero(2))), 0.0);
    EXPECT_DOUBLE_EQ(total_force(Matrix(Matrix::Identity(2, 2)), Vector{{3.0, 4.0}}), 12.5);
    EXPECT_THROW(total_force(Matrix::Identity(2, 2), Vector(Vector::Zero(3))), InvalidArgument);
}

TEST(TotalForce, QuadraticHomogeneity) {
    const auto set = ConstraintForceSet::hats(grid_1d(5), 1.0 / 6);
    const Matrix g = gram_matrix(set, rule_for(set));
    const Vector l{{1.0, -2.0, 0.5, 3.0, -1.0}};
    const double z = total_force(g, l);
    EXPECT_GT(z, 0.0);
    EXPECT_NEAR(total_force(g, Vector(2.5 * l)), 6.25 * z, 1e-12 * z);
}

TEST(TotalForce, MultiComponentMagnitudes) {
    Matrix l(2, 2);
    l << 1.0, 2.0, 3.0, 4.0;
    EXPECT_DOUBLE_EQ(total_force(Matrix(Matrix::Identity(2, 2)), l), 15.0);
}

TEST(TotalForce, EqualsHalfSquaredForceField) {
    const auto set = ConstraintForceSet::hats(grid_1d(3), 0.25);
    const auto rule = rule_for(set);
    const Vector l{{2.0, -1.0, 0.5}};
    const double direct = 0.5 * rule.integrate([&](double x) {
        const double f = set.field(l, &x);
        return f * f;
    });
    EXPECT_NEAR(total_force(gram_matrix(set, rule), l), direct, 1e-13);
}
