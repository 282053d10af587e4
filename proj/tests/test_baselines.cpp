#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "recon/baselines/advection.hpp"
#include "recon/baselines/bubnov.hpp"
#include "recon/baselines/lagrange.hpp"
#include "recon/baselines/penalty.hpp"

using namespace recon;
using namespace recon::baselines;

namespace {

const double pi = std::numbers::pi;

problems::LinearBar bar_with(std::function<double(double)> s) {
    problems::LinearBar bar;
    bar.source = std::move(s);
    return bar;
}

problems::MeasurementSet data_for(const problems::LinearBar& bar,
                                  std::vector<std::array<double, 2>> x) {
    const discretization::SineBasis basis(50);
    const Vector ref = problems::reference_solution(bar, basis, numerics::default_rule_1d());
    return problems::sample_measurements([&](const double* p) { return basis.eval(ref, p[0]); },
                                         std::move(x), 1, 0.0, 1.0, 0);
}

const auto recoverable = bar_with([](double x) { return 100.0 * std::sin(2 * pi * x); });

}  // namespace

TEST(Penalty, SystemMatrixIsShiftedOperator) {
    const auto data = data_for(recoverable, problems::uniform_grid_1d(5));
    const auto s = assemble_strong(recoverable, problems::SourceFamily::sines(1),
                                   discretization::SineBasis(20), data);
    const double ld = 3e4;
    const Matrix expected = s.K + ld * s.G.transpose() * s.G;
    const Matrix got = penalty_system_matrix(s, ld);
    EXPECT_LE((got - expected).lpNorm<Eigen::Infinity>(),
              1e-12 * expected.lpNorm<Eigen::Infinity>());
}

// The L2 projection of 10 sin(pi x)(1 + x) onto sin(pi x) is 15.
TEST(Penalty, RecoversProjectedSourceMagnitude) {
    const auto bar = bar_with([](double x) { return 10.0 * std::sin(pi * x) * (1 + x); });
    const auto data = data_for(bar, problems::uniform_grid_1d(8));
    PenaltyConfig cfg;
    cfg.lambda_d = 3e4;
    const auto b = problems::SourceFamily::single([](double x) { return std::sin(pi * x); });
    const auto r = pinn_penalty_solve(bar, b, discretization::SineBasis(50), data, cfg);
    EXPECT_NEAR(r.epsilon(0), 15.0, 0.02 * 15.0);
    EXPECT_LE(r.max_violation, 1e-2);
    EXPECT_GT(r.loss, 0.0);
}

TEST(Penalty, ZeroWeightIgnoresData) {
    const auto data = data_for(recoverable, problems::uniform_grid_1d(5));
    PenaltyConfig cfg;
    cfg.lambda_d = 0.0;
    const discretization::SineBasis basis(30);
    const auto b = problems::SourceFamily::single([](double x) { return std::sin(pi * x); });
    const auto r = pinn_penalty_solve(recoverable, b, basis, data, cfg, Vector{{2.0}});
    // -w'' = 2 sin(pi x)
    Vector expected = Vector::Zero(30);
    expected(0) = 2.0 / (pi * pi);
    EXPECT_LE((r.theta - expected).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Penalty, InvalidConfigRejected) {
    PenaltyConfig cfg;
    cfg.lambda_d = -1.0;
    EXPECT_THROW(validate(cfg), InvalidArgument);
    cfg.lambda_d = 1.0;
    cfg.form = inner_loop::LossForm::weak;
    EXPECT_THROW(validate(cfg), InvalidArgument);
}

TEST(Penalty, HyperelasticHingeKeepsDataInsideBand) {
    const discretization::SineBasis basis(50);
    problems::HyperelasticBar bar{problems::NeoHookean{}, [](double x) { return 30.0 * x; }};
    const auto ref = problems::reference_solution(bar, basis, numerics::default_rule_1d({0.5}));
    const auto data = problems::sample_measurements(
        [&](const double* x) { return basis.eval(ref.theta, x[0]); }, problems::uniform_grid_1d(5),
        1, 1e-2, 1.0, 2);
    const auto r = pinn_penalty_hyperelastic(
        problems::NeoHookean{}, problems::SourceFamily::single([](double x) { return x; }), basis,
        data, 1e8);
    EXPECT_LE(r.max_violation, 1e-2 + 1e-3);
    EXPECT_GT(r.epsilon(0), 0.0);
}

TEST(Lagrange, SquareSystemRecoversSineCoefficient) {
    const auto data = data_for(recoverable, problems::uniform_grid_1d(5));
    const auto r = lagrange_strongform_solve(recoverable, problems::SourceFamily::sines(5),
                                             discretization::SineBasis(50), data);
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(r.epsilon(j), j == 1 ? 100.0 : 0.0, 1e-6);
    EXPECT_LE(r.lambda.lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Lagrange, MoreParametersThanDataReportsNullity) {
    const auto data = data_for(recoverable, problems::uniform_grid_1d(5));
    try {
        lagrange_strongform_solve(recoverable, problems::SourceFamily::sines(8),
                                  discretization::SineBasis(50), data);
        FAIL() << "expected RankDeficiencyError";
    } catch (const RankDeficiencyError& e) {
        EXPECT_EQ(e.nullity(), 3);
    }
}

TEST(Lagrange, NoConstraintRowsIsAnError) {
    problems::MeasurementSet none;
    EXPECT_THROW(lagrange_strongform_solve(recoverable, problems::SourceFamily::sines(1),
                                           discretization::SineBasis(10), none),
                 InvalidArgument);
}

TEST(Lagrange, DistinctPointsGiveUniqueSolution) {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> pos(0.02, 0.98);
    std::uniform_int_distribution<int> count(2, 8);
    const discretization::SineBasis basis(50);
    for (int trial = 0; trial < 50; ++trial) {
        const int c = count(gen);
        const int p = std::uniform_int_distribution<int>(1, c)(gen);
        std::vector<double> xs;
        while (static_cast<int>(xs.size()) < c) {
            const double x = pos(gen);
            bool far = true;
            for (double y : xs) far = far && std::abs(x - y) > 0.02;
            if (far) xs.push_back(x);
        }
        std::vector<std::array<double, 2>> pts;
        for (double x : xs) pts.push_back({x, 0.0});
        const auto data = data_for(recoverable, pts);
        EXPECT_NO_THROW(
            lagrange_strongform_solve(recoverable, problems::SourceFamily::sines(p), basis, data))
            << "trial " << trial << " C=" << c << " P=" << p;
    }
}

TEST(Advection, RecoversExactVelocityFromConsistentResidual) {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> n(0.0, 1.0);
    const int nq = 40;
    Matrix grad(nq, 2);
    Vector r(nq);
    std::vector<double> w(nq, 1.0 / nq);
    const Vector a{{5.0, -2.5}};
    for (int q = 0; q < nq; ++q) {
        grad(q, 0) = n(gen);
        grad(q, 1) = n(gen);
        r(q) = grad.row(q).dot(a);
    }
    EXPECT_LE((recover_advection(grad, r, w) - a).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Advection, CollinearOrVanishingGradientIsDegenerate) {
    const int nq = 10;
    std::vector<double> w(nq, 0.1);
    // w = x1 + x2 has the constant gradient (1, 1)
    const Matrix collinear = Matrix::Ones(nq, 2);
    EXPECT_THROW(recover_advection(collinear, Vector::Ones(nq), w), RankDeficiencyError);
    EXPECT_THROW(recover_advection(Matrix::Zero(nq, 2), Vector::Ones(nq), w), RankDeficiencyError);
    EXPECT_THROW(recover_advection(collinear, Vector::Ones(nq - 1), w), InvalidArgument);
}

TEST(Advection, EcfmResidualIsNegatedForceField) {
    const discretization::TanhNetwork net({2, 6, 1});
    const auto rule = numerics::tensor_gauss_legendre(10);
    problems::NetworkResidual res(net, problems::heat_diffusion_system(), rule);
    const Vector th = discretization::init_network(net, 3);
    const auto centers = problems::uniform_grid_2d(4);
    const auto forces = constraint_force::ConstraintForceSet::gaussians(centers, 2, 25.0);
    Matrix gamma(res.points(), 4);
    for (Eigen::Index q = 0; q < res.points(); ++q)
        gamma.row(q) = forces.eval_all(rule.x[q].data()).transpose();
    const Vector lambda{{1.0, -2.0, 0.5, 3.0}};
    const Vector got = recover_advection(res, th, ResidualProvenance::ecfm, lambda, gamma);
    Matrix grad(res.points(), 2);
    for (Eigen::Index q = 0; q < res.points(); ++q) {
        const auto j = res.field().eval(th, rule.x[q].data());
        grad(q, 0) = j.g(0);
        grad(q, 1) = j.g(1);
    }
    const Vector expected = recover_advection(grad, -(gamma * lambda), rule.w);
    EXPECT_LE((got - expected).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_THROW(recover_advection(res, th, ResidualProvenance::ecfm, lambda, Matrix()),
                 InvalidArgument);
}

TEST(NetworkPenalty, RowsJacobianMatchesFiniteDifferences) {
    const discretization::TanhNetwork net({2, 5, 1});
    problems::NetworkResidual res(net, problems::heat_model_system(),
                                  numerics::tensor_gauss_legendre(6));
    auto data = problems::sample_measurements([](const double* x) { return x[0] * x[1]; },
                                              problems::uniform_grid_2d(4), 2, 0.0, 1.0, 0);
    NetworkPenalty pen(res, data, 1e4);
    ASSERT_TRUE(pen.has_eps());
    const Vector x = pen.initial_guess(std::uint64_t{2}, 0.3);
    Vector r;
    Matrix j;
    pen.rows(x, r, j);
    const Matrix fd = numerics::finite_difference_jacobian(
        [&](const Vector& y) {
            Vector out;
            Matrix unused;
            pen.rows(y, out, unused);
            return out;
        },
        x, 1e-6);
    EXPECT_LE((j - fd).norm() / fd.norm(), 1e-6);
}

TEST(Bubnov, NearbyStartFindsExactSolution) {
    const auto r = bubnov_trivial_demo(Vector{{0.9, 1.1}});
    EXPECT_EQ(r.label, "exact");
    EXPECT_NEAR(r.theta(0), 1.0, 1e-8);
    EXPECT_NEAR(r.theta(1), 1.0, 1e-8);
}

TEST(Bubnov, OtherStartFindsTrivialRoot) {
    const auto r = bubnov_trivial_demo(Vector{{0.1, 1.9}});
    EXPECT_EQ(r.label, "trivial(2)");
    EXPECT_NEAR(r.theta(0), 0.0, 1e-8);
    EXPECT_NEAR(r.theta(1), 2.0, 1e-8);
}

// (0.1, 2.2) lies on the edge of the (0, 2) basin; Newton still lands on the trivial family.
TEST(Bubnov, BasinEdgeStartStaysOnTrivialFamily) {
    const auto r = bubnov_trivial_demo(Vector{{0.1, 2.2}});
    EXPECT_EQ(r.label.rfind("trivial(", 0), 0u) << r.label;
    EXPECT_NEAR(r.theta(0), 0.0, 1e-8);
    EXPECT_LE(r.residual_norm, 1e-12);
}

TEST(Bubnov, ZeroAmplitudeIntegerFrequencyIsARoot) {
    const BubnovDemo demo;
    EXPECT_LE(demo.residual(Vector{{0.0, 3.0}}).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_GT(demo.residual(Vector{{0.0, 2.5}}).lpNorm<Eigen::Infinity>(), 1e-3);
    const Vector t{{0.7, 1.3}};
    const Matrix fd = numerics::finite_difference_jacobian(
        [&](const Vector& y) { return demo.residual(y); }, t, 1e-6);
    EXPECT_LE((demo.jacobian(t) - fd).norm() / fd.norm(), 1e-7);
}
