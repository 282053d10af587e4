#pragma once

#include "recon/baselines/penalty.hpp"

namespace recon::baselines {

struct LagrangeResult {
    Vector theta;
    Vector epsilon;
    Vector lambda;
};

// S = [K, F, G^T; F^T, B, 0; G, 0, 0],  S [theta; eps; lambda] = [0; 0; v].
inline Matrix lagrange_system(const StrongFormBlocks& s) {
    const Eigen::Index n = s.K.rows(), p = s.F.cols(), c = s.G.rows();
    Matrix m = Matrix::Zero(n + p + c, n + p + c);
    m.topLeftCorner(n, n) = s.K;
    m.block(0, n, n, p) = s.F;
    m.block(0, n + p, n, c) = s.G.transpose();
    m.block(n, 0, p, n) = s.F.transpose();
    m.block(n, n, p, p) = s.B;
    m.block(n + p, 0, c, n) = s.G;
    return m;
}

// Strong-form Lagrange multiplier method with free source magnitudes.
// Throws RankDeficiencyError carrying the nullspace dimension when the
// parameters are not identifiable from the data.
inline LagrangeResult lagrange_strongform_solve(const problems::LinearBar& physics,
                                                const problems::SourceFamily& b,
                                                const discretization::SineBasis& basis,
                                                const problems::MeasurementSet& data) {
    if (data.count() == 0) throw InvalidArgument("lagrange: no constraint rows (C = 0)");
    const auto s = assemble_strong(physics, b, basis, data);
    const Matrix m = lagrange_system(s);
    const int k = numerics::nullity(m);
    if (k > 0) throw RankDeficiencyError("lagrange: system is rank deficient", INFINITY, k);
    const int n = basis.size(), p = b.size(), c = data.count();
    Vector rhs = Vector::Zero(n + p + c);
    rhs.tail(c) = s.v;
    const Vector x = numerics::solve_dense(m, rhs);
    return {x.head(n), x.segment(n, p), x.tail(c)};
}

struct Interpolant {
    Vector theta;
    Vector lambda;
    double value = 0.0;  // energy or strong-form loss at theta
};

// Energy-form Lagrange interpolant at fixed eps:
//   K theta - F eps + G^T lambda = 0, G theta = v;  value = 1/2 theta^T K theta - eps^T F^T theta.
inline Interpolant energy_interpolant(const problems::LinearBar& physics,
                                      const problems::SourceFamily& b,
                                      const discretization::SineBasis& basis,
                                      const problems::MeasurementSet& data, const Vector& eps) {
    const auto blk =
        inner_loop::assemble_linear(physics, b, basis, nullptr, data, inner_loop::LossForm::energy);
    const auto sol = inner_loop::solve_linear_equality(blk, eps);
    Interpolant out;
    out.theta = sol.theta;
    out.lambda = -sol.lambda;
    out.value = 0.5 * sol.theta.dot(blk.K * sol.theta) - sol.theta.dot(blk.F * eps);
    return out;
}

// Strong-form Lagrange interpolant at fixed eps: minimizes 1/2 int (L w + b)^2
// subject to G theta = v; value is that loss.
inline Interpolant strong_interpolant(const problems::LinearBar& physics,
                                      const problems::SourceFamily& b,
                                      const discretization::SineBasis& basis,
                                      const problems::MeasurementSet& data, const Vector& eps) {
    const auto s = assemble_strong(physics, b, basis, data);
    const Eigen::Index n = s.K.rows(), c = s.G.rows();
    Matrix m = Matrix::Zero(n + c, n + c);
    m.topLeftCorner(n, n) = s.K;
    m.topRightCorner(n, c) = s.G.transpose();
    m.bottomLeftCorner(c, n) = s.G;
    Vector rhs(n + c);
    rhs.head(n) = -s.F * eps;
    rhs.tail(c) = s.v;
    const Vector x = numerics::solve_dense(m, rhs);
    Interpolant out;
    out.theta = x.head(n);
    out.lambda = x.tail(c);
    out.value = 0.5 * out.theta.dot(s.K * out.theta) + out.theta.dot(s.F * eps) +
                0.5 * eps.dot(s.B * eps);
    return out;
}

}  // namespace recon::baselines
