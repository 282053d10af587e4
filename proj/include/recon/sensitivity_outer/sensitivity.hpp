#pragma once

#include "recon/inner_loop/kkt.hpp"
#include "recon/inner_loop/linear.hpp"

namespace recon::sensitivity_outer {

// Implicit derivatives of the inner solution with respect to eps:
//   J [d theta; d lambda] = -dR/deps (explicit).
struct SensitivityBundle {
    Matrix dtheta;    // N x P
    Matrix dlambda;   // C x P
    Matrix explicit_partial;  // dR/deps at fixed (theta, lambda)
    Matrix jacobian;  // inner Jacobian at the solution
};

inline SensitivityBundle sensitivities(const inner_loop::LinearInnerSolver& solver) {
    const auto& blk = solver.blocks();
    SensitivityBundle s;
    s.jacobian = blk.block();
    s.explicit_partial = -blk.rhs_eps();
    if (blk.sources() == 0) {
        s.dtheta.resize(blk.modes(), 0);
        s.dlambda.resize(blk.constraints(), 0);
        return s;
    }
    const Matrix d = solver.sensitivity();
    s.dtheta = d.topRows(blk.modes());
    s.dlambda = d.bottomRows(blk.constraints());
    return s;
}

// z is the raw KKT iterate [theta, mu^L, mu^U, s^L, s^U] at convergence.
// Throws RankDeficiencyError for a degenerate active set.
inline SensitivityBundle sensitivities(const inner_loop::HyperelasticKkt& sys, const Vector& z) {
    const int n = sys.modes(), c = sys.constraints();
    SensitivityBundle s;
    s.jacobian = sys.jacobian(z);
    s.explicit_partial = sys.residual_eps();
    if (sys.sources() == 0) {
        s.dtheta.resize(n, 0);
        s.dlambda.resize(c, 0);
        return s;
    }
    const auto lu = numerics::factor_dense(s.jacobian);
    const Matrix d = lu.solve(Matrix(-s.explicit_partial));
    s.dtheta = d.topRows(n);
    const auto sg = [](double t) { return t >= 0.0 ? 1.0 : -1.0; };
    s.dlambda.resize(c, sys.sources());
    for (int i = 0; i < c; ++i)
        s.dlambda.row(i) = sg(z(n + i)) * d.row(n + i) - sg(z(n + c + i)) * d.row(n + c + i);
    return s;
}

// dz/deps = (H lambda)^T dlambda/deps.
inline Vector total_force_gradient(const Matrix& h, const Vector& lambda,
                                   const SensitivityBundle& s) {
    if (lambda.size() == 0) return Vector::Zero(s.dlambda.cols());
    return s.dlambda.transpose() * (h * lambda);
}

}  // namespace recon::sensitivity_outer
