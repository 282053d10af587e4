#pragma once

#include <array>
#include <cmath>

#include "recon/inner_loop/network.hpp"

namespace recon::baselines {

enum class ResidualProvenance { pinn, ecfm };

// argmin_a 1/2 int (a . grad w - R)^2, i.e. M a = r with M = int grad w grad w^T,
// r = int R grad w. grad is nq x d, values are R at the same points.
inline Vector recover_advection(const Matrix& grad, const Vector& residual,
                                const std::vector<double>& weights) {
    const Eigen::Index nq = grad.rows(), d = grad.cols();
    if (residual.size() != nq || static_cast<Eigen::Index>(weights.size()) != nq)
        throw InvalidArgument("recover_advection: dimension mismatch");
    Matrix m = Matrix::Zero(d, d);
    Vector r = Vector::Zero(d);
    for (Eigen::Index q = 0; q < nq; ++q) {
        const Vector g = grad.row(q).transpose();
        m.noalias() += weights[q] * g * g.transpose();
        r += weights[q] * residual(q) * g;
    }
    const double scale = m.diagonal().cwiseAbs().maxCoeff();
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto sv = svd.singularValues();
    if (!(scale > 0) || sv(sv.size() - 1) <= 1e-12 * sv(0))
        throw RankDeficiencyError("recover_advection: degenerate field (singular gradient moment)",
                                  sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : INFINITY);
    return m.ldlt().solve(r);
}

// Residual of a reconstructed network field on the residual's rule:
//   pinn: R = div(grad w) + s (the part the model leaves unexplained)
//   ecfm: R = -sum_i lambda_i Gamma_i
// The advection term a . grad w is what R should match.
inline Vector recover_advection(problems::NetworkResidual& res, const Vector& theta,
                                ResidualProvenance prov, const Vector& lambda = Vector(),
                                const Matrix& gamma_at_points = Matrix()) {
    const Eigen::Index nq = res.points();
    Matrix grad(nq, 2);
    Vector r(nq);
    Vector rq;
    res.evaluate(theta, 0.0, rq);
    for (Eigen::Index q = 0; q < nq; ++q) {
        const auto& w = res.field().eval(theta, res.rule().x[q].data());
        grad(q, 0) = w.g(0);
        grad(q, 1) = w.g(1);
    }
    if (prov == ResidualProvenance::pinn) {
        r = rq;
    } else {
        if (gamma_at_points.rows() != nq || gamma_at_points.cols() != lambda.size())
            throw InvalidArgument("recover_advection: constraint force table mismatch");
        r = -(gamma_at_points * lambda);
    }
    return recover_advection(grad, r, res.rule().w);
}

}  // namespace recon::baselines
