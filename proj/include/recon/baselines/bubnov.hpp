#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "recon/numerics/quadrature.hpp"
#include "recon/numerics/solvers.hpp"

namespace recon::baselines {

// Bubnov-Galerkin residual for u'' + s = 0 with u = t1 sin(t2 pi x),
// s = pi^2 sin(pi x):  R_k(t) = int (u'' + s) du/dt_k dx.
class BubnovDemo {
public:
    BubnovDemo() : rule_(numerics::gauss_legendre(200)) {}

    Vector residual(const Vector& t) const {
        const double pi = std::numbers::pi;
        Vector r = Vector::Zero(2);
        for (std::size_t q = 0; q < rule_.size(); ++q) {
            const double x = rule_.x[q], w = rule_.w[q];
            const double sn = std::sin(t(1) * pi * x), cs = std::cos(t(1) * pi * x);
            const double upp = -t(0) * (t(1) * pi) * (t(1) * pi) * sn;
            const double res = upp + pi * pi * std::sin(pi * x);
            r(0) += w * res * sn;
            r(1) += w * res * t(0) * pi * x * cs;
        }
        return r;
    }

    Matrix jacobian(const Vector& t) const {
        const double pi = std::numbers::pi;
        Matrix j = Matrix::Zero(2, 2);
        for (std::size_t q = 0; q < rule_.size(); ++q) {
            const double x = rule_.x[q], w = rule_.w[q];
            const double k = t(1) * pi;
            const double sn = std::sin(k * x), cs = std::cos(k * x);
            const double res = -t(0) * k * k * sn + pi * pi * std::sin(pi * x);
            // derivatives of the residual and of the tangent (sn, t0 pi x cs)
            const double dres0 = -k * k * sn;
            const double dres1 = -t(0) * (2.0 * k * pi * sn + k * k * pi * x * cs);
            const double g0 = sn, g1 = t(0) * pi * x * cs;
            const double dg0_1 = pi * x * cs;
            const double dg1_0 = pi * x * cs, dg1_1 = -t(0) * pi * pi * x * x * sn;
            j(0, 0) += w * dres0 * g0;
            j(0, 1) += w * (dres1 * g0 + res * dg0_1);
            j(1, 0) += w * (dres0 * g1 + res * dg1_0);
            j(1, 1) += w * (dres1 * g1 + res * dg1_1);
        }
        return j;
    }

private:
    numerics::Rule1d rule_;
};

struct BubnovRoot {
    Vector theta;
    int iterations = 0;
    double residual_norm = 0.0;
    std::string label;  // "exact", "trivial(n)" or "other"
};

inline std::string classify_bubnov_root(const Vector& t, double tol = 1e-6) {
    if (std::abs(t(0) - 1.0) < tol && std::abs(t(1) - 1.0) < tol) return "exact";
    const double n = std::round(t(1));
    if (std::abs(t(0)) < tol && n >= 1 && std::abs(t(1) - n) < tol)
        return "trivial(" + std::to_string(static_cast<int>(n)) + ")";
    return "other";
}

// Undamped Newton from theta0; throws ConvergenceError if it does not settle.
inline BubnovRoot bubnov_trivial_demo(const Vector& theta0, double tol = 1e-12) {
    if (theta0.size() != 2) throw InvalidArgument("bubnov: theta must have two entries");
    const BubnovDemo demo;
    numerics::NewtonOptions opt;
    opt.tol = tol;
    opt.max_iter = 60;
    opt.backtrack = false;
    const auto r = numerics::newton_root([&](const Vector& t) { return demo.residual(t); },
                                         [&](const Vector& t) { return demo.jacobian(t); }, theta0,
                                         opt);
    return {r.x, r.iterations, r.residual_norm, classify_bubnov_root(r.x)};
}

}  // namespace recon::baselines
