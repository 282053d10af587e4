#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "recon/discretization/sine_basis.hpp"
#include "recon/numerics/quadrature.hpp"
#include "recon/numerics/solvers.hpp"

namespace recon::problems {

using ScalarFn = std::function<double(double)>;

// b(x; eps) = sum_p eps_p b_p(x).
struct SourceFamily {
    std::vector<ScalarFn> terms;

    int size() const { return static_cast<int>(terms.size()); }
    double eval(const Vector& eps, double x) const {
        double acc = 0.0;
        for (int p = 0; p < size(); ++p) acc += eps(p) * terms[p](x);
        return acc;
    }

    static SourceFamily single(ScalarFn f) { return SourceFamily{{std::move(f)}}; }
    // sin(k pi x) for k = 1..p.
    static SourceFamily sines(int p) {
        SourceFamily s;
        for (int k = 1; k <= p; ++k)
            s.terms.push_back([k](double x) { return std::sin(k * std::numbers::pi * x); });
        return s;
    }
};

// -(E u')' = s on (0,1), u(0) = u(1) = 0.
struct LinearBar {
    ScalarFn modulus = [](double) { return 1.0; };
    ScalarFn modulus_dx = [](double) { return 0.0; };
    ScalarFn source;
};

// Dense Galerkin solve on the sine basis.
inline Vector reference_solution(const LinearBar& bar, const discretization::SineBasis& basis,
                                 const numerics::Rule1d& rule) {
    const int n = basis.size();
    Matrix k = Matrix::Zero(n, n);
    Vector f = Vector::Zero(n);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const double x = rule.x[q], w = rule.w[q];
        const Vector d1 = basis.d1(x);
        k.noalias() += (w * bar.modulus(x)) * d1 * d1.transpose();
        f += (w * bar.source(x)) * basis.values(x);
    }
    return numerics::solve_dense(k, f);
}

// Pointwise strong residual (E w')' + b(x; eps).
inline double physics_residual(const LinearBar& model, const SourceFamily& b,
                               const discretization::SineBasis& basis, const Vector& theta,
                               const Vector& eps, double x) {
    return model.modulus(x) * basis.eval_dxx(theta, x) +
           model.modulus_dx(x) * basis.eval_dx(theta, x) + b.eval(eps, x);
}

// Compressible Neo-Hookean bar, strain e = w', stretch 1 + e.
struct NeoHookean {
    double l1 = 1.0;
    double l2 = 1.0;

    double energy(double e) const {
        const double f = 1.0 + e, lf = std::log(f);
        return 0.5 * l1 * (f * f - 1.0 - 2.0 * lf) + 0.5 * l2 * lf * lf;
    }
    double stress(double e) const {
        const double f = 1.0 + e;
        return l1 * f - l1 / f + l2 * std::log(f) / f;
    }
    double tangent(double e) const {
        const double f = 1.0 + e;
        return l1 + (l1 + l2 * (1.0 - std::log(f))) / (f * f);
    }
    double tangent_dx(double e) const {
        const double f = 1.0 + e;
        return (-2.0 * l1 - l2 * (3.0 - 2.0 * std::log(f))) / (f * f * f);
    }
};

inline constexpr double kMinStretch = 0.05;

inline void check_stretch(double x, double e) {
    if (!(1.0 + e > 0.0))
        throw NonPhysicalDeformation("hyperelastic: non-positive stretch 1 + w'", x, 1.0 + e);
}

struct HyperelasticBar {
    NeoHookean material;
    ScalarFn source;
};

// Pointwise strong residual w'' P'(w') + b(x; eps).
inline double physics_residual(const NeoHookean& mat, const SourceFamily& b,
                               const discretization::SineBasis& basis, const Vector& theta,
                               const Vector& eps, double x) {
    const double e = basis.eval_dx(theta, x);
    check_stretch(x, e);
    return basis.eval_dxx(theta, x) * mat.tangent(e) + b.eval(eps, x);
}

// Difference of the one-sided strain limits at x0, each extrapolated
// quadratically from strains sampled at x0 +- k delta, k = 1, 2, 3.
inline double strain_jump(const discretization::SineBasis& basis, const Vector& theta, double x0,
                          double delta) {
    if (!(delta > 0)) throw InvalidArgument("strain_jump: delta must be positive");
    auto e = [&](double x) { return basis.eval_dx(theta, x); };
    const double right = 3.0 * e(x0 + delta) - 3.0 * e(x0 + 2 * delta) + e(x0 + 3 * delta);
    const double left = 3.0 * e(x0 - delta) - 3.0 * e(x0 - 2 * delta) + e(x0 - 3 * delta);
    return right - left;
}

struct HyperelasticReference {
    Vector theta;
    double multiplier = 0.0;  // point reaction at the pinned location
    int iterations = 0;
    double residual_norm = 0.0;
};

// Newton on the weak form with w(pin) = 0 enforced by one multiplier:
//   int P(w') f_j' - s f_j + mu f_j(pin) = 0,  w(pin) = 0.
inline HyperelasticReference reference_solution(const HyperelasticBar& bar,
                                                const discretization::SineBasis& basis,
                                                const numerics::Rule1d& rule, double pin = 0.5,
                                                const numerics::NewtonOptions& opt = {}) {
    const int n = basis.size();
    std::vector<double> xs(rule.x);
    const Matrix f = basis.values_at(xs), fp = basis.d1_at(xs);
    Vector load = Vector::Zero(n);
    for (std::size_t q = 0; q < xs.size(); ++q) load += rule.w[q] * bar.source(xs[q]) * f.row(q).transpose();
    const Vector gp = basis.values(pin);
    const Eigen::Map<const Vector> wq(rule.w.data(), rule.w.size());

    auto residual = [&](const Vector& z) {
        const Vector e = fp * z.head(n);
        Vector p(e.size());
        for (Eigen::Index q = 0; q < e.size(); ++q) {
            check_stretch(xs[q], e(q));
            p(q) = bar.material.stress(e(q));
        }
        Vector r(n + 1);
        r.head(n) = fp.transpose() * wq.cwiseProduct(p) - load + z(n) * gp;
        r(n) = gp.dot(z.head(n));
        return r;
    };
    auto jacobian = [&](const Vector& z) {
        const Vector e = fp * z.head(n);
        Vector t(e.size());
        for (Eigen::Index q = 0; q < e.size(); ++q) t(q) = wq(q) * bar.material.tangent(e(q));
        Matrix j = Matrix::Zero(n + 1, n + 1);
        j.topLeftCorner(n, n).noalias() = fp.transpose() * t.asDiagonal() * fp;
        j.block(0, n, n, 1) = gp;
        j.block(n, 0, 1, n) = gp.transpose();
        return j;
    };
    numerics::NewtonOptions o = opt;
    o.admissible = [&](const Vector& z) {
        return ((fp * z.head(n)).array() + 1.0).minCoeff() > kMinStretch;
    };
    const auto res = numerics::newton_root(residual, jacobian, Vector::Zero(n + 1), o);
    return {res.x.head(n), res.x(n), res.iterations, res.residual_norm};
}

}  // namespace recon::problems
