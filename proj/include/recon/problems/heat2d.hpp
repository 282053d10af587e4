#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>

#include "recon/discretization/embedding.hpp"
#include "recon/numerics/quadrature.hpp"
#include "recon/numerics/solvers.hpp"

namespace recon::problems {

using Field2d = std::function<double(const double*)>;

// R = div(a grad w) - beta . grad w + s, with a(x; eps) = 1 + eps * phi(x)
// and phi = sin(pi x1) sin(pi x2) when the conductivity is parameterized.
struct Heat2dSystem {
    Field2d source;
    std::array<double, 2> advection{0.0, 0.0};
    bool parameterized_conductivity = false;
};

inline double heat_source(const double* x) {
    const double pi = std::numbers::pi;
    const double dx = x[0] - 0.25, dy = x[1] - 0.25;
    return 500.0 * std::sin(pi * x[0]) * std::sin(pi * x[1]) *
           std::exp(-100.0 * (dx * dx + dy * dy));
}

// True advection-diffusion system with A = I, a = (5, 5).
inline Heat2dSystem heat_true_system() { return {heat_source, {5.0, 5.0}, false}; }

// Reconstruction model: conductivity 1 + eps sin sin, no advection.
inline Heat2dSystem heat_model_system() { return {heat_source, {0.0, 0.0}, true}; }

// Pure diffusion model with A = I (advection-recovery study).
inline Heat2dSystem heat_diffusion_system() { return {heat_source, {0.0, 0.0}, false}; }

// Strong residual of an embedded network over a quadrature rule.
class NetworkResidual {
public:
    NetworkResidual(const discretization::TanhNetwork& net, Heat2dSystem sys,
                    numerics::Rule2d rule)
        : sys_(std::move(sys)), rule_(std::move(rule)),
          field_(net, discretization::DirichletEmbedding::unit_square()) {
        const double pi = std::numbers::pi;
        const auto n = static_cast<Eigen::Index>(rule_.size());
        s_.resize(n);
        phi_.resize(n);
        dphi_.resize(n, 2);
        for (Eigen::Index q = 0; q < n; ++q) {
            const double* x = rule_.x[q].data();
            s_(q) = sys_.source(x);
            const double sx = std::sin(pi * x[0]), sy = std::sin(pi * x[1]);
            phi_(q) = sx * sy;
            dphi_(q, 0) = pi * std::cos(pi * x[0]) * sy;
            dphi_(q, 1) = pi * sx * std::cos(pi * x[1]);
        }
    }

    const numerics::Rule2d& rule() const { return rule_; }
    const Heat2dSystem& system() const { return sys_; }
    const discretization::TanhNetwork& network() const { return field_.network(); }
    discretization::EmbeddedField& field() { return field_; }
    Eigen::Index points() const { return s_.size(); }
    Eigen::Index params() const { return field_.network().param_count(); }

    // Residual at every quadrature point; optional Jacobian rows dR/dtheta
    // and dR/deps. Rows are unweighted.
    void evaluate(const Vector& theta, double eps, Vector& r, Matrix* jac = nullptr,
                  Vector* deps = nullptr) {
        const Eigen::Index n = points();
        r.resize(n);
        if (jac) jac->setZero(n, params());
        if (deps) deps->resize(n);
        Vector ck(2);
        Matrix ckl(2, 2);
        Vector row(params());
        const double bx = sys_.advection[0], by = sys_.advection[1];
        for (Eigen::Index q = 0; q < n; ++q) {
            const auto& w = field_.eval(theta, rule_.x[q].data());
            double a = 1.0, ax = 0.0, ay = 0.0;
            if (sys_.parameterized_conductivity) {
                a += eps * phi_(q);
                ax = eps * dphi_(q, 0);
                ay = eps * dphi_(q, 1);
            }
            const double lap = w.h(0, 0) + w.h(1, 1);
            r(q) = a * lap + (ax - bx) * w.g(0) + (ay - by) * w.g(1) + s_(q);
            if (deps)
                (*deps)(q) = sys_.parameterized_conductivity
                                 ? phi_(q) * lap + dphi_(q, 0) * w.g(0) + dphi_(q, 1) * w.g(1)
                                 : 0.0;
            if (jac) {
                ck << ax - bx, ay - by;
                ckl << a, 0.0, 0.0, a;
                row.setZero();
                field_.backward(theta, 0.0, ck, ckl, 1.0, row.data());
                jac->row(q) = row.transpose();
            }
        }
    }

    // 1/2 int (R + shift)^2 and its theta gradient; optionally the shifted
    // residual at every point.
    double half_squared(const Vector& theta, double eps, Vector* grad = nullptr,
                        const Vector* shift = nullptr, Vector* rq = nullptr) {
        const Eigen::Index n = points();
        double acc = 0.0;
        if (grad) grad->setZero(params());
        if (rq) rq->resize(n);
        Vector ck(2);
        Matrix ckl(2, 2);
        const double bx = sys_.advection[0], by = sys_.advection[1];
        for (Eigen::Index q = 0; q < n; ++q) {
            const auto& w = field_.eval(theta, rule_.x[q].data());
            double a = 1.0, ax = 0.0, ay = 0.0;
            if (sys_.parameterized_conductivity) {
                a += eps * phi_(q);
                ax = eps * dphi_(q, 0);
                ay = eps * dphi_(q, 1);
            }
            double r =
                a * (w.h(0, 0) + w.h(1, 1)) + (ax - bx) * w.g(0) + (ay - by) * w.g(1) + s_(q);
            if (shift) r += (*shift)(q);
            if (rq) (*rq)(q) = r;
            acc += 0.5 * rule_.w[q] * r * r;
            if (grad) {
                ck << ax - bx, ay - by;
                ckl << a, 0.0, 0.0, a;
                field_.backward(theta, 0.0, ck, ckl, rule_.w[q] * r, grad->data());
            }
        }
        return acc;
    }

    double value(const Vector& theta, const double* x) { return field_.eval(theta, x).v; }

    // Strong residual at an arbitrary point.
    double residual_at(const Vector& theta, double eps, const double* x) {
        const double pi = std::numbers::pi;
        const auto& w = field_.eval(theta, x);
        double a = 1.0, ax = 0.0, ay = 0.0;
        if (sys_.parameterized_conductivity) {
            const double sx = std::sin(pi * x[0]), sy = std::sin(pi * x[1]);
            a += eps * sx * sy;
            ax = eps * pi * std::cos(pi * x[0]) * sy;
            ay = eps * pi * sx * std::cos(pi * x[1]);
        }
        return a * (w.h(0, 0) + w.h(1, 1)) + (ax - sys_.advection[0]) * w.g(0) +
               (ay - sys_.advection[1]) * w.g(1) + sys_.source(x);
    }

    Vector grad_theta_value(const Vector& theta, const double* x) {
        return field_.grad_theta_value(theta, x);
    }

private:
    Heat2dSystem sys_;
    numerics::Rule2d rule_;
    discretization::EmbeddedField field_;
    Vector s_, phi_;
    Matrix dphi_;
};

struct NetworkTrainingOptions {
    long adam_steps = 10000;  // warm-up before least-squares refinement
    double lr = 1e-3;
    int lm_iter = 600;
    double cutoff = 1e-3;  // on int R^2
};

struct NetworkTrainingResult {
    Vector theta;
    double residual_sq = 0.0;  // int R^2
    long adam_steps = 0;
    int lm_iterations = 0;
    bool reached_cutoff = false;
};

// Minimizes 1/2 int R^2: ADAM warm-up, then Levenberg-Marquardt until the
// cutoff on int R^2 is met.
inline NetworkTrainingResult reference_solution(NetworkResidual& res, std::uint64_t seed,
                                                const NetworkTrainingOptions& opt = {},
                                                double eps = 0.0) {
    Vector theta = discretization::init_network(res.network(), seed);
    NetworkTrainingResult out;
    if (opt.adam_steps > 0) {
        numerics::AdamOptions ao;
        ao.lr = opt.lr;
        ao.steps = opt.adam_steps;
        ao.target_loss = 0.5 * opt.cutoff;
        auto fg = [&](const Vector& th, Vector& g) { return res.half_squared(th, eps, &g); };
        const auto a = numerics::adam_minimize(fg, theta, ao);
        theta = a.x;
        out.adam_steps = a.steps;
    }
    const Eigen::Map<const Vector> wq(res.rule().w.data(), res.points());
    const Vector sw = wq.cwiseSqrt();
    auto rj = [&](const Vector& th, Vector& r, Matrix& j) {
        res.evaluate(th, eps, r, &j);
        r = r.cwiseProduct(sw);
        j = sw.asDiagonal() * j;
    };
    numerics::LmOptions lo;
    lo.max_iter = opt.lm_iter;
    lo.target = 0.5 * opt.cutoff;
    const auto lm = numerics::levenberg_marquardt(rj, theta, lo);
    out.theta = lm.x;
    out.residual_sq = 2.0 * lm.loss;
    out.lm_iterations = lm.iterations;
    out.reached_cutoff = out.residual_sq <= opt.cutoff;
    return out;
}

}  // namespace recon::problems
