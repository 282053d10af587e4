#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "recon/numerics/dense.hpp"

namespace recon::numerics {

using ResidualFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;
using ObjectiveFn = std::function<double(const Vector&)>;
using GradientFn = std::function<Vector(const Vector&)>;

// ---------------------------------------------------------------------------
// Newton

struct NewtonOptions {
    double tol = 1e-10;
    int max_iter = 50;
    bool backtrack = true;  // halve the step until the residual 2-norm decreases
    int max_halvings = 30;
    // Optional admissibility test; inadmissible trial points are halved too.
    std::function<bool(const Vector&)> admissible;
};

struct NewtonResult {
    Vector x;
    int iterations = 0;
    double residual_norm = 0.0;
};

inline NewtonResult newton_root(const ResidualFn& residual, const JacobianFn& jacobian,
                                Vector x, const NewtonOptions& opt = {}) {
    Vector r = residual(x);
    double nr = r.lpNorm<Eigen::Infinity>();
    double n2 = r.norm();
    int it = 0;
    while (!(nr <= opt.tol)) {
        if (it >= opt.max_iter) {
            std::ostringstream os;
            os << "newton: no convergence after " << it << " iterations, |R| = " << nr;
            throw ConvergenceError(os.str(), nr, it);
        }
        if (!std::isfinite(nr)) throw ConvergenceError("newton: non-finite residual", nr, it);
        const Vector dx = solve_dense(jacobian(x), -r);
        ++it;
        double a = 1.0;
        Vector xt = x + dx;
        if (opt.backtrack) {
            int k = 0;
            for (; k < opt.max_halvings; ++k, a *= 0.5) {
                xt = x + a * dx;
                if (opt.admissible && !opt.admissible(xt)) continue;
                Vector rt;
                try {
                    rt = residual(xt);
                } catch (const NonPhysicalDeformation&) {
                    continue;
                }
                const double nt = rt.norm();
                if (std::isfinite(nt) && nt < n2) {
                    r = rt;
                    n2 = nt;
                    nr = rt.lpNorm<Eigen::Infinity>();
                    break;
                }
            }
            if (k == opt.max_halvings)
                throw ConvergenceError("newton: backtracking failed to reduce residual", nr, it);
            x = xt;
        } else {
            x = xt;
            r = residual(x);
            nr = r.lpNorm<Eigen::Infinity>();
            n2 = r.norm();
        }
    }
    return {x, it, nr};
}

// ---------------------------------------------------------------------------
// BFGS

struct BfgsOptions {
    double grad_tol = 1e-8;
    int max_iter = 500;
    double armijo = 1e-4;
    int max_backtracks = 60;
    int max_rejections = 5;  // consecutive objective failures tolerated per line search
};

struct BfgsResult {
    Vector x;
    double f = 0.0;
    Vector grad;
    int iterations = 0;
    bool converged = false;
    bool line_search_failed = false;
    std::vector<double> trace;  // objective per accepted iterate
};

inline BfgsResult bfgs_minimize(const ObjectiveFn& f, const GradientFn& g, Vector x,
                                const BfgsOptions& opt = {}) {
    const Eigen::Index n = x.size();
    BfgsResult res;
    double fx = f(x);
    Vector gx = g(x);
    Matrix hinv = Matrix::Identity(n, n);
    bool scaled = false;
    res.trace.push_back(fx);
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        if (gx.lpNorm<Eigen::Infinity>() <= opt.grad_tol) {
            res.converged = true;
            break;
        }
        Vector d = -hinv * gx;
        double slope = gx.dot(d);
        if (slope >= 0) {
            hinv.setIdentity();
            d = -gx;
            slope = gx.dot(d);
        }
        double a = 1.0, ft = 0.0;
        Vector xt;
        bool ok = false;
        int rejections = 0;
        for (int k = 0; k < opt.max_backtracks; ++k, a *= 0.5) {
            xt = x + a * d;
            try {
                ft = f(xt);
            } catch (const SolverError&) {
                if (++rejections > opt.max_rejections) break;
                continue;
            }
            if (std::isfinite(ft) && ft <= fx + opt.armijo * a * slope) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            res.line_search_failed = true;
            break;
        }
        const Vector gt = g(xt);
        const Vector s = xt - x, y = gt - gx;
        const double sy = s.dot(y);
        if (sy > 1e-300 * s.norm() * y.norm() && sy > 0) {
            if (!scaled) {
                hinv *= sy / y.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Matrix v = Matrix::Identity(n, n) - rho * s * y.transpose();
            hinv = v * hinv * v.transpose() + rho * s * s.transpose();
        }
        x = xt;
        fx = ft;
        gx = gt;
        res.trace.push_back(fx);
    }
    if (!res.converged && gx.lpNorm<Eigen::Infinity>() <= opt.grad_tol) res.converged = true;
    res.x = x;
    res.f = fx;
    res.grad = gx;
    res.iterations = it;
    return res;
}

// ---------------------------------------------------------------------------
// ADAM

using ValueGradFn = std::function<double(const Vector&, Vector&)>;

struct AdamOptions {
    double lr = 1e-3;
    long steps = 50000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long stagnation_window = 500;  // 0 disables
    double stagnation_rel = 1e-8;
    double target_loss = -1.0;  // stop once loss <= target (disabled when negative)
};

struct AdamResult {
    Vector x;
    double loss = 0.0;
    long steps = 0;
    bool stagnated = false;
    bool reached_target = false;
    std::vector<double> trace;  // loss every 100 steps
};

inline AdamResult adam_minimize(const ValueGradFn& fg, Vector x, const AdamOptions& opt = {}) {
    if (!(opt.lr > 0)) throw InvalidArgument("adam_minimize: lr must be positive");
    Vector m = Vector::Zero(x.size()), v = Vector::Zero(x.size()), g(x.size());
    std::deque<double> window;
    AdamResult res;
    double b1t = 1.0, b2t = 1.0, loss = 0.0;
    long k = 0;
    for (; k < opt.steps; ++k) {
        loss = fg(x, g);
        if (!std::isfinite(loss) || !g.allFinite()) {
            std::ostringstream os;
            os << "adam: non-finite loss at step " << k;
            throw DivergenceError(os.str(), k);
        }
        if (k % 100 == 0) res.trace.push_back(loss);
        if (opt.target_loss >= 0 && loss <= opt.target_loss) {
            res.reached_target = true;
            break;
        }
        if (opt.stagnation_window > 0) window.push_back(loss);
        if (opt.stagnation_window > 0 && static_cast<long>(window.size()) > opt.stagnation_window) {
            const double old = window.front();
            window.pop_front();
            if (std::abs(old - loss) <= opt.stagnation_rel * std::abs(loss)) {
                res.stagnated = true;
                break;
            }
        }
        b1t *= opt.beta1;
        b2t *= opt.beta2;
        m = opt.beta1 * m + (1 - opt.beta1) * g;
        v = opt.beta2 * v + (1 - opt.beta2) * g.cwiseAbs2();
        const Vector mh = m / (1 - b1t);
        const Vector vh = v / (1 - b2t);
        x.array() -= opt.lr * mh.array() / (vh.array().sqrt() + opt.eps);
    }
    if (k == opt.steps) loss = fg(x, g);
    res.x = x;
    res.loss = loss;
    res.steps = k;
    return res;
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt for min 1/2 |r(x)|^2

using ResidualJacobianFn = std::function<void(const Vector&, Vector& r, Matrix& jac)>;

struct LmOptions {
    int max_iter = 200;
    double mu0 = 1e-3;
    double target = -1.0;     // stop once 1/2|r|^2 <= target (disabled when negative)
    double rel_tol = 1e-12;   // stop when the accepted relative decrease falls below
    int stall_window = 10;    // over this many accepted steps
    double mu_max = 1e14;
    // Optional admissibility test for trial points.
    std::function<bool(const Vector&)> admissible;
};

struct LmResult {
    Vector x;
    double loss = 0.0;
    int iterations = 0;
    std::vector<double> trace;
};

inline LmResult levenberg_marquardt(const ResidualJacobianFn& rj, Vector x,
                                    const LmOptions& opt = {}) {
    Vector r;
    Matrix jac;
    rj(x, r, jac);
    double loss = 0.5 * r.squaredNorm();
    if (!std::isfinite(loss)) throw DivergenceError("levenberg_marquardt: non-finite start", 0);
    double mu = opt.mu0;
    LmResult res;
    res.trace.push_back(loss);
    std::deque<double> accepted{loss};
    int it = 0;
    Vector rt;
    Matrix jt;
    Matrix a;
    Vector g;
    bool fresh = true;
    for (; it < opt.max_iter; ++it) {
        if (opt.target >= 0 && loss <= opt.target) break;
        if (fresh) {
            a = jac.transpose() * jac;
            g = jac.transpose() * r;
            fresh = false;
        }
        Matrix damp = a;
        const Vector diag = a.diagonal();
        damp.diagonal() += mu * (diag.array() + 1e-10 * (1.0 + diag.maxCoeff())).matrix();
        const Vector d = damp.ldlt().solve(-g);
        const Vector xt = x + d;
        bool accept = false;
        if (d.allFinite() && (!opt.admissible || opt.admissible(xt))) {
            rj(xt, rt, jt);
            const double lt = 0.5 * rt.squaredNorm();
            if (std::isfinite(lt) && lt < loss) {
                accept = true;
                x = xt;
                r.swap(rt);
                jac.swap(jt);
                loss = lt;
                fresh = true;
                mu = std::max(mu / 3.0, 1e-15);
                res.trace.push_back(loss);
                accepted.push_back(loss);
                if (static_cast<int>(accepted.size()) > opt.stall_window) {
                    const double old = accepted.front();
                    accepted.pop_front();
                    if (old - loss <= opt.rel_tol * old) break;
                }
            }
        }
        if (!accept) {
            mu *= 4.0;
            if (mu > opt.mu_max) break;
        }
    }
    res.x = x;
    res.loss = loss;
    res.iterations = it;
    return res;
}

// ---------------------------------------------------------------------------
// Central finite differences

inline Vector finite_difference_gradient(const ObjectiveFn& fn, const Vector& x, double h) {
    if (!(h > 0)) throw InvalidArgument("finite_difference_gradient: h must be positive");
    Vector g(x.size());
    Vector xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        xp(i) = x(i) + h;
        const double fp = fn(xp);
        xp(i) = x(i) - h;
        const double fm = fn(xp);
        xp(i) = x(i);
        g(i) = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Central-difference Jacobian of a vector function, columns = d r / d x_j.
inline Matrix finite_difference_jacobian(const ResidualFn& fn, const Vector& x, double h) {
    if (!(h > 0)) throw InvalidArgument("finite_difference_jacobian: h must be positive");
    Vector xp = x;
    const Vector r0 = fn(x);
    Matrix jac(r0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        xp(j) = x(j) + h;
        const Vector fp = fn(xp);
        xp(j) = x(j) - h;
        const Vector fm = fn(xp);
        xp(j) = x(j);
        jac.col(j) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

}  // namespace recon::numerics
