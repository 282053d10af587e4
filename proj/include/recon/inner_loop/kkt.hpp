#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "recon/inner_loop/linear.hpp"

namespace recon::inner_loop {

struct KktOptions {
    double tol = 1e-10;
    int max_iter = 100;
    int attempts = 3;  // perturbed restarts after the first failure
};

// Inequality-constrained inner problem for the hyperelastic bar.
//   R_k  = int P(w') f_k' - (b(eps) + sum_i lambda_i Gamma_i) f_k
//   h^L_i + (s^L_i)^2 = 0,  h^L_i = v_i - a sigma - w(x_i)
//   h^U_i + (s^U_i)^2 = 0,  h^U_i = w(x_i) - v_i - a sigma
//   |mu^L_i| s^L_i = 0,     |mu^U_i| s^U_i = 0
// with lambda_i = |mu^L_i| - |mu^U_i|. Unknowns z = [theta, mu^L, mu^U, s^L, s^U].
class HyperelasticKkt {
public:
    static constexpr double kActive = 1e-12;  // multipliers below this count as zero

    HyperelasticKkt(problems::NeoHookean material, problems::SourceFamily b,
                    const discretization::SineBasis& basis,
                    const constraint_force::ConstraintForceSet& forces,
                    const problems::MeasurementSet& data)
        : mat_(material), n_(basis.size()), c_(data.count()), bound_(data.bound()) {
        problems::validate(data);
        if (data.dim != 1) throw InvalidArgument("kkt: 1D measurements required");
        if (forces.count() != c_) throw InvalidArgument("kkt: one constraint force per measurement");
        const numerics::Rule1d rule = linear_rule(&forces, data, basis.size());
        xs_ = rule.x;
        wq_ = Eigen::Map<const Vector>(rule.w.data(), static_cast<Eigen::Index>(rule.size()));
        fp_ = basis.d1_at(xs_);
        const Matrix f = basis.values_at(xs_);
        src_ = Matrix::Zero(n_, b.size());
        gam_ = Matrix::Zero(n_, c_);
        for (std::size_t q = 0; q < xs_.size(); ++q) {
            const double x = xs_[q], w = rule.w[q];
            for (int p = 0; p < b.size(); ++p) src_.col(p) += w * b.terms[p](x) * f.row(q).transpose();
            gam_.noalias() += w * f.row(q).transpose() * forces.eval_all(&x).transpose();
        }
        g_.resize(c_, n_);
        v_.resize(c_);
        for (int i = 0; i < c_; ++i) {
            g_.row(i) = basis.values(data.x[i][0]).transpose();
            v_(i) = data.v[i];
        }
    }

    int modes() const { return n_; }
    int constraints() const { return c_; }
    int sources() const { return static_cast<int>(src_.cols()); }
    Eigen::Index size() const { return n_ + 4 * c_; }
    double bound() const { return bound_; }
    const Matrix& constraint_rows() const { return g_; }

    bool admissible(const Vector& theta) const {
        return ((fp_ * theta).array() + 1.0).minCoeff() > problems::kMinStretch;
    }

    // Weak physics residual R(theta, lambda; eps).
    Vector physics_residual(const Vector& theta, const Vector& lambda, const Vector& eps) const {
        const Vector e = fp_ * theta;
        Vector p(e.size());
        for (Eigen::Index q = 0; q < e.size(); ++q) {
            problems::check_stretch(xs_[q], e(q));
            p(q) = wq_(q) * mat_.stress(e(q));
        }
        return fp_.transpose() * p - src_ * eps - gam_ * lambda;
    }

    Matrix stiffness(const Vector& theta) const {
        const Vector e = fp_ * theta;
        Vector t(e.size());
        for (Eigen::Index q = 0; q < e.size(); ++q) t(q) = wq_(q) * mat_.tangent(e(q));
        return fp_.transpose() * t.asDiagonal() * fp_;
    }

    // h^L and h^U.
    Vector lower_gap(const Vector& theta) const {
        return (v_ - g_ * theta).array() - bound_;
    }
    Vector upper_gap(const Vector& theta) const {
        return (g_ * theta - v_).array() - bound_;
    }

    Vector residual(const Vector& z, const Vector& eps) const {
        const auto th = z.head(n_);
        const auto ml = z.segment(n_, c_), mu = z.segment(n_ + c_, c_);
        const auto sl = z.segment(n_ + 2 * c_, c_), su = z.segment(n_ + 3 * c_, c_);
        const Vector lam = ml.cwiseAbs() - mu.cwiseAbs();
        Vector r(size());
        r.head(n_) = physics_residual(th, lam, eps);
        r.segment(n_, c_) = lower_gap(th) + sl.cwiseAbs2();
        r.segment(n_ + c_, c_) = upper_gap(th) + su.cwiseAbs2();
        r.segment(n_ + 2 * c_, c_) = ml.cwiseAbs().cwiseProduct(sl);
        r.segment(n_ + 3 * c_, c_) = mu.cwiseAbs().cwiseProduct(su);
        return r;
    }

    // Generalized Jacobian; d|mu|/dmu = sign(mu) with sign(0) = +1.
    Matrix jacobian(const Vector& z) const {
        const Vector th = z.head(n_);
        const Vector ml = z.segment(n_, c_), mu = z.segment(n_ + c_, c_);
        const Vector sl = z.segment(n_ + 2 * c_, c_), su = z.segment(n_ + 3 * c_, c_);
        const Vector gl = sgn(ml), gu = sgn(mu);
        const int n = n_, c = c_;
        Matrix j = Matrix::Zero(size(), size());
        j.topLeftCorner(n, n) = stiffness(th);
        j.block(0, n, n, c) = -gam_ * gl.asDiagonal();
        j.block(0, n + c, n, c) = gam_ * gu.asDiagonal();
        j.block(n, 0, c, n) = -g_;
        j.block(n, n + 2 * c, c, c) = (2.0 * sl).asDiagonal();
        j.block(n + c, 0, c, n) = g_;
        j.block(n + c, n + 3 * c, c, c) = (2.0 * su).asDiagonal();
        j.block(n + 2 * c, n, c, c) = gl.cwiseProduct(sl).asDiagonal();
        j.block(n + 2 * c, n + 2 * c, c, c) = ml.cwiseAbs().asDiagonal();
        j.block(n + 3 * c, n + c, c, c) = gu.cwiseProduct(su).asDiagonal();
        j.block(n + 3 * c, n + 3 * c, c, c) = mu.cwiseAbs().asDiagonal();
        return j;
    }

    // Partial of the KKT residual with respect to eps.
    Matrix residual_eps() const {
        Matrix d = Matrix::Zero(size(), sources());
        d.topRows(n_) = -src_;
        return d;
    }

    // Equality-constrained solve w(x_i) = v_i (the sigma -> 0 limit).
    InnerSolution solve_equality(const Vector& eps, const numerics::NewtonOptions& opt = {}) const {
        const int n = n_, c = c_;
        auto res = [&](const Vector& x) {
            Vector r(n + c);
            r.head(n) = physics_residual(x.head(n), x.tail(c), eps);
            r.tail(c) = g_ * x.head(n) - v_;
            return r;
        };
        auto jac = [&](const Vector& x) {
            Matrix j = Matrix::Zero(n + c, n + c);
            j.topLeftCorner(n, n) = stiffness(x.head(n));
            j.topRightCorner(n, c) = -gam_;
            j.bottomLeftCorner(c, n) = g_;
            return j;
        };
        numerics::NewtonOptions o = opt;
        o.admissible = [&](const Vector& x) { return admissible(x.head(n)); };
        const auto r = numerics::newton_root(res, jac, Vector::Zero(n + c), o);
        InnerSolution s;
        s.theta = r.x.head(n);
        s.lambda = r.x.tail(c);
        s.iterations = r.iterations;
        s.residual_norm = r.residual_norm;
        return s;
    }

    // Warm start from the equality solution: s = sqrt(max(-h, 1e-6)),
    // lambda split into (mu^L, mu^U) by sign.
    Vector warm_start(const InnerSolution& eq) const {
        Vector z(size());
        z.head(n_) = eq.theta;
        z.segment(n_, c_) = eq.lambda.cwiseMax(0.0);
        z.segment(n_ + c_, c_) = (-eq.lambda).cwiseMax(0.0);
        z.segment(n_ + 2 * c_, c_) = (-lower_gap(eq.theta)).cwiseMax(1e-6).cwiseSqrt();
        z.segment(n_ + 3 * c_, c_) = (-upper_gap(eq.theta)).cwiseMax(1e-6).cwiseSqrt();
        return z;
    }

    InnerSolution unpack(const Vector& z, int iterations, double residual_norm) const {
        InnerSolution s;
        s.theta = z.head(n_);
        s.mu_lower = z.segment(n_, c_).cwiseAbs();
        s.mu_upper = z.segment(n_ + c_, c_).cwiseAbs();
        s.lambda = s.mu_lower - s.mu_upper;
        s.slack = z.tail(2 * c_);
        s.active.resize(c_);
        for (int i = 0; i < c_; ++i)
            s.active[i] = s.mu_lower(i) > kActive ? 1 : (s.mu_upper(i) > kActive ? -1 : 0);
        s.iterations = iterations;
        s.residual_norm = residual_norm;
        return s;
    }

    // Newton on the KKT system; on failure retries from perturbed warm
    // starts, then throws ConvergenceError. Returns the raw iterate in z_out.
    InnerSolution solve(const Vector& eps, const std::optional<Vector>& start = std::nullopt,
                        Vector* z_out = nullptr, const KktOptions& opt = {}) const {
        if (!(bound_ > 0)) throw InvalidArgument("kkt: requires a positive bound alpha * sigma");
        Vector base = start ? *start : warm_start(solve_equality(eps));
        if (base.size() != size()) throw InvalidArgument("kkt: warm start dimension mismatch");
        numerics::NewtonOptions no;
        no.tol = opt.tol;
        no.max_iter = opt.max_iter;
        no.admissible = [&](const Vector& z) { return admissible(z.head(n_)); };
        auto res = [&](const Vector& z) { return residual(z, eps); };
        auto jac = [&](const Vector& z) { return jacobian(z); };
        double last = 0.0;
        int last_it = 0;
        for (int a = 0; a <= opt.attempts; ++a) {
            Vector z0 = base;
            if (a > 0) {
                // Shrink the multipliers, lift the slacks.
                const double f = std::pow(0.5, a);
                z0.segment(n_, 2 * c_) *= f;
                z0.tail(2 * c_) = (z0.tail(2 * c_).cwiseAbs2().array() + 1e-3 * a).sqrt();
            }
            try {
                const auto r = numerics::newton_root(res, jac, z0, no);
                Vector z = r.x;
                double nr = r.residual_norm;
                polish(z, nr, eps);
                if (z_out) *z_out = z;
                return unpack(z, r.iterations, nr);
            } catch (const SolverError& e) {
                if (const auto* ce = dynamic_cast<const ConvergenceError*>(&e)) {
                    last = ce->residual();
                    last_it = ce->iterations();
                }
            }
        }
        throw ConvergenceError("kkt: Newton failed from every warm start", last, last_it);
    }

private:
    // One extra full Newton step, kept when it does not raise the residual.
    void polish(Vector& z, double& nr, const Vector& eps) const {
        try {
            const Vector r = residual(z, eps);
            const Vector zt = z + numerics::solve_dense(jacobian(z), -r);
            if (!admissible(zt.head(n_))) return;
            const Vector rt = residual(zt, eps);
            if (rt.norm() <= r.norm()) {
                z = zt;
                nr = rt.lpNorm<Eigen::Infinity>();
            }
        } catch (const SolverError&) {
        }
    }

    problems::NeoHookean mat_;
    int n_, c_;
    double bound_;
    std::vector<double> xs_;
    Vector wq_;
    Matrix fp_;
    Matrix src_;  // N x P
    Matrix gam_;  // N x C
    Matrix g_;    // C x N
    Vector v_;

    static Vector sgn(const Vector& m) {
        return m.unaryExpr([](double t) { return t >= 0.0 ? 1.0 : -1.0; });
    }
};

inline InnerSolution solve_nonlinear_kkt(const HyperelasticKkt& sys, const Vector& eps,
                                         const std::optional<Vector>& warm_start = std::nullopt) {
    return sys.solve(eps, warm_start);
}

}  // namespace recon::inner_loop
