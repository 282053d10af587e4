#pragma once

#include <cmath>
#include <cstdint>

#include "recon/constraint_force/forces.hpp"
#include "recon/inner_loop/linear.hpp"
#include "recon/problems/heat2d.hpp"
#include "recon/problems/measurements.hpp"

namespace recon::inner_loop {

struct NetworkInnerOptions {
    long adam_steps = 0;  // warm-up before Levenberg-Marquardt
    double lr = 1e-3;
    long stagnation_window = 500;
    double stagnation_rel = 1e-8;
    int lm_iter = 400;
    double lm_rel_tol = 1e-10;
};

struct NetworkInnerSolution : InnerSolution {
    double physics_loss = 0.0;  // 1/2 int (R + F)^2
    double penalty = 0.0;       // lambda_d' |h|^2
    double loss = 0.0;
    double max_violation = 0.0;
    long adam_steps = 0;
};

// Penalized network inner loop over x = [theta; lambda]:
//   1/2 int (R(w; eps) + sum_i lambda_i Gamma_i)^2 + lambda_d' sum_i (w(x_i) - v_i)^2.
class PenalizedNetworkInner {
public:
    PenalizedNetworkInner(problems::NetworkResidual& res,
                          const constraint_force::ConstraintForceSet& forces,
                          problems::MeasurementSet data, double lambda_d)
        : res_(res), data_(std::move(data)), lambda_d_(lambda_d) {
        problems::validate(data_);
        if (!(lambda_d_ > 0)) throw InvalidArgument("penalized network: lambda_d' must be positive");
        if (data_.dim != 2) throw InvalidArgument("penalized network: 2D measurements required");
        if (forces.count() != data_.count())
            throw InvalidArgument("penalized network: one constraint force per measurement");
        const auto& rule = res_.rule();
        const Eigen::Index nq = res_.points();
        gamma_.resize(nq, data_.count());
        sw_.resize(nq);
        for (Eigen::Index q = 0; q < nq; ++q) {
            if (data_.count() > 0) gamma_.row(q) = forces.eval_all(rule.x[q].data()).transpose();
            sw_(q) = std::sqrt(rule.w[q]);
        }
        v_ = Eigen::Map<const Vector>(data_.v.data(), data_.count());
    }

    int constraints() const { return data_.count(); }
    Eigen::Index params() const { return res_.params(); }
    Eigen::Index size() const { return params() + constraints(); }
    const Matrix& gamma_at_points() const { return gamma_; }

    Vector initial_guess(std::uint64_t seed) const {
        Vector x = Vector::Zero(size());
        x.head(params()) = discretization::init_network(res_.network(), seed);
        return x;
    }

    // Start from given network parameters with zero constraint forces.
    Vector initial_guess(const Vector& theta) const {
        if (theta.size() != params()) throw InvalidArgument("penalized network: theta dimension mismatch");
        Vector x = Vector::Zero(size());
        x.head(params()) = theta;
        return x;
    }

    // w(x_i) - v_i.
    Vector violations(const Vector& theta) {
        Vector h(constraints());
        for (int i = 0; i < constraints(); ++i)
            h(i) = res_.value(theta, data_.x[i].data()) - v_(i);
        return h;
    }

    // Weighted least-squares rows and Jacobian; 1/2 |r|^2 is the objective.
    void rows(const Vector& x, double eps, Vector& r, Matrix& jac) {
        const Eigen::Index np = params(), nq = res_.points();
        const int c = constraints();
        const Vector theta = x.head(np);
        Vector rq;
        Matrix jq;
        res_.evaluate(theta, eps, rq, &jq);
        if (c > 0) rq += gamma_ * x.tail(c);
        r.resize(nq + c);
        jac.setZero(nq + c, np + c);
        r.head(nq) = sw_.cwiseProduct(rq);
        jac.topLeftCorner(nq, np) = sw_.asDiagonal() * jq;
        if (c > 0) jac.topRightCorner(nq, c) = sw_.asDiagonal() * gamma_;
        const double sp = std::sqrt(2.0 * lambda_d_);
        for (int i = 0; i < c; ++i) {
            const Vector g = res_.grad_theta_value(theta, data_.x[i].data());
            r(nq + i) = sp * (res_.value(theta, data_.x[i].data()) - v_(i));
            jac.block(nq + i, 0, 1, np) = sp * g.transpose();
        }
    }

    double loss_grad(const Vector& x, double eps, Vector& g) {
        const Eigen::Index np = params();
        const int c = constraints();
        const Vector theta = x.head(np);
        Vector shift, rq, gt;
        if (c > 0) shift = gamma_ * x.tail(c);
        double loss = res_.half_squared(theta, eps, &gt, c > 0 ? &shift : nullptr, &rq);
        g.resize(size());
        g.head(np) = gt;
        if (c > 0) {
            g.tail(c) = gamma_.transpose() * sw_.cwiseAbs2().cwiseProduct(rq);
            for (int i = 0; i < c; ++i) {
                const Vector gv = res_.grad_theta_value(theta, data_.x[i].data());
                const double h = res_.value(theta, data_.x[i].data()) - v_(i);
                loss += lambda_d_ * h * h;
                g.head(np) += 2.0 * lambda_d_ * h * gv;
            }
        }
        return loss;
    }

    NetworkInnerSolution summarize(const Vector& x, double eps) {
        const Eigen::Index np = params();
        const int c = constraints();
        NetworkInnerSolution s;
        s.theta = x.head(np);
        s.lambda = x.tail(c);
        Vector shift;
        if (c > 0) shift = gamma_ * s.lambda;
        s.physics_loss = res_.half_squared(s.theta, eps, nullptr, c > 0 ? &shift : nullptr);
        const Vector h = violations(s.theta);
        s.penalty = lambda_d_ * h.squaredNorm();
        s.loss = s.physics_loss + s.penalty;
        s.max_violation = c > 0 ? h.lpNorm<Eigen::Infinity>() : 0.0;
        return s;
    }

    NetworkInnerSolution solve(double eps, const Vector& x0, const NetworkInnerOptions& opt = {}) {
        if (x0.size() != size()) throw InvalidArgument("penalized network: start dimension mismatch");
        Vector x = x0;
        long adam = 0;
        if (opt.adam_steps > 0) {
            numerics::AdamOptions ao;
            ao.lr = opt.lr;
            ao.steps = opt.adam_steps;
            ao.stagnation_window = opt.stagnation_window;
            ao.stagnation_rel = opt.stagnation_rel;
            const auto a = numerics::adam_minimize(
                [&](const Vector& y, Vector& g) { return loss_grad(y, eps, g); }, x, ao);
            x = a.x;
            adam = a.steps;
        }
        int lm_it = 0;
        if (opt.lm_iter > 0) {
            numerics::LmOptions lo;
            lo.max_iter = opt.lm_iter;
            lo.rel_tol = opt.lm_rel_tol;
            const auto lm = numerics::levenberg_marquardt(
                [&](const Vector& y, Vector& r, Matrix& j) { rows(y, eps, r, j); }, x, lo);
            x = lm.x;
            lm_it = lm.iterations;
        }
        NetworkInnerSolution s = summarize(x, eps);
        if (!std::isfinite(s.loss)) throw DivergenceError("penalized network: non-finite loss", adam);
        s.adam_steps = adam;
        s.iterations = lm_it;
        s.residual_norm = std::sqrt(2.0 * s.loss);
        return s;
    }

private:
    problems::NetworkResidual& res_;
    problems::MeasurementSet data_;
    double lambda_d_;
    Matrix gamma_;  // Gamma_i at the quadrature points
    Vector sw_;     // sqrt of the quadrature weights
    Vector v_;
};

}  // namespace recon::inner_loop
