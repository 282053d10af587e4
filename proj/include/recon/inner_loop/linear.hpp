#pragma once

#include <string>
#include <vector>

#include "recon/constraint_force/forces.hpp"
#include "recon/discretization/sine_basis.hpp"
#include "recon/problems/bar1d.hpp"
#include "recon/problems/measurements.hpp"

namespace recon::inner_loop {

enum class LossForm { strong, weak, energy };

inline std::string to_string(LossForm f) {
    switch (f) {
        case LossForm::strong: return "strong";
        case LossForm::weak: return "weak";
        case LossForm::energy: return "energy";
    }
    return "?";
}

inline LossForm loss_form_from_string(const std::string& s) {
    if (s == "strong") return LossForm::strong;
    if (s == "weak") return LossForm::weak;
    if (s == "energy") return LossForm::energy;
    throw InvalidArgument("unknown loss form '" + s + "'");
}

struct InnerSolution {
    Vector theta;
    Vector lambda;       // net constraint-force magnitudes
    Vector slack;        // [s^L; s^U], empty for equality problems
    Vector mu_lower;     // inequality path only
    Vector mu_upper;
    std::vector<int> active;  // +1 lower bound active, -1 upper, 0 inactive
    int iterations = 0;
    double residual_norm = 0.0;
};

// Linear 1D blocks. Every form is written as
//   K theta + sign (F eps + Gamma lambda) = 0,   G theta = v
// strong: K = int (L f_j)(L f_k), F = int b_p L f_k, Gamma = int Gamma_i L f_k, sign +1
// weak:   K = int E f_j' f_k',    F = int b_p f_k,   Gamma = int Gamma_i f_k,   sign -1
// energy: weak K and F, Gamma = G^T (point forces at the measurements), sign -1
// with L f = E f'' + E' f'.
struct AssembledBlocks {
    LossForm form = LossForm::weak;
    Matrix K;      // N x N
    Matrix F;      // N x P
    Matrix Gamma;  // N x C
    Matrix G;      // C x N, G_ij = f_j(x_i)
    Vector v;      // C
    double sign = -1.0;

    int modes() const { return static_cast<int>(K.rows()); }
    int constraints() const { return static_cast<int>(G.rows()); }
    int sources() const { return static_cast<int>(F.cols()); }

    // [K, sign Gamma; G, 0]
    Matrix block() const {
        const int n = modes(), c = constraints();
        Matrix a = Matrix::Zero(n + c, n + c);
        a.topLeftCorner(n, n) = K;
        if (c > 0) {
            a.topRightCorner(n, c) = sign * Gamma;
            a.bottomLeftCorner(c, n) = G;
        }
        return a;
    }

    Vector rhs(const Vector& eps) const {
        if (eps.size() != sources()) throw InvalidArgument("blocks: eps dimension mismatch");
        Vector r(modes() + constraints());
        r.head(modes()) = -sign * (F * eps);
        r.tail(constraints()) = v;
        return r;
    }

    // Partial of the right-hand side with respect to eps (columns).
    Matrix rhs_eps() const {
        Matrix r = Matrix::Zero(modes() + constraints(), sources());
        r.topRows(modes()) = -sign * F;
        return r;
    }

    // Residual of both block equations at (theta, lambda).
    Vector residual(const Vector& theta, const Vector& lambda, const Vector& eps) const {
        Vector r(modes() + constraints());
        r.head(modes()) = K * theta + sign * (F * eps);
        if (constraints() > 0) {
            r.head(modes()) += sign * (Gamma * lambda);
            r.tail(constraints()) = G * theta - v;
        }
        return r;
    }
};

// Panels grow with the mode count so products of the highest modes stay
// resolved (ten panels up to N = 50).
inline numerics::Rule1d linear_rule(const constraint_force::ConstraintForceSet* forces,
                                    const problems::MeasurementSet& data, int modes = 0) {
    std::vector<double> br = data.x1();
    if (forces) {
        const auto b = forces->breakpoints();
        br.insert(br.end(), b.begin(), b.end());
    }
    return numerics::default_rule_1d(br, std::max(10, (modes + 4) / 5));
}

// forces may be null for the energy form.
inline AssembledBlocks assemble_linear(const problems::LinearBar& physics,
                                       const problems::SourceFamily& b,
                                       const discretization::SineBasis& basis,
                                       const constraint_force::ConstraintForceSet* forces,
                                       const problems::MeasurementSet& data, LossForm form) {
    problems::validate(data);
    if (data.dim != 1) throw InvalidArgument("assemble_linear: 1D measurements required");
    if (form != LossForm::energy) {
        if (!forces) throw InvalidArgument("assemble_linear: constraint forces required");
        if (forces->count() != data.count())
            throw InvalidArgument("assemble_linear: one constraint force per measurement");
    }
    const numerics::Rule1d rule = linear_rule(forces, data, basis.size());
    const int n = basis.size(), c = data.count(), p = b.size();
    AssembledBlocks blk;
    blk.form = form;
    blk.sign = form == LossForm::strong ? 1.0 : -1.0;
    blk.K = Matrix::Zero(n, n);
    blk.F = Matrix::Zero(n, p);
    blk.Gamma = Matrix::Zero(n, c);
    blk.G.resize(c, n);
    blk.v.resize(c);
    for (int i = 0; i < c; ++i) {
        blk.G.row(i) = basis.values(data.x[i][0]).transpose();
        blk.v(i) = data.v[i];
    }
    Vector bp(p);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const double x = rule.x[q], w = rule.w[q];
        const double e = physics.modulus(x);
        for (int k = 0; k < p; ++k) bp(k) = b.terms[k](x);
        Vector test;
        if (form == LossForm::strong) {
            test = e * basis.d2(x) + physics.modulus_dx(x) * basis.d1(x);
            blk.K.noalias() += w * test * test.transpose();
        } else {
            const Vector d1 = basis.d1(x);
            blk.K.noalias() += (w * e) * d1 * d1.transpose();
            test = basis.values(x);
        }
        blk.F.noalias() += w * test * bp.transpose();
        if (form != LossForm::energy && c > 0)
            blk.Gamma.noalias() += w * test * forces->eval_all(&x).transpose();
    }
    if (form == LossForm::energy) blk.Gamma = blk.G.transpose();
    return blk;
}

// Factored block system; the matrix does not depend on eps, so one
// factorization serves every inner solve and every sensitivity.
class LinearInnerSolver {
public:
    explicit LinearInnerSolver(AssembledBlocks blocks)
        : blk_(std::move(blocks)), lu_(numerics::factor_dense(blk_.block())) {}

    const AssembledBlocks& blocks() const { return blk_; }
    double condition() const { return lu_.condition; }

    InnerSolution solve(const Vector& eps) const {
        const Vector x = lu_.solve(blk_.rhs(eps));
        InnerSolution s;
        s.theta = x.head(blk_.modes());
        s.lambda = x.tail(blk_.constraints());
        s.iterations = 1;
        s.residual_norm = blk_.residual(s.theta, s.lambda, eps).lpNorm<Eigen::Infinity>();
        return s;
    }

    // [d theta/d eps; d lambda/d eps], (N + C) x P.
    Matrix sensitivity() const { return lu_.solve(blk_.rhs_eps()); }

private:
    AssembledBlocks blk_;
    numerics::LuFactor lu_;
};

// Throws RankDeficiencyError when the block matrix is singular.
inline InnerSolution solve_linear_equality(const AssembledBlocks& blocks, const Vector& eps) {
    return LinearInnerSolver(blocks).solve(eps);
}

}  // namespace recon::inner_loop
