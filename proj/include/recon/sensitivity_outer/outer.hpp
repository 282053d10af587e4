#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "recon/inner_loop/network.hpp"
#include "recon/sensitivity_outer/sensitivity.hpp"

namespace recon::sensitivity_outer {

struct EcfmResult {
    std::string method = "ecfm";
    std::string loss_form;
    Vector epsilon;
    double z = 0.0;
    Vector lambda;
    Vector theta;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;  // z per accepted outer iterate
    std::map<std::string, double> diagnostics;
};

// Linear 1D ECFM: lambda(eps) is affine, z(eps) = 1/2 lambda^T H lambda.
class LinearEcfm {
public:
    LinearEcfm(inner_loop::AssembledBlocks blocks, Matrix gram)
        : solver_(std::move(blocks)), h_(std::move(gram)), sens_(sensitivities(solver_)) {
        if (h_.rows() != solver_.blocks().constraints() || h_.cols() != h_.rows())
            throw InvalidArgument("LinearEcfm: Gram matrix dimension mismatch");
    }

    const inner_loop::LinearInnerSolver& solver() const { return solver_; }
    const Matrix& gram() const { return h_; }
    const SensitivityBundle& bundle() const { return sens_; }
    int sources() const { return solver_.blocks().sources(); }

    inner_loop::InnerSolution inner(const Vector& eps) const { return solver_.solve(eps); }
    double z(const Vector& eps) const {
        return constraint_force::total_force(h_, inner(eps).lambda);
    }
    Vector gradient(const Vector& eps) const {
        return total_force_gradient(h_, inner(eps).lambda, sens_);
    }

private:
    inner_loop::LinearInnerSolver solver_;
    Matrix h_;
    SensitivityBundle sens_;
};

// Builds the linear ECFM problem with H taken over the kink-split rule.
inline LinearEcfm make_linear_ecfm(const problems::LinearBar& physics,
                                   const problems::SourceFamily& b,
                                   const discretization::SineBasis& basis,
                                   const constraint_force::ConstraintForceSet& forces,
                                   const problems::MeasurementSet& data,
                                   inner_loop::LossForm form) {
    if (form == inner_loop::LossForm::energy)
        throw InvalidArgument("make_linear_ecfm: use energy_mcf_minimize for the energy form");
    auto blocks = inner_loop::assemble_linear(physics, b, basis, &forces, data, form);
    const Matrix h = constraint_force::gram_matrix(forces, inner_loop::linear_rule(&forces, data));
    return LinearEcfm(std::move(blocks), h);
}

namespace detail {

template <class F, class G>
EcfmResult run_bfgs(F&& f, G&& g, const Vector& eps0, const numerics::BfgsOptions& opt) {
    EcfmResult r;
    if (eps0.size() == 0) {
        r.epsilon = eps0;
        r.z = f(eps0);
        r.converged = true;
        r.trace.push_back(r.z);
        return r;
    }
    const auto b = numerics::bfgs_minimize(f, g, eps0, opt);
    r.epsilon = b.x;
    r.z = b.f;
    r.iterations = b.iterations;
    r.converged = b.converged;
    r.trace = b.trace;
    r.diagnostics["gradient_norm"] = b.grad.template lpNorm<Eigen::Infinity>();
    r.diagnostics["line_search_failed"] = b.line_search_failed ? 1.0 : 0.0;
    return r;
}

}  // namespace detail

// argmin_eps 1/2 lambda^T H lambda with analytic gradients.
inline EcfmResult ecfm_minimize(const LinearEcfm& problem, const Vector& eps0,
                                const numerics::BfgsOptions& opt = {}) {
    if (eps0.size() != problem.sources()) throw InvalidArgument("ecfm_minimize: eps0 size mismatch");
    auto r = detail::run_bfgs([&](const Vector& e) { return problem.z(e); },
                              [&](const Vector& e) { return problem.gradient(e); }, eps0, opt);
    const auto s = problem.inner(r.epsilon);
    r.theta = s.theta;
    r.lambda = s.lambda;
    r.loss_form = inner_loop::to_string(problem.solver().blocks().form);
    r.diagnostics["inner_residual"] = s.residual_norm;
    r.diagnostics["condition"] = problem.solver().condition();
    return r;
}

// Minimum constraint force on the energy form: point multipliers at the
// measurements, outer objective 1/2 |lambda|^2.
inline EcfmResult energy_mcf_minimize(const problems::LinearBar& physics,
                                      const problems::SourceFamily& b,
                                      const discretization::SineBasis& basis,
                                      const problems::MeasurementSet& data, const Vector& eps0,
                                      const numerics::BfgsOptions& opt = {}) {
    auto blocks =
        inner_loop::assemble_linear(physics, b, basis, nullptr, data, inner_loop::LossForm::energy);
    const int c = blocks.constraints();
    LinearEcfm problem(std::move(blocks), Matrix::Identity(c, c));
    auto r = ecfm_minimize(problem, eps0, opt);
    r.method = "energy-mcf";
    return r;
}

// Hyperelastic ECFM on the KKT inner loop. Each inner solve is warm-started
// from the previous converged iterate.
class HyperelasticEcfm {
public:
    HyperelasticEcfm(inner_loop::HyperelasticKkt sys, Matrix gram)
        : sys_(std::move(sys)), h_(std::move(gram)) {
        if (h_.rows() != sys_.constraints()) throw InvalidArgument("HyperelasticEcfm: Gram size");
    }

    const inner_loop::HyperelasticKkt& system() const { return sys_; }
    const Matrix& gram() const { return h_; }
    int flips() const { return flips_; }

    // Inner solve at eps; the raw iterate is returned through z_out.
    inner_loop::InnerSolution inner(const Vector& eps, Vector* z_out = nullptr) const {
        if (cache_eps_ && cache_eps_->size() == eps.size() && *cache_eps_ == eps) {
            if (z_out) *z_out = cache_z_;
            return cache_sol_;
        }
        Vector z;
        inner_loop::InnerSolution s;
        try {
            s = sys_.solve(eps, warm_, &z);
        } catch (const SolverError&) {
            if (!warm_) throw;
            s = sys_.solve(eps, std::nullopt, &z);
        }
        if (!cache_sol_.active.empty() && cache_sol_.active != s.active) ++flips_;
        warm_ = z;
        cache_eps_ = eps;
        cache_z_ = z;
        cache_sol_ = s;
        if (z_out) *z_out = z;
        return s;
    }

    double z(const Vector& eps) const {
        return constraint_force::total_force(h_, inner(eps).lambda);
    }

    Vector gradient(const Vector& eps) const {
        Vector z;
        const auto s = inner(eps, &z);
        return total_force_gradient(h_, s.lambda, sensitivities(sys_, z));
    }

    void reset_warm_start() const {
        warm_.reset();
        cache_eps_.reset();
    }

private:
    inner_loop::HyperelasticKkt sys_;
    Matrix h_;
    mutable std::optional<Vector> warm_;
    mutable std::optional<Vector> cache_eps_;
    mutable Vector cache_z_;
    mutable inner_loop::InnerSolution cache_sol_;
    mutable int flips_ = 0;
};

inline EcfmResult ecfm_minimize(const HyperelasticEcfm& problem, const Vector& eps0,
                                const numerics::BfgsOptions& opt = {}) {
    auto r = detail::run_bfgs([&](const Vector& e) { return problem.z(e); },
                              [&](const Vector& e) { return problem.gradient(e); }, eps0, opt);
    const auto s = problem.inner(r.epsilon);
    r.theta = s.theta;
    r.lambda = s.lambda;
    r.loss_form = "weak";
    r.diagnostics["inner_residual"] = s.residual_norm;
    r.diagnostics["active_set_flips"] = problem.flips();
    return r;
}

// 2D network ECFM with central finite-difference outer gradients over
// warm-started inner re-solves.
class NetworkEcfm {
public:
    NetworkEcfm(inner_loop::PenalizedNetworkInner& inner, Matrix gram, Vector start,
                inner_loop::NetworkInnerOptions opt, double fd_step = 1e-2)
        : inner_(inner), h_(std::move(gram)), start_(std::move(start)), opt_(opt), fd_(fd_step) {
        if (h_.rows() != inner_.constraints()) throw InvalidArgument("NetworkEcfm: Gram size");
        if (!(fd_ > 0)) throw InvalidArgument("NetworkEcfm: fd step must be positive");
    }

    const Matrix& gram() const { return h_; }
    int inner_solves() const { return solves_; }

    // Warm start = stored solution at the nearest previously evaluated eps.
    inner_loop::NetworkInnerSolution solve(double eps) {
        for (const auto& e : cache_)
            if (e.eps == eps) return e.sol;
        const Vector* x0 = &start_;
        double best = INFINITY;
        for (const auto& e : cache_)
            if (std::abs(e.eps - eps) < best) {
                best = std::abs(e.eps - eps);
                x0 = &e.x;
            }
        auto s = inner_.solve(eps, *x0, opt_);
        ++solves_;
        Vector x(inner_.size());
        x << s.theta, s.lambda;
        cache_.push_back({eps, x, s});
        return s;
    }

    double z(double eps) { return constraint_force::total_force(h_, solve(eps).lambda); }
    double gradient(double eps) { return (z(eps + fd_) - z(eps - fd_)) / (2.0 * fd_); }

private:
    struct Entry {
        double eps;
        Vector x;
        inner_loop::NetworkInnerSolution sol;
    };
    inner_loop::PenalizedNetworkInner& inner_;
    Matrix h_;
    Vector start_;
    inner_loop::NetworkInnerOptions opt_;
    double fd_;
    std::vector<Entry> cache_;
    int solves_ = 0;
};

inline EcfmResult ecfm_minimize(NetworkEcfm& problem, double eps0,
                                const numerics::BfgsOptions& opt = {}) {
    auto r = detail::run_bfgs([&](const Vector& e) { return problem.z(e(0)); },
                              [&](const Vector& e) { return Vector::Constant(1, problem.gradient(e(0))); },
                              Vector::Constant(1, eps0), opt);
    const auto s = problem.solve(r.epsilon(0));
    r.theta = s.theta;
    r.lambda = s.lambda;
    r.loss_form = "strong";
    r.diagnostics["physics_loss"] = s.physics_loss;
    r.diagnostics["penalty"] = s.penalty;
    r.diagnostics["loss"] = s.loss;
    r.diagnostics["max_violation"] = s.max_violation;
    r.diagnostics["inner_solves"] = problem.inner_solves();
    return r;
}

}  // namespace recon::sensitivity_outer
