#pragma once

#include <cmath>
#include <optional>

#include "recon/inner_loop/network.hpp"

namespace recon::baselines {

struct PenaltyConfig {
    double lambda_d = 1.0;
    double lambda_b = 0.0;  // unused: boundaries are built into every basis
    inner_loop::LossForm form = inner_loop::LossForm::strong;
};

inline void validate(const PenaltyConfig& cfg) {
    if (!(cfg.lambda_d >= 0)) throw InvalidArgument("penalty: lambda_d must be non-negative");
    if (cfg.form != inner_loop::LossForm::strong)
        throw InvalidArgument("penalty: only the strong form loss is supported");
}

struct PenaltyResult {
    Vector theta;
    Vector epsilon;
    double loss = 0.0;
    double max_violation = 0.0;
    int iterations = 0;
};

// Strong-form Hessian blocks of 1/2 int (L w + b)^2 for the 1D sine basis:
// K = int (L f_j)(L f_k), F = int b_p L f_k, B = int b_p b_q.
struct StrongFormBlocks {
    Matrix K, F, B;
    Matrix G;
    Vector v;
};

inline StrongFormBlocks assemble_strong(const problems::LinearBar& physics,
                                        const problems::SourceFamily& b,
                                        const discretization::SineBasis& basis,
                                        const problems::MeasurementSet& data) {
    problems::validate(data);
    const auto rule = inner_loop::linear_rule(nullptr, data);
    const int n = basis.size(), p = b.size(), c = data.count();
    StrongFormBlocks s;
    s.K = Matrix::Zero(n, n);
    s.F = Matrix::Zero(n, p);
    s.B = Matrix::Zero(p, p);
    Vector bp(p);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const double x = rule.x[q], w = rule.w[q];
        const Vector lf = physics.modulus(x) * basis.d2(x) + physics.modulus_dx(x) * basis.d1(x);
        for (int k = 0; k < p; ++k) bp(k) = b.terms[k](x);
        s.K.noalias() += w * lf * lf.transpose();
        s.F.noalias() += w * lf * bp.transpose();
        s.B.noalias() += w * bp * bp.transpose();
    }
    s.G.resize(c, n);
    s.v.resize(c);
    for (int i = 0; i < c; ++i) {
        s.G.row(i) = basis.values(data.x[i][0]).transpose();
        s.v(i) = data.v[i];
    }
    return s;
}

// theta-block of the penalty Hessian, accumulated one constraint at a time:
// K + lambda_d sum_i g_i g_i^T.
inline Matrix penalty_system_matrix(const StrongFormBlocks& s, double lambda_d) {
    Matrix a = s.K;
    for (Eigen::Index i = 0; i < s.G.rows(); ++i) {
        const Vector g = s.G.row(i).transpose();
        a.noalias() += lambda_d * g * g.transpose();
    }
    return a;
}

// 1D strong-form penalty method, solved through its linear stationarity
// conditions in (theta, eps). With fixed_eps the eps rows are dropped.
inline PenaltyResult pinn_penalty_solve(const problems::LinearBar& physics,
                                        const problems::SourceFamily& b,
                                        const discretization::SineBasis& basis,
                                        const problems::MeasurementSet& data,
                                        const PenaltyConfig& cfg,
                                        const std::optional<Vector>& fixed_eps = std::nullopt) {
    validate(cfg);
    const auto s = assemble_strong(physics, b, basis, data);
    const int n = basis.size(), p = b.size();
    const Matrix a = penalty_system_matrix(s, cfg.lambda_d);
    const Vector gv = cfg.lambda_d * (s.G.transpose() * s.v);
    PenaltyResult r;
    if (fixed_eps) {
        if (fixed_eps->size() != p) throw InvalidArgument("penalty: eps dimension mismatch");
        r.epsilon = *fixed_eps;
        r.theta = numerics::solve_dense(a, gv - s.F * r.epsilon);
    } else {
        Matrix m(n + p, n + p);
        m << a, s.F, s.F.transpose(), s.B;
        Vector rhs = Vector::Zero(n + p);
        rhs.head(n) = gv;
        const Vector x = numerics::solve_dense(m, rhs);
        r.theta = x.head(n);
        r.epsilon = x.tail(p);
    }
    const Vector h = s.G * r.theta - s.v;
    r.loss = 0.5 * r.theta.dot(s.K * r.theta) + r.theta.dot(s.F * r.epsilon) +
             0.5 * r.epsilon.dot(s.B * r.epsilon) + 0.5 * cfg.lambda_d * h.squaredNorm();
    r.max_violation = h.size() ? h.lpNorm<Eigen::Infinity>() : 0.0;
    r.iterations = 1;
    return r;
}

// Hyperelastic penalty method with a hinge on the noise band:
//   1/2 int (w'' P'(w') + b(eps))^2 + lambda_d/2 sum max(0, |w(x_i) - v_i| - a sigma)^2
// minimized by Levenberg-Marquardt over (theta, eps).
inline PenaltyResult pinn_penalty_hyperelastic(const problems::NeoHookean& mat,
                                               const problems::SourceFamily& b,
                                               const discretization::SineBasis& basis,
                                               const problems::MeasurementSet& data,
                                               double lambda_d, int max_iter = 500) {
    problems::validate(data);
    if (!(lambda_d > 0)) throw InvalidArgument("hyperelastic penalty: lambda_d must be positive");
    std::vector<double> br = data.x1();
    br.push_back(0.5);
    const auto rule = numerics::default_rule_1d(br);
    const int n = basis.size(), p = b.size(), c = data.count();
    const Matrix f1 = basis.d1_at(rule.x), f2 = basis.d2_at(rule.x);
    const auto nq = static_cast<Eigen::Index>(rule.size());
    Vector sw(nq);
    Matrix bq(nq, p);
    for (Eigen::Index q = 0; q < nq; ++q) {
        sw(q) = std::sqrt(rule.w[q]);
        for (int k = 0; k < p; ++k) bq(q, k) = b.terms[k](rule.x[q]);
    }
    Matrix g(c, n);
    Vector v(c);
    for (int i = 0; i < c; ++i) {
        g.row(i) = basis.values(data.x[i][0]).transpose();
        v(i) = data.v[i];
    }
    const double sl = std::sqrt(lambda_d), band = data.bound();
    auto rj = [&](const Vector& x, Vector& r, Matrix& j) {
        const Vector th = x.head(n), eps = x.tail(p);
        const Vector e = f1 * th, wpp = f2 * th;
        r.resize(nq + c);
        j.setZero(nq + c, n + p);
        for (Eigen::Index q = 0; q < nq; ++q) {
            problems::check_stretch(rule.x[q], e(q));
            const double t = mat.tangent(e(q));
            r(q) = sw(q) * (wpp(q) * t + bq.row(q).dot(eps));
            j.block(q, 0, 1, n) = sw(q) * (t * f2.row(q) + wpp(q) * mat.tangent_dx(e(q)) * f1.row(q));
            j.block(q, n, 1, p) = sw(q) * bq.row(q);
        }
        const Vector d = g * th - v;
        for (int i = 0; i < c; ++i) {
            const double over = std::abs(d(i)) - band;
            if (over > 0) {
                const double sg = d(i) >= 0 ? 1.0 : -1.0;
                r(nq + i) = sl * over * sg;
                j.block(nq + i, 0, 1, n) = sl * g.row(i);
            } else {
                r(nq + i) = 0.0;
            }
        }
    };
    numerics::LmOptions lo;
    lo.max_iter = max_iter;
    lo.admissible = [&](const Vector& x) {
        return ((f1 * x.head(n)).array() + 1.0).minCoeff() > problems::kMinStretch;
    };
    const auto lm = numerics::levenberg_marquardt(rj, Vector::Zero(n + p), lo);
    PenaltyResult r;
    r.theta = lm.x.head(n);
    r.epsilon = lm.x.tail(p);
    r.loss = lm.loss;
    r.max_violation = c ? (g * r.theta - v).lpNorm<Eigen::Infinity>() : 0.0;
    r.iterations = lm.iterations;
    return r;
}

struct NetworkPenaltyOptions {
    long adam_steps = 3000;
    double lr = 1e-3;
    long stagnation_window = 500;
    double stagnation_rel = 1e-8;
    int lm_iter = 400;
    double lm_rel_tol = 1e-10;
};

// 2D penalty method over x = [theta; eps] (eps omitted when the model has no
// parameterized conductivity):
//   1/2 int R(w; eps)^2 + lambda_d/2 sum (w(x_i) - v_i)^2.
class NetworkPenalty {
public:
    NetworkPenalty(problems::NetworkResidual& res, problems::MeasurementSet data, double lambda_d)
        : res_(res), data_(std::move(data)), lambda_d_(lambda_d) {
        problems::validate(data_);
        if (!(lambda_d_ >= 0)) throw InvalidArgument("network penalty: lambda_d must be non-negative");
        if (data_.dim != 2) throw InvalidArgument("network penalty: 2D measurements required");
        sw_.resize(res_.points());
        for (Eigen::Index q = 0; q < res_.points(); ++q) sw_(q) = std::sqrt(res_.rule().w[q]);
        has_eps_ = res_.system().parameterized_conductivity;
    }

    bool has_eps() const { return has_eps_; }
    Eigen::Index size() const { return res_.params() + (has_eps_ ? 1 : 0); }

    Vector initial_guess(std::uint64_t seed, double eps0 = 0.0) const {
        Vector x = Vector::Zero(size());
        x.head(res_.params()) = discretization::init_network(res_.network(), seed);
        if (has_eps_) x(res_.params()) = eps0;
        return x;
    }

    Vector initial_guess(const Vector& theta, double eps0) const {
        if (theta.size() != res_.params()) throw InvalidArgument("network penalty: theta dimension mismatch");
        Vector x = Vector::Zero(size());
        x.head(res_.params()) = theta;
        if (has_eps_) x(res_.params()) = eps0;
        return x;
    }

    void rows(const Vector& x, Vector& r, Matrix& jac) {
        const Eigen::Index np = res_.params(), nq = res_.points();
        const int c = data_.count();
        const Vector theta = x.head(np);
        const double eps = has_eps_ ? x(np) : 0.0;
        Vector rq, de;
        Matrix jq;
        res_.evaluate(theta, eps, rq, &jq, &de);
        r.resize(nq + c);
        jac.setZero(nq + c, size());
        r.head(nq) = sw_.cwiseProduct(rq);
        jac.topLeftCorner(nq, np) = sw_.asDiagonal() * jq;
        if (has_eps_) jac.block(0, np, nq, 1) = sw_.cwiseProduct(de);
        const double sl = std::sqrt(lambda_d_);
        for (int i = 0; i < c; ++i) {
            const Vector g = res_.grad_theta_value(theta, data_.x[i].data());
            r(nq + i) = sl * (res_.value(theta, data_.x[i].data()) - data_.v[i]);
            jac.block(nq + i, 0, 1, np) = sl * g.transpose();
        }
    }

    PenaltyResult solve(const Vector& x0, const NetworkPenaltyOptions& opt = {}) {
        if (x0.size() != size()) throw InvalidArgument("network penalty: start dimension mismatch");
        Vector x = x0;
        Vector r;
        Matrix j;
        if (opt.adam_steps > 0) {
            numerics::AdamOptions ao;
            ao.lr = opt.lr;
            ao.steps = opt.adam_steps;
            ao.stagnation_window = opt.stagnation_window;
            ao.stagnation_rel = opt.stagnation_rel;
            x = numerics::adam_minimize(
                    [&](const Vector& y, Vector& g) {
                        rows(y, r, j);
                        g = j.transpose() * r;
                        return 0.5 * r.squaredNorm();
                    },
                    x, ao)
                    .x;
        }
        numerics::LmOptions lo;
        lo.max_iter = opt.lm_iter;
        lo.rel_tol = opt.lm_rel_tol;
        const auto lm = numerics::levenberg_marquardt(
            [&](const Vector& y, Vector& rr, Matrix& jj) { rows(y, rr, jj); }, x, lo);
        PenaltyResult out;
        const Eigen::Index np = res_.params();
        out.theta = lm.x.head(np);
        out.epsilon = has_eps_ ? Vector::Constant(1, lm.x(np)) : Vector();
        out.loss = lm.loss;
        out.iterations = lm.iterations;
        double worst = 0.0;
        for (int i = 0; i < data_.count(); ++i)
            worst = std::max(worst, std::abs(res_.value(out.theta, data_.x[i].data()) - data_.v[i]));
        out.max_violation = worst;
        if (!std::isfinite(out.loss)) throw DivergenceError("network penalty: non-finite loss", 0);
        return out;
    }

private:
    problems::NetworkResidual& res_;
    problems::MeasurementSet data_;
    double lambda_d_;
    Vector sw_;
    bool has_eps_ = false;
};

}  // namespace recon::baselines
