#pragma once

#include <functional>

#include "recon/discretization/tanh_network.hpp"

namespace recon::discretization {

// w(x) = G(x) + D(x) N(x; theta) with D = 0 on the boundary and G = g there.
class DirichletEmbedding {
public:
    using JetFn = std::function<Jet(const double*)>;

    DirichletEmbedding(JetFn multiplier, JetFn lift, int dim)
        : d_(std::move(multiplier)), g_(std::move(lift)), dim_(dim) {}

    // D = x1(1-x1) x2(1-x2), G = 0 on the unit square.
    static DirichletEmbedding unit_square() {
        auto d = [](const double* x) {
            const double p = x[0] * (1 - x[0]), q = x[1] * (1 - x[1]);
            const double dp = 1 - 2 * x[0], dq = 1 - 2 * x[1];
            Jet j;
            j.v = p * q;
            j.g = Vector(2);
            j.g << dp * q, p * dq;
            j.h = Matrix(2, 2);
            j.h << -2 * q, dp * dq, dp * dq, -2 * p;
            return j;
        };
        auto g = [](const double*) {
            Jet j;
            j.g = Vector::Zero(2);
            j.h = Matrix::Zero(2, 2);
            return j;
        };
        return DirichletEmbedding(d, g, 2);
    }

    int dim() const { return dim_; }
    Jet multiplier(const double* x) const { return d_(x); }
    Jet lift(const double* x) const { return g_(x); }

private:
    JetFn d_, g_;
    int dim_;
};

inline void check_unit_box(const double* x, int dim) {
    for (int k = 0; k < dim; ++k)
        if (!(x[k] >= -1e-12 && x[k] <= 1.0 + 1e-12))
            throw InvalidArgument("embedded field: point outside the unit domain");
}

// Embedded network field with jets and parameter gradients.
class EmbeddedField {
public:
    EmbeddedField(const TanhNetwork& net, DirichletEmbedding emb)
        : net_(net), emb_(std::move(emb)), ev_(net) {
        if (emb_.dim() != net.input_dim())
            throw InvalidArgument("EmbeddedField: embedding and network dimensions differ");
    }

    const TanhNetwork& network() const { return net_; }
    int dim() const { return net_.input_dim(); }

    // Computes and caches the jet of w at x.
    const Jet& eval(const Vector& theta, const double* x) {
        check_unit_box(x, dim());
        ev_.forward(theta, x);
        ev_.jet_into(n_);
        dj_ = emb_.multiplier(x);
        gj_ = emb_.lift(x);
        w_.v = gj_.v + dj_.v * n_.v;
        w_.g = gj_.g + dj_.g * n_.v + dj_.v * n_.g;
        w_.h = gj_.h + dj_.h * n_.v;
        w_.h.noalias() += dj_.g * n_.g.transpose();
        w_.h.noalias() += n_.g * dj_.g.transpose();
        w_.h += dj_.v * n_.h;
        return w_;
    }

    // out += scale * d/dtheta [C0 w + sum Ck_k w_k + sum Ckl w_kl] at the cached point.
    void backward(const Vector& theta, double c0, const Vector& ck, const Matrix& ckl,
                  double scale, double* out) {
        nk_.resize(dim());
        const double n0 = c0 * dj_.v + ck.dot(dj_.g) + (ckl.array() * dj_.h.array()).sum();
        nk_ = ck * dj_.v;
        nk_.noalias() += ckl * dj_.g;
        nk_.noalias() += ckl.transpose() * dj_.g;
        nkl_ = ckl * dj_.v;
        ev_.backward(theta, n0, nk_, nkl_, scale, out);
    }

    Vector grad_theta_value(const Vector& theta, const double* x) {
        eval(theta, x);
        Vector g = Vector::Zero(net_.param_count());
        backward(theta, 1.0, Vector::Zero(dim()), Matrix::Zero(dim(), dim()), 1.0, g.data());
        return g;
    }

private:
    const TanhNetwork& net_;
    DirichletEmbedding emb_;
    NetworkEvaluator ev_;
    Jet n_, dj_, gj_, w_;
    Vector nk_;
    Matrix nkl_;
};

}  // namespace recon::discretization
