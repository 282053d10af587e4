#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "recon/numerics/dense.hpp"

namespace recon::discretization {

using RowMatrixMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMatrixMapMut =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Value, spatial gradient and spatial Hessian at one point.
struct Jet {
    double v = 0.0;
    Vector g;
    Matrix h;
};

// Fully connected network, tanh on hidden layers, identity output.
// theta = [W_1 (row-major), B_1, W_2, B_2, ...].
class TanhNetwork {
public:
    explicit TanhNetwork(std::vector<int> widths) : widths_(std::move(widths)) {
        if (widths_.size() < 2) throw InvalidArgument("TanhNetwork: need input and output widths");
        for (int w : widths_)
            if (w < 1) throw InvalidArgument("TanhNetwork: widths must be positive");
        if (widths_.back() != 1) throw InvalidArgument("TanhNetwork: scalar output required");
        offset_ = 0;
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
            w_off_.push_back(offset_);
            offset_ += widths_[l] * widths_[l + 1];
            b_off_.push_back(offset_);
            offset_ += widths_[l + 1];
        }
    }

    const std::vector<int>& widths() const { return widths_; }
    int input_dim() const { return widths_.front(); }
    int n_layers() const { return static_cast<int>(widths_.size()) - 1; }
    Eigen::Index param_count() const { return offset_; }
    Eigen::Index weight_offset(int l) const { return w_off_[l]; }
    Eigen::Index bias_offset(int l) const { return b_off_[l]; }

private:
    std::vector<int> widths_;
    std::vector<Eigen::Index> w_off_, b_off_;
    Eigen::Index offset_ = 0;
};

// Glorot-uniform weights, zero biases, deterministic per seed.
inline Vector init_network(const TanhNetwork& net, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    Vector theta = Vector::Zero(net.param_count());
    const auto& w = net.widths();
    for (int l = 0; l < net.n_layers(); ++l) {
        const double lim = std::sqrt(6.0 / (w[l] + w[l + 1]));
        const Eigen::Index n = static_cast<Eigen::Index>(w[l]) * w[l + 1];
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = (gen() >> 11) * 0x1.0p-53;  // uniform [0,1)
            theta(net.weight_offset(l) + i) = lim * (2.0 * u - 1.0);
        }
    }
    return theta;
}

// Forward jets and reverse-mode parameter gradients for one point at a time.
// Holds scratch storage; not shareable between threads.
class NetworkEvaluator {
public:
    explicit NetworkEvaluator(const TanhNetwork& net) : net_(net) {
        const int d = net.input_dim();
        layers_.resize(net.n_layers());
        for (int l = 0; l < net.n_layers(); ++l) {
            const int m = net.widths()[l + 1];
            auto& s = layers_[l];
            s.z.resize(m);
            s.a.resize(m);
            s.t.resize(m);
            s.zk.resize(m, d);
            s.zkl.resize(m, d * d);
            s.ak.resize(m, d);
            s.akl.resize(m, d * d);
            s.zb.resize(m);
            s.ab.resize(m);
            s.at.resize(m);
            s.curv.resize(m);
            s.zkb.resize(m, d);
            s.zklb.resize(m, d * d);
            s.akb.resize(m, d);
            s.aklb.resize(m, d * d);
        }
        x_.resize(d);
    }

    const TanhNetwork& network() const { return net_; }

    // Evaluates the network and its first and second spatial derivatives at x.
    void forward(const Vector& theta, const double* x) {
        const int d = net_.input_dim();
        for (int k = 0; k < d; ++k) x_(k) = x[k];
        const int nl = net_.n_layers();
        for (int l = 0; l < nl; ++l) {
            const int in = net_.widths()[l], out = net_.widths()[l + 1];
            RowMatrixMap w(theta.data() + net_.weight_offset(l), out, in);
            Eigen::Map<const Vector> b(theta.data() + net_.bias_offset(l), out);
            auto& s = layers_[l];
            if (l == 0) {
                s.z.noalias() = w * x_ + b;
                s.zk = w;
                s.zkl.setZero();
            } else {
                const auto& p = layers_[l - 1];
                s.z.noalias() = w * p.a + b;
                s.zk.noalias() = w * p.ak;
                s.zkl.noalias() = w * p.akl;
            }
            if (l + 1 == nl) {
                s.a = s.z;
                s.ak = s.zk;
                s.akl = s.zkl;
                continue;
            }
            s.a = s.z.array().tanh();
            s.t = 1.0 - s.a.array().square();
            for (int k = 0; k < d; ++k) s.ak.col(k) = s.t.cwiseProduct(s.zk.col(k));
            s.at = -2.0 * s.a.cwiseProduct(s.t);
            for (int k = 0; k < d; ++k)
                for (int q = 0; q < d; ++q)
                    s.akl.col(k * d + q) =
                        s.t.cwiseProduct(s.zkl.col(k * d + q)) +
                        s.at.cwiseProduct(s.zk.col(k)).cwiseProduct(s.zk.col(q));
        }
    }

    double value() const { return layers_.back().a(0); }
    double grad(int k) const { return layers_.back().ak(0, k); }
    double hess(int k, int q) const { return layers_.back().akl(0, k * net_.input_dim() + q); }

    Jet jet() const {
        const int d = net_.input_dim();
        Jet j;
        j.v = value();
        j.g.resize(d);
        j.h.resize(d, d);
        for (int k = 0; k < d; ++k) {
            j.g(k) = grad(k);
            for (int q = 0; q < d; ++q) j.h(k, q) = hess(k, q);
        }
        return j;
    }

    void jet_into(Jet& j) const {
        const int d = net_.input_dim();
        const auto& s = layers_.back();
        j.v = s.a(0);
        j.g.resize(d);
        j.h.resize(d, d);
        for (int k = 0; k < d; ++k) {
            j.g(k) = s.ak(0, k);
            for (int q = 0; q < d; ++q) j.h(k, q) = s.akl(0, k * d + q);
        }
    }

    // out += scale * d/dtheta [c0 v + sum_k ck_k g_k + sum_kq ckl(k,q) h_kq]
    // using the state of the last forward() call.
    void backward(const Vector& theta, double c0, const Vector& ck, const Matrix& ckl,
                  double scale, double* out) {
        const int d = net_.input_dim();
        const int nl = net_.n_layers();
        {
            auto& top = layers_.back();
            top.zb(0) = scale * c0;
            for (int k = 0; k < d; ++k) {
                top.zkb(0, k) = scale * ck(k);
                for (int q = 0; q < d; ++q) top.zklb(0, k * d + q) = scale * ckl(k, q);
            }
        }
        for (int l = nl - 1; l >= 0; --l) {
            const int in = net_.widths()[l], out_w = net_.widths()[l + 1];
            RowMatrixMap w(theta.data() + net_.weight_offset(l), out_w, in);
            RowMatrixMapMut dw(out + net_.weight_offset(l), out_w, in);
            Eigen::Map<Vector> db(out + net_.bias_offset(l), out_w);
            auto& s = layers_[l];
            db += s.zb;
            if (l == 0) {
                dw.noalias() += s.zb * x_.transpose();
                dw += s.zkb;
                break;
            }
            auto& p = layers_[l - 1];
            dw.noalias() += s.zb * p.a.transpose();
            dw.noalias() += s.zkb * p.ak.transpose();
            dw.noalias() += s.zklb * p.akl.transpose();
            p.ab.noalias() = w.transpose() * s.zb;
            p.akb.noalias() = w.transpose() * s.zkb;
            p.aklb.noalias() = w.transpose() * s.zklb;
            // Adjoint of the tanh layer l-1.
            p.at = p.a.cwiseProduct(p.t);
            p.curv = 2.0 * p.t.cwiseProduct((p.t.array() - 2.0 * p.a.array().square()).matrix());
            p.zb = p.ab.cwiseProduct(p.t);
            for (int k = 0; k < d; ++k) {
                p.zb -= 2.0 * p.akb.col(k).cwiseProduct(p.at).cwiseProduct(p.zk.col(k));
                p.zkb.col(k) = p.akb.col(k).cwiseProduct(p.t);
            }
            for (int k = 0; k < d; ++k)
                for (int q = 0; q < d; ++q) {
                    const auto abar = p.aklb.col(k * d + q);
                    p.zb -= abar.cwiseProduct(2.0 * p.at.cwiseProduct(p.zkl.col(k * d + q)) +
                                              p.curv.cwiseProduct(p.zk.col(k)).cwiseProduct(p.zk.col(q)));
                    p.zkb.col(k) -= 2.0 * abar.cwiseProduct(p.at).cwiseProduct(p.zk.col(q));
                    p.zkb.col(q) -= 2.0 * abar.cwiseProduct(p.at).cwiseProduct(p.zk.col(k));
                    p.zklb.col(k * d + q) = abar.cwiseProduct(p.t);
                }
        }
    }

private:
    struct LayerState {
        Vector z, a, t;
        Matrix zk, zkl, ak, akl;
        // reverse-mode scratch
        Vector zb, ab, at, curv;
        Matrix zkb, zklb, akb, aklb;
    };
    const TanhNetwork& net_;
    std::vector<LayerState> layers_;
    Vector x_;
};

inline Jet network_jet(const TanhNetwork& net, const Vector& theta, const Vector& x) {
    if (x.size() != net.input_dim()) throw InvalidArgument("network_jet: dimension mismatch");
    NetworkEvaluator ev(net);
    ev.forward(theta, x.data());
    return ev.jet();
}

}  // namespace recon::discretization
