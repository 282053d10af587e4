#pragma once

#include <cmath>
#include <numbers>

#include "recon/numerics/dense.hpp"

namespace recon::discretization {

// w(x) = sum_j theta_j sin(j pi x) on [0, 1].
class SineBasis {
public:
    explicit SineBasis(int n_modes) : n_(n_modes) {
        if (n_modes < 1) throw InvalidArgument("SineBasis: need at least one mode");
    }

    int size() const { return n_; }

    Vector values(double x) const {
        check(x);
        Vector f(n_);
        for (int j = 0; j < n_; ++j) f(j) = std::sin((j + 1) * std::numbers::pi * x);
        return f;
    }
    Vector d1(double x) const {
        check(x);
        Vector f(n_);
        for (int j = 0; j < n_; ++j) {
            const double k = (j + 1) * std::numbers::pi;
            f(j) = k * std::cos(k * x);
        }
        return f;
    }
    Vector d2(double x) const {
        check(x);
        Vector f(n_);
        for (int j = 0; j < n_; ++j) {
            const double k = (j + 1) * std::numbers::pi;
            f(j) = -k * k * std::sin(k * x);
        }
        return f;
    }

    double eval(const Vector& theta, double x) const { return values(x).dot(theta); }
    double eval_dx(const Vector& theta, double x) const { return d1(x).dot(theta); }
    double eval_dxx(const Vector& theta, double x) const { return d2(x).dot(theta); }
    Vector grad_theta(double x) const { return values(x); }

    // Rows = evaluation points, columns = modes.
    Matrix values_at(const std::vector<double>& xs) const { return stack(xs, 0); }
    Matrix d1_at(const std::vector<double>& xs) const { return stack(xs, 1); }
    Matrix d2_at(const std::vector<double>& xs) const { return stack(xs, 2); }

private:
    int n_;

    static void check(double x) {
        if (!(x >= -1e-12 && x <= 1.0 + 1e-12))
            throw InvalidArgument("SineBasis: x outside [0, 1]");
    }
    Matrix stack(const std::vector<double>& xs, int order) const {
        Matrix m(xs.size(), n_);
        for (std::size_t q = 0; q < xs.size(); ++q)
            m.row(q) = (order == 0 ? values(xs[q]) : order == 1 ? d1(xs[q]) : d2(xs[q]))
                           .transpose();
        return m;
    }
};

}  // namespace recon::discretization
