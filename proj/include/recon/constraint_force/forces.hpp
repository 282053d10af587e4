#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <type_traits>
#include <vector>

#include "recon/numerics/dense.hpp"
#include "recon/numerics/quadrature.hpp"

namespace recon::constraint_force {

enum class Family { hat, clipped_hat, gaussian };

inline std::string to_string(Family f) {
    switch (f) {
        case Family::hat: return "hat";
        case Family::clipped_hat: return "clipped-hat";
        case Family::gaussian: return "gaussian-rbf";
    }
    return "?";
}

inline Family family_from_string(const std::string& s) {
    if (s == "hat") return Family::hat;
    if (s == "clipped-hat") return Family::clipped_hat;
    if (s == "gaussian-rbf") return Family::gaussian;
    throw InvalidArgument("unknown constraint-force family '" + s + "'");
}

// One explicit force shape Gamma_i per measurement position.
//   hat          unit apex, support x_i +- h (h = measurement spacing)
//   clipped-hat  max(0, p (1 - p |x - x_i|))
//   gaussian-rbf exp(-p |x - x_i|^2 / 2)
class ConstraintForceSet {
public:
    ConstraintForceSet(Family family, int dim, std::vector<std::array<double, 2>> centers,
                       std::vector<double> width)
        : family_(family), dim_(dim), centers_(std::move(centers)), width_(std::move(width)),
          scale_(centers_.size(), 1.0) {
        if (dim_ != 1 && dim_ != 2) throw InvalidArgument("ConstraintForceSet: dim must be 1 or 2");
        if (width_.size() != centers_.size())
            throw InvalidArgument("ConstraintForceSet: one width per center required");
        for (double w : width_)
            if (!(w > 0)) throw InvalidArgument("ConstraintForceSet: widths must be positive");
        if (family_ != Family::gaussian && dim_ != 1)
            throw InvalidArgument("ConstraintForceSet: hat families are one-dimensional");
    }

    // Hats on a 1D grid with spacing h.
    static ConstraintForceSet hats(const std::vector<std::array<double, 2>>& centers, double h) {
        return ConstraintForceSet(Family::hat, 1, centers, std::vector<double>(centers.size(), h));
    }
    static ConstraintForceSet clipped_hats(const std::vector<std::array<double, 2>>& centers,
                                           std::vector<double> p) {
        return ConstraintForceSet(Family::clipped_hat, 1, centers, std::move(p));
    }
    static ConstraintForceSet gaussians(const std::vector<std::array<double, 2>>& centers,
                                        int dim, double p) {
        return ConstraintForceSet(Family::gaussian, dim, centers,
                                  std::vector<double>(centers.size(), p));
    }

    Family family() const { return family_; }
    int dim() const { return dim_; }
    int count() const { return static_cast<int>(centers_.size()); }
    const std::vector<std::array<double, 2>>& centers() const { return centers_; }
    const std::vector<double>& widths() const { return width_; }
    bool is_normalized() const { return normalized_; }
    double scale(int i) const { return scale_[i]; }

    // Unscaled shape.
    double raw(int i, const double* x) const {
        const auto& c = centers_[i];
        const double p = width_[i];
        switch (family_) {
            case Family::hat: {
                const double r = std::abs(x[0] - c[0]);
                return r < p ? 1.0 - r / p : 0.0;
            }
            case Family::clipped_hat:
                return std::max(0.0, p * (1.0 - p * std::abs(x[0] - c[0])));
            case Family::gaussian: {
                double r2 = 0.0;
                for (int k = 0; k < dim_; ++k) r2 += (x[k] - c[k]) * (x[k] - c[k]);
                return std::exp(-0.5 * p * r2);
            }
        }
        return 0.0;
    }

    double eval(int i, const double* x) const {
        if (i < 0 || i >= count()) throw InvalidArgument("gamma_eval: index out of range");
        return scale_[i] * raw(i, x);
    }
    double eval(int i, double x) const { return eval(i, &x); }

    // Gamma_i(x) for every i.
    Vector eval_all(const double* x) const {
        Vector g(count());
        for (int i = 0; i < count(); ++i) g(i) = scale_[i] * raw(i, x);
        return g;
    }

    // F(x) = sum_i lambda_i Gamma_i(x).
    double field(const Vector& lambda, const double* x) const {
        if (lambda.size() != count()) throw InvalidArgument("force field: dimension mismatch");
        return lambda.dot(eval_all(x));
    }

    // Kink locations of the 1D piecewise-linear families.
    std::vector<double> breakpoints() const {
        std::vector<double> b;
        if (family_ == Family::gaussian) return b;
        for (int i = 0; i < count(); ++i) {
            const double half = family_ == Family::hat ? width_[i] : 1.0 / width_[i];
            b.insert(b.end(), {centers_[i][0] - half, centers_[i][0], centers_[i][0] + half});
        }
        return b;
    }

    // Copy with every Gamma_i rescaled to unit L2 norm under the given rule.
    template <class Rule>
    ConstraintForceSet normalized(const Rule& rule) const {
        ConstraintForceSet out(*this);
        for (int i = 0; i < count(); ++i) {
            double acc = 0.0;
            for (std::size_t q = 0; q < rule.size(); ++q) {
                const double g = raw(i, point(rule, q));
                acc += rule.w[q] * g * g;
            }
            if (!(acc > 0)) throw InvalidArgument("normalize: Gamma has zero norm on the rule");
            out.scale_[i] = 1.0 / std::sqrt(acc);
        }
        out.normalized_ = true;
        return out;
    }

private:
    Family family_;
    int dim_;
    std::vector<std::array<double, 2>> centers_;
    std::vector<double> width_;
    std::vector<double> scale_;
    bool normalized_ = false;

    static const double* point(const numerics::Rule1d& r, std::size_t q) { return &r.x[q]; }
    static const double* point(const numerics::Rule2d& r, std::size_t q) { return r.x[q].data(); }
};

// Quadrature rule for 1D integrals involving these forces: default panels
// split at every kink.
inline numerics::Rule1d rule_for(const ConstraintForceSet& set,
                                 const std::vector<double>& extra = {}) {
    std::vector<double> br = set.breakpoints();
    br.insert(br.end(), extra.begin(), extra.end());
    return numerics::default_rule_1d(br);
}

// H_ij = int Gamma_i Gamma_j.
template <class Rule>
Matrix gram_matrix(const ConstraintForceSet& set, const Rule& rule) {
    const int c = set.count();
    Matrix h = Matrix::Zero(c, c);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const double* x;
        if constexpr (std::is_same_v<Rule, numerics::Rule1d>)
            x = &rule.x[q];
        else
            x = rule.x[q].data();
        const Vector g = set.eval_all(x);
        for (int i = 0; i < c; ++i)
            for (int j = i; j < c; ++j) h(i, j) += rule.w[q] * g(i) * g(j);
    }
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < i; ++j) h(i, j) = h(j, i);
    return h;
}

// z = 1/2 sum_ij H_ij lambda_i . lambda_j, lambda is C x d.
inline double total_force(const Matrix& h, const Matrix& lambda) {
    if (h.rows() != h.cols() || lambda.rows() != h.rows())
        throw InvalidArgument("total_force: dimension mismatch");
    return 0.5 * (lambda.transpose() * h * lambda).trace();
}

inline double total_force(const Matrix& h, const Vector& lambda) {
    return total_force(h, Matrix(lambda));
}

}  // namespace recon::constraint_force
