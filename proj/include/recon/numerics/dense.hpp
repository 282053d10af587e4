#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "recon/errors.hpp"

namespace recon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace numerics {

inline constexpr double kSingularCondition = 1e14;

struct Equilibration {
    Vector row;  // A_scaled = diag(row) * A * diag(col)
    Vector col;
};

// Row then column max-norm scaling, as in LAPACK's dgeequ.
inline Equilibration equilibrate(const Matrix& a) {
    Equilibration e{Vector::Ones(a.rows()), Vector::Ones(a.cols())};
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double m = a.row(i).cwiseAbs().maxCoeff();
        if (m > 0) e.row(i) = 1.0 / m;
    }
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double m = (e.row.asDiagonal() * a.col(j)).cwiseAbs().maxCoeff();
        if (m > 0) e.col(j) = 1.0 / m;
    }
    return e;
}

struct LuFactor {
    Equilibration eq;
    Eigen::PartialPivLU<Matrix> lu;
    double condition = 0.0;  // estimate for the equilibrated matrix

    Vector solve(const Vector& b) const {
        return eq.col.asDiagonal() * lu.solve(eq.row.asDiagonal() * b);
    }
    Matrix solve(const Matrix& b) const {
        return eq.col.asDiagonal() * lu.solve(eq.row.asDiagonal() * b);
    }
};

// Equilibrated partial-pivot LU. Throws when the condition estimate of the
// scaled matrix exceeds kSingularCondition.
inline LuFactor factor_dense(const Matrix& a) {
    if (a.rows() != a.cols()) throw InvalidArgument("factor_dense: matrix not square");
    if (a.rows() == 0) throw InvalidArgument("factor_dense: empty matrix");
    if (!a.allFinite()) throw InvalidArgument("factor_dense: non-finite entries");
    LuFactor f;
    f.eq = equilibrate(a);
    const Matrix s = f.eq.row.asDiagonal() * a * f.eq.col.asDiagonal();
    f.lu.compute(s);
    const double rc = f.lu.rcond();
    f.condition = rc > 0 ? 1.0 / rc : INFINITY;
    // The estimate misses exact zero pivots; the pivot spread bounds it below.
    const Vector piv = f.lu.matrixLU().diagonal().cwiseAbs();
    const double spread = piv.minCoeff() > 0 ? piv.maxCoeff() / piv.minCoeff() : INFINITY;
    if (!(spread <= f.condition)) f.condition = spread;
    if (!(f.condition < kSingularCondition)) {
        std::ostringstream os;
        os << "singular or near-singular system (condition estimate " << f.condition << ")";
        throw RankDeficiencyError(os.str(), f.condition);
    }
    return f;
}

inline Vector solve_dense(const Matrix& a, const Vector& b) {
    if (b.size() != a.rows()) throw InvalidArgument("solve_dense: dimension mismatch");
    return factor_dense(a).solve(b);
}

// Numerical nullity of a square or rectangular matrix: singular values of the
// equilibrated matrix below rel_tol * sigma_max.
inline int nullity(const Matrix& a, double rel_tol = 1e-10) {
    const Equilibration e = equilibrate(a);
    const Matrix s = e.row.asDiagonal() * a * e.col.asDiagonal();
    Eigen::JacobiSVD<Matrix> svd(s);
    const Vector sv = svd.singularValues();
    const double cut = rel_tol * (sv.size() ? sv(0) : 0.0);
    int count = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) <= cut) ++count;
    return count + static_cast<int>(std::max<Eigen::Index>(0, a.cols() - a.rows()));
}

}  // namespace numerics
}  // namespace recon
