#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "recon/errors.hpp"

namespace recon::numerics {

struct Rule1d {
    std::vector<double> x;
    std::vector<double> w;

    std::size_t size() const { return x.size(); }

    template <class F>
    double integrate(F&& f) const {
        double acc = 0.0;
        for (std::size_t q = 0; q < x.size(); ++q) acc += w[q] * f(x[q]);
        return acc;
    }
};

struct Rule2d {
    std::vector<std::array<double, 2>> x;
    std::vector<double> w;

    std::size_t size() const { return x.size(); }

    template <class F>
    double integrate(F&& f) const {
        double acc = 0.0;
        for (std::size_t q = 0; q < x.size(); ++q) acc += w[q] * f(x[q]);
        return acc;
    }
};

// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
inline void legendre_nodes(int n, std::vector<double>& t, std::vector<double>& wt) {
    if (n < 1) throw InvalidArgument("gauss_legendre: n must be >= 1");
    t.assign(n, 0.0);
    wt.assign(n, 0.0);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        if (n == 1) dp = 1.0;
        t[i] = -z;
        t[n - 1 - i] = z;
        wt[i] = wt[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    if (n == 1) { t[0] = 0.0; wt[0] = 2.0; }
}

inline Rule1d gauss_legendre(int n, double a = 0.0, double b = 1.0) {
    std::vector<double> t, wt;
    legendre_nodes(n, t, wt);
    Rule1d r;
    r.x.resize(n);
    r.w.resize(n);
    const double h = 0.5 * (b - a), m = 0.5 * (a + b);
    for (int i = 0; i < n; ++i) {
        r.x[i] = m + h * t[i];
        r.w[i] = h * wt[i];
    }
    return r;
}

// Composite rule: the n-point rule on every sub-interval between sorted
// breakpoints clipped to [a, b].
inline Rule1d composite_gauss_legendre(std::vector<double> breaks, int n, double a = 0.0,
                                       double b = 1.0) {
    if (n < 1) throw InvalidArgument("composite_gauss_legendre: n must be >= 1");
    breaks.push_back(a);
    breaks.push_back(b);
    for (double& v : breaks) v = std::clamp(v, a, b);
    std::sort(breaks.begin(), breaks.end());
    std::vector<double> t, wt;
    legendre_nodes(n, t, wt);
    Rule1d r;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double lo = breaks[k], hi = breaks[k + 1];
        if (hi - lo <= 1e-14 * (b - a)) continue;
        const double h = 0.5 * (hi - lo), m = 0.5 * (hi + lo);
        for (int i = 0; i < n; ++i) {
            r.x.push_back(m + h * t[i]);
            r.w.push_back(h * wt[i]);
        }
    }
    return r;
}

// Default 1D rule: uniform panels of 20 points (ten unless asked), further
// split at any extra breakpoints (hat kinks).
inline Rule1d default_rule_1d(const std::vector<double>& extra_breaks = {}, int panels = 10) {
    if (panels < 1) throw InvalidArgument("default_rule_1d: panels must be >= 1");
    std::vector<double> br(extra_breaks);
    for (int k = 1; k < panels; ++k) br.push_back(static_cast<double>(k) / panels);
    return composite_gauss_legendre(br, 20);
}

inline Rule2d tensor_gauss_legendre(int n, double x0 = 0.0, double x1 = 1.0, double y0 = 0.0,
                                    double y1 = 1.0) {
    const Rule1d rx = gauss_legendre(n, x0, x1);
    const Rule1d ry = gauss_legendre(n, y0, y1);
    Rule2d r;
    r.x.reserve(static_cast<std::size_t>(n) * n);
    r.w.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            r.x.push_back({rx.x[i], ry.x[j]});
            r.w.push_back(rx.w[i] * ry.w[j]);
        }
    return r;
}

}  // namespace recon::numerics
