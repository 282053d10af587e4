#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "recon/errors.hpp"

namespace recon::problems {

// Point measurements v_i of a scalar field at positions x_i (dim 1 or 2).
struct MeasurementSet {
    int dim = 1;
    std::vector<std::array<double, 2>> x;
    std::vector<double> v;
    double sigma = 0.0;
    double alpha = 1.0;

    int count() const { return static_cast<int>(v.size()); }
    double bound() const { return alpha * sigma; }
    std::vector<double> x1() const {
        std::vector<double> out;
        for (const auto& p : x) out.push_back(p[0]);
        return out;
    }
};

inline void validate(const MeasurementSet& m) {
    if (m.dim != 1 && m.dim != 2) throw InvalidArgument("measurements: dim must be 1 or 2");
    if (m.x.size() != m.v.size()) throw InvalidArgument("measurements: size mismatch");
    if (!(m.sigma >= 0)) throw InvalidArgument("measurements: sigma must be non-negative");
    if (!(m.alpha > 0)) throw InvalidArgument("measurements: alpha must be positive");
    for (const auto& p : m.x)
        for (int k = 0; k < m.dim; ++k)
            if (!(p[k] > 0.0 && p[k] < 1.0))
                throw InvalidArgument("measurements: positions must be strictly interior");
}

// x_i = i / (C + 1), i = 1..C.
inline std::vector<std::array<double, 2>> uniform_grid_1d(int c) {
    if (c < 1) throw InvalidArgument("uniform_grid_1d: need C >= 1");
    std::vector<std::array<double, 2>> x;
    for (int i = 1; i <= c; ++i) x.push_back({static_cast<double>(i) / (c + 1), 0.0});
    return x;
}

// sqrt(C) x sqrt(C) interior grid at (i/(n+1), j/(n+1)); C must be a square.
inline std::vector<std::array<double, 2>> uniform_grid_2d(int c) {
    const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(c))));
    if (c < 1 || n * n != c) throw InvalidArgument("uniform_grid_2d: C must be a perfect square");
    std::vector<std::array<double, 2>> x;
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j)
            x.push_back({static_cast<double>(i) / (n + 1), static_cast<double>(j) / (n + 1)});
    return x;
}

// v_i = u(x_i) + xi_i with xi_i ~ U(-sigma, sigma), deterministic per seed.
inline MeasurementSet sample_measurements(const std::function<double(const double*)>& u,
                                          std::vector<std::array<double, 2>> positions, int dim,
                                          double sigma, double alpha, std::uint64_t seed) {
    MeasurementSet m;
    m.dim = dim;
    m.x = std::move(positions);
    m.sigma = sigma;
    m.alpha = alpha;
    m.v.resize(m.x.size());
    for (std::size_t i = 0; i < m.x.size(); ++i) m.v[i] = 0.0;
    validate(m);
    std::mt19937_64 gen(seed);
    for (std::size_t i = 0; i < m.x.size(); ++i) {
        const double uni = (gen() >> 11) * 0x1.0p-53;
        const double xi = sigma > 0 ? sigma * (2.0 * uni - 1.0) : 0.0;
        m.v[i] = u(m.x[i].data()) + xi;
    }
    return m;
}

}  // namespace recon::problems
