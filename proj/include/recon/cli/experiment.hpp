#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "recon/baselines/advection.hpp"
#include "recon/baselines/lagrange.hpp"
#include "recon/cli/config.hpp"
#include "recon/sensitivity_outer/outer.hpp"

namespace recon::cli {

using sensitivity_outer::EcfmResult;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

struct RunOutput {
    Config config;
    EcfmResult result;
    Vector lambda_raw;  // coefficients of the unnormalized shapes
    json field;         // what compare needs to rebuild w_hat
    std::vector<std::pair<std::string, double>> metrics;
    Table reconstruction;
    problems::MeasurementSet data;

    void metric(const std::string& name, double value) { metrics.emplace_back(name, value); }
    double get(const std::string& name) const {
        for (const auto& [k, v] : metrics)
            if (k == name) return v;
        throw InvalidArgument("metric '" + name + "' not recorded");
    }
    bool has(const std::string& name) const {
        for (const auto& m : metrics)
            if (m.first == name) return true;
        return false;
    }
};

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_eps(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Measurements

inline problems::MeasurementSet read_measurements_csv(const std::string& path, int dim) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config key 'measurements.csv': cannot read '" + path + "'");
    problems::MeasurementSet m;
    m.dim = dim;
    std::string line;
    std::getline(in, line);  // header
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                cells.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("config key 'measurements.csv': bad number '" + cell + "'");
            }
        }
        if (static_cast<int>(cells.size()) != dim + 2)
            throw ConfigError("config key 'measurements.csv': expected columns x1[,x2],v,sigma");
        m.x.push_back({cells[0], dim == 2 ? cells[1] : 0.0});
        m.v.push_back(cells[dim]);
        if (first) m.sigma = cells[dim + 1];
        if (cells[dim + 1] != m.sigma)
            throw ConfigError("config key 'measurements.csv': sigma must be uniform");
        first = false;
    }
    try {
        problems::validate(m);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config key 'measurements.csv': ") + e.what());
    }
    return m;
}

inline std::string measurements_csv(const problems::MeasurementSet& m) {
    std::string out = m.dim == 2 ? "x1,x2,v,sigma\n" : "x1,v,sigma\n";
    for (int i = 0; i < m.count(); ++i) {
        out += format_number(m.x[i][0]) + ",";
        if (m.dim == 2) out += format_number(m.x[i][1]) + ",";
        out += format_number(m.v[i]) + "," + format_number(m.sigma) + "\n";
    }
    return out;
}

inline problems::MeasurementSet make_measurements(const Config& c, int dim,
                                                  const std::function<double(const double*)>& u) {
    problems::MeasurementSet m;
    if (!c.meas_csv.empty()) {
        m = read_measurements_csv(c.meas_csv, dim);
        m.alpha = c.alpha;
        return m;
    }
    if (c.count < 1) throw ConfigError("config key 'measurements.count' must be >= 1");
    try {
        auto x = dim == 1 ? problems::uniform_grid_1d(c.count) : problems::uniform_grid_2d(c.count);
        return problems::sample_measurements(u, std::move(x), dim, c.sigma, c.alpha, c.meas_seed);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config key 'measurements.count': ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Shared pieces

inline constraint_force::ConstraintForceSet make_forces_1d(const Config& c,
                                                           const problems::MeasurementSet& m) {
    using constraint_force::ConstraintForceSet;
    ConstraintForceSet set = [&] {
        if (c.family == "hat") return ConstraintForceSet::hats(m.x, 1.0 / (m.count() + 1));
        if (c.family == "gaussian-rbf") return ConstraintForceSet::gaussians(m.x, 1, c.p);
        std::vector<double> p(m.x.size(), c.p);
        for (std::size_t i = 0; i < m.x.size(); ++i)
            if (c.p_center && std::abs(m.x[i][0] - c.pin) < 1e-9) p[i] = *c.p_center;
        return ConstraintForceSet::clipped_hats(m.x, p);
    }();
    if (c.normalize.value_or(false)) set = set.normalized(inner_loop::linear_rule(&set, m));
    return set;
}

inline problems::SourceFamily model_family(const Config& c) {
    problems::SourceFamily b;
    for (const auto& t : c.model_sources) b.terms.push_back(make_source(t));
    const auto sines = problems::SourceFamily::sines(c.model_sine_count);
    b.terms.insert(b.terms.end(), sines.terms.begin(), sines.terms.end());
    return b;
}

inline Vector start_eps(const Config& c, int p) {
    if (c.eps0.empty()) return Vector::Zero(p);
    if (static_cast<int>(c.eps0.size()) != p)
        throw ConfigError("config key 'solver.eps0' needs " + std::to_string(p) + " entries");
    return Eigen::Map<const Vector>(c.eps0.data(), p);
}

inline numerics::BfgsOptions bfgs_options(const Config& c, double grad_tol, int max_iter) {
    numerics::BfgsOptions o;
    o.grad_tol = c.grad_tol.value_or(grad_tol);
    o.max_iter = c.max_outer.value_or(max_iter);
    return o;
}

inline Vector raw_lambda(const constraint_force::ConstraintForceSet& f, const Vector& lambda) {
    Vector r = lambda;
    for (int i = 0; i < f.count(); ++i) r(i) *= f.scale(i);
    return r;
}

inline void record_common(RunOutput& out, double e, double violation) {
    const auto& r = out.result;
    out.metric("E", e);
    out.metric("z", r.z);
    out.metric("max_violation", violation);
    for (Eigen::Index k = 0; k < r.epsilon.size(); ++k)
        out.metric("epsilon_" + std::to_string(k + 1), r.epsilon(k));
}

inline double max_violation_1d(const discretization::SineBasis& basis, const Vector& theta,
                               const problems::MeasurementSet& m) {
    double worst = 0.0;
    for (int i = 0; i < m.count(); ++i)
        worst = std::max(worst, std::abs(basis.eval(theta, m.x[i][0]) - m.v[i]));
    return worst;
}

inline Table sample_1d(const std::function<double(double)>& w, const std::function<double(double)>& u,
                       const std::function<double(double)>& f) {
    Table t;
    t.header = {"x1", "w_hat", "u_true", "constraint_force"};
    for (int i = 0; i <= 1000; ++i) {
        const double x = i / 1000.0;
        t.rows.push_back({x, w(x), u(x), f(x)});
    }
    return t;
}

// ---------------------------------------------------------------------------
// bar-linear

inline RunOutput run_bar_linear(const Config& c) {
    if (!(c.modulus > 0 && c.modulus + c.modulus_slope > 0))
        throw ConfigError("config key 'physics.modulus': modulus must stay positive on [0, 1]");
    RunOutput out;
    out.config = c;
    problems::LinearBar bar;
    const double e0 = c.modulus, e1 = c.modulus_slope;
    bar.modulus = [=](double x) { return e0 + e1 * x; };
    bar.modulus_dx = [=](double) { return e1; };
    bar.source = sum_sources(c.true_source);
    const discretization::SineBasis basis(c.modes);
    const Vector ref = problems::reference_solution(bar, basis, numerics::default_rule_1d());
    out.data = make_measurements(c, 1, [&](const double* x) { return basis.eval(ref, x[0]); });
    const auto& m = out.data;
    const auto b = model_family(c);
    const Vector eps0 = start_eps(c, b.size());
    const auto form = inner_loop::loss_form_from_string(c.loss_form);

    auto residual = [&](const Vector& theta, const Vector& eps, double x) {
        return problems::physics_residual(bar, b, basis, theta, eps, x);
    };
    std::function<double(double)> force;
    auto& r = out.result;
    if (c.method == "ecfm") {
        const auto forces = make_forces_1d(c, m);
        const auto problem = sensitivity_outer::make_linear_ecfm(bar, b, basis, forces, m, form);
        r = sensitivity_outer::ecfm_minimize(problem, eps0, bfgs_options(c, 1e-10, 500));
        out.lambda_raw = raw_lambda(forces, r.lambda);
        force = [forces, lam = r.lambda](double x) { return forces.field(lam, &x); };
    } else if (c.method == "energy-mcf") {
        r = sensitivity_outer::energy_mcf_minimize(bar, b, basis, m, eps0, bfgs_options(c, 1e-10, 500));
        out.lambda_raw = r.lambda;
    } else if (c.method == "pinn-penalty") {
        baselines::PenaltyConfig pc;
        pc.lambda_d = c.lambda_d.value_or(1e4);
        std::optional<Vector> fixed;
        if (c.fixed_eps) {
            if (static_cast<int>(c.fixed_eps->size()) != b.size())
                throw ConfigError("config key 'solver.fixed_eps' needs " + std::to_string(b.size()) +
                                  " entries");
            fixed = Eigen::Map<const Vector>(c.fixed_eps->data(), b.size());
        }
        const auto p = baselines::pinn_penalty_solve(bar, b, basis, m, pc, fixed);
        r.method = "pinn-penalty";
        r.loss_form = "strong";
        r.epsilon = p.epsilon;
        r.theta = p.theta;
        r.z = NAN;
        r.iterations = p.iterations;
        r.converged = true;
        r.diagnostics["loss"] = p.loss;
        r.diagnostics["lambda_d"] = pc.lambda_d;
    } else {
        const auto l = baselines::lagrange_strongform_solve(bar, b, basis, m);
        r.method = "lagrange";
        r.loss_form = "strong";
        r.epsilon = l.epsilon;
        r.theta = l.theta;
        r.lambda = l.lambda;
        r.z = NAN;
        r.converged = true;
        out.lambda_raw = l.lambda;
    }
    if (!force)
        force = [&, theta = r.theta, eps = r.epsilon](double x) { return -residual(theta, eps, x); };

    const auto rule = inner_loop::linear_rule(nullptr, m);
    const double e = std::sqrt(rule.integrate([&](double x) {
        const double d = basis.eval(r.theta, x) - basis.eval(ref, x);
        return d * d;
    }));
    record_common(out, e, max_violation_1d(basis, r.theta, m));
    if (c.method == "ecfm") {
        // distance between the force field and the missing source s - b(eps*)
        const auto frule = numerics::default_rule_1d(m.x1());
        out.metric("force_misfit", std::sqrt(frule.integrate([&](double x) {
            const double d = force(x) - (bar.source(x) - b.eval(r.epsilon, x));
            return d * d;
        })));
    }
    if (!c.diagnostic_eps.empty()) {
        if (b.size() != 1) throw ConfigError("config key 'diagnostic_eps' needs a single source term");
        for (double d : c.diagnostic_eps) {
            const Vector ev = Vector::Constant(1, d);
            out.metric("energy_at_" + format_eps(d),
                       baselines::energy_interpolant(bar, b, basis, m, ev).value);
            out.metric("strong_loss_at_" + format_eps(d),
                       baselines::strong_interpolant(bar, b, basis, m, ev).value);
        }
    }
    out.field = {{"dim", 1}, {"basis", "sine"}, {"modes", c.modes}};
    out.reconstruction = sample_1d([&](double x) { return basis.eval(r.theta, x); },
                                   [&](double x) { return basis.eval(ref, x); }, force);
    return out;
}

// ---------------------------------------------------------------------------
// bar-hyperelastic

inline RunOutput run_bar_hyperelastic(const Config& c) {
    if (!(c.pin > 0 && c.pin < 1)) throw ConfigError("config key 'physics.pin' must lie in (0, 1)");
    RunOutput out;
    out.config = c;
    problems::HyperelasticBar bar{{c.lambda1, c.lambda2}, sum_sources(c.true_source)};
    const discretization::SineBasis basis(c.modes);
    const auto rule = numerics::default_rule_1d({c.pin});
    const auto ref = problems::reference_solution(bar, basis, rule, c.pin);
    out.data = make_measurements(c, 1, [&](const double* x) { return basis.eval(ref.theta, x[0]); });
    const auto& m = out.data;
    const auto b = model_family(c);
    const Vector eps0 = start_eps(c, b.size());
    auto& r = out.result;
    std::function<double(double)> force;
    if (c.method == "ecfm") {
        if (!(m.bound() > 0))
            throw ConfigError("config key 'measurements.sigma' must be positive for the KKT path");
        const auto forces = make_forces_1d(c, m);
        inner_loop::HyperelasticKkt sys(bar.material, b, basis, forces, m);
        sensitivity_outer::HyperelasticEcfm problem(
            sys, constraint_force::gram_matrix(forces, inner_loop::linear_rule(&forces, m)));
        r = sensitivity_outer::ecfm_minimize(problem, eps0, bfgs_options(c, 1e-8, 200));
        out.lambda_raw = raw_lambda(forces, r.lambda);
        force = [forces, lam = r.lambda](double x) { return forces.field(lam, &x); };
    } else {
        const double ld = c.lambda_d.value_or(1e8);
        const auto p = baselines::pinn_penalty_hyperelastic(bar.material, b, basis, m, ld);
        r.method = "pinn-penalty";
        r.loss_form = "strong";
        r.epsilon = p.epsilon;
        r.theta = p.theta;
        r.z = NAN;
        r.iterations = p.iterations;
        r.converged = true;
        r.diagnostics["loss"] = p.loss;
        r.diagnostics["lambda_d"] = ld;
        force = [&, theta = p.theta, eps = p.epsilon](double x) {
            return -problems::physics_residual(bar.material, b, basis, theta, eps, x);
        };
    }
    const double e = std::sqrt(rule.integrate([&](double x) {
        const double d = basis.eval(r.theta - ref.theta, x);
        return d * d;
    }));
    record_common(out, e, max_violation_1d(basis, r.theta, m));
    const double delta = 1.0 / c.p_center.value_or(c.p);
    out.metric("strain_jump", problems::strain_jump(basis, r.theta, c.pin, delta));
    out.metric("reference_strain_jump", problems::strain_jump(basis, ref.theta, c.pin, delta));
    out.field = {{"dim", 1}, {"basis", "sine"}, {"modes", c.modes}};
    out.reconstruction = sample_1d([&](double x) { return basis.eval(r.theta, x); },
                                   [&](double x) { return basis.eval(ref.theta, x); }, force);
    return out;
}

// ---------------------------------------------------------------------------
// heat-2d

inline RunOutput run_heat_2d(const Config& c) {
    RunOutput out;
    out.config = c;
    const auto train = numerics::tensor_gauss_legendre(c.train_quadrature);
    const discretization::TanhNetwork refnet(c.reference_widths);
    problems::Heat2dSystem truth = problems::heat_true_system();
    truth.advection = {c.advection[0], c.advection[1]};
    problems::NetworkResidual rres(refnet, truth, train);
    problems::NetworkTrainingOptions to;
    to.adam_steps = c.reference_adam_steps;
    to.lm_iter = c.reference_lm_iter;
    to.cutoff = c.reference_cutoff;
    to.lr = c.lr;
    const auto ref = problems::reference_solution(rres, c.reference_seed, to);
    out.data = make_measurements(c, 2, [&](const double* x) { return rres.value(ref.theta, x); });
    const auto& m = out.data;

    const bool conductivity = c.model == "conductivity";
    const discretization::TanhNetwork net(c.widths);
    problems::NetworkResidual mres(
        net, conductivity ? problems::heat_model_system() : problems::heat_diffusion_system(), train);
    const Vector eps0v = start_eps(c, conductivity ? 1 : 0);
    const double eps0 = conductivity ? eps0v(0) : 0.0;
    if (c.fixed_eps) throw ConfigError("config key 'solver.fixed_eps' is only used by bar-linear");

    // physics-only fit of the model as the common starting point
    problems::NetworkTrainingOptions wo;
    wo.adam_steps = c.adam_steps;
    wo.lr = c.lr;
    wo.lm_iter = c.lm_iter;
    wo.cutoff = 1e-4;
    const auto warm = problems::reference_solution(mres, c.basis_seed, wo, eps0);

    auto& r = out.result;
    double eps_star = 0.0;
    std::function<double(const double*)> force;
    if (c.method == "ecfm") {
        auto forces = constraint_force::ConstraintForceSet::gaussians(m.x, 2, c.p);
        if (c.normalize.value_or(true)) forces = forces.normalized(train);
        const Matrix h = constraint_force::gram_matrix(forces, train);
        inner_loop::PenalizedNetworkInner inner(mres, forces, m, c.lambda_d_prime);
        inner_loop::NetworkInnerOptions io;
        io.lm_iter = c.lm_iter;
        io.stagnation_window = c.stagnation_window;
        const auto s0 = inner.solve(eps0, inner.initial_guess(warm.theta), io);
        Vector x0(inner.size());
        x0 << s0.theta, s0.lambda;
        if (conductivity) {
            io.lm_iter = c.outer_lm_iter;
            sensitivity_outer::NetworkEcfm problem(inner, h, x0, io, c.fd_step);
            r = sensitivity_outer::ecfm_minimize(problem, eps0, bfgs_options(c, 1e-2, 20));
            eps_star = r.epsilon(0);
        } else {
            r.loss_form = "strong";
            r.epsilon = Vector();
            r.theta = s0.theta;
            r.lambda = s0.lambda;
            r.z = constraint_force::total_force(h, s0.lambda);
            r.iterations = 0;
            r.converged = true;
            r.trace = {r.z};
            r.diagnostics["physics_loss"] = s0.physics_loss;
            r.diagnostics["penalty"] = s0.penalty;
            r.diagnostics["loss"] = s0.loss;
            r.diagnostics["max_violation"] = s0.max_violation;
            r.diagnostics["inner_solves"] = 1;
            const Vector a = baselines::recover_advection(
                mres, r.theta, baselines::ResidualProvenance::ecfm, r.lambda, inner.gamma_at_points());
            r.diagnostics["a1"] = a(0);
            r.diagnostics["a2"] = a(1);
        }
        r.diagnostics["lambda_d_prime"] = c.lambda_d_prime;
        out.lambda_raw = raw_lambda(forces, r.lambda);
        force = [forces, lam = r.lambda](const double* x) { return forces.field(lam, x); };
    } else {
        const double ld = c.lambda_d.value_or(1e4);
        baselines::NetworkPenalty pen(mres, m, ld);
        baselines::NetworkPenaltyOptions po;
        po.adam_steps = 0;
        po.lm_iter = c.lm_iter;
        const auto p = pen.solve(pen.initial_guess(warm.theta, eps0), po);
        r.method = "pinn-penalty";
        r.loss_form = "strong";
        r.epsilon = p.epsilon;
        r.theta = p.theta;
        r.z = NAN;
        r.iterations = p.iterations;
        r.converged = true;
        r.diagnostics["loss"] = p.loss;
        r.diagnostics["lambda_d"] = ld;
        if (conductivity) eps_star = p.epsilon(0);
        if (!conductivity) {
            const Vector a =
                baselines::recover_advection(mres, r.theta, baselines::ResidualProvenance::pinn);
            r.diagnostics["a1"] = a(0);
            r.diagnostics["a2"] = a(1);
        }
        force = [&mres, theta = p.theta, eps_star](const double* x) {
            return -mres.residual_at(theta, eps_star, x);
        };
    }
    r.diagnostics["reference_residual_sq"] = ref.residual_sq;
    r.diagnostics["warm_start_residual_sq"] = warm.residual_sq;

    const auto eval = numerics::tensor_gauss_legendre(c.eval_quadrature);
    double e2 = 0.0;
    for (std::size_t q = 0; q < eval.size(); ++q) {
        const double d = mres.value(r.theta, eval.x[q].data()) - rres.value(ref.theta, eval.x[q].data());
        e2 += eval.w[q] * d * d;
    }
    double viol = 0.0;
    for (int i = 0; i < m.count(); ++i)
        viol = std::max(viol, std::abs(mres.value(r.theta, m.x[i].data()) - m.v[i]));
    record_common(out, std::sqrt(e2), viol);
    if (r.diagnostics.count("loss")) out.metric("loss", r.diagnostics.at("loss"));
    if (r.diagnostics.count("a1")) {
        out.metric("a1", r.diagnostics.at("a1"));
        out.metric("a2", r.diagnostics.at("a2"));
        out.metric("a_bar", 0.5 * (r.diagnostics.at("a1") + r.diagnostics.at("a2")));
    }
    out.field = {{"dim", 2}, {"basis", "network"}, {"widths", c.widths}, {"embedding", "unit-square"}};
    Table& t = out.reconstruction;
    t.header = {"x1", "x2", "w_hat", "u_true", "constraint_force"};
    for (int i = 0; i <= 100; ++i)
        for (int j = 0; j <= 100; ++j) {
            const double x[2] = {i / 100.0, j / 100.0};
            t.rows.push_back({x[0], x[1], mres.value(r.theta, x), rres.value(ref.theta, x), force(x)});
        }
    return out;
}

inline RunOutput execute(const Config& c) {
    RunOutput out = c.problem == "bar-linear"         ? run_bar_linear(c)
                    : c.problem == "bar-hyperelastic" ? run_bar_hyperelastic(c)
                                                      : run_heat_2d(c);
    if (out.result.method.empty()) out.result.method = c.method;
    if (out.lambda_raw.size() == 0) out.lambda_raw = out.result.lambda;
    return out;
}

// ---------------------------------------------------------------------------
// Output

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_array(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number_or_null(v(i)));
    return a;
}

inline json result_json(const RunOutput& o) {
    const auto& r = o.result;
    json d = json::object();
    for (const auto& [k, v] : r.diagnostics) d[k] = number_or_null(v);
    json metrics = json::object();
    for (const auto& [k, v] : o.metrics) metrics[k] = number_or_null(v);
    json trace = json::array();
    for (double t : r.trace) trace.push_back(number_or_null(t));
    return {{"schema_version", 1},
            {"problem", o.config.problem},
            {"method", r.method},
            {"loss_form", r.loss_form},
            {"epsilon", to_array(r.epsilon)},
            {"z", number_or_null(r.z)},
            {"lambda", to_array(r.lambda)},
            {"lambda_raw", to_array(o.lambda_raw)},
            {"lambda_normalized", o.config.normalize.value_or(o.config.problem == "heat-2d")},
            {"theta", to_array(r.theta)},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"trace", trace},
            {"diagnostics", d},
            {"metrics", metrics},
            {"field", o.field}};
}

inline std::string table_csv(const Table& t) {
    std::string s;
    for (std::size_t k = 0; k < t.header.size(); ++k) s += (k ? "," : "") + t.header[k];
    s += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) s += (k ? "," : "") + format_number(row[k]);
        s += "\n";
    }
    return s;
}

inline std::string metrics_csv(const RunOutput& o) {
    std::string h, v;
    for (std::size_t k = 0; k < o.metrics.size(); ++k) {
        h += (k ? "," : "") + o.metrics[k].first;
        v += (k ? "," : "") + format_number(o.metrics[k].second);
    }
    return h + "\n" + v + "\n";
}

// Writes next to the target and renames, so readers never see partial files.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw ConfigError("cannot write '" + tmp + "'");
        f << content;
        if (!f) throw ConfigError("cannot write '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline void write_outputs(const std::filesystem::path& dir, const RunOutput& o) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "'");
    write_file_atomic(dir / "result.json", result_json(o).dump(2) + "\n");
    write_file_atomic(dir / "reconstruction.csv", table_csv(o.reconstruction));
    write_file_atomic(dir / "metrics.csv", metrics_csv(o));
    write_file_atomic(dir / "measurements.csv", measurements_csv(o.data));
}

// ---------------------------------------------------------------------------
// Commands

inline void apply_seed(json& j, std::uint64_t seed) {
    set_path(j, "measurements.seed", seed);
    set_path(j, "basis.seed", seed);
}

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 3;
    } catch (const InvalidArgument& e) {
        err << "invalid input: " << e.what() << "\n";
        return 3;
    } catch (const RankDeficiencyError& e) {
        err << "solver error: " << e.what();
        if (e.nullity() >= 0) err << " (nullspace dimension " << e.nullity() << ")";
        err << "\n";
        return 2;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "output error: " << e.what() << "\n";
        return 3;
    }
}

inline int run_command(const std::string& config_path, const std::optional<std::string>& out_dir,
                       const std::optional<std::uint64_t>& seed, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        json j = load_json(config_path);
        if (seed) apply_seed(j, *seed);
        Config c = parse_config(j);
        if (out_dir) c.output_dir = *out_dir;
        const auto o = execute(c);
        write_outputs(c.output_dir, o);
        return 0;
    });
}

inline std::string axis_cell(const json& v) {
    if (v.is_number()) return format_number(v.get<double>());
    std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

inline int sweep_command(const std::string& config_path, const std::optional<std::string>& out_dir,
                         const std::optional<std::uint64_t>& seed, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        json j = load_json(config_path);
        if (seed) apply_seed(j, *seed);
        const auto axes = sweep_axes(j);
        if (axes.size() != 1)
            throw ConfigError("sweep needs exactly one list-valued key, found " +
                              std::to_string(axes.size()));
        const std::string axis = axes.front();
        const json values = *detail::find_path(j, axis);
        std::vector<Config> configs;
        for (const auto& v : values) {
            json entry = j;
            set_path(entry, axis, v);
            configs.push_back(parse_config(entry));
        }
        const std::filesystem::path base = out_dir ? *out_dir : configs.front().output_dir;
        std::vector<std::string> header = {axis};
        std::vector<std::vector<std::pair<std::string, double>>> rows;
        for (std::size_t k = 0; k < configs.size(); ++k) {
            const auto o = execute(configs[k]);
            write_outputs(base / ("entry_" + std::to_string(k)), o);
            for (const auto& m : o.metrics)
                if (std::find(header.begin(), header.end(), m.first) == header.end())
                    header.push_back(m.first);
            rows.push_back(o.metrics);
        }
        std::string csv;
        for (std::size_t k = 0; k < header.size(); ++k) csv += (k ? "," : "") + header[k];
        csv += "\n";
        for (std::size_t r = 0; r < rows.size(); ++r) {
            csv += axis_cell(values[r]);
            for (std::size_t k = 1; k < header.size(); ++k) {
                csv += ",";
                for (const auto& m : rows[r])
                    if (m.first == header[k]) csv += format_number(m.second);
            }
            csv += "\n";
        }
        write_file_atomic(base / "metrics.csv", csv);
        return 0;
    });
}

// A stored reconstruction that can be evaluated anywhere in the domain.
class StoredField {
public:
    explicit StoredField(const json& r) {
        try {
            problem_ = r.at("problem").get<std::string>();
            method_ = r.at("method").get<std::string>();
            const auto& f = r.at("field");
            dim_ = f.at("dim").get<int>();
            theta_ = Eigen::Map<const Vector>(r.at("theta").get<std::vector<double>>().data(),
                                              static_cast<Eigen::Index>(r.at("theta").size()));
            if (r.at("metrics").contains("E") && r["metrics"]["E"].is_number())
                e_ = r["metrics"]["E"].get<double>();
            if (dim_ == 1) {
                basis_.emplace(f.at("modes").get<int>());
                if (theta_.size() != basis_->size()) throw ConfigError("theta does not match the basis");
            } else {
                net_.emplace(f.at("widths").get<std::vector<int>>());
                field_.emplace(*net_, discretization::DirichletEmbedding::unit_square());
                if (theta_.size() != net_->param_count())
                    throw ConfigError("theta does not match the network");
            }
        } catch (const json::exception& e) {
            throw ConfigError(std::string("result file is missing fields: ") + e.what());
        }
    }

    StoredField(const StoredField&) = delete;
    StoredField& operator=(const StoredField&) = delete;

    int dim() const { return dim_; }
    const std::string& problem() const { return problem_; }
    const std::string& method() const { return method_; }
    double error() const { return e_; }

    double operator()(const double* x) {
        if (dim_ == 1) return basis_->eval(theta_, x[0]);
        return field_->eval(theta_, x).v;
    }

private:
    std::string problem_, method_;
    int dim_ = 1;
    Vector theta_;
    double e_ = NAN;
    std::optional<discretization::SineBasis> basis_;
    std::optional<discretization::TanhNetwork> net_;
    std::optional<discretization::EmbeddedField> field_;
};

// (int (a - b)^2)^(1/2) over the unit domain.
inline double field_distance(StoredField& a, StoredField& b) {
    if (a.dim() != b.dim() || a.problem() != b.problem())
        throw ConfigError("compare: results are on different problems or domains");
    double acc = 0.0;
    if (a.dim() == 1) {
        const auto rule = numerics::default_rule_1d();
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double d = a(&rule.x[q]) - b(&rule.x[q]);
            acc += rule.w[q] * d * d;
        }
    } else {
        const auto rule = numerics::tensor_gauss_legendre(64);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double d = a(rule.x[q].data()) - b(rule.x[q].data());
            acc += rule.w[q] * d * d;
        }
    }
    return std::sqrt(acc);
}

inline int compare_command(const std::vector<std::string>& paths,
                           const std::optional<std::string>& out_dir, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        if (paths.size() < 2) throw ConfigError("compare needs at least two result files");
        std::vector<std::unique_ptr<StoredField>> fields;
        for (const auto& p : paths) fields.push_back(std::make_unique<StoredField>(load_json(p)));
        std::string csv = "a,b,method_a,method_b,E_a,E_b,l2_distance\n";
        for (std::size_t i = 0; i < fields.size(); ++i)
            for (std::size_t k = i + 1; k < fields.size(); ++k) {
                const double d = field_distance(*fields[i], *fields[k]);
                csv += axis_cell(paths[i]) + "," + axis_cell(paths[k]) + "," + fields[i]->method() +
                       "," + fields[k]->method() + "," + format_number(fields[i]->error()) + "," +
                       format_number(fields[k]->error()) + "," + format_number(d) + "\n";
            }
        const std::filesystem::path dir = out_dir.value_or(".");
        std::filesystem::create_directories(dir);
        write_file_atomic(dir / "comparison.csv", csv);
        return 0;
    });
}

}  // namespace recon::cli
