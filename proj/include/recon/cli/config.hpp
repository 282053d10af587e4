#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "recon/errors.hpp"
#include "recon/problems/bar1d.hpp"

namespace recon::cli {

using json = nlohmann::json;

enum class Kind { string, number, integer, boolean, number_list, integer_list, source_list };

// Every accepted leaf, addressed by dotted path.
inline const std::map<std::string, Kind>& schema() {
    static const std::map<std::string, Kind> s = {
        {"problem", Kind::string},
        {"method", Kind::string},
        {"loss_form", Kind::string},
        {"output_dir", Kind::string},
        {"diagnostic_eps", Kind::number_list},
        {"basis.type", Kind::string},
        {"basis.modes", Kind::integer},
        {"basis.widths", Kind::integer_list},
        {"basis.seed", Kind::integer},
        {"constraint_force.family", Kind::string},
        {"constraint_force.p", Kind::number},
        {"constraint_force.p_center", Kind::number},
        {"constraint_force.normalize", Kind::boolean},
        {"measurements.count", Kind::integer},
        {"measurements.sigma", Kind::number},
        {"measurements.alpha", Kind::number},
        {"measurements.seed", Kind::integer},
        {"measurements.csv", Kind::string},
        {"physics.modulus", Kind::number},
        {"physics.modulus_slope", Kind::number},
        {"physics.true_source", Kind::source_list},
        {"physics.model_sources", Kind::source_list},
        {"physics.model_sine_count", Kind::integer},
        {"physics.lambda1", Kind::number},
        {"physics.lambda2", Kind::number},
        {"physics.pin", Kind::number},
        {"physics.advection", Kind::number_list},
        {"physics.model", Kind::string},
        {"physics.reference_widths", Kind::integer_list},
        {"physics.reference_seed", Kind::integer},
        {"physics.reference_adam_steps", Kind::integer},
        {"physics.reference_lm_iter", Kind::integer},
        {"physics.reference_cutoff", Kind::number},
        {"physics.train_quadrature", Kind::integer},
        {"physics.eval_quadrature", Kind::integer},
        {"solver.lambda_d", Kind::number},
        {"solver.lambda_d_prime", Kind::number},
        {"solver.lr", Kind::number},
        {"solver.adam_steps", Kind::integer},
        {"solver.lm_iter", Kind::integer},
        {"solver.outer_lm_iter", Kind::integer},
        {"solver.eps0", Kind::number_list},
        {"solver.fixed_eps", Kind::number_list},
        {"solver.grad_tol", Kind::number},
        {"solver.max_outer", Kind::integer},
        {"solver.fd_step", Kind::number},
        {"solver.stagnation_window", Kind::integer},
    };
    return s;
}

inline const std::set<std::string>& sections() {
    static const std::set<std::string> s = {"basis", "constraint_force", "measurements", "physics",
                                            "solver"};
    return s;
}

// One term of a source expression, amplitude * shape(x).
//   sine             sin(k pi x)
//   x_sine           x sin(k pi x)
//   sine_one_plus_x  sin(k pi x) (1 + x)
//   sine_pi2         (k pi)^2 sin(k pi x)
//   linear           x
struct SourceTerm {
    std::string type = "sine";
    int k = 1;
    double amplitude = 1.0;
};

inline problems::ScalarFn make_source(const SourceTerm& t) {
    const double a = t.amplitude, kp = t.k * std::numbers::pi;
    if (t.type == "sine") return [=](double x) { return a * std::sin(kp * x); };
    if (t.type == "x_sine") return [=](double x) { return a * x * std::sin(kp * x); };
    if (t.type == "sine_one_plus_x")
        return [=](double x) { return a * std::sin(kp * x) * (1.0 + x); };
    if (t.type == "sine_pi2") return [=](double x) { return a * kp * kp * std::sin(kp * x); };
    if (t.type == "linear") return [=](double x) { return a * x; };
    throw ConfigError("unknown source term type '" + t.type + "'");
}

inline problems::ScalarFn sum_sources(const std::vector<SourceTerm>& terms) {
    std::vector<problems::ScalarFn> fs;
    for (const auto& t : terms) fs.push_back(make_source(t));
    return [fs](double x) {
        double acc = 0.0;
        for (const auto& f : fs) acc += f(x);
        return acc;
    };
}

struct Config {
    std::string problem;
    std::string method;
    std::string loss_form = "strong";
    std::string output_dir = "out";
    std::vector<double> diagnostic_eps;

    std::string basis_type;  // "sine" or "network"; defaults per problem
    int modes = 50;
    std::vector<int> widths = {2, 15, 15, 1};
    std::uint64_t basis_seed = 0;

    std::string family;  // defaults per problem
    double p = 25.0;
    std::optional<double> p_center;
    std::optional<bool> normalize;

    int count = 5;
    double sigma = 0.0;
    double alpha = 1.0;
    std::uint64_t meas_seed = 0;
    std::string meas_csv;  // explicit positions and values; overrides count and sigma

    double modulus = 1.0;
    double modulus_slope = 0.0;
    std::vector<SourceTerm> true_source;
    std::vector<SourceTerm> model_sources;
    int model_sine_count = 0;
    double lambda1 = 1.0, lambda2 = 1.0, pin = 0.5;
    std::vector<double> advection = {5.0, 5.0};
    std::string model = "conductivity";
    std::vector<int> reference_widths = {2, 10, 10, 1};
    std::uint64_t reference_seed = 0;
    long reference_adam_steps = 3000;
    int reference_lm_iter = 2000;
    double reference_cutoff = 1e-3;
    int train_quadrature = 32;
    int eval_quadrature = 64;

    std::optional<double> lambda_d;
    double lambda_d_prime = 1000.0;
    double lr = 1e-3;
    long adam_steps = 3000;
    int lm_iter = 400;
    int outer_lm_iter = 200;
    std::vector<double> eps0;
    std::optional<std::vector<double>> fixed_eps;
    std::optional<double> grad_tol;
    std::optional<int> max_outer;
    double fd_step = 1e-2;
    long stagnation_window = 500;
};

namespace detail {

inline std::string join(const std::string& a, const std::string& b) {
    return a.empty() ? b : a + "." + b;
}

inline bool leaf_matches(const json& v, Kind k) {
    switch (k) {
        case Kind::string: return v.is_string();
        case Kind::number: return v.is_number();
        case Kind::integer: return v.is_number_integer();
        case Kind::boolean: return v.is_boolean();
        case Kind::number_list:
            if (!v.is_array()) return false;
            for (const auto& e : v)
                if (!e.is_number()) return false;
            return true;
        case Kind::integer_list:
            if (!v.is_array()) return false;
            for (const auto& e : v)
                if (!e.is_number_integer()) return false;
            return true;
        case Kind::source_list:
            if (!v.is_array()) return false;
            for (const auto& e : v)
                if (!e.is_object()) return false;
            return true;
    }
    return false;
}

inline bool is_list_kind(Kind k) {
    return k == Kind::number_list || k == Kind::integer_list || k == Kind::source_list;
}

// Walks the document; collects leaves that hold a list of admissible values
// (sweep axes) and rejects unknown keys and ill-typed values.
inline void walk(const json& j, const std::string& prefix, std::vector<std::string>& axes) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string path = join(prefix, it.key());
        const json& v = it.value();
        if (prefix.empty() && sections().count(it.key())) {
            if (!v.is_object()) throw ConfigError("config key '" + path + "' must be an object");
            walk(v, path, axes);
            continue;
        }
        const auto f = schema().find(path);
        if (f == schema().end()) throw ConfigError("unknown config key '" + path + "'");
        if (leaf_matches(v, f->second)) continue;
        if (v.is_array()) {
            if (v.empty()) throw ConfigError("config key '" + path + "': empty sweep list");
            bool ok = true;
            for (const auto& e : v) ok = ok && leaf_matches(e, f->second);
            if (ok && (!is_list_kind(f->second) || v[0].is_array())) {
                axes.push_back(path);
                continue;
            }
        }
        throw ConfigError("config key '" + path + "' has the wrong type");
    }
}

inline const json* find_path(const json& j, const std::string& path) {
    const json* cur = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (!cur->is_object() || !cur->contains(key)) return nullptr;
        cur = &(*cur)[key];
        if (dot == std::string::npos) return cur;
        start = dot + 1;
    }
}

inline SourceTerm parse_term(const json& t, const std::string& path) {
    SourceTerm s;
    for (auto it = t.begin(); it != t.end(); ++it) {
        const auto& k = it.key();
        if (k == "type" && it->is_string())
            s.type = it->get<std::string>();
        else if (k == "k" && it->is_number_integer())
            s.k = it->get<int>();
        else if (k == "amplitude" && it->is_number())
            s.amplitude = it->get<double>();
        else
            throw ConfigError("config key '" + path + "." + k + "' is unknown or ill-typed");
    }
    make_source(s);  // validates the type name
    if (s.k < 1) throw ConfigError("config key '" + path + ".k' must be >= 1");
    return s;
}

}  // namespace detail

// Dotted paths of list-valued sweep axes; also validates keys and types.
inline std::vector<std::string> sweep_axes(const json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    std::vector<std::string> axes;
    detail::walk(j, "", axes);
    return axes;
}

inline void set_path(json& j, const std::string& path, const json& value) {
    json* cur = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            return;
        }
        cur = &(*cur)[key];
        start = dot + 1;
    }
}

inline Config parse_config(const json& j) {
    const auto axes = sweep_axes(j);
    if (!axes.empty())
        throw ConfigError("config key '" + axes.front() + "' is list-valued; use the sweep command");
    Config c;
    auto get = [&](const std::string& path) { return detail::find_path(j, path); };
    auto str = [&](const std::string& path, std::string& out) {
        if (const auto* v = get(path)) out = v->get<std::string>();
    };
    auto num = [&](const std::string& path, double& out) {
        if (const auto* v = get(path)) out = v->get<double>();
    };
    auto positive = [&](const std::string& path, double value) {
        if (!(value > 0)) throw ConfigError("config key '" + path + "' must be positive");
    };
    if (!get("problem")) throw ConfigError("config key 'problem' is required");
    if (!get("method")) throw ConfigError("config key 'method' is required");
    str("problem", c.problem);
    str("method", c.method);
    str("loss_form", c.loss_form);
    str("output_dir", c.output_dir);
    if (const auto* v = get("diagnostic_eps")) c.diagnostic_eps = v->get<std::vector<double>>();

    static const std::set<std::string> problems = {"bar-linear", "bar-hyperelastic", "heat-2d"};
    static const std::set<std::string> methods = {"ecfm", "pinn-penalty", "lagrange", "energy-mcf"};
    static const std::set<std::string> forms = {"strong", "weak", "energy"};
    if (!problems.count(c.problem))
        throw ConfigError("config key 'problem': unsupported value '" + c.problem + "'");
    if (!methods.count(c.method))
        throw ConfigError("config key 'method': unsupported value '" + c.method + "'");
    if (!forms.count(c.loss_form))
        throw ConfigError("config key 'loss_form': unsupported value '" + c.loss_form + "'");

    const bool two_d = c.problem == "heat-2d";
    c.basis_type = two_d ? "network" : "sine";
    str("basis.type", c.basis_type);
    if (c.basis_type != (two_d ? "network" : "sine"))
        throw ConfigError("config key 'basis.type' does not match the problem");
    if (const auto* v = get("basis.modes")) c.modes = v->get<int>();
    if (c.modes < 1) throw ConfigError("config key 'basis.modes' must be >= 1");
    if (const auto* v = get("basis.widths")) c.widths = v->get<std::vector<int>>();
    if (const auto* v = get("basis.seed")) c.basis_seed = v->get<std::uint64_t>();

    c.family = two_d ? "gaussian-rbf" : (c.problem == "bar-hyperelastic" ? "clipped-hat" : "hat");
    str("constraint_force.family", c.family);
    static const std::set<std::string> families = {"hat", "clipped-hat", "gaussian-rbf"};
    if (!families.count(c.family))
        throw ConfigError("config key 'constraint_force.family': unsupported value '" + c.family + "'");
    num("constraint_force.p", c.p);
    positive("constraint_force.p", c.p);
    if (const auto* v = get("constraint_force.p_center")) c.p_center = v->get<double>();
    if (c.p_center) positive("constraint_force.p_center", *c.p_center);
    if (const auto* v = get("constraint_force.normalize")) c.normalize = v->get<bool>();

    if (const auto* v = get("measurements.count")) c.count = v->get<int>();
    if (c.count < 0) throw ConfigError("config key 'measurements.count' must be >= 0");
    num("measurements.sigma", c.sigma);
    if (!(c.sigma >= 0)) throw ConfigError("config key 'measurements.sigma' must be >= 0");
    num("measurements.alpha", c.alpha);
    positive("measurements.alpha", c.alpha);
    if (const auto* v = get("measurements.seed")) c.meas_seed = v->get<std::uint64_t>();
    str("measurements.csv", c.meas_csv);

    num("physics.modulus", c.modulus);
    num("physics.modulus_slope", c.modulus_slope);
    if (const auto* v = get("physics.true_source"))
        for (std::size_t i = 0; i < v->size(); ++i)
            c.true_source.push_back(
                detail::parse_term((*v)[i], "physics.true_source[" + std::to_string(i) + "]"));
    if (const auto* v = get("physics.model_sources"))
        for (std::size_t i = 0; i < v->size(); ++i)
            c.model_sources.push_back(
                detail::parse_term((*v)[i], "physics.model_sources[" + std::to_string(i) + "]"));
    if (const auto* v = get("physics.model_sine_count")) c.model_sine_count = v->get<int>();
    if (c.model_sine_count < 0) throw ConfigError("config key 'physics.model_sine_count' must be >= 0");
    num("physics.lambda1", c.lambda1);
    num("physics.lambda2", c.lambda2);
    num("physics.pin", c.pin);
    if (const auto* v = get("physics.advection")) c.advection = v->get<std::vector<double>>();
    if (c.advection.size() != 2) throw ConfigError("config key 'physics.advection' needs two entries");
    str("physics.model", c.model);
    if (c.model != "conductivity" && c.model != "diffusion")
        throw ConfigError("config key 'physics.model': unsupported value '" + c.model + "'");
    if (const auto* v = get("physics.reference_widths"))
        c.reference_widths = v->get<std::vector<int>>();
    if (const auto* v = get("physics.reference_seed")) c.reference_seed = v->get<std::uint64_t>();
    if (const auto* v = get("physics.reference_adam_steps")) c.reference_adam_steps = v->get<long>();
    if (const auto* v = get("physics.reference_lm_iter")) c.reference_lm_iter = v->get<int>();
    num("physics.reference_cutoff", c.reference_cutoff);
    if (const auto* v = get("physics.train_quadrature")) c.train_quadrature = v->get<int>();
    if (const auto* v = get("physics.eval_quadrature")) c.eval_quadrature = v->get<int>();
    if (c.train_quadrature < 2 || c.eval_quadrature < 2)
        throw ConfigError("config key 'physics.*_quadrature' must be >= 2");

    if (const auto* v = get("solver.lambda_d")) c.lambda_d = v->get<double>();
    if (c.lambda_d && !(*c.lambda_d >= 0)) throw ConfigError("config key 'solver.lambda_d' must be >= 0");
    num("solver.lambda_d_prime", c.lambda_d_prime);
    positive("solver.lambda_d_prime", c.lambda_d_prime);
    num("solver.lr", c.lr);
    positive("solver.lr", c.lr);
    if (const auto* v = get("solver.adam_steps")) c.adam_steps = v->get<long>();
    if (const auto* v = get("solver.lm_iter")) c.lm_iter = v->get<int>();
    if (const auto* v = get("solver.outer_lm_iter")) c.outer_lm_iter = v->get<int>();
    if (const auto* v = get("solver.eps0")) c.eps0 = v->get<std::vector<double>>();
    if (const auto* v = get("solver.fixed_eps")) c.fixed_eps = v->get<std::vector<double>>();
    if (const auto* v = get("solver.grad_tol")) c.grad_tol = v->get<double>();
    if (const auto* v = get("solver.max_outer")) c.max_outer = v->get<int>();
    num("solver.fd_step", c.fd_step);
    positive("solver.fd_step", c.fd_step);
    if (const auto* v = get("solver.stagnation_window")) c.stagnation_window = v->get<long>();
    if (c.adam_steps < 0 || c.lm_iter < 0 || c.outer_lm_iter < 0 || c.max_outer.value_or(0) < 0)
        throw ConfigError("config keys 'solver.*' iteration counts must be >= 0");

    if (c.problem != "heat-2d" && c.true_source.empty())
        throw ConfigError("config key 'physics.true_source' is required for 1D problems");
    if (c.problem == "heat-2d" && c.method != "ecfm" && c.method != "pinn-penalty")
        throw ConfigError("config key 'method': heat-2d supports ecfm and pinn-penalty");
    if (c.problem == "bar-hyperelastic" && c.method != "ecfm" && c.method != "pinn-penalty")
        throw ConfigError("config key 'method': bar-hyperelastic supports ecfm and pinn-penalty");
    if (c.method == "energy-mcf" && c.loss_form != "energy")
        throw ConfigError("config key 'loss_form' must be 'energy' for energy-mcf");
    if (c.method == "ecfm" && c.loss_form == "energy")
        throw ConfigError("config key 'loss_form': ecfm uses strong or weak");
    return c;
}

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

}  // namespace recon::cli
