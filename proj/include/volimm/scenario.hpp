#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "volimm/geodesics.hpp"

namespace volimm {

enum class Case { whip_curve, surface_l2, euler_torus, projection_study };

// Named initial-condition family plus its parameters. Which parameters are
// meaningful depends on the family; unknown keys are rejected at parse time.
struct InitialSpec {
    std::string family;          // set per case if empty
    double omega = 1.0;          // circle_rotation
    double amplitude = 0.4;      // bump height / shear strength / field scale
    double width = 0.5;          // bump width
    double center = 0.0;         // bump center angle
    double big_radius = 2.0;     // torus of revolution R
    double small_radius = 1.0;   // torus of revolution r
    int wavenumber = 1;          // shear
    double smoothness = 3.0;     // random_field spectral cutoff
};

struct StudySpec {
    std::vector<int> sizes{32, 64, 128};
    std::vector<int> orders{1, 2};
    int trials = 2;
};

inline bool operator==(const IntegratorConfig& a, const IntegratorConfig& b) {
    return a.scheme == b.scheme && a.dt == b.dt && a.t_end == b.t_end &&
           a.output_stride == b.output_stride && a.sobolev_order == b.sobolev_order &&
           a.solver_tol == b.solver_tol && a.newton_tol == b.newton_tol &&
           a.newton_cap == b.newton_cap && a.renormalize == b.renormalize &&
           a.drift_tol == b.drift_tol;
}
inline bool operator==(const InitialSpec& a, const InitialSpec& b) {
    return a.family == b.family && a.omega == b.omega && a.amplitude == b.amplitude &&
           a.width == b.width && a.center == b.center && a.big_radius == b.big_radius &&
           a.small_radius == b.small_radius && a.wavenumber == b.wavenumber &&
           a.smoothness == b.smoothness;
}
inline bool operator==(const StudySpec& a, const StudySpec& b) {
    return a.sizes == b.sizes && a.orders == b.orders && a.trials == b.trials;
}

struct Scenario {
    std::string name = "run";
    Case kase = Case::whip_curve;
    int n1 = 128;
    int n2 = 0;  // 2D cases only
    int sobolev_order = 0;
    IntegratorConfig integrator;
    InitialSpec initial;
    StudySpec study;
    std::string out_dir = "runs";
    std::uint64_t seed = 1;
    std::map<std::string, std::vector<double>> sweep;  // dotted path -> values

    bool operator==(const Scenario&) const = default;
};

namespace scenario_detail {

using nlohmann::json;

inline std::string case_name(Case c) {
    switch (c) {
        case Case::whip_curve: return "whip_curve";
        case Case::surface_l2: return "surface_l2";
        case Case::euler_torus: return "euler_torus";
        case Case::projection_study: return "projection_study";
    }
    return "?";
}

inline Case parse_case(const std::string& s, const std::string& path) {
    if (s == "whip_curve") return Case::whip_curve;
    if (s == "surface_l2") return Case::surface_l2;
    if (s == "euler_torus") return Case::euler_torus;
    if (s == "projection_study") return Case::projection_study;
    throw SchemaError(path, "unknown case '" + s + "'");
}

inline std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::rk4_explicit_p: return "rk4_explicit_p";
        case Scheme::rattle: return "rattle";
        case Scheme::discrete_lagrangian: return "discrete_lagrangian";
    }
    return "?";
}

inline Scheme parse_scheme(const std::string& s, const std::string& path) {
    if (s == "rk4_explicit_p") return Scheme::rk4_explicit_p;
    if (s == "rattle") return Scheme::rattle;
    if (s == "discrete_lagrangian") return Scheme::discrete_lagrangian;
    throw SchemaError(path, "unknown scheme '" + s + "'");
}

inline void require_keys(const json& obj, const std::string& path,
                         const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw SchemaError(path + "/" + it.key(), "unknown key");
}

template <typename T>
T get_number(const json& obj, const std::string& key, const std::string& path, T fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw SchemaError(path + "/" + key, "expected a number");
    return v.get<T>();
}

inline std::string get_string(const json& obj, const std::string& key,
                              const std::string& path, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) throw SchemaError(path + "/" + key, "expected a string");
    return v.get<std::string>();
}

inline bool get_bool(const json& obj, const std::string& key, const std::string& path,
                     bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw SchemaError(path + "/" + key, "expected a boolean");
    return v.get<bool>();
}

} // namespace scenario_detail

// Per-case defaults, applied before the file's own values.
inline void apply_case_defaults(Scenario& s) {
    switch (s.kase) {
        case Case::whip_curve:
            s.n1 = 128;
            s.n2 = 0;
            s.integrator.scheme = Scheme::rk4_explicit_p;
            s.integrator.t_end = 0.5;
            if (s.initial.family.empty()) s.initial.family = "circle_bump";
            break;
        case Case::surface_l2:
            s.n1 = 32;
            s.n2 = 32;
            s.integrator.scheme = Scheme::rattle;
            s.integrator.t_end = 0.25;
            if (s.initial.family.empty()) s.initial.family = "torus_rev_bump";
            s.initial.amplitude = 0.05;
            break;
        case Case::euler_torus:
            s.n1 = 64;
            s.n2 = 64;
            s.integrator.t_end = 1.0;
            if (s.initial.family.empty()) s.initial.family = "shear";
            s.initial.amplitude = 1.0;
            break;
        case Case::projection_study:
            s.n1 = 64;
            s.n2 = 0;
            if (s.initial.family.empty()) s.initial.family = "random_field";
            break;
    }
}

inline void validate_scenario(const Scenario& s) {
    auto check_size = [](int n, const char* what) {
        if (n < 8 || n % 2 != 0)
            throw RangeError(std::string(what) + " must be even and >= 8, got " +
                             std::to_string(n));
    };
    check_size(s.n1, "grid/n1");
    if (s.n2 != 0) check_size(s.n2, "grid/n2");
    validate_order(s.sobolev_order);
    s.integrator.validate();
    if (std::isnan(s.initial.amplitude) || std::abs(s.initial.amplitude) > 1e6)
        throw RangeError("initial/amplitude out of range");
    if (s.initial.width <= 0 || s.initial.width > 10)
        throw RangeError("initial/width must lie in (0, 10]");
    if (s.initial.small_radius <= 0 || s.initial.big_radius <= s.initial.small_radius)
        throw RangeError("torus radii need R > r > 0");
    if (s.initial.wavenumber < 1 || s.initial.wavenumber > s.n1 / 3)
        throw RangeError("initial/wavenumber outside the resolved band");
    if (s.initial.smoothness <= 0) throw RangeError("initial/smoothness must be positive");
    if (s.kase == Case::projection_study) {
        if (s.study.sizes.empty() || s.study.orders.empty() || s.study.trials < 1)
            throw RangeError("study needs sizes, orders and trials >= 1");
        for (int n : s.study.sizes) check_size(n, "study/sizes");
        for (int l : s.study.orders)
            if (l < 1 || l > kMaxSobolevOrder) throw RangeError("study/orders must lie in [1, 8]");
    }
    static const std::set<std::string> families{
        "circle_rotation", "circle_bump", "torus_rev_bump", "shear", "random_field"};
    if (!families.count(s.initial.family))
        throw SchemaError("initial/family", "unknown family '" + s.initial.family + "'");
}

inline Scenario parse_scenario(const std::string& text) {
    using namespace scenario_detail;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError("", std::string("not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw SchemaError("", "scenario must be a JSON object");
    require_keys(root, "", {"name", "case", "grid", "sobolev_order", "integrator",
                            "initial", "study", "out_dir", "seed", "sweep"});
    if (!root.contains("case")) throw SchemaError("case", "required key missing");

    Scenario s;
    s.kase = parse_case(get_string(root, "case", "", ""), "case");
    apply_case_defaults(s);
    s.name = get_string(root, "name", "", s.name);
    s.out_dir = get_string(root, "out_dir", "", s.out_dir);
    s.seed = get_number<std::uint64_t>(root, "seed", "", s.seed);
    s.sobolev_order = get_number<int>(root, "sobolev_order", "", s.sobolev_order);

    if (root.contains("grid")) {
        const json& g = root.at("grid");
        if (!g.is_object()) throw SchemaError("grid", "expected an object");
        require_keys(g, "grid", {"n1", "n2"});
        s.n1 = get_number<int>(g, "n1", "grid", s.n1);
        s.n2 = get_number<int>(g, "n2", "grid", s.n2);
    }

    if (root.contains("integrator")) {
        const json& g = root.at("integrator");
        if (!g.is_object()) throw SchemaError("integrator", "expected an object");
        require_keys(g, "integrator",
                     {"scheme", "dt", "t_end", "output_stride", "solver_tol", "newton_tol",
                      "newton_cap", "renormalize", "drift_tol"});
        if (g.contains("scheme"))
            s.integrator.scheme = parse_scheme(get_string(g, "scheme", "integrator", ""),
                                               "integrator/scheme");
        s.integrator.dt = get_number<double>(g, "dt", "integrator", s.integrator.dt);
        s.integrator.t_end = get_number<double>(g, "t_end", "integrator", s.integrator.t_end);
        s.integrator.output_stride =
            get_number<int>(g, "output_stride", "integrator", s.integrator.output_stride);
        s.integrator.solver_tol =
            get_number<double>(g, "solver_tol", "integrator", s.integrator.solver_tol);
        s.integrator.newton_tol =
            get_number<double>(g, "newton_tol", "integrator", s.integrator.newton_tol);
        s.integrator.newton_cap =
            get_number<int>(g, "newton_cap", "integrator", s.integrator.newton_cap);
        s.integrator.renormalize = get_bool(g, "renormalize", "integrator",
                                            s.integrator.renormalize);
        s.integrator.drift_tol =
            get_number<double>(g, "drift_tol", "integrator", s.integrator.drift_tol);
    }
    s.integrator.sobolev_order = s.sobolev_order;

    if (root.contains("initial")) {
        const json& g = root.at("initial");
        if (!g.is_object()) throw SchemaError("initial", "expected an object");
        require_keys(g, "initial",
                     {"family", "omega", "amplitude", "width", "center", "R", "r",
                      "wavenumber", "smoothness"});
        s.initial.family = get_string(g, "family", "initial", s.initial.family);
        s.initial.omega = get_number<double>(g, "omega", "initial", s.initial.omega);
        s.initial.amplitude = get_number<double>(g, "amplitude", "initial", s.initial.amplitude);
        s.initial.width = get_number<double>(g, "width", "initial", s.initial.width);
        s.initial.center = get_number<double>(g, "center", "initial", s.initial.center);
        s.initial.big_radius = get_number<double>(g, "R", "initial", s.initial.big_radius);
        s.initial.small_radius = get_number<double>(g, "r", "initial", s.initial.small_radius);
        s.initial.wavenumber = get_number<int>(g, "wavenumber", "initial", s.initial.wavenumber);
        s.initial.smoothness = get_number<double>(g, "smoothness", "initial", s.initial.smoothness);
    }

    if (root.contains("study")) {
        const json& g = root.at("study");
        if (!g.is_object()) throw SchemaError("study", "expected an object");
        require_keys(g, "study", {"sizes", "orders", "trials"});
        if (g.contains("sizes")) s.study.sizes = g.at("sizes").get<std::vector<int>>();
        if (g.contains("orders")) s.study.orders = g.at("orders").get<std::vector<int>>();
        s.study.trials = get_number<int>(g, "trials", "study", s.study.trials);
    }

    if (root.contains("sweep")) {
        const json& g = root.at("sweep");
        if (!g.is_object()) throw SchemaError("sweep", "expected an object");
        for (auto it = g.begin(); it != g.end(); ++it) {
            if (!it.value().is_array())
                throw SchemaError("sweep/" + it.key(), "expected an array of numbers");
            s.sweep[it.key()] = it.value().get<std::vector<double>>();
        }
    }

    validate_scenario(s);
    return s;
}

// Canonical JSON form; parse(print(s)) == s.
inline std::string print_scenario(const Scenario& s) {
    using namespace scenario_detail;
    json root;
    root["name"] = s.name;
    root["case"] = case_name(s.kase);
    root["grid"]["n1"] = s.n1;
    if (s.n2 != 0) root["grid"]["n2"] = s.n2;
    root["sobolev_order"] = s.sobolev_order;
    json& ig = root["integrator"];
    ig["scheme"] = scheme_name(s.integrator.scheme);
    ig["dt"] = s.integrator.dt;
    ig["t_end"] = s.integrator.t_end;
    ig["output_stride"] = s.integrator.output_stride;
    ig["solver_tol"] = s.integrator.solver_tol;
    ig["newton_tol"] = s.integrator.newton_tol;
    ig["newton_cap"] = s.integrator.newton_cap;
    ig["renormalize"] = s.integrator.renormalize;
    ig["drift_tol"] = s.integrator.drift_tol;
    json& in = root["initial"];
    in["family"] = s.initial.family;
    in["omega"] = s.initial.omega;
    in["amplitude"] = s.initial.amplitude;
    in["width"] = s.initial.width;
    in["center"] = s.initial.center;
    in["R"] = s.initial.big_radius;
    in["r"] = s.initial.small_radius;
    in["wavenumber"] = s.initial.wavenumber;
    in["smoothness"] = s.initial.smoothness;
    if (s.kase == Case::projection_study) {
        root["study"]["sizes"] = s.study.sizes;
        root["study"]["orders"] = s.study.orders;
        root["study"]["trials"] = s.study.trials;
    }
    root["out_dir"] = s.out_dir;
    root["seed"] = s.seed;
    if (!s.sweep.empty()) {
        for (const auto& [k, v] : s.sweep) root["sweep"][k] = v;
    }
    return root.dump(2) + "\n";
}

// Setter used by parameter sweeps; the path whitelist doubles as the
// documentation of what can be swept.
inline void set_scenario_value(Scenario& s, const std::string& path, double value) {
    if (path == "integrator.dt") s.integrator.dt = value;
    else if (path == "integrator.t_end") s.integrator.t_end = value;
    else if (path == "grid.n1") s.n1 = static_cast<int>(value);
    else if (path == "grid.n2") s.n2 = static_cast<int>(value);
    else if (path == "sobolev_order") {
        s.sobolev_order = static_cast<int>(value);
        s.integrator.sobolev_order = s.sobolev_order;
    }
    else if (path == "seed") s.seed = static_cast<std::uint64_t>(value);
    else if (path == "initial.omega") s.initial.omega = value;
    else if (path == "initial.amplitude") s.initial.amplitude = value;
    else if (path == "initial.width") s.initial.width = value;
    else throw SchemaError("sweep/" + path, "not a sweepable parameter");
    validate_scenario(s);
}

} // namespace volimm
