#ifndef CRNOSC_PRESETS_HPP
#define CRNOSC_PRESETS_HPP

// Named scenario presets and JSON scenario-config resolution shared by the
// CLI and the test suite. Each preset carries the parameter block of the
// worked example it reproduces, its time span, and integrator settings that
// handle the example's stiffness.

#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sequencer.hpp"

namespace crnosc {

struct Preset {
    std::string name;
    std::string summary;
    enum class Kind { oscillator, clocked, counter, termination } kind;
    TerminationConfig::Variant variant = TerminationConfig::Variant::ByX1;
    std::map<std::string, double> params;
    std::pair<double, double> t_span{0.0, 0.0};
    IntegratorConfig integ;
    ScenarioOptions opts;
    std::vector<std::string> aliases;
};

inline const std::vector<Preset>& presets() {
    static const std::vector<Preset> table = [] {
        std::vector<Preset> v;

        Preset osc;
        osc.name = "example_3_2";
        osc.summary = "isolated relaxation oscillator x-y with f(x) = -x^3+6x^2-9x+5";
        osc.kind = Preset::Kind::oscillator;
        osc.params = {{"epsilon", 1e-3}, {"rho", 2.0}, {"mu", 0.0},
                      {"eta1", 1.0},     {"eta2", 1.0}};
        osc.t_span = {0.0, 30.0};
        v.push_back(osc);

        Preset clk;
        clk.name = "example_3_3";
        clk.summary = "oscillator driving the symmetric clock pair (U, V)";
        clk.kind = Preset::Kind::clocked;
        clk.params = {{"epsilon", 1e-3}, {"rho", 2.0}, {"mu", 0.0}, {"eta1", 0.01},
                      {"eta2", 10.0},    {"p", 2.0},   {"c", 400.0}};
        clk.t_span = {0.0, 200.0};
        v.push_back(clk);

        Preset ctr;
        ctr.name = "counter";
        ctr.summary = "clocked increment/copy counter, one increment per oscillation";
        ctr.kind = Preset::Kind::counter;
        ctr.params = clk.params;
        ctr.params["eta3"] = 0.35;
        ctr.t_span = {0.0, 110.0};
        v.push_back(ctr);

        Preset t1;
        t1.name = "terminate_by_x1";
        t1.summary = "counter with spontaneous termination watching x1 (species X3)";
        t1.kind = Preset::Kind::termination;
        t1.variant = TerminationConfig::Variant::ByX1;
        t1.params = {{"epsilon", 1e-3}, {"rho", 2.0},  {"mu", 0.0},   {"eta1", 0.01},
                     {"eta2", 10.0},    {"p", 2.0},    {"c", 5000.0}, {"eta3", 1.0},
                     {"eta4", 500.0},   {"eta5", 1.0}, {"n", 4.0}};
        t1.t_span = {0.0, 100.0};
        t1.integ.method = Method::stiff_implicit;
        t1.aliases = {"example_5_1"};
        v.push_back(t1);

        Preset t2 = t1;
        t2.name = "terminate_by_x2";
        t2.summary = "counter with spontaneous termination watching x2 (species X4)";
        t2.variant = TerminationConfig::Variant::ByX2;
        t2.aliases = {"example_5_2"};
        v.push_back(t2);

        return v;
    }();
    return table;
}

inline const Preset& find_preset(const std::string& name) {
    for (const Preset& p : presets()) {
        if (p.name == name) return p;
        for (const auto& a : p.aliases)
            if (a == name) return p;
    }
    std::string known;
    for (const Preset& p : presets()) known += (known.empty() ? "" : ", ") + p.name;
    throw std::invalid_argument("unknown preset \"" + name + "\" (known: " + known + ")");
}

// Builds the composed system for a preset from a fully resolved parameter map.
inline ComposedSystem build_preset_system(const Preset& p,
                                          const std::map<std::string, double>& pr) {
    auto get = [&](const char* k) { return pr.at(k); };
    RelaxationSpec osc;
    osc.epsilon = get("epsilon");
    osc.mu = get("mu");
    osc.lambda = pr.count("lambda") ? pr.at("lambda") : -get("rho");
    osc.eta1 = get("eta1");
    osc.eta2 = get("eta2");

    if (p.kind == Preset::Kind::oscillator) return compose_oscillator(osc);

    ClockSpec ck;
    ck.p = get("p");
    ck.c = get("c");
    ck.eta2 = get("eta2");
    if (p.kind == Preset::Kind::clocked) return compose_clocked(osc, ck);
    if (p.kind == Preset::Kind::counter) return build_counter_system(osc, ck, get("eta3"));

    TerminationConfig tc;
    tc.n = get("n");
    tc.eta4 = get("eta4");
    tc.variant = p.variant;
    if (pr.count("x_term_initial")) tc.x_term_initial = pr.at("x_term_initial");
    return build_termination_system(osc, ck, get("eta3"), tc, get("eta5"));
}

// --- scenario configs ------------------------------------------------------

struct ResolvedScenario {
    std::string name;
    ComposedSystem system;
    std::pair<double, double> t_span{0.0, 0.0};
    IntegratorConfig integ;
    ScenarioOptions opts;
};

namespace detail {

inline PolynomialOdeSystem inline_system_from_json(const nlohmann::json& js) {
    if (!js.contains("variables") || !js.contains("rhs"))
        throw std::invalid_argument("inline system needs \"variables\" and \"rhs\"");
    PolynomialOdeSystem sys;
    for (const auto& v : js.at("variables")) sys.variables.push_back(v.get<std::string>());
    sys.rhs.resize(sys.variables.size());
    for (const auto& [var, terms] : js.at("rhs").items()) {
        std::size_t vi = sys.var_index(var);
        for (const auto& jt : terms) {
            Monomial m;
            m.coeff = jt.at("coeff").get<double>();
            m.exps.assign(sys.variables.size(), 0);
            if (jt.contains("exps"))
                for (const auto& [ev, ec] : jt.at("exps").items())
                    m.exps[sys.var_index(ev)] = ec.get<unsigned>();
            sys.rhs[vi].push_back(m);
        }
    }
    sys.normalize();
    return sys;
}

inline void apply_integrator_json(IntegratorConfig& integ, const nlohmann::json& ji) {
    for (const auto& [k, val] : ji.items()) {
        if (k == "rel_tol")
            integ.rel_tol = val.get<double>();
        else if (k == "abs_tol")
            integ.abs_tol = val.get<double>();
        else if (k == "max_step")
            integ.max_step = val.get<double>();
        else if (k == "nonneg_clip")
            integ.nonneg_clip = val.get<bool>();
        else if (k == "method") {
            std::string m = val.get<std::string>();
            if (m == "explicit_adaptive")
                integ.method = Method::explicit_adaptive;
            else if (m == "stiff_implicit")
                integ.method = Method::stiff_implicit;
            else
                throw std::invalid_argument("unknown integrator method \"" + m +
                                            "\" (explicit_adaptive, stiff_implicit)");
        } else
            throw std::invalid_argument("unknown integrator option \"" + k + "\"");
    }
}

} // namespace detail

// Turns a scenario config document into a ready-to-run scenario. Keys:
//   preset      name or alias (exclusive with system)
//   system      inline polynomial ODEs {variables, rhs, initial?}
//   parameters  {name: value} overrides of the preset's declared parameters
//   initial     {species: value} overrides
//   t_span      [t0, t1]
//   integrator  {rel_tol, abs_tol, max_step, method, nonneg_clip}
//   symmetry    {low_tol, high_floor, min_uv_bound}
//   assertions  bool
inline ResolvedScenario resolve_scenario(const nlohmann::json& cfg) {
    static const std::set<std::string> known_keys = {
        "preset", "system", "parameters", "initial", "t_span",
        "integrator", "symmetry", "assertions"};
    for (const auto& [k, v] : cfg.items())
        if (!known_keys.count(k))
            throw std::invalid_argument("unknown config key \"" + k + "\"");
    if (cfg.contains("preset") == cfg.contains("system"))
        throw std::invalid_argument("config needs exactly one of \"preset\" or \"system\"");

    ResolvedScenario rs;
    if (cfg.contains("preset")) {
        const Preset& p = find_preset(cfg.at("preset").get<std::string>());
        rs.name = p.name;
        rs.t_span = p.t_span;
        rs.integ = p.integ;
        rs.opts = p.opts;

        std::map<std::string, double> params = p.params;
        std::set<std::string> allowed;
        for (const auto& [k, v] : params) allowed.insert(k);
        allowed.insert("lambda");
        if (p.kind == Preset::Kind::termination) allowed.insert("x_term_initial");
        if (cfg.contains("parameters"))
            for (const auto& [k, v] : cfg.at("parameters").items()) {
                if (!allowed.count(k))
                    throw std::invalid_argument("parameter \"" + k +
                                                "\" is not declared by preset " + p.name);
                params[k] = v.get<double>();
            }
        rs.system = build_preset_system(p, params);
        rs.system.params.insert(params.begin(), params.end());
    } else {
        rs.name = "inline";
        const nlohmann::json& js = cfg.at("system");
        PolynomialOdeSystem sys = detail::inline_system_from_json(js);
        rs.system.network = crn_from_polynomial_odes(sys); // realizability gate
        rs.system.odes = sys;
        rs.system.initial.assign(sys.n_vars(), 0.0);
        if (js.contains("initial"))
            for (const auto& [k, v] : js.at("initial").items())
                rs.system.initial[sys.var_index(k)] = v.get<double>();
        rs.t_span = {0.0, 10.0};
        if (cfg.contains("parameters") && !cfg.at("parameters").empty())
            throw std::invalid_argument("inline systems declare no parameters to override");
    }

    if (cfg.contains("initial"))
        for (const auto& [k, v] : cfg.at("initial").items()) {
            if (!rs.system.odes.has_var(k))
                throw std::invalid_argument("initial override names unknown species \"" +
                                            k + "\"");
            rs.system.initial[rs.system.var(k)] = v.get<double>();
        }

    if (cfg.contains("t_span")) {
        const auto& ts = cfg.at("t_span");
        if (!ts.is_array() || ts.size() != 2)
            throw std::invalid_argument("t_span must be [t0, t1]");
        rs.t_span = {ts[0].get<double>(), ts[1].get<double>()};
    }
    if (!(rs.t_span.second > rs.t_span.first))
        throw std::invalid_argument("t_span must have t1 > t0");

    if (cfg.contains("integrator")) detail::apply_integrator_json(rs.integ, cfg.at("integrator"));
    rs.integ.validate();

    if (cfg.contains("symmetry"))
        for (const auto& [k, v] : cfg.at("symmetry").items()) {
            if (k == "low_tol")
                rs.opts.sym_low_tol = v.get<double>();
            else if (k == "high_floor")
                rs.opts.sym_high_floor = v.get<double>();
            else if (k == "min_uv_bound")
                rs.opts.min_uv_bound = v.get<double>();
            else
                throw std::invalid_argument("unknown symmetry option \"" + k + "\"");
        }
    if (cfg.contains("assertions")) rs.opts.assertions = cfg.at("assertions").get<bool>();
    return rs;
}

// Default output directory: $CRNOSC_OUT_DIR when set, else the working directory.
inline std::string default_out_dir() {
    const char* env = std::getenv("CRNOSC_OUT_DIR");
    return env && *env ? env : ".";
}

} // namespace crnosc

#endif
