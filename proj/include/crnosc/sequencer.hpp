#ifndef CRNOSC_SEQUENCER_HPP
#define CRNOSC_SEQUENCER_HPP

// Sequencing reaction modules with clock catalysts: gating, the counter
// (two increment/copy modules driven in antiphase by U and V), and
// spontaneous loop termination through a truncated-subtraction species
// that collapses once the counter passes a preset number of loops.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clock.hpp"
#include "crn.hpp"
#include "integrate.hpp"
#include "oscillator.hpp"

namespace crnosc {

// --- gating -----------------------------------------------------------------

struct GatedModule {
    ReactionNetwork base;
    std::vector<std::string> gates;
    double scale = 1.0;
    ReactionNetwork network;
};

// Adds every gate species to both sides of every reaction and scales the
// rates, so the gated module's ODEs are the base ODEs times scale times the
// product of gate concentrations.
inline GatedModule gate_module(const ReactionNetwork& base,
                               const std::vector<std::string>& gates, double scale) {
    if (!(scale > 0.0))
        throw std::invalid_argument("gate scale must be positive");
    for (const auto& g : gates)
        if (base.has_species(g))
            throw std::invalid_argument("gate species " + g + " already occurs in the base module");

    GatedModule out;
    out.base = base;
    out.gates = gates;
    out.scale = scale;
    out.network = base;
    std::vector<SpeciesIndex> gidx;
    for (const auto& g : gates) gidx.push_back(out.network.ensure_species(g));
    for (Reaction& r : out.network.reactions) {
        for (SpeciesIndex g : gidx) {
            r.reactants.stoich[g] += 1;
            r.products.stoich[g] += 1;
        }
        r.rate_constant *= scale;
    }
    return out;
}

// --- module fragments ---------------------------------------------------------

// d(x2)/dt = x1 + 1 - x2 at unit rate, the "+= 1" module. The constant
// inflow realizes the unit-concentration catalyst folded into the rate.
inline ReactionNetwork increment_module(const std::string& x1, const std::string& x2) {
    ReactionNetwork net;
    SpeciesIndex i1 = net.ensure_species(x1);
    SpeciesIndex i2 = net.ensure_species(x2);
    Complex c1, c2, c12, empty;
    c1.stoich[i1] = 1;
    c2.stoich[i2] = 1;
    c12.stoich[i1] = 1;
    c12.stoich[i2] = 1;
    net.reactions.push_back(Reaction{c1, c12, 1.0});   // X1 -> X1 + X2
    net.reactions.push_back(Reaction{empty, c2, 1.0}); // 0 -> X2
    net.reactions.push_back(Reaction{c2, empty, 1.0}); // X2 -> 0
    return net;
}

// d(x1)/dt = x2 - x1 at unit rate, the copy-back module.
inline ReactionNetwork copy_module(const std::string& x1, const std::string& x2) {
    ReactionNetwork net;
    SpeciesIndex i1 = net.ensure_species(x1);
    SpeciesIndex i2 = net.ensure_species(x2);
    Complex c1, c2, c12, empty;
    c1.stoich[i1] = 1;
    c2.stoich[i2] = 1;
    c12.stoich[i1] = 1;
    c12.stoich[i2] = 1;
    net.reactions.push_back(Reaction{c2, c12, 1.0}); // X2 -> X1 + X2
    net.reactions.push_back(Reaction{c1, empty, 1.0}); // X1 -> 0
    return net;
}

// d(term)/dt = eta4 * (n - counter - term) * term, with the preset count n
// carried by the catalyst species N.
inline ReactionNetwork termination_module(const std::string& counter_species,
                                          const std::string& term_species, double eta4) {
    ReactionNetwork net;
    SpeciesIndex ni = net.ensure_species("N");
    SpeciesIndex ci = net.ensure_species(counter_species);
    SpeciesIndex ti = net.ensure_species(term_species);
    Complex n_t, n_2t, c_t, c, t, tt;
    n_t.stoich[ni] = 1;
    n_t.stoich[ti] = 1;
    n_2t.stoich[ni] = 1;
    n_2t.stoich[ti] = 2;
    c_t.stoich[ci] = 1;
    c_t.stoich[ti] = 1;
    c.stoich[ci] = 1;
    t.stoich[ti] = 1;
    tt.stoich[ti] = 2;
    net.reactions.push_back(Reaction{n_t, n_2t, eta4}); // N + T -> N + 2T
    net.reactions.push_back(Reaction{c_t, c, eta4});    // C + T -> C
    net.reactions.push_back(Reaction{tt, t, eta4});     // 2T -> T
    return net;
}

// --- composition -----------------------------------------------------------

struct TerminationConfig {
    enum class Variant { ByX1, ByX2 };
    double n = 4.0;
    double eta4 = 500.0;
    Variant variant = Variant::ByX1;
    double x_term_initial = -1.0; // < 0 means "default to n"

    void validate() const {
        if (!(n > 0.0)) throw std::invalid_argument("preset loop count n must be positive");
        if (!(eta4 > 0.0)) throw std::invalid_argument("eta4 must be positive");
    }
    double initial() const { return x_term_initial < 0.0 ? n : x_term_initial; }
    std::string term_species() const { return variant == Variant::ByX1 ? "X3" : "X4"; }
    std::string counter_species() const { return variant == Variant::ByX1 ? "X1" : "X2"; }
};

struct ComposedSystem {
    ReactionNetwork network;      // constants (N) explicit as catalyst species
    PolynomialOdeSystem odes;     // integration view, constants folded
    std::vector<double> initial;  // aligned with odes.variables
    std::map<std::string, double> params;

    std::optional<RelaxationSpec> osc;
    std::optional<ClockSpec> clock;
    bool has_counter = false;
    std::optional<TerminationConfig> term;

    std::size_t var(const std::string& name) const { return odes.var_index(name); }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["network"] = network_to_json(network);
        j["parameters"] = params;
        nlohmann::json init = nlohmann::json::object();
        for (std::size_t i = 0; i < odes.n_vars(); ++i) init[odes.variables[i]] = initial[i];
        if (network.has_species("N")) init["N"] = params.at("n");
        j["initial"] = init;
        return j;
    }
};

namespace detail {

inline void merge_network(ReactionNetwork& target, const ReactionNetwork& fragment) {
    std::vector<SpeciesIndex> remap(fragment.species.size());
    for (std::size_t i = 0; i < fragment.species.size(); ++i)
        remap[i] = target.ensure_species(fragment.species[i]);
    for (const Reaction& r : fragment.reactions) {
        Reaction m;
        m.rate_constant = r.rate_constant;
        for (const auto& [s, c] : r.reactants.stoich) m.reactants.stoich[remap[s]] = c;
        for (const auto& [s, c] : r.products.stoich) m.products.stoich[remap[s]] = c;
        target.reactions.push_back(std::move(m));
    }
}

inline void osc_params(const RelaxationSpec& osc, std::map<std::string, double>& p) {
    p["epsilon"] = osc.epsilon;
    p["mu"] = osc.mu;
    p["lambda"] = osc.lambda;
    p["eta1"] = osc.eta1;
    p["eta2"] = osc.eta2;
}

inline void finish_composition(ComposedSystem& sys) {
    sys.network.validate();
    PolynomialOdeSystem odes = derive_odes(sys.network);
    if (sys.network.has_species("N"))
        odes = fold_constant(odes, odes.var_index("N"), sys.params.at("n"));
    if (!validate_realizability(odes).ok)
        throw std::logic_error("composed system lost realizability"); // cannot happen
    sys.odes = std::move(odes);
}

} // namespace detail

// Oscillator alone: variables (X, Y), start (1, 1). The start sits on the
// fold that launches the high phase first, which fixes the V-before-U phase
// order downstream.
inline ComposedSystem compose_oscillator(const RelaxationSpec& osc) {
    osc.validate();
    ComposedSystem sys;
    sys.osc = osc;
    sys.network = crn_from_polynomial_odes(osc.xy_odes());
    detail::osc_params(osc, sys.params);
    detail::finish_composition(sys);
    sys.initial = {1.0, 1.0};
    return sys;
}

// Oscillator plus clock pair: variables (X, Y, U, V), clocks start at rest.
inline ComposedSystem compose_clocked(const RelaxationSpec& osc, const ClockSpec& clock) {
    ComposedSystem sys = compose_oscillator(osc);
    sys.clock = clock;
    detail::merge_network(sys.network, build_clock_reactions(clock, "X"));
    sys.params["p"] = clock.p;
    sys.params["c"] = clock.c;
    detail::finish_composition(sys);
    sys.initial = {1.0, 1.0, 0.0, 0.0};
    return sys;
}

// The counter: increment module gated by V, copy module gated by U.
// Variables (X, Y, U, V, X1, X2).
inline ComposedSystem build_counter_system(const RelaxationSpec& osc, const ClockSpec& clock,
                                           double eta3) {
    if (!(eta3 >= 0.0))
        throw std::invalid_argument("eta3 must be nonnegative");
    ValidationReport rep = validate_hypothesis(osc);
    if (!rep.ok) {
        std::string why = "oscillator hypothesis validation failed:";
        for (const auto& c : rep.checks)
            if (!c.passed) why += " [" + c.name + "] " + c.detail + ";";
        throw std::invalid_argument(why);
    }
    ComposedSystem sys = compose_clocked(osc, clock);
    sys.has_counter = true;
    sys.params["eta3"] = eta3;
    if (eta3 > 0.0) {
        detail::merge_network(sys.network,
                              gate_module(copy_module("X1", "X2"), {"U"}, eta3).network);
        detail::merge_network(sys.network,
                              gate_module(increment_module("X1", "X2"), {"V"}, eta3).network);
    } else {
        // zero gate scale: the counter species exist but never move
        sys.network.ensure_species("X1");
        sys.network.ensure_species("X2");
    }
    detail::finish_composition(sys);
    sys.initial = {1.0, 1.0, 0.0, 0.0, 0.0, 0.0};
    return sys;
}

// Counter plus termination: the primed counter pair is additionally gated by
// the termination species, which tracks n minus the chosen counter and
// collapses for good once that difference goes negative.
// Variables (X, Y, U, V, X1, X2, X3 or X4, X1', X2').
inline ComposedSystem build_termination_system(const RelaxationSpec& osc,
                                               const ClockSpec& clock, double eta3,
                                               const TerminationConfig& cfg, double eta5) {
    cfg.validate();
    if (!(cfg.initial() > 0.0))
        throw std::invalid_argument(
            "initial termination concentration must be positive: the truncated "
            "subtraction module holds zero forever once its species is exhausted");
    if (!(eta5 > 0.0))
        throw std::invalid_argument("eta5 must be positive");

    ComposedSystem sys = build_counter_system(osc, clock, eta3);
    sys.term = cfg;
    sys.params["n"] = cfg.n;
    sys.params["eta4"] = cfg.eta4;
    sys.params["eta5"] = eta5;

    const std::string ts = cfg.term_species();
    detail::merge_network(sys.network,
                          termination_module(cfg.counter_species(), ts, cfg.eta4));
    detail::merge_network(
        sys.network, gate_module(copy_module("X1'", "X2'"), {"U", ts}, eta5).network);
    detail::merge_network(
        sys.network, gate_module(increment_module("X1'", "X2'"), {"V", ts}, eta5).network);
    detail::finish_composition(sys);

    sys.initial.assign(sys.odes.n_vars(), 0.0);
    sys.initial[sys.var("X")] = 1.0;
    sys.initial[sys.var("Y")] = 1.0;
    sys.initial[sys.var(ts)] = cfg.initial();
    return sys;
}

// --- loop counting -----------------------------------------------------------

struct LoopCount {
    int count = 0;
    std::vector<double> levels;
    std::vector<std::pair<double, double>> runs; // [t_start, t_end] per plateau
};

// Plateaus of a counter trace: maximal runs of nodes where the stored
// derivative stays inside plateau_tol, kept when they last longer than 20%
// of the estimated period (median plateau spacing unless a hint is given).
// The loop count is the number of plateaus minus one, since the counter is
// born on its initial plateau.
inline LoopCount count_loops(const Trajectory& traj, std::size_t counter_idx,
                             double plateau_tol = 1e-3, double period_hint = 0.0) {
    if (counter_idx >= traj.n_vars())
        throw std::invalid_argument("counter index out of range");
    if (traj.size() < 2)
        throw std::invalid_argument("trajectory too short for loop counting");

    struct Run {
        std::size_t a, b;
    };
    std::vector<Run> runs;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        bool flat = std::fabs(traj.derivs[i][counter_idx]) < plateau_tol;
        if (!flat) continue;
        if (!runs.empty() && runs.back().b == i - 1)
            runs.back().b = i;
        else
            runs.push_back(Run{i, i});
    }
    // drop single-node runs, they carry no duration
    std::vector<Run> timed;
    for (const Run& r : runs)
        if (r.b > r.a) timed.push_back(r);

    double period = period_hint;
    if (period <= 0.0 && timed.size() >= 3) {
        std::vector<double> gaps;
        for (std::size_t i = 0; i + 1 < timed.size(); ++i) {
            double m0 = 0.5 * (traj.times[timed[i].a] + traj.times[timed[i].b]);
            double m1 = 0.5 * (traj.times[timed[i + 1].a] + traj.times[timed[i + 1].b]);
            gaps.push_back(m1 - m0);
        }
        std::sort(gaps.begin(), gaps.end());
        period = gaps[gaps.size() / 2];
    }

    LoopCount out;
    for (const Run& r : timed) {
        double dur = traj.times[r.b] - traj.times[r.a];
        if (period > 0.0 && dur <= 0.2 * period) continue;
        std::vector<double> vals;
        for (std::size_t i = r.a; i <= r.b; ++i) vals.push_back(traj.states[i][counter_idx]);
        std::sort(vals.begin(), vals.end());
        out.levels.push_back(vals[vals.size() / 2]);
        out.runs.emplace_back(traj.times[r.a], traj.times[r.b]);
    }
    if (out.levels.empty())
        throw std::invalid_argument("no plateaus found in the counter trace");
    out.count = static_cast<int>(out.levels.size()) - 1;
    return out;
}

// --- scenario driver ---------------------------------------------------------

struct ScenarioOptions {
    double sym_low_tol = 0.05;
    double sym_high_floor = 0.5;
    double min_uv_bound = 0.01;
    double period_rel_tol = 0.15;
    double level_abs_tol = 0.05;
    bool assertions = true;
};

struct ScenarioResult {
    Trajectory trajectory;
    nlohmann::json summary;
    bool ok = true;
    std::vector<std::string> failures;
};

inline ScenarioResult run_scenario(const ComposedSystem& sys,
                                   std::pair<double, double> t_span,
                                   const IntegratorConfig& integ,
                                   const ScenarioOptions& opts = {}) {
    ScenarioResult res;
    res.summary["parameters"] = sys.params;
    res.summary["t_span"] = {t_span.first, t_span.second};

    res.trajectory = integrate(sys.odes, sys.initial, t_span, integ);
    const Trajectory& traj = res.trajectory;
    res.summary["nodes"] = traj.size();
    if (traj.switched_to_stiff())
        res.summary["stiff_switch_time"] = traj.stiff_switch_time;

    auto check = [&](const std::string& name, bool passed, const std::string& detail) {
        nlohmann::json jc;
        jc["name"] = name;
        jc["passed"] = passed;
        jc["detail"] = detail;
        res.summary["assertions"].push_back(jc);
        if (!passed) {
            res.ok = false;
            res.failures.push_back(name + ": " + detail);
        }
    };
    res.summary["assertions"] = nlohmann::json::array();

    double t_est_low = 0.0, t_est_high = 0.0;
    if (sys.osc) {
        res.summary["hypothesis"] = validate_hypothesis(*sys.osc).to_json();
        std::tie(t_est_low, t_est_high) = estimate_period(*sys.osc);
        res.summary["period_estimate"] = {{"t_low", t_est_low}, {"t_high", t_est_high}};
        try {
            PeriodMeasurement pm = measure_period(traj, *sys.osc);
            res.summary["period_measured"] = {
                {"t_low", pm.t_low_mean},   {"t_low_sd", pm.t_low_sd},
                {"t_high", pm.t_high_mean}, {"t_high_sd", pm.t_high_sd},
                {"t_full", pm.t_full_mean}, {"t_full_sd", pm.t_full_sd},
                {"cycles", pm.n_full},      {"level", pm.level}};
            if (opts.assertions) {
                double dl = std::fabs(pm.t_low_mean - t_est_low) / t_est_low;
                double dh = std::fabs(pm.t_high_mean - t_est_high) / t_est_high;
                check("period_match",
                      dl < opts.period_rel_tol && dh < opts.period_rel_tol,
                      "measured (" + std::to_string(pm.t_low_mean) + ", " +
                          std::to_string(pm.t_high_mean) + ") vs estimated (" +
                          std::to_string(t_est_low) + ", " + std::to_string(t_est_high) + ")");
            }
        } catch (const std::invalid_argument& e) {
            res.summary["period_measured"] = {{"error", e.what()}};
        }
    }

    if (sys.clock) {
        try {
            SymmetryResult sym = verify_symmetry(traj, sys.var("U"), sys.var("V"),
                                                 opts.sym_low_tol, opts.sym_high_floor);
            res.summary["symmetry"] = {{"ok", sym.ok},
                                       {"reason", sym.reason},
                                       {"min_uv", sym.min_uv},
                                       {"segments", sym.segmentation.to_json()}};
            if (opts.assertions) {
                check("clock_symmetry", sym.ok, sym.reason.empty() ? "alternation holds" : sym.reason);
                check("clock_min_uv", sym.min_uv < opts.min_uv_bound,
                      "min(u,v) core statistic " + std::to_string(sym.min_uv));
            }
        } catch (const no_alternation_error& e) {
            res.summary["symmetry"] = {{"ok", false}, {"reason", e.what()}};
            if (opts.assertions) check("clock_symmetry", false, e.what());
        }
    }

    auto loops_json = [&](const LoopCount& lc) {
        nlohmann::json j;
        j["count"] = lc.count;
        j["levels"] = lc.levels;
        j["runs"] = nlohmann::json::array();
        for (auto& [a, b] : lc.runs) j["runs"].push_back({a, b});
        return j;
    };

    if (sys.has_counter) {
        double hint = t_est_low + t_est_high;
        try {
            LoopCount lc = count_loops(traj, sys.var("X1"), 1e-3, hint);
            res.summary["loops"] = loops_json(lc);
            if (opts.assertions) {
                bool integral = true;
                for (double lv : lc.levels)
                    integral = integral &&
                               std::fabs(lv - std::round(lv)) < opts.level_abs_tol;
                check("counter_staircase", integral,
                      "plateau levels near integers, count " + std::to_string(lc.count));
            }
        } catch (const std::invalid_argument& e) {
            res.summary["loops"] = {{"error", e.what()}};
            if (opts.assertions) check("counter_staircase", false, e.what());
        }
    }

    if (sys.term) {
        const std::string ts = sys.term->term_species();
        std::size_t ti = sys.var(ts);
        std::size_t p1 = sys.var("X1'");
        std::size_t p2 = sys.var("X2'");

        EventSpec drop;
        drop.variable = ti;
        drop.threshold = 1e-6;
        drop.direction = EventSpec::Direction::falling;
        std::vector<double> drops = detect_crossings(traj, drop);
        double halt_time = drops.empty() ? std::numeric_limits<double>::quiet_NaN()
                                         : drops.front();

        bool latch_ok = true;
        if (!drops.empty()) {
            for (std::size_t i = 0; i < traj.size(); ++i)
                if (traj.times[i] > halt_time && traj.states[i][ti] > 1e-6)
                    latch_ok = false;
        }

        double sup = 0.0;
        double t_tail = traj.t_begin() + 0.9 * (traj.t_end() - traj.t_begin());
        for (std::size_t i = 0; i < traj.size(); ++i)
            if (traj.times[i] >= t_tail)
                sup = std::max(sup, std::max(std::fabs(traj.derivs[i][p1]),
                                             std::fabs(traj.derivs[i][p2])));
        double term_final = traj.states.back()[ti];
        bool verdict = term_final < 1e-6 && sup < 1e-6;

        int rising_before = 0, falling_before = 0;
        double x_at_halt = 0.0;
        if (!drops.empty() && sys.osc) {
            CriticalManifold m = analyze_manifold(*sys.osc);
            double level = 0.5 * (m.x_m + m.x_M);
            EventSpec xev;
            xev.variable = sys.var("X");
            xev.threshold = level;
            xev.direction = EventSpec::Direction::rising;
            for (double t : detect_crossings(traj, xev))
                if (t < halt_time) ++rising_before;
            xev.direction = EventSpec::Direction::falling;
            for (double t : detect_crossings(traj, xev))
                if (t < halt_time) ++falling_before;
            x_at_halt = traj.sample(halt_time, sys.var("X"));
        }

        res.summary["termination"] = {
            {"verdict", verdict},
            {"x_term_final", term_final},
            {"halt_time", halt_time},
            {"latch", latch_ok},
            {"primed_deriv_sup_final_10pct", sup},
            {"x_at_halt", x_at_halt},
            {"high_phases_started_before_halt", rising_before},
            {"high_phases_ended_before_halt", falling_before},
            {"finals",
             {{"X1", traj.states.back()[sys.var("X1")]},
              {"X2", traj.states.back()[sys.var("X2")]},
              {"X1'", traj.states.back()[p1]},
              {"X2'", traj.states.back()[p2]}}}};

        try {
            LoopCount lc1 = count_loops(traj, p1, 1e-3, t_est_low + t_est_high);
            res.summary["loops_primed_x1"] = loops_json(lc1);
        } catch (const std::invalid_argument& e) {
            res.summary["loops_primed_x1"] = {{"error", e.what()}};
        }
        try {
            LoopCount lc2 = count_loops(traj, p2, 1e-3, t_est_low + t_est_high);
            res.summary["loops_primed_x2"] = loops_json(lc2);
        } catch (const std::invalid_argument& e) {
            res.summary["loops_primed_x2"] = {{"error", e.what()}};
        }

        if (opts.assertions) {
            check("termination_verdict", verdict,
                  "x_term final " + std::to_string(term_final) +
                      ", primed derivative sup " + std::to_string(sup));
            check("termination_latch", latch_ok, "x_term stays below 1e-6 after its drop");
        }
    }

    res.summary["ok"] = res.ok;
    return res;
}

} // namespace crnosc

#endif
