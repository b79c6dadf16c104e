#ifndef CRNOSC_CLOCK_HPP
#define CRNOSC_CLOCK_HPP

// Symmetric clock signals by truncated subtraction. Two species U and V
// relax toward p - x and x - p through fast mutual annihilation:
//
//   du/dt = eta2 * (p - u - c*u*v)
//   dv/dt = eta2 * (x - v - c*u*v)
//
// For large c exactly one of them is held near zero at a time, so U marks
// the low phase of the oscillator input x and V the high phase.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crn.hpp"
#include "integrate.hpp"

namespace crnosc {

struct ClockSpec {
    double p = 2.0;     // comparison threshold
    double c = 400.0;   // annihilation strength; c = 0 decouples the pair
    double eta2 = 10.0; // relaxation rate

    void validate() const {
        if (!(p > 0.0)) throw std::invalid_argument("clock threshold p must be positive");
        if (c < 0.0) throw std::invalid_argument("annihilation strength c must be >= 0");
        if (!(eta2 > 0.0)) throw std::invalid_argument("eta2 must be positive");
    }
};

struct ClockEquilibrium {
    double u_exact = 0.0, v_exact = 0.0;
    double u_approx = 0.0, v_approx = 0.0;
};

// Equilibrium of the clock pair for a frozen input x. The exact value is the
// positive root of v^2 + (p - x + 1/c) v - x/c = 0 together with
// u - v = p - x; the approximate branch is the ideal truncated subtraction.
inline ClockEquilibrium truncated_subtraction_equilibrium(double p, double x, double c) {
    if (!(p > 0.0) || !(c > 0.0))
        throw std::invalid_argument("truncated_subtraction_equilibrium needs p > 0 and c > 0");
    if (x < 0.0)
        throw std::invalid_argument("input level x must be nonnegative");
    ClockEquilibrium eq;
    double b_v = p - x + 1.0 / c;
    double b_u = x - p + 1.0 / c;
    // the u and v quadratics share their discriminant; picking the
    // algebraically stable form of each positive root keeps both exact
    // through the near-total annihilation at large c
    double disc = std::sqrt(b_v * b_v + 4.0 * x / c);
    eq.v_exact = b_v >= 0.0 ? (2.0 * x / c) / (b_v + disc) : 0.5 * (disc - b_v);
    eq.u_exact = b_u >= 0.0 ? (2.0 * p / c) / (b_u + disc) : 0.5 * (disc - b_u);
    eq.u_approx = std::max(p - x, 0.0);
    eq.v_approx = std::max(x - p, 0.0);
    return eq;
}

// The clock as a reaction fragment. The input species is only read (it
// appears as a catalyst), so the fragment composes with whatever produces it.
inline ReactionNetwork build_clock_reactions(const ClockSpec& spec,
                                             const std::string& input_species = "X") {
    spec.validate();
    ReactionNetwork net;
    SpeciesIndex xi = net.ensure_species(input_species);
    SpeciesIndex ui = net.ensure_species("U");
    SpeciesIndex vi = net.ensure_species("V");

    auto add = [&](Complex r, Complex p, double k) {
        net.reactions.push_back(Reaction{std::move(r), std::move(p), k});
    };
    Complex empty;
    Complex cu, cv, cuv, cx, cxv;
    cu.stoich[ui] = 1;
    cv.stoich[vi] = 1;
    cuv.stoich[ui] = 1;
    cuv.stoich[vi] = 1;
    cx.stoich[xi] = 1;
    cxv.stoich[xi] = 1;
    cxv.stoich[vi] = 1;

    add(empty, cu, spec.eta2 * spec.p); // 0 -> U
    add(cu, empty, spec.eta2);          // U -> 0
    add(cx, cxv, spec.eta2);            // X -> X + V, input coupling
    add(cv, empty, spec.eta2);          // V -> 0
    if (spec.c > 0.0) {
        add(cuv, cv, spec.eta2 * spec.c); // U + V -> V
        add(cuv, cu, spec.eta2 * spec.c); // U + V -> U
    }
    net.validate();
    return net;
}

// --- alternation analysis ---------------------------------------------------

struct no_alternation_error : std::runtime_error {
    explicit no_alternation_error(const std::string& what) : std::runtime_error(what) {}
};

struct PhaseSegment {
    double t_start = 0.0, t_end = 0.0;
    char active = '?';   // 'U' or 'V'
    bool complete = false; // bounded by transitions on both sides
    double low_max = 0.0;  // max of the inactive signal over the trimmed core
    double high_min = 0.0; // min of the active signal over the trimmed core
};

struct PhaseSegmentation {
    std::vector<PhaseSegment> segments;

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& s : segments) {
            nlohmann::json js;
            js["t_start"] = s.t_start;
            js["t_end"] = s.t_end;
            js["active"] = std::string(1, s.active);
            js["complete"] = s.complete;
            js["low_max"] = s.low_max;
            js["high_min"] = s.high_min;
            j.push_back(js);
        }
        return j;
    }
};

struct SymmetryResult {
    bool ok = false;
    std::string reason;
    double min_uv = 0.0; // worst min(u, v) over trimmed cores of complete segments
    PhaseSegmentation segmentation;
};

// Checks that u and v form strictly alternating one-hot phases after the
// transient. A sample is U-active when u > high_floor and v <= high_floor,
// V-active symmetrically, and a transition otherwise. Fails (ok = false)
// when a transition gap exceeds 5% of the longer neighbouring segment, when
// two segments of the same signal follow each other, or when the inactive
// signal pokes above low_tol inside a segment for more than a 5% sliver.
// Throws no_alternation_error when one of the signals never has a complete
// active segment at all.
inline SymmetryResult verify_symmetry(const Trajectory& traj, std::size_t u_idx,
                                      std::size_t v_idx, double low_tol, double high_floor,
                                      double transient_fraction = 0.2,
                                      std::size_t n_samples = 6000) {
    if (u_idx >= traj.n_vars() || v_idx >= traj.n_vars())
        throw std::invalid_argument("clock signal index out of range");
    if (!(low_tol > 0.0) || !(high_floor > low_tol))
        throw std::invalid_argument("need 0 < low_tol < high_floor");
    if (traj.size() < 2 || n_samples < 16)
        throw std::invalid_argument("trajectory too short for symmetry analysis");

    const double t0 = traj.t_begin() + transient_fraction * (traj.t_end() - traj.t_begin());
    const double t1 = traj.t_end();
    const double dt = (t1 - t0) / static_cast<double>(n_samples - 1);

    std::vector<double> us(n_samples), vs(n_samples);
    std::vector<char> cls(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        double t = t0 + dt * static_cast<double>(i);
        us[i] = traj.sample(t, u_idx);
        vs[i] = traj.sample(t, v_idx);
        bool uhi = us[i] > high_floor, vhi = vs[i] > high_floor;
        cls[i] = (uhi && !vhi) ? 'U' : (vhi && !uhi) ? 'V' : '-';
    }

    struct Run {
        std::size_t a, b; // sample range [a, b]
        char cls;
    };
    std::vector<Run> runs;
    for (std::size_t i = 0; i < n_samples; ++i) {
        if (!runs.empty() && runs.back().cls == cls[i])
            runs.back().b = i;
        else
            runs.push_back(Run{i, i, cls[i]});
    }

    SymmetryResult res;
    auto run_time = [&](const Run& r, bool start) {
        return t0 + dt * static_cast<double>(start ? r.a : r.b);
    };

    std::vector<std::size_t> active; // indices into runs
    for (std::size_t i = 0; i < runs.size(); ++i)
        if (runs[i].cls != '-') active.push_back(i);

    std::size_t n_complete_u = 0, n_complete_v = 0;
    for (std::size_t ai : active) {
        const Run& r = runs[ai];
        PhaseSegment seg;
        seg.t_start = run_time(r, true);
        seg.t_end = run_time(r, false);
        seg.active = r.cls;
        seg.complete = r.a > 0 && r.b < n_samples - 1;
        // trimmed core: drop 5% of the samples at each end
        std::size_t len = r.b - r.a + 1;
        std::size_t trim = len / 20;
        double lo_max = 0.0, hi_min = std::numeric_limits<double>::infinity();
        for (std::size_t i = r.a + trim; i + trim <= r.b; ++i) {
            double act = r.cls == 'U' ? us[i] : vs[i];
            double inact = r.cls == 'U' ? vs[i] : us[i];
            lo_max = std::max(lo_max, inact);
            hi_min = std::min(hi_min, act);
        }
        seg.low_max = lo_max;
        seg.high_min = std::isfinite(hi_min) ? hi_min : 0.0;
        res.segmentation.segments.push_back(seg);
        if (seg.complete) (r.cls == 'U' ? n_complete_u : n_complete_v) += 1;
    }

    if (n_complete_u == 0 || n_complete_v == 0)
        throw no_alternation_error(
            n_complete_u == 0 && n_complete_v == 0
                ? "neither signal forms a complete active segment"
                : std::string("signal ") + (n_complete_u == 0 ? "U" : "V") +
                      " never forms a complete active segment");

    res.ok = true;
    auto fail = [&](const std::string& why) {
        if (res.ok) res.reason = why;
        res.ok = false;
    };

    // signals must strictly alternate
    for (std::size_t k = 0; k + 1 < active.size(); ++k)
        if (runs[active[k]].cls == runs[active[k + 1]].cls)
            fail("two consecutive segments carry the same signal");

    // transition gaps must be short next to their neighbours
    for (std::size_t k = 0; k + 1 < active.size(); ++k) {
        const Run& a = runs[active[k]];
        const Run& b = runs[active[k + 1]];
        double gap = run_time(b, true) - run_time(a, false);
        double neighbour = std::max(run_time(a, false) - run_time(a, true),
                                    run_time(b, false) - run_time(b, true));
        if (gap >= 0.05 * neighbour) {
            fail("transition gap of " + std::to_string(gap) +
                 " next to a segment of " + std::to_string(neighbour));
            break;
        }
    }

    // inside a complete segment the inactive signal stays below low_tol,
    // short boundary slivers excepted
    double worst_minuv = 0.0;
    for (std::size_t k = 0; k < active.size(); ++k) {
        const Run& r = runs[active[k]];
        std::size_t seg_idx = k;
        if (!res.segmentation.segments[seg_idx].complete) continue;
        std::size_t len = r.b - r.a + 1;
        std::size_t sliver_budget = len / 20;
        std::size_t cur = 0, worst = 0;
        for (std::size_t i = r.a; i <= r.b; ++i) {
            double inact = r.cls == 'U' ? vs[i] : us[i];
            if (inact >= low_tol)
                worst = std::max(worst, ++cur);
            else
                cur = 0;
        }
        if (worst > sliver_budget)
            fail("inactive signal exceeds low_tol for " + std::to_string(worst) +
                 " consecutive samples inside a segment of " + std::to_string(len));
        std::size_t trim = len / 20;
        for (std::size_t i = r.a + trim; i + trim <= r.b; ++i)
            worst_minuv = std::max(worst_minuv, std::min(us[i], vs[i]));
    }
    res.min_uv = worst_minuv;
    return res;
}

// Percentile-based default thresholds: low_tol at 5% and high_floor at 50%
// of the joint signal amplitude.
inline std::pair<double, double> default_symmetry_thresholds(const Trajectory& traj,
                                                             std::size_t u_idx,
                                                             std::size_t v_idx) {
    std::vector<double> all;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        all.push_back(traj.states[i][u_idx]);
        all.push_back(traj.states[i][v_idx]);
    }
    std::sort(all.begin(), all.end());
    double hi = all[static_cast<std::size_t>(0.95 * (all.size() - 1))];
    if (!(hi > 0.0))
        throw std::invalid_argument("signals carry no amplitude to derive thresholds from");
    return {0.05 * hi, 0.5 * hi};
}

inline SymmetryResult verify_symmetry(const Trajectory& traj, std::size_t u_idx,
                                      std::size_t v_idx) {
    auto [low_tol, high_floor] = default_symmetry_thresholds(traj, u_idx, v_idx);
    return verify_symmetry(traj, u_idx, v_idx, low_tol, high_floor);
}

} // namespace crnosc

#endif
