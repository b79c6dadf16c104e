#ifndef CRNOSC_OSCILLATOR_HPP
#define CRNOSC_OSCILLATOR_HPP

// The relaxation oscillator cell. The planar system is
//
//   eps * dx/dt = eta1*eta2 * (f(x) - y) * x * eps_scaling   (fast)
//        dy/dt = eta1*eta2 * (x + mu*y + lambda) * y          (slow)
//
// written throughout in its realizable polynomial form. analyze_manifold
// locates the two folds of the critical manifold y = f(x), singular_orbit
// builds the limiting discontinuous cycle, validate_hypothesis checks the
// geometric conditions that make the relaxation limit cycle exist, and
// estimate_period evaluates the slow-drift time integrals along each branch.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crn.hpp"
#include "integrate.hpp"
#include "poly.hpp"
#include "quadrature.hpp"

namespace crnosc {

struct RelaxationSpec {
    // f(x) = sum_k f_coeffs[k] x^k, the fast nullcline height
    std::vector<double> f_coeffs{5.0, -9.0, 6.0, -1.0};
    double mu = 0.0;
    double lambda = -2.0;
    double epsilon = 1e-3;
    double eta1 = 1.0;
    double eta2 = 1.0;

    void validate() const {
        if (poly::degree(f_coeffs) < 3)
            throw std::invalid_argument("f must have degree >= 3");
        if (!(epsilon > 0.0) || !(eta1 > 0.0) || !(eta2 > 0.0))
            throw std::invalid_argument("epsilon, eta1, eta2 must be positive");
    }

    double f(double x) const { return poly::eval(f_coeffs, x); }
    double fprime(double x) const { return poly::eval(poly::derivative(f_coeffs), x); }
    double slow_line(double x, double y) const { return x + mu * y + lambda; }

    // Realizable polynomial form on variables {X, Y}:
    //   dX/dt = (eta1*eta2/eps) * (f(X)*X - X*Y)
    //   dY/dt = eta1*eta2 * (X*Y + mu*Y^2 + lambda*Y)
    // Every negative term carries the variable it drains, so the system maps
    // directly onto a mass-action network.
    PolynomialOdeSystem xy_odes() const {
        validate();
        PolynomialOdeSystem sys;
        sys.variables = {"X", "Y"};
        sys.rhs.assign(2, {});
        double fast = eta1 * eta2 / epsilon;
        for (std::size_t k = 0; k < f_coeffs.size(); ++k) {
            if (f_coeffs[k] == 0.0) continue;
            sys.rhs[0].push_back(
                Monomial{fast * f_coeffs[k], {static_cast<unsigned>(k + 1), 0u}});
        }
        sys.rhs[0].push_back(Monomial{-fast, {1u, 1u}});
        double slow = eta1 * eta2;
        sys.rhs[1].push_back(Monomial{slow, {1u, 1u}});
        if (mu != 0.0) sys.rhs[1].push_back(Monomial{slow * mu, {0u, 2u}});
        if (lambda != 0.0) sys.rhs[1].push_back(Monomial{slow * lambda, {0u, 1u}});
        sys.normalize();
        return sys;
    }
};

// The two fold points of the cubic-like nullcline: the local minimum
// (x_m, y_m) and the local maximum (x_M, y_M), with x_m < x_M and y_m < y_M.
struct CriticalManifold {
    double x_m = 0.0, y_m = 0.0;
    double x_M = 0.0, y_M = 0.0;
};

inline CriticalManifold analyze_manifold(const RelaxationSpec& spec) {
    spec.validate();
    std::vector<double> df = poly::derivative(spec.f_coeffs);
    std::vector<double> crit = poly::real_roots(df);
    if (crit.size() != 2)
        throw std::invalid_argument(
            "critical manifold must have exactly two fold points, found " +
            std::to_string(crit.size()));
    std::vector<double> d2f = poly::derivative(df);
    double scale = poly::eval_scale(d2f, std::max(std::fabs(crit[0]), std::fabs(crit[1])));
    double c0 = poly::eval(d2f, crit[0]);
    double c1 = poly::eval(d2f, crit[1]);
    if (std::fabs(c0) <= 1e-9 * scale || std::fabs(c1) <= 1e-9 * scale)
        throw std::invalid_argument("degenerate fold: f'' vanishes at a critical point");
    if (!(c0 > 0.0) || !(c1 < 0.0))
        throw std::invalid_argument(
            "fold orientation is wrong: need a minimum fold left of a maximum fold");
    CriticalManifold m;
    m.x_m = crit[0];
    m.y_m = spec.f(crit[0]);
    m.x_M = crit[1];
    m.y_M = spec.f(crit[1]);
    if (!(m.y_m < m.y_M))
        throw std::invalid_argument("fold heights are not ordered");
    return m;
}

// Corners of the singular (eps -> 0) cycle: slow drift A -> B down the left
// branch, jump B -> C, slow drift C -> D up the right branch, jump D -> A.
struct SingularOrbit {
    double x_A = 0.0, x_C = 0.0;
    std::array<double, 2> A{}, B{}, C{}, D{};
};

namespace detail {

// Root of f(x) = level inside [lo, hi], assuming f is monotone there.
inline double branch_root(const RelaxationSpec& spec, double level, double lo, double hi) {
    std::vector<double> g = spec.f_coeffs;
    g[0] -= level;
    double flo = poly::eval(g, lo), fhi = poly::eval(g, hi);
    if (std::fabs(flo) <= 1e-13 * poly::eval_scale(g, lo)) return lo;
    if (std::fabs(fhi) <= 1e-13 * poly::eval_scale(g, hi)) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw std::invalid_argument("no bracketing root on the requested branch");
    return poly::detail::refine_root(g, poly::derivative(g), lo, hi);
}

} // namespace detail

inline SingularOrbit singular_orbit(const RelaxationSpec& spec, const CriticalManifold& m) {
    SingularOrbit orb;
    // Left branch: f decreases onto the fold, so f(x) = y_M has one root
    // there. Expand the bracket leftward until it straddles the level.
    double span = std::max(1.0, m.x_M - m.x_m);
    double lo = m.x_m - span;
    int tries = 0;
    while (spec.f(lo) < m.y_M) {
        lo -= span;
        span *= 2.0;
        if (++tries > 60)
            throw std::invalid_argument("no drop-off point on the left branch");
    }
    orb.x_A = detail::branch_root(spec, m.y_M, lo, m.x_m);
    if (std::fabs(orb.x_A) < 1e-12) orb.x_A = 0.0; // orbit touching the x = 0 wall is fine

    // Right branch: f decreases past the maximum fold; f(x) = y_m has one root.
    span = std::max(1.0, m.x_M - m.x_m);
    double hi = m.x_M + span;
    tries = 0;
    while (spec.f(hi) > m.y_m) {
        hi += span;
        span *= 2.0;
        if (++tries > 60)
            throw std::invalid_argument("no drop-off point on the right branch");
    }
    orb.x_C = detail::branch_root(spec, m.y_m, m.x_M, hi);

    orb.A = {orb.x_A, m.y_M};
    orb.B = {m.x_m, m.y_m};
    orb.C = {orb.x_C, m.y_m};
    orb.D = {m.x_M, m.y_M};
    return orb;
}

inline SingularOrbit singular_orbit(const RelaxationSpec& spec) {
    return singular_orbit(spec, analyze_manifold(spec));
}

struct HypothesisCheck {
    std::string name;
    bool passed = false;
    double margin = 0.0;
    std::string detail;
};

struct ValidationReport {
    bool ok = false;
    std::vector<HypothesisCheck> checks;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["ok"] = ok;
        j["checks"] = nlohmann::json::array();
        for (const auto& c : checks) {
            nlohmann::json jc;
            jc["name"] = c.name;
            jc["passed"] = c.passed;
            jc["margin"] = c.margin;
            jc["detail"] = c.detail;
            j["checks"].push_back(jc);
        }
        return j;
    }
};

// Geometric conditions for the relaxation limit cycle: two nondegenerate
// folds with the right orientation, a singular orbit inside the closed first
// quadrant with margin, a unique equilibrium on the repelling middle branch
// kept away from both folds (10% canard margin), correct slow drift
// directions on the outer branches, and mu <= 0.
inline ValidationReport validate_hypothesis(const RelaxationSpec& spec) {
    ValidationReport rep;
    auto add = [&](const std::string& name, bool ok, double margin, std::string detail) {
        rep.checks.push_back(HypothesisCheck{name, ok, margin, std::move(detail)});
    };

    CriticalManifold m;
    bool have_manifold = false;
    try {
        m = analyze_manifold(spec);
        have_manifold = true;
        add("fold_geometry", true, m.y_M - m.y_m,
            "folds (" + std::to_string(m.x_m) + ", " + std::to_string(m.y_m) + ") and (" +
                std::to_string(m.x_M) + ", " + std::to_string(m.y_M) + ")");
    } catch (const std::invalid_argument& e) {
        add("fold_geometry", false, 0.0, e.what());
    }

    SingularOrbit orb;
    bool have_orbit = false;
    if (have_manifold) {
        try {
            orb = singular_orbit(spec, m);
            have_orbit = true;
            double band = 0.1 * (m.y_M - m.y_m);
            bool quad = orb.x_A >= 0.0 && (m.y_m - band) > 0.0;
            double margin = std::min(orb.x_A, m.y_m - band);
            add("first_quadrant", quad, margin,
                quad ? "singular orbit and margin band stay in the first quadrant"
                     : "singular orbit leaves the first quadrant (x_A = " +
                           std::to_string(orb.x_A) + ", y_m = " + std::to_string(m.y_m) + ")");
        } catch (const std::invalid_argument& e) {
            add("first_quadrant", false, 0.0, e.what());
        }
    }

    if (have_manifold) {
        // equilibria on the manifold: roots of x + mu*f(x) + lambda
        std::vector<double> h = spec.f_coeffs;
        for (double& c : h) c *= spec.mu;
        if (h.size() < 2) h.resize(2, 0.0);
        h[0] += spec.lambda;
        h[1] += 1.0;
        std::vector<double> eq;
        if (poly::degree(h) >= 1)
            eq = poly::real_roots(h);
        double canard = 0.1 * (m.x_M - m.x_m);
        std::size_t inside = 0;
        double worst = std::numeric_limits<double>::infinity();
        bool off_branch = false;
        for (double x : eq) {
            if (x > m.x_m && x < m.x_M) {
                ++inside;
                worst = std::min(worst, std::min(x - m.x_m, m.x_M - x));
            } else {
                off_branch = true;
            }
        }
        bool ok = inside == 1 && !off_branch && worst >= canard;
        std::string detail;
        if (off_branch)
            detail = "equilibrium lies on an attracting outer branch";
        else if (inside != 1)
            detail = "expected exactly one equilibrium on the middle branch, found " +
                     std::to_string(inside);
        else if (worst < canard)
            detail = "equilibrium sits within the canard margin of a fold";
        else
            detail = "unique middle-branch equilibrium, fold distance " + std::to_string(worst);
        add("equilibrium_position", ok, inside == 1 ? worst - canard : 0.0, detail);
    }

    if (have_orbit) {
        double xl = 0.5 * (orb.x_A + m.x_m);
        double xr = 0.5 * (m.x_M + orb.x_C);
        double gl = spec.slow_line(xl, spec.f(xl));
        double gr = spec.slow_line(xr, spec.f(xr));
        bool ok = gl < 0.0 && gr > 0.0;
        add("slow_drift_direction", ok, std::min(-gl, gr),
            ok ? "y falls along the left branch and rises along the right branch"
               : "slow drift does not push the state around the cycle");
    }

    {
        bool ok = spec.mu <= 0.0;
        add("mu_sign", ok, -spec.mu, ok ? "mu <= 0" : "mu must be nonpositive");
    }

    rep.ok = true;
    for (const auto& c : rep.checks) rep.ok = rep.ok && c.passed;
    return rep;
}

// Slow-drift travel times along the two attracting branches of the singular
// cycle. Mass conservation along y = f(x) turns the drift into
// dx/dt = f'(x)^{-1} * dy/dt, so each duration is an explicit integral in x.
inline std::pair<double, double> estimate_period(const RelaxationSpec& spec) {
    spec.validate();
    CriticalManifold m = analyze_manifold(spec);
    SingularOrbit orb = singular_orbit(spec, m);

    auto integrand = [&](double x) {
        double fx = spec.f(x);
        double denom = spec.eta1 * spec.eta2 * spec.slow_line(x, fx) * fx;
        return spec.fprime(x) / denom;
    };

    // The integrand blows up where the slow drift or f vanishes; neither may
    // happen strictly inside a branch interval.
    auto check_clear = [&](double a, double b) {
        double lo = std::min(a, b), hi = std::max(a, b);
        double tol = 1e-10 * (hi - lo);
        std::vector<double> h = spec.f_coeffs;
        for (double& c : h) c *= spec.mu;
        if (h.size() < 2) h.resize(2, 0.0);
        h[0] += spec.lambda;
        h[1] += 1.0;
        for (const std::vector<double>& q : {h, spec.f_coeffs}) {
            if (poly::degree(q) < 1) continue;
            for (double r : poly::real_roots(q))
                if (r > lo + tol && r < hi - tol)
                    throw std::invalid_argument(
                        "period integrand is singular inside a branch interval (x = " +
                        std::to_string(r) + ")");
        }
    };
    check_clear(orb.x_A, m.x_m);
    check_clear(orb.x_C, m.x_M);

    double t_low = adaptive_gauss(integrand, orb.x_A, m.x_m, 1e-9);
    double t_high = adaptive_gauss(integrand, orb.x_C, m.x_M, 1e-9);
    if (!(t_low > 0.0) || !(t_high > 0.0))
        throw std::invalid_argument("branch travel times are not positive");
    return {t_low, t_high};
}

struct PeriodMeasurement {
    double t_low_mean = 0.0, t_low_sd = 0.0;
    double t_high_mean = 0.0, t_high_sd = 0.0;
    double t_full_mean = 0.0, t_full_sd = 0.0;
    int n_low = 0, n_high = 0, n_full = 0;
    double level = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    double sd = v.size() > 1 ? std::sqrt(acc / static_cast<double>(v.size() - 1)) : 0.0;
    return {mean, sd};
}

} // namespace detail

// Dwell times from mid-level crossings of the fast variable, discarding the
// first transient_fraction of the span. Low dwell = falling to next rising,
// high dwell = rising to next falling, full period = rising to rising.
inline PeriodMeasurement measure_period(const Trajectory& traj, std::size_t x_index,
                                        double level, double transient_fraction = 0.2) {
    if (transient_fraction < 0.0 || transient_fraction >= 1.0)
        throw std::invalid_argument("transient fraction must lie in [0, 1)");
    double t_start = traj.t_begin() + transient_fraction * (traj.t_end() - traj.t_begin());

    EventSpec ev;
    ev.variable = x_index;
    ev.threshold = level;
    ev.direction = EventSpec::Direction::rising;
    std::vector<double> rising;
    for (double t : detect_crossings(traj, ev))
        if (t >= t_start) rising.push_back(t);
    ev.direction = EventSpec::Direction::falling;
    std::vector<double> falling;
    for (double t : detect_crossings(traj, ev))
        if (t >= t_start) falling.push_back(t);

    std::vector<double> low, high, full;
    for (std::size_t i = 0; i + 1 < rising.size(); ++i)
        full.push_back(rising[i + 1] - rising[i]);
    for (double tf : falling) {
        auto it = std::upper_bound(rising.begin(), rising.end(), tf);
        if (it != rising.end()) low.push_back(*it - tf);
    }
    for (double tr : rising) {
        auto it = std::upper_bound(falling.begin(), falling.end(), tr);
        if (it != falling.end()) high.push_back(*it - tr);
    }

    if (full.size() < 3 || low.size() < 3 || high.size() < 3)
        throw std::invalid_argument(
            "fewer than 3 full cycles after the transient; extend t_span");

    PeriodMeasurement out;
    out.level = level;
    std::tie(out.t_low_mean, out.t_low_sd) = detail::mean_sd(low);
    std::tie(out.t_high_mean, out.t_high_sd) = detail::mean_sd(high);
    std::tie(out.t_full_mean, out.t_full_sd) = detail::mean_sd(full);
    out.n_low = static_cast<int>(low.size());
    out.n_high = static_cast<int>(high.size());
    out.n_full = static_cast<int>(full.size());
    return out;
}

// Convenience overload: level midway between the folds, fast variable X.
inline PeriodMeasurement measure_period(const Trajectory& traj, const RelaxationSpec& spec) {
    CriticalManifold m = analyze_manifold(spec);
    std::size_t xi = 0;
    for (std::size_t i = 0; i < traj.names.size(); ++i)
        if (traj.names[i] == "X") { xi = i; break; }
    return measure_period(traj, xi, 0.5 * (m.x_m + m.x_M));
}

} // namespace crnosc

#endif
