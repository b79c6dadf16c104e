#ifndef CRNOSC_INTEGRATE_HPP
#define CRNOSC_INTEGRATE_HPP

// Adaptive ODE integration for polynomial vector fields. Two steppers:
//
//   * explicit_adaptive: Dormand-Prince 5(4) with PI step control and a
//     running stiffness estimate; when the estimate flags the problem as
//     stiff the run switches to the implicit stepper and continues.
//   * stiff_implicit: the Shampine-Reichelt linearly implicit Rosenbrock
//     pair (the ode23s scheme) with the exact monomial Jacobian.
//
// Accepted nodes (time, state, derivative) are stored in a Trajectory;
// between nodes the solution is reconstructed by cubic Hermite
// interpolation, which is what event detection refines against.

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crn.hpp"

namespace crnosc {

struct integration_error : std::runtime_error {
    explicit integration_error(const std::string& what) : std::runtime_error(what) {}
};

enum class Method { explicit_adaptive, stiff_implicit };

struct IntegratorConfig {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double max_step = 1.0;
    Method method = Method::explicit_adaptive;
    bool nonneg_clip = true;

    void validate() const {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
            throw std::invalid_argument("tolerances must be positive");
        if (!(max_step > 0.0))
            throw std::invalid_argument("max_step must be positive");
    }
};

struct Trajectory {
    std::vector<std::string> names;
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::vector<std::vector<double>> derivs;
    double stiff_switch_time = std::numeric_limits<double>::quiet_NaN();

    std::size_t size() const { return times.size(); }
    std::size_t n_vars() const { return names.size(); }
    bool switched_to_stiff() const { return !std::isnan(stiff_switch_time); }

    double t_begin() const { return times.front(); }
    double t_end() const { return times.back(); }

    // Index of the node interval containing t, i.e. times[i] <= t <= times[i+1].
    std::size_t interval_of(double t) const {
        if (times.size() < 2 || t < times.front() || t > times.back())
            throw std::invalid_argument("sample time outside trajectory span");
        auto it = std::upper_bound(times.begin(), times.end(), t);
        std::size_t i = static_cast<std::size_t>(it - times.begin());
        if (i > 0) --i;
        if (i >= times.size() - 1) i = times.size() - 2;
        return i;
    }

    // Cubic Hermite reconstruction of one variable at time t.
    double sample(double t, std::size_t var) const {
        std::size_t i = interval_of(t);
        double h = times[i + 1] - times[i];
        double s = (t - times[i]) / h;
        double s2 = s * s, s3 = s2 * s;
        double h00 = 2 * s3 - 3 * s2 + 1;
        double h10 = s3 - 2 * s2 + s;
        double h01 = -2 * s3 + 3 * s2;
        double h11 = s3 - s2;
        return h00 * states[i][var] + h10 * h * derivs[i][var] +
               h01 * states[i + 1][var] + h11 * h * derivs[i + 1][var];
    }

    std::vector<double> sample(double t) const {
        std::vector<double> out(n_vars());
        for (std::size_t v = 0; v < n_vars(); ++v) out[v] = sample(t, v);
        return out;
    }

    void to_csv(std::ostream& os) const {
        os << "t";
        for (const auto& n : names) os << "," << n;
        os << "\n";
        char buf[40];
        for (std::size_t i = 0; i < times.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.12g", times[i]);
            os << buf;
            for (std::size_t v = 0; v < n_vars(); ++v) {
                std::snprintf(buf, sizeof(buf), "%.12g", states[i][v]);
                os << "," << buf;
            }
            os << "\n";
        }
    }
};

struct EventSpec {
    enum class Direction { rising, falling, both };
    std::size_t variable = 0;
    double threshold = 0.0;
    Direction direction = Direction::both;
};

namespace detail {

inline double error_norm(const std::vector<double>& err, const std::vector<double>& y0,
                         const std::vector<double>& y1, double atol, double rtol) {
    double acc = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        double sk = atol + rtol * std::max(std::fabs(y0[i]), std::fabs(y1[i]));
        double q = err[i] / sk;
        acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(err.size()));
}

inline void check_finite(const std::vector<double>& y, double t) {
    for (double v : y)
        if (!std::isfinite(v))
            throw integration_error("nonfinite state at t = " + std::to_string(t));
}

// Clip small negative undershoot to zero; anything below -abs_tol is a
// genuine positivity violation and aborts the run.
inline bool clip_nonneg(std::vector<double>& y, const std::vector<std::string>& names,
                        double abs_tol, double t) {
    bool clipped = false;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] >= 0.0) continue;
        if (y[i] < -abs_tol) {
            throw integration_error("state " + names[i] + " fell to " +
                                    std::to_string(y[i]) + " at t = " +
                                    std::to_string(t) +
                                    " (exceeds the nonnegativity clip window)");
        }
        y[i] = 0.0;
        clipped = true;
    }
    return clipped;
}

inline double worst_undershoot(const std::vector<double>& y) {
    double u = 0.0;
    for (double v : y)
        if (v < 0.0) u = std::max(u, -v);
    return u;
}

// Starting step size along the lines of the classic hinit heuristic.
inline double initial_step(const PolynomialOdeSystem& sys, const std::vector<double>& y0,
                           const std::vector<double>& f0, double t0, double t1,
                           const IntegratorConfig& cfg, int order) {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < y0.size(); ++i) {
        double sk = cfg.abs_tol + cfg.rel_tol * std::fabs(y0[i]);
        d0 += (y0[i] / sk) * (y0[i] / sk);
        d1 += (f0[i] / sk) * (f0[i] / sk);
    }
    d0 = std::sqrt(d0 / y0.size());
    d1 = std::sqrt(d1 / y0.size());
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t1 - t0);

    std::vector<double> y1(y0.size()), f1;
    for (std::size_t i = 0; i < y0.size(); ++i) y1[i] = y0[i] + h0 * f0[i];
    sys.eval(y1, f1);
    double d2 = 0.0;
    for (std::size_t i = 0; i < y0.size(); ++i) {
        double sk = cfg.abs_tol + cfg.rel_tol * std::fabs(y0[i]);
        double q = (f1[i] - f0[i]) / sk;
        d2 += q * q;
    }
    d2 = std::sqrt(d2 / y0.size()) / h0;

    double dm = std::max(d1, d2);
    double h1 = dm > 1e-15 ? std::pow(0.01 / dm, 1.0 / order) : std::max(1e-6, h0 * 1e-3);
    return std::min({100.0 * h0, h1, cfg.max_step, t1 - t0});
}

struct StepperState {
    double t = 0.0;
    double h = 0.0;
    std::vector<double> y;
    std::vector<double> f; // derivative at (t, y)
};

// One Dormand-Prince 5(4) attempt. Returns the scaled error norm and fills
// y1/f1 (FSAL derivative) plus the stage-6 data used by the stiffness test.
struct Dopri5Work {
    std::vector<double> k2, k3, k4, k5, k6, k7, ytmp, ysti, y1, err;
};

inline double dopri5_attempt(const PolynomialOdeSystem& sys, const StepperState& s,
                             const IntegratorConfig& cfg, Dopri5Work& w) {
    static constexpr double a21 = 0.2;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                            a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                            a65 = -5103.0 / 18656.0;
    static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0,
                            a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                            a76 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0,
                            e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                            e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

    const std::size_t n = s.y.size();
    const double h = s.h;
    const std::vector<double>& y = s.y;
    const std::vector<double>& k1 = s.f;
    w.ytmp.resize(n);

    for (std::size_t i = 0; i < n; ++i) w.ytmp[i] = y[i] + h * a21 * k1[i];
    sys.eval(w.ytmp, w.k2);
    for (std::size_t i = 0; i < n; ++i)
        w.ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * w.k2[i]);
    sys.eval(w.ytmp, w.k3);
    for (std::size_t i = 0; i < n; ++i)
        w.ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * w.k2[i] + a43 * w.k3[i]);
    sys.eval(w.ytmp, w.k4);
    for (std::size_t i = 0; i < n; ++i)
        w.ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * w.k2[i] + a53 * w.k3[i] + a54 * w.k4[i]);
    sys.eval(w.ytmp, w.k5);
    w.ysti.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        w.ysti[i] = y[i] + h * (a61 * k1[i] + a62 * w.k2[i] + a63 * w.k3[i] +
                                a64 * w.k4[i] + a65 * w.k5[i]);
    sys.eval(w.ysti, w.k6);
    w.y1.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        w.y1[i] = y[i] + h * (a71 * k1[i] + a73 * w.k3[i] + a74 * w.k4[i] +
                              a75 * w.k5[i] + a76 * w.k6[i]);
    sys.eval(w.y1, w.k7);
    w.err.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        w.err[i] = h * (e1 * k1[i] + e3 * w.k3[i] + e4 * w.k4[i] + e5 * w.k5[i] +
                        e6 * w.k6[i] + e7 * w.k7[i]);
    return error_norm(w.err, y, w.y1, cfg.abs_tol, cfg.rel_tol);
}

// One ode23s attempt. d and e32 are the Shampine-Reichelt constants.
struct Ros23Work {
    std::vector<double> jac, f1, f2, y1, err;
    Eigen::MatrixXd W;
    Eigen::VectorXd k1, k2, k3, rhs;
};

inline bool ros23_attempt(const PolynomialOdeSystem& sys, const StepperState& s,
                          const IntegratorConfig& cfg, Ros23Work& w, double& err_out) {
    static const double d = 1.0 / (2.0 + std::sqrt(2.0));
    static const double e32 = 6.0 + std::sqrt(2.0);
    const std::size_t n = s.y.size();
    const double h = s.h;

    sys.jacobian(s.y, w.jac);
    w.W.resize(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            w.W(i, j) = (i == j ? 1.0 : 0.0) - h * d * w.jac[i * n + j];
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(w.W);

    w.rhs.resize(n);
    for (std::size_t i = 0; i < n; ++i) w.rhs(i) = s.f[i];
    w.k1 = lu.solve(w.rhs);
    if (!w.k1.allFinite()) return false; // singular W, caller shrinks h

    std::vector<double> ymid(n);
    for (std::size_t i = 0; i < n; ++i) ymid[i] = s.y[i] + 0.5 * h * w.k1(i);
    sys.eval(ymid, w.f1);

    for (std::size_t i = 0; i < n; ++i) w.rhs(i) = w.f1[i] - w.k1(i);
    w.k2 = lu.solve(w.rhs);
    w.k2 += w.k1;

    w.y1.resize(n);
    for (std::size_t i = 0; i < n; ++i) w.y1[i] = s.y[i] + h * w.k2(i);
    sys.eval(w.y1, w.f2);

    for (std::size_t i = 0; i < n; ++i)
        w.rhs(i) = w.f2[i] - e32 * (w.k2(i) - w.f1[i]) - 2.0 * (w.k1(i) - s.f[i]);
    w.k3 = lu.solve(w.rhs);
    if (!w.k3.allFinite()) return false;

    w.err.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        w.err[i] = (h / 6.0) * (w.k1(i) - 2.0 * w.k2(i) + w.k3(i));
    err_out = error_norm(w.err, s.y, w.y1, cfg.abs_tol, cfg.rel_tol);
    return true;
}

} // namespace detail

inline Trajectory integrate(const PolynomialOdeSystem& sys, const std::vector<double>& x0,
                            std::pair<double, double> t_span, const IntegratorConfig& cfg) {
    cfg.validate();
    const std::size_t n = sys.n_vars();
    if (x0.size() != n)
        throw std::invalid_argument("initial state has wrong dimension");
    for (double v : x0)
        if (!std::isfinite(v))
            throw std::invalid_argument("initial state has a nonfinite entry");
    const double t0 = t_span.first, t1 = t_span.second;
    if (!(t1 > t0))
        throw std::invalid_argument("t_span must satisfy t0 < t1");

    Trajectory traj;
    traj.names = sys.variables;

    detail::StepperState s;
    s.t = t0;
    s.y = x0;
    if (cfg.nonneg_clip) detail::clip_nonneg(s.y, sys.variables, cfg.abs_tol, s.t);
    sys.eval(s.y, s.f);

    traj.times.push_back(s.t);
    traj.states.push_back(s.y);
    traj.derivs.push_back(s.f);

    bool use_stiff = cfg.method == Method::stiff_implicit;
    s.h = detail::initial_step(sys, s.y, s.f, t0, t1, cfg, use_stiff ? 3 : 5);

    // PI controller state (explicit branch)
    const double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
    const double facc1 = 1.0 / 0.2, facc2 = 1.0 / 10.0;
    double facold = 1e-4;
    bool rejected = false;

    // stiffness detector state
    int iasti = 0, nonsti = 0;
    long accepted = 0;
    const int nstiff = 25;

    // Steps whose error passes but which would drive a state below the clip
    // window are retried with a smaller h. A long unbroken run of such
    // retries means the vector field genuinely points out of the positive
    // orthant, which the clip contract treats as an error.
    int gate_rejects = 0;
    const int max_gate_rejects = 25;
    auto undershoot_gate = [&](const std::vector<double>& y1) {
        if (!cfg.nonneg_clip || detail::worst_undershoot(y1) <= cfg.abs_tol) {
            gate_rejects = 0;
            return false;
        }
        if (++gate_rejects >= max_gate_rejects)
            throw integration_error(
                "state repeatedly driven below the nonnegativity clip window near t = " +
                std::to_string(s.t) + "; disable nonneg_clip for systems that "
                "legitimately leave the positive orthant");
        return true;
    };

    detail::Dopri5Work dw;
    detail::Ros23Work rw;

    const long max_steps = 50'000'000;
    long nsteps = 0;

    while (s.t < t1) {
        if (++nsteps > max_steps)
            throw integration_error("step budget exhausted at t = " + std::to_string(s.t));
        if (s.h < 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(s.t)))
            throw integration_error("step size underflow at t = " + std::to_string(s.t));
        s.h = std::min(s.h, cfg.max_step);
        bool last = false;
        if (s.t + s.h >= t1) {
            s.h = t1 - s.t;
            last = true;
        }

        if (!use_stiff) {
            double err = detail::dopri5_attempt(sys, s, cfg, dw);
            double fac11 = std::pow(err, expo1);
            if (err <= 1.0) {
                if (undershoot_gate(dw.y1)) {
                    rejected = true;
                    s.h *= 0.5;
                    continue;
                }
                double fac = fac11 / std::pow(facold, beta);
                fac = std::max(facc2, std::min(facc1, fac / safe));
                double hnew = s.h / fac;
                facold = std::max(err, 1e-4);
                ++accepted;

                // stiffness estimate from the last two stages
                if (accepted % nstiff == 0 || iasti > 0) {
                    double stnum = 0.0, stden = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        double dk = dw.k7[i] - dw.k6[i];
                        double dy = dw.y1[i] - dw.ysti[i];
                        stnum += dk * dk;
                        stden += dy * dy;
                    }
                    if (stden > 0.0) {
                        double hlamb = s.h * std::sqrt(stnum / stden);
                        if (hlamb > 3.25) {
                            nonsti = 0;
                            if (++iasti == 15) {
                                use_stiff = true;
                                traj.stiff_switch_time = s.t + s.h;
                            }
                        } else if (++nonsti == 6) {
                            iasti = 0;
                        }
                    }
                }

                s.t = last ? t1 : s.t + s.h;
                s.y = dw.y1;
                s.f = dw.k7;
                detail::check_finite(s.y, s.t);
                if (cfg.nonneg_clip &&
                    detail::clip_nonneg(s.y, sys.variables, cfg.abs_tol, s.t))
                    sys.eval(s.y, s.f);
                traj.times.push_back(s.t);
                traj.states.push_back(s.y);
                traj.derivs.push_back(s.f);
                if (rejected) hnew = std::min(hnew, s.h);
                rejected = false;
                s.h = hnew;
            } else {
                rejected = true;
                s.h = s.h / std::min(facc1, fac11 / safe);
            }
        } else {
            double err = 0.0;
            bool solved = detail::ros23_attempt(sys, s, cfg, rw, err);
            if (solved && err <= 1.0) {
                if (undershoot_gate(rw.y1)) {
                    rejected = true;
                    s.h *= 0.5;
                    continue;
                }
                s.t = last ? t1 : s.t + s.h;
                s.y = rw.y1;
                s.f = rw.f2;
                detail::check_finite(s.y, s.t);
                if (cfg.nonneg_clip &&
                    detail::clip_nonneg(s.y, sys.variables, cfg.abs_tol, s.t))
                    sys.eval(s.y, s.f);
                traj.times.push_back(s.t);
                traj.states.push_back(s.y);
                traj.derivs.push_back(s.f);
                double fac = err > 0.0 ? safe * std::pow(err, -1.0 / 3.0) : 5.0;
                if (rejected) fac = std::min(fac, 1.0);
                rejected = false;
                s.h *= std::min(5.0, std::max(0.2, fac));
            } else {
                rejected = true;
                double fac = solved ? std::max(0.2, safe * std::pow(err, -1.0 / 3.0)) : 0.5;
                s.h *= std::min(fac, 0.5);
            }
        }
    }
    return traj;
}

inline Trajectory integrate(const PolynomialOdeSystem& sys, const std::vector<double>& x0,
                            std::pair<double, double> t_span) {
    return integrate(sys, x0, t_span, IntegratorConfig{});
}

// --- event detection --------------------------------------------------------

namespace detail {

// Hermite basis evaluation of variable `var` of interval i at local s in [0,1].
inline double hermite_local(const Trajectory& tr, std::size_t i, std::size_t var, double s) {
    double h = tr.times[i + 1] - tr.times[i];
    double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * tr.states[i][var] +
           (s3 - 2 * s2 + s) * h * tr.derivs[i][var] +
           (-2 * s3 + 3 * s2) * tr.states[i + 1][var] +
           (s3 - s2) * h * tr.derivs[i + 1][var];
}

} // namespace detail

// All times where the Hermite reconstruction of the event variable crosses the
// threshold in the requested direction, refined by bisection to a relative
// resolution of 1e-9.
inline std::vector<double> detect_crossings(const Trajectory& traj, const EventSpec& ev) {
    if (traj.size() < 2)
        throw std::invalid_argument("trajectory too short for event detection");
    if (ev.variable >= traj.n_vars())
        throw std::invalid_argument("event variable index out of range");

    std::vector<double> hits;
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        double t_lo = traj.times[i], t_hi = traj.times[i + 1];
        double h = t_hi - t_lo;
        if (h <= 0.0) continue;

        auto g = [&](double s) {
            return detail::hermite_local(traj, i, ev.variable, s) - ev.threshold;
        };

        // split [0,1] at the interpolant's interior extrema so each piece is
        // monotone; the cubic's derivative is a quadratic in s
        double y0 = traj.states[i][ev.variable], y1 = traj.states[i + 1][ev.variable];
        double d0 = h * traj.derivs[i][ev.variable], d1 = h * traj.derivs[i + 1][ev.variable];
        // H(s) = a s^3 + b s^2 + c s + y0
        double a = 2 * y0 - 2 * y1 + d0 + d1;
        double b = -3 * y0 + 3 * y1 - 2 * d0 - d1;
        double c = d0;
        std::vector<double> knots{0.0};
        double qa = 3 * a, qb = 2 * b, qc = c;
        double disc = qb * qb - 4 * qa * qc;
        if (std::fabs(qa) > 1e-300 && disc > 0.0) {
            double sq = std::sqrt(disc);
            double q = qb >= 0.0 ? -0.5 * (qb + sq) : -0.5 * (qb - sq);
            double r1 = q / qa;
            double r2 = std::fabs(q) > 1e-300 ? qc / q : -1.0;
            for (double r : {std::min(r1, r2), std::max(r1, r2)})
                if (r > 0.0 && r < 1.0) knots.push_back(r);
        } else if (std::fabs(qa) <= 1e-300 && std::fabs(qb) > 1e-300) {
            double r = -qc / qb;
            if (r > 0.0 && r < 1.0) knots.push_back(r);
        }
        knots.push_back(1.0);
        std::sort(knots.begin(), knots.end());

        for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
            double sa = knots[k], sb = knots[k + 1];
            double ga = g(sa), gb = g(sb);
            if (ga == 0.0 && k == 0 && i == 0) {
                // exact hit at the very first node: count it, direction from gb
                bool rising = gb > 0.0;
                if (ev.direction == EventSpec::Direction::both ||
                    (rising && ev.direction == EventSpec::Direction::rising) ||
                    (!rising && ev.direction == EventSpec::Direction::falling))
                    hits.push_back(t_lo);
                continue;
            }
            if (!(ga < 0.0 && gb > 0.0) && !(ga > 0.0 && gb < 0.0)) continue;
            bool rising = gb > ga;
            if (ev.direction == EventSpec::Direction::rising && !rising) continue;
            if (ev.direction == EventSpec::Direction::falling && rising) continue;

            double lo = sa, hi = sb;
            double t_tol = 1e-9 * std::max(1.0, std::fabs(t_hi));
            for (int it = 0; it < 200 && (hi - lo) * h > t_tol; ++it) {
                double mid = 0.5 * (lo + hi);
                double gm = g(mid);
                if (gm == 0.0) { lo = hi = mid; break; }
                if ((gm > 0.0) == rising) hi = mid; else lo = mid;
            }
            hits.push_back(t_lo + 0.5 * (lo + hi) * h);
        }
    }

    std::sort(hits.begin(), hits.end());
    std::vector<double> out;
    for (double t : hits) {
        if (!out.empty() && t - out.back() < 1e-9 * std::max(1.0, std::fabs(t))) continue;
        out.push_back(t);
    }
    return out;
}

} // namespace crnosc

#endif
