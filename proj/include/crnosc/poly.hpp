#ifndef CRNOSC_POLY_HPP
#define CRNOSC_POLY_HPP

// Dense univariate polynomials with real coefficients, ascending order
// (coeffs[k] multiplies x^k), plus a real-root finder based on recursive
// derivative isolation: the roots of p' split the line into monotone
// intervals, each holding at most one root of p.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace crnosc {
namespace poly {

inline int degree(const std::vector<double>& c) {
    for (std::size_t i = c.size(); i > 0; --i)
        if (c[i - 1] != 0.0) return static_cast<int>(i) - 1;
    return -1; // zero polynomial
}

inline double eval(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (std::size_t i = c.size(); i > 0; --i) v = v * x + c[i - 1];
    return v;
}

// Magnitude scale of the evaluation, for relative zero tests.
inline double eval_scale(const std::vector<double>& c, double x) {
    double v = 0.0, ax = std::fabs(x);
    for (std::size_t i = c.size(); i > 0; --i) v = v * ax + std::fabs(c[i - 1]);
    return v;
}

inline std::vector<double> derivative(const std::vector<double>& c) {
    std::vector<double> d;
    for (std::size_t k = 1; k < c.size(); ++k)
        d.push_back(c[k] * static_cast<double>(k));
    return d;
}

inline double cauchy_bound(const std::vector<double>& c) {
    int n = degree(c);
    double an = std::fabs(c[static_cast<std::size_t>(n)]);
    double m = 0.0;
    for (int k = 0; k < n; ++k)
        m = std::max(m, std::fabs(c[static_cast<std::size_t>(k)]) / an);
    return 1.0 + m;
}

namespace detail {

// Bisection on a monotone bracket, then a few Newton polish steps kept
// inside the bracket.
inline double refine_root(const std::vector<double>& p, const std::vector<double>& dp,
                          double lo, double hi) {
    double flo = eval(p, lo);
    for (int it = 0; it < 120 && hi - lo > 1e-15 * std::max(1.0, std::fabs(lo)); ++it) {
        double mid = 0.5 * (lo + hi);
        double fm = eval(p, mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 4; ++it) {
        double d = eval(dp, x);
        if (d == 0.0) break;
        double step = eval(p, x) / d;
        double xn = x - step;
        if (xn < lo || xn > hi) break;
        x = xn;
    }
    return x;
}

} // namespace detail

// All distinct real roots, ascending. Multiple roots are reported once.
inline std::vector<double> real_roots(const std::vector<double>& c) {
    int n = degree(c);
    if (n < 0)
        throw std::invalid_argument("real_roots: zero polynomial");
    if (n == 0) return {};
    std::vector<double> p(c.begin(), c.begin() + n + 1);
    if (n == 1) return {-p[0] / p[1]};

    std::vector<double> dp = derivative(p);
    std::vector<double> crit = real_roots(dp);

    double bound = cauchy_bound(p);
    std::vector<double> knots{-bound};
    for (double x : crit)
        if (x > -bound && x < bound) knots.push_back(x);
    knots.push_back(bound);

    std::vector<double> roots;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        double lo = knots[i], hi = knots[i + 1];
        double flo = eval(p, lo), fhi = eval(p, hi);
        double slo = eval_scale(p, lo), shi = eval_scale(p, hi);
        bool zlo = std::fabs(flo) <= 1e-13 * slo;
        bool zhi = std::fabs(fhi) <= 1e-13 * shi;
        if (zlo && i == 0) roots.push_back(lo); // only interior knots repeat
        if (zhi) {
            roots.push_back(hi);
        } else if (!zlo && ((flo > 0.0) != (fhi > 0.0))) {
            roots.push_back(detail::refine_root(p, dp, lo, hi));
        }
    }

    std::sort(roots.begin(), roots.end());
    std::vector<double> out;
    for (double r : roots) {
        if (!out.empty() && r - out.back() < 1e-10 * std::max(1.0, std::fabs(r))) continue;
        out.push_back(r);
    }
    return out;
}

} // namespace poly
} // namespace crnosc

#endif
