#ifndef CRNOSC_QUADRATURE_HPP
#define CRNOSC_QUADRATURE_HPP

// Adaptive Gauss-Legendre quadrature. Nodes and weights are generated at
// runtime by Newton iteration on the Legendre recurrence; all nodes are
// interior, so integrands may be left unevaluated at interval endpoints.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace crnosc {

struct GaussRule {
    std::vector<double> nodes;   // on (-1, 1)
    std::vector<double> weights;
};

inline GaussRule gauss_legendre(int n) {
    if (n < 2) throw std::invalid_argument("gauss_legendre: order must be >= 2");
    GaussRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Chebyshev-based starting guess for the i-th positive root of P_n
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::fabs(z - z1) <= 1e-15) break;
        }
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        double w = 2.0 / ((1.0 - z * z) * pp * pp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

namespace detail {

template <class F>
double gauss_panel(const F& f, double a, double b, const GaussRule& rule) {
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return acc * half;
}

template <class F>
double adaptive_rec(const F& f, double a, double b, double whole, double tol,
                    const GaussRule& rule, int depth) {
    if (depth > 60)
        throw std::runtime_error("adaptive quadrature failed to converge");
    double m = 0.5 * (a + b);
    double left = gauss_panel(f, a, m, rule);
    double right = gauss_panel(f, m, b, rule);
    if (std::fabs(left + right - whole) <= tol)
        return left + right;
    return adaptive_rec(f, a, m, left, 0.5 * tol, rule, depth + 1) +
           adaptive_rec(f, m, b, right, 0.5 * tol, rule, depth + 1);
}

} // namespace detail

// Integral of f over [a, b] (either orientation) to absolute tolerance
// abs_tol. The integrand is only evaluated at interior points.
template <class F>
double adaptive_gauss(const F& f, double a, double b, double abs_tol) {
    if (!(abs_tol > 0.0))
        throw std::invalid_argument("adaptive_gauss: tolerance must be positive");
    if (a == b) return 0.0;
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }
    static const GaussRule rule = gauss_legendre(15);
    double whole = detail::gauss_panel(f, a, b, rule);
    return sign * detail::adaptive_rec(f, a, b, whole, abs_tol, rule, 0);
}

} // namespace crnosc

#endif
