// Acceptance gate for the oscillator construction kit. Each numbered
// criterion prints one [PASS]/[FAIL] line with its key values; the binary
// exits nonzero when any criterion fails. Checks stay on in Release builds.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include <crnosc/presets.hpp>

#include "support/random_systems.hpp"

using namespace crnosc;

namespace {

int g_failures = 0;

struct requirement_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define REQUIRE(cond)                                                          \
    do {                                                                       \
        if (!(cond))                                                           \
            throw requirement_error("line " + std::to_string(__LINE__) +       \
                                    ": " #cond);                               \
    } while (0)

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

void criterion(int id, const char* label, const std::function<std::string()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    try {
        std::string detail = body();
        std::printf("[PASS] %2d %-26s %s (%.2fs)\n", id, label, detail.c_str(),
                    seconds_since(t0));
    } catch (const std::exception& e) {
        ++g_failures;
        std::printf("[FAIL] %2d %-26s %s\n", id, label, e.what());
    }
    std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
    char buf[256];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// --- scenario plumbing -------------------------------------------------------

RelaxationSpec spec_slow_fast() {
    RelaxationSpec osc;
    osc.epsilon = 1e-3;
    osc.eta1 = 0.01;
    osc.eta2 = 10.0;
    return osc;
}

ResolvedScenario resolve_preset(const std::string& name,
                                const nlohmann::json& params = nlohmann::json()) {
    nlohmann::json cfg;
    cfg["preset"] = name;
    if (!params.is_null()) cfg["parameters"] = params;
    cfg["assertions"] = false;
    return resolve_scenario(cfg);
}

struct ClockRun {
    ResolvedScenario rs;
    Trajectory traj;
};
std::optional<ClockRun> g_clock;

// the example_3_3 simulation over [0, 200], shared by criteria 2, 4 and 5
ClockRun& clocked_run() {
    if (!g_clock) {
        ResolvedScenario rs = resolve_preset("example_3_3");
        Trajectory traj = integrate(rs.system.odes, rs.system.initial, rs.t_span, rs.integ);
        g_clock = ClockRun{std::move(rs), std::move(traj)};
    }
    return *g_clock;
}

// integrate example_3_3 with overridden parameters and classify alternation;
// first element is true when verify_symmetry gave up entirely
std::pair<bool, SymmetryResult> clock_symmetry_at(const nlohmann::json& params) {
    ResolvedScenario rs = resolve_preset("example_3_3", params);
    Trajectory traj = integrate(rs.system.odes, rs.system.initial, rs.t_span, rs.integ);
    try {
        return {false, verify_symmetry(traj, rs.system.var("U"), rs.system.var("V"),
                                       0.05, 0.5)};
    } catch (const no_alternation_error&) {
        return {true, SymmetryResult{}};
    }
}

// --- canonical reaction listings ----------------------------------------------

std::string format_rate(double r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", r);
    return buf;
}

std::string format_side(const std::map<std::string, int>& side) {
    if (side.empty()) return "0";
    std::string out;
    for (const auto& [name, count] : side) {
        if (!out.empty()) out += "+";
        if (count > 1) out += std::to_string(count);
        out += name;
    }
    return out;
}

std::map<std::string, int> parse_side(const std::string& text) {
    std::map<std::string, int> side;
    std::istringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, '+')) {
        std::string t;
        for (char c : tok)
            if (!std::isspace(static_cast<unsigned char>(c))) t += c;
        if (t.empty() || t == "0") continue;
        std::size_t d = 0;
        while (d < t.size() && std::isdigit(static_cast<unsigned char>(t[d]))) ++d;
        int count = d ? std::stoi(t.substr(0, d)) : 1;
        side[t.substr(d)] += count;
    }
    return side;
}

struct Listed {
    const char* lhs;
    const char* rhs;
    double rate;
};

std::vector<std::string> canon_expected(const std::vector<Listed>& rows) {
    std::vector<std::string> out;
    for (const Listed& r : rows)
        out.push_back(format_side(parse_side(r.lhs)) + "=>" +
                      format_side(parse_side(r.rhs)) + "@" + format_rate(r.rate));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> canon_network(const ReactionNetwork& net) {
    auto side_of = [&](const Complex& c) {
        std::map<std::string, int> side;
        for (const auto& [idx, count] : c.stoich)
            if (count) side[net.species[idx]] += static_cast<int>(count);
        return side;
    };
    std::vector<std::string> out;
    for (const Reaction& r : net.reactions)
        out.push_back(format_side(side_of(r.reactants)) + "=>" +
                      format_side(side_of(r.products)) + "@" +
                      format_rate(r.rate_constant));
    std::sort(out.begin(), out.end());
    return out;
}

void require_same_listing(const char* what, std::vector<std::string> got,
                          std::vector<std::string> want) {
    if (got == want) return;
    std::string msg = std::string(what) + " listing mismatch (" +
                      std::to_string(got.size()) + " vs " + std::to_string(want.size()) +
                      " reactions)";
    for (const auto& g : got)
        if (std::find(want.begin(), want.end(), g) == want.end()) {
            msg += "; unexpected " + g;
            break;
        }
    for (const auto& w : want)
        if (std::find(got.begin(), got.end(), w) == got.end()) {
            msg += "; missing " + w;
            break;
        }
    throw requirement_error(msg);
}

// --- criteria ----------------------------------------------------------------

std::string c1_period_estimate() {
    auto t0 = std::chrono::steady_clock::now();
    auto [t_low, t_high] = estimate_period(spec_slow_fast());
    REQUIRE(std::fabs(t_low - 10.47) <= 0.02);
    REQUIRE(std::fabs(t_high - 9.19) <= 0.02);
    REQUIRE(seconds_since(t0) < 1.0);
    return fmt("T1=%.6f T2=%.6f", t_low, t_high);
}

std::string c2_period_measurement() {
    auto t0 = std::chrono::steady_clock::now();
    ClockRun& cr = clocked_run();
    PeriodMeasurement pm = measure_period(cr.traj, *cr.rs.system.osc);
    auto [t_low, t_high] = estimate_period(*cr.rs.system.osc);
    REQUIRE(std::fabs(pm.t_low_mean - t_low) / t_low < 0.15);
    REQUIRE(std::fabs(pm.t_high_mean - t_high) / t_high < 0.15);
    REQUIRE(pm.n_full >= 3);
    REQUIRE(seconds_since(t0) < 10.0);
    return fmt("measured (%.4f, %.4f) over %d cycles", pm.t_low_mean, pm.t_high_mean,
               pm.n_full);
}

std::string c3_period_independence() {
    auto t0 = std::chrono::steady_clock::now();
    RelaxationSpec osc;
    osc.epsilon = 1e-3; // eta1 = eta2 = 1
    ComposedSystem sys = compose_oscillator(osc);

    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> d(0.1, 5.0);
    IntegratorConfig cfg;
    std::vector<double> periods;
    for (int i = 0; i < 20; ++i) {
        double x0, y0;
        do {
            x0 = d(rng);
            y0 = d(rng);
        } while (std::hypot(x0 - 2.0, y0 - 3.0) < 0.25); // skip the equilibrium ball
        Trajectory traj = integrate(sys.odes, {x0, y0}, {0.0, 30.0}, cfg);
        periods.push_back(measure_period(traj, osc).t_full_mean);
    }
    double lo = *std::min_element(periods.begin(), periods.end());
    double hi = *std::max_element(periods.begin(), periods.end());
    double spread = (hi - lo) / lo;
    REQUIRE(spread < 0.02);
    REQUIRE(seconds_since(t0) < 60.0);
    return fmt("spread %.3f%% across 20 starting points", 100.0 * spread);
}

std::string c4_clock_symmetry() {
    ClockRun& cr = clocked_run();
    SymmetryResult sym = verify_symmetry(cr.traj, cr.rs.system.var("U"),
                                         cr.rs.system.var("V"), 0.05, 0.5);
    REQUIRE(sym.ok);
    REQUIRE(sym.min_uv < 0.01);
    return fmt("alternation holds, min(u,v)=%.5f", sym.min_uv);
}

std::string c5_symmetry_failure_modes() {
    auto [low_threw, low] = clock_symmetry_at({{"p", 0.5}});
    REQUIRE(low_threw || !low.ok);

    auto [high_threw, high] = clock_symmetry_at({{"p", 3.5}});
    REQUIRE(high_threw || !high.ok);

    auto [weak_threw, weak] = clock_symmetry_at({{"c", 4.0}});
    REQUIRE(!weak_threw);
    REQUIRE(!weak.ok);
    REQUIRE(weak.reason.find("low_tol") != std::string::npos);

    SymmetryResult base = verify_symmetry(clocked_run().traj,
                                          clocked_run().rs.system.var("U"),
                                          clocked_run().rs.system.var("V"), 0.05, 0.5);
    REQUIRE(base.ok);
    return "p=0.5, p=3.5 and c=4 rejected; c=400 accepted";
}

std::string c6_counter_staircase() {
    ResolvedScenario rs = resolve_preset("counter");
    ScenarioResult res = run_scenario(rs.system, rs.t_span, rs.integ, rs.opts);
    const nlohmann::json& loops = res.summary.at("loops");
    REQUIRE(loops.at("count").get<int>() == 5);
    auto levels = loops.at("levels").get<std::vector<double>>();
    REQUIRE(levels.size() == 6);
    for (std::size_t k = 0; k < levels.size(); ++k)
        REQUIRE(std::fabs(levels[k] - static_cast<double>(k)) <= 0.05);
    return fmt("5 loops counted, plateau levels within %.2f of 0..5", 0.05);
}

std::string c7_terminate_by_x1() {
    ResolvedScenario rs = resolve_preset("terminate_by_x1");
    ScenarioResult res = run_scenario(rs.system, rs.t_span, rs.integ, rs.opts);
    const nlohmann::json& term = res.summary.at("termination");
    REQUIRE(term.at("verdict").get<bool>());
    REQUIRE(term.at("latch").get<bool>());
    double x1p = term.at("finals").at("X1'").get<double>();
    double x2p = term.at("finals").at("X2'").get<double>();
    REQUIRE(std::fabs(x2p - 4.0) <= 0.05);
    REQUIRE(x1p > 3.0);
    REQUIRE(x1p < 4.0);
    return fmt("halt t=%.3f, x1'=%.4f, x2'=%.4f", term.at("halt_time").get<double>(),
               x1p, x2p);
}

std::string c8_terminate_by_x2() {
    ResolvedScenario rs = resolve_preset("terminate_by_x2");
    ScenarioResult res = run_scenario(rs.system, rs.t_span, rs.integ, rs.opts);
    const nlohmann::json& term = res.summary.at("termination");
    REQUIRE(term.at("verdict").get<bool>());
    REQUIRE(term.at("latch").get<bool>());
    // halting inside the first half of loop 4: the fourth high phase of X has
    // begun but not yet ended when the termination species collapses
    REQUIRE(term.at("high_phases_started_before_halt").get<int>() == 4);
    REQUIRE(term.at("high_phases_ended_before_halt").get<int>() == 3);
    double x1p = term.at("finals").at("X1'").get<double>();
    REQUIRE(std::fabs(x1p - 3.0) <= 0.05);
    return fmt("halt t=%.3f in loop 4 first half, x1'=%.4f",
               term.at("halt_time").get<double>(), x1p);
}

std::string c9_logistic_closed_form() {
    double worst = 0.0;
    for (double x1c : {1.0, 3.0, 5.0}) {
        ReactionNetwork net = termination_module("X1", "X3", 1.0);
        PolynomialOdeSystem odes = derive_odes(net);
        std::vector<double> x0(3, 0.0);
        x0[odes.var_index("N")] = 4.0;
        x0[odes.var_index("X1")] = x1c;
        x0[odes.var_index("X3")] = 4.0;
        IntegratorConfig cfg;
        cfg.rel_tol = 1e-10;
        cfg.abs_tol = 1e-12;
        Trajectory traj = integrate(odes, x0, {0.0, 5.0}, cfg);

        double a = 4.0 - x1c;
        double k = a / 4.0 - 1.0;
        std::size_t it = odes.var_index("X3");
        double sup = 0.0;
        for (std::size_t i = 0; i < traj.size(); ++i) {
            double closed = a / (1.0 + k * std::exp(-a * traj.times[i]));
            sup = std::max(sup, std::fabs(traj.states[i][it] - closed));
        }
        REQUIRE(sup <= 1e-6);
        worst = std::max(worst, sup);
    }
    return fmt("sup |sim - logistic| = %.2e across three frozen inputs", worst);
}

std::string c10_network_emission() {
    const std::vector<Listed> osc_small = {
        {"X", "2X", 5000},      {"2X", "X", 9000}, {"3X", "4X", 6000},
        {"4X", "3X", 1000},     {"X + Y", "Y", 1000},
        {"X + Y", "X + 2Y", 1}, {"Y", "0", 2},
    };
    ResolvedScenario small = resolve_preset("example_3_2");
    require_same_listing("example_3_2", canon_network(small.system.network),
                         canon_expected(osc_small));

    const std::vector<Listed> full = {
        // oscillator cell
        {"X", "2X", 500},
        {"2X", "X", 900},
        {"3X", "4X", 600},
        {"4X", "3X", 100},
        {"X + Y", "Y", 100},
        {"X + Y", "X + 2Y", 0.1},
        {"Y", "0", 0.2},
        // clock pair
        {"0", "U", 20},
        {"U", "0", 10},
        {"X", "X + V", 10},
        {"V", "0", 10},
        {"U + V", "V", 50000},
        {"U + V", "U", 50000},
        // counter, copy gated by U and increment gated by V
        {"X2 + U", "X1 + X2 + U", 1},
        {"X1 + U", "U", 1},
        {"X1 + V", "X1 + X2 + V", 1},
        {"V", "X2 + V", 1},
        {"X2 + V", "V", 1},
        // truncated subtraction of the second counter
        {"N + X4", "N + 2X4", 500},
        {"X2 + X4", "X2", 500},
        {"2X4", "X4", 500},
        // primed counter, gated by the clock and the termination species
        {"X2' + U + X4", "X1' + X2' + U + X4", 1},
        {"X1' + U + X4", "U + X4", 1},
        {"X1' + V + X4", "X1' + X2' + V + X4", 1},
        {"V + X4", "X2' + V + X4", 1},
        {"X2' + V + X4", "V + X4", 1},
    };
    ResolvedScenario big = resolve_preset("example_5_2");
    require_same_listing("example_5_2", canon_network(big.system.network),
                         canon_expected(full));

    std::mt19937 rng(20260816);
    for (int i = 0; i < 100; ++i) {
        PolynomialOdeSystem sys = testsupport::random_realizable_system(rng);
        ReactionNetwork net = crn_from_polynomial_odes(sys);
        REQUIRE(testsupport::systems_equal(derive_odes(net), sys, 1e-9));
    }
    return "7 and 26 reaction listings matched, 100 round trips identical";
}

std::string c11_property_suites() {
    int cases = 0;

    // gating identity: gated odes = scale * gate product * base odes
    {
        std::mt19937 rng(424242);
        std::uniform_real_distribution<double> scale_d(0.25, 3.0);
        std::uniform_int_distribution<int> n_gates_d(1, 2);
        const char* names[] = {"GA", "GB"};
        for (int i = 0; i < 150; ++i, ++cases) {
            ReactionNetwork base = testsupport::random_module(rng);
            std::vector<std::string> gates(names, names + n_gates_d(rng));
            double scale = scale_d(rng);
            GatedModule gm = gate_module(base, gates, scale);
            PolynomialOdeSystem base_odes = derive_odes(base);
            PolynomialOdeSystem gated_odes = derive_odes(gm.network);
            std::vector<double> s =
                testsupport::random_state(rng, gm.network.species.size(), 0.1, 2.5);
            std::vector<double> sb(s.begin(), s.begin() + base.species.size());
            double factor = scale;
            for (const auto& g : gates) factor *= s[gm.network.index_of(g)];
            std::vector<double> dxb, dxg;
            base_odes.eval(sb, dxb);
            gated_odes.eval(s, dxg);
            for (std::size_t v = 0; v < sb.size(); ++v)
                REQUIRE(std::fabs(dxg[v] - factor * dxb[v]) <=
                        1e-12 * (1.0 + std::fabs(factor * dxb[v])));
        }
    }

    // catalyst conservation: zero net right-hand side, exactly
    {
        std::mt19937 rng(515151);
        for (int i = 0; i < 100; ++i, ++cases) {
            ReactionNetwork net = testsupport::random_module(rng);
            PolynomialOdeSystem odes = derive_odes(net);
            std::vector<double> s =
                testsupport::random_state(rng, odes.n_vars(), 0.1, 3.0);
            std::vector<double> dx;
            odes.eval(s, dx);
            for (SpeciesIndex cat : find_catalysts(net)) {
                REQUIRE(odes.rhs[cat].empty());
                REQUIRE(dx[cat] == 0.0);
            }
        }
    }

    // nonnegativity under integration
    {
        std::mt19937 rng(616161);
        IntegratorConfig cfg;
        cfg.rel_tol = 1e-6;
        cfg.abs_tol = 1e-9;
        for (int i = 0; i < 100; ++i, ++cases) {
            ReactionNetwork net = testsupport::random_bounded_network(rng);
            PolynomialOdeSystem odes = derive_odes(net);
            std::vector<double> x0 =
                testsupport::random_state(rng, odes.n_vars(), 0.0, 2.0);
            Trajectory traj = integrate(odes, x0, {0.0, 5.0}, cfg);
            for (const auto& state : traj.states)
                for (double v : state) {
                    REQUIRE(std::isfinite(v));
                    REQUIRE(v >= 0.0);
                }
        }
    }

    // crossing refinement against the decay closed form
    {
        std::mt19937 rng(717171);
        std::uniform_real_distribution<double> k_d(0.2, 3.0), x0_d(1.0, 5.0),
            frac_d(0.1, 0.9);
        IntegratorConfig cfg;
        for (int i = 0; i < 150; ++i, ++cases) {
            double k = k_d(rng), x0 = x0_d(rng);
            double level = frac_d(rng) * x0;
            double t_true = std::log(x0 / level) / k;
            PolynomialOdeSystem sys;
            sys.variables = {"x"};
            sys.rhs.resize(1);
            sys.rhs[0].push_back(Monomial{-k, {1}});
            Trajectory traj = integrate(sys, {x0}, {0.0, t_true + 2.0}, cfg);
            EventSpec ev;
            ev.variable = 0;
            ev.threshold = level;
            ev.direction = EventSpec::Direction::falling;
            auto hits = detect_crossings(traj, ev);
            REQUIRE(hits.size() == 1);
            REQUIRE(std::fabs(hits[0] - t_true) < 1e-6 * std::max(1.0, t_true));
        }
    }

    REQUIRE(cases >= 500);
    return fmt("%d randomized cases across four properties", cases);
}

} // namespace

int main() {
    std::printf("acceptance suite: chemical relaxation oscillator kit\n");
    criterion(1, "period estimate", c1_period_estimate);
    criterion(2, "period measurement", c2_period_measurement);
    criterion(3, "period independence", c3_period_independence);
    criterion(4, "clock symmetry", c4_clock_symmetry);
    criterion(5, "symmetry failure modes", c5_symmetry_failure_modes);
    criterion(6, "counter staircase", c6_counter_staircase);
    criterion(7, "termination by x1", c7_terminate_by_x1);
    criterion(8, "termination by x2", c8_terminate_by_x2);
    criterion(9, "logistic closed form", c9_logistic_closed_form);
    criterion(10, "network emission", c10_network_emission);
    criterion(11, "property suites", c11_property_suites);

    if (g_failures) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all 11 criteria passed\n");
    return 0;
}
