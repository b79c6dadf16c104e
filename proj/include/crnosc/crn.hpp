#ifndef CRNOSC_CRN_HPP
#define CRNOSC_CRN_HPP

// Mass-action reaction networks and their polynomial ODE semantics.
// A network is a list of named species plus reactions between integer
// complexes; derive_odes expands mass-action kinetics into an explicit
// polynomial vector field, and crn_from_polynomial_odes inverts that
// translation for realizable systems.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace crnosc {

using SpeciesIndex = std::size_t;

// Integer combination of species, e.g. {X:4} or {X:1, Y:1}. Empty map is
// the null complex (written 0 in arrow notation).
struct Complex {
    std::map<SpeciesIndex, unsigned> stoich;

    bool operator==(const Complex& other) const { return stoich == other.stoich; }
    bool empty() const { return stoich.empty(); }

    unsigned coefficient(SpeciesIndex s) const {
        auto it = stoich.find(s);
        return it == stoich.end() ? 0u : it->second;
    }
};

struct Reaction {
    Complex reactants;
    Complex products;
    double rate_constant = 0.0;
};

struct ReactionNetwork {
    std::vector<std::string> species;
    std::vector<Reaction> reactions;

    std::size_t n_species() const { return species.size(); }

    SpeciesIndex index_of(const std::string& name) const {
        auto it = std::find(species.begin(), species.end(), name);
        if (it == species.end())
            throw std::invalid_argument("unknown species: " + name);
        return static_cast<SpeciesIndex>(it - species.begin());
    }

    bool has_species(const std::string& name) const {
        return std::find(species.begin(), species.end(), name) != species.end();
    }

    // Returns the index, adding the species if it is new.
    SpeciesIndex ensure_species(const std::string& name) {
        auto it = std::find(species.begin(), species.end(), name);
        if (it != species.end())
            return static_cast<SpeciesIndex>(it - species.begin());
        species.push_back(name);
        return species.size() - 1;
    }

    void validate() const {
        if (species.empty())
            throw std::invalid_argument("network has no species");
        std::set<std::string> seen;
        for (const auto& name : species) {
            if (name.empty())
                throw std::invalid_argument("empty species name");
            if (!seen.insert(name).second)
                throw std::invalid_argument("duplicate species name: " + name);
        }
        for (std::size_t i = 0; i < reactions.size(); ++i) {
            const Reaction& r = reactions[i];
            if (!(r.rate_constant > 0.0))
                throw std::invalid_argument("reaction " + std::to_string(i) +
                                            " has nonpositive rate constant");
            if (r.reactants == r.products)
                throw std::invalid_argument("reaction " + std::to_string(i) +
                                            " is a null reaction");
            for (const auto& [s, c] : r.reactants.stoich) {
                if (s >= species.size())
                    throw std::invalid_argument("reactant species index out of range");
                if (c == 0)
                    throw std::invalid_argument("zero stoichiometric coefficient");
            }
            for (const auto& [s, c] : r.products.stoich) {
                if (s >= species.size())
                    throw std::invalid_argument("product species index out of range");
                if (c == 0)
                    throw std::invalid_argument("zero stoichiometric coefficient");
            }
        }
    }
};

// One term c * prod_i x_i^e_i of a polynomial right hand side. Exponents are
// stored densely over all system variables.
struct Monomial {
    double coeff = 0.0;
    std::vector<unsigned> exps;

    double eval(const std::vector<double>& x) const {
        double m = coeff;
        for (std::size_t i = 0; i < exps.size(); ++i) {
            unsigned e = exps[i];
            double xi = x[i];
            while (e >= 4) { // cheap pow for the small exponents we see
                double x2 = xi * xi;
                m *= x2 * x2;
                e -= 4;
            }
            for (; e > 0; --e) m *= xi;
        }
        return m;
    }
};

struct PolynomialOdeSystem {
    std::vector<std::string> variables;
    std::vector<std::vector<Monomial>> rhs; // rhs[i] = terms of d(variables[i])/dt

    std::size_t n_vars() const { return variables.size(); }

    bool has_var(const std::string& name) const {
        return std::find(variables.begin(), variables.end(), name) != variables.end();
    }

    std::size_t var_index(const std::string& name) const {
        auto it = std::find(variables.begin(), variables.end(), name);
        if (it == variables.end())
            throw std::invalid_argument("unknown variable: " + name);
        return static_cast<std::size_t>(it - variables.begin());
    }

    void eval(const std::vector<double>& x, std::vector<double>& dx) const {
        dx.assign(n_vars(), 0.0);
        for (std::size_t i = 0; i < rhs.size(); ++i)
            for (const Monomial& m : rhs[i])
                dx[i] += m.eval(x);
    }

    std::vector<double> eval(const std::vector<double>& x) const {
        std::vector<double> dx;
        eval(x, dx);
        return dx;
    }

    // Dense Jacobian, row-major: J[i*n+k] = d(rhs_i)/d(x_k). Exact since each
    // term is a monomial.
    void jacobian(const std::vector<double>& x, std::vector<double>& jac) const {
        const std::size_t n = n_vars();
        jac.assign(n * n, 0.0);
        for (std::size_t i = 0; i < rhs.size(); ++i) {
            for (const Monomial& m : rhs[i]) {
                for (std::size_t k = 0; k < n; ++k) {
                    unsigned ek = m.exps.size() > k ? m.exps[k] : 0u;
                    if (ek == 0) continue;
                    double d = m.coeff * static_cast<double>(ek);
                    for (std::size_t j = 0; j < n; ++j) {
                        unsigned e = m.exps.size() > j ? m.exps[j] : 0u;
                        if (j == k) e -= 1;
                        for (; e > 0; --e) d *= x[j];
                    }
                    jac[i * n + k] += d;
                }
            }
        }
    }

    // Merge terms with equal exponent vectors and drop exact zeros.
    void normalize() {
        for (auto& terms : rhs) {
            std::map<std::vector<unsigned>, double> acc;
            for (auto& m : terms) {
                std::vector<unsigned> key = m.exps;
                key.resize(n_vars(), 0u);
                acc[key] += m.coeff;
            }
            terms.clear();
            for (auto& [key, c] : acc) {
                if (c == 0.0) continue;
                terms.push_back(Monomial{c, key});
            }
        }
    }
};

// --- mass-action expansion ------------------------------------------------

inline PolynomialOdeSystem derive_odes(const ReactionNetwork& net) {
    net.validate();
    const std::size_t n = net.n_species();
    PolynomialOdeSystem sys;
    sys.variables = net.species;
    sys.rhs.assign(n, {});
    for (const Reaction& r : net.reactions) {
        std::vector<unsigned> exps(n, 0u);
        for (const auto& [s, c] : r.reactants.stoich) exps[s] = c;
        for (std::size_t i = 0; i < n; ++i) {
            long long delta = static_cast<long long>(r.products.coefficient(i)) -
                              static_cast<long long>(r.reactants.coefficient(i));
            if (delta == 0) continue;
            sys.rhs[i].push_back(
                Monomial{r.rate_constant * static_cast<double>(delta), exps});
        }
    }
    sys.normalize();
    return sys;
}

// Net stoichiometry matrix, species x reactions.
inline std::vector<std::vector<long long>> stoichiometric_matrix(const ReactionNetwork& net) {
    net.validate();
    std::vector<std::vector<long long>> gamma(
        net.n_species(), std::vector<long long>(net.reactions.size(), 0));
    for (std::size_t j = 0; j < net.reactions.size(); ++j) {
        const Reaction& r = net.reactions[j];
        for (std::size_t i = 0; i < net.n_species(); ++i)
            gamma[i][j] = static_cast<long long>(r.products.coefficient(i)) -
                          static_cast<long long>(r.reactants.coefficient(i));
    }
    return gamma;
}

// A catalyst is a species whose net production is zero in every reaction,
// i.e. its ODE is structurally zero. It may still modulate rates.
inline std::set<SpeciesIndex> find_catalysts(const ReactionNetwork& net) {
    auto gamma = stoichiometric_matrix(net);
    std::set<SpeciesIndex> cats;
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        bool zero = true;
        for (long long g : gamma[i])
            if (g != 0) { zero = false; break; }
        if (zero) cats.insert(i);
    }
    return cats;
}

// --- realizability and the inverse translation ----------------------------

struct RealizabilityViolation {
    std::size_t variable = 0;
    Monomial term;
};

struct RealizabilityReport {
    bool ok = true;
    std::vector<RealizabilityViolation> violations;
};

// A polynomial system maps onto mass-action kinetics iff every negative term
// in d(x_i)/dt carries at least one factor of x_i, so a species is only
// consumed where it is present.
inline RealizabilityReport validate_realizability(const PolynomialOdeSystem& sys) {
    RealizabilityReport rep;
    for (std::size_t i = 0; i < sys.rhs.size(); ++i) {
        for (const Monomial& m : sys.rhs[i]) {
            if (m.coeff >= 0.0) continue;
            unsigned ei = m.exps.size() > i ? m.exps[i] : 0u;
            if (ei == 0) {
                rep.ok = false;
                rep.violations.push_back(RealizabilityViolation{i, m});
            }
        }
    }
    return rep;
}

inline std::string monomial_text(const Monomial& m, const std::vector<std::string>& names);

// Term-by-term translation: a positive term c*x^a in d(x_i)/dt becomes
// a -> a + e_i with rate c, a negative term becomes a -> a - e_i with
// rate |c| (realizability guarantees a_i >= 1 there).
inline ReactionNetwork crn_from_polynomial_odes(const PolynomialOdeSystem& sys_in) {
    PolynomialOdeSystem sys = sys_in;
    sys.normalize();
    RealizabilityReport rep = validate_realizability(sys);
    if (!rep.ok) {
        std::ostringstream msg;
        msg << "system is not realizable as a mass-action network;";
        for (const auto& v : rep.violations)
            msg << " d" << sys.variables[v.variable] << "/dt has term "
                << monomial_text(v.term, sys.variables) << " without a "
                << sys.variables[v.variable] << " factor;";
        throw std::invalid_argument(msg.str());
    }

    ReactionNetwork net;
    net.species = sys.variables;
    for (std::size_t i = 0; i < sys.rhs.size(); ++i) {
        for (const Monomial& m : sys.rhs[i]) {
            if (m.coeff == 0.0) continue;
            Reaction r;
            for (std::size_t j = 0; j < m.exps.size(); ++j)
                if (m.exps[j] > 0) r.reactants.stoich[j] = m.exps[j];
            r.products = r.reactants;
            if (m.coeff > 0.0) {
                r.products.stoich[i] += 1;
                r.rate_constant = m.coeff;
            } else {
                unsigned pi = r.products.stoich[i];
                if (pi == 1)
                    r.products.stoich.erase(i);
                else
                    r.products.stoich[i] = pi - 1;
                r.rate_constant = -m.coeff;
            }
            net.reactions.push_back(std::move(r));
        }
    }
    net.validate();
    return net;
}

// Substitute a constant value for one variable and drop it from the system.
// Used when a conserved species (a pure catalyst like the threshold species)
// should appear in the network but not in the integrated state.
inline PolynomialOdeSystem fold_constant(const PolynomialOdeSystem& sys_in,
                                         std::size_t var, double value) {
    if (var >= sys_in.n_vars())
        throw std::invalid_argument("fold_constant: variable index out of range");
    if (!sys_in.rhs[var].empty())
        throw std::invalid_argument("fold_constant: variable " +
                                    sys_in.variables[var] + " is not constant");
    PolynomialOdeSystem out;
    for (std::size_t j = 0; j < sys_in.n_vars(); ++j)
        if (j != var) out.variables.push_back(sys_in.variables[j]);
    for (std::size_t i = 0; i < sys_in.n_vars(); ++i) {
        if (i == var) continue;
        std::vector<Monomial> terms;
        for (const Monomial& m : sys_in.rhs[i]) {
            Monomial t;
            t.coeff = m.coeff;
            unsigned ev = m.exps.size() > var ? m.exps[var] : 0u;
            for (unsigned k = 0; k < ev; ++k) t.coeff *= value;
            for (std::size_t j = 0; j < sys_in.n_vars(); ++j) {
                if (j == var) continue;
                t.exps.push_back(m.exps.size() > j ? m.exps[j] : 0u);
            }
            terms.push_back(std::move(t));
        }
        out.rhs.push_back(std::move(terms));
    }
    out.normalize();
    return out;
}

// --- text and JSON rendering ----------------------------------------------

inline std::string format_rate(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline std::string complex_text(const Complex& c, const std::vector<std::string>& names) {
    if (c.empty()) return "0";
    std::string out;
    bool first = true;
    for (const auto& [s, k] : c.stoich) {
        if (!first) out += " + ";
        first = false;
        if (k != 1) out += std::to_string(k);
        out += names.at(s);
    }
    return out;
}

inline std::string monomial_text(const Monomial& m, const std::vector<std::string>& names) {
    std::string out = format_rate(m.coeff);
    for (std::size_t j = 0; j < m.exps.size(); ++j) {
        for (unsigned k = 0; k < m.exps[j]; ++k) {
            out += "*";
            out += names.at(j);
        }
    }
    return out;
}

inline std::string reaction_text(const Reaction& r, const std::vector<std::string>& names) {
    return complex_text(r.reactants, names) + " ->[" + format_rate(r.rate_constant) +
           "] " + complex_text(r.products, names);
}

inline std::string network_text(const ReactionNetwork& net) {
    std::string out;
    for (const Reaction& r : net.reactions) {
        out += reaction_text(r, net.species);
        out += "\n";
    }
    return out;
}

inline nlohmann::json complex_to_json(const Complex& c, const std::vector<std::string>& names) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [s, k] : c.stoich) j[names.at(s)] = k;
    return j;
}

inline nlohmann::json network_to_json(const ReactionNetwork& net) {
    net.validate();
    nlohmann::json j;
    j["species"] = net.species;
    j["reactions"] = nlohmann::json::array();
    for (const Reaction& r : net.reactions) {
        nlohmann::json jr;
        jr["reactants"] = complex_to_json(r.reactants, net.species);
        jr["products"] = complex_to_json(r.products, net.species);
        jr["rate"] = r.rate_constant;
        j["reactions"].push_back(jr);
    }
    return j;
}

inline ReactionNetwork network_from_json(const nlohmann::json& j) {
    ReactionNetwork net;
    if (!j.contains("species") || !j["species"].is_array())
        throw std::invalid_argument("network JSON lacks a species array");
    for (const auto& s : j["species"]) net.species.push_back(s.get<std::string>());
    auto parse_complex = [&](const nlohmann::json& jc) {
        Complex c;
        for (auto it = jc.begin(); it != jc.end(); ++it) {
            unsigned k = it.value().get<unsigned>();
            if (k == 0) throw std::invalid_argument("zero stoichiometric coefficient");
            c.stoich[net.index_of(it.key())] = k;
        }
        return c;
    };
    if (j.contains("reactions")) {
        for (const auto& jr : j["reactions"]) {
            Reaction r;
            r.reactants = parse_complex(jr.at("reactants"));
            r.products = parse_complex(jr.at("products"));
            r.rate_constant = jr.at("rate").get<double>();
            net.reactions.push_back(std::move(r));
        }
    }
    net.validate();
    return net;
}

} // namespace crnosc

#endif
