#pragma once

// ProblemSpec <-> TOML, and parsing of attack-norm specs such as "l2", "linf", "l3".

#include "robustlin/problem.hpp"
#include "robustlin/toml_lite.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace robustlin {

namespace detail {

// Splits "name(a,b)" into name and numeric arguments.
inline bool parse_call(const std::string& text, std::string& name, std::vector<double>& args) {
    args.clear();
    auto open = text.find('(');
    if (open == std::string::npos) {
        name = text;
        return true;
    }
    if (text.back() != ')') return false;
    name = text.substr(0, open);
    std::string inner = text.substr(open + 1, text.size() - open - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t used = 0;
            args.push_back(std::stod(item, &used));
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
            if (used != item.size()) return false;
        } catch (const std::exception&) {
            return false;
        }
    }
    return true;
}

inline Vec vector_from(const toml::Value& v, const char* what) {
    std::vector<double> xs = v.as_doubles();
    if (xs.empty()) throw std::invalid_argument(std::string("problem: empty ") + what);
    return Eigen::Map<Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

inline Eigen::Index dim_from(const toml::Table& t) {
    auto it = t.find("d");
    if (it == t.end()) throw std::invalid_argument("problem: generator shorthand needs key 'd'");
    auto d = it->second.as_int();
    if (d < 1) throw std::invalid_argument("problem: d must be >= 1");
    return static_cast<Eigen::Index>(d);
}

}  // namespace detail

inline Vec make_spectrum(const std::string& spec, Eigen::Index d) {
    std::string name;
    std::vector<double> a;
    if (!detail::parse_call(spec, name, a)) throw std::invalid_argument("problem: bad spectrum '" + spec + "'");
    Vec lam(d);
    if (name == "isotropic") {
        double level = a.empty() ? 1.0 : a[0];
        if (a.size() > 1 || !(level > 0)) throw std::invalid_argument("problem: isotropic(level) needs level > 0");
        lam.setConstant(level);
    } else if (name == "poly") {
        if (a.size() != 1) throw std::invalid_argument("problem: poly(beta) takes one argument");
        for (Eigen::Index k = 0; k < d; ++k) lam[k] = std::pow(double(k + 1), -a[0]);
    } else if (name == "weak_strong") {
        if (a.size() != 2) throw std::invalid_argument("problem: weak_strong(d1,b) takes two arguments");
        const auto d1 = static_cast<Eigen::Index>(a[0]);
        const double b = a[1];
        if (d1 < 1 || d1 >= d || !(b > 0 && b <= 1))
            throw std::invalid_argument("problem: weak_strong needs 1 <= d1 < d and b in (0,1]");
        for (Eigen::Index k = 0; k < d; ++k) lam[k] = k < d1 ? 1.0 : b * b;
    } else {
        throw std::invalid_argument("problem: unknown spectrum '" + spec + "'");
    }
    return lam;
}

inline Vec make_coeffs(const std::string& spec, Eigen::Index d) {
    std::string name;
    std::vector<double> a;
    if (!detail::parse_call(spec, name, a)) throw std::invalid_argument("problem: bad coeffs '" + spec + "'");
    Vec c(d);
    if (name == "ones") {
        c.setOnes();
    } else if (name == "sparse") {
        if (a.size() != 1) throw std::invalid_argument("problem: sparse(s) takes one argument");
        const auto s = static_cast<Eigen::Index>(a[0]);
        if (s < 1 || s > d) throw std::invalid_argument("problem: sparse(s) needs 1 <= s <= d");
        c.setZero();
        c.head(s).setOnes();
    } else if (name == "harmonic") {
        for (Eigen::Index k = 0; k < d; ++k) c[k] = 1.0 / double(k + 1);
    } else if (name == "poly") {
        if (a.size() != 1) throw std::invalid_argument("problem: poly(delta) takes one argument");
        for (Eigen::Index k = 0; k < d; ++k) c[k] = std::pow(double(k + 1), -a[0] / 2.0);
    } else {
        throw std::invalid_argument("problem: unknown coeffs '" + spec + "'");
    }
    return c;
}

// Reads keys `eigenvalues` | `spectrum`, `coeffs`, `noise_sd` (and `d` for
// generator shorthands) from a TOML table.
inline ProblemSpec problem_from_toml(const toml::Value& table) {
    const auto& t = table.as_table();
    ProblemSpec p;
    auto ev = t.find("eigenvalues");
    auto sp = t.find("spectrum");
    if (ev != t.end() && sp != t.end()) throw std::invalid_argument("problem: give eigenvalues or spectrum, not both");
    if (ev != t.end())
        p.eigenvalues = detail::vector_from(ev->second, "eigenvalues");
    else if (sp != t.end())
        p.eigenvalues = make_spectrum(sp->second.as_string(), detail::dim_from(t));
    else
        throw std::invalid_argument("problem: missing eigenvalues");

    auto co = t.find("coeffs");
    if (co == t.end()) throw std::invalid_argument("problem: missing coeffs");
    if (co->second.is_string())
        p.coeffs = make_coeffs(co->second.as_string(), p.eigenvalues.size());
    else
        p.coeffs = detail::vector_from(co->second, "coeffs");

    if (auto ns = t.find("noise_sd"); ns != t.end()) p.noise_sd = ns->second.as_double();
    p.validate();
    return p;
}

inline ProblemSpec problem_from_toml_text(const std::string& text) {
    toml::Value root = toml::parse(text);
    if (const toml::Value* sub = root.find("problem")) return problem_from_toml(*sub);
    return problem_from_toml(root);
}

inline std::string problem_to_toml(const ProblemSpec& p) {
    auto list = [](const Vec& v) {
        std::string s = "[";
        char buf[40];
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", v[i]);
            if (i) s += ", ";
            s += buf;
        }
        return s + "]";
    };
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", p.noise_sd);
    return "eigenvalues = " + list(p.eigenvalues) + "\ncoeffs = " + list(p.coeffs) + "\nnoise_sd = " + buf + "\n";
}

// "l2", "linf", "inf", "l1", "l3", "lp(3)", or a bare number.
inline AttackNorm parse_norm(const std::string& spec) {
    std::string s = spec;
    if (s == "linf" || s == "inf" || s == "Linf") return AttackNorm::linf();
    std::string name;
    std::vector<double> a;
    if (detail::parse_call(s, name, a) && name == "lp" && a.size() == 1) return AttackNorm::lp(a[0]);
    if (!s.empty() && (s[0] == 'l' || s[0] == 'L')) s = s.substr(1);
    try {
        size_t used = 0;
        double p = std::stod(s, &used);
        if (used == s.size()) return AttackNorm::lp(p);
    } catch (const std::invalid_argument&) {
    } catch (const std::out_of_range&) {
    }
    throw std::invalid_argument("unknown norm spec '" + spec + "'");
}

}  // namespace robustlin
