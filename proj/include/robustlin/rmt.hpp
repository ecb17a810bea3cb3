#pragma once

#include "robustlin/problem.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace robustlin {

// Marchenko-Pastur law with aspect ratio gamma = d/n.
struct MpTransform {
    double gamma = 0.5;
    double lo = 0.0;         // (1 - sqrt(gamma))^2
    double hi = 0.0;         // (1 + sqrt(gamma))^2
    double atom_mass = 0.0;  // max(0, 1 - 1/gamma) at zero

    explicit MpTransform(double g) : gamma(g) {
        if (!(g > 0.0) || !std::isfinite(g)) throw std::invalid_argument("mp: gamma must be > 0");
        const double s = std::sqrt(g);
        lo = (1.0 - s) * (1.0 - s);
        hi = (1.0 + s) * (1.0 + s);
        atom_mass = std::max(0.0, 1.0 - 1.0 / g);
    }

    double density(double x) const {
        if (x <= lo || x >= hi || x <= 0.0) return 0.0;
        return std::sqrt((hi - x) * (x - lo)) / (2.0 * std::numbers::pi * gamma * x);
    }

    // Integral of f against the continuous part, with x = c + h cos(theta)
    // removing the square-root edges.
    template <class F>
    double integrate(F f, double* error_out = nullptr) const {
        const double h = 0.5 * (hi - lo);
        auto g = [&](double th) {
            const double ch = std::cos(0.5 * th);
            const double x = lo + 2.0 * h * ch * ch;  // c + h cos(theta) without cancellation at the lower edge
            const double s = std::sin(th);
            if (x <= 0.0) return 0.0;
            return h * h * s * s / (2.0 * std::numbers::pi * gamma * x) * f(x);
        };
        double err = 0.0;
        const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 0.0, std::numbers::pi, 15,
                                                                                         1e-12, &err);
        if (error_out) *error_out = err;
        return v;
    }
};

enum class MpMethod { quadrature, closed_form };

struct MpValue {
    double m = 0.0;        // integral dmu / (x + t)
    double m_prime = 0.0;  // integral dmu / (x + t)^2
};

namespace detail {
inline void check_mp_args(double gamma, double t) {
    if (!(gamma > 0.0)) throw std::invalid_argument("mp_stieltjes: gamma must be > 0");
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("mp_stieltjes: t must be finite and >= 0");
    if (t == 0.0 && gamma >= 1.0)
        throw std::domain_error("mp_stieltjes: t = 0 with gamma >= 1 diverges (atom or hard edge at zero)");
}
}  // namespace detail

// m(-t) and m'(-t). Quadrature is the reference; the closed form solves the
// MP self-consistency gamma z m^2 - (1 - gamma - z) m + 1 = 0 at z = -t.
inline MpValue mp_stieltjes(double gamma, double t, MpMethod method = MpMethod::quadrature) {
    detail::check_mp_args(gamma, t);
    MpValue out;
    if (method == MpMethod::closed_form) {
        const double A = 1.0 - gamma + t;
        const double S = std::sqrt(A * A + 4.0 * gamma * t);
        const double den = A + S;
        out.m = 2.0 / den;
        out.m_prime = 2.0 * (1.0 + (A + 2.0 * gamma) / S) / (den * den);
        return out;
    }
    const MpTransform mp(gamma);
    double e1 = 0.0, e2 = 0.0;
    out.m = mp.integrate([t](double x) { return 1.0 / (x + t); }, &e1);
    out.m_prime = mp.integrate([t](double x) { return 1.0 / ((x + t) * (x + t)); }, &e2);
    if (!std::isfinite(out.m) || !std::isfinite(out.m_prime) || e1 > 1e-8 * std::abs(out.m) ||
        e2 > 1e-8 * std::abs(out.m_prime))
        throw convergence_error("mp_stieltjes: quadrature did not reach 1e-8 relative accuracy");
    if (mp.atom_mass > 0.0) {
        out.m += mp.atom_mass / t;
        out.m_prime += mp.atom_mass / (t * t);
    }
    return out;
}

struct LowSnrPrediction {
    double e_bar = 0.0;  // gamma (m + t m')
    double adv = 0.0;    // r^2 e_bar
};

inline LowSnrPrediction at_lowsnr_asymptotics(double gamma, double t, double r,
                                              MpMethod method = MpMethod::quadrature) {
    if (!(r >= 0.0)) throw std::invalid_argument("at_lowsnr_asymptotics: r must be >= 0");
    const MpValue v = mp_stieltjes(gamma, t, method);
    LowSnrPrediction p;
    p.e_bar = gamma * (v.m + t * v.m_prime);
    p.adv = r * r * p.e_bar;
    return p;
}

// Limit of Delta(w_OLS): 1 - 1/gamma + s2/(gamma - 1) above the interpolation
// threshold, s2 gamma / (1 - gamma) below it.
inline double ols_asymptotic_excess(double gamma, double sigma_tilde2) {
    if (!(gamma > 0.0)) throw std::invalid_argument("ols_asymptotic_excess: gamma must be > 0");
    if (gamma == 1.0) throw std::domain_error("ols_asymptotic_excess: gamma = 1 is the interpolation-threshold pole");
    if (gamma > 1.0) return 1.0 - 1.0 / gamma + sigma_tilde2 / (gamma - 1.0);
    return sigma_tilde2 * gamma / (1.0 - gamma);
}

}  // namespace robustlin
