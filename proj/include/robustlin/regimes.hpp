#pragma once

#include "robustlin/bounds.hpp"
#include "robustlin/oracle.hpp"
#include "robustlin/problem.hpp"
#include "robustlin/risk.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace robustlin {

enum class Regime { isotropic, sparse_isotropic, poly_decay, weak_strong, harmonic_linf };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::isotropic: return "isotropic";
        case Regime::sparse_isotropic: return "sparse_isotropic";
        case Regime::poly_decay: return "poly_decay";
        case Regime::weak_strong: return "weak_strong";
        case Regime::harmonic_linf: return "harmonic_linf";
    }
    return "?";
}

// Asymptotic entries (poly_decay, sparse_isotropic) carry constant 1.
struct RegimeProfile {
    Regime regime = Regime::isotropic;
    double eps_fl = 0.0;
    double lambda_opt = 0.0;
    double e_opt = 0.0;
    double e_opt_eps = 0.0;
    bool free_lunch = false;  // eps >= eps_fl, i.e. lambda_opt clamped to r^2
    std::optional<bool> regime_free_lunch;  // the regime-level verdict, where one exists
};

inline constexpr double kKnifeEdgeTol = 1e-12;

inline RegimeProfile isotropic_profile(double S, double sigma2, double r, double eps) {
    if (!(S > 0.0)) throw std::invalid_argument("isotropic_profile: S must be > 0");
    detail::check_radius(r);
    detail::check_eps(eps);
    RegimeProfile p;
    p.regime = Regime::isotropic;
    const double r2 = r * r;
    p.eps_fl = r2 / (1.0 + r2);
    p.free_lunch = eps >= p.eps_fl;
    p.lambda_opt = p.free_lunch ? r2 : eps / (1.0 - eps);
    p.e_opt = sigma2 + S * r2 / (1.0 + r2);
    const double l = p.lambda_opt;
    p.e_opt_eps = p.free_lunch ? p.e_opt : sigma2 + S * (r2 + l * l) / ((1.0 + l) * (1.0 + l));
    return p;
}

// Sigma = I/d, w0 = (1,..,1,0,..,0) with s ones, lp attack.
inline ProblemSpec sparse_isotropic_problem(int d, int s, double sigma2) {
    if (d < 1 || s < 1 || s > d) throw std::invalid_argument("sparse_isotropic: need 1 <= s <= d");
    Vec c = Vec::Zero(d);
    c.head(s).setOnes();
    return ProblemSpec::make(Vec::Constant(d, 1.0 / d), c, std::sqrt(std::max(0.0, sigma2)));
}

inline double sparse_isotropic_r0(int d, int s, double p) {
    const double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
    return std::pow(double(s), inv_p - 0.5) / std::sqrt(double(d));
}

inline RegimeProfile sparse_isotropic_profile(int d, int s, double p, double sigma2, double r, double eps) {
    if (d < 1 || s < 1) throw std::invalid_argument("sparse_isotropic_profile: need d, s >= 1");
    if (s > d) throw std::invalid_argument("sparse_isotropic_profile: s > d");
    if (!(p >= 1.0)) throw std::invalid_argument("sparse_isotropic_profile: p must lie in [1, inf]");
    detail::check_radius(r);
    detail::check_eps(eps);
    RegimeProfile prof;
    prof.regime = Regime::sparse_isotropic;
    const double r0 = sparse_isotropic_r0(d, s, p);
    const double frac = double(s) / double(d);
    const double m = std::min(r / r0, 1.0);
    const double h = h_aux(r / r0, eps).H;
    prof.e_opt = sigma2 + frac * m * m;
    prof.e_opt_eps = sigma2 + frac * h * h;
    const double r2 = r * r;
    if (p == 2.0) {
        // G(lambda) = (s/d) (d lambda)^2 / (1 + d lambda)^2.
        prof.eps_fl = d * r2 / (1.0 + d * r2);
        prof.free_lunch = eps >= prof.eps_fl;
        prof.lambda_opt = prof.free_lunch ? r2 : eps / (d * (1.0 - eps));
    } else {
        const ProblemSpec pb = sparse_isotropic_problem(d, s, sigma2);
        const AttackNorm norm = AttackNorm::lp(p);
        prof.eps_fl = free_lunch_threshold(pb, norm, r);
        prof.free_lunch = eps >= prof.eps_fl;
        prof.lambda_opt = lambda_opt(pb, norm, r, eps);
    }
    return prof;
}

struct PolyExponents {
    double theta = 0.0;  // (1 - delta) / beta
    double phi = 0.0;    // theta / (1 - theta)
};

inline PolyExponents poly_exponents(double beta, double delta) {
    PolyExponents e;
    e.theta = (1.0 - delta) / beta;
    e.phi = e.theta / (1.0 - e.theta);
    return e;
}

// Corollary-level asymptotic G(lambda) for lambda_k = k^-beta, c_k^2 = k^-delta.
inline double poly_g_asymptotic(double beta, double delta, double lambda) {
    const double theta = (1.0 - delta) / beta;
    const double edge = beta + 1.0;
    if (std::abs(delta - edge) <= kKnifeEdgeTol) return lambda * lambda * std::log(1.0 / lambda);
    if (delta < edge) return std::pow(lambda, 1.0 - theta);
    return lambda * lambda;
}

inline RegimeProfile polydecay_profile(double beta, double delta, double sigma2, double r, double eps) {
    if (!(beta > 1.0)) throw std::invalid_argument("polydecay_profile: beta must be > 1");
    if (!(delta >= 0.0)) throw std::invalid_argument("polydecay_profile: delta must be >= 0");
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("polydecay_profile: needs 0 < r < 1");
    detail::check_eps(eps);
    const PolyExponents ex = poly_exponents(beta, delta);
    const bool at_one = std::abs(delta - 1.0) <= kKnifeEdgeTol;
    const bool below_one = !at_one && delta < 1.0;
    const double r2 = r * r;

    RegimeProfile p;
    p.regime = Regime::poly_decay;
    p.regime_free_lunch = !at_one && delta > 1.0;
    p.eps_fl = std::min(1.0, std::sqrt(poly_g_asymptotic(beta, delta, r2)));
    p.free_lunch = eps >= p.eps_fl;

    if (p.free_lunch) {
        p.lambda_opt = r2;
    } else if (eps == 0.0) {
        p.lambda_opt = 0.0;
    } else if (std::abs(delta - (beta + 1.0)) <= kKnifeEdgeTol) {
        // lambda^2 log(1/lambda) = eps^2, increasing on (0, e^{-1/2}); bisection in log lambda.
        double lo = std::log(r2) - 200.0, hi = std::log(r2);
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (poly_g_asymptotic(beta, delta, std::exp(mid)) < eps * eps ? lo : hi) = mid;
        }
        p.lambda_opt = std::exp(0.5 * (lo + hi));
    } else if (delta < beta + 1.0) {
        p.lambda_opt = std::pow(eps, 2.0 / (1.0 - ex.theta));
    } else {
        p.lambda_opt = eps;
    }

    if (below_one) {
        p.e_opt = sigma2 + std::pow(r, 2.0 * (1.0 - ex.theta));
        p.e_opt_eps = sigma2 + eps * eps + r2 * std::pow(eps, -2.0 * ex.phi);
    } else if (at_one) {
        p.e_opt = sigma2 + r2 * std::log(1.0 / r);
        p.e_opt_eps = sigma2 + eps * eps + r2 * std::log(1.0 / eps);
    } else {
        p.e_opt = sigma2 + r2;
        p.e_opt_eps = sigma2 + eps * eps + r2;
    }
    if (p.free_lunch) p.e_opt_eps = p.e_opt;
    return p;
}

struct WeakStrongProfile {
    double h0 = 0.0;
    double e_opt_eps = 0.0;  // sigma^2 + h0^2
    double R = 0.0;          // u + b v
    double eps_star = 0.0;   // v b / R
    bool below_threshold = true;
    std::string branch;      // "r<=b", "b<=r<=1" or "r>=1"
};

// h0(r, eps) = sup_{l >= 0} min(1+l, r) u + min((1+l) b, r) v - R eps l.
// The objective is concave piecewise linear in l; its sup is attained at a breakpoint.
inline WeakStrongProfile weak_strong_profile(double u, double v, double b, double sigma2, double r, double eps) {
    if (!(u >= 0.0 && v >= 0.0)) throw std::invalid_argument("weak_strong_profile: u, v must be >= 0");
    if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("weak_strong_profile: b must lie in [0, 1]");
    detail::check_radius(r);
    if (!(eps >= 0.0)) throw std::invalid_argument("weak_strong_profile: eps must be >= 0");
    WeakStrongProfile out;
    out.R = u + b * v;
    if (!(out.R > 0.0)) throw std::invalid_argument("weak_strong_profile: R = u + b v must be > 0");
    out.eps_star = v * b / out.R;
    out.below_threshold = eps <= out.eps_star;

    auto m = [&](double l) { return std::min(1.0 + l, r) * u + std::min((1.0 + l) * b, r) * v - out.R * eps * l; };
    std::array<double, 3> candidates{0.0, std::max(r - 1.0, 0.0), b > 0.0 ? std::max(r / b - 1.0, 0.0) : 0.0};
    double best = -kInf;
    for (double l : candidates) best = std::max(best, m(l));
    out.h0 = best;
    out.e_opt_eps = sigma2 + best * best;
    out.branch = r <= b ? "r<=b" : (r <= 1.0 ? "b<=r<=1" : "r>=1");
    return out;
}

struct HarmonicProfile {
    double harmonic_number = 0.0;  // H_d = ||w0||_1
    double e_opt_asymptotic = 0.0; // sigma^2 + r^2 log(1/r)^2
    double e_w0_asymptotic = 0.0;  // sigma^2 + (r log d)^2
    double e_w0_exact = 0.0;       // E(w0, r)
    bool in_window = true;         // 1/sqrt(d) <= r <= 1
};

// Sigma = I, (w0)_k = 1/k, l-infinity attack.
inline HarmonicProfile harmonic_linf_profile(int d, double sigma2, double r) {
    if (d < 1) throw std::invalid_argument("harmonic_linf_profile: d must be >= 1");
    detail::check_radius(r);
    if (!(sigma2 >= 0.0)) throw std::invalid_argument("harmonic_linf_profile: sigma2 must be >= 0");
    HarmonicProfile h;
    double hd = 0.0;
    for (int k = d; k >= 1; --k) hd += 1.0 / k;
    h.harmonic_number = hd;
    h.in_window = r >= 1.0 / std::sqrt(double(d)) && r <= 1.0;
    const double lr = r > 0.0 ? std::log(1.0 / r) : 0.0;
    h.e_opt_asymptotic = sigma2 + r * r * lr * lr;
    const double ld = std::log(double(d));
    h.e_w0_asymptotic = sigma2 + r * r * ld * ld;
    h.e_w0_exact = sigma2 + r * r * hd * hd + 2.0 * kHalfNormalMean * r * hd * std::sqrt(sigma2);
    return h;
}

struct FractureResult {
    double exact_sum = 0.0;   // truncated sum plus integral tail correction
    double asymptotic = 0.0;  // D^-c, times log D on the knife edge
    double c = 0.0;
    bool log_flag = false;
    double tail_bound = 0.0;  // bound on the omitted tail sum_{k > k_max} k^{-n beta}
};

// sum_k lambda_k^n / (1 + D lambda_k)^m with lambda_k = k^-beta.
inline FractureResult fracture_sum(double beta, double n_exp, double m_exp, double D,
                                   std::int64_t k_max = 1000000) {
    if (!(beta > 0.0)) throw std::invalid_argument("fracture_sum: beta must be > 0");
    if (!(n_exp * beta > 1.0)) throw std::invalid_argument("fracture_sum: needs n * beta > 1 (tail diverges)");
    if (!(D > 0.0)) throw std::invalid_argument("fracture_sum: D must be > 0");
    if (!(m_exp >= 0.0)) throw std::invalid_argument("fracture_sum: m must be >= 0");
    if (k_max < 1) throw std::invalid_argument("fracture_sum: k_max must be >= 1");
    FractureResult out;
    const double slope = n_exp - 1.0 / beta;
    out.c = std::min(m_exp, slope);
    out.log_flag = std::abs(m_exp - slope) <= kKnifeEdgeTol;
    out.asymptotic = std::pow(D, -out.c) * (out.log_flag ? std::log(D) : 1.0);

    auto term = [&](double k) {
        const double lk = std::pow(k, -beta);
        return std::pow(lk, n_exp) / std::pow(1.0 + D * lk, m_exp);
    };
    // Neumaier-compensated sum, smallest terms first.
    double sum = 0.0, comp = 0.0;
    for (std::int64_t k = k_max; k >= 1; --k) {
        const double x = term(double(k));
        const double t = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    const double K = double(k_max);
    const double a = K + 0.5;
    // Midpoint-rule tail: integral of the summand over [K + 1/2, inf), mapped to u = a/x in (0, 1].
    const double nb = n_exp * beta;
    const double da = D * std::pow(a, -beta);
    auto tail_integrand = [&](double u) {
        return u <= 0.0 ? 0.0 : std::pow(u, nb - 2.0) / std::pow(1.0 + da * std::pow(u, beta), m_exp);
    };
    const double tail = std::pow(a, 1.0 - nb) * boost::math::quadrature::tanh_sinh<double>().integrate(tail_integrand, 0.0, 1.0);
    out.exact_sum = sum + comp + tail;
    out.tail_bound = std::pow(K, 1.0 - n_exp * beta) / (n_exp * beta - 1.0);
    return out;
}

}  // namespace robustlin
