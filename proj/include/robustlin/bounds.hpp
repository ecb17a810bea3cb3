#pragma once

#include "robustlin/oracle.hpp"
#include "robustlin/problem.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace robustlin {

struct ConditionNumbers {
    double r0 = 0.0;   // ||w0||_Sigma / ||w0||_*
    double r1 = 0.0;   // ||Sigma w0|| / ||w0||_Sigma
    double eta0 = 0.0; // r1 / r0
};

inline ConditionNumbers condition_numbers(const ProblemSpec& problem, const AttackNorm& norm) {
    const double s = std::sqrt(w0_sigma_norm2(problem));
    if (!(s > 0.0)) throw std::invalid_argument("condition_numbers: w0 is zero");
    const Vec sw0 = problem.eigenvalues.cwiseProduct(problem.coeffs);
    ConditionNumbers cn;
    cn.r0 = s / dual_norm(norm, problem.coeffs);
    cn.r1 = primal_norm(norm, sw0) / s;
    cn.eta0 = cn.r1 / cn.r0;
    return cn;
}

struct HT {
    double H = 0.0;
    double T = 0.0;
};

// H(r, eps) = r for r < 1, else delta + (1 - delta) r with delta = min(1, eps);
// T is the matching minimizer of |t - 1| + r|t| over |t - 1| <= eps.
inline HT h_aux(double r_scaled, double eps) {
    if (!(r_scaled >= 0.0) || !(eps >= 0.0)) throw std::invalid_argument("h_aux: arguments must be >= 0");
    if (r_scaled < 1.0) return {r_scaled, 1.0};
    const double delta = std::min(1.0, eps);
    return {delta + (1.0 - delta) * r_scaled, 1.0 - delta};
}

struct Bracket {
    double lower = 0.0;
    double upper = 0.0;
};

// Order-of-magnitude bracket for E_opt(r, eps); absolute constants are not included.
inline Bracket two_sided_bounds(const ProblemSpec& problem, const AttackNorm& norm, double r, double eps) {
    detail::check_radius(r);
    detail::check_eps(eps);
    const ConditionNumbers cn = condition_numbers(problem, norm);
    const double s = w0_sigma_norm2(problem);
    const double hl = h_aux(r / cn.r1, eps).H;
    const double hu = h_aux(r / cn.r0, eps).H;
    return {problem.sigma2() + s * hl * hl, problem.sigma2() + s * hu * hu};
}

struct ShrinkResult {
    double value = 0.0;  // sigma^2 + K(t w0, r)^2 at the best t
    double t_opt = 1.0;
};

// Best model on the chord t * w0 with |t - 1| <= eps.
inline ShrinkResult e_shrink(const ProblemSpec& problem, const AttackNorm& norm, double r, double eps) {
    detail::check_radius(r);
    if (!(eps >= 0.0)) throw std::invalid_argument("e_shrink: eps must be >= 0");
    const ConditionNumbers cn = condition_numbers(problem, norm);
    const HT ht = h_aux(r / cn.r0, eps);
    const double k = std::sqrt(w0_sigma_norm2(problem)) * ht.H;
    return {problem.sigma2() + k * k, ht.T};
}

struct GammaBounds {
    double spectral_lo = 0.0;  // sqrt(sum_k min(r^2, lambda_k) c_k^2)
    double spectral_hi = 0.0;  // sqrt(2) * spectral_lo
    double numeric = 0.0;      // gamma(r) = min_w ||w - w0||_Sigma + r ||w||_2
    double f_lo = 0.0;         // sqrt(F(r, r^2)) <= gamma(r)
    double f_hi = 0.0;         // gamma(r) <= sqrt(2 F(r, r^2))
};

// K-functional gamma(r) for Euclidean attacks. Its minimizer lies on the
// ridge path w(lambda) = Sigma (Sigma + lambda)^{-1} w0, lambda in [0, inf].
inline GammaBounds gamma_bounds(const ProblemSpec& problem, const AttackNorm& norm, double r) {
    if (!norm.is_euclidean()) throw std::invalid_argument("gamma_bounds: only Euclidean attacks are supported");
    detail::check_radius(r);
    const auto l = problem.eigenvalues.array();
    const auto c2 = problem.coeffs.array().square();
    GammaBounds gb;
    gb.spectral_lo = std::sqrt((l.min(r * r) * c2).sum());
    gb.spectral_hi = std::sqrt(2.0) * gb.spectral_lo;
    if (r == 0.0) return gb;

    auto k_of = [&](double lambda) {
        const auto den = l + lambda;
        const double dist = std::sqrt((l * c2 * (lambda / den).square()).sum());
        const double wn = std::sqrt((c2 * (l / den).square()).sum());
        return dist + r * wn;
    };
    const double at_w0 = r * problem.coeffs.norm();
    const double at_zero = std::sqrt(w0_sigma_norm2(problem));
    double best = std::min(at_w0, at_zero);

    const double lmin = l.minCoeff(), lmax = l.maxCoeff();
    const double lo_exp = std::log10(lmin) - 12.0, hi_exp = std::log10(lmax) + 12.0;
    const int n_grid = 2001;
    double best_x = lo_exp, best_grid = kInf;
    for (int i = 0; i < n_grid; ++i) {
        const double x = lo_exp + (hi_exp - lo_exp) * i / (n_grid - 1);
        const double v = k_of(std::pow(10.0, x));
        if (v < best_grid) {
            best_grid = v;
            best_x = x;
        }
    }
    const double step = (hi_exp - lo_exp) / (n_grid - 1);
    auto refined = boost::math::tools::brent_find_minima(
        [&](double x) { return k_of(std::pow(10.0, x)); }, best_x - step, best_x + step, 52);
    gb.numeric = std::min({best, best_grid, refined.second});

    const double f = gf_values(problem, norm, r, r * r).F;
    gb.f_lo = std::sqrt(f);
    gb.f_hi = std::sqrt(2.0 * f);
    return gb;
}

}  // namespace robustlin
