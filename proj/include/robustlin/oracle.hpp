#pragma once

#include "robustlin/problem.hpp"
#include "robustlin/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace robustlin {

struct ProxOptions {
    int max_iter = 100000;
    double rel_tol = 1e-9;
    bool polish = true;  // exact active-set solve after the l1 bisection
};

namespace detail {

inline void check_lambda(double lambda) {
    if (!(lambda >= 0.0) || std::isnan(lambda)) throw std::invalid_argument("w_prox: lambda must be >= 0");
}

inline double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

// l-infinity attack, dual l1: w_k = ST(mu_k; t)/lambda_k with t = lambda ||w(t)||_1.
inline Vec prox_l1_dual(const ProblemSpec& pb, double lambda, const ProxOptions& opt) {
    const Vec& ev = pb.eigenvalues;
    const Vec mu = ev.cwiseProduct(pb.coeffs);
    const Eigen::Index d = pb.dim();
    auto phi = [&](double t) {
        double l1 = 0.0;
        for (Eigen::Index k = 0; k < d; ++k) l1 += std::max(std::abs(mu[k]) - t, 0.0) / ev[k];
        return t - lambda * l1;
    };
    double lo = 0.0, hi = mu.cwiseAbs().maxCoeff();
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (phi(mid) < 0.0 ? lo : hi) = mid;
    }
    double t = 0.5 * (lo + hi);
    if (opt.polish) {
        // On the active set {|mu_k| > t}: t (1 + lambda sum 1/l_k) = lambda sum |mu_k|/l_k.
        double a = 0.0, b = 0.0;
        for (Eigen::Index k = 0; k < d; ++k)
            if (std::abs(mu[k]) > t) {
                a += 1.0 / ev[k];
                b += std::abs(mu[k]) / ev[k];
            }
        const double te = lambda * b / (1.0 + lambda * a);
        bool consistent = true;
        for (Eigen::Index k = 0; k < d && consistent; ++k) {
            const bool active = std::abs(mu[k]) > t;
            if (active != (std::abs(mu[k]) > te)) consistent = false;
        }
        if (consistent) t = te;
    }
    Vec w(d);
    for (Eigen::Index k = 0; k < d; ++k) w[k] = soft_threshold(mu[k], t) / ev[k];
    return w;
}

// l1 attack, dual l-infinity: for a clip level m the best w is clip(c, -m, m);
// the remaining 1-D problem has increasing derivative in m.
inline Vec prox_linf_dual(const ProblemSpec& pb, double lambda) {
    const Vec& ev = pb.eigenvalues;
    const Vec& c = pb.coeffs;
    const Eigen::Index d = pb.dim();
    auto dphi = [&](double m) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < d; ++k) s += ev[k] * std::max(std::abs(c[k]) - m, 0.0);
        return lambda * m - s;
    };
    double lo = 0.0, hi = c.cwiseAbs().maxCoeff();
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (dphi(mid) < 0.0 ? lo : hi) = mid;
    }
    double m = 0.5 * (lo + hi);
    // Exact on the clipped set: lambda m = sum_{|c_k|>m} l_k (|c_k| - m).
    double a = 0.0, b = 0.0;
    for (Eigen::Index k = 0; k < d; ++k)
        if (std::abs(c[k]) > m) {
            a += ev[k];
            b += ev[k] * std::abs(c[k]);
        }
    const double me = b / (lambda + a);
    bool consistent = true;
    for (Eigen::Index k = 0; k < d && consistent; ++k)
        if ((std::abs(c[k]) > m) != (std::abs(c[k]) > me)) consistent = false;
    if (consistent) m = me;
    Vec w(d);
    for (Eigen::Index k = 0; k < d; ++k) w[k] = std::clamp(c[k], -m, m);
    return w;
}

// 1 < q < 2. Stationarity reads lam_k (w_k - c_k) + mu sign(w_k) |w_k|^{q-1} = 0
// with mu = lambda t^{2-q}, t = ||w||_q. Each coordinate is a monotone scalar
// equation, and t -> ||w(lambda t^{2-q})||_q - t is decreasing, so both levels
// are solved by bisection.
inline Vec prox_lq_dual_small_q(const ProblemSpec& pb, double q, double lambda) {
    const Vec& ev = pb.eigenvalues;
    const Vec& c = pb.coeffs;
    const Eigen::Index d = pb.dim();
    auto solve_at = [&](double mu) {
        Vec w(d);
        for (Eigen::Index k = 0; k < d; ++k) {
            const double a = std::abs(c[k]);
            if (a == 0.0 || mu == 0.0) {
                w[k] = c[k];
                continue;
            }
            double lo = 0.0, hi = a;
            for (int it = 0; it < 200 && hi - lo > 1e-17 * a; ++it) {
                const double mid = 0.5 * (lo + hi);
                (ev[k] * (mid - a) + mu * std::pow(mid, q - 1.0) < 0.0 ? lo : hi) = mid;
            }
            w[k] = std::copysign(0.5 * (lo + hi), c[k]);
        }
        return w;
    };
    double lo = 0.0, hi = lp_norm(c, q);
    for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (lp_norm(solve_at(lambda * std::pow(mid, 2.0 - q)), q) > mid ? lo : hi) = mid;
    }
    return solve_at(lambda * std::pow(0.5 * (lo + hi), 2.0 - q));
}

// General lq dual, 2 < q < inf: accelerated gradient with backtracking and
// function-value restart on f(w) = ||w - w0||_Sigma^2 + lambda ||w||_q^2.
inline Vec prox_lq_dual(const ProblemSpec& pb, double q, double lambda, const ProxOptions& opt) {
    const Eigen::Index d_full = pb.dim();
    std::vector<Eigen::Index> idx;
    for (Eigen::Index k = 0; k < d_full; ++k)
        if (pb.coeffs[k] != 0.0) idx.push_back(k);
    const auto d = static_cast<Eigen::Index>(idx.size());
    Vec ev(d), c(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        ev[i] = pb.eigenvalues[idx[i]];
        c[i] = pb.coeffs[idx[i]];
    }

    auto value = [&](const Vec& w) {
        const double n = lp_norm(w, q);
        return (ev.array() * (w - c).array().square()).sum() + lambda * n * n;
    };
    auto grad = [&](const Vec& w) {
        Vec g = 2.0 * ev.cwiseProduct(w - c);
        const double n = lp_norm(w, q);
        if (n > 0.0) {
            const double scale = 2.0 * lambda * std::pow(n, 2.0 - q);
            for (Eigen::Index i = 0; i < d; ++i)
                g[i] += scale * std::copysign(std::pow(std::abs(w[i]), q - 1.0), w[i]);
        }
        return g;
    };

    auto scatter = [&](const Vec& x) {
        Vec w = Vec::Zero(d_full);
        for (Eigen::Index i = 0; i < d; ++i) w[idx[i]] = x[i];
        return w;
    };
    const double c_norm = c.norm();
    // Rounding floor of the gradient: the tolerance cannot go below it when lambda is tiny.
    const double g_floor = 64.0 * std::numeric_limits<double>::epsilon() * 2.0 * ev.cwiseProduct(c).norm();
    auto certified = [&](const Vec& x, const Vec& gx, double fx) {
        return gx.norm() * (x.norm() + c_norm) <= opt.rel_tol * std::max(fx, 1e-300) || gx.norm() <= g_floor;
    };

    Vec x = c / (1.0 + lambda);
    Vec y = x;
    double fx = value(x);
    double L = 2.0 * (ev.maxCoeff() + lambda * std::max(1.0, std::pow(double(d), std::abs(2.0 / q - 1.0))));
    double tk = 1.0;
    bool restarted = false;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        const Vec gy = grad(y);
        const double fy = value(y);
        Vec xn;
        double fxn;
        while (true) {
            xn = y - gy / L;
            fxn = value(xn);
            if (fxn <= fy - 0.5 * gy.squaredNorm() / L + 1e-15 * std::abs(fy)) break;
            L *= 2.0;
            if (!std::isfinite(L)) throw convergence_error("w_prox: backtracking failed");
        }
        if (fxn > fx) {
            // A plain gradient step from x no longer lowers f in floating
            // point: finish with steps accepted on gradient-norm decrease.
            if (restarted) break;
            y = x;
            tk = 1.0;
            restarted = true;
            continue;
        }
        restarted = false;
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        y = xn + ((tk - 1.0) / tn) * (xn - x);
        x = xn;
        fx = fxn;
        tk = tn;
        L *= 0.9;
        if (certified(x, grad(x), fx)) return scatter(x);
    }
    Vec gx = grad(x);
    for (; it < opt.max_iter; ++it) {
        if (certified(x, gx, fx)) return scatter(x);
        const Vec xn = x - gx / L;
        const Vec gn = grad(xn);
        if (gn.norm() < gx.norm()) {
            x = xn;
            gx = gn;
            fx = value(x);
            L *= 0.9;
        } else {
            L *= 2.0;
            if (!std::isfinite(L)) break;
        }
    }
    throw convergence_error("w_prox: iteration budget exhausted");
}

}  // namespace detail

// Minimizer of ||w - w0||_Sigma^2 + lambda ||w||_*^2.
inline ModelVector w_prox(const ProblemSpec& problem, const AttackNorm& norm, double lambda,
                          const ProxOptions& opt = {}) {
    detail::check_lambda(lambda);
    if (lambda == 0.0) return problem.coeffs;
    if (!std::isfinite(lambda)) return Vec::Zero(problem.dim());
    const Vec& ev = problem.eigenvalues;
    if (norm.kind() == NormKind::mahalanobis) {
        if (norm.B().rows() != problem.dim()) throw dimension_error("w_prox: B dimension mismatch");
        Mat A = lambda * norm.B_inverse();
        A.diagonal() += ev;
        return A.ldlt().solve(ev.cwiseProduct(problem.coeffs));
    }
    if (norm.is_euclidean()) return (ev.array() * problem.coeffs.array() / (ev.array() + lambda)).matrix();
    if (norm.q() == 1.0) return detail::prox_l1_dual(problem, lambda, opt);
    if (std::isinf(norm.q())) return detail::prox_linf_dual(problem, lambda);
    if (norm.q() < 2.0) return detail::prox_lq_dual_small_q(problem, norm.q(), lambda);
    return detail::prox_lq_dual(problem, norm.q(), lambda, opt);
}

struct GF {
    double G = 0.0;
    double F = 0.0;
};

// G(lambda) = ||w_prox - w0||_Sigma^2 and F(r, lambda) = G + r^2 ||w_prox||_*^2.
inline GF gf_values(const ProblemSpec& problem, const AttackNorm& norm, double r, double lambda,
                    const ProxOptions& opt = {}) {
    detail::check_radius(r);
    detail::check_lambda(lambda);
    if (norm.is_euclidean()) {
        const auto l = problem.eigenvalues.array();
        const auto c2 = problem.coeffs.array().square();
        const auto den = (l + lambda).square();
        GF out;
        out.G = lambda * lambda * (l * c2 / den).sum();
        out.F = out.G + r * r * (l * l * c2 / den).sum();
        return out;
    }
    const Vec w = w_prox(problem, norm, lambda, opt);
    const double dist = sigma_norm(problem, w - problem.coeffs);
    const double dn = dual_norm(norm, w);
    return {dist * dist, dist * dist + r * r * dn * dn};
}

inline double free_lunch_threshold(const ProblemSpec& problem, const AttackNorm& norm, double r,
                                   const ProxOptions& opt = {}) {
    detail::check_radius(r);
    if (r == 0.0) return 0.0;
    const double s = w0_sigma_norm2(problem);
    if (!(s > 0.0)) throw std::invalid_argument("free_lunch_threshold: w0 is zero");
    const double g = gf_values(problem, norm, r, r * r, opt).G;
    return std::clamp(std::sqrt(g / s), 0.0, 1.0);
}

namespace detail {
inline void check_eps(double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("eps must lie in [0, 1]");
}
}  // namespace detail

// Root of G(lambda) = eps^2 ||w0||_Sigma^2 on [0, r^2]; r^2 when eps >= eps_FL(r).
inline double lambda_opt(const ProblemSpec& problem, const AttackNorm& norm, double r, double eps,
                         const ProxOptions& opt = {}) {
    detail::check_radius(r);
    detail::check_eps(eps);
    if (r == 0.0 || eps == 0.0) return 0.0;
    const double r2 = r * r;
    if (eps >= free_lunch_threshold(problem, norm, r, opt)) return r2;
    const double target = eps * eps * w0_sigma_norm2(problem);
    const double tol = 1e-12 * std::max(1.0, r2);
    double lo = 0.0, hi = r2;
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gf_values(problem, norm, r, mid, opt).G < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct TradeoffProfile {
    double r = 0.0;
    double eps = 0.0;
    double eps_fl = 0.0;
    double lambda_opt = 0.0;
    double e_opt = 0.0;         // sigma^2 + F(r, r^2), proxy value
    double e_opt_eps = 0.0;     // sigma^2 + F(r, lambda_opt), proxy value
    double exact_adversarial = 0.0;  // E(w_star, r)
    bool free_lunch = false;    // eps >= eps_fl
    ModelVector w_star;
};

inline TradeoffProfile tradeoff_profile(const ProblemSpec& problem, const AttackNorm& norm, double r, double eps,
                                        const ProxOptions& opt = {}) {
    detail::check_radius(r);
    detail::check_eps(eps);
    TradeoffProfile tp;
    tp.r = r;
    tp.eps = eps;
    const double s2 = problem.sigma2();
    if (r == 0.0) {
        tp.w_star = problem.coeffs;
        tp.e_opt = tp.e_opt_eps = s2;
        tp.free_lunch = true;
        tp.exact_adversarial = adversarial_risk(problem, norm, tp.w_star, 0.0);
        return tp;
    }
    const double r2 = r * r;
    tp.eps_fl = free_lunch_threshold(problem, norm, r, opt);
    tp.free_lunch = eps >= tp.eps_fl;
    tp.lambda_opt = lambda_opt(problem, norm, r, eps, opt);
    tp.e_opt = s2 + gf_values(problem, norm, r, r2, opt).F;
    tp.e_opt_eps = tp.free_lunch ? tp.e_opt : s2 + gf_values(problem, norm, r, tp.lambda_opt, opt).F;
    tp.w_star = w_prox(problem, norm, tp.lambda_opt, opt);
    tp.exact_adversarial = adversarial_risk(problem, norm, tp.w_star, r);
    return tp;
}

struct FrontPoint {
    double standard = 0.0;   // sigma^2 + G(lambda)
    double adversarial = 0.0;  // sigma^2 + F(r, lambda)
    double lambda = 0.0;
};

// lambda = 0 followed by n_points - 1 log-spaced values in [1e-8 r^2, r^2].
inline std::vector<FrontPoint> pareto_front(const ProblemSpec& problem, const AttackNorm& norm, double r,
                                            int n_points, const ProxOptions& opt = {}) {
    detail::check_radius(r);
    if (n_points < 2) throw std::invalid_argument("pareto_front: need at least 2 points");
    const double r2 = r * r;
    std::vector<double> lams{0.0};
    const int m = n_points - 1;
    for (int i = 0; i < m; ++i) {
        const double frac = m == 1 ? 1.0 : double(i) / double(m - 1);
        lams.push_back(r2 == 0.0 ? 0.0 : r2 * std::pow(10.0, -8.0 * (1.0 - frac)));
    }
    if (r2 > 0.0) lams.back() = r2;
    std::vector<FrontPoint> out;
    out.reserve(lams.size());
    const double s2 = problem.sigma2();
    for (double l : lams) {
        const GF gf = gf_values(problem, norm, r, l, opt);
        out.push_back({s2 + gf.G, s2 + gf.F, l});
    }
    return out;
}

}  // namespace robustlin
