#pragma once

// Hand-rolled generators and brute-force reference solvers shared by the tests.

#include "robustlin/robustlin.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace testsupport {

using robustlin::AttackNorm;
using robustlin::Mat;
using robustlin::ProblemSpec;
using robustlin::Vec;

struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
    double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng); }

    Vec gaussian(Eigen::Index d, double scale = 1.0) {
        Vec v(d);
        for (Eigen::Index i = 0; i < d; ++i) v[i] = scale * normal();
        return v;
    }

    ProblemSpec problem(int d_max, double lam_lo = 1e-2, double lam_hi = 10.0) {
        const int d = integer(1, d_max);
        Vec lam(d);
        for (int k = 0; k < d; ++k) lam[k] = log_uniform(lam_lo, lam_hi);
        std::sort(lam.begin(), lam.end(), std::greater<>());
        Vec c = gaussian(d);
        if (c.norm() == 0.0) c[0] = 1.0;
        return ProblemSpec::make(lam, c, uniform(0.0, 1.0) < 0.2 ? 0.0 : uniform(0.0, 1.5));
    }

    // l1, l1.5, l2, l3, linf attacks.
    AttackNorm lp_norm() {
        static const double ps[] = {1.0, 1.5, 2.0, 3.0, robustlin::kInf};
        return AttackNorm::lp(ps[integer(0, 4)]);
    }

    // w near w0, near zero, or unrelated.
    Vec model(const ProblemSpec& pb) {
        switch (integer(0, 2)) {
            case 0: return pb.coeffs + gaussian(pb.dim(), 0.3);
            case 1: return gaussian(pb.dim(), 0.1);
            default: return gaussian(pb.dim());
        }
    }
};

// Euclidean projection onto the l1 ball of radius t (sort-based).
inline Vec project_l1_ball(const Vec& v, double t) {
    if (v.lpNorm<1>() <= t) return v;
    std::vector<double> u(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) u[i] = std::abs(v[i]);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cum += u[j];
        const double th = (cum - t) / double(j + 1);
        if (u[j] - th > 0.0) theta = th;
    }
    Vec out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = std::copysign(std::max(std::abs(v[i]) - theta, 0.0), v[i]);
    return out;
}

// min_w sum_k lam_k (w_k - c_k)^2 + lambda ||w||_1^2 by golden search on t = ||w||_1,
// each inner problem solved by projected gradient onto the l1 ball.
inline double linf_prox_objective_oracle(const ProblemSpec& pb, double lambda, Vec* w_out = nullptr) {
    const Vec& lam = pb.eigenvalues;
    const Vec& c = pb.coeffs;
    const double L = 2.0 * lam.maxCoeff();
    auto inner = [&](double t, Vec& w) {
        w = project_l1_ball(c, t);
        for (int it = 0; it < 20000; ++it) {
            const Vec g = 2.0 * lam.cwiseProduct(w - c);
            Vec nw = project_l1_ball(w - g / L, t);
            const double step = (nw - w).norm();
            w = std::move(nw);
            if (step < 1e-14) break;
        }
        return (lam.array() * (w - c).array().square()).sum() + lambda * t * t;
    };
    double a = 0.0, b = c.lpNorm<1>();
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    Vec w;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = inner(x1, w), f2 = inner(x2, w);
    for (int it = 0; it < 120; ++it) {
        if (f1 < f2) {
            b = x2, x2 = x1, f2 = f1;
            x1 = b - phi * (b - a);
            f1 = inner(x1, w);
        } else {
            a = x1, x1 = x2, f1 = f2;
            x2 = a + phi * (b - a);
            f2 = inner(x2, w);
        }
    }
    const double best = inner(0.5 * (a + b), w);
    if (w_out) *w_out = w;
    return best;
}

// Objective of the proximal problem for any attack norm.
inline double prox_objective(const ProblemSpec& pb, const AttackNorm& norm, double lambda, const Vec& w) {
    const double dn = robustlin::dual_norm(norm, w);
    return (pb.eigenvalues.array() * (w - pb.coeffs).array().square()).sum() + lambda * dn * dn;
}

// Lasso objective (1/(2n)) ||X w - y||^2 + lam ||w||_1.
inline double lasso_objective(const robustlin::Dataset& ds, double lam, const Vec& w) {
    const Vec r = ds.features * w - ds.responses;
    return 0.5 * r.squaredNorm() / double(ds.n()) + lam * w.lpNorm<1>();
}

// Reference Lasso: accelerated proximal gradient (FISTA) on the raw design.
inline Vec lasso_fista(const robustlin::Dataset& ds, double lam, int iters = 200000) {
    const double n = double(ds.n());
    const Mat& X = ds.features;
    const double L = Eigen::JacobiSVD<Mat>(X).singularValues()[0];
    const double step = n / (L * L);
    Vec w = Vec::Zero(ds.d()), y = w, prev = w;
    double t = 1.0;
    for (int it = 0; it < iters; ++it) {
        const Vec g = X.transpose() * (X * y - ds.responses) / n;
        Vec z = y - step * g;
        for (Eigen::Index j = 0; j < z.size(); ++j)
            z[j] = std::copysign(std::max(std::abs(z[j]) - step * lam, 0.0), z[j]);
        prev = w;
        w = z;
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = w + ((t - 1.0) / tn) * (w - prev);
        t = tn;
        if ((w - prev).norm() < 1e-15) break;
    }
    return w;
}

// Spearman rank correlation (no ties expected).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = double(i);
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double n = double(x.size());
    double d2 = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) mx += std::log(x[i]), my += std::log(y[i]);
    mx /= double(n), my /= double(n);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::log(x[i]) - mx;
        sxy += a * (std::log(y[i]) - my);
        sxx += a * a;
    }
    return sxy / sxx;
}

}  // namespace testsupport
