#pragma once

#include "robustlin/problem.hpp"
#include "robustlin/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <thread>
#include <vector>

namespace robustlin {

// sqrt(2/pi), the mean of |N(0,1)|.
inline const double kHalfNormalMean = std::sqrt(2.0 / std::numbers::pi);
// Sandwich constants: E_bar <= E <= kC2 * E_bar and E_tilde / kC1 <= E <= kC2 * E_tilde.
// With sigma = 0 the second reads E <= E_tilde <= kC1 * E.
inline const double kC1 = 2.0 / (1.0 + kHalfNormalMean);
inline const double kC2 = 1.0 + kHalfNormalMean;

struct RiskReport {
    double standard = 0.0;
    double adversarial = 0.0;
    double proxy_bar = 0.0;
    double proxy_tilde = 0.0;
    double k_value = 0.0;
    double excess = 0.0;
};

struct ProxyRisks {
    double bar = 0.0;
    double tilde = 0.0;
    double k_value = 0.0;
};

namespace detail {
inline void check_radius(double r) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("attack strength r must be finite and >= 0");
}
}  // namespace detail

inline double standard_risk(const ProblemSpec& problem, const ModelVector& w) {
    detail::check_dim(problem, w);
    return problem.sigma2() + (problem.eigenvalues.array() * (w - problem.coeffs).array().square()).sum();
}

// E(w) + r^2 ||w||_*^2 + 2 sqrt(2/pi) r ||w||_* sqrt(E(w)).
inline double adversarial_risk(const ProblemSpec& problem, const AttackNorm& norm, const ModelVector& w, double r) {
    detail::check_radius(r);
    const double e = standard_risk(problem, w);
    const double a = r * dual_norm(norm, w);
    return e + a * a + 2.0 * kHalfNormalMean * a * std::sqrt(e);
}

inline ProxyRisks proxy_risks(const ProblemSpec& problem, const AttackNorm& norm, const ModelVector& w, double r) {
    detail::check_radius(r);
    detail::check_dim(problem, w);
    const double dist = sigma_norm(problem, w - problem.coeffs);
    const double a = r * dual_norm(norm, w);
    ProxyRisks out;
    out.bar = problem.sigma2() + dist * dist + a * a;
    out.k_value = dist + a;
    out.tilde = problem.sigma2() + out.k_value * out.k_value;
    return out;
}

inline double excess_risk(const ProblemSpec& problem, const ModelVector& w) {
    const double s = w0_sigma_norm2(problem);
    if (!(s > 0.0)) throw std::invalid_argument("excess risk: ||w0||_Sigma is zero");
    detail::check_dim(problem, w);
    return (problem.eigenvalues.array() * (w - problem.coeffs).array().square()).sum() / s;
}

inline RiskReport risk_report(const ProblemSpec& problem, const AttackNorm& norm, const ModelVector& w, double r) {
    RiskReport rep;
    rep.standard = standard_risk(problem, w);
    rep.adversarial = adversarial_risk(problem, norm, w, r);
    const ProxyRisks px = proxy_risks(problem, norm, w, r);
    rep.proxy_bar = px.bar;
    rep.proxy_tilde = px.tilde;
    rep.k_value = px.k_value;
    rep.excess = excess_risk(problem, w);
    return rep;
}

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

inline constexpr std::int64_t kMcChunk = 8192;

// Monte-Carlo estimate of E(w,r): the inner sup is closed form,
// sup_{|delta|<=r} |(x+delta)'w - y| = |x'w - y| + r ||w||_*, so only the
// expectation over (x, z) is sampled. Chunk c draws from substream(seed, c),
// so the result does not depend on `workers`.
inline McEstimate mc_adversarial_risk(const ProblemSpec& problem, const AttackNorm& norm, const ModelVector& w,
                                      double r, std::int64_t n_samples, std::uint64_t seed, int workers = 1) {
    detail::check_radius(r);
    detail::check_dim(problem, w);
    if (n_samples < 100) throw std::invalid_argument("mc_adversarial_risk: need at least 100 samples");
    const Vec scale = problem.eigenvalues.cwiseSqrt();
    const Vec diff = w - problem.coeffs;
    const double shift = r * dual_norm(norm, w);
    const double sigma = problem.noise_sd;
    const Eigen::Index d = problem.dim();

    const std::int64_t n_chunks = (n_samples + kMcChunk - 1) / kMcChunk;
    // Per chunk: count, mean, M2 (Welford), merged afterwards in chunk order.
    struct Acc {
        double n = 0, mean = 0, m2 = 0;
    };
    std::vector<Acc> acc(static_cast<size_t>(n_chunks));

    auto run_chunk = [&](std::int64_t c) {
        Rng rng = make_rng(substream(seed, static_cast<std::uint64_t>(c)));
        std::normal_distribution<double> g(0.0, 1.0);
        const std::int64_t begin = c * kMcChunk;
        const std::int64_t end = std::min(n_samples, begin + kMcChunk);
        Acc a;
        for (std::int64_t i = begin; i < end; ++i) {
            double xw = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) xw += scale[k] * g(rng) * diff[k];
            const double z = sigma * g(rng);
            const double v = std::abs(xw - z) + shift;
            const double loss = v * v;
            a.n += 1.0;
            const double delta = loss - a.mean;
            a.mean += delta / a.n;
            a.m2 += delta * (loss - a.mean);
        }
        acc[static_cast<size_t>(c)] = a;
    };

    workers = std::max(1, std::min<int>(workers, static_cast<int>(n_chunks)));
    if (workers == 1) {
        for (std::int64_t c = 0; c < n_chunks; ++c) run_chunk(c);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t)
            pool.emplace_back([&, t] {
                for (std::int64_t c = t; c < n_chunks; c += workers) run_chunk(c);
            });
        for (auto& th : pool) th.join();
    }

    Acc total;
    for (const Acc& a : acc) {
        if (a.n == 0) continue;
        const double n = total.n + a.n;
        const double delta = a.mean - total.mean;
        total.mean += delta * a.n / n;
        total.m2 += a.m2 + delta * delta * total.n * a.n / n;
        total.n = n;
    }
    McEstimate out;
    out.estimate = total.mean;
    const double var = total.n > 1 ? total.m2 / (total.n - 1) : 0.0;
    out.std_error = std::sqrt(var / total.n);
    return out;
}

}  // namespace robustlin
