#include "support.hpp"

#include <gtest/gtest.h>

using namespace robustlin;
using testsupport::Gen;

namespace {

ProblemSpec poly_problem(int d, double beta, double delta) {
    ProblemSpec pb;
    pb.eigenvalues.resize(d);
    pb.coeffs.resize(d);
    for (int k = 0; k < d; ++k) {
        pb.eigenvalues[k] = std::pow(k + 1.0, -beta);
        pb.coeffs[k] = std::pow(k + 1.0, -delta / 2.0);
    }
    return pb;
}

// sup over a fine l-grid of min(1+l, r) u + min((1+l) b, r) v - R eps l.
double weak_strong_grid(double u, double v, double b, double r, double eps) {
    const double R = u + b * v;
    const double l_max = 2.0 * (r / std::max(b, 1e-12) + 1.0);
    double best = -kInf;
    const int n = 400000;
    for (int i = 0; i <= n; ++i) {
        const double l = l_max * i / n;
        best = std::max(best, std::min(1.0 + l, r) * u + std::min((1.0 + l) * b, r) * v - R * eps * l);
    }
    return best;
}

}  // namespace

TEST(Isotropic, ClosedForms) {
    const RegimeProfile p = isotropic_profile(1.0, 0.0, 1.0, 0.25);
    EXPECT_DOUBLE_EQ(p.eps_fl, 0.5);
    EXPECT_NEAR(p.e_opt_eps, 0.625, 1e-15);
    EXPECT_NEAR(p.lambda_opt, 1.0 / 3.0, 1e-15);
    EXPECT_FALSE(p.free_lunch);
    const RegimeProfile q = isotropic_profile(2.0, 0.1, 1.0, 0.25);
    EXPECT_NEAR(q.e_opt_eps, 0.1 + 2.0 * 0.625, 1e-14);
    EXPECT_EQ(std::string(regime_name(q.regime)), "isotropic");
}

TEST(Isotropic, MatchesOracle) {
    Gen g(71);
    for (int i = 0; i < 200; ++i) {
        const int d = g.integer(1, 10);
        const double level = g.log_uniform(0.1, 10);
        const Vec c = g.gaussian(d);
        const ProblemSpec pb = ProblemSpec::make(Vec::Constant(d, level), c, g.uniform(0, 1));
        const double S = w0_sigma_norm2(pb);
        // isotropic level l rescales r by 1/sqrt(l) in the normalized formulas
        const double r = g.uniform(0.01, 3), eps = g.uniform(0, 1);
        const TradeoffProfile tp = tradeoff_profile(pb, AttackNorm::l2(), r * std::sqrt(level), eps);
        const RegimeProfile rp = isotropic_profile(S, pb.sigma2(), r, eps);
        EXPECT_NEAR(tp.eps_fl, rp.eps_fl, 1e-10);
        EXPECT_NEAR(tp.e_opt, rp.e_opt, 1e-10 * (1 + rp.e_opt));
        EXPECT_NEAR(tp.e_opt_eps, rp.e_opt_eps, 1e-10 * (1 + rp.e_opt_eps));
        EXPECT_NEAR(tp.lambda_opt / level, rp.lambda_opt, 1e-8 * (1 + rp.lambda_opt));
    }
}

TEST(SparseIsotropic, RadiusConditionNumber) {
    EXPECT_NEAR(sparse_isotropic_r0(400, 20, 2.0), 1.0 / 20.0, 1e-15);
    EXPECT_NEAR(sparse_isotropic_r0(400, 20, kInf), 1.0 / std::sqrt(20.0 * 400.0), 1e-15);
    for (double p : {1.5, 2.0, 4.0, kInf}) {
        const ConditionNumbers cn = condition_numbers(sparse_isotropic_problem(400, 20, 0.0), AttackNorm::lp(p));
        EXPECT_NEAR(cn.r0, sparse_isotropic_r0(400, 20, p), 1e-14);
    }
}

TEST(SparseIsotropic, EuclideanExactForms) {
    const int d = 50, s = 5;
    const ProblemSpec pb = sparse_isotropic_problem(d, s, 0.04);
    for (double r : {0.01, 0.1, 0.5}) {
        for (double eps : {0.0, 0.1, 0.6}) {
            const RegimeProfile rp = sparse_isotropic_profile(d, s, 2.0, 0.04, r, eps);
            const TradeoffProfile tp = tradeoff_profile(pb, AttackNorm::l2(), r, eps);
            EXPECT_NEAR(rp.eps_fl, tp.eps_fl, 1e-12);
            EXPECT_NEAR(rp.lambda_opt, tp.lambda_opt, 1e-9 * (1 + tp.lambda_opt));
        }
    }
}

TEST(SparseIsotropic, DustRegime) {
    const int d = 400, s = 20;
    const RegimeProfile p = sparse_isotropic_profile(d, s, kInf, 0.0, 1.0 / s, 0.3);
    const double r0 = sparse_isotropic_r0(d, s, kInf);
    EXPECT_NEAR(p.e_opt, double(s) / d * std::pow(std::min(1.0 / s / r0, 1.0), 2), 1e-14);
    EXPECT_GT(p.e_opt_eps / p.e_opt, 5.0);
    // Oracle on the explicit instance agrees on the gap.
    const ProblemSpec pb = sparse_isotropic_problem(d, s, 0.0);
    const TradeoffProfile tp = tradeoff_profile(pb, AttackNorm::linf(), 1.0 / s, 0.3);
    EXPECT_GT(tp.e_opt_eps / tp.e_opt, 5.0);
}

TEST(PolyDecay, ExponentsAndFlags) {
    const PolyExponents e = poly_exponents(2.0, 0.0);
    EXPECT_DOUBLE_EQ(e.theta, 0.5);
    EXPECT_DOUBLE_EQ(e.phi, 1.0);
    const RegimeProfile hi = polydecay_profile(2.0, 2.0, 0.01, 0.1, 0.3);
    ASSERT_TRUE(hi.regime_free_lunch.has_value());
    EXPECT_TRUE(*hi.regime_free_lunch);
    EXPECT_NEAR(hi.e_opt, 0.01 + 0.01, 1e-15);
    const RegimeProfile lo = polydecay_profile(2.0, 0.0, 0.0, 0.1, 0.3);
    EXPECT_FALSE(*lo.regime_free_lunch);
    const RegimeProfile edge = polydecay_profile(2.0, 1.0, 0.0, 0.1, 0.3);
    EXPECT_FALSE(*edge.regime_free_lunch);
    EXPECT_NEAR(edge.e_opt, 0.01 * std::log(10.0), 1e-15);
    EXPECT_THROW(polydecay_profile(2.0, 0.0, 0.0, 1.5, 0.3), std::invalid_argument);
    EXPECT_THROW(polydecay_profile(0.5, 0.0, 0.0, 0.1, 0.3), std::invalid_argument);
}

TEST(PolyDecay, FreeLunchSlopeMatchesOracle) {
    const ProblemSpec pb = poly_problem(100000, 2.0, 0.0);
    std::vector<double> rs, oracle, asym;
    for (double r = 1e-3; r <= 1e-1 * 1.0001; r *= std::pow(10.0, 0.25)) {
        rs.push_back(r);
        oracle.push_back(free_lunch_threshold(pb, AttackNorm::l2(), r));
        asym.push_back(polydecay_profile(2.0, 0.0, 0.0, r, 0.0).eps_fl);
    }
    const double so = testsupport::loglog_slope(rs, oracle), sa = testsupport::loglog_slope(rs, asym);
    EXPECT_NEAR(sa, 0.5, 1e-12);  // eps_fl ~ r^{1 - theta}
    EXPECT_NEAR(so, sa, 0.05 * sa);
}

TEST(PolyDecay, LambdaSolvesAsymptoticConstraint) {
    for (double delta : {0.0, 0.5, 2.0, 3.0, 4.0}) {
        const RegimeProfile p = polydecay_profile(2.0, delta, 0.0, 0.5, 0.05);
        if (p.free_lunch) continue;
        EXPECT_NEAR(poly_g_asymptotic(2.0, delta, p.lambda_opt), 0.05 * 0.05, 1e-12) << "delta=" << delta;
    }
}

TEST(WeakStrong, Branches) {
    const double u = 1.0, v = 2.0, b = 0.2;
    const WeakStrongProfile low = weak_strong_profile(u, v, b, 0.0, 0.1, 0.05);
    EXPECT_NEAR(low.h0, (u + v) * 0.1, 1e-14);
    EXPECT_EQ(low.branch, "r<=b");
    const double R = u + b * v;
    EXPECT_NEAR(low.eps_star, v * b / R, 1e-15);
    const WeakStrongProfile mid = weak_strong_profile(u, v, b, 0.0, 0.5, 0.05);
    EXPECT_NEAR(mid.h0, (u + v - R * 0.05 / b) * 0.5 + R * 0.05, 1e-14);
    const WeakStrongProfile big = weak_strong_profile(u, v, b, 0.0, 3.0, 0.05);
    // r >= 1 below threshold: the sup sits at l = r/b - 1
    EXPECT_NEAR(big.h0, 3.0 * (u + v) - R * 0.05 * (3.0 / b - 1.0), 1e-13);
    for (double r : {0.1, 0.5}) {
        const WeakStrongProfile above = weak_strong_profile(u, v, b, 0.0, r, 0.6);
        EXPECT_FALSE(above.below_threshold);
        EXPECT_NEAR(above.h0, std::min(1.0, r) * u + std::min(b, r) * v, 1e-14);
    }
    const WeakStrongProfile far = weak_strong_profile(u, v, b, 0.0, 3.0, 0.6);
    EXPECT_NEAR(far.h0, 3.0 * (u + v * b) - R * 0.6 * 2.0, 1e-13);
}

TEST(WeakStrong, MatchesBruteForceSup) {
    Gen g(72);
    for (int i = 0; i < 100; ++i) {
        const double u = g.uniform(0, 2), v = g.uniform(0, 5), b = g.uniform(0.01, 1);
        const double r = g.uniform(0, 3), eps = g.uniform(0, 1);
        const double want = weak_strong_grid(u, v, b, r, eps);
        EXPECT_NEAR(weak_strong_profile(u, v, b, 0.0, r, eps).h0, want, 1e-4 * (1 + want));
    }
}

TEST(WeakStrong, ExplicitInstanceWithinFactorFour) {
    const double u = 1.0, v = std::sqrt(399.0), b = 1.0 / std::sqrt(400.0);
    const WeakStrongProfile ws = weak_strong_profile(u, v, b, 0.0, 0.1, 0.0);
    EXPECT_NEAR(ws.h0, (u + v) * 0.1, 1e-14);
    Vec lam = Vec::Constant(400, b * b);
    lam[0] = 1.0;
    const ProblemSpec pb = ProblemSpec::make(lam, Vec::Ones(400), 0.0);
    const TradeoffProfile tp = tradeoff_profile(pb, AttackNorm::l2(), 0.1, 0.0);
    EXPECT_GE(tp.e_opt_eps, ws.e_opt_eps / 4.0);
    EXPECT_LE(tp.e_opt_eps, ws.e_opt_eps * 4.0);
}

TEST(Harmonic, Values) {
    const HarmonicProfile h = harmonic_linf_profile(400, 0.0, 1.0 / std::log(400.0));
    EXPECT_NEAR(h.harmonic_number, 6.5699, 5e-5);
    EXPECT_NEAR(h.e_w0_exact, std::pow(h.harmonic_number / std::log(400.0), 2), 1e-12);
    EXPECT_GT(h.e_w0_exact, 1.0);
    EXPECT_LT(h.e_w0_exact, 2.0);
    EXPECT_TRUE(h.in_window);
}

TEST(Harmonic, ExactRiskMatchesRiskModule) {
    Vec c(300);
    for (int k = 0; k < 300; ++k) c[k] = 1.0 / (k + 1);
    const ProblemSpec pb = ProblemSpec::make(Vec::Ones(300), c, 0.3);
    for (double r : {0.0, 0.05, 0.4}) {
        EXPECT_NEAR(harmonic_linf_profile(300, 0.09, r).e_w0_exact, adversarial_risk(pb, AttackNorm::linf(), c, r),
                    1e-12);
    }
}

TEST(Harmonic, AsymptoticAgainstOracle) {
    Vec c(400);
    for (int k = 0; k < 400; ++k) c[k] = 1.0 / (k + 1);
    const ProblemSpec pb = ProblemSpec::make(Vec::Ones(400), c, 0.0);
    const TradeoffProfile tp = tradeoff_profile(pb, AttackNorm::linf(), 0.05, 1.0);
    const double ratio = tp.e_opt / harmonic_linf_profile(400, 0.0, 0.05).e_opt_asymptotic;
    EXPECT_GE(ratio, 1.0 / 8.0);
    EXPECT_LE(ratio, 8.0);
}

TEST(Fracture, Exponents) {
    const FractureResult a = fracture_sum(2.0, 1.0, 2.0, 100.0, 10000);
    EXPECT_DOUBLE_EQ(a.c, 0.5);
    EXPECT_FALSE(a.log_flag);
    const FractureResult b = fracture_sum(2.0, 1.5, 2.0, 100.0, 10000);
    EXPECT_DOUBLE_EQ(b.c, 1.0);
    EXPECT_FALSE(b.log_flag);
    const FractureResult c = fracture_sum(2.0, 1.5, 1.0, 100.0, 10000);
    EXPECT_TRUE(c.log_flag);
    EXPECT_NEAR(c.asymptotic, std::log(100.0) / 100.0, 1e-15);
    EXPECT_THROW(fracture_sum(2.0, 0.4, 1.0, 10.0), std::invalid_argument);
}

// Direct summation with a much larger cutoff as the reference.
TEST(Fracture, TailCorrectionIsAccurate) {
    for (double D : {1e2, 1e4}) {
        const FractureResult small = fracture_sum(2.0, 1.0, 2.0, D, 20000);
        double ref = 0.0;
        for (long k = 4000000; k >= 1; --k) {
            const double l = std::pow(double(k), -2.0);
            ref += l / std::pow(1.0 + D * l, 2.0);
        }
        ref += 1.0 / (4000000.5);  // tail of k^-2 beyond the cutoff
        EXPECT_NEAR(small.exact_sum, ref, 1e-9 * ref);
    }
}

TEST(Fracture, RatioStaysInBand) {
    double lo = kInf, hi = 0.0;
    for (double D : {1e2, 1e3, 1e4, 1e5, 1e6}) {
        const FractureResult f = fracture_sum(2.0, 1.0, 2.0, D);
        const double ratio = f.exact_sum / f.asymptotic;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    EXPECT_LT(hi / lo, 5.0);
}
