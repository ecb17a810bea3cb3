#pragma once

#include "robustlin/problem.hpp"
#include "robustlin/random.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace robustlin {

struct Dataset {
    Mat features;   // n x d, rows in the eigenbasis
    Vec responses;  // y = X w0 + z
    std::uint64_t seed = 0;
    ProblemSpec problem;

    Eigen::Index n() const { return features.rows(); }
    Eigen::Index d() const { return features.cols(); }
};

// x_ik = sqrt(lambda_k) g_ik, z_i ~ N(0, sigma^2); row-by-row draw order.
inline Dataset sample_dataset(const ProblemSpec& problem, Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
    problem.validate();
    const Eigen::Index d = problem.dim();
    Dataset ds;
    ds.seed = seed;
    ds.problem = problem;
    ds.features.resize(n, d);
    ds.responses.resize(n);
    const Vec scale = problem.eigenvalues.cwiseSqrt();
    Rng rng = make_rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < d; ++k) ds.features(i, k) = scale[k] * g(rng);
    Vec z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = problem.noise_sd * g(rng);
    ds.responses = ds.features * problem.coeffs + z;
    return ds;
}

inline constexpr double kSvdCutoff = 1e-10;

namespace detail {
inline Vec pinv_solve(const Mat& A, const Vec& b) {
    Eigen::BDCSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    if (s.size() == 0 || !(s[0] > 0.0)) throw std::invalid_argument("ols: design matrix is all zero");
    const double cut = kSvdCutoff * s[0];
    Vec ub = svd.matrixU().transpose() * b;
    for (Eigen::Index i = 0; i < s.size(); ++i) ub[i] = s[i] > cut ? ub[i] / s[i] : 0.0;
    return svd.matrixV() * ub;
}
}  // namespace detail

// Minimum-norm least squares X^+ y. Tall designs are reduced by QR first.
inline ModelVector ols(const Dataset& ds) {
    const Mat& X = ds.features;
    if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument("ols: empty design");
    if (X.cwiseAbs().maxCoeff() == 0.0) throw std::invalid_argument("ols: design matrix is all zero");
    if (X.rows() > X.cols()) {
        Eigen::HouseholderQR<Mat> qr(X);
        const Eigen::Index d = X.cols();
        Mat R = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
        Vec qty = (qr.householderQ().transpose() * ds.responses).head(d);
        return detail::pinv_solve(R, qty);
    }
    return detail::pinv_solve(X, ds.responses);
}

// (X'X/n + t I)^{-1} X'y/n; t = 0 falls back to ols.
inline ModelVector ridge_at(const Dataset& ds, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("ridge_at: t must be >= 0");
    if (t == 0.0) return ols(ds);
    const double n = double(ds.n());
    Mat A = ds.features.transpose() * ds.features / n;
    A.diagonal().array() += t;
    const Vec b = ds.features.transpose() * ds.responses / n;
    Eigen::LDLT<Mat> ldlt(A);
    Vec w = ldlt.solve(b);
    w += ldlt.solve(b - A * w);  // one refinement step
    return w;
}

struct LassoOptions {
    int max_sweeps = 100000;
    double tol = 1e-10;     // max coordinate update
    double kkt_tol = 1e-6;
};

struct LassoResult {
    ModelVector w;
    int sweeps = 0;
    double kkt_residual = 0.0;  // worst KKT violation
};

// Cyclic coordinate descent on (1/(2n)) ||X w - y||^2 + lam ||w||_1, in Gram form.
inline LassoResult lasso_solve(const Dataset& ds, double lam, const LassoOptions& opt = {}) {
    if (!(lam >= 0.0)) throw std::invalid_argument("lasso: lam must be >= 0");
    const double n = double(ds.n());
    const Eigen::Index d = ds.d();
    const Mat G = ds.features.transpose() * ds.features / n;
    const Vec b = ds.features.transpose() * ds.responses / n;
    Vec w = Vec::Zero(d);
    Vec grad = -b;  // G w - b
    LassoResult res;
    bool converged = false;
    for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
        double max_step = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double gjj = G(j, j);
            if (gjj <= 0.0) continue;
            const double rho = gjj * w[j] - grad[j];
            double wj = 0.0;
            if (rho > lam)
                wj = (rho - lam) / gjj;
            else if (rho < -lam)
                wj = (rho + lam) / gjj;
            const double step = wj - w[j];
            if (step != 0.0) {
                grad.noalias() += step * G.col(j);
                w[j] = wj;
                max_step = std::max(max_step, std::abs(step));
            }
        }
        res.sweeps = sweep;
        if (max_step < opt.tol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw convergence_error("lasso: sweep cap reached");
    grad = G * w - b;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double v = w[j] == 0.0 ? std::max(0.0, std::abs(grad[j]) - lam)
                                     : std::abs(grad[j] + lam * (w[j] > 0 ? 1.0 : -1.0));
        worst = std::max(worst, v);
    }
    res.kkt_residual = worst;
    res.w = std::move(w);
    return res;
}

inline ModelVector lasso(const Dataset& ds, double lam, const LassoOptions& opt = {}) {
    return lasso_solve(ds, lam, opt).w;
}

// sigma sqrt(s log(e d / s) / n), unit constant.
inline double lasso_theoretical_lambda(double sigma, int s, int d, Eigen::Index n) {
    if (s < 1 || s > d) throw std::invalid_argument("lasso_theoretical_lambda: need 1 <= s <= d");
    if (n < 1) throw std::invalid_argument("lasso_theoretical_lambda: n must be >= 1");
    return sigma * std::sqrt(double(s) * std::log(std::numbers::e * d / s) / double(n));
}

}  // namespace robustlin
