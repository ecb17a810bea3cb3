#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace robustlin {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
// A linear model w, expressed in the eigenbasis of the covariance.
using ModelVector = Vec;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct dimension_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProblemSpec {
    Vec eigenvalues;
    Vec coeffs;
    double noise_sd = 0.0;

    Eigen::Index dim() const { return eigenvalues.size(); }
    double sigma2() const { return noise_sd * noise_sd; }

    // Throws std::invalid_argument on a broken invariant.
    void validate() const {
        if (eigenvalues.size() < 1)
            throw std::invalid_argument("problem: empty spectrum");
        if (eigenvalues.size() != coeffs.size())
            throw dimension_error("problem: eigenvalues and coeffs differ in length");
        for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
            if (!(eigenvalues[k] > 0.0) || !std::isfinite(eigenvalues[k]))
                throw std::invalid_argument("problem: eigenvalues must be positive and finite");
            if (k > 0 && eigenvalues[k] > eigenvalues[k - 1])
                throw std::invalid_argument("problem: eigenvalues must be non-increasing");
        }
        if (!coeffs.allFinite())
            throw std::invalid_argument("problem: coeffs must be finite");
        if (coeffs.cwiseAbs().maxCoeff() == 0.0)
            throw std::invalid_argument("problem: w0 must be nonzero");
        if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
            throw std::invalid_argument("problem: noise_sd must be finite and non-negative");
    }

    static ProblemSpec make(Vec eigenvalues, Vec coeffs, double noise_sd) {
        ProblemSpec p{std::move(eigenvalues), std::move(coeffs), noise_sd};
        p.validate();
        return p;
    }
};

enum class NormKind { lp, mahalanobis };

// Attacker's norm. For lp, p = kInf is exact and its dual order q is 1.
// A Mahalanobis matrix B is given in the eigenbasis coordinates; the primal
// norm is sqrt(v'Bv) and the dual is sqrt(w'B^{-1}w).
class AttackNorm {
public:
    static AttackNorm lp(double p) {
        if (!(p >= 1.0))
            throw std::invalid_argument("attack norm: p must lie in [1, inf]");
        AttackNorm n;
        n.kind_ = NormKind::lp;
        n.p_ = p;
        if (std::isinf(p))
            n.q_ = 1.0;
        else if (p == 1.0)
            n.q_ = kInf;
        else
            n.q_ = p / (p - 1.0);
        return n;
    }
    static AttackNorm l2() { return lp(2.0); }
    static AttackNorm linf() { return lp(kInf); }

    static AttackNorm mahalanobis(const Mat& B) {
        if (B.rows() != B.cols() || B.rows() == 0)
            throw dimension_error("attack norm: B must be square");
        if (!B.isApprox(B.transpose(), 1e-12))
            throw std::invalid_argument("attack norm: B must be symmetric");
        Eigen::LLT<Mat> llt(B);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("attack norm: B must be positive definite");
        AttackNorm n;
        n.kind_ = NormKind::mahalanobis;
        n.p_ = 2.0;
        n.q_ = 2.0;
        n.B_ = B;
        n.Binv_ = llt.solve(Mat::Identity(B.rows(), B.cols()));
        n.Binv_ = 0.5 * (n.Binv_ + n.Binv_.transpose()).eval();
        return n;
    }

    NormKind kind() const { return kind_; }
    double p() const { return p_; }
    double q() const { return q_; }
    const Mat& B() const { return B_; }
    const Mat& B_inverse() const { return Binv_; }

    bool is_euclidean() const { return kind_ == NormKind::lp && p_ == 2.0; }
    bool is_linf() const { return kind_ == NormKind::lp && std::isinf(p_); }

    std::string describe() const {
        if (kind_ == NormKind::mahalanobis) return "mahalanobis";
        if (std::isinf(p_)) return "linf";
        char buf[64];
        std::snprintf(buf, sizeof buf, "l%g", p_);
        return buf;
    }

private:
    NormKind kind_ = NormKind::lp;
    double p_ = 2.0;
    double q_ = 2.0;
    Mat B_;
    Mat Binv_;
};

// ||v||_p, scaled to avoid overflow for large p.
inline double lp_norm(const Vec& v, double p) {
    if (v.size() == 0) return 0.0;
    if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
    if (p == 1.0) return v.cwiseAbs().sum();
    if (p == 2.0) return v.norm();
    const double m = v.cwiseAbs().maxCoeff();
    if (m == 0.0) return 0.0;
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]) / m, p);
    return m * std::pow(s, 1.0 / p);
}

namespace detail {
inline void check_finite_dim(const AttackNorm& norm, const Vec& w) {
    if (!w.allFinite()) throw std::invalid_argument("norm: vector has non-finite entries");
    if (norm.kind() == NormKind::mahalanobis && norm.B().rows() != w.size())
        throw dimension_error("norm: dimension mismatch with B");
}
inline void check_dim(const ProblemSpec& problem, const Vec& v) {
    if (v.size() != problem.dim()) throw dimension_error("vector length differs from problem dimension");
}
}  // namespace detail

inline double dual_norm(const AttackNorm& norm, const Vec& w) {
    detail::check_finite_dim(norm, w);
    if (norm.kind() == NormKind::mahalanobis) return std::sqrt(std::max(0.0, w.dot(norm.B_inverse() * w)));
    return lp_norm(w, norm.q());
}

inline double primal_norm(const AttackNorm& norm, const Vec& v) {
    detail::check_finite_dim(norm, v);
    if (norm.kind() == NormKind::mahalanobis) return std::sqrt(std::max(0.0, v.dot(norm.B() * v)));
    return lp_norm(v, norm.p());
}

inline double sigma_norm(const ProblemSpec& problem, const Vec& v) {
    detail::check_dim(problem, v);
    return std::sqrt((problem.eigenvalues.array() * v.array().square()).sum());
}

// ||w0||_Sigma^2 = sum_k lambda_k c_k^2.
inline double w0_sigma_norm2(const ProblemSpec& problem) {
    return (problem.eigenvalues.array() * problem.coeffs.array().square()).sum();
}

}  // namespace robustlin
