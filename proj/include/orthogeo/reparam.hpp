#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "orthogeo/errors.hpp"
#include "orthogeo/linalg.hpp"
#include "orthogeo/matrix.hpp"

namespace orthogeo::reparam {

enum class SigmaMode {
    Softplus,  // sigma = softplus(s) + epsilon, strictly positive
    Direct,    // sigma = s, unconstrained (exact zero start possible)
};

inline const char* to_string(SigmaMode m) { return m == SigmaMode::Softplus ? "softplus" : "direct"; }

// Unconstrained trainable parameters. theta_a / theta_b live in flat
// Euclidean space; the constrained factors are produced on demand by
// build_factors, so any first-order optimizer can update these directly.
struct EuclideanParams {
    DenseMatrix theta_a;  // d_in x r
    DenseMatrix theta_b;  // d_out x r
    DenseVector s;        // r
    SigmaMode sigma_mode = SigmaMode::Softplus;
    double epsilon = 1e-6;

    EuclideanParams() = default;
    EuclideanParams(DenseMatrix ta, DenseMatrix tb, DenseVector sv, SigmaMode mode, double eps)
        : theta_a(std::move(ta)), theta_b(std::move(tb)), s(std::move(sv)), sigma_mode(mode), epsilon(eps) {
        const std::size_t r = theta_a.cols;
        if (r == 0) throw DimensionError("EuclideanParams: rank must be positive");
        if (theta_b.cols != r || s.size() != r) {
            throw DimensionError("EuclideanParams: factor ranks disagree");
        }
        if (r > std::min(theta_a.rows, theta_b.rows)) {
            throw DimensionError("EuclideanParams: rank exceeds min(d_in, d_out)");
        }
        if (!(epsilon > 0.0)) throw ConfigError("EuclideanParams: epsilon must be positive");
    }

    std::size_t d_in() const { return theta_a.rows; }
    std::size_t d_out() const { return theta_b.rows; }
    std::size_t rank() const { return theta_a.cols; }
};

// The constrained picture: a and b are orthonormal frames, sigma is the
// per-direction gain.
struct ManifoldFactors {
    DenseMatrix a;  // d_in x r
    DenseMatrix b;  // d_out x r
    DenseVector sigma;
};

struct ParamGrads {
    DenseMatrix g_theta_a;
    DenseMatrix g_theta_b;
    DenseVector g_s;

    static ParamGrads zeros_like(const EuclideanParams& p) {
        ParamGrads g;
        g.g_theta_a = DenseMatrix(p.theta_a.rows, p.theta_a.cols);
        g.g_theta_b = DenseMatrix(p.theta_b.rows, p.theta_b.cols);
        g.g_s.assign(p.s.size(), 0.0);
        return g;
    }
};

inline double softplus(double x) {
    // log(1 + e^x), computed on the branch that avoids overflow.
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// theta -> nearest orthonormal frame along the QR geodesic: the Q factor of
// the (unique, positive-diagonal) thin QR.
inline DenseMatrix orth_map(const DenseMatrix& theta) { return linalg::thin_qr(theta).q; }

// Pullback of a cotangent on the frame to a cotangent on theta.
//
// With theta = Q R (thin, diag(R) > 0) and a loss that touches only Q, the
// adjoint is
//     g_theta = (G - Q (P - K)) R^{-T},   P = Q^T G,   K = tril(P - P^T, -1),
// which reduces to (I - q q^T) G / ||theta|| in the single-column case.
inline DenseMatrix orth_map_vjp(const DenseMatrix& theta, const DenseMatrix& grad_a) {
    if (grad_a.rows != theta.rows || grad_a.cols != theta.cols) {
        throw DimensionError("orth_map_vjp: cotangent shape does not match theta");
    }
    const linalg::QrResult qr = linalg::thin_qr(theta);
    const std::size_t d = theta.rows;
    const std::size_t r = theta.cols;

    DenseMatrix p = matmul(transpose(qr.q), grad_a);  // r x r
    // P - K in place: subtract the skew part below the diagonal, mirror above.
    DenseMatrix pk = p;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < i; ++j) pk(i, j) = p(j, i);
    }
    DenseMatrix z = subtract(grad_a, matmul(qr.q, pk));

    // g = Z R^{-T}: per row, back-substitute R y = z^T.
    DenseMatrix g(d, r);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t c = r; c-- > 0;) {
            double acc = z(i, c);
            for (std::size_t t = c + 1; t < r; ++t) acc -= qr.r_mat(c, t) * g(i, t);
            g(i, c) = acc / qr.r_mat(c, c);
        }
    }
    return g;
}

inline DenseVector sigma_map(const DenseVector& s, SigmaMode mode, double epsilon) {
    DenseVector sigma(s.size());
    if (mode == SigmaMode::Direct) {
        sigma = s;
    } else {
        for (std::size_t i = 0; i < s.size(); ++i) sigma[i] = softplus(s[i]) + epsilon;
    }
    return sigma;
}

inline DenseVector sigma_map_vjp(const DenseVector& s, SigmaMode mode, const DenseVector& grad_sigma) {
    if (grad_sigma.size() != s.size()) throw DimensionError("sigma_map_vjp: length mismatch");
    DenseVector g(s.size());
    if (mode == SigmaMode::Direct) {
        g = grad_sigma;
    } else {
        for (std::size_t i = 0; i < s.size(); ++i) g[i] = grad_sigma[i] * sigmoid(s[i]);
    }
    return g;
}

// Materializes the constrained factors from Euclidean parameters. Rank
// deficiency in either frame is reported with the factor name attached.
inline ManifoldFactors build_factors(const EuclideanParams& p) {
    ManifoldFactors f;
    try {
        f.a = orth_map(p.theta_a);
    } catch (const RankDeficientError& e) {
        throw RankDeficientError(std::string("build_factors: theta_a: ") + e.what(), e.column);
    }
    try {
        f.b = orth_map(p.theta_b);
    } catch (const RankDeficientError& e) {
        throw RankDeficientError(std::string("build_factors: theta_b: ") + e.what(), e.column);
    }
    f.sigma = sigma_map(p.s, p.sigma_mode, p.epsilon);
    return f;
}

}  // namespace orthogeo::reparam
