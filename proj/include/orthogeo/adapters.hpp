#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>

#include "orthogeo/errors.hpp"
#include "orthogeo/linalg.hpp"
#include "orthogeo/matrix.hpp"
#include "orthogeo/reparam.hpp"
#include "orthogeo/rng.hpp"

namespace orthogeo::adapters {

enum class AdapterKind { Full, Lora, OrthoGeo };

enum class ThetaInit { Normal, KaimingUniform };

// Frozen base weight plus a rank-r update B diag(sigma) A^T, where A and B
// are reparameterized orthonormal frames. The update is scaled by alpha/r so
// behavior is comparable across ranks.
struct OrthoGeoAdapter {
    DenseMatrix w0;  // d_out x d_in, frozen
    reparam::EuclideanParams params;
    double alpha = 16.0;
    std::size_t rank = 0;

    OrthoGeoAdapter() = default;
    OrthoGeoAdapter(DenseMatrix base, reparam::EuclideanParams p, double a)
        : w0(std::move(base)), params(std::move(p)), alpha(a), rank(params.rank()) {
        if (!(alpha > 0.0)) throw ConfigError("OrthoGeoAdapter: alpha must be positive");
        if (w0.cols != params.d_in() || w0.rows != params.d_out()) {
            throw DimensionError("OrthoGeoAdapter: base weight does not match factor dims");
        }
    }

    std::size_t d_in() const { return w0.cols; }
    std::size_t d_out() const { return w0.rows; }
    double scale() const { return alpha / static_cast<double>(rank); }
};

// Unconstrained baseline: the update is B A^T with both factors trained
// directly.
struct LoraAdapter {
    DenseMatrix w0;
    DenseMatrix a;  // d_in x r
    DenseMatrix b;  // d_out x r
    double alpha = 16.0;
    std::size_t rank = 0;

    LoraAdapter() = default;
    LoraAdapter(DenseMatrix base, DenseMatrix a_in, DenseMatrix b_in, double alpha_in)
        : w0(std::move(base)), a(std::move(a_in)), b(std::move(b_in)), alpha(alpha_in), rank(a.cols) {
        if (!(alpha > 0.0)) throw ConfigError("LoraAdapter: alpha must be positive");
        if (rank == 0 || b.cols != rank) throw DimensionError("LoraAdapter: factor ranks disagree");
        if (w0.cols != a.rows || w0.rows != b.rows) {
            throw DimensionError("LoraAdapter: base weight does not match factor dims");
        }
    }

    std::size_t d_in() const { return w0.cols; }
    std::size_t d_out() const { return w0.rows; }
    double scale() const { return alpha / static_cast<double>(rank); }
};

struct FoldedWeight {
    DenseMatrix w_eff;  // d_out x d_in
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

inline DenseMatrix init_theta(std::size_t rows, std::size_t cols, ThetaInit kind, Rng& rng) {
    DenseMatrix m(rows, cols);
    if (kind == ThetaInit::Normal) {
        for (double& v : m.data) v = rng.normal();
    } else {
        // Kaiming-uniform over the fan-in of the frame.
        const double bound = std::sqrt(6.0 / static_cast<double>(rows));
        for (double& v : m.data) v = (2.0 * rng.uniform() - 1.0) * bound;
    }
    return m;
}

inline OrthoGeoAdapter make_orthogeo(DenseMatrix w0, std::size_t rank, double alpha,
                                     reparam::SigmaMode mode, double epsilon, double s_init,
                                     ThetaInit theta_init, Rng& rng) {
    const std::size_t d_in = w0.cols;
    const std::size_t d_out = w0.rows;
    DenseMatrix ta = init_theta(d_in, rank, theta_init, rng);
    DenseMatrix tb = init_theta(d_out, rank, theta_init, rng);
    DenseVector s(rank, s_init);
    return OrthoGeoAdapter(std::move(w0), reparam::EuclideanParams(std::move(ta), std::move(tb), std::move(s), mode, epsilon), alpha);
}

inline LoraAdapter make_lora(DenseMatrix w0, std::size_t rank, double alpha, Rng& rng) {
    const std::size_t d_in = w0.cols;
    const std::size_t d_out = w0.rows;
    DenseMatrix a(d_in, rank);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (double& v : a.data) v = rng.normal(0.0, stddev);
    DenseMatrix b(d_out, rank);  // zero: the update starts exactly at zero
    return LoraAdapter(std::move(w0), std::move(a), std::move(b), alpha);
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

// Intermediates captured by a forward pass, consumed by the matching
// backward pass. Columns of x are independent inputs.
struct OrthoCache {
    reparam::ManifoldFactors factors;
    DenseMatrix x;        // d_in x n
    DenseMatrix u;        // r x n, A^T x
    DenseMatrix u_tilde;  // r x n, sigma applied
};

struct LoraCache {
    DenseMatrix x;  // d_in x n
    DenseMatrix u;  // r x n, A^T x
};

struct LoraGrads {
    DenseMatrix g_a;
    DenseMatrix g_b;
};

// y = w0 x + (alpha/r) B (sigma .* (A^T x)), evaluated in staged products so
// the d_out x d_in update matrix is never materialized.
inline std::pair<DenseMatrix, OrthoCache> ortho_forward(const OrthoGeoAdapter& ad, const DenseMatrix& x) {
    if (x.rows != ad.d_in()) throw DimensionError("ortho_forward: input rows != d_in");
    reparam::ManifoldFactors f = reparam::build_factors(ad.params);
    DenseMatrix u = matmul(transpose(f.a), x);
    DenseMatrix u_tilde = u;
    for (std::size_t k = 0; k < ad.rank; ++k) {
        for (std::size_t j = 0; j < u_tilde.cols; ++j) u_tilde(k, j) *= f.sigma[k];
    }
    DenseMatrix y = matmul(ad.w0, x);
    add_scaled(y, matmul(f.b, u_tilde), ad.scale());
    OrthoCache cache{std::move(f), x, std::move(u), std::move(u_tilde)};
    return {std::move(y), std::move(cache)};
}

inline std::pair<DenseVector, OrthoCache> ortho_forward(const OrthoGeoAdapter& ad, const DenseVector& x) {
    auto [y, cache] = ortho_forward(ad, column_matrix(x));
    return {column_of(y, 0), std::move(cache)};
}

inline void check_cache(const OrthoGeoAdapter& ad, const OrthoCache& c, const DenseMatrix& grad_y) {
    if (c.x.rows != ad.d_in() || c.factors.a.rows != ad.d_in() || c.factors.b.rows != ad.d_out() ||
        c.factors.a.cols != ad.rank || c.u.rows != ad.rank || c.u.cols != c.x.cols) {
        throw ContractError("ortho_backward: cache does not belong to this adapter");
    }
    if (grad_y.rows != ad.d_out() || grad_y.cols != c.x.cols) {
        throw ContractError("ortho_backward: cotangent shape mismatch");
    }
}

// Pullback of dL/dy onto the Euclidean parameters, summed over the columns
// of the cached batch.
inline reparam::ParamGrads ortho_backward(const OrthoGeoAdapter& ad, const OrthoCache& c,
                                          const DenseMatrix& grad_y) {
    check_cache(ad, c, grad_y);
    const double scale = ad.scale();
    const std::size_t r = ad.rank;
    const std::size_t n = c.x.cols;

    // dL/dB = scale * grad_y u_tilde^T
    DenseMatrix g_b = matmul(grad_y, transpose(c.u_tilde));
    for (double& v : g_b.data) v *= scale;

    // dL/du_tilde = scale * B^T grad_y
    DenseMatrix g_ut = matmul(transpose(c.factors.b), grad_y);
    for (double& v : g_ut.data) v *= scale;

    DenseVector g_sigma(r, 0.0);
    DenseMatrix g_u(r, n);
    for (std::size_t k = 0; k < r; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += g_ut(k, j) * c.u(k, j);
            g_u(k, j) = g_ut(k, j) * c.factors.sigma[k];
        }
        g_sigma[k] = acc;
    }
    DenseMatrix g_a = matmul(c.x, transpose(g_u));

    reparam::ParamGrads out;
    out.g_theta_a = reparam::orth_map_vjp(ad.params.theta_a, g_a);
    out.g_theta_b = reparam::orth_map_vjp(ad.params.theta_b, g_b);
    out.g_s = reparam::sigma_map_vjp(ad.params.s, ad.params.sigma_mode, g_sigma);
    return out;
}

inline reparam::ParamGrads ortho_backward(const OrthoGeoAdapter& ad, const OrthoCache& c,
                                          const DenseVector& grad_y) {
    return ortho_backward(ad, c, column_matrix(grad_y));
}

inline std::pair<DenseMatrix, LoraCache> lora_forward(const LoraAdapter& ad, const DenseMatrix& x) {
    if (x.rows != ad.d_in()) throw DimensionError("lora_forward: input rows != d_in");
    DenseMatrix u = matmul(transpose(ad.a), x);
    DenseMatrix y = matmul(ad.w0, x);
    add_scaled(y, matmul(ad.b, u), ad.scale());
    return {std::move(y), LoraCache{x, std::move(u)}};
}

inline std::pair<DenseVector, LoraCache> lora_forward(const LoraAdapter& ad, const DenseVector& x) {
    auto [y, cache] = lora_forward(ad, column_matrix(x));
    return {column_of(y, 0), std::move(cache)};
}

inline LoraGrads lora_backward(const LoraAdapter& ad, const LoraCache& c, const DenseMatrix& grad_y) {
    if (c.x.rows != ad.d_in() || c.u.rows != ad.rank || c.u.cols != c.x.cols) {
        throw ContractError("lora_backward: cache does not belong to this adapter");
    }
    if (grad_y.rows != ad.d_out() || grad_y.cols != c.x.cols) {
        throw ContractError("lora_backward: cotangent shape mismatch");
    }
    const double scale = ad.scale();
    LoraGrads g;
    g.g_b = matmul(grad_y, transpose(c.u));
    for (double& v : g.g_b.data) v *= scale;
    DenseMatrix bt_grad = matmul(transpose(ad.b), grad_y);  // r x n
    g.g_a = matmul(c.x, transpose(bt_grad));
    for (double& v : g.g_a.data) v *= scale;
    return g;
}

inline LoraGrads lora_backward(const LoraAdapter& ad, const LoraCache& c, const DenseVector& grad_y) {
    return lora_backward(ad, c, column_matrix(grad_y));
}

// ---------------------------------------------------------------------------
// Folding, counting, spectra
// ---------------------------------------------------------------------------

// Scaled update matrix (alpha/r) B diag(sigma) A^T.
inline DenseMatrix delta_matrix(const OrthoGeoAdapter& ad) {
    reparam::ManifoldFactors f = reparam::build_factors(ad.params);
    DenseMatrix b_sigma = f.b;
    for (std::size_t i = 0; i < b_sigma.rows; ++i) {
        for (std::size_t k = 0; k < b_sigma.cols; ++k) b_sigma(i, k) *= f.sigma[k];
    }
    return scaled(matmul(b_sigma, transpose(f.a)), ad.scale());
}

inline DenseMatrix delta_matrix(const LoraAdapter& ad) {
    return scaled(matmul(ad.b, transpose(ad.a)), ad.scale());
}

template <typename Adapter>
inline FoldedWeight fold(const Adapter& ad) {
    DenseMatrix w = ad.w0;
    const DenseMatrix delta = delta_matrix(ad);
    for (std::size_t i = 0; i < w.data.size(); ++i) w.data[i] += delta.data[i];
    return {std::move(w)};
}

// Trainable parameter count per adapter kind; r = 0 means "no adapter".
inline std::uint64_t param_count(AdapterKind kind, std::size_t d_in, std::size_t d_out, std::size_t r) {
    if (d_in == 0 || d_out == 0) throw DimensionError("param_count: dims must be positive");
    if (r > std::min(d_in, d_out)) throw DimensionError("param_count: rank exceeds min(d_in, d_out)");
    switch (kind) {
        case AdapterKind::Full:
            return static_cast<std::uint64_t>(d_in) * d_out;
        case AdapterKind::Lora:
            return static_cast<std::uint64_t>(r) * (d_in + d_out);
        case AdapterKind::OrthoGeo:
            return static_cast<std::uint64_t>(r) * (d_in + d_out) + r;
    }
    throw ContractError("param_count: unknown adapter kind");
}

// Singular values of the scaled update, descending. For the constrained
// adapter these are available in closed form; the baseline needs an SVD.
inline DenseVector delta_spectrum(const OrthoGeoAdapter& ad) {
    reparam::ManifoldFactors f = reparam::build_factors(ad.params);
    DenseVector s(ad.rank);
    for (std::size_t k = 0; k < ad.rank; ++k) s[k] = std::fabs(f.sigma[k]) * ad.scale();
    std::sort(s.begin(), s.end(), std::greater<double>());
    return s;
}

inline DenseVector delta_spectrum(const LoraAdapter& ad) {
    DenseVector s = linalg::svd_jacobi(delta_matrix(ad)).s;
    s.resize(std::min(s.size(), ad.rank));  // a rank-r product has at most r nonzeros
    return s;
}

}  // namespace orthogeo::adapters
