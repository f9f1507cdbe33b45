#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "orthogeo/errors.hpp"
#include "orthogeo/matrix.hpp"

namespace orthogeo::linalg {

// Thin QR of a tall matrix: q has orthonormal columns, r_mat is upper
// triangular with a strictly positive diagonal, and q * r_mat reconstructs
// the input. The positive diagonal makes the factorization unique, which is
// what downstream differentiation relies on.
struct QrResult {
    DenseMatrix q;      // rows x cols, orthonormal columns
    DenseMatrix r_mat;  // cols x cols, upper triangular, diag > 0
};

struct SvdResult {
    DenseMatrix u;  // m x k, orthonormal columns
    DenseVector s;  // k, descending, non-negative
    DenseMatrix v;  // n x k, orthonormal columns
};

namespace detail {

// Columns whose remaining norm falls below this fraction of the largest
// input column norm are treated as linearly dependent.
inline constexpr double kRankTol = 1e-12;

// Relative pivot threshold for the LU solve.
inline constexpr double kPivotTol = 1e-13;

// Rotation threshold for the one-sided Jacobi sweep.
inline constexpr double kJacobiTol = 1e-14;
inline constexpr int kJacobiMaxSweeps = 60;

inline double column_norm(const DenseMatrix& m, std::size_t j, std::size_t from_row) {
    double acc = 0.0;
    for (std::size_t i = from_row; i < m.rows; ++i) acc += m(i, j) * m(i, j);
    return std::sqrt(acc);
}

}  // namespace detail

// Householder thin QR. Requires rows >= cols and full column rank; a column
// whose residual collapses during elimination is reported by index.
inline QrResult thin_qr(const DenseMatrix& m) {
    const std::size_t d = m.rows;
    const std::size_t r = m.cols;
    if (r == 0) throw DimensionError("thin_qr: input has no columns");
    if (d < r) {
        throw DimensionError("thin_qr: need rows >= cols, got " + std::to_string(d) + " x " +
                             std::to_string(r));
    }

    double scale = 0.0;
    for (std::size_t j = 0; j < r; ++j) scale = std::max(scale, detail::column_norm(m, j, 0));
    const double tol = detail::kRankTol * scale;

    DenseMatrix work = m;
    std::vector<std::vector<double>> reflectors;
    reflectors.reserve(r);

    for (std::size_t k = 0; k < r; ++k) {
        const double pivot_norm = detail::column_norm(work, k, k);
        if (!(pivot_norm > tol)) {
            throw RankDeficientError(
                "thin_qr: column " + std::to_string(k) + " is linearly dependent on earlier columns",
                k);
        }
        const double x0 = work(k, k);
        const double alpha = x0 >= 0.0 ? -pivot_norm : pivot_norm;

        std::vector<double> v(d - k);
        v[0] = x0 - alpha;
        for (std::size_t i = 1; i < d - k; ++i) v[i] = work(k + i, k);
        double vnorm = 0.0;
        for (double vi : v) vnorm += vi * vi;
        vnorm = std::sqrt(vnorm);
        for (double& vi : v) vi /= vnorm;

        // Apply H = I - 2 v v^T to the trailing block.
        for (std::size_t j = k; j < r; ++j) {
            double w = 0.0;
            for (std::size_t i = 0; i < d - k; ++i) w += v[i] * work(k + i, j);
            w *= 2.0;
            for (std::size_t i = 0; i < d - k; ++i) work(k + i, j) -= w * v[i];
        }
        work(k, k) = alpha;
        for (std::size_t i = k + 1; i < d; ++i) work(i, k) = 0.0;
        reflectors.push_back(std::move(v));
    }

    // Thin Q = H_0 ... H_{r-1} applied to the first r columns of I.
    DenseMatrix q(d, r);
    for (std::size_t j = 0; j < r; ++j) q(j, j) = 1.0;
    for (std::size_t k = r; k-- > 0;) {
        const auto& v = reflectors[k];
        for (std::size_t j = 0; j < r; ++j) {
            double w = 0.0;
            for (std::size_t i = 0; i < d - k; ++i) w += v[i] * q(k + i, j);
            w *= 2.0;
            for (std::size_t i = 0; i < d - k; ++i) q(k + i, j) -= w * v[i];
        }
    }

    DenseMatrix rmat(r, r);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = i; j < r; ++j) rmat(i, j) = work(i, j);
    }

    // Sign fix: flip columns of Q and rows of R so diag(R) > 0.
    for (std::size_t j = 0; j < r; ++j) {
        if (rmat(j, j) < 0.0) {
            for (std::size_t t = j; t < r; ++t) rmat(j, t) = -rmat(j, t);
            for (std::size_t i = 0; i < d; ++i) q(i, j) = -q(i, j);
        }
    }
    return {std::move(q), std::move(rmat)};
}

// One-sided Jacobi SVD. Rotations are applied to column pairs of a working
// copy until all pairs are orthogonal; singular values are the resulting
// column norms. Slow-but-exact by design; guarded to modest sizes.
inline SvdResult svd_jacobi(const DenseMatrix& m) {
    if (std::max(m.rows, m.cols) > 2048) {
        throw DimensionError("svd_jacobi: dimension exceeds the 2048 guard");
    }
    if (m.rows == 0 || m.cols == 0) throw DimensionError("svd_jacobi: empty input");
    if (m.rows < m.cols) {
        SvdResult t = svd_jacobi(transpose(m));
        return {std::move(t.v), std::move(t.s), std::move(t.u)};
    }

    const std::size_t rows = m.rows;
    const std::size_t n = m.cols;
    DenseMatrix u = m;
    DenseMatrix v = DenseMatrix::identity(n);

    for (int sweep = 0; sweep < detail::kJacobiMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double aii = 0.0, ajj = 0.0, aij = 0.0;
                for (std::size_t k = 0; k < rows; ++k) {
                    aii += u(k, i) * u(k, i);
                    ajj += u(k, j) * u(k, j);
                    aij += u(k, i) * u(k, j);
                }
                if (aii == 0.0 || ajj == 0.0) continue;
                if (std::fabs(aij) <= detail::kJacobiTol * std::sqrt(aii * ajj)) continue;
                rotated = true;

                const double zeta = (ajj - aii) / (2.0 * aij);
                const double sign = zeta >= 0.0 ? 1.0 : -1.0;
                const double t = sign / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t k = 0; k < rows; ++k) {
                    const double ui = u(k, i), uj = u(k, j);
                    u(k, i) = c * ui - s * uj;
                    u(k, j) = s * ui + c * uj;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vi = v(k, i), vj = v(k, j);
                    v(k, i) = c * vi - s * vj;
                    v(k, j) = s * vi + c * vj;
                }
            }
        }
        if (!rotated) break;
    }

    DenseVector sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = detail::column_norm(u, j, 0);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

    SvdResult out;
    out.u = DenseMatrix(rows, n);
    out.v = DenseMatrix(n, n);
    out.s.resize(n);
    const double sigma_max = sigma[order[0]];
    // Columns this small carry no reliable direction; they get replaced by a
    // deterministic orthonormal completion below.
    const double negligible = 1e-13 * sigma_max;

    std::vector<std::size_t> degenerate;
    for (std::size_t jj = 0; jj < n; ++jj) {
        const std::size_t src = order[jj];
        out.s[jj] = sigma[src];
        for (std::size_t k = 0; k < n; ++k) out.v(k, jj) = v(k, src);
        if (sigma[src] > negligible) {
            for (std::size_t k = 0; k < rows; ++k) out.u(k, jj) = u(k, src) / sigma[src];
        } else {
            degenerate.push_back(jj);
        }
    }

    // Orthonormal completion seeded from basis vectors. Unfilled slots are
    // still zero, so projecting against every column is safe.
    std::size_t basis = 0;
    for (std::size_t jj : degenerate) {
        while (basis < rows) {
            DenseVector cand(rows, 0.0);
            cand[basis++] = 1.0;
            for (std::size_t other = 0; other < n; ++other) {
                if (other == jj) continue;
                double proj = 0.0;
                for (std::size_t k = 0; k < rows; ++k) proj += cand[k] * out.u(k, other);
                for (std::size_t k = 0; k < rows; ++k) cand[k] -= proj * out.u(k, other);
            }
            const double nrm = norm2(cand);
            if (nrm > 0.5) {
                for (std::size_t k = 0; k < rows; ++k) out.u(k, jj) = cand[k] / nrm;
                break;
            }
        }
    }
    return out;
}

// Solves a X = b with partial-pivot LU. a must be square.
inline DenseMatrix solve(DenseMatrix a, DenseMatrix b) {
    if (a.rows != a.cols) throw DimensionError("solve: matrix not square");
    if (b.rows != a.rows) throw DimensionError("solve: rhs rows mismatch");
    const std::size_t n = a.rows;
    const double tol = detail::kPivotTol * std::max(max_abs(a), 1e-300);

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pivot = k;
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::fabs(a(i, k)) > std::fabs(a(pivot, k))) pivot = i;
        }
        if (std::fabs(a(pivot, k)) <= tol) {
            throw SingularMatrixError("solve: singular at pivot " + std::to_string(k));
        }
        if (pivot != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(pivot, j));
            for (std::size_t j = 0; j < b.cols; ++j) std::swap(b(k, j), b(pivot, j));
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
            for (std::size_t j = 0; j < b.cols; ++j) b(i, j) -= f * b(k, j);
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double acc = b(i, j);
            for (std::size_t t = i + 1; t < n; ++t) acc -= a(i, t) * b(t, j);
            b(i, j) = acc / a(i, i);
        }
    }
    return b;
}

// Cayley map of a skew-symmetric matrix: Q = (I - X)(I + X)^{-1}, always
// orthogonal for genuinely skew X.
inline DenseMatrix cayley(const DenseMatrix& x) {
    if (x.rows != x.cols) throw DimensionError("cayley: input not square");
    DenseMatrix sym = x;
    const DenseMatrix xt = transpose(x);
    for (std::size_t i = 0; i < sym.data.size(); ++i) sym.data[i] += xt.data[i];
    if (frobenius_norm(sym) > 1e-12) {
        throw InvalidSkewError("cayley: input is not skew-symmetric (||x + x^T||_F > 1e-12)");
    }
    const std::size_t n = x.rows;
    DenseMatrix plus = DenseMatrix::identity(n);   // I + X
    DenseMatrix minus = DenseMatrix::identity(n);  // I - X
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            plus(i, j) += x(i, j);
            minus(i, j) -= x(i, j);
        }
    }
    // Q (I + X) = I - X  =>  (I + X)^T Q^T = (I - X)^T
    try {
        return transpose(solve(transpose(plus), transpose(minus)));
    } catch (const SingularMatrixError&) {
        throw SingularCayleyError("cayley: (I + X) is numerically singular");
    }
}

// ||M^T M - I||_F, the distance of a column frame from orthonormality.
inline double stiefel_residual(const DenseMatrix& m) {
    DenseMatrix gram = matmul(transpose(m), m);
    for (std::size_t i = 0; i < gram.rows; ++i) gram(i, i) -= 1.0;
    return frobenius_norm(gram);
}

// Number of singular values above rel_tol * s_max.
inline std::size_t numerical_rank(const DenseVector& s, double rel_tol) {
    double smax = 0.0;
    for (double v : s) smax = std::max(smax, v);
    if (smax == 0.0) return 0;
    std::size_t count = 0;
    for (double v : s) {
        if (v > rel_tol * smax) ++count;
    }
    return count;
}

}  // namespace orthogeo::linalg
