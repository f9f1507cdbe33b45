#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "orthogeo/errors.hpp"

namespace orthogeo {

using DenseVector = std::vector<double>;

// Row-major dense matrix of doubles. This is the substrate for everything in
// the library; all heavier structure (factorizations, adapters) is built from
// free functions over it.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }

    // Checked construction from literal rows; rejects ragged or non-finite
    // input. Intended for user-supplied values and tests.
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
        const std::size_t r = rows_init.size();
        const std::size_t c = r == 0 ? 0 : rows_init.begin()->size();
        DenseMatrix m(r, c);
        std::size_t i = 0;
        for (const auto& row : rows_init) {
            if (row.size() != c) throw DimensionError("from_rows: ragged row " + std::to_string(i));
            std::size_t j = 0;
            for (double v : row) {
                if (!std::isfinite(v)) throw NumericError("from_rows: non-finite entry");
                m(i, j++) = v;
            }
            ++i;
        }
        return m;
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline void require_finite(const DenseMatrix& m, const char* what) {
    for (double v : m.data) {
        if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite entry");
    }
}

inline void require_finite(const DenseVector& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError(std::string(what) + ": non-finite entry");
    }
}

// c = a * b. The inner accumulation runs left to right over k so repeated
// calls on the same inputs are bit-identical.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.rows) {
        throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols) + " and " +
                             std::to_string(b.rows) + " do not match");
    }
    DenseMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
            c(i, j) = acc;
        }
    }
    return c;
}

inline DenseVector matvec(const DenseMatrix& a, const DenseVector& x) {
    if (a.cols != x.size()) throw DimensionError("matvec: dimension mismatch");
    DenseVector y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * x[k];
        y[i] = acc;
    }
    return y;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    }
    return t;
}

inline DenseMatrix scaled(const DenseMatrix& a, double c) {
    DenseMatrix out = a;
    for (double& v : out.data) v *= c;
    return out;
}

// a += c * b
inline void add_scaled(DenseMatrix& a, const DenseMatrix& b, double c) {
    if (a.rows != b.rows || a.cols != b.cols) throw DimensionError("add_scaled: shape mismatch");
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += c * b.data[i];
}

inline DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw DimensionError("subtract: shape mismatch");
    DenseMatrix out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

inline double dot(const DenseVector& a, const DenseVector& b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm2(const DenseVector& v) { return std::sqrt(dot(v, v)); }

inline double frobenius_norm(const DenseMatrix& m) {
    double acc = 0.0;
    for (double v : m.data) acc += v * v;
    return std::sqrt(acc);
}

inline double max_abs(const DenseMatrix& m) {
    double best = 0.0;
    for (double v : m.data) best = std::max(best, std::fabs(v));
    return best;
}

inline DenseMatrix column_matrix(const DenseVector& v) {
    DenseMatrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
}

inline DenseVector column_of(const DenseMatrix& m, std::size_t j) {
    DenseVector v(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) v[i] = m(i, j);
    return v;
}

}  // namespace orthogeo
