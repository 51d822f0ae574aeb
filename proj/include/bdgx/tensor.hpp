#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "bdgx/errors.hpp"

namespace bdgx {

/// Dense row-major tensor of 64-bit floats. The flat `data` array always has
/// product(shape) elements.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shp)
        : shape(std::move(shp)), data(numel_of(shape), 0.0) {}

    Tensor(std::vector<std::size_t> shp, std::vector<double> values)
        : shape(std::move(shp)), data(std::move(values)) {
        if (data.size() != numel_of(shape)) {
            throw DimensionError("tensor: data length " + std::to_string(data.size()) +
                                 " does not match shape product " +
                                 std::to_string(numel_of(shape)));
        }
    }

    static std::size_t numel_of(const std::vector<std::size_t>& shp) {
        std::size_t n = 1;
        for (std::size_t d : shp) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

    double* row(std::size_t i) { return data.data() + i * cols(); }
    const double* row(std::size_t i) const { return data.data() + i * cols(); }

    static Tensor zeros(std::vector<std::size_t> shp) { return Tensor(std::move(shp)); }

    static Tensor full(std::vector<std::size_t> shp, double value) {
        Tensor t(std::move(shp));
        std::fill(t.data.begin(), t.data.end(), value);
        return t;
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (double v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

inline void require_matrix(const Tensor& t, const char* name) {
    if (t.shape.size() != 2) {
        throw DimensionError(std::string(name) + ": expected a rank-2 tensor, got rank " +
                             std::to_string(t.shape.size()));
    }
}

/// C = A * B with A [M,K], B [K,N]. i-k-j loop order so the inner loop
/// vectorizes over contiguous rows of B and C.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul lhs");
    require_matrix(b, "matmul rhs");
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    if (b.shape[0] != k) {
        throw DimensionError("matmul: inner dimensions " + std::to_string(k) + " vs " +
                             std::to_string(b.shape[0]));
    }
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c.row(i);
        const double* ai = a.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b.row(p);
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
    return c;
}

/// C = A^T * B with A [K,M], B [K,N]. Used for weight gradients.
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_tn lhs");
    require_matrix(b, "matmul_tn rhs");
    const std::size_t k = a.shape[0], m = a.shape[1], n = b.shape[1];
    if (b.shape[0] != k) {
        throw DimensionError("matmul_tn: row counts " + std::to_string(k) + " vs " +
                             std::to_string(b.shape[0]));
    }
    Tensor c({m, n});
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a.row(p);
        const double* bp = b.row(p);
        for (std::size_t i = 0; i < m; ++i) {
            const double av = ap[i];
            if (av == 0.0) continue;
            double* ci = c.row(i);
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
    return c;
}

/// C = A * B^T with A [M,K], B [N,K]. Used for input gradients.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_nt lhs");
    require_matrix(b, "matmul_nt rhs");
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
    if (b.shape[1] != k) {
        throw DimensionError("matmul_nt: inner dimensions " + std::to_string(k) + " vs " +
                             std::to_string(b.shape[1]));
    }
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b.row(j);
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
    return c;
}

/// Adds a length-N row vector to every row of a [M,N] matrix in place.
inline void add_row_vector(Tensor& m, const Tensor& v) {
    require_matrix(m, "add_row_vector target");
    if (v.numel() != m.shape[1]) {
        throw DimensionError("add_row_vector: vector length " + std::to_string(v.numel()) +
                             " vs row width " + std::to_string(m.shape[1]));
    }
    for (std::size_t i = 0; i < m.shape[0]; ++i) {
        double* r = m.row(i);
        for (std::size_t j = 0; j < v.numel(); ++j) r[j] += v.data[j];
    }
}

/// Column sums of a [M,N] matrix, as a length-N tensor.
inline Tensor column_sums(const Tensor& m) {
    require_matrix(m, "column_sums");
    Tensor out({m.shape[1]});
    for (std::size_t i = 0; i < m.shape[0]; ++i) {
        const double* r = m.row(i);
        for (std::size_t j = 0; j < m.shape[1]; ++j) out.data[j] += r[j];
    }
    return out;
}

}  // namespace bdgx
