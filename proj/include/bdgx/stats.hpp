#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bdgx/errors.hpp"
#include "bdgx/tensor.hpp"

namespace bdgx {

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double variance(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mu = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - mu) * (x - mu);
    return s / static_cast<double>(xs.size() - 1);
}

inline double stddev(const std::vector<double>& xs) { return std::sqrt(variance(xs)); }

/// Column means of a [N,D] matrix.
inline std::vector<double> column_means(const Tensor& m) {
    require_matrix(m, "column_means");
    std::vector<double> mu(m.shape[1], 0.0);
    for (std::size_t i = 0; i < m.shape[0]; ++i) {
        const double* r = m.row(i);
        for (std::size_t j = 0; j < m.shape[1]; ++j) mu[j] += r[j];
    }
    for (double& v : mu) v /= static_cast<double>(m.shape[0]);
    return mu;
}

/// Sample covariance matrix [D,D] of a [N,D] matrix.
inline Tensor covariance_matrix(const Tensor& m) {
    require_matrix(m, "covariance_matrix");
    const std::size_t n = m.shape[0], d = m.shape[1];
    const std::vector<double> mu = column_means(m);
    Tensor cov({d, d});
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = m.row(i);
        for (std::size_t a = 0; a < d; ++a) {
            const double da = r[a] - mu[a];
            double* ca = cov.row(a);
            for (std::size_t b = 0; b < d; ++b) ca[b] += da * (r[b] - mu[b]);
        }
    }
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    for (double& v : cov.data) v /= denom;
    return cov;
}

inline double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DimensionError("euclidean_distance: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline double frobenius_distance(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("frobenius_distance: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F1(x) - F2(x)|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DimensionError("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t ia = 0, ib = 0;
    double d = 0.0;
    while (ia < a.size() && ib < b.size()) {
        const double x = std::min(a[ia], b[ib]);
        while (ia < a.size() && a[ia] <= x) ++ia;
        while (ib < b.size() && b[ib] <= x) ++ib;
        d = std::max(d, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
    }
    return d;
}

/// KS statistic between column j of two sample matrices.
inline double ks_statistic_column(const Tensor& a, const Tensor& b, std::size_t j) {
    std::vector<double> xa(a.shape[0]), xb(b.shape[0]);
    for (std::size_t i = 0; i < a.shape[0]; ++i) xa[i] = a(i, j);
    for (std::size_t i = 0; i < b.shape[0]; ++i) xb[i] = b(i, j);
    return ks_statistic(std::move(xa), std::move(xb));
}

}  // namespace bdgx
