#pragma once

// Small dense symmetric solvers: Cholesky factor, solve, inverse.
// Matrices are row-major n*n in flat vectors; only sizes up to a few
// hundred appear in this codebase, so O(n^3) without blocking is fine.

#include <cmath>
#include <cstddef>
#include <vector>

#include "gwsd/errors.hpp"

namespace gwsd {

// In-place lower Cholesky of a symmetric positive definite matrix.
// Returns false (leaving a partial factor) if a pivot is not positive.
inline bool cholesky_factor(std::vector<double>& a, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k)
            d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0))
            return false;
        const double ljj = std::sqrt(d);
        a[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k)
                s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / ljj;
        }
        for (std::size_t k = j + 1; k < n; ++k)
            a[j * n + k] = 0.0; // zero the upper triangle as we go
    }
    return true;
}

// Solve L L^T x = b given the lower factor from cholesky_factor.
inline void cholesky_solve(const std::vector<double>& l, std::size_t n,
                           std::vector<double>& b) {
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k)
            s -= l[i * n + k] * b[k];
        b[i] = s / l[i * n + i];
    }
    for (std::size_t ii = n; ii > 0; --ii) {
        const std::size_t i = ii - 1;
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k)
            s -= l[k * n + i] * b[k];
        b[i] = s / l[i * n + i];
    }
}

// Inverse of an SPD matrix via its Cholesky factor. Throws if not PD.
inline std::vector<double> spd_inverse(std::vector<double> a, std::size_t n) {
    if (!cholesky_factor(a, n))
        throw numeric_error("spd_inverse: matrix is not positive definite");
    std::vector<double> inv(n * n, 0.0);
    std::vector<double> e(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        cholesky_solve(a, n, e);
        for (std::size_t i = 0; i < n; ++i)
            inv[i * n + j] = e[i];
    }
    return inv;
}

} // namespace gwsd
