#pragma once

// Logistic regression by Fisher scoring (IRLS), with optional per-subject
// offsets. Offsets enter the linear predictor but are not estimated; they
// carry known sampling weights in the resequencing designs.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gwsd/errors.hpp"
#include "gwsd/linalg.hpp"

namespace gwsd {

struct LogisticFit {
    std::vector<double> coef;
    std::vector<double> se;
    bool converged = false;
    int iterations = 0;
};

inline double expit(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// x: row-major n*p design matrix (caller supplies the intercept column);
// y: 0/1 outcomes; offset: empty or length n.
// Convergence: max |delta beta| < 1e-8 within max_iter sweeps. A fit that
// walks off to +/-inf (separation) or hits a singular information matrix
// comes back with converged=false rather than throwing, so scans can skip
// degenerate markers and keep going.
inline LogisticFit logistic_fit(std::span<const double> x, std::size_t n, std::size_t p,
                                std::span<const std::uint8_t> y,
                                std::span<const double> offset = {},
                                int max_iter = 50) {
    if (n == 0 || p == 0 || x.size() != n * p || y.size() != n)
        throw validation_error("logistic_fit: inconsistent dimensions");
    if (!offset.empty() && offset.size() != n)
        throw validation_error("logistic_fit: offset length must match n");

    LogisticFit fit;
    fit.coef.assign(p, 0.0);
    std::vector<double> eta(n), mu(n), info(p * p), score(p), delta(p);

    for (int iter = 1; iter <= max_iter; ++iter) {
        fit.iterations = iter;
        for (std::size_t i = 0; i < n; ++i) {
            double e = offset.empty() ? 0.0 : offset[i];
            for (std::size_t k = 0; k < p; ++k)
                e += x[i * p + k] * fit.coef[k];
            eta[i] = e;
            mu[i] = expit(e);
        }
        std::fill(info.begin(), info.end(), 0.0);
        std::fill(score.begin(), score.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = mu[i] * (1.0 - mu[i]);
            const double r = static_cast<double>(y[i]) - mu[i];
            for (std::size_t k = 0; k < p; ++k) {
                score[k] += x[i * p + k] * r;
                for (std::size_t l = k; l < p; ++l)
                    info[k * p + l] += w * x[i * p + k] * x[i * p + l];
            }
        }
        for (std::size_t k = 0; k < p; ++k)
            for (std::size_t l = 0; l < k; ++l)
                info[k * p + l] = info[l * p + k];

        std::vector<double> chol = info;
        if (!cholesky_factor(chol, p))
            return fit; // singular information: monomorphic column or separation
        delta = score;
        cholesky_solve(chol, p, delta);

        double max_step = 0.0, max_coef = 0.0;
        for (std::size_t k = 0; k < p; ++k) {
            fit.coef[k] += delta[k];
            max_step = std::max(max_step, std::fabs(delta[k]));
            max_coef = std::max(max_coef, std::fabs(fit.coef[k]));
        }
        if (max_coef > 30.0)
            return fit; // fleeing coefficients: quasi-complete separation

        if (max_step < 1e-8) {
            const std::vector<double> cov = spd_inverse(info, p);
            fit.se.resize(p);
            for (std::size_t k = 0; k < p; ++k)
                fit.se[k] = std::sqrt(cov[k * p + k]);
            fit.converged = true;
            return fit;
        }
    }
    return fit; // out of iterations
}

} // namespace gwsd
