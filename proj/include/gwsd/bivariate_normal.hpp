#pragma once

// Upper orthant probability P(X > a, Y > b) for a standard bivariate
// normal pair with correlation rho, via the conditional decomposition
//   P = integral_a^inf  phi(x) * SF((b - rho*x) / sqrt(1-rho^2)) dx
// evaluated with adaptive Gauss-Kronrod panels. Integration runs over the
// variable with the larger threshold so the integrand is a clean product
// of decaying tails, and the tolerance is scaled to the attainable upper
// bound min(SF(a), SF(b)) so probabilities of order 1e-10 still come back
// with ~10 correct digits.

#include <algorithm>
#include <cmath>

#include "gwsd/errors.hpp"
#include "gwsd/normal.hpp"
#include "gwsd/quadrature.hpp"

namespace gwsd {

inline double orthant_upper(double a, double b, double rho) {
    if (!(rho >= -1.0 && rho <= 1.0) || std::isnan(rho))
        throw validation_error("orthant_upper: correlation must lie in [-1,1]");
    if (std::isnan(a) || std::isnan(b))
        throw validation_error("orthant_upper: thresholds must be finite numbers");

    // Degenerate correlations: Y = +/- X almost surely.
    if (rho > 1.0 - 1e-12)
        return normal_sf(std::max(a, b));
    if (rho < -1.0 + 1e-12)
        return std::max(0.0, normal_cdf(-b) - normal_cdf(a));
    if (rho == 0.0)
        return normal_sf(a) * normal_sf(b);

    if (a < b)
        std::swap(a, b); // symmetric in (a,b); keep the larger threshold outside

    const double scale = std::min(normal_sf(a), normal_sf(b));
    if (scale <= 0.0)
        return 0.0;
    const double abs_tol = std::max(scale * 1e-11, 1e-280);

    const double sigma = std::sqrt((1.0 - rho) * (1.0 + rho));
    const auto integrand = [&](double x) {
        return normal_pdf(x) * normal_sf((b - rho * x) / sigma);
    };
    const double hi = std::max(a, 0.0) + 40.0;
    double p = integrate(integrand, a, hi, abs_tol);
    if (p < 0.0)
        p = 0.0;
    return p;
}

} // namespace gwsd
