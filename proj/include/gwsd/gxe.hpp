#pragma once

// Gene-environment interaction scans. The two-step procedure screens
// markers on gene-environment association in the combined case-control
// sample (cases enrich for G-E correlation when an interaction is real),
// then tests the logistic interaction term only for markers that pass,
// splitting the test level over the passers. alpha_screen = 1 passes
// everything and the procedure collapses to the Bonferroni one-step scan,
// which is also implemented directly as its own loop.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "gwsd/cohort.hpp"
#include "gwsd/errors.hpp"
#include "gwsd/logistic.hpp"
#include "gwsd/normal.hpp"

namespace gwsd {

struct GxeMarkerResult {
    double screen_z = 0.0;
    double screen_p = 1.0;
    bool passed = false;
    bool tested = false;
    double inter_z = std::numeric_limits<double>::quiet_NaN();
    double inter_p = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    bool rejected = false;
};

struct GxeScan {
    double alpha_screen = 1.0;
    double alpha_test = 0.05;
    double step2_level = 0.0; // alpha_test / passers, 0 when nothing passed
    std::int64_t n_passed = 0;
    std::int64_t n_rejected = 0;
    std::vector<GxeMarkerResult> markers;
};

namespace detail {

// Gene-environment association z in the pooled sample: standardized
// product-moment score of dosage against exposure.
inline double ge_screen_z(const SimulatedCohort& c, std::int64_t marker) {
    const std::int64_t n = c.n_subjects();
    double sg = 0.0, se = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        sg += c.marker_dosage(i, marker);
        se += c.exposure[static_cast<std::size_t>(i)];
    }
    const double gbar = sg / static_cast<double>(n);
    const double ebar = se / static_cast<double>(n);
    double sge = 0.0, sgg = 0.0, see = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double dg = c.marker_dosage(i, marker) - gbar;
        const double de = c.exposure[static_cast<std::size_t>(i)] - ebar;
        sge += dg * de;
        sgg += dg * dg;
        see += de * de;
    }
    const double var = sgg * see / static_cast<double>(n);
    if (!(var > 0.0))
        return 0.0;
    return sge / std::sqrt(var);
}

// Wald z for the interaction coefficient in Y ~ 1 + G + E + G*E.
inline void interaction_wald(const SimulatedCohort& c, std::int64_t marker,
                             GxeMarkerResult& out) {
    const std::int64_t n = c.n_subjects();
    std::vector<double> x(static_cast<std::size_t>(n) * 4);
    for (std::int64_t i = 0; i < n; ++i) {
        const double g = c.marker_dosage(i, marker);
        const double e = c.exposure[static_cast<std::size_t>(i)];
        double* row = &x[static_cast<std::size_t>(i) * 4];
        row[0] = 1.0;
        row[1] = g;
        row[2] = e;
        row[3] = g * e;
    }
    const LogisticFit fit =
        logistic_fit(x, static_cast<std::size_t>(n), 4, c.phenotype);
    out.converged = fit.converged;
    if (fit.converged && fit.se[3] > 0.0) {
        out.inter_z = fit.coef[3] / fit.se[3];
        out.inter_p = two_sided_p(out.inter_z);
    }
}

inline void require_exposure(const SimulatedCohort& c) {
    if (!c.has_exposure())
        throw validation_error("gxe scan: cohort carries no exposure column");
}

} // namespace detail

inline GxeScan two_step_gxe_scan(const SimulatedCohort& c, double alpha_screen,
                                 double alpha_test) {
    detail::require_exposure(c);
    if (!(alpha_screen > 0.0 && alpha_screen <= 1.0))
        throw validation_error("two_step_gxe_scan: alpha_screen must lie in (0,1]");
    if (!(alpha_test > 0.0 && alpha_test < 1.0))
        throw validation_error("two_step_gxe_scan: alpha_test must lie in (0,1)");

    GxeScan scan;
    scan.alpha_screen = alpha_screen;
    scan.alpha_test = alpha_test;
    scan.markers.resize(static_cast<std::size_t>(c.n_markers));

    for (std::int64_t j = 0; j < c.n_markers; ++j) {
        auto& r = scan.markers[static_cast<std::size_t>(j)];
        r.screen_z = detail::ge_screen_z(c, j);
        r.screen_p = two_sided_p(r.screen_z);
        r.passed = alpha_screen >= 1.0 || r.screen_p < alpha_screen;
        scan.n_passed += r.passed;
    }
    if (scan.n_passed == 0)
        return scan; // clean empty result: nothing to test at step two

    scan.step2_level = alpha_test / static_cast<double>(scan.n_passed);
    for (std::int64_t j = 0; j < c.n_markers; ++j) {
        auto& r = scan.markers[static_cast<std::size_t>(j)];
        if (!r.passed)
            continue;
        r.tested = true;
        detail::interaction_wald(c, j, r);
        r.rejected = r.converged && r.inter_p < scan.step2_level;
        scan.n_rejected += r.rejected;
    }
    return scan;
}

// Bonferroni scan of the interaction Wald test over every marker.
// Deliberately its own loop rather than a forward to two_step_gxe_scan:
// the claim that the two-step procedure with alpha_screen = 1 collapses
// to this is checked against it in the tests.
inline GxeScan one_step_gxe_scan(const SimulatedCohort& c, double alpha_test) {
    detail::require_exposure(c);
    if (!(alpha_test > 0.0 && alpha_test < 1.0))
        throw validation_error("one_step_gxe_scan: alpha_test must lie in (0,1)");

    GxeScan scan;
    scan.alpha_screen = 1.0;
    scan.alpha_test = alpha_test;
    scan.n_passed = c.n_markers;
    scan.step2_level = alpha_test / static_cast<double>(c.n_markers);
    scan.markers.resize(static_cast<std::size_t>(c.n_markers));
    for (std::int64_t j = 0; j < c.n_markers; ++j) {
        auto& r = scan.markers[static_cast<std::size_t>(j)];
        r.screen_z = detail::ge_screen_z(c, j);
        r.screen_p = two_sided_p(r.screen_z);
        r.passed = true;
        r.tested = true;
        detail::interaction_wald(c, j, r);
        r.rejected = r.converged && r.inter_p < scan.step2_level;
        scan.n_rejected += r.rejected;
    }
    return scan;
}

} // namespace gwsd
