#pragma once

// Analytic power machinery for the two-stage design. Stage I types a
// fraction pi of subjects; markers passing the stage-I screen are typed
// in the remainder and judged on the pooled statistic
//   Z_joint = sqrt(pi) Z1 + sqrt(1-pi) Z2,
// so under the null Corr(Z1, Z_joint) = sqrt(pi) and every rejection
// probability is a bivariate normal orthant. A marker is declared only if
// it clears both hurdles with consistent direction. alpha1 >= 1 switches
// the stage-I hurdle (and the sign check) off, giving the one-stage test.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gwsd/bivariate_normal.hpp"
#include "gwsd/errors.hpp"
#include "gwsd/marker_model.hpp"
#include "gwsd/normal.hpp"

namespace gwsd {

struct TwoStageDesign {
    std::int64_t n_total = 0;      // subjects across both stages
    double stage1_fraction = 1.0;  // pi, share of subjects typed in stage I
    double alpha1 = 1.0;           // two-sided stage-I screen; >=1 disables
    double alpha_joint = 0.05;     // two-sided level on the joint statistic
    std::int64_t n_markers = 1;    // markers typed in stage I
    std::int64_t effective_tests = 0; // multiplicity for thresholds; 0 = n_markers

    bool stage1_hurdle_active() const { return alpha1 < 1.0; }
    std::int64_t multiplicity() const {
        return effective_tests > 0 ? effective_tests : n_markers;
    }

    void validate() const {
        if (n_total < 2)
            throw validation_error("TwoStageDesign: n_total must be at least 2");
        if (!(stage1_fraction > 0.0 && stage1_fraction <= 1.0))
            throw validation_error("TwoStageDesign: stage1_fraction must lie in (0,1]");
        if (!(alpha1 > 0.0))
            throw validation_error("TwoStageDesign: alpha1 must be positive");
        if (!(alpha_joint > 0.0 && alpha_joint < 1.0))
            throw validation_error("TwoStageDesign: alpha_joint must lie in (0,1)");
        if (n_markers < 1)
            throw validation_error("TwoStageDesign: n_markers must be positive");
        if (effective_tests < 0 || effective_tests > n_markers)
            throw validation_error(
                "TwoStageDesign: effective_tests must lie in [0, n_markers]");
    }
};

// Noncentrality of the allele-frequency contrast for a design typing
// n_total subjects with the given case fraction: lambda = E[Z]^2, linear
// in n_total.
inline double noncentrality(const MarkerCausalModel& m, double n_total,
                            double case_fraction) {
    if (!(case_fraction > 0.0 && case_fraction < 1.0))
        throw validation_error("noncentrality: case_fraction must lie in (0,1)");
    if (!(n_total > 0.0))
        throw validation_error("noncentrality: n_total must be positive");
    const GameteCellTable t = cell_table(m);
    const double p1 = t.minor_freq(Outcome::case_);
    const double p0 = t.minor_freq(Outcome::control);
    const double var = p1 * (1.0 - p1) / (2.0 * n_total * case_fraction) +
                       p0 * (1.0 - p0) / (2.0 * n_total * (1.0 - case_fraction));
    const double diff = p1 - p0;
    return diff * diff / var;
}

// Per-subject noncentrality: lambda(n) = n * lambda_unit.
inline double noncentrality_per_subject(const MarkerCausalModel& m,
                                        double case_fraction) {
    return noncentrality(m, 1.0, case_fraction);
}

// Two-sided single-stage power at level alpha for noncentrality lambda.
inline double single_stage_power(double lambda, double alpha) {
    if (!(lambda >= 0.0))
        throw validation_error("single_stage_power: lambda must be nonnegative");
    const double h = two_sided_critical(alpha);
    const double mu = std::sqrt(lambda);
    return normal_sf(h - mu) + normal_sf(h + mu);
}

// Per-marker rejection probability under the null for one two-stage test.
inline double two_stage_null_rate(const TwoStageDesign& d) {
    d.validate();
    const double hj = two_sided_critical(d.alpha_joint);
    if (!d.stage1_hurdle_active())
        return d.alpha_joint;
    const double h1 = two_sided_critical(d.alpha1);
    if (d.stage1_fraction == 1.0)
        return 2.0 * normal_sf(std::max(h1, hj));
    return 2.0 * orthant_upper(h1, hj, std::sqrt(d.stage1_fraction));
}

// Power of the two-hurdle test for a marker with full-design noncentrality
// lambda. Includes the (negligible) wrong-direction rejection mass.
inline double joint_two_stage_power(const TwoStageDesign& d, double lambda) {
    d.validate();
    if (!(lambda >= 0.0))
        throw validation_error("joint_two_stage_power: lambda must be nonnegative");
    const double hj = two_sided_critical(d.alpha_joint);
    const double mu = std::sqrt(lambda);
    if (!d.stage1_hurdle_active())
        return normal_sf(hj - mu) + normal_sf(hj + mu);
    const double h1 = two_sided_critical(d.alpha1);
    if (d.stage1_fraction == 1.0) {
        const double h = std::max(h1, hj);
        return normal_sf(h - mu) + normal_sf(h + mu);
    }
    const double rho = std::sqrt(d.stage1_fraction);
    const double mu1 = mu * rho; // stage I sees pi*n subjects
    return orthant_upper(h1 - mu1, hj - mu, rho) +
           orthant_upper(h1 + mu1, hj + mu, rho);
}

// Solve m * null_rate(alpha_joint) = fwer on a log-alpha bisection over
// [fwer/m, alpha1]. The null rate never exceeds alpha_joint, so the lower
// end always under-rejects; if even alpha_joint = alpha1 stays under the
// target the stage-I screen alone is binding and alpha1 is returned.
inline double solve_joint_threshold(const TwoStageDesign& proto, double fwer,
                                    std::int64_t n_markers) {
    if (!(fwer > 0.0 && fwer < 1.0))
        throw validation_error("solve_joint_threshold: fwer must lie in (0,1)");
    if (n_markers < 1)
        throw validation_error("solve_joint_threshold: n_markers must be positive");
    const double m = static_cast<double>(n_markers);
    const double bonf = fwer / m;
    if (!(proto.alpha1 < 1.0))
        return bonf; // no screen: plain Bonferroni on the joint statistic
    if (!(proto.alpha1 > bonf))
        throw validation_error(
            "solve_joint_threshold: alpha1 <= fwer/n_markers, bracket collapses");
    if (proto.stage1_fraction == 1.0)
        return bonf; // single stage: the stricter joint level is exact Bonferroni

    TwoStageDesign d = proto;
    d.n_markers = n_markers;
    d.effective_tests = 0;
    const auto excess = [&](double aj) {
        d.alpha_joint = aj;
        return m * two_stage_null_rate(d) - fwer;
    };

    double lo = std::log(bonf), hi = std::log(std::min(proto.alpha1, 0.999999));
    if (excess(std::exp(hi)) <= 0.0)
        return std::exp(hi); // screen binding: loosest admissible joint level
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (excess(std::exp(mid)) > 0.0)
            hi = mid;
        else
            lo = mid;
        if (hi - lo < 1e-10) // relative tolerance ~1e-10 on alpha_joint
            break;
    }
    // Return the conservative bracket end (excess <= 0 there) so the realized
    // familywise rate never exceeds the target because of bisection slack.
    return std::exp(lo);
}

// Indirect-association attenuation: a marker capturing the causal variant
// with squared correlation r2 behaves like lambda * r2.
struct CoveragePoint {
    double r_squared = 1.0;
    double weight = 1.0;
};

struct CoverageDistribution {
    std::vector<CoveragePoint> points;

    void validate() const {
        if (points.empty())
            throw validation_error("CoverageDistribution: no points");
        double s = 0.0;
        for (const auto& pt : points) {
            if (!(pt.r_squared >= 0.0 && pt.r_squared <= 1.0))
                throw validation_error("CoverageDistribution: r_squared outside [0,1]");
            if (!(pt.weight >= 0.0))
                throw validation_error("CoverageDistribution: negative weight");
            s += pt.weight;
        }
        if (std::fabs(s - 1.0) > 1e-9)
            throw validation_error("CoverageDistribution: weights must sum to 1");
    }
};

inline double coverage_averaged_power(const TwoStageDesign& d, double lambda,
                                      const CoverageDistribution& cov) {
    cov.validate();
    double p = 0.0;
    for (const auto& pt : cov.points)
        p += pt.weight * joint_two_stage_power(d, lambda * pt.r_squared);
    return p;
}

// Marker mixture prior over locus types among stage-I hits:
// type 1 = causal loci, type 2 = markers in LD with a causal locus,
// type 3 = null. power1/power2 are stage-I pass probabilities for the
// first two types; null markers pass at rate alpha1.
struct TypePrior {
    double pi1 = 0.0, pi2 = 0.0, pi3 = 0.0;
    double power1 = 0.0, power2 = 0.0;

    void validate() const {
        if (!(pi1 >= 0.0 && pi2 >= 0.0 && pi3 >= 0.0))
            throw validation_error("TypePrior: negative mixture weight");
        if (std::fabs(pi1 + pi2 + pi3 - 1.0) > 1e-9)
            throw validation_error("TypePrior: mixture weights must sum to 1");
        if (!(power1 >= 0.0 && power1 <= 1.0 && power2 >= 0.0 && power2 <= 1.0))
            throw validation_error("TypePrior: powers must lie in [0,1]");
    }
};

// Posterior probability that a marker passing the stage-I screen is an
// LD proxy (type 2) rather than causal or null.
inline double posterior_type2(const TypePrior& prior, double alpha1) {
    prior.validate();
    if (!(alpha1 > 0.0 && alpha1 <= 1.0))
        throw validation_error("posterior_type2: alpha1 must lie in (0,1]");
    const double denom = prior.power1 * prior.pi1 + prior.power2 * prior.pi2 +
                         alpha1 * prior.pi3;
    if (!(denom > 0.0))
        throw validation_error("posterior_type2: no marker passes the screen");
    return prior.power2 * prior.pi2 / denom;
}

} // namespace gwsd
