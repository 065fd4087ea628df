#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "gwsd/cohort.hpp"
#include "gwsd/gxe.hpp"
#include "gwsd/logistic.hpp"

using namespace gwsd;
using Catch::Approx;

namespace {

// Null genetic panel with an exposure column; interaction and population
// gene-environment association are opt-in per marker.
SimConfig exposure_config(std::uint64_t seed, std::int64_t n_half, std::int64_t m,
                          std::int64_t replicates, double prevalence = 0.3) {
    SimConfig cfg;
    cfg.seed = seed;
    cfg.n_cases = n_half;
    cfg.n_controls = n_half;
    cfg.replicates = replicates;
    cfg.with_exposure = true;
    cfg.exposure.prevalence = prevalence;
    cfg.panel.assign(static_cast<std::size_t>(m),
                     PanelMarker{MarkerCausalModel::null_marker(0.3), 1.0, 0.0});
    return cfg;
}

bool same_value(double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || a == b;
}

} // namespace

TEST_CASE("gxe scans demand an exposure column and sane levels") {
    SimConfig plain = exposure_config(7, 50, 2, 1);
    plain.with_exposure = false;
    const SimulatedCohort no_expo = simulate_cohort(plain);
    CHECK_THROWS_AS(two_step_gxe_scan(no_expo, 0.1, 0.05), validation_error);
    CHECK_THROWS_AS(one_step_gxe_scan(no_expo, 0.05), validation_error);

    const SimulatedCohort c = simulate_cohort(exposure_config(7, 50, 2, 1));
    CHECK_THROWS_AS(two_step_gxe_scan(c, 0.0, 0.05), validation_error);
    CHECK_THROWS_AS(two_step_gxe_scan(c, 1.1, 0.05), validation_error);
    CHECK_THROWS_AS(two_step_gxe_scan(c, 0.1, 0.0), validation_error);
    CHECK_THROWS_AS(two_step_gxe_scan(c, 0.1, 1.0), validation_error);
    CHECK_THROWS_AS(one_step_gxe_scan(c, 1.0), validation_error);
}

TEST_CASE("exposure generation follows the dosage-dependent log-odds") {
    SimConfig cfg = exposure_config(5150, 2500, 3, 1);
    cfg.panel[0].exposure_log_odds = 0.8;
    const SimulatedCohort c = simulate_cohort(cfg);

    // Controls are population draws, so Pr(exposed | dosage) is exactly
    // the logistic model the config states.
    const double logit_prev = std::log(0.3 / 0.7);
    std::int64_t n_dose[3] = {0, 0, 0}, e_dose[3] = {0, 0, 0};
    for (std::int64_t i = c.n_cases; i < c.n_subjects(); ++i) {
        const int d = c.marker_dosage(i, 0);
        n_dose[d] += 1;
        e_dose[d] += c.exposure[static_cast<std::size_t>(i)];
    }
    for (int d = 0; d <= 2; ++d) {
        REQUIRE(n_dose[d] > 50);
        const double expected = expit(logit_prev + 0.8 * d);
        const double got = static_cast<double>(e_dose[d]) /
                           static_cast<double>(n_dose[d]);
        const double se = std::sqrt(expected * (1.0 - expected) /
                                    static_cast<double>(n_dose[d]));
        INFO("dosage " << d << ": " << got << " vs " << expected);
        CHECK(std::fabs(got - expected) <= 3.0 * se);
    }

    // The screen statistic sees that association; the clean markers stay
    // near zero.
    const GxeScan scan = two_step_gxe_scan(c, 0.05, 0.05);
    CHECK(scan.markers[0].screen_z > 5.0);
    CHECK(std::fabs(scan.markers[1].screen_z) < 4.0);
    CHECK(std::fabs(scan.markers[2].screen_z) < 4.0);
}

TEST_CASE("screening at level one is exactly the one-step scan") {
    SimConfig cfg = exposure_config(31001, 400, 12, 1);
    cfg.panel[4].gxe_or = 1.9;
    const SimulatedCohort c = simulate_cohort(cfg);

    const GxeScan collapsed = two_step_gxe_scan(c, 1.0, 0.05);
    const GxeScan direct = one_step_gxe_scan(c, 0.05);

    CHECK(collapsed.n_passed == 12);
    CHECK(collapsed.n_passed == direct.n_passed);
    CHECK(collapsed.step2_level == direct.step2_level);
    CHECK(collapsed.n_rejected == direct.n_rejected);
    REQUIRE(collapsed.markers.size() == direct.markers.size());
    for (std::size_t j = 0; j < collapsed.markers.size(); ++j) {
        const auto& a = collapsed.markers[j];
        const auto& b = direct.markers[j];
        CHECK(a.passed);
        CHECK(a.tested);
        CHECK(b.tested);
        CHECK(same_value(a.screen_z, b.screen_z));
        CHECK(same_value(a.inter_z, b.inter_z));
        CHECK(same_value(a.inter_p, b.inter_p));
        CHECK(a.converged == b.converged);
        CHECK(a.rejected == b.rejected);
    }

    // Scans are pure functions of the cohort: rerunning changes nothing.
    const GxeScan again = two_step_gxe_scan(c, 1.0, 0.05);
    for (std::size_t j = 0; j < again.markers.size(); ++j)
        CHECK(same_value(again.markers[j].inter_z, collapsed.markers[j].inter_z));
}

TEST_CASE("a hopeless screen level returns an empty result") {
    const SimulatedCohort c = simulate_cohort(exposure_config(909, 150, 10, 1));
    const GxeScan scan = two_step_gxe_scan(c, 1e-9, 0.05);
    CHECK(scan.n_passed == 0);
    CHECK(scan.n_rejected == 0);
    CHECK(scan.step2_level == 0.0);
    for (const auto& r : scan.markers) {
        CHECK_FALSE(r.passed);
        CHECK_FALSE(r.tested);
    }
}

TEST_CASE("two-step scan holds the overall type-I error under the null") {
    const std::int64_t reps = 500;
    SimConfig cfg = exposure_config(77204, 300, 20, reps);

    std::int64_t families_hit = 0;
    for (std::int64_t r = 0; r < reps; ++r) {
        const SimulatedCohort c = simulate_cohort(cfg, r);
        const GxeScan scan = two_step_gxe_scan(c, 0.1, 0.05);
        families_hit += scan.n_rejected > 0;
    }
    const double rate = static_cast<double>(families_hit) / static_cast<double>(reps);
    const double se = std::sqrt(0.05 * 0.95 / static_cast<double>(reps));
    INFO("overall type-I " << rate);
    CHECK(rate <= 0.05 + 3.0 * se);
    CHECK(rate >= 0.005); // the screen must not silently kill everything
}

TEST_CASE("population gene-environment association alone is filtered out") {
    // The screen fires on the population association, but the follow-up
    // interaction test sees no interaction, so rejections stay nominal.
    const std::int64_t reps = 300;
    SimConfig cfg = exposure_config(990011, 300, 10, reps);
    cfg.panel[0].exposure_log_odds = 0.5;

    std::int64_t passed = 0, families_hit = 0;
    for (std::int64_t r = 0; r < reps; ++r) {
        const SimulatedCohort c = simulate_cohort(cfg, r);
        const GxeScan scan = two_step_gxe_scan(c, 0.05, 0.05);
        passed += scan.markers[0].passed;
        families_hit += scan.n_rejected > 0;
    }
    const double rate = static_cast<double>(families_hit) / static_cast<double>(reps);
    const double se = std::sqrt(0.05 * 0.95 / static_cast<double>(reps));
    INFO("screen pass count " << passed << ", overall type-I " << rate);
    CHECK(passed > reps / 2); // the association is strong enough to pass
    CHECK(rate <= 0.05 + 3.0 * se);
}

TEST_CASE("two-step screening outpowers the one-step scan") {
    // One real interaction in a 300-marker panel: the screen spends its
    // budget on a handful of markers, so step two runs at a far looser
    // level than 0.05/300. Paired per-replicate comparison.
    const std::int64_t reps = 100;
    SimConfig cfg = exposure_config(99100, 700, 300, reps);
    cfg.panel[0].gxe_or = 1.8;

    std::int64_t d_plus = 0, d_minus = 0, two = 0, one = 0, pass = 0;
    for (std::int64_t r = 0; r < reps; ++r) {
        const SimulatedCohort c = simulate_cohort(cfg, r);
        const GxeScan ts = two_step_gxe_scan(c, 0.05, 0.05);
        const GxeScan os = one_step_gxe_scan(c, 0.05);
        const bool t = ts.markers[0].rejected;
        const bool o = os.markers[0].rejected;
        two += t;
        one += o;
        d_plus += t && !o;
        d_minus += !t && o;
        pass += ts.markers[0].passed;
    }
    const double R = static_cast<double>(reps);
    const double diff = static_cast<double>(d_plus - d_minus) / R;
    const double pd = static_cast<double>(d_plus + d_minus) / R;
    const double se = std::sqrt((pd - diff * diff) / R);
    INFO("two-step " << two / R << " one-step " << one / R << " paired diff "
                     << diff << " se " << se);
    CHECK(static_cast<double>(pass) / R > 0.9);
    CHECK(diff > 3.0 * se);
    CHECK(two > one);
}
