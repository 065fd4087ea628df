#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gwsd/cohort.hpp"
#include "gwsd/significance.hpp"

using namespace gwsd;
using Catch::Approx;

namespace {

SimConfig null_config(std::uint64_t seed, std::int64_t n_half, std::int64_t m,
                      double maf, std::int64_t replicates) {
    SimConfig cfg;
    cfg.seed = seed;
    cfg.n_cases = n_half;
    cfg.n_controls = n_half;
    cfg.replicates = replicates;
    cfg.panel.assign(static_cast<std::size_t>(m),
                     PanelMarker{MarkerCausalModel::null_marker(maf), 1.0, 0.0});
    return cfg;
}

MarkerCausalModel direct_marker(double maf, double rr) {
    return MarkerCausalModel{maf, maf, maf * (1.0 - maf), rr, 0.0};
}

TwoStageDesign make_design(std::int64_t n, double pi, double a1, double aj,
                           std::int64_t m) {
    TwoStageDesign d;
    d.n_total = n;
    d.stage1_fraction = pi;
    d.alpha1 = a1;
    d.alpha_joint = aj;
    d.n_markers = m;
    return d;
}

// Overwrite marker `to` with an exact copy of marker `from`.
void duplicate_column(SimulatedCohort& c, std::int64_t from, std::int64_t to) {
    for (std::int64_t i = 0; i < c.n_subjects(); ++i)
        c.gametes[static_cast<std::size_t>(i * c.n_markers + to)] =
            c.gametes[static_cast<std::size_t>(i * c.n_markers + from)];
}

void check_basic_contract(const AdjustedPValues& r, std::int64_t replicates) {
    REQUIRE(r.replicates == replicates);
    const double floor = 1.0 / (static_cast<double>(replicates) + 1.0);
    for (std::size_t j = 0; j < r.adjusted_p.size(); ++j) {
        CHECK(r.adjusted_p[j] >= floor);
        CHECK(r.adjusted_p[j] <= 1.0);
        CHECK(r.raw_p[j] >= floor);
        // Both p-values rank the same draws, so this is exact.
        CHECK(r.adjusted_p[j] >= r.raw_p[j]);
    }
    // A larger observed statistic never earns a larger adjusted p.
    for (std::size_t a = 0; a < r.statistic.size(); ++a)
        for (std::size_t b = 0; b < r.statistic.size(); ++b)
            if (r.statistic[a] > r.statistic[b])
                CHECK(r.adjusted_p[a] <= r.adjusted_p[b]);
}

} // namespace

TEST_CASE("adjusted p-values honor the ranking contract on signal data") {
    SimConfig cfg = null_config(150501, 100, 12, 0.3, 1);
    cfg.panel[3] = PanelMarker{direct_marker(0.3, 2.5), 1.0, 0.0};
    const SimulatedCohort c = simulate_cohort(cfg);
    const TwoStageDesign d = make_design(200, 0.5, 0.2, 1e-4, 12);

    const AdjustedPValues lin = lin_adjusted_p(c, d, 2000, 77);
    const AdjustedPValues dud = dudbridge_adjusted_p(c, d, 2000, 77);
    const AdjustedPValues ref = max_statistic_reference(c, 2000, 77);
    check_basic_contract(lin, 2000);
    check_basic_contract(dud, 2000);
    check_basic_contract(ref, 2000);

    // The injected effect dominates all three rankings.
    for (const auto* r : {&lin, &dud, &ref}) {
        const auto best =
            std::min_element(r->adjusted_p.begin(), r->adjusted_p.end());
        CHECK(best - r->adjusted_p.begin() == 3);
    }
}

TEST_CASE("a single marker needs no multiplicity adjustment") {
    SimConfig cfg = null_config(2211, 100, 1, 0.3, 1);
    cfg.panel[0] = PanelMarker{direct_marker(0.3, 1.5), 1.0, 0.0};
    const SimulatedCohort c = simulate_cohort(cfg);
    const TwoStageDesign d = make_design(200, 0.5, 0.5, 1e-3, 1);

    // With one marker the max statistic is the marker's own statistic, so
    // adjusted and raw coincide draw by draw.
    const AdjustedPValues lin = lin_adjusted_p(c, d, 1000, 5);
    CHECK(lin.adjusted_p[0] == lin.raw_p[0]);
    const AdjustedPValues dud = dudbridge_adjusted_p(c, d, 1000, 5);
    CHECK(dud.adjusted_p[0] == dud.raw_p[0]);
    const AdjustedPValues ref = max_statistic_reference(c, 1000, 5);
    CHECK(ref.adjusted_p[0] == ref.raw_p[0]);
}

TEST_CASE("duplicated markers behave as one effective test") {
    SimConfig cfg = null_config(40404, 100, 3, 0.3, 1);
    cfg.panel[0] = PanelMarker{direct_marker(0.3, 1.8), 1.0, 0.0};
    SimulatedCohort c = simulate_cohort(cfg);
    duplicate_column(c, 0, 1); // markers 0 and 1 now identical
    const TwoStageDesign d = make_design(200, 0.5, 0.5, 1e-3, 3);

    // Permutation methods see identical statistics for the two copies.
    const AdjustedPValues ref = max_statistic_reference(c, 1500, 9);
    CHECK(ref.statistic[0] == ref.statistic[1]);
    CHECK(ref.adjusted_p[0] == ref.adjusted_p[1]);
    CHECK(ref.raw_p[0] == ref.raw_p[1]);

    const AdjustedPValues dud = dudbridge_adjusted_p(c, d, 1500, 9);
    CHECK(dud.statistic[0] == dud.statistic[1]);
    CHECK(dud.adjusted_p[0] == dud.adjusted_p[1]);

    // The singular score correlation forces the ridge fallback; the draws
    // for the two copies then coincide up to the tiny ridge, so the
    // adjustment over {copy, copy, independent} behaves like two tests.
    const AdjustedPValues lin = lin_adjusted_p(c, d, 4000, 9);
    CHECK(lin.statistic[0] == lin.statistic[1]);
    CHECK(lin.adjusted_p[0] == Approx(lin.adjusted_p[1]).margin(0.01));

    // Two identical markers alone: adjusted collapses to raw.
    SimConfig two = null_config(40405, 100, 2, 0.3, 1);
    SimulatedCohort c2 = simulate_cohort(two);
    duplicate_column(c2, 0, 1);
    const AdjustedPValues pair = max_statistic_reference(c2, 1500, 11);
    CHECK(pair.adjusted_p[0] == pair.raw_p[0]);
    const AdjustedPValues lin2 =
        lin_adjusted_p(c2, make_design(200, 0.5, 0.5, 1e-3, 2), 4000, 11);
    CHECK(lin2.adjusted_p[0] ==
          Approx(lin2.raw_p[0]).margin(3.0 * lin2.mc_se[0] + 0.005));
}

TEST_CASE("one-stage gated statistics equal the reference scan") {
    SimConfig cfg = null_config(606060, 120, 10, 0.25, 1);
    cfg.panel[7] = PanelMarker{direct_marker(0.25, 1.7), 1.0, 0.0};
    const SimulatedCohort c = simulate_cohort(cfg);

    // pi = 1 and alpha1 = 1 disable the split and the gate; the observed
    // statistic must then be the plain full-sample score z squared.
    const TwoStageDesign d = make_design(240, 1.0, 1.0, 1e-3, 10);
    const AdjustedPValues lin = lin_adjusted_p(c, d, 500, 3);
    const AdjustedPValues ref = max_statistic_reference(c, 500, 3);
    REQUIRE(lin.statistic.size() == ref.statistic.size());
    for (std::size_t j = 0; j < lin.statistic.size(); ++j)
        CHECK(lin.statistic[j] == ref.statistic[j]);
}

TEST_CASE("the joint-normal and permutation adjustments agree") {
    // The permuted score statistic lives on a dosage lattice whose grain
    // shrinks like 1/sqrt(n); against a continuous normal reference the
    // lattice error is amplified by the max over markers, so agreement to
    // 0.02 needs a cohort this size.
    const std::int64_t m = 50;
    const std::int64_t draws = 40000;
    const TwoStageDesign d = make_design(1000, 0.5, 0.2, 1e-4, m);

    SimConfig null_cfg = null_config(868601, 500, m, 0.3, 1);
    const SimulatedCohort null_cohort = simulate_cohort(null_cfg);

    SimConfig sig_cfg = null_config(868602, 500, m, 0.3, 1);
    sig_cfg.panel[10] = PanelMarker{direct_marker(0.3, 2.0), 1.0, 0.0};
    const SimulatedCohort sig_cohort = simulate_cohort(sig_cfg);

    for (const SimulatedCohort* c : {&null_cohort, &sig_cohort}) {
        const AdjustedPValues lin = lin_adjusted_p(*c, d, draws, 314);
        const AdjustedPValues dud = dudbridge_adjusted_p(*c, d, draws, 314);
        double worst = 0.0;
        for (std::size_t j = 0; j < static_cast<std::size_t>(m); ++j)
            worst = std::max(worst,
                             std::fabs(lin.adjusted_p[j] - dud.adjusted_p[j]));
        INFO("largest per-marker disagreement " << worst);
        CHECK(worst < 0.02);
    }
}

TEST_CASE("permutation p-values are exact ranks") {
    const SimulatedCohort c = simulate_cohort(null_config(123321, 80, 6, 0.3, 1));
    const TwoStageDesign d = make_design(160, 0.5, 0.3, 1e-3, 6);

    const AdjustedPValues dud = dudbridge_adjusted_p(c, d, 999, 21);
    REQUIRE(dud.replicates == 999);
    for (std::size_t j = 0; j < 6; ++j) {
        const double scaled = dud.adjusted_p[j] * 1000.0;
        CHECK(scaled == Approx(std::round(scaled)).margin(1e-9));
        CHECK(dud.adjusted_p[j] >= 0.001);
    }
}

TEST_CASE("a strong signal drives the adjusted p to the floor") {
    SimConfig cfg = null_config(55221, 200, 20, 0.3, 1);
    cfg.panel[0] = PanelMarker{direct_marker(0.3, 3.0), 1.0, 0.0};
    const SimulatedCohort c = simulate_cohort(cfg);
    const TwoStageDesign d = make_design(400, 0.5, 0.2, 1e-4, 20);

    CHECK(lin_adjusted_p(c, d, 1999, 8).adjusted_p[0] < 0.001);
    CHECK(dudbridge_adjusted_p(c, d, 1999, 8).adjusted_p[0] < 0.001);
    CHECK(max_statistic_reference(c, 1999, 8).adjusted_p[0] < 0.001);
}

TEST_CASE("null familywise error is calibrated and never anticonservative") {
    // Gating puts an atom at q = 0 and the dosage lattice creates exact
    // ties, so adjusted p-values are super-uniform rather than uniform:
    // deviations from the diagonal may only point the conservative way.
    // What must hold sharply is the rejection rate at 0.05 (driven by the
    // continuous upper tail) and the one-sided distance of the reference
    // min-p CDF above the diagonal.
    const std::int64_t datasets = 500;
    const std::int64_t perms = 499;
    const std::int64_t m = 8;
    SimConfig cfg = null_config(71717, 100, m, 0.3, datasets);
    const TwoStageDesign d = make_design(200, 0.5, 0.2, 1e-4, m);

    std::vector<double> min_ref(static_cast<std::size_t>(datasets));
    std::int64_t dud_hits = 0, lin_hits = 0, ref_hits = 0;
    for (std::int64_t r = 0; r < datasets; ++r) {
        const SimulatedCohort c = simulate_cohort(cfg, r);
        const std::uint64_t s = 9000 + static_cast<std::uint64_t>(r);
        const AdjustedPValues dud = dudbridge_adjusted_p(c, d, perms, s);
        dud_hits += *std::min_element(dud.adjusted_p.begin(),
                                      dud.adjusted_p.end()) <= 0.05;
        const AdjustedPValues lin = lin_adjusted_p(c, d, perms, s);
        lin_hits += *std::min_element(lin.adjusted_p.begin(),
                                      lin.adjusted_p.end()) <= 0.05;
        const AdjustedPValues ref = max_statistic_reference(c, perms, s);
        min_ref[static_cast<std::size_t>(r)] =
            *std::min_element(ref.adjusted_p.begin(), ref.adjusted_p.end());
        ref_hits += min_ref[static_cast<std::size_t>(r)] <= 0.05;
    }

    const double se = std::sqrt(0.05 * 0.95 / static_cast<double>(datasets));
    for (const std::int64_t hits : {dud_hits, lin_hits, ref_hits}) {
        const double rate =
            static_cast<double>(hits) / static_cast<double>(datasets);
        INFO("familywise rate " << rate);
        CHECK(std::fabs(rate - 0.05) <= 3.0 * se);
    }

    std::sort(min_ref.begin(), min_ref.end());
    double d_plus = 0.0; // CDF mass above the diagonal = anticonservatism
    for (std::size_t i = 0; i < min_ref.size(); ++i)
        d_plus = std::max(d_plus, static_cast<double>(i + 1) /
                                          static_cast<double>(datasets) -
                                      min_ref[i]);
    const double crit = 1.224 / std::sqrt(static_cast<double>(datasets));
    INFO("one-sided KS " << d_plus << " (critical " << crit << ")");
    CHECK(d_plus < crit);
}

TEST_CASE("screenless one-stage permutation equals the reference baseline") {
    // With the split and the screen disabled the two-hurdle permutation
    // reduces to the plain max-z^2 permutation: same panel, same shuffle
    // stream, so the outputs must be identical bit for bit.
    SimConfig cfg = null_config(313, 100, 10, 0.3, 1);
    cfg.panel[4] = PanelMarker{direct_marker(0.3, 1.8), 1.0, 0.0};
    const SimulatedCohort c = simulate_cohort(cfg);
    const AdjustedPValues a =
        dudbridge_adjusted_p(c, make_design(200, 1.0, 1.0, 1e-4, 10), 800, 55);
    const AdjustedPValues b = max_statistic_reference(c, 800, 55);
    CHECK(a.statistic == b.statistic);
    CHECK(a.adjusted_p == b.adjusted_p);
    CHECK(a.raw_p == b.raw_p);
}

TEST_CASE("degenerate inputs fail loudly") {
    SimConfig cfg = null_config(31313, 50, 4, 0.3, 1);
    SimulatedCohort c = simulate_cohort(cfg);
    const TwoStageDesign d = make_design(100, 0.5, 0.3, 1e-3, 4);

    // Force a monomorphic column: every gamete pair becomes major/major.
    for (std::int64_t i = 0; i < c.n_subjects(); ++i)
        c.gametes[static_cast<std::size_t>(i * 4 + 2)] = 0;
    CHECK_THROWS_AS(lin_adjusted_p(c, d, 500, 1), numeric_error);
    CHECK_THROWS_AS(dudbridge_adjusted_p(c, d, 500, 1), numeric_error);
    CHECK_THROWS_AS(max_statistic_reference(c, 500, 1), numeric_error);

    const SimulatedCohort ok = simulate_cohort(cfg);
    CHECK_THROWS_AS(lin_adjusted_p(ok, d, 99, 1), validation_error);
    CHECK_THROWS_AS(dudbridge_adjusted_p(ok, d, 0, 1), validation_error);
    CHECK_THROWS_AS(max_statistic_reference(ok, 0, 1), validation_error);

    // Stage I too small to subsample at the design's fraction.
    const SimulatedCohort tiny = simulate_cohort(null_config(5, 7, 2, 0.4, 1));
    CHECK_THROWS_AS(
        dudbridge_adjusted_p(tiny, make_design(14, 0.3, 0.3, 1e-3, 2), 200, 1),
        validation_error);
}

TEST_CASE("thread count never changes a p-value") {
    SimConfig cfg = null_config(95959, 80, 20, 0.3, 1);
    cfg.panel[5] = PanelMarker{direct_marker(0.3, 1.6), 1.0, 0.0};
    const SimulatedCohort c = simulate_cohort(cfg);
    const TwoStageDesign d = make_design(160, 0.5, 0.2, 1e-4, 20);

    const AdjustedPValues lin1 = lin_adjusted_p(c, d, 2000, 4, 1);
    const AdjustedPValues lin4 = lin_adjusted_p(c, d, 2000, 4, 4);
    CHECK(lin1.adjusted_p == lin4.adjusted_p);
    CHECK(lin1.raw_p == lin4.raw_p);

    const AdjustedPValues dud1 = dudbridge_adjusted_p(c, d, 2000, 4, 1);
    const AdjustedPValues dud4 = dudbridge_adjusted_p(c, d, 2000, 4, 4);
    CHECK(dud1.adjusted_p == dud4.adjusted_p);

    const AdjustedPValues ref1 = max_statistic_reference(c, 2000, 4, 1);
    const AdjustedPValues ref3 = max_statistic_reference(c, 2000, 4, 3);
    CHECK(ref1.adjusted_p == ref3.adjusted_p);
}
