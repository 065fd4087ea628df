#pragma once

// Adjusted significance for the two-hurdle scan, three ways.
//
// The observed statistic per marker is Q_j = Z_joint^2 gated by the
// stage-I screen (|Z1| over threshold, direction consistent), computed
// from subject-level score tests so the same per-subject contributions
// that enter the statistic also estimate the between-marker correlation.
//
// - lin_adjusted_p: simulate (Z1*, Z2*) ~ N(0, R) with R estimated from
//   stage-I score contributions, push the draws through the same gate,
//   and rank the observed Q against max_j Q*_j (and against Q*_j itself
//   for the per-marker raw p). Both p-values come from the same draws,
//   so adjusted >= raw holds by construction.
// - dudbridge_adjusted_p: permute phenotypes within stage I, re-run a
//   scaled two-hurdle analysis on a fixed pseudo split of stage I, and
//   rank against the permutation max. The z statistics are pivotal, so
//   the smaller sample changes nothing under the null.
// - max_statistic_reference: plain single-stage max-z^2 permutation, the
//   textbook baseline the other two are checked against.
//
// All three count exceedances as (k+1)/(B+1) and take replicate b's
// randomness from substream(seed, tag, b), so results are independent of
// the thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gwsd/cohort.hpp"
#include "gwsd/errors.hpp"
#include "gwsd/linalg.hpp"
#include "gwsd/normal.hpp"
#include "gwsd/parallel.hpp"
#include "gwsd/pipeline.hpp"
#include "gwsd/power.hpp"
#include "gwsd/rng.hpp"

namespace gwsd {

struct AdjustedPValues {
    std::vector<double> statistic;  // observed gated Q_j
    std::vector<double> raw_p;      // per-marker Monte Carlo p
    std::vector<double> adjusted_p; // max-statistic Monte Carlo p
    std::vector<double> mc_se;      // binomial SE of adjusted_p
    std::int64_t replicates = 0;
};

namespace detail {

// Dosage matrix restricted to a subject subset, with the fixed pieces of
// the score test precomputed. y varies (permutations), genotypes do not.
struct ScorePanel {
    std::vector<std::int64_t> subjects;
    std::vector<double> g;    // m rows, subjects.size() columns
    std::vector<double> gsum; // per marker
    std::vector<double> gss;  // per marker, centered sum of squares
    std::int64_t m = 0;

    std::int64_t n() const { return static_cast<std::int64_t>(subjects.size()); }
};

inline ScorePanel build_score_panel(const SimulatedCohort& c,
                                    std::vector<std::int64_t> subjects) {
    ScorePanel p;
    p.subjects = std::move(subjects);
    p.m = c.n_markers;
    const std::size_t n = p.subjects.size();
    p.g.resize(static_cast<std::size_t>(p.m) * n);
    p.gsum.assign(static_cast<std::size_t>(p.m), 0.0);
    p.gss.assign(static_cast<std::size_t>(p.m), 0.0);
    for (std::int64_t j = 0; j < p.m; ++j) {
        double* row = &p.g[static_cast<std::size_t>(j) * n];
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            row[k] = c.marker_dosage(p.subjects[k], j);
            s += row[k];
        }
        p.gsum[static_cast<std::size_t>(j)] = s;
        const double gbar = s / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            ss += (row[k] - gbar) * (row[k] - gbar);
        p.gss[static_cast<std::size_t>(j)] = ss;
    }
    return p;
}

// Score z for marker j given phenotypes aligned to the panel's columns.
// The variance carries the finite-population n/(n-1) factor: it is the
// exact variance of the score under label permutation, so permuted and
// observed z share one scale regardless of panel size. Without it the
// pseudo-split permutation (half-size panels) runs ~1% hot relative to
// the observed statistic, which the max over many markers amplifies into
// a visible adjusted-p bias.
inline double panel_score_z(const ScorePanel& p, std::int64_t j,
                            const std::vector<std::uint8_t>& y, std::int64_t y_sum) {
    const std::size_t n = p.subjects.size();
    const double ybar = static_cast<double>(y_sum) / static_cast<double>(n);
    const double vy = ybar * (1.0 - ybar);
    const double v = vy * p.gss[static_cast<std::size_t>(j)] *
                     static_cast<double>(n) / static_cast<double>(n - 1);
    if (!(v > 0.0))
        return 0.0;
    const double* row = &p.g[static_cast<std::size_t>(j) * n];
    double gy = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (y[k])
            gy += row[k];
    const double u = gy - p.gsum[static_cast<std::size_t>(j)] * ybar;
    return u / std::sqrt(v);
}

struct ObservedScan {
    StageSplit split;
    std::vector<std::int64_t> s1, s2; // subject indices per stage
    double w1 = 1.0;                  // realized n1/n
    std::vector<double> z1, zj, q;
};

inline void gate_statistics(const TwoStageDesign& d, const std::vector<double>& z1,
                            const std::vector<double>& zj, std::vector<double>& q) {
    const bool screen = d.stage1_hurdle_active();
    const double h1 = screen ? two_sided_critical(d.alpha1) : 0.0;
    q.resize(zj.size());
    for (std::size_t j = 0; j < zj.size(); ++j) {
        const bool pass =
            !screen || (std::fabs(z1[j]) > h1 && z1[j] * zj[j] > 0.0);
        q[j] = pass ? zj[j] * zj[j] : 0.0;
    }
}

// The same stage split run_two_stage would make for this (seed, design),
// re-analyzed with score statistics.
inline ObservedScan observed_two_hurdle(const SimulatedCohort& c,
                                        const TwoStageDesign& d, std::uint64_t seed,
                                        std::int64_t replicate) {
    ObservedScan o;
    Rng split_rng = Rng::substream(seed, stream_tag::stage_split,
                                   static_cast<std::uint64_t>(replicate));
    o.split = stage_split(c, d.stage1_fraction, split_rng);
    for (std::int64_t i = 0; i < c.n_subjects(); ++i)
        (o.split.in_stage1[static_cast<std::size_t>(i)] ? o.s1 : o.s2).push_back(i);
    if (static_cast<std::int64_t>(o.s1.size()) < 4)
        throw validation_error("adjusted significance: stage I has fewer than 4 subjects");
    const bool one_stage = d.stage1_fraction >= 1.0;
    o.w1 = one_stage ? 1.0
                     : static_cast<double>(o.s1.size()) /
                           static_cast<double>(c.n_subjects());

    const ScorePanel p1 = build_score_panel(c, o.s1);
    std::vector<std::uint8_t> y1(o.s1.size());
    std::int64_t y1_sum = 0;
    for (std::size_t k = 0; k < o.s1.size(); ++k) {
        y1[k] = c.phenotype[static_cast<std::size_t>(o.s1[k])];
        y1_sum += y1[k];
    }
    o.z1.resize(static_cast<std::size_t>(c.n_markers));
    o.zj.resize(static_cast<std::size_t>(c.n_markers));
    for (std::int64_t j = 0; j < c.n_markers; ++j) {
        if (!(p1.gss[static_cast<std::size_t>(j)] > 0.0))
            throw numeric_error("adjusted significance: marker " + std::to_string(j) +
                                " is monomorphic in stage I");
        o.z1[static_cast<std::size_t>(j)] = panel_score_z(p1, j, y1, y1_sum);
    }
    if (one_stage) {
        o.zj = o.z1;
    } else {
        const ScorePanel p2 = build_score_panel(c, o.s2);
        std::vector<std::uint8_t> y2(o.s2.size());
        std::int64_t y2_sum = 0;
        for (std::size_t k = 0; k < o.s2.size(); ++k) {
            y2[k] = c.phenotype[static_cast<std::size_t>(o.s2[k])];
            y2_sum += y2[k];
        }
        const double a = std::sqrt(o.w1), b = std::sqrt(1.0 - o.w1);
        for (std::int64_t j = 0; j < c.n_markers; ++j) {
            const double z2 = panel_score_z(p2, j, y2, y2_sum);
            o.zj[static_cast<std::size_t>(j)] =
                a * o.z1[static_cast<std::size_t>(j)] + b * z2;
        }
    }
    gate_statistics(d, o.z1, o.zj, o.q);
    return o;
}

// Between-marker correlation of stage-I score contributions
// u_ij = (g_ij - gbar_j)(y_i - ybar), with ridge escalation if the
// estimate is not numerically positive definite.
inline std::vector<double> score_correlation_cholesky(const ScorePanel& p,
                                                      const std::vector<std::uint8_t>& y,
                                                      std::int64_t y_sum) {
    const std::size_t m = static_cast<std::size_t>(p.m);
    const std::size_t n = p.subjects.size();
    const double ybar = static_cast<double>(y_sum) / static_cast<double>(n);

    std::vector<double> u(m * n);
    std::vector<double> norm(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double* row = &p.g[j * n];
        const double gbar = p.gsum[j] / static_cast<double>(n);
        double mean = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double v = (row[k] - gbar) * (static_cast<double>(y[k]) - ybar);
            u[j * n + k] = v;
            mean += v;
        }
        // Null-centering: the contributions have mean zero in expectation;
        // removing the realized mean sharpens the finite-sample estimate.
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            u[j * n + k] -= mean;
            ss += u[j * n + k] * u[j * n + k];
        }
        if (!(ss > 0.0))
            throw numeric_error(
                "adjusted significance: zero score variance for marker " +
                std::to_string(j));
        norm[j] = std::sqrt(ss);
    }
    std::vector<double> r(m * m);
    for (std::size_t j = 0; j < m; ++j) {
        r[j * m + j] = 1.0;
        for (std::size_t k = j + 1; k < m; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                s += u[j * n + i] * u[k * n + i];
            r[j * m + k] = r[k * m + j] = s / (norm[j] * norm[k]);
        }
    }

    for (double ridge = 0.0; ridge <= 0.11; ridge = ridge == 0.0 ? 1e-6 : ridge * 10.0) {
        std::vector<double> chol = r;
        if (ridge > 0.0)
            for (std::size_t j = 0; j < m; ++j)
                chol[j * m + j] += ridge;
        if (cholesky_factor(chol, m))
            return chol;
    }
    throw numeric_error(
        "adjusted significance: score correlation matrix is not positive "
        "definite even after ridge escalation");
}

// Monte Carlo exceedance counting shared by all three methods. For each
// replicate `stats(b, q_star)` fills the replicate's marker statistics;
// exceedances against the observed q accumulate into integer counters,
// chunked over a fixed grid so totals cannot depend on thread count.
template <typename StatsFn>
AdjustedPValues count_exceedances(const std::vector<double>& q_obs,
                                  std::int64_t replicates, int threads,
                                  const StatsFn& stats) {
    if (replicates < 1)
        throw validation_error("adjusted significance: need at least one replicate");
    const std::size_t m = q_obs.size();
    const std::size_t n_chunks =
        static_cast<std::size_t>(std::min<std::int64_t>(replicates, 64));
    std::vector<std::vector<std::int64_t>> adj(n_chunks), raw(n_chunks);

    parallel_for(n_chunks, threads, [&](std::size_t chunk) {
        adj[chunk].assign(m, 0);
        raw[chunk].assign(m, 0);
        std::vector<double> q_star(m);
        const std::int64_t lo =
            static_cast<std::int64_t>(chunk) * replicates / static_cast<std::int64_t>(n_chunks);
        const std::int64_t hi = (static_cast<std::int64_t>(chunk) + 1) * replicates /
                                static_cast<std::int64_t>(n_chunks);
        for (std::int64_t b = lo; b < hi; ++b) {
            stats(b, q_star);
            double t = 0.0;
            for (std::size_t j = 0; j < m; ++j)
                t = std::max(t, q_star[j]);
            for (std::size_t j = 0; j < m; ++j) {
                adj[chunk][j] += (t >= q_obs[j]);
                raw[chunk][j] += (q_star[j] >= q_obs[j]);
            }
        }
    });

    AdjustedPValues out;
    out.statistic = q_obs;
    out.replicates = replicates;
    out.raw_p.resize(m);
    out.adjusted_p.resize(m);
    out.mc_se.resize(m);
    const double denom = static_cast<double>(replicates) + 1.0;
    for (std::size_t j = 0; j < m; ++j) {
        std::int64_t ka = 0, kr = 0;
        for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
            ka += adj[chunk][j];
            kr += raw[chunk][j];
        }
        out.adjusted_p[j] = (static_cast<double>(ka) + 1.0) / denom;
        out.raw_p[j] = (static_cast<double>(kr) + 1.0) / denom;
        out.mc_se[j] = std::sqrt(out.adjusted_p[j] * (1.0 - out.adjusted_p[j]) /
                                 static_cast<double>(replicates));
    }
    return out;
}

} // namespace detail

// Joint-normal Monte Carlo adjustment (correlation from stage-I scores).
inline AdjustedPValues lin_adjusted_p(const SimulatedCohort& c,
                                      const TwoStageDesign& d, std::int64_t n_draws,
                                      std::uint64_t seed, int threads = 1) {
    d.validate();
    if (n_draws < 100)
        throw validation_error(
            "lin_adjusted_p: fewer than 100 draws cannot rank a p-value");
    const detail::ObservedScan o = detail::observed_two_hurdle(c, d, seed, 0);
    const std::size_t m = static_cast<std::size_t>(c.n_markers);

    const detail::ScorePanel p1 = detail::build_score_panel(c, o.s1);
    std::vector<std::uint8_t> y1(o.s1.size());
    std::int64_t y1_sum = 0;
    for (std::size_t k = 0; k < o.s1.size(); ++k) {
        y1[k] = c.phenotype[static_cast<std::size_t>(o.s1[k])];
        y1_sum += y1[k];
    }
    const std::vector<double> chol =
        detail::score_correlation_cholesky(p1, y1, y1_sum);

    const bool screen = d.stage1_hurdle_active();
    const double h1 = screen ? two_sided_critical(d.alpha1) : 0.0;
    const bool one_stage = d.stage1_fraction >= 1.0;
    const double a = std::sqrt(o.w1), b = std::sqrt(1.0 - o.w1);

    const auto stats = [&](std::int64_t rep, std::vector<double>& q_star) {
        Rng rng = Rng::substream(seed, stream_tag::mc_draw,
                                 static_cast<std::uint64_t>(rep));
        std::vector<double> e1(m), e2(m);
        for (std::size_t j = 0; j < m; ++j)
            e1[j] = rng.normal();
        if (!one_stage)
            for (std::size_t j = 0; j < m; ++j)
                e2[j] = rng.normal();
        for (std::size_t j = 0; j < m; ++j) {
            double z1 = 0.0, z2 = 0.0;
            for (std::size_t k = 0; k <= j; ++k) {
                z1 += chol[j * m + k] * e1[k];
                if (!one_stage)
                    z2 += chol[j * m + k] * e2[k];
            }
            const double zj = one_stage ? z1 : a * z1 + b * z2;
            const bool pass = !screen || (std::fabs(z1) > h1 && z1 * zj > 0.0);
            q_star[j] = pass ? zj * zj : 0.0;
        }
    };
    return detail::count_exceedances(o.q, n_draws, threads, stats);
}

// Permutation adjustment: phenotypes permuted within stage I, two-hurdle
// analysis re-run on a fixed stratified pseudo split of stage I.
inline AdjustedPValues dudbridge_adjusted_p(const SimulatedCohort& c,
                                            const TwoStageDesign& d,
                                            std::int64_t n_permutations,
                                            std::uint64_t seed, int threads = 1) {
    d.validate();
    const detail::ObservedScan o = detail::observed_two_hurdle(c, d, seed, 0);
    const std::size_t m = static_cast<std::size_t>(c.n_markers);
    const std::size_t n1 = o.s1.size();

    // Fixed pseudo split of the stage-I subjects, stratified by true
    // status so the case share matches the real split's.
    std::vector<std::int64_t> s1_cases, s1_ctrls;
    for (const std::int64_t i : o.s1)
        (c.phenotype[static_cast<std::size_t>(i)] ? s1_cases : s1_ctrls).push_back(i);
    const bool one_stage = d.stage1_fraction >= 1.0;
    std::vector<std::int64_t> pseudo1, pseudo2;
    double w1p = 1.0;
    if (one_stage) {
        pseudo1 = o.s1;
    } else {
        Rng prng = Rng::substream(seed, stream_tag::pseudo_split, 0);
        prng.shuffle(s1_cases.begin(), s1_cases.end());
        prng.shuffle(s1_ctrls.begin(), s1_ctrls.end());
        const auto n1c = static_cast<std::size_t>(std::llround(
            d.stage1_fraction * static_cast<double>(s1_cases.size())));
        const auto n1k = static_cast<std::size_t>(std::llround(
            d.stage1_fraction * static_cast<double>(s1_ctrls.size())));
        for (std::size_t k = 0; k < s1_cases.size(); ++k)
            (k < n1c ? pseudo1 : pseudo2).push_back(s1_cases[k]);
        for (std::size_t k = 0; k < s1_ctrls.size(); ++k)
            (k < n1k ? pseudo1 : pseudo2).push_back(s1_ctrls[k]);
        std::sort(pseudo1.begin(), pseudo1.end());
        std::sort(pseudo2.begin(), pseudo2.end());
        if (pseudo1.size() < 4 || pseudo2.size() < 4)
            throw validation_error(
                "dudbridge_adjusted_p: stage I too small for the pseudo split");
        w1p = static_cast<double>(pseudo1.size()) / static_cast<double>(n1);
    }

    const detail::ScorePanel pan1 = detail::build_score_panel(c, pseudo1);
    const detail::ScorePanel pan2 =
        one_stage ? detail::ScorePanel{} : detail::build_score_panel(c, pseudo2);
    for (std::int64_t j = 0; j < c.n_markers; ++j) {
        if (!(pan1.gss[static_cast<std::size_t>(j)] > 0.0) ||
            (!one_stage && !(pan2.gss[static_cast<std::size_t>(j)] > 0.0)))
            throw numeric_error("dudbridge_adjusted_p: marker " + std::to_string(j) +
                                " is monomorphic within the pseudo split");
    }

    // Column positions of the pseudo-stage subjects inside the stage-I
    // index list, so a permuted stage-I phenotype vector maps straight
    // onto panel columns.
    std::vector<std::size_t> pos_of_subject(
        static_cast<std::size_t>(c.n_subjects()), 0);
    for (std::size_t k = 0; k < n1; ++k)
        pos_of_subject[static_cast<std::size_t>(o.s1[k])] = k;
    std::vector<std::size_t> map1(pseudo1.size()), map2(pseudo2.size());
    for (std::size_t k = 0; k < pseudo1.size(); ++k)
        map1[k] = pos_of_subject[static_cast<std::size_t>(pseudo1[k])];
    for (std::size_t k = 0; k < pseudo2.size(); ++k)
        map2[k] = pos_of_subject[static_cast<std::size_t>(pseudo2[k])];

    std::vector<std::uint8_t> y_base(n1);
    for (std::size_t k = 0; k < n1; ++k)
        y_base[k] = c.phenotype[static_cast<std::size_t>(o.s1[k])];

    const bool screen = d.stage1_hurdle_active();
    const double h1 = screen ? two_sided_critical(d.alpha1) : 0.0;
    const double a = std::sqrt(w1p), bw = std::sqrt(1.0 - w1p);

    const auto stats = [&](std::int64_t rep, std::vector<double>& q_star) {
        Rng rng = Rng::substream(seed, stream_tag::permutation,
                                 static_cast<std::uint64_t>(rep));
        std::vector<std::uint8_t> y = y_base;
        rng.shuffle(y.begin(), y.end());

        std::vector<std::uint8_t> yp1(map1.size()), yp2(map2.size());
        std::int64_t sum1 = 0, sum2 = 0;
        for (std::size_t k = 0; k < map1.size(); ++k) {
            yp1[k] = y[map1[k]];
            sum1 += yp1[k];
        }
        for (std::size_t k = 0; k < map2.size(); ++k) {
            yp2[k] = y[map2[k]];
            sum2 += yp2[k];
        }
        for (std::size_t j = 0; j < m; ++j) {
            const double z1 =
                detail::panel_score_z(pan1, static_cast<std::int64_t>(j), yp1, sum1);
            double zj;
            if (one_stage) {
                zj = z1;
            } else {
                const double z2 = detail::panel_score_z(
                    pan2, static_cast<std::int64_t>(j), yp2, sum2);
                zj = a * z1 + bw * z2;
            }
            const bool pass = !screen || (std::fabs(z1) > h1 && z1 * zj > 0.0);
            q_star[j] = pass ? zj * zj : 0.0;
        }
    };
    return detail::count_exceedances(o.q, n_permutations, threads, stats);
}

// Single-stage max-z^2 permutation baseline over the full cohort.
inline AdjustedPValues max_statistic_reference(const SimulatedCohort& c,
                                               std::int64_t n_permutations,
                                               std::uint64_t seed, int threads = 1) {
    std::vector<std::int64_t> everyone(static_cast<std::size_t>(c.n_subjects()));
    for (std::int64_t i = 0; i < c.n_subjects(); ++i)
        everyone[static_cast<std::size_t>(i)] = i;
    const detail::ScorePanel pan = detail::build_score_panel(c, everyone);
    for (std::int64_t j = 0; j < c.n_markers; ++j)
        if (!(pan.gss[static_cast<std::size_t>(j)] > 0.0))
            throw numeric_error("max_statistic_reference: marker " +
                                std::to_string(j) + " is monomorphic");

    std::vector<std::uint8_t> y_base(c.phenotype.begin(), c.phenotype.end());
    std::int64_t y_sum = 0;
    for (const std::uint8_t y : y_base)
        y_sum += y;

    const std::size_t m = static_cast<std::size_t>(c.n_markers);
    std::vector<double> q_obs(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double z =
            detail::panel_score_z(pan, static_cast<std::int64_t>(j), y_base, y_sum);
        q_obs[j] = z * z;
    }

    const auto stats = [&](std::int64_t rep, std::vector<double>& q_star) {
        Rng rng = Rng::substream(seed, stream_tag::permutation,
                                 static_cast<std::uint64_t>(rep));
        std::vector<std::uint8_t> y = y_base;
        rng.shuffle(y.begin(), y.end());
        for (std::size_t j = 0; j < m; ++j) {
            const double z =
                detail::panel_score_z(pan, static_cast<std::int64_t>(j), y, y_sum);
            q_star[j] = z * z;
        }
    };
    return detail::count_exceedances(q_obs, n_permutations, threads, stats);
}

} // namespace gwsd
