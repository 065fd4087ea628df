#pragma once

// Runs the two-stage analysis on a simulated cohort: a seeded split of
// subjects into stages (stratified by case status), allele-frequency
// contrasts per stage, the pooled joint statistic, and the two-hurdle
// declaration rule. Also the cohort-level study questions built on top:
// replication of discoveries in a fresh sample and the winner's-curse
// summary of effect estimates among discoveries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "gwsd/cohort.hpp"
#include "gwsd/errors.hpp"
#include "gwsd/marker_model.hpp"
#include "gwsd/normal.hpp"
#include "gwsd/power.hpp"
#include "gwsd/rng.hpp"

namespace gwsd {

struct StageSplit {
    std::vector<std::uint8_t> in_stage1; // per subject
    std::int64_t n1_cases = 0;
    std::int64_t n1_controls = 0;
};

// Stratified split: round(pi * n) of each outcome group goes to stage I.
inline StageSplit stage_split(const SimulatedCohort& c, double pi, Rng& rng) {
    if (!(pi > 0.0 && pi <= 1.0))
        throw validation_error("stage_split: stage1_fraction must lie in (0,1]");
    StageSplit s;
    s.in_stage1.assign(static_cast<std::size_t>(c.n_subjects()), 0);
    s.n1_cases = std::llround(pi * static_cast<double>(c.n_cases));
    s.n1_controls = std::llround(pi * static_cast<double>(c.n_controls));
    s.n1_cases = std::clamp<std::int64_t>(s.n1_cases, 0, c.n_cases);
    s.n1_controls = std::clamp<std::int64_t>(s.n1_controls, 0, c.n_controls);

    std::vector<std::int64_t> idx(static_cast<std::size_t>(c.n_cases));
    for (std::int64_t i = 0; i < c.n_cases; ++i)
        idx[static_cast<std::size_t>(i)] = i;
    rng.shuffle(idx.begin(), idx.end());
    for (std::int64_t k = 0; k < s.n1_cases; ++k)
        s.in_stage1[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = 1;

    idx.resize(static_cast<std::size_t>(c.n_controls));
    for (std::int64_t i = 0; i < c.n_controls; ++i)
        idx[static_cast<std::size_t>(i)] = c.n_cases + i;
    rng.shuffle(idx.begin(), idx.end());
    for (std::int64_t k = 0; k < s.n1_controls; ++k)
        s.in_stage1[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = 1;
    return s;
}

namespace detail {

// Unpooled allele-frequency z over the subjects with keep[i] == want
// (want < 0 takes everyone). Matches the analytic noncentrality.
inline double allele_z(const SimulatedCohort& c, std::int64_t marker,
                       const std::vector<std::uint8_t>* keep, int want) {
    std::int64_t case_minor = 0, case_chrom = 0, ctrl_minor = 0, ctrl_chrom = 0;
    for (std::int64_t i = 0; i < c.n_subjects(); ++i) {
        if (keep && (*keep)[static_cast<std::size_t>(i)] != want)
            continue;
        const int d = c.marker_dosage(i, marker);
        if (c.phenotype[static_cast<std::size_t>(i)]) {
            case_minor += d;
            case_chrom += 2;
        } else {
            ctrl_minor += d;
            ctrl_chrom += 2;
        }
    }
    if (case_chrom == 0 || ctrl_chrom == 0)
        return 0.0;
    const double p1 = static_cast<double>(case_minor) / case_chrom;
    const double p0 = static_cast<double>(ctrl_minor) / ctrl_chrom;
    const double var = p1 * (1.0 - p1) / case_chrom + p0 * (1.0 - p0) / ctrl_chrom;
    if (!(var > 0.0))
        return 0.0; // monomorphic in both groups
    return (p1 - p0) / std::sqrt(var);
}

} // namespace detail

struct TwoStageScan {
    StageSplit split;
    double weight1 = 1.0; // realized n1/n, the pooling weight
    std::vector<double> z1;
    std::vector<double> z2; // zero when pi == 1
    std::vector<double> z_joint;
    std::vector<std::uint8_t> selected;   // passed the stage-I screen
    std::vector<std::uint8_t> discovered; // cleared both hurdles, consistent sign
    std::vector<double> or_estimate;      // pooled allelic odds ratio
    std::int64_t n_selected = 0;
    std::int64_t n_discovered = 0;
};

inline TwoStageScan run_two_stage(const SimulatedCohort& c, const TwoStageDesign& d,
                                  std::uint64_t seed, std::int64_t replicate = 0) {
    d.validate();
    const std::int64_t m = c.n_markers;
    TwoStageScan r;
    Rng split_rng = Rng::substream(seed, stream_tag::stage_split,
                                   static_cast<std::uint64_t>(replicate));
    r.split = stage_split(c, d.stage1_fraction, split_rng);
    const double n1 = static_cast<double>(r.split.n1_cases + r.split.n1_controls);
    const double n = static_cast<double>(c.n_subjects());
    if (n1 < 4.0)
        throw validation_error("run_two_stage: stage I has fewer than 4 subjects");
    const bool one_stage = d.stage1_fraction >= 1.0;
    r.weight1 = one_stage ? 1.0 : n1 / n;

    const bool screen = d.stage1_hurdle_active();
    const double h1 = screen ? two_sided_critical(d.alpha1) : 0.0;
    const double hj = two_sided_critical(d.alpha_joint);
    const double w1 = std::sqrt(r.weight1);
    const double w2 = std::sqrt(1.0 - r.weight1);

    r.z1.resize(static_cast<std::size_t>(m));
    r.z2.assign(static_cast<std::size_t>(m), 0.0);
    r.z_joint.resize(static_cast<std::size_t>(m));
    r.selected.assign(static_cast<std::size_t>(m), 0);
    r.discovered.assign(static_cast<std::size_t>(m), 0);
    r.or_estimate.resize(static_cast<std::size_t>(m));

    for (std::int64_t j = 0; j < m; ++j) {
        const double z1 = detail::allele_z(c, j, &r.split.in_stage1, 1);
        r.z1[static_cast<std::size_t>(j)] = z1;
        double zj;
        if (one_stage) {
            zj = z1;
        } else {
            const double z2 = detail::allele_z(c, j, &r.split.in_stage1, 0);
            r.z2[static_cast<std::size_t>(j)] = z2;
            zj = w1 * z1 + w2 * z2;
        }
        r.z_joint[static_cast<std::size_t>(j)] = zj;

        const bool sel = !screen || std::fabs(z1) > h1;
        const bool sign_ok = !screen || z1 * zj > 0.0;
        const bool disc = sel && sign_ok && std::fabs(zj) > hj;
        r.selected[static_cast<std::size_t>(j)] = sel;
        r.discovered[static_cast<std::size_t>(j)] = disc;
        r.n_selected += sel;
        r.n_discovered += disc;

        // Pooled allelic odds ratio, Haldane-corrected when a cell is empty.
        double a = 0, b = 0, cc = 0, dd = 0;
        for (std::int64_t i = 0; i < c.n_subjects(); ++i) {
            const int dose = c.marker_dosage(i, j);
            if (c.phenotype[static_cast<std::size_t>(i)]) {
                a += dose;
                b += 2 - dose;
            } else {
                cc += dose;
                dd += 2 - dose;
            }
        }
        if (a == 0 || b == 0 || cc == 0 || dd == 0) {
            a += 0.5;
            b += 0.5;
            cc += 0.5;
            dd += 0.5;
        }
        r.or_estimate[static_cast<std::size_t>(j)] = (a * dd) / (b * cc);
    }
    return r;
}

struct ReplicationResult {
    std::vector<double> z_rep;
    std::vector<double> p_rep;
    std::vector<std::uint8_t> replicated; // discovered, same sign, p < alpha_rep
    std::int64_t n_replicated = 0;
};

// Tests each discovery in an independent cohort typed on the same panel.
inline ReplicationResult evaluate_replication(const TwoStageScan& discovery,
                                              const SimulatedCohort& fresh,
                                              double alpha_rep) {
    if (!(alpha_rep > 0.0 && alpha_rep < 1.0))
        throw validation_error("evaluate_replication: alpha_rep must lie in (0,1)");
    const std::int64_t m = fresh.n_markers;
    if (static_cast<std::size_t>(m) != discovery.discovered.size())
        throw validation_error(
            "evaluate_replication: replication cohort panel differs from discovery");
    ReplicationResult r;
    r.z_rep.assign(static_cast<std::size_t>(m), 0.0);
    r.p_rep.assign(static_cast<std::size_t>(m),
                   std::numeric_limits<double>::quiet_NaN());
    r.replicated.assign(static_cast<std::size_t>(m), 0);
    for (std::int64_t j = 0; j < m; ++j) {
        if (!discovery.discovered[static_cast<std::size_t>(j)])
            continue;
        const double z = detail::allele_z(fresh, j, nullptr, 0);
        r.z_rep[static_cast<std::size_t>(j)] = z;
        r.p_rep[static_cast<std::size_t>(j)] = two_sided_p(z);
        const bool same_sign =
            z * discovery.z_joint[static_cast<std::size_t>(j)] > 0.0;
        if (same_sign && two_sided_p(z) < alpha_rep) {
            r.replicated[static_cast<std::size_t>(j)] = 1;
            ++r.n_replicated;
        }
    }
    return r;
}

struct WinnersCurseSummary {
    std::int64_t replicates = 0;
    std::int64_t discoveries = 0;         // causal-marker discoveries pooled
    double conditional_mean = 0.0;        // mean OR among discoveries
    double conditional_se = 0.0;
    double unconditional_mean = 0.0;      // mean OR over all replicates
    double unconditional_se = 0.0;
    double true_or = 0.0;
    double conditional_bias = 0.0;
    double unconditional_bias = 0.0;
};

// Repeated-study summary of the allelic OR for causal panel markers,
// conditioned on discovery versus not.
inline WinnersCurseSummary winners_curse(const SimConfig& cfg,
                                         const TwoStageDesign& design,
                                         double true_or) {
    cfg.validate();
    std::vector<std::int64_t> causal;
    for (std::size_t j = 0; j < cfg.panel.size(); ++j)
        if (!cfg.panel[j].model.is_null())
            causal.push_back(static_cast<std::int64_t>(j));
    if (causal.empty())
        throw validation_error("winners_curse: panel has no causal marker");

    std::vector<double> cond, uncond;
    for (std::int64_t rep = 0; rep < cfg.replicates; ++rep) {
        const SimulatedCohort c = simulate_cohort(cfg, rep);
        const TwoStageScan scan = run_two_stage(c, design, cfg.seed, rep);
        for (const std::int64_t j : causal) {
            uncond.push_back(scan.or_estimate[static_cast<std::size_t>(j)]);
            if (scan.discovered[static_cast<std::size_t>(j)])
                cond.push_back(scan.or_estimate[static_cast<std::size_t>(j)]);
        }
    }

    const auto mean_se = [](const std::vector<double>& v, double& mean, double& se) {
        mean = 0.0;
        se = 0.0;
        if (v.empty())
            return;
        for (const double x : v)
            mean += x;
        mean /= static_cast<double>(v.size());
        if (v.size() < 2)
            return;
        double ss = 0.0;
        for (const double x : v)
            ss += (x - mean) * (x - mean);
        se = std::sqrt(ss / (static_cast<double>(v.size()) - 1.0) /
                       static_cast<double>(v.size()));
    };

    WinnersCurseSummary s;
    s.replicates = cfg.replicates;
    s.discoveries = static_cast<std::int64_t>(cond.size());
    s.true_or = true_or;
    mean_se(cond, s.conditional_mean, s.conditional_se);
    mean_se(uncond, s.unconditional_mean, s.unconditional_se);
    s.conditional_bias = s.discoveries > 0 ? s.conditional_mean - true_or : 0.0;
    s.unconditional_bias = s.unconditional_mean - true_or;
    return s;
}

} // namespace gwsd
