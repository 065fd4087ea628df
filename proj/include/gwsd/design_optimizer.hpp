#pragma once

// Cost-constrained search over two-stage designs. The decision variables
// are (pi, alpha1); alpha_joint is pinned by the family-wise error target
// and the minimum n hitting the power target follows by bisection, so the
// search is a dense grid over two dimensions with a local refinement pass
// around the incumbent. Expected genotyping cost under the null-dominated
// genome approximation:
//   stage I : unit * m * pi * n
//   stage II: unit * ratio * m * alpha1 * (1 + flanking) * (1-pi) * n
// (m * alpha1 markers expected to continue, each dragging `flanking`
// neighbors along).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gwsd/errors.hpp"
#include "gwsd/parallel.hpp"
#include "gwsd/power.hpp"

namespace gwsd {

struct CostModel {
    double stage1_unit_cost = 1.0;  // per genotype in stage I
    double stage2_cost_ratio = 1.0; // stage-II unit cost / stage-I unit cost
    double flanking_per_hit = 0.0;  // extra markers typed per continuing hit

    void validate() const {
        if (!(stage1_unit_cost > 0.0))
            throw validation_error("CostModel: stage1_unit_cost must be positive");
        if (!(stage2_cost_ratio > 0.0))
            throw validation_error("CostModel: stage2_cost_ratio must be positive");
        if (flanking_per_hit < 0.0)
            throw validation_error("CostModel: flanking_per_hit must be nonnegative");
    }
};

struct CostBreakdown {
    double stage1 = 0.0;
    double stage2 = 0.0;
    double total = 0.0;
    double stage1_share = 0.0;
};

inline CostBreakdown expected_cost(const TwoStageDesign& d, const CostModel& c) {
    d.validate();
    c.validate();
    const double n = static_cast<double>(d.n_total);
    const double m = static_cast<double>(d.n_markers);
    const double pi = d.stage1_fraction;
    const double a1 = std::min(d.alpha1, 1.0);
    CostBreakdown b;
    b.stage1 = c.stage1_unit_cost * m * pi * n;
    b.stage2 = c.stage1_unit_cost * c.stage2_cost_ratio * m * a1 *
               (1.0 + c.flanking_per_hit) * (1.0 - pi) * n;
    b.total = b.stage1 + b.stage2;
    b.stage1_share = b.total > 0.0 ? b.stage1 / b.total : 1.0;
    return b;
}

struct DesignConstraints {
    double fwer = 0.05;
    double power_target = 0.0;       // used by optimize_min_cost
    double lambda_per_subject = 0.0; // effect scale; lambda(n) = n * this
    std::int64_t n_markers = 1;
    std::int64_t n_max = 0; // 0 = unbounded

    void validate() const {
        if (!(fwer > 0.0 && fwer < 1.0))
            throw validation_error("DesignConstraints: fwer must lie in (0,1)");
        if (!(lambda_per_subject > 0.0))
            throw validation_error(
                "DesignConstraints: lambda_per_subject must be positive");
        if (n_markers < 1)
            throw validation_error("DesignConstraints: n_markers must be positive");
        if (n_max < 0)
            throw validation_error("DesignConstraints: n_max must be nonnegative");
    }
};

struct GridSpec {
    double pi_lo = 0.05, pi_hi = 1.0, pi_step = 0.01;
    double alpha1_lo = 1e-5, alpha1_hi = 0.1;
    int alpha1_points = 60;
    bool refine = true; // local 10x-finer pass around the incumbent

    void validate() const {
        if (!(pi_lo > 0.0 && pi_lo <= pi_hi && pi_hi <= 1.0))
            throw validation_error("GridSpec: pi range must satisfy 0 < lo <= hi <= 1");
        if (!(pi_step > 0.0))
            throw validation_error("GridSpec: pi_step must be positive");
        if (!(alpha1_lo > 0.0 && alpha1_lo <= alpha1_hi && alpha1_hi < 1.0))
            throw validation_error("GridSpec: alpha1 range must satisfy 0 < lo <= hi < 1");
        if (alpha1_points < 2)
            throw validation_error("GridSpec: alpha1_points must be at least 2");
    }
};

struct GridCell {
    double pi = 0.0;
    double alpha1 = 0.0;
    double alpha_joint = 0.0;
    std::int64_t n_total = 0;
    double cost = 0.0;
    double stage1_share = 0.0;
    double power = 0.0;
    bool feasible = false;
};

struct OneStageDesign {
    std::int64_t n_total = 0;
    double alpha = 0.0; // Bonferroni level fwer/m
    double cost = 0.0;
    double power = 0.0;
};

struct OptimizedDesign {
    TwoStageDesign design;
    double cost = 0.0;
    double stage1_share = 0.0;
    double power = 0.0;
    double null_rate = 0.0;
    OneStageDesign one_stage; // same targets met in a single stage
    double cost_vs_one_stage = 0.0;
};

inline OneStageDesign one_stage_equivalent(const DesignConstraints& cons,
                                           const CostModel& cost);

namespace detail {

// Smallest n with power(n * lambda_unit) >= target; -1 if the cap blocks
// it. Power is increasing in n, so double for a bracket then bisect.
inline std::int64_t min_n_for_power(const TwoStageDesign& proto, double lambda_unit,
                                    double target, std::int64_t n_cap) {
    TwoStageDesign d = proto;
    const auto power_at = [&](std::int64_t n) {
        d.n_total = n;
        return joint_two_stage_power(d, lambda_unit * static_cast<double>(n));
    };
    const std::int64_t hard_cap = n_cap > 0 ? n_cap : (std::int64_t{1} << 33);
    std::int64_t hi = 64;
    while (power_at(hi) < target) {
        if (hi >= hard_cap)
            return -1;
        hi = std::min(hard_cap, hi * 2);
    }
    std::int64_t lo = 2;
    while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (power_at(mid) >= target)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

inline std::vector<double> log_grid(double lo, double hi, int points) {
    std::vector<double> g(points);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < points; ++i)
        g[i] = std::exp(llo + (lhi - llo) * i / (points - 1));
    return g;
}

// Evaluate every (pi, alpha1) cell and keep the winner under `better`.
// Rows are computed in parallel but reduced in deterministic scan order,
// and `better` is strict, so the first cell in scan order wins ties and
// the result does not depend on the thread count.
template <typename Eval, typename Better>
bool best_over(const std::vector<double>& pis, const std::vector<double>& alphas,
               const Eval& eval, const Better& better, int threads,
               std::vector<GridCell>* trace, GridCell& best) {
    std::vector<std::vector<GridCell>> rows(pis.size());
    parallel_for(pis.size(), threads, [&](std::size_t i) {
        auto& row = rows[i];
        row.reserve(alphas.size());
        for (const double a1 : alphas)
            row.push_back(eval(pis[i], a1));
    });
    bool have = false;
    for (const auto& row : rows)
        for (const auto& cell : row) {
            if (trace)
                trace->push_back(cell);
            if (!cell.feasible)
                continue;
            if (!have || better(cell, best)) {
                best = cell;
                have = true;
            }
        }
    return have;
}

template <typename Eval, typename Better>
GridCell refine_around(const GridCell& seed, const GridSpec& grid, const Eval& eval,
                       const Better& better, int threads,
                       std::vector<GridCell>* trace) {
    std::vector<double> pis;
    for (int k = -10; k <= 10; ++k) {
        const double pi = seed.pi + k * grid.pi_step / 10.0;
        if (pi > 0.0 && pi <= 1.0)
            pis.push_back(pi);
    }
    const double lstep = (std::log(grid.alpha1_hi) - std::log(grid.alpha1_lo)) /
                         (grid.alpha1_points - 1);
    std::vector<double> alphas;
    for (int k = -10; k <= 10; ++k) {
        const double a1 = std::exp(std::log(seed.alpha1) + k * lstep / 10.0);
        if (a1 > 0.0 && a1 < 1.0)
            alphas.push_back(a1);
    }
    GridCell best;
    if (!best_over(pis, alphas, eval, better, threads, trace, best))
        return seed;
    return better(best, seed) ? best : seed; // never worse than the incumbent
}

template <typename Eval, typename Better>
GridCell grid_search(const DesignConstraints& cons, const GridSpec& grid,
                     const Eval& eval, const Better& better, int threads,
                     std::vector<GridCell>* trace, const char* who) {
    cons.validate();
    grid.validate();
    std::vector<double> pis;
    for (double pi = grid.pi_lo; pi <= grid.pi_hi + 1e-12; pi += grid.pi_step)
        pis.push_back(std::min(pi, 1.0));
    const std::vector<double> alphas =
        log_grid(grid.alpha1_lo, grid.alpha1_hi, grid.alpha1_points);
    GridCell best;
    if (!best_over(pis, alphas, eval, better, threads, trace, best))
        throw numeric_error(std::string(who) + ": no feasible grid cell");
    if (grid.refine)
        best = refine_around(best, grid, eval, better, threads, trace);
    return best;
}

inline OptimizedDesign package(const GridCell& best, const DesignConstraints& cons,
                               const CostModel& cost, double one_stage_power_target) {
    OptimizedDesign out;
    out.design.n_total = best.n_total;
    out.design.stage1_fraction = best.pi;
    out.design.alpha1 = best.alpha1;
    out.design.alpha_joint = best.alpha_joint;
    out.design.n_markers = cons.n_markers;
    out.cost = best.cost;
    out.stage1_share = best.stage1_share;
    out.power = best.power;
    out.null_rate = two_stage_null_rate(out.design);
    DesignConstraints pc = cons;
    pc.power_target = std::clamp(one_stage_power_target, 1e-12, 1.0 - 1e-12);
    pc.n_max = 0; // the comparison baseline is hypothetical, never capped
    out.one_stage = one_stage_equivalent(pc, cost);
    out.cost_vs_one_stage = out.cost / out.one_stage.cost;
    return out;
}

} // namespace detail

// Cheapest one-stage design meeting the same error and power targets:
// every marker typed on everyone, Bonferroni threshold on a single test.
inline OneStageDesign one_stage_equivalent(const DesignConstraints& cons,
                                           const CostModel& cost) {
    cons.validate();
    cost.validate();
    if (!(cons.power_target > 0.0 && cons.power_target < 1.0))
        throw validation_error("one_stage_equivalent: power_target must lie in (0,1)");
    TwoStageDesign d;
    d.stage1_fraction = 1.0;
    d.alpha1 = 1.0; // hurdle off
    d.alpha_joint = cons.fwer / static_cast<double>(cons.n_markers);
    d.n_markers = cons.n_markers;
    const std::int64_t n = detail::min_n_for_power(d, cons.lambda_per_subject,
                                                   cons.power_target, cons.n_max);
    if (n < 0)
        throw numeric_error(
            "one_stage_equivalent: power target unreachable under n_max");
    OneStageDesign out;
    out.n_total = n;
    out.alpha = d.alpha_joint;
    out.cost = cost.stage1_unit_cost * static_cast<double>(cons.n_markers) *
               static_cast<double>(n);
    d.n_total = n;
    out.power =
        joint_two_stage_power(d, cons.lambda_per_subject * static_cast<double>(n));
    return out;
}

// Minimize expected cost subject to FWER and power targets.
inline OptimizedDesign optimize_min_cost(const DesignConstraints& cons,
                                         const CostModel& cost,
                                         const GridSpec& grid = {}, int threads = 1,
                                         std::vector<GridCell>* trace = nullptr) {
    cost.validate();
    if (!(cons.power_target > 0.0 && cons.power_target < 1.0))
        throw validation_error("optimize_min_cost: power_target must lie in (0,1)");

    const auto eval = [&](double pi, double a1) {
        GridCell cell;
        cell.pi = pi;
        cell.alpha1 = a1;
        TwoStageDesign d;
        d.n_total = 2; // placeholder; the null rate does not depend on n
        d.stage1_fraction = pi;
        d.alpha1 = a1;
        d.n_markers = cons.n_markers;
        if (!(a1 > cons.fwer / static_cast<double>(cons.n_markers)))
            return cell; // screen tighter than the genome-wide level: dead cell
        d.alpha_joint = solve_joint_threshold(d, cons.fwer, cons.n_markers);
        cell.alpha_joint = d.alpha_joint;
        const std::int64_t n = detail::min_n_for_power(
            d, cons.lambda_per_subject, cons.power_target, cons.n_max);
        if (n < 0)
            return cell;
        d.n_total = n;
        const CostBreakdown b = expected_cost(d, cost);
        cell.n_total = n;
        cell.cost = b.total;
        cell.stage1_share = b.stage1_share;
        cell.power =
            joint_two_stage_power(d, cons.lambda_per_subject * static_cast<double>(n));
        cell.feasible = true;
        return cell;
    };
    // strict cost comparison: exact ties keep the earlier scan cell, i.e.
    // the smaller pi and then the smaller alpha1
    const auto better = [](const GridCell& a, const GridCell& b) {
        return a.cost < b.cost;
    };

    const GridCell best = detail::grid_search(cons, grid, eval, better, threads,
                                              trace, "optimize_min_cost");
    return detail::package(best, cons, cost, cons.power_target);
}

// Maximize power at the FWER target subject to a hard genotyping budget.
inline OptimizedDesign optimize_max_power(double budget, const DesignConstraints& cons,
                                          const CostModel& cost,
                                          const GridSpec& grid = {}, int threads = 1,
                                          std::vector<GridCell>* trace = nullptr) {
    cost.validate();
    if (!(budget > 0.0))
        throw validation_error("optimize_max_power: budget must be positive");

    const auto eval = [&](double pi, double a1) {
        GridCell cell;
        cell.pi = pi;
        cell.alpha1 = a1;
        TwoStageDesign d;
        d.n_total = 2; // placeholder; the null rate does not depend on n
        d.stage1_fraction = pi;
        d.alpha1 = a1;
        d.n_markers = cons.n_markers;
        if (!(a1 > cons.fwer / static_cast<double>(cons.n_markers)))
            return cell;
        d.alpha_joint = solve_joint_threshold(d, cons.fwer, cons.n_markers);
        cell.alpha_joint = d.alpha_joint;
        // cost is linear in n, so the budget fixes the affordable n directly
        const double per_subject =
            cost.stage1_unit_cost * static_cast<double>(cons.n_markers) *
            (pi + cost.stage2_cost_ratio * std::min(a1, 1.0) *
                      (1.0 + cost.flanking_per_hit) * (1.0 - pi));
        std::int64_t n = static_cast<std::int64_t>(budget / per_subject);
        if (cons.n_max > 0)
            n = std::min(n, cons.n_max);
        if (n < 2)
            return cell;
        d.n_total = n;
        const CostBreakdown b = expected_cost(d, cost);
        cell.n_total = n;
        cell.cost = b.total;
        cell.stage1_share = b.stage1_share;
        cell.power =
            joint_two_stage_power(d, cons.lambda_per_subject * static_cast<double>(n));
        cell.feasible = true;
        return cell;
    };
    const auto better = [](const GridCell& a, const GridCell& b) {
        return a.power > b.power || (a.power == b.power && a.cost < b.cost);
    };

    const GridCell best = detail::grid_search(cons, grid, eval, better, threads,
                                              trace, "optimize_max_power");
    return detail::package(best, cons, cost, best.power);
}

} // namespace gwsd
