#pragma once

// Multi-marker generalization of the stratum yields: subjects (gametes,
// really -- everything here stays at chromosome level like the cell
// table) are scored by a weighted count of minor alleles across several
// markers, binned on that score, and the carrier probability of at least
// one causal allele is estimated per bin and outcome group by Monte
// Carlo. With a single marker, unit weight and a cut between 0 and 1
// this is exactly the stratum-yield table, which the tests exploit.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "gwsd/errors.hpp"
#include "gwsd/marker_model.hpp"
#include "gwsd/rng.hpp"

namespace gwsd {

struct RiskBinYield {
    double lo = 0.0, hi = 0.0; // score interval (lo, hi]; first bin open below
    std::int64_t draws = 0;
    double yield = 0.0; // Pr(>= 1 causal allele | bin, outcome)
    double se = 0.0;
    bool empty = true;
};

struct RiskIndexYields {
    std::vector<double> edges; // interior cut points, ascending
    std::vector<RiskBinYield> case_bins;
    std::vector<RiskBinYield> control_bins;
};

namespace detail {

struct IndexMarkerDraw {
    std::array<double, 3> pop_cum{};
    std::array<double, 3> case_cum{};
    double coef = 0.0;
};

inline std::vector<IndexMarkerDraw> index_draws(
    const std::vector<MarkerCausalModel>& models,
    const std::vector<double>& coefficients) {
    if (models.empty())
        throw validation_error("risk index: no markers");
    if (coefficients.size() != models.size())
        throw validation_error("risk index: one coefficient per marker required");
    std::vector<IndexMarkerDraw> out(models.size());
    for (std::size_t j = 0; j < models.size(); ++j) {
        const GameteCellTable t = cell_table(models[j]);
        out[j].coef = coefficients[j];
        const auto cum3 = [](const std::array<double, 4>& p) {
            return std::array<double, 3>{
                p[g_major_nc], p[g_major_nc] + p[g_major_c],
                p[g_major_nc] + p[g_major_c] + p[g_minor_nc]};
        };
        out[j].pop_cum = cum3(t.control_joint);
        out[j].case_cum = cum3(t.case_joint);
    }
    return out;
}

inline std::uint8_t draw_class(Rng& rng, const std::array<double, 3>& cum) {
    const double u = rng.uniform();
    if (u < cum[0])
        return g_major_nc;
    if (u < cum[1])
        return g_major_c;
    if (u < cum[2])
        return g_minor_nc;
    return g_minor_c;
}

// One gamete across all index markers: weighted minor-allele score plus
// whether any locus carried the causal allele.
inline void draw_index_gamete(Rng& rng, const std::vector<IndexMarkerDraw>& mk,
                              bool case_group, double& score, bool& carrier) {
    score = 0.0;
    carrier = false;
    for (const auto& m : mk) {
        const std::uint8_t g = draw_class(rng, case_group ? m.case_cum : m.pop_cum);
        if ((g >> 1) & 1)
            score += m.coef;
        if (g & 1)
            carrier = true;
    }
}

} // namespace detail

// Interior bin edges at population score quantiles (k/n_bins). Duplicate
// cut points collapse, so discrete scores can yield fewer bins than asked.
inline std::vector<double> default_bin_edges(
    const std::vector<MarkerCausalModel>& models,
    const std::vector<double>& coefficients, int n_bins, std::int64_t n_draws,
    std::uint64_t seed) {
    if (n_bins < 2)
        throw validation_error("default_bin_edges: need at least 2 bins");
    if (n_draws < n_bins)
        throw validation_error("default_bin_edges: too few draws");
    const auto mk = detail::index_draws(models, coefficients);
    Rng rng = Rng::substream(seed, stream_tag::risk_index, 0);
    std::vector<double> scores(static_cast<std::size_t>(n_draws));
    for (auto& s : scores) {
        bool carrier;
        detail::draw_index_gamete(rng, mk, false, s, carrier);
    }
    std::sort(scores.begin(), scores.end());
    std::vector<double> edges;
    for (int k = 1; k < n_bins; ++k) {
        const auto pos = static_cast<std::size_t>(
            static_cast<double>(k) / n_bins * static_cast<double>(n_draws - 1));
        const double e = scores[pos];
        if (edges.empty() || e > edges.back())
            edges.push_back(e);
    }
    return edges;
}

inline RiskIndexYields risk_index_yields(const std::vector<MarkerCausalModel>& models,
                                         const std::vector<double>& coefficients,
                                         std::vector<double> edges,
                                         std::int64_t n_draws, std::uint64_t seed) {
    if (n_draws < 1)
        throw validation_error("risk_index_yields: n_draws must be positive");
    const auto mk = detail::index_draws(models, coefficients);
    if (edges.empty())
        edges = default_bin_edges(models, coefficients, 5,
                                  std::max<std::int64_t>(n_draws, 10000), seed);
    if (!std::is_sorted(edges.begin(), edges.end()))
        throw validation_error("risk_index_yields: bin edges must be ascending");
    for (std::size_t k = 1; k < edges.size(); ++k)
        if (edges[k] == edges[k - 1])
            throw validation_error("risk_index_yields: duplicate bin edge");

    RiskIndexYields out;
    out.edges = edges;
    const std::size_t n_bins = edges.size() + 1;

    const auto run_group = [&](bool case_group, std::uint64_t stream_index) {
        std::vector<std::int64_t> count(n_bins, 0), hits(n_bins, 0);
        Rng rng = Rng::substream(seed, stream_tag::risk_index, stream_index);
        for (std::int64_t d = 0; d < n_draws; ++d) {
            double score;
            bool carrier;
            detail::draw_index_gamete(rng, mk, case_group, score, carrier);
            // lower_bound keeps a score equal to an edge in the bin below,
            // per the (lo, hi] contract; default edges sit on attained
            // score values, so the distinction matters.
            const std::size_t bin = static_cast<std::size_t>(
                std::lower_bound(edges.begin(), edges.end(), score) - edges.begin());
            ++count[bin];
            hits[bin] += carrier;
        }
        std::vector<RiskBinYield> bins(n_bins);
        for (std::size_t b = 0; b < n_bins; ++b) {
            auto& rb = bins[b];
            rb.lo = b == 0 ? -std::numeric_limits<double>::infinity() : edges[b - 1];
            rb.hi = b == n_bins - 1 ? std::numeric_limits<double>::infinity()
                                    : edges[b];
            rb.draws = count[b];
            rb.empty = count[b] == 0;
            if (count[b] > 0) {
                rb.yield = static_cast<double>(hits[b]) /
                           static_cast<double>(count[b]);
                rb.se = std::sqrt(rb.yield * (1.0 - rb.yield) /
                                  static_cast<double>(count[b]));
            }
        }
        return bins;
    };

    out.control_bins = run_group(false, 1);
    out.case_bins = run_group(true, 2);
    return out;
}

} // namespace gwsd
