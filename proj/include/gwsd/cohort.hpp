#pragma once

// Case-control cohort simulator. Subjects are pairs of gametes drawn from
// per-marker gamete-class distributions: controls straight from the
// population, cases by rejection against the subject's relative risk
//   R = prod_j rr_j^{causal dosage} * or_E^e * prod_j gxe_j^(marker dosage * e)
// normalized by its maximum, which is exact in the rare-disease limit.
// An optional binary exposure may depend on marker dosage (population G-E
// association). Every replicate draws from its own substream, so cohort k
// is identical no matter how many threads or which replicates ran before.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gwsd/errors.hpp"
#include "gwsd/logistic.hpp"
#include "gwsd/marker_model.hpp"
#include "gwsd/rng.hpp"

namespace gwsd {

struct PanelMarker {
    MarkerCausalModel model;
    double gxe_or = 1.0;            // disease OR per marker allele among exposed
    double exposure_log_odds = 0.0; // exposure log-odds shift per marker allele
};

struct ExposureSpec {
    double prevalence = 0.0; // exposure probability at zero marker dosage
    double main_or = 1.0;    // disease OR for exposure alone

    void validate() const {
        if (!(prevalence > 0.0 && prevalence < 1.0))
            throw validation_error("ExposureSpec: prevalence must lie in (0,1)");
        if (!(main_or > 0.0))
            throw validation_error("ExposureSpec: main_or must be positive");
    }
};

struct SimConfig {
    std::uint64_t seed = 0;
    std::int64_t n_cases = 0;
    std::int64_t n_controls = 0;
    std::vector<PanelMarker> panel;
    bool with_exposure = false;
    ExposureSpec exposure;
    std::int64_t replicates = 1;

    void validate() const {
        if (n_cases < 1 || n_controls < 1)
            throw validation_error("SimConfig: need at least one case and one control");
        if (panel.empty())
            throw validation_error("SimConfig: marker panel is empty");
        if (replicates < 1)
            throw validation_error("SimConfig: replicates must be positive");
        for (const auto& pm : panel) {
            pm.model.validate();
            if (!(pm.gxe_or > 0.0))
                throw validation_error("SimConfig: gxe_or must be positive");
            if ((pm.gxe_or != 1.0 || pm.exposure_log_odds != 0.0) && !with_exposure)
                throw validation_error(
                    "SimConfig: marker references an exposure that is not simulated");
        }
        if (with_exposure)
            exposure.validate();
    }
};

// Cases occupy rows [0, n_cases); controls follow. Each subject-marker
// byte packs two gametes: low two bits gamete A, high two bits gamete B,
// each gamete coded as in marker_model.hpp (bit0 causal, bit1 minor).
struct SimulatedCohort {
    std::int64_t n_cases = 0;
    std::int64_t n_controls = 0;
    std::int64_t n_markers = 0;
    std::vector<std::uint8_t> gametes;   // n_subjects * n_markers
    std::vector<std::uint8_t> phenotype; // 1 = case
    std::vector<std::uint8_t> exposure;  // empty when not simulated

    std::int64_t n_subjects() const { return n_cases + n_controls; }

    int marker_dosage(std::int64_t subject, std::int64_t marker) const {
        const std::uint8_t g = gametes[subject * n_markers + marker];
        return ((g >> 1) & 1) + ((g >> 3) & 1);
    }
    int causal_dosage(std::int64_t subject, std::int64_t marker) const {
        const std::uint8_t g = gametes[subject * n_markers + marker];
        return (g & 1) + ((g >> 2) & 1);
    }
    bool has_exposure() const { return !exposure.empty(); }
};

namespace detail {

struct MarkerDraw {
    std::array<double, 3> cum{}; // cumulative over the first three classes
    double rr = 1.0;
    double gxe = 1.0;
    double elo = 0.0;
};

inline std::uint8_t draw_gamete(Rng& rng, const MarkerDraw& md) {
    const double u = rng.uniform();
    if (u < md.cum[0])
        return g_major_nc;
    if (u < md.cum[1])
        return g_major_c;
    if (u < md.cum[2])
        return g_minor_nc;
    return g_minor_c;
}

} // namespace detail

inline SimulatedCohort simulate_cohort(const SimConfig& cfg,
                                       std::int64_t replicate = 0) {
    cfg.validate();
    if (replicate < 0 || replicate >= cfg.replicates)
        throw validation_error("simulate_cohort: replicate index out of range");

    const std::int64_t m = static_cast<std::int64_t>(cfg.panel.size());
    std::vector<detail::MarkerDraw> draws(m);
    double log_or_e = 0.0;
    bool any_assoc = false;
    for (std::int64_t j = 0; j < m; ++j) {
        const auto& pm = cfg.panel[j];
        const std::array<double, 4> p = population_gametes(pm.model);
        draws[j].cum = {p[g_major_nc], p[g_major_nc] + p[g_major_c],
                        p[g_major_nc] + p[g_major_c] + p[g_minor_nc]};
        draws[j].rr = pm.model.rr_causal;
        draws[j].gxe = pm.gxe_or;
        draws[j].elo = pm.exposure_log_odds;
        if (pm.exposure_log_odds != 0.0)
            any_assoc = true;
    }
    if (cfg.with_exposure)
        log_or_e = std::log(cfg.exposure.main_or);
    const double logit_prev =
        cfg.with_exposure
            ? std::log(cfg.exposure.prevalence / (1.0 - cfg.exposure.prevalence))
            : 0.0;

    // Rejection envelope: largest attainable relative risk.
    double max_genetic = 1.0;
    double max_exposed_extra = cfg.with_exposure ? cfg.exposure.main_or : 1.0;
    for (const auto& md : draws) {
        const double r = std::max(md.rr, 1.0);
        max_genetic *= r * r;
        const double g = std::max(md.gxe, 1.0);
        max_exposed_extra *= g * g;
    }
    const double risk_cap = max_genetic * std::max(1.0, max_exposed_extra);

    SimulatedCohort c;
    c.n_cases = cfg.n_cases;
    c.n_controls = cfg.n_controls;
    c.n_markers = m;
    const std::int64_t n = c.n_subjects();
    c.gametes.resize(static_cast<std::size_t>(n) * m);
    c.phenotype.assign(static_cast<std::size_t>(n), 0);
    if (cfg.with_exposure)
        c.exposure.assign(static_cast<std::size_t>(n), 0);

    Rng rng = Rng::substream(cfg.seed, stream_tag::cohort,
                             static_cast<std::uint64_t>(replicate));

    std::vector<std::uint8_t> row(static_cast<std::size_t>(m));
    const auto draw_subject = [&](std::uint8_t* dest, std::uint8_t& expo,
                                  double& rel_risk) {
        double dose_elo = 0.0;
        double log_risk = 0.0;
        int exposed = 0;
        for (std::int64_t j = 0; j < m; ++j) {
            const std::uint8_t a = detail::draw_gamete(rng, draws[j]);
            const std::uint8_t b = detail::draw_gamete(rng, draws[j]);
            dest[j] = static_cast<std::uint8_t>(a | (b << 2));
        }
        if (cfg.with_exposure) {
            if (any_assoc)
                for (std::int64_t j = 0; j < m; ++j) {
                    const std::uint8_t g = dest[j];
                    const int md = ((g >> 1) & 1) + ((g >> 3) & 1);
                    dose_elo += draws[j].elo * md;
                }
            exposed = rng.bernoulli(expit(logit_prev + dose_elo)) ? 1 : 0;
        }
        for (std::int64_t j = 0; j < m; ++j) {
            const std::uint8_t g = dest[j];
            const int cd = (g & 1) + ((g >> 2) & 1);
            const int md = ((g >> 1) & 1) + ((g >> 3) & 1);
            if (cd != 0)
                log_risk += cd * std::log(draws[j].rr);
            if (exposed && md != 0 && draws[j].gxe != 1.0)
                log_risk += md * std::log(draws[j].gxe);
        }
        if (exposed)
            log_risk += log_or_e;
        expo = static_cast<std::uint8_t>(exposed);
        rel_risk = std::exp(log_risk);
    };

    // Cases first: rejection against the envelope.
    std::int64_t attempts = 0;
    const std::int64_t attempt_cap = 2000 * cfg.n_cases + 100000;
    for (std::int64_t i = 0; i < cfg.n_cases; ++i) {
        for (;;) {
            if (++attempts > attempt_cap) {
                const double acc =
                    static_cast<double>(i) / static_cast<double>(attempts);
                throw numeric_error(
                    "simulate_cohort: case rejection sampling stalled "
                    "(acceptance rate " +
                    std::to_string(acc) +
                    "); effect parameters are too extreme for this panel");
            }
            std::uint8_t expo = 0;
            double rel = 1.0;
            draw_subject(row.data(), expo, rel);
            if (rng.uniform() * risk_cap < rel) {
                std::copy(row.begin(), row.end(),
                          c.gametes.begin() + static_cast<std::size_t>(i) * m);
                c.phenotype[static_cast<std::size_t>(i)] = 1;
                if (cfg.with_exposure)
                    c.exposure[static_cast<std::size_t>(i)] = expo;
                break;
            }
        }
    }
    // Controls: the population itself in the rare-disease limit.
    for (std::int64_t i = cfg.n_cases; i < n; ++i) {
        std::uint8_t expo = 0;
        double rel = 1.0;
        draw_subject(c.gametes.data() + static_cast<std::size_t>(i) * m, expo, rel);
        if (cfg.with_exposure)
            c.exposure[static_cast<std::size_t>(i)] = expo;
    }
    return c;
}

} // namespace gwsd
