#pragma once

// Joint model of a diallelic marker in LD with a diallelic causal variant.
// Everything is parameterized at the gamete (haplotype) level: four gamete
// classes with Pr(minor marker allele and causal allele) = pm*pg + delta.
// Disease risk is multiplicative per causal allele (relative risk rr per
// copy) and the disease is treated as rare, so controls follow the
// population gamete distribution and case gametes are tilted by rr^g and
// renormalized. Under the multiplicative model the two gametes of a case
// stay independent, which keeps every downstream quantity in closed form.

#include <array>
#include <cmath>
#include <string>

#include "gwsd/errors.hpp"

namespace gwsd {

enum class Outcome : int { control = 0, case_ = 1 };
enum class MarkerClass : int { major = 0, minor = 1 };

inline const char* to_string(Outcome o) {
    return o == Outcome::control ? "control" : "case";
}
inline const char* to_string(MarkerClass c) {
    return c == MarkerClass::major ? "major" : "minor";
}

struct DeltaBounds {
    double lo;
    double hi;
};

// Feasible LD coefficient range for given allele frequencies: all four
// gamete-class probabilities must stay nonnegative.
inline DeltaBounds delta_bounds(double marker_freq, double causal_freq) {
    if (!(marker_freq > 0.0 && marker_freq < 1.0))
        throw validation_error("delta_bounds: marker_freq must lie in (0,1)");
    if (!(causal_freq > 0.0 && causal_freq < 1.0))
        throw validation_error("delta_bounds: causal_freq must lie in (0,1)");
    return {std::max(-marker_freq * causal_freq,
                     -(1.0 - marker_freq) * (1.0 - causal_freq)),
            std::min(marker_freq * (1.0 - causal_freq),
                     (1.0 - marker_freq) * causal_freq)};
}

struct MarkerCausalModel {
    double marker_freq = 0.0;  // minor allele frequency of the typed marker
    double causal_freq = 0.0;  // frequency of the untyped causal allele
    double delta = 0.0;        // gamete LD coefficient
    double rr_causal = 1.0;    // relative risk per causal allele copy
    double baseline_risk = 0.0; // optional; >0 enables absolute-risk output

    void validate() const {
        const DeltaBounds b = delta_bounds(marker_freq, causal_freq);
        const double slack = 1e-12;
        if (!(delta >= b.lo - slack && delta <= b.hi + slack))
            throw validation_error(
                "MarkerCausalModel: delta outside feasible range [" +
                std::to_string(b.lo) + ", " + std::to_string(b.hi) + "]");
        if (!(rr_causal >= 0.0))
            throw validation_error("MarkerCausalModel: rr_causal must be >= 0");
        if (baseline_risk < 0.0 || baseline_risk >= 1.0)
            throw validation_error("MarkerCausalModel: baseline_risk must lie in [0,1)");
    }

    bool is_null() const { return rr_causal == 1.0; }

    static MarkerCausalModel null_marker(double marker_freq) {
        return MarkerCausalModel{marker_freq, 0.5, 0.0, 1.0, 0.0};
    }
};

// Gamete classes in a fixed order: index = 2*minor_marker + causal_allele.
enum : int { g_major_nc = 0, g_major_c = 1, g_minor_nc = 2, g_minor_c = 3 };

struct GameteCellTable {
    // Joint gamete-class probabilities by outcome group.
    std::array<double, 4> control_joint{};
    std::array<double, 4> case_joint{};
    // Pr(causal allele present | marker allele class, outcome), per gamete.
    std::array<std::array<double, 2>, 2> carrier{}; // [outcome][marker class]
    // Minor marker allele frequency by outcome group.
    std::array<double, 2> marker_freq{}; // [outcome]
    double marker_rr = 1.0; // penetrance ratio minor vs major marker allele
    double r_squared = 0.0;

    double carrier_given(Outcome o, MarkerClass c) const {
        return carrier[static_cast<int>(o)][static_cast<int>(c)];
    }
    double joint(Outcome o, int gamete_class) const {
        return o == Outcome::control ? control_joint[gamete_class]
                                     : case_joint[gamete_class];
    }
    double minor_freq(Outcome o) const {
        return marker_freq[static_cast<int>(o)];
    }
};

// Population gamete-class probabilities, order per the enum above.
inline std::array<double, 4> population_gametes(const MarkerCausalModel& m) {
    m.validate();
    const double pm = m.marker_freq, pg = m.causal_freq, d = m.delta;
    std::array<double, 4> p{};
    p[g_minor_c] = pm * pg + d;
    p[g_minor_nc] = pm * (1.0 - pg) - d;
    p[g_major_c] = (1.0 - pm) * pg - d;
    p[g_major_nc] = (1.0 - pm) * (1.0 - pg) + d;
    for (auto& v : p)
        if (v < 0.0)
            v = 0.0; // clip roundoff at the feasibility boundary
    return p;
}

inline GameteCellTable cell_table(const MarkerCausalModel& m) {
    const std::array<double, 4> pop = population_gametes(m);
    const double rr = m.rr_causal;
    // Per-gamete normalizer: E[rr^g] over the population gamete draw.
    const double w = (1.0 - m.causal_freq) + rr * m.causal_freq;

    GameteCellTable t;
    t.control_joint = pop;
    for (int c = 0; c < 4; ++c) {
        const double lift = (c == g_major_c || c == g_minor_c) ? rr : 1.0;
        t.case_joint[c] = pop[c] * lift / w;
    }

    const double p_minor = pop[g_minor_c] + pop[g_minor_nc];
    const double p_major = pop[g_major_c] + pop[g_major_nc];
    if (!(p_minor > 0.0 && p_major > 0.0))
        throw validation_error("cell_table: marker must be polymorphic");

    t.carrier[0][static_cast<int>(MarkerClass::minor)] = pop[g_minor_c] / p_minor;
    t.carrier[0][static_cast<int>(MarkerClass::major)] = pop[g_major_c] / p_major;
    const double case_minor = t.case_joint[g_minor_c] + t.case_joint[g_minor_nc];
    const double case_major = t.case_joint[g_major_c] + t.case_joint[g_major_nc];
    t.carrier[1][static_cast<int>(MarkerClass::minor)] =
        case_minor > 0.0 ? t.case_joint[g_minor_c] / case_minor : 0.0;
    t.carrier[1][static_cast<int>(MarkerClass::major)] =
        case_major > 0.0 ? t.case_joint[g_major_c] / case_major : 0.0;

    t.marker_freq[0] = p_minor;
    t.marker_freq[1] = case_minor;

    const double q_minor = t.carrier[0][1], q_major = t.carrier[0][0];
    t.marker_rr = (q_minor * rr + (1.0 - q_minor)) /
                  (q_major * rr + (1.0 - q_major));

    t.r_squared = m.delta * m.delta /
                  (p_minor * p_major * m.causal_freq * (1.0 - m.causal_freq));
    return t;
}

inline double marker_rr(const MarkerCausalModel& m) {
    return cell_table(m).marker_rr;
}

inline double r_squared(const MarkerCausalModel& m) {
    return cell_table(m).r_squared;
}

// Absolute disease risk for a subject classified by one random gamete's
// marker allele; averages back to baseline_risk over the population.
// Requires baseline_risk > 0.
inline double allelic_penetrance(const MarkerCausalModel& m, MarkerClass c) {
    if (!(m.baseline_risk > 0.0))
        throw validation_error("allelic_penetrance: baseline_risk not set");
    const GameteCellTable t = cell_table(m);
    const double q = t.carrier_given(Outcome::control, c);
    const double w = (1.0 - m.causal_freq) + m.rr_causal * m.causal_freq;
    return m.baseline_risk * (q * m.rr_causal + (1.0 - q)) / w;
}

} // namespace gwsd
