#pragma once

// Stratified resequencing design around an associated marker. Subjects
// are binned by (outcome, marker carrier class); the chance that a
// sequenced chromosome actually carries the causal variant differs
// sharply across those four strata, so a fixed sequencing budget should
// chase the strata with the highest carrier posterior. Allocation weights
// use the per-gamete conditional Pr(causal | marker allele class, outcome)
// -- the same quantities the cell table reports -- so the preferred
// stratum always agrees with the model's conditional-carrier table.
// Subjects sampled with known within-stratum fractions feed a logistic
// fit with per-subject offsets log(f_case/f_control); zero offsets make
// that the ordinary retrospective fit.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gwsd/errors.hpp"
#include "gwsd/logistic.hpp"
#include "gwsd/marker_model.hpp"

namespace gwsd {

enum class SamplePurpose : int { discovery = 0, joint = 1 };

inline const char* to_string(SamplePurpose p) {
    return p == SamplePurpose::discovery ? "discovery" : "joint";
}

struct YieldTable {
    // Pr(causal allele | marker class, outcome) per gamete, the
    // allocation weight for stratum (outcome, class).
    std::array<std::array<double, 2>, 2> yield{}; // [outcome][marker class]

    double at(Outcome o, MarkerClass c) const {
        return yield[static_cast<int>(o)][static_cast<int>(c)];
    }
    // Deterministic tie-break: scan order (case,minor), (case,major),
    // (control,minor), (control,major).
    std::pair<Outcome, MarkerClass> argmax() const {
        std::pair<Outcome, MarkerClass> best{Outcome::case_, MarkerClass::minor};
        double v = at(Outcome::case_, MarkerClass::minor);
        const std::pair<Outcome, MarkerClass> order[3] = {
            {Outcome::case_, MarkerClass::major},
            {Outcome::control, MarkerClass::minor},
            {Outcome::control, MarkerClass::major}};
        for (const auto& s : order)
            if (at(s.first, s.second) > v) {
                v = at(s.first, s.second);
                best = s;
            }
        return best;
    }
};

inline YieldTable stratum_yields(const MarkerCausalModel& m) {
    const GameteCellTable t = cell_table(m);
    YieldTable y;
    for (const Outcome o : {Outcome::control, Outcome::case_})
        for (const MarkerClass c : {MarkerClass::major, MarkerClass::minor})
            y.yield[static_cast<int>(o)][static_cast<int>(c)] =
                t.carrier_given(o, c);
    return y;
}

struct PlanStratum {
    Outcome outcome = Outcome::control;
    MarkerClass allele = MarkerClass::major; // subject carries >= 1 minor?
    std::int64_t available = 0;              // expected subjects in stratum
    std::int64_t sampled = 0;
    double fraction = 0.0; // sampled / available
    double yield = 0.0;    // per-gamete carrier posterior (allocation weight)
    double expected_carriers = 0.0; // subjects carrying >= 1 causal allele
};

struct SamplingPlan {
    SamplePurpose purpose = SamplePurpose::discovery;
    std::int64_t budget = 0;
    // Fixed order: (case,minor), (case,major), (control,minor), (control,major).
    std::array<PlanStratum, 4> strata{};

    const PlanStratum& stratum(Outcome o, MarkerClass c) const {
        for (const auto& s : strata)
            if (s.outcome == o && s.allele == c)
                return s;
        throw validation_error("SamplingPlan: stratum lookup failed");
    }
};

namespace detail {

// Subject-level carrier-class and causal-carrier probabilities for one
// outcome group, from per-gamete quantities (gametes are independent
// within outcome under the multiplicative rare-disease model).
struct SubjectStratumProbs {
    double p_class[2];   // Pr(subject class) [major=no minor allele, minor=carrier]
    double p_causal[2];  // Pr(>=1 causal allele | subject class)
};

inline SubjectStratumProbs subject_probs(const GameteCellTable& t, Outcome o) {
    const double pm = t.minor_freq(o); // per-gamete minor marker freq
    const double q_minor = t.carrier_given(o, MarkerClass::minor);
    const double q_major = t.carrier_given(o, MarkerClass::major);
    SubjectStratumProbs s;
    const double p_major2 = (1.0 - pm) * (1.0 - pm);
    s.p_class[static_cast<int>(MarkerClass::major)] = p_major2;
    s.p_class[static_cast<int>(MarkerClass::minor)] = 1.0 - p_major2;
    s.p_causal[static_cast<int>(MarkerClass::major)] =
        1.0 - (1.0 - q_major) * (1.0 - q_major);
    // Carrier subjects: mixture of one or two minor gametes.
    const double p_one = 2.0 * pm * (1.0 - pm);
    const double p_two = pm * pm;
    const double none_one = (1.0 - q_minor) * (1.0 - q_major);
    const double none_two = (1.0 - q_minor) * (1.0 - q_minor);
    const double denom = p_one + p_two;
    s.p_causal[static_cast<int>(MarkerClass::minor)] =
        denom > 0.0 ? 1.0 - (p_one * none_one + p_two * none_two) / denom : 0.0;
    return s;
}

} // namespace detail

inline SamplingPlan recommend_plan(const MarkerCausalModel& m, std::int64_t n_cases,
                                   std::int64_t n_controls, std::int64_t budget,
                                   SamplePurpose purpose) {
    if (n_cases < 1 || n_controls < 1)
        throw validation_error("recommend_plan: need cases and controls");
    if (budget < 1)
        throw validation_error("recommend_plan: budget must be positive");

    const GameteCellTable t = cell_table(m);
    const YieldTable yields = stratum_yields(m);
    const detail::SubjectStratumProbs pc = detail::subject_probs(t, Outcome::case_);
    const detail::SubjectStratumProbs pk = detail::subject_probs(t, Outcome::control);

    SamplingPlan plan;
    plan.purpose = purpose;
    plan.budget = budget;
    const std::pair<Outcome, MarkerClass> order[4] = {
        {Outcome::case_, MarkerClass::minor},
        {Outcome::case_, MarkerClass::major},
        {Outcome::control, MarkerClass::minor},
        {Outcome::control, MarkerClass::major}};
    std::int64_t total_available = 0;
    for (int s = 0; s < 4; ++s) {
        auto& st = plan.strata[static_cast<std::size_t>(s)];
        st.outcome = order[s].first;
        st.allele = order[s].second;
        const auto& probs = st.outcome == Outcome::case_ ? pc : pk;
        const std::int64_t group = st.outcome == Outcome::case_ ? n_cases : n_controls;
        st.available = std::llround(probs.p_class[static_cast<int>(st.allele)] *
                                    static_cast<double>(group));
        st.yield = yields.at(st.outcome, st.allele);
        total_available += st.available;
    }
    if (budget > total_available)
        throw validation_error("recommend_plan: budget exceeds available subjects (" +
                               std::to_string(total_available) + ")");

    if (purpose == SamplePurpose::discovery) {
        // Greedy: fill the best-yield stratum, spill into the next.
        std::array<int, 4> rank{0, 1, 2, 3};
        std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) {
            return plan.strata[static_cast<std::size_t>(a)].yield >
                   plan.strata[static_cast<std::size_t>(b)].yield;
        });
        std::int64_t left = budget;
        for (const int s : rank) {
            auto& st = plan.strata[static_cast<std::size_t>(s)];
            st.sampled = std::min(left, st.available);
            left -= st.sampled;
        }
    } else {
        // Proportional-to-yield with every stratum kept nonempty so the
        // joint analysis can estimate within-stratum contrasts.
        if (budget < 4)
            throw validation_error(
                "recommend_plan: joint purpose needs a budget of at least 4");
        double wsum = 0.0;
        for (const auto& st : plan.strata)
            wsum += st.yield;
        std::array<double, 4> want{};
        for (int s = 0; s < 4; ++s) {
            const auto& st = plan.strata[static_cast<std::size_t>(s)];
            want[static_cast<std::size_t>(s)] =
                wsum > 0.0 ? static_cast<double>(budget) * st.yield / wsum
                           : static_cast<double>(budget) / 4.0;
        }
        // Largest-remainder rounding, then repair bounds [1, available].
        std::array<std::int64_t, 4> take{};
        std::int64_t assigned = 0;
        for (int s = 0; s < 4; ++s) {
            take[static_cast<std::size_t>(s)] =
                static_cast<std::int64_t>(std::floor(want[static_cast<std::size_t>(s)]));
            assigned += take[static_cast<std::size_t>(s)];
        }
        std::array<int, 4> rank{0, 1, 2, 3};
        std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) {
            const double ra = want[static_cast<std::size_t>(a)] -
                              std::floor(want[static_cast<std::size_t>(a)]);
            const double rb = want[static_cast<std::size_t>(b)] -
                              std::floor(want[static_cast<std::size_t>(b)]);
            return ra > rb;
        });
        for (int k = 0; assigned < budget; ++k) {
            take[static_cast<std::size_t>(rank[static_cast<std::size_t>(k % 4)])] += 1;
            ++assigned;
        }
        for (int s = 0; s < 4; ++s) {
            auto& v = take[static_cast<std::size_t>(s)];
            if (v < 1)
                v = 1;
            v = std::min(v, plan.strata[static_cast<std::size_t>(s)].available);
        }
        // Rebalance to the exact budget after clamping, preferring
        // high-yield strata for additions and low-yield for removals.
        std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) {
            return plan.strata[static_cast<std::size_t>(a)].yield >
                   plan.strata[static_cast<std::size_t>(b)].yield;
        });
        std::int64_t diff = budget;
        for (const auto v : take)
            diff -= v;
        while (diff > 0) {
            bool moved = false;
            for (const int s : rank) {
                auto& v = take[static_cast<std::size_t>(s)];
                if (v < plan.strata[static_cast<std::size_t>(s)].available) {
                    ++v;
                    --diff;
                    moved = true;
                    if (diff == 0)
                        break;
                }
            }
            if (!moved)
                break;
        }
        while (diff < 0) {
            bool moved = false;
            for (auto it = rank.rbegin(); it != rank.rend(); ++it) {
                auto& v = take[static_cast<std::size_t>(*it)];
                if (v > 1) {
                    --v;
                    ++diff;
                    moved = true;
                    if (diff == 0)
                        break;
                }
            }
            if (!moved)
                break;
        }
        for (int s = 0; s < 4; ++s)
            plan.strata[static_cast<std::size_t>(s)].sampled =
                take[static_cast<std::size_t>(s)];
    }

    for (auto& st : plan.strata) {
        st.fraction = st.available > 0 ? static_cast<double>(st.sampled) /
                                             static_cast<double>(st.available)
                                       : 0.0;
        const auto& probs = st.outcome == Outcome::case_ ? pc : pk;
        st.expected_carriers = static_cast<double>(st.sampled) *
                               probs.p_causal[static_cast<int>(st.allele)];
    }
    return plan;
}

// Known sampling offsets for the joint analysis: per marker class,
// log(f_case / f_control). Requires both outcome groups sampled in each
// class that is sampled at all.
struct SamplingOffsets {
    std::array<double, 2> by_class{}; // [marker class]

    double at(MarkerClass c) const { return by_class[static_cast<int>(c)]; }
};

inline SamplingOffsets sampling_offsets(const SamplingPlan& plan) {
    SamplingOffsets off;
    for (const MarkerClass c : {MarkerClass::major, MarkerClass::minor}) {
        const auto& sc = plan.stratum(Outcome::case_, c);
        const auto& sk = plan.stratum(Outcome::control, c);
        if (sc.sampled == 0 && sk.sampled == 0) {
            off.by_class[static_cast<int>(c)] = 0.0; // class absent from sample
            continue;
        }
        if (sc.fraction <= 0.0 || sk.fraction <= 0.0)
            throw validation_error(
                std::string("sampling_offsets: marker class '") + to_string(c) +
                "' sampled in only one outcome group; offsets are undefined");
        off.by_class[static_cast<int>(c)] =
            std::log(sc.fraction) - std::log(sk.fraction);
    }
    return off;
}

struct OffsetFit {
    double intercept = 0.0;
    double slope = 0.0; // log-OR per causal allele copy
    double se_intercept = 0.0;
    double se_slope = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Logistic fit of outcome on causal dosage with per-subject sampling
// offsets. An empty offset span means zero offsets and reproduces the
// plain retrospective fit bit for bit.
inline OffsetFit offset_logistic_fit(std::span<const std::uint8_t> dosage,
                                     std::span<const std::uint8_t> outcome,
                                     std::span<const double> offset = {}) {
    const std::size_t n = dosage.size();
    if (n == 0 || outcome.size() != n)
        throw validation_error("offset_logistic_fit: inconsistent input lengths");
    if (!offset.empty() && offset.size() != n)
        throw validation_error("offset_logistic_fit: offset length must match n");
    std::vector<double> x(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        x[i * 2] = 1.0;
        x[i * 2 + 1] = static_cast<double>(dosage[i]);
    }
    const LogisticFit fit = logistic_fit(x, n, 2, outcome, offset);
    OffsetFit out;
    out.converged = fit.converged;
    out.iterations = fit.iterations;
    out.intercept = fit.coef[0];
    out.slope = fit.coef[1];
    if (fit.converged) {
        out.se_intercept = fit.se[0];
        out.se_slope = fit.se[1];
    }
    return out;
}

} // namespace gwsd
