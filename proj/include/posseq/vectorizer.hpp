#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "posseq/error.hpp"
#include "posseq/geometry.hpp"
#include "posseq/possibility.hpp"

namespace posseq {

/// Ordered AOI symbols emitted for one trajectory.
struct ObservationSequence {
    std::vector<std::string> symbols;
    std::string source; // id of the trajectory it came from, if any
    std::optional<std::string> label;

    std::size_t size() const noexcept { return symbols.size(); }
    bool empty() const noexcept { return symbols.empty(); }

    friend bool operator==(const ObservationSequence&, const ObservationSequence&) = default;
};

struct VectorizerParams {
    double omega = 0.0;       // proximity distance, pixels
    double m = 2.0;           // Bezdek fuzzifier
    double p_threshold = 0.5; // a Far emission needs max possibility > this
    int ds = 1;               // centiseconds per tick

    void validate() const {
        if (!std::isfinite(omega) || omega < 0.0) fail(ErrorKind::InvalidArgument, "omega must be finite and >= 0");
        if (!std::isfinite(m) || !(m > 1.0)) fail(ErrorKind::InvalidFuzzifier, "fuzzifier m must be > 1");
        if (!(p_threshold >= 0.0 && p_threshold <= 1.0))
            fail(ErrorKind::InvalidArgument, "possibility threshold P must lie in [0, 1]");
        if (ds <= 0) fail(ErrorKind::InvalidArgument, "ds must be a positive integer");
    }
};

/// Boolean vectorization: a fixation emits the area whose kernel holds it.
inline ObservationSequence vectorize_classical(const Trajectory& traj, const InterfaceLayout& layout) {
    ObservationSequence seq;
    seq.source = traj.id;
    seq.label = traj.label;
    for (const auto& f : traj.fixations)
        for (const auto& a : layout.areas())
            if (in_kernel(f, a)) {
                seq.symbols.push_back(a.name);
                break;
            }
    return seq;
}

namespace detail {

// Strictly better value wins; on equal values the nearer kernel, then the
// earlier layout index.
template <typename Key>
std::optional<std::size_t> select_best(const std::vector<MembershipAssessment>& assessed, Key key) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < assessed.size(); ++i) {
        const auto& a = assessed[i];
        if (!best) {
            best = i;
            continue;
        }
        const auto& b = assessed[*best];
        const double ka = key(a), kb = key(b);
        if (ka > kb || (ka == kb && a.distance < b.distance)) best = i;
    }
    return best;
}

} // namespace detail

/// Symbol emitted for a single fixation, or nothing when the fixation is not
/// relevant to any area.
inline std::optional<std::size_t> select_symbol(const std::vector<MembershipAssessment>& assessed,
                                                double p_threshold) {
    const auto by_necessity = detail::select_best(assessed, [](const auto& a) { return a.necessity; });
    if (by_necessity && assessed[*by_necessity].necessity > 0.0) return assessed[*by_necessity].area;
    const auto by_possibility = detail::select_best(assessed, [](const auto& a) { return a.possibility; });
    if (by_possibility && assessed[*by_possibility].possibility > p_threshold)
        return assessed[*by_possibility].area;
    return std::nullopt;
}

/// Possibilistic vectorization: emit the area of maximal necessity when any
/// necessity is positive, else the area of maximal possibility if it exceeds P.
inline ObservationSequence vectorize_possibilistic(const Trajectory& traj, const InterfaceLayout& layout,
                                                   const AttractionStats& stats, const VectorizerParams& params) {
    params.validate();
    if (stats.omega != params.omega)
        fail(ErrorKind::InvalidArgument, "attraction stats were built with a different omega");
    ObservationSequence seq;
    seq.source = traj.id;
    seq.label = traj.label;
    for (const auto& f : traj.fixations) {
        const auto assessed = assess_fixation(f, layout, stats, params.m);
        if (auto area = select_symbol(assessed, params.p_threshold)) seq.symbols.push_back(layout[*area].name);
    }
    return seq;
}

} // namespace posseq
