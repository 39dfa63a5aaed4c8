#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "posseq/error.hpp"
#include "posseq/geometry.hpp"

namespace posseq {

/// Normalized possibility distribution over a finite universe (sup = 1).
class PossibilityDistribution {
public:
    static constexpr double kNormalizationTolerance = 1e-12;

    PossibilityDistribution(std::vector<std::string> universe, std::vector<double> degrees)
        : universe_(std::move(universe)), degrees_(std::move(degrees)) {
        if (universe_.empty()) fail(ErrorKind::InvalidArgument, "possibility universe is empty");
        if (universe_.size() != degrees_.size())
            fail(ErrorKind::InvalidArgument, "universe and degree vectors differ in length");
        double top = 0.0;
        for (std::size_t i = 0; i < universe_.size(); ++i) {
            const double p = degrees_[i];
            if (!(p >= 0.0 && p <= 1.0))
                fail(ErrorKind::InvalidArgument, "degree of '" + universe_[i] + "' outside [0, 1]");
            if (!index_.emplace(universe_[i], i).second)
                fail(ErrorKind::InvalidArgument, "duplicate universe element '" + universe_[i] + "'");
            top = std::max(top, p);
        }
        if (std::abs(top - 1.0) > kNormalizationTolerance)
            fail(ErrorKind::InvalidArgument, "possibility distribution is not normalized (sup != 1)");
    }

    std::span<const std::string> universe() const noexcept { return universe_; }
    std::span<const double> degrees() const noexcept { return degrees_; }

    double degree(const std::string& element) const { return degrees_[index(element)]; }

    std::size_t index(const std::string& element) const {
        auto it = index_.find(element);
        if (it == index_.end()) fail(ErrorKind::UnknownElement, "'" + element + "' is not in the universe");
        return it->second;
    }

private:
    std::vector<std::string> universe_;
    std::vector<double> degrees_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Pi(A) = max over A of pi; the empty event has possibility 0.
inline double possibility_of_event(const PossibilityDistribution& dist, std::span<const std::string> event) {
    double best = 0.0;
    for (const auto& e : event) best = std::max(best, dist.degree(e));
    return best;
}

/// N(A) = 1 - Pi(complement of A).
inline double necessity_of_event(const PossibilityDistribution& dist, std::span<const std::string> event) {
    std::vector<bool> in_event(dist.universe().size(), false);
    for (const auto& e : event) in_event[dist.index(e)] = true;
    double complement = 0.0;
    for (std::size_t i = 0; i < in_event.size(); ++i)
        if (!in_event[i]) complement = std::max(complement, dist.degrees()[i]);
    return 1.0 - complement;
}

/// Fuzzy c-means membership of one point to each kernel given its distances:
/// U_i = d_i^(-2/(m-1)) / sum_k d_k^(-2/(m-1)).
inline std::vector<double> bezdek_membership(std::span<const double> distances, double m) {
    if (!(m > 1.0) || !std::isfinite(m)) fail(ErrorKind::InvalidFuzzifier, "fuzzifier m must be > 1");
    if (distances.empty()) fail(ErrorKind::InvalidArgument, "no distances given");
    double nearest = distances[0];
    for (double d : distances) {
        if (!(d > 0.0)) fail(ErrorKind::ZeroDistance, "Bezdek membership needs strictly positive distances");
        if (!std::isfinite(d)) fail(ErrorKind::InvalidArgument, "non-finite distance");
        nearest = std::min(nearest, d);
    }
    // Scale by the nearest distance so every weight lies in (0, 1].
    const double exponent = 2.0 / (m - 1.0);
    std::vector<double> u(distances.size());
    double total = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = std::pow(nearest / distances[i], exponent);
        total += u[i];
    }
    for (double& v : u) v /= total;
    return u;
}

/// Phi_i = U_i / max_k U_k.
inline std::vector<double> attachment_degree(std::span<const double> memberships) {
    if (memberships.empty()) return {};
    const double top = *std::max_element(memberships.begin(), memberships.end());
    if (!(top > 0.0)) fail(ErrorKind::InvalidArgument, "memberships must contain a positive value");
    std::vector<double> phi(memberships.size());
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = memberships[i] / top;
    return phi;
}

/// Far-region possibility: Pi = Phi / (d / psi).
inline double possibility_far(double attachment, double distance, double proximity) {
    if (!(proximity >= 0.0) || !(distance > 0.0) || distance < proximity)
        fail(ErrorKind::RegionViolation, "possibility_far requires d >= psi and d > 0");
    return attachment * proximity / distance;
}

/// Near-region necessity: N = (1 - d / psi) * (d_min / d).
inline double necessity_near(double distance, double proximity, double nearest_distance) {
    if (!(distance > 0.0) || !(distance < proximity))
        fail(ErrorKind::RegionViolation, "necessity_near requires 0 < d < psi");
    if (!(nearest_distance >= 0.0) || nearest_distance > distance)
        fail(ErrorKind::InvalidArgument, "d_min must satisfy 0 <= d_min <= d");
    return (1.0 - distance / proximity) * (nearest_distance / distance);
}

struct MembershipAssessment {
    std::size_t area = 0; // index into the layout
    Region region = Region::Far;
    double possibility = 0.0;
    double necessity = 0.0;
    double distance = 0.0; // kernel distance, kept for tie-breaking
};

/// Possibility and necessity of one fixation belonging to every area.
///
/// Kernel areas get (1, 1); Near areas get Pi = 1 and the Near necessity;
/// Far areas get N = 0 and the Far possibility, where the attachment degree
/// comes from Bezdek membership over the areas at positive distance. When the
/// fixation sits inside a kernel that area is left out of the Bezdek
/// normalization, which keeps every Far possibility strictly positive.
inline std::vector<MembershipAssessment> assess_fixation(const Fixation& f, const InterfaceLayout& layout,
                                                         const AttractionStats& stats, double m) {
    const std::size_t n = layout.size();
    if (stats.size() != n) fail(ErrorKind::InvalidArgument, "attraction stats do not match layout");
    if (!(m > 1.0) || !std::isfinite(m)) fail(ErrorKind::InvalidFuzzifier, "fuzzifier m must be > 1");

    std::vector<MembershipAssessment> out(n);
    std::vector<double> positive;
    positive.reserve(n);
    double nearest = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < n; ++i) {
        out[i].area = i;
        out[i].distance = kernel_distance(f, layout[i]);
        out[i].region = classify_region(out[i].distance, stats.proximity[i]);
        if (out[i].distance > 0.0) positive.push_back(out[i].distance);
        if (first || out[i].distance < nearest) nearest = out[i].distance;
        first = false;
    }

    std::vector<double> phi;
    bool any_far = std::any_of(out.begin(), out.end(), [](const auto& a) { return a.region == Region::Far; });
    if (any_far) phi = attachment_degree(bezdek_membership(positive, m));

    std::size_t k = 0; // walks `phi`, which is indexed over positive-distance areas only
    for (auto& a : out) {
        switch (a.region) {
        case Region::Kernel:
            a.possibility = 1.0;
            a.necessity = 1.0;
            break;
        case Region::Near:
            a.possibility = 1.0;
            a.necessity = necessity_near(a.distance, stats.proximity[a.area], nearest);
            break;
        case Region::Far:
            a.necessity = 0.0;
            a.possibility = possibility_far(phi[k], a.distance, stats.proximity[a.area]);
            break;
        }
        if (a.distance > 0.0) ++k;
    }
    return out;
}

} // namespace posseq
