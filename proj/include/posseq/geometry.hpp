#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "posseq/error.hpp"

namespace posseq {

/// One sampled cursor position. `t` counts sampling ticks.
struct Fixation {
    std::int64_t t = 0;
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Fixation&, const Fixation&) = default;
};

struct Trajectory {
    std::string id;
    std::vector<Fixation> fixations;
    int ds = 1; // centiseconds per tick
    std::optional<std::string> label;

    std::size_t size() const noexcept { return fixations.size(); }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

inline void validate(const Trajectory& traj) {
    if (traj.fixations.empty()) fail(ErrorKind::InvalidTrajectory, "trajectory '" + traj.id + "' is empty");
    if (traj.ds <= 0) fail(ErrorKind::InvalidTrajectory, "trajectory '" + traj.id + "' has non-positive ds");
    for (std::size_t i = 0; i < traj.fixations.size(); ++i) {
        const auto& f = traj.fixations[i];
        if (!std::isfinite(f.x) || !std::isfinite(f.y) || f.x < 0.0 || f.y < 0.0)
            fail(ErrorKind::InvalidTrajectory,
                 "trajectory '" + traj.id + "' fixation " + std::to_string(i) + " has invalid coordinates");
        if (i > 0 && f.t != traj.fixations[i - 1].t + 1)
            fail(ErrorKind::InvalidTrajectory,
                 "trajectory '" + traj.id + "' time index not consecutive at fixation " + std::to_string(i));
    }
}

/// Axis-aligned rectangle in screen pixels (y grows downwards). Closed set.
struct Rect {
    double left = 0.0;
    double top = 0.0;
    double width = 0.0;
    double height = 0.0;

    double right() const noexcept { return left + width; }
    double bottom() const noexcept { return top + height; }
    double area() const noexcept { return width * height; }
    double center_x() const noexcept { return left + width / 2.0; }
    double center_y() const noexcept { return top + height / 2.0; }

    bool intersects(const Rect& o) const noexcept {
        return left <= o.right() && o.left <= right() && top <= o.bottom() && o.top <= bottom();
    }

    friend bool operator==(const Rect&, const Rect&) = default;
};

struct AreaOfInterest {
    std::string name;
    Rect kernel;

    friend bool operator==(const AreaOfInterest&, const AreaOfInterest&) = default;
};

enum class Region { Kernel, Near, Far };

inline const char* to_string(Region r) {
    switch (r) {
    case Region::Kernel: return "Kernel";
    case Region::Near: return "Near";
    case Region::Far: return "Far";
    }
    return "?";
}

/// Ordered set of areas; the order defines the symbol index. Kernels must be
/// pairwise disjoint as closed rectangles, so a shared edge counts as overlap.
class InterfaceLayout {
public:
    InterfaceLayout() = default;

    explicit InterfaceLayout(std::vector<AreaOfInterest> areas) : areas_(std::move(areas)) {
        if (areas_.empty()) fail(ErrorKind::InvalidLayout, "layout has no areas");
        for (std::size_t i = 0; i < areas_.size(); ++i) {
            const auto& a = areas_[i];
            if (a.name.empty()) fail(ErrorKind::InvalidLayout, "area " + std::to_string(i) + " has an empty name");
            if (std::any_of(a.name.begin(), a.name.end(), [](unsigned char c) { return std::isspace(c) != 0; }))
                fail(ErrorKind::InvalidLayout, "area name '" + a.name + "' contains whitespace");
            const auto& k = a.kernel;
            if (!std::isfinite(k.left) || !std::isfinite(k.top) || !std::isfinite(k.width) ||
                !std::isfinite(k.height))
                fail(ErrorKind::InvalidLayout, "area '" + a.name + "' has non-finite geometry");
            if (!(k.width > 0.0) || !(k.height > 0.0))
                fail(ErrorKind::InvalidLayout, "area '" + a.name + "' must have positive width and height");
            if (!index_.emplace(a.name, i).second)
                fail(ErrorKind::InvalidLayout, "duplicate area name '" + a.name + "'");
        }
        for (std::size_t i = 0; i < areas_.size(); ++i)
            for (std::size_t j = i + 1; j < areas_.size(); ++j)
                if (areas_[i].kernel.intersects(areas_[j].kernel))
                    fail(ErrorKind::InvalidLayout,
                         "kernels of '" + areas_[i].name + "' and '" + areas_[j].name + "' overlap");
    }

    std::span<const AreaOfInterest> areas() const noexcept { return areas_; }
    std::size_t size() const noexcept { return areas_.size(); }
    const AreaOfInterest& operator[](std::size_t i) const { return areas_.at(i); }

    std::optional<std::size_t> index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(areas_.size());
        for (const auto& a : areas_) out.push_back(a.name);
        return out;
    }

    friend bool operator==(const InterfaceLayout& a, const InterfaceLayout& b) { return a.areas_ == b.areas_; }

private:
    std::vector<AreaOfInterest> areas_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Euclidean distance from the fixation to the nearest point of the kernel;
/// exactly zero inside or on the boundary.
inline double kernel_distance(const Fixation& f, const AreaOfInterest& a) {
    const Rect& k = a.kernel;
    const double dx = std::max({k.left - f.x, 0.0, f.x - k.right()});
    const double dy = std::max({k.top - f.y, 0.0, f.y - k.bottom()});
    if (dx == 0.0) return dy;
    if (dy == 0.0) return dx;
    return std::hypot(dx, dy);
}

inline bool in_kernel(const Fixation& f, const AreaOfInterest& a) { return kernel_distance(f, a) == 0.0; }

/// Per-area attraction statistics, in layout order.
struct AttractionStats {
    std::vector<double> raw;        // kernel fixations per square pixel
    std::vector<double> normalized; // raw / max raw
    std::vector<double> proximity;  // normalized + omega (Near-band width)
    double omega = 0.0;

    std::size_t size() const noexcept { return raw.size(); }
};

/// Kernel-fixation counts per area over a corpus. Kernels are disjoint, so each
/// fixation lands in at most one area.
inline std::vector<std::size_t> kernel_counts(const InterfaceLayout& layout, std::span<const Trajectory> corpus) {
    std::vector<std::size_t> counts(layout.size(), 0);
    for (const auto& traj : corpus)
        for (const auto& f : traj.fixations)
            for (std::size_t i = 0; i < layout.size(); ++i)
                if (in_kernel(f, layout[i])) {
                    ++counts[i];
                    break;
                }
    return counts;
}

inline AttractionStats attraction_stats_from_counts(const InterfaceLayout& layout,
                                                    std::span<const std::size_t> counts, double omega) {
    if (!std::isfinite(omega) || omega < 0.0) fail(ErrorKind::InvalidArgument, "omega must be finite and >= 0");
    if (counts.size() != layout.size()) fail(ErrorKind::InvalidArgument, "count vector does not match layout");
    AttractionStats s;
    s.omega = omega;
    s.raw.resize(layout.size());
    for (std::size_t i = 0; i < layout.size(); ++i)
        s.raw[i] = static_cast<double>(counts[i]) / layout[i].kernel.area();
    const double top = *std::max_element(s.raw.begin(), s.raw.end());
    if (!(top > 0.0)) fail(ErrorKind::AllAttractionsZero, "no corpus fixation lies in any kernel");
    s.normalized.resize(layout.size());
    s.proximity.resize(layout.size());
    for (std::size_t i = 0; i < layout.size(); ++i) {
        // x / x is exactly 1 in IEEE arithmetic, so the maximal area gets 1.
        s.normalized[i] = s.raw[i] / top;
        s.proximity[i] = s.normalized[i] + omega;
    }
    return s;
}

inline AttractionStats compute_attraction_stats(const InterfaceLayout& layout, std::span<const Trajectory> corpus,
                                                double omega) {
    if (corpus.empty()) fail(ErrorKind::InvalidArgument, "attraction corpus is empty");
    const auto counts = kernel_counts(layout, corpus);
    return attraction_stats_from_counts(layout, counts, omega);
}

/// Kernel iff d == 0, Near iff 0 < d < psi, Far otherwise (d == psi is Far).
inline Region classify_region(double distance, double proximity) {
    if (distance == 0.0) return Region::Kernel;
    if (distance < proximity) return Region::Near;
    return Region::Far;
}

inline Region classify_region(const Fixation& f, const InterfaceLayout& layout, std::size_t area,
                              const AttractionStats& stats) {
    return classify_region(kernel_distance(f, layout[area]), stats.proximity.at(area));
}

} // namespace posseq
