#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "posseq/error.hpp"
#include "posseq/geometry.hpp"
#include "posseq/matrix.hpp"
#include "posseq/seed.hpp"

namespace posseq {

inline constexpr double kCanvasWidth = 1024.0;
inline constexpr double kCanvasHeight = 768.0;

/// Motion parameters shared by every built-in task script.
struct MotionParams {
    double dwell_mean = 14.0;      // ticks
    double dwell_sd = 5.0;         // ticks
    double travel_speed = 45.0;    // pixels per tick
    double travel_noise = 4.0;     // pixels, per-axis Gaussian sigma
    double overshoot_prob = 0.45;  // chance a dwell lands just outside the kernel
    int overshoot_max_px = 6;      // overshoot offset drawn from 1..max pixels

    friend bool operator==(const MotionParams&, const MotionParams&) = default;
};

/// Stochastic visit plan for one task class.
struct TaskScript {
    std::string task;
    std::vector<std::string> areas; // column/row order of `transition`
    std::vector<double> start;      // distribution of the first target
    Matrix transition;              // row-stochastic visit-order matrix
    MotionParams motion;

    void validate() const {
        const std::size_t n = areas.size();
        if (n == 0) fail(ErrorKind::InvalidArgument, "task script has no areas");
        if (transition.rows != n || transition.cols != n || start.size() != n)
            fail(ErrorKind::InvalidArgument, "task script matrix shape mismatch");
        auto check = [&](std::span<const double> row) {
            double s = 0.0;
            for (double v : row) {
                if (!(v >= 0.0)) fail(ErrorKind::InvalidArgument, "negative visit probability in " + task);
                s += v;
            }
            if (std::abs(s - 1.0) > 1e-9) fail(ErrorKind::InvalidArgument, "visit row does not sum to 1 in " + task);
        };
        check(start);
        for (std::size_t i = 0; i < n; ++i) check(transition.row(i));
        if (!(motion.dwell_mean >= 1.0) || !(motion.dwell_sd >= 0.0))
            fail(ErrorKind::InvalidArgument, "dwell distribution must have mean >= 1 and sd >= 0");
        if (!(motion.travel_noise >= 0.0) || !(motion.travel_speed > 0.0))
            fail(ErrorKind::InvalidArgument, "travel parameters out of range");
        if (!(motion.overshoot_prob >= 0.0 && motion.overshoot_prob <= 1.0) || motion.overshoot_max_px < 1)
            fail(ErrorKind::InvalidArgument, "overshoot parameters out of range");
    }
};

struct GeneratorConfig {
    std::uint64_t seed = 20160901;
    std::size_t per_task = 17;
    std::int64_t min_ticks = 160;
    std::int64_t max_ticks = 320;
    int ds = 1; // centiseconds
    MotionParams motion;

    void validate() const {
        if (per_task == 0) fail(ErrorKind::InvalidArgument, "per_task must be >= 1");
        if (min_ticks < 1 || max_ticks < min_ticks) fail(ErrorKind::InvalidArgument, "bad trajectory duration range");
        if (ds <= 0) fail(ErrorKind::InvalidArgument, "ds must be positive");
    }

    friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// Fifteen disjoint kernels A..O on a 1024x768 canvas, laid out like a
/// graphing simulator: a plot on the left, equation controls on the right.
inline InterfaceLayout builtin_layout() {
    return InterfaceLayout({
        {"A", {40, 60, 560, 560}},   // plot
        {"B", {640, 40, 340, 40}},   // first equation readout
        {"C", {640, 110, 100, 30}},  // a coefficient
        {"D", {760, 110, 100, 30}},  // b coefficient
        {"E", {880, 110, 100, 30}},  // c coefficient
        {"F", {640, 180, 340, 40}},  // second equation readout
        {"G", {640, 250, 100, 30}},  // second a
        {"H", {760, 250, 100, 30}},  // second b
        {"I", {880, 250, 100, 30}},  // second c
        {"J", {640, 320, 160, 30}},  // show second equation
        {"K", {820, 320, 70, 30}},   // zoom in
        {"L", {910, 320, 70, 30}},   // zoom out
        {"M", {640, 390, 160, 40}},  // reset
        {"N", {820, 390, 160, 40}},  // grid toggle
        {"O", {640, 460, 340, 150}}, // help panel
    });
}

namespace synthetic_detail {

// Row i of the visit matrix: the task's preference for each area, a boost for
// the follow-up areas of i, and no self-visits. Areas in `never` get no mass.
inline TaskScript make_script(std::string task, const std::vector<std::string>& names,
                              const std::map<std::string, double>& preference,
                              const std::map<std::string, std::map<std::string, double>>& follow,
                              const MotionParams& motion, const std::set<std::string>& never = {}) {
    const std::size_t n = names.size();
    constexpr double background = 0.04;
    TaskScript s;
    s.task = std::move(task);
    s.areas = names;
    s.motion = motion;
    s.transition = Matrix(n, n);
    std::vector<double> pref(n, background);
    for (std::size_t j = 0; j < n; ++j)
        if (never.contains(names[j])) pref[j] = 0.0;
        else if (auto it = preference.find(names[j]); it != preference.end()) pref[j] += it->second;
    s.start = pref;
    double total = 0.0;
    for (double v : s.start) total += v;
    for (double& v : s.start) v /= total;
    for (std::size_t i = 0; i < n; ++i) {
        auto row = s.transition.row(i);
        for (std::size_t j = 0; j < n; ++j) row[j] = pref[j];
        if (auto it = follow.find(names[i]); it != follow.end())
            for (const auto& [to, w] : it->second)
                for (std::size_t j = 0; j < n; ++j)
                    if (names[j] == to) row[j] += w;
        row[i] = 0.0;
        double sum = 0.0;
        for (double v : row) sum += v;
        for (double& v : row) v /= sum;
    }
    return s;
}

} // namespace synthetic_detail

/// Three task classes over builtin_layout(). DEG2 works all three
/// coefficients, DEG1 leaves the a-coefficient alone, INT brings in the
/// second equation.
inline std::map<std::string, TaskScript> builtin_scripts(const MotionParams& motion = {}) {
    const auto names = builtin_layout().names();
    using synthetic_detail::make_script;
    std::map<std::string, TaskScript> out;
    out.emplace("DEG2", make_script("DEG2", names,
                                    {{"A", 1.0}, {"B", 0.4}, {"C", 0.7}, {"D", 0.5}, {"E", 0.5}, {"M", 0.2}},
                                    {{"C", {{"A", 1.0}}}, {"D", {{"A", 0.6}}}, {"E", {{"A", 0.6}}}}, motion));
    out.emplace("DEG1", make_script("DEG1", names,
                                    {{"A", 1.0}, {"B", 0.4}, {"D", 0.7}, {"E", 0.6}, {"N", 0.2}, {"M", 0.2}},
                                    {{"D", {{"A", 1.0}}}, {"E", {{"A", 0.6}}}}, motion, {"C"}));
    out.emplace("INT", make_script("INT", names,
                                   {{"A", 1.0}, {"B", 0.3}, {"C", 0.3}, {"D", 0.4}, {"E", 0.3}, {"F", 0.3},
                                    {"G", 0.3}, {"H", 0.5}, {"J", 0.3}},
                                   {{"H", {{"A", 1.0}}}, {"J", {{"F", 0.6}}}, {"A", {{"H", 0.3}}}}, motion));
    return out;
}

/// Seeded cursor walk: pick the next target from the visit matrix, travel
/// towards it with Gaussian noise, then dwell either inside the kernel or
/// (with the overshoot probability) a few pixels outside one of its edges.
/// Coordinates are integers clamped to the canvas.
inline Trajectory generate_trajectory(const TaskScript& script, const InterfaceLayout& layout,
                                      const GeneratorConfig& config, std::uint64_t seed, std::string id = {}) {
    script.validate();
    config.validate();
    std::vector<const AreaOfInterest*> areas;
    for (const auto& name : script.areas) {
        auto idx = layout.index_of(name);
        if (!idx) fail(ErrorKind::InvalidArgument, "script area '" + name + "' is not in the layout");
        areas.push_back(&layout[*idx]);
    }
    const MotionParams& mp = script.motion;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    auto pick = [&](std::span<const double> probs) {
        double u = unit(rng), acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return probs.size() - 1;
    };
    auto uniform_int = [&](std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
    };
    auto clamp_x = [](double v) { return std::clamp(std::round(v), 0.0, kCanvasWidth - 1.0); };
    auto clamp_y = [](double v) { return std::clamp(std::round(v), 0.0, kCanvasHeight - 1.0); };

    const std::int64_t duration = uniform_int(config.min_ticks, config.max_ticks);
    Trajectory traj;
    traj.id = std::move(id);
    traj.label = script.task;
    traj.ds = config.ds;
    traj.fixations.reserve(static_cast<std::size_t>(duration));
    auto emit = [&](double x, double y) {
        if (static_cast<std::int64_t>(traj.fixations.size()) < duration)
            traj.fixations.push_back({static_cast<std::int64_t>(traj.fixations.size()), x, y});
    };

    double cx = clamp_x(uniform_int(0, static_cast<std::int64_t>(kCanvasWidth) - 1));
    double cy = clamp_y(uniform_int(0, static_cast<std::int64_t>(kCanvasHeight) - 1));
    std::size_t target = pick(script.start);
    while (static_cast<std::int64_t>(traj.fixations.size()) < duration) {
        const Rect& k = areas[target]->kernel;
        double tx, ty;
        if (unit(rng) < mp.overshoot_prob) {
            // A point at integer offset 1..max outside one edge, level with the kernel.
            const double off = static_cast<double>(uniform_int(1, mp.overshoot_max_px));
            const auto side = uniform_int(0, 3);
            const auto along_x = static_cast<double>(uniform_int(static_cast<std::int64_t>(k.left),
                                                                 static_cast<std::int64_t>(k.right())));
            const auto along_y = static_cast<double>(uniform_int(static_cast<std::int64_t>(k.top),
                                                                 static_cast<std::int64_t>(k.bottom())));
            switch (side) {
            case 0: tx = k.left - off; ty = along_y; break;
            case 1: tx = k.right() + off; ty = along_y; break;
            case 2: tx = along_x; ty = k.top - off; break;
            default: tx = along_x; ty = k.bottom() + off; break;
            }
            tx = clamp_x(tx);
            ty = clamp_y(ty);
        } else {
            tx = static_cast<double>(uniform_int(static_cast<std::int64_t>(std::ceil(k.left)),
                                                 static_cast<std::int64_t>(std::floor(k.right()))));
            ty = static_cast<double>(uniform_int(static_cast<std::int64_t>(std::ceil(k.top)),
                                                 static_cast<std::int64_t>(std::floor(k.bottom()))));
        }

        const double dist = std::hypot(tx - cx, ty - cy);
        const auto steps = static_cast<std::int64_t>(std::ceil(dist / mp.travel_speed));
        for (std::int64_t s = 1; s < steps; ++s) {
            const double frac = static_cast<double>(s) / static_cast<double>(steps);
            emit(clamp_x(cx + (tx - cx) * frac + mp.travel_noise * noise(rng)),
                 clamp_y(cy + (ty - cy) * frac + mp.travel_noise * noise(rng)));
        }
        const auto dwell =
            std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(mp.dwell_mean + mp.dwell_sd * noise(rng))));
        for (std::int64_t s = 0; s < dwell; ++s) emit(tx, ty);
        cx = tx;
        cy = ty;
        target = pick(script.transition.row(target));
    }
    return traj;
}

/// per_task trajectories for each built-in class, classes in sorted order.
/// Trajectory seeds come from (master seed, class, index) only, so parallel
/// generation reproduces the sequential output.
inline std::vector<Trajectory> generate_dataset(const GeneratorConfig& config, unsigned jobs = 1) {
    config.validate();
    const auto layout = builtin_layout();
    const auto scripts = builtin_scripts(config.motion);
    for (const auto& [task, script] : scripts) script.validate();

    struct Job {
        const TaskScript* script;
        std::uint64_t seed;
        std::string id;
    };
    std::vector<Job> work;
    for (const auto& [task, script] : scripts)
        for (std::size_t i = 0; i < config.per_task; ++i) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%03zu", i + 1);
            work.push_back({&script, derive_seed(config.seed, {hash_string(task), i}), task + "_" + buf});
        }

    std::vector<Trajectory> out(work.size());
    auto run = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < work.size(); i += stride)
            out[i] = generate_trajectory(*work[i].script, layout, config, work[i].seed, work[i].id);
    };
    jobs = std::max(1u, jobs);
    if (jobs == 1) {
        run(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(run, j, jobs);
    }
    return out;
}

} // namespace posseq
