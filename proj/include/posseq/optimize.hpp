#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace posseq {

/// Objective callback: returns f(x) and writes df/dx into `grad`.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsOptions {
    double grad_tol = 1e-5; // stop once the gradient infinity-norm drops below
    std::size_t max_iter = 200;
    std::size_t history = 7;
    double armijo = 1e-4;
    std::size_t max_backtracks = 60;
};

struct LbfgsResult {
    std::vector<double> x;
    double value = 0.0;
    double grad_inf = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> trace; // objective at every accepted iterate, starting with x0
};

namespace optimize_detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace optimize_detail

/// Limited-memory BFGS ascent with a backtracking Armijo line search. Every
/// accepted step strictly increases the objective.
inline LbfgsResult lbfgs_maximize(const Objective& objective, std::vector<double> x0, const LbfgsOptions& opt) {
    using optimize_detail::dot;
    const std::size_t n = x0.size();
    LbfgsResult res;
    res.x = std::move(x0);

    // Work on the minimization problem h = -f throughout.
    std::vector<double> g(n), g_new(n), x_new(n), dir(n);
    auto eval = [&](std::span<const double> x, std::span<double> grad) {
        const double v = objective(x, grad);
        for (double& gi : grad) gi = -gi;
        return -v;
    };

    double h = eval(res.x, g);
    res.trace.push_back(-h);

    struct Pair {
        std::vector<double> s, y;
        double rho;
    };
    std::deque<Pair> mem;
    std::vector<double> alpha(opt.history);

    for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
        if (optimize_detail::inf_norm(g) < opt.grad_tol) {
            res.converged = true;
            break;
        }

        // Two-loop recursion: dir = -H g.
        std::copy(g.begin(), g.end(), dir.begin());
        for (std::size_t k = mem.size(); k-- > 0;) {
            alpha[k] = mem[k].rho * dot(mem[k].s, dir);
            for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha[k] * mem[k].y[i];
        }
        if (!mem.empty()) {
            const auto& last = mem.back();
            const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
            for (double& d : dir) d *= gamma;
        }
        for (std::size_t k = 0; k < mem.size(); ++k) {
            const double beta = mem[k].rho * dot(mem[k].y, dir);
            for (std::size_t i = 0; i < n; ++i) dir[i] += (alpha[k] - beta) * mem[k].s[i];
        }
        for (double& d : dir) d = -d;

        double slope = dot(dir, g);
        if (!(slope < 0.0)) {
            mem.clear();
            for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
            slope = dot(dir, g);
        }

        double step = mem.empty() ? std::min(1.0, 1.0 / std::sqrt(dot(g, g))) : 1.0;
        bool accepted = false;
        double h_new = h;
        for (std::size_t bt = 0; bt < opt.max_backtracks; ++bt, step *= 0.5) {
            for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + step * dir[i];
            h_new = eval(x_new, g_new);
            if (std::isfinite(h_new) && h_new <= h + opt.armijo * step * slope && h_new < h) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!mem.empty()) {
                mem.clear(); // retry from steepest descent
                continue;
            }
            break; // no further progress possible at machine precision
        }

        Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            p.s[i] = x_new[i] - res.x[i];
            p.y[i] = g_new[i] - g[i];
        }
        const double sy = dot(p.s, p.y);
        if (sy > 1e-12 * std::sqrt(dot(p.s, p.s) * dot(p.y, p.y))) {
            p.rho = 1.0 / sy;
            mem.push_back(std::move(p));
            if (mem.size() > opt.history) mem.pop_front();
        }
        std::swap(res.x, x_new);
        std::swap(g, g_new);
        h = h_new;
        res.trace.push_back(-h);
    }
    if (!res.converged && optimize_detail::inf_norm(g) < opt.grad_tol) res.converged = true;
    res.value = -h;
    res.grad_inf = optimize_detail::inf_norm(g);
    return res;
}

} // namespace posseq
