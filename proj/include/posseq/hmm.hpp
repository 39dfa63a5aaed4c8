#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "posseq/error.hpp"
#include "posseq/matrix.hpp"
#include "posseq/seed.hpp"
#include "posseq/vectorizer.hpp"

namespace posseq {

struct HmmTrainMeta {
    std::uint64_t seed = 0;
    std::size_t iters = 0;
    double loglik = 0.0;
};

/// Discrete-emission HMM: transition A (states x states), emission B
/// (states x symbols) and initial distribution over states.
struct HmmModel {
    std::vector<std::string> alphabet;
    Matrix transition;
    Matrix emission;
    std::vector<double> initial;
    HmmTrainMeta meta;

    std::size_t n_states() const noexcept { return initial.size(); }
    std::size_t n_symbols() const noexcept { return alphabet.size(); }
};

inline constexpr double kStochasticTolerance = 1e-9;

inline void validate(const HmmModel& model) {
    const std::size_t n = model.n_states();
    const std::size_t k = model.n_symbols();
    if (n == 0) fail(ErrorKind::InvalidModel, "HMM has no states");
    if (k == 0) fail(ErrorKind::InvalidModel, "HMM has an empty alphabet");
    if (model.transition.rows != n || model.transition.cols != n)
        fail(ErrorKind::InvalidModel, "transition matrix must be n_states x n_states");
    if (model.emission.rows != n || model.emission.cols != k)
        fail(ErrorKind::InvalidModel, "emission matrix must be n_states x alphabet size");
    auto check = [](std::span<const double> row, const char* what) {
        double sum = 0.0;
        for (double v : row) {
            if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::InvalidModel, std::string(what) + " has a bad entry");
            sum += v;
        }
        if (std::abs(sum - 1.0) > kStochasticTolerance)
            fail(ErrorKind::InvalidModel, std::string(what) + " row does not sum to 1");
    };
    check(model.initial, "initial distribution");
    for (std::size_t i = 0; i < n; ++i) {
        check(model.transition.row(i), "transition matrix");
        check(model.emission.row(i), "emission matrix");
    }
}

/// Maps symbols to column indices of an alphabet.
class SymbolIndex {
public:
    explicit SymbolIndex(std::span<const std::string> alphabet) {
        for (std::size_t i = 0; i < alphabet.size(); ++i)
            if (!map_.emplace(alphabet[i], static_cast<int>(i)).second)
                fail(ErrorKind::InvalidArgument, "duplicate alphabet symbol '" + alphabet[i] + "'");
    }

    std::vector<int> encode(const ObservationSequence& seq) const {
        std::vector<int> out;
        out.reserve(seq.size());
        for (const auto& s : seq.symbols) {
            auto it = map_.find(s);
            if (it == map_.end()) fail(ErrorKind::UnknownSymbol, "symbol '" + s + "' is not in the alphabet");
            out.push_back(it->second);
        }
        return out;
    }

private:
    std::unordered_map<std::string, int> map_;
};

namespace hmm_detail {

// Scaled forward pass. Fills alpha (T x N, each row normalized) and the scale
// factors; returns log P(X).
inline double forward(const HmmModel& m, std::span<const int> obs, std::vector<double>& alpha,
                      std::vector<double>& scale) {
    const std::size_t n = m.n_states(), T = obs.size();
    alpha.assign(T * n, 0.0);
    scale.assign(T, 0.0);
    double loglik = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        double* cur = alpha.data() + t * n;
        const auto x = static_cast<std::size_t>(obs[t]);
        if (t == 0) {
            for (std::size_t i = 0; i < n; ++i) cur[i] = m.initial[i] * m.emission(i, x);
        } else {
            const double* prev = alpha.data() + (t - 1) * n;
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) s += prev[i] * m.transition(i, j);
                cur[j] = s * m.emission(j, x);
            }
        }
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += cur[i];
        scale[t] = c;
        if (!(c > 0.0)) return -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) cur[i] /= c;
        loglik += std::log(c);
    }
    return loglik;
}

// Maximizes sum_k counts_k log p_k over the simplex with p_k >= floor. The
// solution is p_k = max(floor, counts_k / tau); entries are pinned at the
// floor until the remaining ones clear it.
inline void project_with_floor(std::span<const double> counts, std::span<double> out, double floor) {
    const std::size_t k = counts.size();
    std::vector<bool> pinned(k, false);
    for (;;) {
        std::size_t n_pinned = 0;
        double free_total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (pinned[i]) ++n_pinned;
            else free_total += counts[i];
        }
        const double mass = 1.0 - floor * static_cast<double>(n_pinned);
        const std::size_t n_free = k - n_pinned;
        bool changed = false;
        for (std::size_t i = 0; i < k; ++i) {
            if (pinned[i]) {
                out[i] = floor;
                continue;
            }
            out[i] = free_total > 0.0 ? mass * counts[i] / free_total : mass / static_cast<double>(n_free);
            if (out[i] < floor) {
                pinned[i] = true;
                changed = true;
            }
        }
        if (!changed) return;
    }
}

} // namespace hmm_detail

/// log P(X | model) by the scaled forward recursion.
inline double log_likelihood(const HmmModel& model, const ObservationSequence& seq) {
    if (seq.empty()) fail(ErrorKind::EmptySequence, "cannot score an empty sequence");
    const auto obs = SymbolIndex(model.alphabet).encode(seq);
    std::vector<double> alpha, scale;
    return hmm_detail::forward(model, obs, alpha, scale);
}

/// Most probable state path; ties go to the lowest state index.
inline std::vector<std::size_t> viterbi_decode(const HmmModel& model, const ObservationSequence& seq) {
    if (seq.empty()) fail(ErrorKind::EmptySequence, "cannot decode an empty sequence");
    const auto obs = SymbolIndex(model.alphabet).encode(seq);
    const std::size_t n = model.n_states(), T = obs.size();
    auto lg = [](double v) { return std::log(v); };

    std::vector<double> delta(n), next(n);
    std::vector<std::size_t> back(T * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        delta[i] = lg(model.initial[i]) + lg(model.emission(i, static_cast<std::size_t>(obs[0])));
    for (std::size_t t = 1; t < T; ++t) {
        const auto x = static_cast<std::size_t>(obs[t]);
        for (std::size_t j = 0; j < n; ++j) {
            std::size_t arg = 0;
            double best = delta[0] + lg(model.transition(0, j));
            for (std::size_t i = 1; i < n; ++i) {
                const double v = delta[i] + lg(model.transition(i, j));
                if (v > best) {
                    best = v;
                    arg = i;
                }
            }
            back[t * n + j] = arg;
            next[j] = best + lg(model.emission(j, x));
        }
        std::swap(delta, next);
    }
    std::vector<std::size_t> path(T);
    path[T - 1] = static_cast<std::size_t>(std::max_element(delta.begin(), delta.end()) - delta.begin());
    for (std::size_t t = T - 1; t > 0; --t) path[t - 1] = back[t * n + path[t]];
    return path;
}

/// Joint log P(states, X) of one explicit path.
inline double path_log_probability(const HmmModel& model, const ObservationSequence& seq,
                                   std::span<const std::size_t> path) {
    const auto obs = SymbolIndex(model.alphabet).encode(seq);
    if (path.size() != obs.size()) fail(ErrorKind::LengthMismatch, "path and sequence lengths differ");
    if (obs.empty()) fail(ErrorKind::EmptySequence, "empty sequence");
    double lp = std::log(model.initial[path[0]]) + std::log(model.emission(path[0], obs[0]));
    for (std::size_t t = 1; t < obs.size(); ++t)
        lp += std::log(model.transition(path[t - 1], path[t])) +
              std::log(model.emission(path[t], static_cast<std::size_t>(obs[t])));
    return lp;
}

struct HmmTrainOptions {
    std::size_t n_states = 5;
    std::uint64_t seed = 0;
    std::size_t max_iter = 100;
    double tol = 1e-4; // stop once an iteration improves total log-likelihood by less
    std::size_t restarts = 3;
    double floor = 1e-6;
};

struct HmmTrainResult {
    HmmModel model;
    std::vector<std::vector<double>> traces; // total log-likelihood per E-step, one per restart
    std::size_t best_restart = 0;
};

/// Multi-sequence Baum-Welch with pooled expected counts, floored M-step and
/// seeded random restarts. Empty sequences carry no information and are skipped.
inline HmmTrainResult baum_welch_train_traced(std::span<const ObservationSequence> seqs,
                                              std::span<const std::string> alphabet, const HmmTrainOptions& opt) {
    if (opt.n_states == 0) fail(ErrorKind::InvalidArgument, "n_states must be >= 1");
    if (alphabet.empty()) fail(ErrorKind::InvalidArgument, "empty alphabet");
    if (opt.restarts == 0) fail(ErrorKind::InvalidArgument, "restarts must be >= 1");
    const std::size_t n = opt.n_states, k = alphabet.size();
    const std::size_t widest = std::max(n, k);
    if (!(opt.floor >= 0.0) || opt.floor * static_cast<double>(widest) >= 1.0)
        fail(ErrorKind::InvalidArgument, "probability floor too large for the model size");

    const SymbolIndex index(alphabet);
    std::vector<std::vector<int>> data;
    for (const auto& s : seqs)
        if (!s.empty()) data.push_back(index.encode(s));
    if (data.empty()) fail(ErrorKind::EmptyTrainingSet, "no non-empty training sequences");

    HmmTrainResult result;
    double best_loglik = -std::numeric_limits<double>::infinity();

    std::vector<double> alpha, beta, scale;
    for (std::size_t r = 0; r < opt.restarts; ++r) {
        HmmModel m;
        m.alphabet.assign(alphabet.begin(), alphabet.end());
        m.transition = Matrix(n, n);
        m.emission = Matrix(n, k);
        m.initial.assign(n, 0.0);
        m.meta.seed = opt.seed;

        std::mt19937_64 rng(derive_seed(opt.seed, {r}));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        {
            std::vector<double> raw(widest);
            auto fill = [&](std::span<double> dst) {
                for (std::size_t i = 0; i < dst.size(); ++i) raw[i] = unit(rng);
                hmm_detail::project_with_floor(std::span<const double>(raw.data(), dst.size()), dst, opt.floor);
            };
            fill(m.initial);
            for (std::size_t i = 0; i < n; ++i) fill(m.transition.row(i));
            for (std::size_t i = 0; i < n; ++i) fill(m.emission.row(i));
        }

        std::vector<double> trace;
        std::vector<double> init_counts(n);
        Matrix trans_counts(n, n), emit_counts(n, k);
        double prev = -std::numeric_limits<double>::infinity();
        double loglik = prev;
        std::size_t it = 0;
        for (;; ++it) {
            std::fill(init_counts.begin(), init_counts.end(), 0.0);
            std::fill(trans_counts.data.begin(), trans_counts.data.end(), 0.0);
            std::fill(emit_counts.data.begin(), emit_counts.data.end(), 0.0);
            loglik = 0.0;
            for (const auto& obs : data) {
                const std::size_t T = obs.size();
                loglik += hmm_detail::forward(m, obs, alpha, scale);
                beta.assign(T * n, 1.0);
                for (std::size_t t = T - 1; t-- > 0;) {
                    const auto x = static_cast<std::size_t>(obs[t + 1]);
                    const double* nb = beta.data() + (t + 1) * n;
                    double* cb = beta.data() + t * n;
                    for (std::size_t i = 0; i < n; ++i) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) s += m.transition(i, j) * m.emission(j, x) * nb[j];
                        cb[i] = s / scale[t + 1];
                    }
                }
                for (std::size_t t = 0; t < T; ++t) {
                    const double* a = alpha.data() + t * n;
                    const double* b = beta.data() + t * n;
                    const auto x = static_cast<std::size_t>(obs[t]);
                    for (std::size_t i = 0; i < n; ++i) {
                        const double g = a[i] * b[i];
                        if (t == 0) init_counts[i] += g;
                        emit_counts(i, x) += g;
                    }
                    if (t + 1 < T) {
                        const auto xn = static_cast<std::size_t>(obs[t + 1]);
                        const double* nb = beta.data() + (t + 1) * n;
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < n; ++j)
                                trans_counts(i, j) +=
                                    a[i] * m.transition(i, j) * m.emission(j, xn) * nb[j] / scale[t + 1];
                    }
                }
            }
            trace.push_back(loglik);
            if (it >= opt.max_iter || (it > 0 && loglik - prev < opt.tol)) break;
            prev = loglik;
            hmm_detail::project_with_floor(init_counts, m.initial, opt.floor);
            for (std::size_t i = 0; i < n; ++i) {
                hmm_detail::project_with_floor(trans_counts.row(i), m.transition.row(i), opt.floor);
                hmm_detail::project_with_floor(emit_counts.row(i), m.emission.row(i), opt.floor);
            }
        }
        m.meta.iters = it;
        m.meta.loglik = loglik;
        if (r == 0 || loglik > best_loglik) {
            best_loglik = loglik;
            result.model = std::move(m);
            result.best_restart = r;
        }
        result.traces.push_back(std::move(trace));
    }
    return result;
}

inline HmmModel baum_welch_train(std::span<const ObservationSequence> seqs, std::span<const std::string> alphabet,
                                 const HmmTrainOptions& opt) {
    return baum_welch_train_traced(seqs, alphabet, opt).model;
}

struct LabeledHmm {
    std::string label;
    HmmModel model;
};

/// Class whose model gives the highest log-likelihood; ties go to the
/// earlier entry.
inline std::string classify_hmm(std::span<const LabeledHmm> models, const ObservationSequence& seq) {
    if (models.size() < 2) fail(ErrorKind::InvalidArgument, "need at least two class models");
    for (const auto& m : models)
        if (m.model.alphabet != models.front().model.alphabet)
            fail(ErrorKind::InvalidArgument, "class models do not share one alphabet");
    std::size_t best = 0;
    double best_ll = log_likelihood(models[0].model, seq);
    for (std::size_t c = 1; c < models.size(); ++c) {
        const double ll = log_likelihood(models[c].model, seq);
        if (ll > best_ll) {
            best_ll = ll;
            best = c;
        }
    }
    return models[best].label;
}

} // namespace posseq
