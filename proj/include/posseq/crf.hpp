#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "posseq/error.hpp"
#include "posseq/hmm.hpp"
#include "posseq/optimize.hpp"
#include "posseq/vectorizer.hpp"

namespace posseq {

struct CrfTrainMeta {
    std::uint64_t seed = 0;
    std::size_t iters = 0;
    double objective = 0.0;
    double grad_inf = 0.0;
};

/// Linear-chain CRF with indicator features: one transition feature per
/// (previous label, label) and one state feature per (label, symbol).
/// Weight layout: |Y|^2 transition weights (row = previous label), then
/// |Y|*|M| state weights (row = label).
struct CrfModel {
    std::vector<std::string> labels;
    std::vector<std::string> alphabet;
    double sigma2 = 10.0; // Gaussian prior variance; infinity disables the penalty
    std::vector<double> weights;
    CrfTrainMeta meta;

    std::size_t n_labels() const noexcept { return labels.size(); }
    std::size_t n_symbols() const noexcept { return alphabet.size(); }
    std::size_t n_features() const noexcept { return n_labels() * n_labels() + n_labels() * n_symbols(); }

    std::size_t transition_index(std::size_t prev, std::size_t cur) const noexcept { return prev * n_labels() + cur; }
    std::size_t state_index(std::size_t label, std::size_t symbol) const noexcept {
        return n_labels() * n_labels() + label * n_symbols() + symbol;
    }
    double transition(std::size_t prev, std::size_t cur) const { return weights[transition_index(prev, cur)]; }
    double state(std::size_t label, std::size_t symbol) const { return weights[state_index(label, symbol)]; }

    static CrfModel zeros(std::vector<std::string> labels, std::vector<std::string> alphabet, double sigma2) {
        CrfModel m;
        m.labels = std::move(labels);
        m.alphabet = std::move(alphabet);
        m.sigma2 = sigma2;
        m.weights.assign(m.n_features(), 0.0);
        return m;
    }
};

inline void validate(const CrfModel& m) {
    if (m.labels.empty()) fail(ErrorKind::InvalidModel, "CRF has no labels");
    if (m.alphabet.empty()) fail(ErrorKind::InvalidModel, "CRF has an empty alphabet");
    if (m.weights.size() != m.n_features()) fail(ErrorKind::InvalidModel, "CRF weight vector has the wrong length");
    for (double w : m.weights)
        if (!std::isfinite(w)) fail(ErrorKind::InvalidModel, "CRF weight is not finite");
    if (!(m.sigma2 > 0.0)) fail(ErrorKind::InvalidModel, "sigma2 must be positive");
    if (std::set<std::string>(m.labels.begin(), m.labels.end()).size() != m.labels.size())
        fail(ErrorKind::InvalidModel, "duplicate CRF label");
}

/// A sequence with an explicit label path, both encoded as indices.
struct CrfExample {
    std::vector<int> obs;
    std::vector<int> labels;
};

namespace crf_detail {

inline double log_sum_exp(std::span<const double> v) {
    const double top = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(top)) return top;
    double s = 0.0;
    for (double x : v) s += std::exp(x - top);
    return top + std::log(s);
}

// Log-space forward recursion; returns log Z.
inline double log_partition(const CrfModel& m, std::span<const int> obs) {
    const std::size_t Y = m.n_labels();
    std::vector<double> a(Y), next(Y), tmp(Y);
    for (std::size_t y = 0; y < Y; ++y) a[y] = m.state(y, static_cast<std::size_t>(obs[0]));
    for (std::size_t t = 1; t < obs.size(); ++t) {
        for (std::size_t y = 0; y < Y; ++y) {
            for (std::size_t p = 0; p < Y; ++p) tmp[p] = a[p] + m.transition(p, y);
            next[y] = log_sum_exp(tmp) + m.state(y, static_cast<std::size_t>(obs[t]));
        }
        std::swap(a, next);
    }
    return log_sum_exp(a);
}

inline double score(const CrfModel& m, std::span<const int> obs, std::span<const int> labels) {
    double s = 0.0;
    for (std::size_t t = 0; t < obs.size(); ++t) {
        s += m.state(static_cast<std::size_t>(labels[t]), static_cast<std::size_t>(obs[t]));
        if (t > 0) s += m.transition(static_cast<std::size_t>(labels[t - 1]), static_cast<std::size_t>(labels[t]));
    }
    return s;
}

inline void check_example(const CrfModel& m, const CrfExample& ex) {
    if (ex.obs.size() != ex.labels.size()) fail(ErrorKind::LengthMismatch, "label path length differs from sequence");
    for (int x : ex.obs)
        if (x < 0 || static_cast<std::size_t>(x) >= m.n_symbols())
            fail(ErrorKind::UnknownSymbol, "symbol index out of range");
    for (int y : ex.labels)
        if (y < 0 || static_cast<std::size_t>(y) >= m.n_labels())
            fail(ErrorKind::InvalidArgument, "label index out of range");
}

inline double penalty(const CrfModel& m, std::span<const double> w) {
    if (std::isinf(m.sigma2)) return 0.0;
    double s = 0.0;
    for (double v : w) s += v * v;
    return s / (2.0 * m.sigma2);
}

// Objective and gradient by a scaled forward-backward pass in the
// exponentiated domain. Potentials are shifted by their maxima, so the only
// loss of range comes from weight spreads beyond ~700, where the log-space
// route takes over.
inline double objective_and_gradient(const CrfModel& m, std::span<const CrfExample> data, std::span<double> grad) {
    const std::size_t Y = m.n_labels(), M = m.n_symbols();
    std::fill(grad.begin(), grad.end(), 0.0);

    const double wmax = *std::max_element(m.weights.begin(), m.weights.end());
    const double wmin = *std::min_element(m.weights.begin(), m.weights.end());
    const bool use_log_space = (wmax - wmin) > 300.0;

    // exp(transition - tmax) and exp(state - per-symbol max)
    double tmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < Y * Y; ++i) tmax = std::max(tmax, m.weights[i]);
    std::vector<double> et(Y * Y), es(Y * M), smax(M, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < Y * Y; ++i) et[i] = std::exp(m.weights[i] - tmax);
    for (std::size_t y = 0; y < Y; ++y)
        for (std::size_t x = 0; x < M; ++x) smax[x] = std::max(smax[x], m.state(y, x));
    for (std::size_t y = 0; y < Y; ++y)
        for (std::size_t x = 0; x < M; ++x) es[y * M + x] = std::exp(m.state(y, x) - smax[x]);

    double total = 0.0;
    std::vector<double> alpha, beta, scale, la, lb, tmp(Y);
    for (const auto& ex : data) {
        const std::size_t T = ex.obs.size();
        if (T == 0) continue;
        total += score(m, ex.obs, ex.labels);
        for (std::size_t t = 0; t < T; ++t) {
            const auto y = static_cast<std::size_t>(ex.labels[t]);
            grad[m.state_index(y, static_cast<std::size_t>(ex.obs[t]))] += 1.0;
            if (t > 0) grad[m.transition_index(static_cast<std::size_t>(ex.labels[t - 1]), y)] += 1.0;
        }

        if (!use_log_space) {
            alpha.assign(T * Y, 0.0);
            beta.assign(T * Y, 1.0);
            scale.assign(T, 0.0);
            double logz = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                const auto x = static_cast<std::size_t>(ex.obs[t]);
                double* cur = alpha.data() + t * Y;
                for (std::size_t y = 0; y < Y; ++y) {
                    double s = 1.0;
                    if (t > 0) {
                        s = 0.0;
                        const double* prev = alpha.data() + (t - 1) * Y;
                        for (std::size_t p = 0; p < Y; ++p) s += prev[p] * et[p * Y + y];
                    }
                    cur[y] = s * es[y * M + x];
                }
                double c = 0.0;
                for (std::size_t y = 0; y < Y; ++y) c += cur[y];
                scale[t] = c;
                for (std::size_t y = 0; y < Y; ++y) cur[y] /= c;
                logz += std::log(c) + smax[x] + (t > 0 ? tmax : 0.0);
            }
            total -= logz;
            for (std::size_t t = T - 1; t-- > 0;) {
                const auto x = static_cast<std::size_t>(ex.obs[t + 1]);
                const double* nb = beta.data() + (t + 1) * Y;
                double* cb = beta.data() + t * Y;
                for (std::size_t y = 0; y < Y; ++y) {
                    double s = 0.0;
                    for (std::size_t q = 0; q < Y; ++q) s += et[y * Y + q] * es[q * M + x] * nb[q];
                    cb[y] = s / scale[t + 1];
                }
            }
            for (std::size_t t = 0; t < T; ++t) {
                const auto x = static_cast<std::size_t>(ex.obs[t]);
                const double* a = alpha.data() + t * Y;
                const double* b = beta.data() + t * Y;
                for (std::size_t y = 0; y < Y; ++y) grad[m.state_index(y, x)] -= a[y] * b[y];
                if (t + 1 < T) {
                    const auto xn = static_cast<std::size_t>(ex.obs[t + 1]);
                    const double* nb = beta.data() + (t + 1) * Y;
                    for (std::size_t p = 0; p < Y; ++p)
                        for (std::size_t q = 0; q < Y; ++q)
                            grad[m.transition_index(p, q)] -=
                                a[p] * et[p * Y + q] * es[q * M + xn] * nb[q] / scale[t + 1];
                }
            }
        } else {
            la.assign(T * Y, 0.0);
            lb.assign(T * Y, 0.0);
            for (std::size_t t = 0; t < T; ++t) {
                const auto x = static_cast<std::size_t>(ex.obs[t]);
                for (std::size_t y = 0; y < Y; ++y) {
                    double s = 0.0;
                    if (t > 0) {
                        for (std::size_t p = 0; p < Y; ++p) tmp[p] = la[(t - 1) * Y + p] + m.transition(p, y);
                        s = log_sum_exp(tmp);
                    }
                    la[t * Y + y] = s + m.state(y, x);
                }
            }
            const double logz = log_sum_exp(std::span<const double>(la.data() + (T - 1) * Y, Y));
            total -= logz;
            for (std::size_t t = T - 1; t-- > 0;) {
                const auto x = static_cast<std::size_t>(ex.obs[t + 1]);
                for (std::size_t y = 0; y < Y; ++y) {
                    for (std::size_t q = 0; q < Y; ++q)
                        tmp[q] = m.transition(y, q) + m.state(q, x) + lb[(t + 1) * Y + q];
                    lb[t * Y + y] = log_sum_exp(tmp);
                }
            }
            for (std::size_t t = 0; t < T; ++t) {
                const auto x = static_cast<std::size_t>(ex.obs[t]);
                for (std::size_t y = 0; y < Y; ++y)
                    grad[m.state_index(y, x)] -= std::exp(la[t * Y + y] + lb[t * Y + y] - logz);
                if (t + 1 < T) {
                    const auto xn = static_cast<std::size_t>(ex.obs[t + 1]);
                    for (std::size_t p = 0; p < Y; ++p)
                        for (std::size_t q = 0; q < Y; ++q)
                            grad[m.transition_index(p, q)] -=
                                std::exp(la[t * Y + p] + m.transition(p, q) + m.state(q, xn) +
                                         lb[(t + 1) * Y + q] - logz);
                }
            }
        }
    }

    if (!std::isinf(m.sigma2))
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] -= m.weights[k] / m.sigma2;
    return total - penalty(m, m.weights);
}

} // namespace crf_detail

/// Index lookup for the model's label set.
inline int label_index(const CrfModel& m, const std::string& label) {
    auto it = std::find(m.labels.begin(), m.labels.end(), label);
    if (it == m.labels.end()) fail(ErrorKind::InvalidArgument, "label '" + label + "' is not in the model");
    return static_cast<int>(it - m.labels.begin());
}

/// Encodes labeled sequences as examples whose label path repeats the
/// sequence's class at every step.
inline std::vector<CrfExample> encode_constant_paths(const CrfModel& m, std::span<const ObservationSequence> corpus) {
    const SymbolIndex index(m.alphabet);
    std::vector<CrfExample> out;
    out.reserve(corpus.size());
    for (const auto& s : corpus) {
        if (!s.label) fail(ErrorKind::InvalidArgument, "CRF training sequence '" + s.source + "' has no label");
        CrfExample ex;
        ex.obs = index.encode(s);
        ex.labels.assign(ex.obs.size(), label_index(m, *s.label));
        out.push_back(std::move(ex));
    }
    return out;
}

/// log Z(X) by the log-space forward recursion.
inline double log_partition(const CrfModel& model, const ObservationSequence& seq) {
    if (seq.empty()) fail(ErrorKind::EmptySequence, "cannot compute log Z of an empty sequence");
    const auto obs = SymbolIndex(model.alphabet).encode(seq);
    return crf_detail::log_partition(model, obs);
}

/// Penalized conditional log-likelihood over explicit label paths.
inline double conditional_log_likelihood(const CrfModel& model, std::span<const CrfExample> data) {
    double total = 0.0;
    for (const auto& ex : data) {
        crf_detail::check_example(model, ex);
        if (ex.obs.empty()) continue;
        total += crf_detail::score(model, ex.obs, ex.labels) - crf_detail::log_partition(model, ex.obs);
    }
    return total - crf_detail::penalty(model, model.weights);
}

inline double conditional_log_likelihood(const CrfModel& model, std::span<const ObservationSequence> corpus) {
    const auto data = encode_constant_paths(model, corpus);
    return conditional_log_likelihood(model, std::span<const CrfExample>(data));
}

/// Empirical minus expected feature counts, minus w / sigma^2.
inline std::vector<double> gradient(const CrfModel& model, std::span<const CrfExample> data) {
    for (const auto& ex : data) crf_detail::check_example(model, ex);
    std::vector<double> g(model.n_features());
    crf_detail::objective_and_gradient(model, data, g);
    return g;
}

inline std::vector<double> gradient(const CrfModel& model, std::span<const ObservationSequence> corpus) {
    const auto data = encode_constant_paths(model, corpus);
    return gradient(model, std::span<const CrfExample>(data));
}

struct CrfTrainOptions {
    double sigma2 = 10.0;
    double tol = 1e-3; // gradient infinity-norm
    std::size_t max_iter = 200;
    std::uint64_t seed = 0;
};

struct CrfTrainResult {
    CrfModel model;
    std::vector<double> trace; // objective over accepted iterates
};

/// Maximizes the penalized conditional log-likelihood from zero weights.
/// The optimizer path is deterministic, so the seed is only recorded.
inline CrfTrainResult train_crf_examples(std::span<const CrfExample> data, std::vector<std::string> labels,
                                         std::vector<std::string> alphabet, const CrfTrainOptions& opt) {
    if (!(opt.sigma2 > 0.0)) fail(ErrorKind::InvalidArgument, "sigma2 must be positive");
    CrfModel model = CrfModel::zeros(std::move(labels), std::move(alphabet), opt.sigma2);
    for (const auto& ex : data) crf_detail::check_example(model, ex);

    Objective f = [&](std::span<const double> w, std::span<double> g) {
        model.weights.assign(w.begin(), w.end());
        return crf_detail::objective_and_gradient(model, data, g);
    };
    LbfgsOptions lo;
    lo.grad_tol = opt.tol;
    lo.max_iter = opt.max_iter;
    auto res = lbfgs_maximize(f, std::vector<double>(model.n_features(), 0.0), lo);

    model.weights = std::move(res.x);
    model.meta = {opt.seed, res.iterations, res.value, res.grad_inf};
    return {std::move(model), std::move(res.trace)};
}

/// Trains on labeled sequences; labels are the sorted distinct classes.
inline CrfTrainResult train_crf_traced(std::span<const ObservationSequence> corpus,
                                       std::vector<std::string> alphabet, const CrfTrainOptions& opt) {
    std::set<std::string> classes;
    for (const auto& s : corpus) {
        if (!s.label) fail(ErrorKind::InvalidArgument, "CRF training sequence '" + s.source + "' has no label");
        classes.insert(*s.label);
    }
    if (classes.size() < 2) fail(ErrorKind::DegenerateCorpus, "CRF training needs at least two classes");
    CrfModel shape = CrfModel::zeros({classes.begin(), classes.end()}, std::move(alphabet), opt.sigma2);
    const auto data = encode_constant_paths(shape, corpus);
    return train_crf_examples(data, std::move(shape.labels), std::move(shape.alphabet), opt);
}

inline CrfModel train_crf(std::span<const ObservationSequence> corpus, std::vector<std::string> alphabet,
                          const CrfTrainOptions& opt) {
    return train_crf_traced(corpus, std::move(alphabet), opt).model;
}

/// Highest-scoring label path (indices into model.labels); ties go to the
/// lowest label index.
inline std::vector<std::size_t> viterbi_labels(const CrfModel& model, const ObservationSequence& seq) {
    if (seq.empty()) fail(ErrorKind::EmptySequence, "cannot decode an empty sequence");
    const auto obs = SymbolIndex(model.alphabet).encode(seq);
    const std::size_t Y = model.n_labels(), T = obs.size();
    std::vector<double> delta(Y), next(Y);
    std::vector<std::size_t> back(T * Y, 0);
    for (std::size_t y = 0; y < Y; ++y) delta[y] = model.state(y, static_cast<std::size_t>(obs[0]));
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t y = 0; y < Y; ++y) {
            std::size_t arg = 0;
            double best = delta[0] + model.transition(0, y);
            for (std::size_t p = 1; p < Y; ++p) {
                const double v = delta[p] + model.transition(p, y);
                if (v > best) {
                    best = v;
                    arg = p;
                }
            }
            back[t * Y + y] = arg;
            next[y] = best + model.state(y, static_cast<std::size_t>(obs[t]));
        }
        std::swap(delta, next);
    }
    std::vector<std::size_t> path(T);
    path[T - 1] = static_cast<std::size_t>(std::max_element(delta.begin(), delta.end()) - delta.begin());
    for (std::size_t t = T - 1; t > 0; --t) path[t - 1] = back[t * Y + path[t]];
    return path;
}

/// Majority label of the Viterbi path; ties go to the lowest label index.
inline std::string classify_crf(const CrfModel& model, const ObservationSequence& seq) {
    const auto path = viterbi_labels(model, seq);
    std::vector<std::size_t> votes(model.n_labels(), 0);
    for (auto y : path) ++votes[y];
    const auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();
    return model.labels[static_cast<std::size_t>(best)];
}

} // namespace posseq
