#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "posseq/crf.hpp"
#include "posseq/error.hpp"
#include "posseq/geometry.hpp"
#include "posseq/hmm.hpp"
#include "posseq/seed.hpp"
#include "posseq/vectorizer.hpp"

namespace posseq {

enum class VectorizerKind { Classical, Possibilistic };
enum class ClassifierKind { Hmm, Crf };

struct PipelineConfig {
    VectorizerKind vectorizer = VectorizerKind::Classical;
    VectorizerParams params;
    ClassifierKind classifier = ClassifierKind::Hmm;
    HmmTrainOptions hmm;
    CrfTrainOptions crf;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

struct ClassCount {
    std::string label;
    std::size_t samples = 0;
    std::size_t errors = 0;

    double accuracy_pct() const {
        return samples == 0 ? 0.0 : 100.0 * static_cast<double>(samples - errors) / static_cast<double>(samples);
    }
};

struct AccuracyReport {
    std::vector<ClassCount> classes; // sorted by label
    ClassCount total{"TOTAL"};
};

inline constexpr const char* kFailedPrediction = "<failed>";

struct FoldOutcome {
    std::string id;
    std::string truth;
    std::string predicted; // kFailedPrediction when the fold failed
    bool failed = false;
    std::string message;
};

struct LoocvResult {
    AccuracyReport report;
    std::vector<FoldOutcome> folds; // in trajectory-id order
    std::size_t failures = 0;
    std::vector<std::string> classes;

    /// (true, predicted) -> count over every label pair, plus failed folds.
    std::map<std::pair<std::string, std::string>, std::size_t> confusion() const {
        std::map<std::pair<std::string, std::string>, std::size_t> c;
        for (const auto& t : classes)
            for (const auto& p : classes) c[{t, p}] = 0;
        for (const auto& f : folds) ++c[{f.truth, f.predicted}];
        return c;
    }
};

using Predictor = std::function<std::string(const ObservationSequence&)>;
/// Builds a predictor from one fold's training sequences. `classes` is the
/// sorted label set of the whole dataset.
using Trainer = std::function<Predictor(std::span<const ObservationSequence> training,
                                        std::span<const std::string> classes)>;

namespace evaluation_detail {

inline std::string sequence_key(std::span<const ObservationSequence> seqs) {
    std::string key;
    for (const auto& s : seqs) {
        for (const auto& sym : s.symbols) {
            key += sym;
            key += ' ';
        }
        key += '\n';
    }
    return key;
}

// Per-class HMMs with a memo keyed by the exact training sequences: folds
// that hold out another class's trajectory reuse an identical model.
class HmmTrainer {
public:
    HmmTrainer(std::vector<std::string> alphabet, HmmTrainOptions opt, std::uint64_t seed)
        : alphabet_(std::move(alphabet)), opt_(opt), seed_(seed) {}

    Predictor operator()(std::span<const ObservationSequence> training, std::span<const std::string> classes) {
        auto models = std::make_shared<std::vector<LabeledHmm>>();
        for (const auto& label : classes) {
            std::vector<ObservationSequence> mine;
            for (const auto& s : training)
                if (s.label == label) mine.push_back(s);
            if (mine.empty()) fail(ErrorKind::EmptyTrainingSet, "no training sequences for class '" + label + "'");
            models->push_back({label, model_for(label, mine)});
        }
        return [models](const ObservationSequence& seq) { return classify_hmm(*models, seq); };
    }

private:
    HmmModel model_for(const std::string& label, std::span<const ObservationSequence> seqs) {
        const std::string key = label + '\x1f' + sequence_key(seqs);
        {
            std::lock_guard lock(mu_);
            if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        }
        HmmTrainOptions o = opt_;
        o.seed = derive_seed(seed_, {hash_string(label)});
        HmmModel m = baum_welch_train(seqs, alphabet_, o);
        std::lock_guard lock(mu_);
        return cache_.emplace(key, std::move(m)).first->second;
    }

    std::vector<std::string> alphabet_;
    HmmTrainOptions opt_;
    std::uint64_t seed_;
    std::mutex mu_;
    std::map<std::string, HmmModel> cache_;
};

} // namespace evaluation_detail

/// Trainer for the classifier named in the config, over the layout alphabet.
inline Trainer make_trainer(const PipelineConfig& config, const InterfaceLayout& layout) {
    if (config.classifier == ClassifierKind::Hmm) {
        auto t = std::make_shared<evaluation_detail::HmmTrainer>(layout.names(), config.hmm, config.seed);
        return [t](std::span<const ObservationSequence> training, std::span<const std::string> classes) {
            return (*t)(training, classes);
        };
    }
    return [alphabet = layout.names(), opt = config.crf, seed = config.seed](
               std::span<const ObservationSequence> training, std::span<const std::string>) -> Predictor {
        CrfTrainOptions o = opt;
        o.seed = seed;
        auto model = std::make_shared<CrfModel>(train_crf(training, alphabet, o));
        return [model](const ObservationSequence& seq) { return classify_crf(*model, seq); };
    };
}

/// Attraction statistics from every trajectory except `held_out`.
inline AttractionStats fold_attraction_stats(std::span<const Trajectory> dataset, const InterfaceLayout& layout,
                                             std::size_t held_out, double omega) {
    std::vector<Trajectory> training;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (i != held_out) training.push_back(dataset[i]);
    return compute_attraction_stats(layout, training, omega);
}

/// Leave-one-out cross-validation. Every fold computes attraction statistics
/// from its own training half, vectorizes, trains and classifies the held-out
/// trajectory. Folds run in id order (so input order is irrelevant) and may
/// run concurrently; a fold that throws is recorded as an error.
inline LoocvResult run_loocv(std::span<const Trajectory> dataset, const InterfaceLayout& layout,
                             const PipelineConfig& config, const Trainer& trainer) {
    if (config.vectorizer == VectorizerKind::Possibilistic) config.params.validate();

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return dataset[a].id < dataset[b].id; });
    std::set<std::string> ids, labels;
    for (const auto& t : dataset) {
        if (!t.label) fail(ErrorKind::InvalidArgument, "trajectory '" + t.id + "' has no label");
        if (!ids.insert(t.id).second) fail(ErrorKind::InvalidArgument, "duplicate trajectory id '" + t.id + "'");
        labels.insert(*t.label);
    }
    if (dataset.size() < 2 || labels.size() < 2)
        fail(ErrorKind::InvalidArgument, "LOOCV needs at least two sequences and two classes");

    LoocvResult result;
    result.classes.assign(labels.begin(), labels.end());
    const std::size_t n = dataset.size();

    // Canonical (id-sorted) view of the data.
    std::vector<Trajectory> sorted;
    sorted.reserve(n);
    for (auto i : order) sorted.push_back(dataset[i]);

    std::vector<ObservationSequence> classical;
    std::vector<std::vector<std::size_t>> counts;
    if (config.vectorizer == VectorizerKind::Classical) {
        for (const auto& t : sorted) classical.push_back(vectorize_classical(t, layout));
    } else {
        for (const auto& t : sorted) counts.push_back(kernel_counts(layout, std::span<const Trajectory>(&t, 1)));
    }

    result.folds.resize(n);
    auto run_fold = [&](std::size_t h) {
        FoldOutcome& out = result.folds[h];
        out.id = sorted[h].id;
        out.truth = *sorted[h].label;
        try {
            std::vector<ObservationSequence> seqs;
            if (config.vectorizer == VectorizerKind::Classical) {
                seqs = classical;
            } else {
                std::vector<std::size_t> total(layout.size(), 0);
                for (std::size_t i = 0; i < n; ++i)
                    if (i != h)
                        for (std::size_t a = 0; a < total.size(); ++a) total[a] += counts[i][a];
                const auto stats = attraction_stats_from_counts(layout, total, config.params.omega);
                seqs.reserve(n);
                for (const auto& t : sorted) seqs.push_back(vectorize_possibilistic(t, layout, stats, config.params));
            }
            ObservationSequence test = std::move(seqs[h]);
            seqs.erase(seqs.begin() + static_cast<std::ptrdiff_t>(h));
            const Predictor predict = trainer(seqs, result.classes);
            out.predicted = predict(test);
        } catch (const Error& e) {
            out.failed = true;
            out.predicted = kFailedPrediction;
            out.message = e.what();
        }
    };

    const unsigned jobs = std::max(1u, config.jobs);
    if (jobs == 1) {
        for (std::size_t h = 0; h < n; ++h) run_fold(h);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j)
            pool.emplace_back([&] {
                for (std::size_t h; (h = next.fetch_add(1)) < n;) run_fold(h);
            });
    }

    std::map<std::string, ClassCount> per_class;
    for (const auto& l : result.classes) per_class[l].label = l;
    for (const auto& f : result.folds) {
        auto& c = per_class[f.truth];
        ++c.samples;
        ++result.report.total.samples;
        if (f.predicted != f.truth) {
            ++c.errors;
            ++result.report.total.errors;
        }
        if (f.failed) ++result.failures;
    }
    for (auto& [label, c] : per_class) result.report.classes.push_back(c);
    return result;
}

inline LoocvResult run_loocv(std::span<const Trajectory> dataset, const InterfaceLayout& layout,
                             const PipelineConfig& config) {
    return run_loocv(dataset, layout, config, make_trainer(config, layout));
}

struct SweepPoint {
    double omega = 0.0;
    LoocvResult result;
};

/// One full possibilistic LOOCV per omega, statistics and sequences rebuilt
/// every time.
inline std::vector<SweepPoint> omega_sweep(std::span<const Trajectory> dataset, const InterfaceLayout& layout,
                                           const PipelineConfig& base, std::span<const double> omegas) {
    std::vector<SweepPoint> out;
    for (double w : omegas) {
        if (!std::isfinite(w) || w < 0.0) fail(ErrorKind::InvalidArgument, "sweep omegas must be finite and >= 0");
    }
    for (double w : omegas) {
        PipelineConfig c = base;
        c.vectorizer = VectorizerKind::Possibilistic;
        c.params.omega = w;
        out.push_back({w, run_loocv(dataset, layout, c)});
    }
    return out;
}

// ---- CSV ------------------------------------------------------------------

inline std::string format_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string report_csv(const AccuracyReport& r) {
    std::string out = "class,samples,errors,accuracy_pct\n";
    auto row = [&](const ClassCount& c) {
        out += c.label + ',' + std::to_string(c.samples) + ',' + std::to_string(c.errors) + ',' +
               format_pct(c.accuracy_pct()) + '\n';
    };
    for (const auto& c : r.classes) row(c);
    row(r.total);
    return out;
}

inline std::string confusion_csv(const LoocvResult& r) {
    std::string out = "true,predicted,count\n";
    for (const auto& [key, count] : r.confusion())
        out += key.first + ',' + key.second + ',' + std::to_string(count) + '\n';
    return out;
}

inline std::string format_omega(double w) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", w);
    return buf;
}

inline std::string sweep_csv(std::span<const SweepPoint> points) {
    std::string out = "omega,accuracy_pct\n";
    for (const auto& p : points) out += format_omega(p.omega) + ',' + format_pct(p.result.report.total.accuracy_pct()) + '\n';
    return out;
}

} // namespace posseq
