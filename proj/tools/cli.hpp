#pragma once

// Command-line front end. Kept in a header so tests can drive it in-process.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "posseq/crf.hpp"
#include "posseq/error.hpp"
#include "posseq/evaluation.hpp"
#include "posseq/hmm.hpp"
#include "posseq/io.hpp"
#include "posseq/synthetic.hpp"
#include "posseq/vectorizer.hpp"

namespace posseq::cli {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kManifestFormatVersion = 1;
inline constexpr std::uint64_t kDefaultPipelineSeed = 7;

inline std::string version_string() {
    return std::string("posseq ") + kToolVersion + " (model format " + std::to_string(kModelFormatVersion) +
           ", dataset format " + std::to_string(kDatasetFormatVersion) + ", manifest format " +
           std::to_string(kManifestFormatVersion) + ")";
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
inline std::vector<double> parse_omegas(const std::string& text) {
    auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size() || !std::isfinite(v) || v < 0.0)
            fail(ErrorKind::InvalidArgument, "bad omega value '" + s + "'");
        return v;
    };
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) fail(ErrorKind::InvalidArgument, "omega range must be start:stop:step");
        const double start = number(parts[0]), stop = number(parts[1]), step = number(parts[2]);
        if (!(step > 0.0) || stop < start) fail(ErrorKind::InvalidArgument, "omega range needs step > 0 and stop >= start");
        const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < n; ++i) out.push_back(start + static_cast<double>(i) * step);
    } else {
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
    }
    if (out.empty()) fail(ErrorKind::InvalidArgument, "no omega values given");
    return out;
}

/// JSON config files. A run manifest contributes its `params`; any other
/// file contributes the object named after the selected subcommand, or the
/// whole object when it has no per-command sections.
class JsonConfig : public CLI::Config {
public:
    explicit JsonConfig(const CLI::App* root) : root_(root) {}

    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
        const auto selected = root_->get_subcommands();
        if (selected.empty()) return {};
        const std::string cmd = selected.front()->get_name();

        const nlohmann::json* section = &j;
        if (j.contains("params")) {
            if (j.value("command", std::string()) != cmd)
                throw CLI::ConversionError("manifest was written by '" + j.value("command", std::string()) +
                                           "', not '" + cmd + "'");
            section = &j.at("params");
        } else if (j.contains(cmd)) {
            section = &j.at(cmd);
        } else {
            for (const auto* sub : root_->get_subcommands({}))
                if (j.contains(sub->get_name())) return {}; // sectioned file without this command
        }
        if (!section->is_object()) throw CLI::ConversionError("config section for '" + cmd + "' is not an object");

        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : section->items()) {
            CLI::ConfigItem item;
            item.parents = {cmd};
            item.name = key;
            if (value.is_null()) continue;
            if (value.is_array()) {
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(value));
            }
            items.push_back(std::move(item));
        }
        return items;
    }

private:
    static std::string scalar(const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number()) return v.dump();
        throw CLI::ConversionError("config values must be scalars or lists of scalars");
    }

    const CLI::App* root_;
};

namespace cli_detail {

// Records every option of a subcommand so its resolved value can be written
// to the run manifest.
class ParamRecorder {
public:
    template <typename T>
    CLI::Option* add(CLI::App* app, const std::string& name, T& var, const std::string& help) {
        auto* opt = app->add_option("--" + name, var, help)->capture_default_str();
        getters_.emplace_back(name, [&var] { return to_json(var); });
        return opt;
    }

    nlohmann::json to_json_object() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [name, get] : getters_) j[name] = get();
        return j;
    }

private:
    template <typename T>
    static nlohmann::json to_json(const T& v) {
        if constexpr (std::is_floating_point_v<T>) {
            if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
            return v;
        } else {
            return v;
        }
    }

    std::vector<std::pair<std::string, std::function<nlohmann::json()>>> getters_;
};

struct PipelineOptions {
    std::string layout;
    std::string dataset;
    std::string mode = "classical";
    std::string model = "hmm";
    double omega = 0.0;
    double m = 2.0;
    double p_threshold = 0.5;
    std::size_t states = 5;
    std::size_t restarts = 3;
    std::size_t hmm_max_iter = 100;
    double hmm_tol = 1e-4;
    double sigma2 = 10.0;
    std::size_t crf_max_iter = 200;
    double crf_tol = 1e-3;
    std::uint64_t seed = kDefaultPipelineSeed;
    unsigned jobs = 1;

    PipelineConfig to_config() const {
        PipelineConfig c;
        c.vectorizer = mode == "possibilistic" ? VectorizerKind::Possibilistic : VectorizerKind::Classical;
        c.params.omega = omega;
        c.params.m = m;
        c.params.p_threshold = p_threshold;
        c.classifier = model == "crf" ? ClassifierKind::Crf : ClassifierKind::Hmm;
        c.hmm.n_states = states;
        c.hmm.restarts = restarts;
        c.hmm.max_iter = hmm_max_iter;
        c.hmm.tol = hmm_tol;
        c.crf.sigma2 = sigma2;
        c.crf.max_iter = crf_max_iter;
        c.crf.tol = crf_tol;
        c.seed = seed;
        c.jobs = jobs;
        return c;
    }
};

inline void add_vectorizer_options(CLI::App* app, ParamRecorder& rec, PipelineOptions& o) {
    rec.add(app, "mode", o.mode, "Vectorizer: classical or possibilistic")
        ->check(CLI::IsMember({"classical", "possibilistic"}));
    rec.add(app, "omega", o.omega, "Proximity distance in pixels")->check(CLI::NonNegativeNumber);
    rec.add(app, "m", o.m, "Bezdek fuzzifier (> 1)");
    rec.add(app, "p-threshold", o.p_threshold, "Possibility threshold P for Far emissions")->check(CLI::Range(0.0, 1.0));
}

inline void add_classifier_options(CLI::App* app, ParamRecorder& rec, PipelineOptions& o) {
    rec.add(app, "model", o.model, "Classifier: hmm or crf")->check(CLI::IsMember({"hmm", "crf"}));
    rec.add(app, "states", o.states, "HMM hidden states")->check(CLI::PositiveNumber);
    rec.add(app, "restarts", o.restarts, "Baum-Welch random restarts")->check(CLI::PositiveNumber);
    rec.add(app, "hmm-max-iter", o.hmm_max_iter, "Baum-Welch iteration cap");
    rec.add(app, "hmm-tol", o.hmm_tol, "Baum-Welch log-likelihood tolerance");
    rec.add(app, "sigma2", o.sigma2, "CRF Gaussian prior variance (inf disables)");
    rec.add(app, "crf-max-iter", o.crf_max_iter, "L-BFGS iteration cap");
    rec.add(app, "crf-tol", o.crf_tol, "L-BFGS gradient tolerance");
    rec.add(app, "seed", o.seed, "Master seed");
}

inline std::vector<std::string> dataset_classes(std::span<const ObservationSequence> seqs) {
    std::set<std::string> s;
    for (const auto& q : seqs)
        if (q.label) s.insert(*q.label);
    return {s.begin(), s.end()};
}

inline void write_manifest(const fs::path& path, const std::string& command, const nlohmann::json& params,
                           std::uint64_t seed, const std::vector<std::string>& inputs,
                           const std::vector<std::string>& outputs) {
    nlohmann::json m = {{"manifest_version", kManifestFormatVersion},
                        {"tool", "posseq"},
                        {"tool_version", kToolVersion},
                        {"command", command},
                        {"seed", seed},
                        {"params", params},
                        {"inputs", inputs},
                        {"outputs", outputs}};
    write_text_file(path, m.dump(2) + "\n");
}

inline fs::path sidecar(const fs::path& out) {
    auto p = out;
    p += ".manifest.json";
    return p;
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());
}

inline nlohmann::json hmm_bundle_to_json(std::span<const LabeledHmm> models) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& m : models) classes.push_back({{"label", m.label}, {"model", hmm_to_json(m.model)}});
    return {{"kind", "hmm"}, {"version", kModelFormatVersion}, {"classes", classes}};
}

} // namespace cli_detail

/// Runs the tool with `args` (without the program name). Returns the exit
/// code: 0 success, 1 recorded failures, 2 usage or I/O errors.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    using namespace cli_detail;
    CLI::App app{"Possibilistic observation sequences for cursor-trajectory task recognition", "posseq"};
    app.fallthrough();
    app.require_subcommand(1);
    app.set_version_flag("--version", version_string());
    app.set_config("--config", "", "JSON config file or run manifest");
    app.config_formatter(std::make_shared<JsonConfig>(&app));
    app.allow_config_extras(CLI::config_extras_mode::error);

    // ---- gen
    GeneratorConfig gen;
    std::string gen_out;
    unsigned gen_jobs = 1;
    ParamRecorder gen_rec;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic labelled trajectory dataset");
    gen_rec.add(gen_cmd, "out", gen_out, "Output directory")->required();
    gen_rec.add(gen_cmd, "seed", gen.seed, "Master seed");
    gen_rec.add(gen_cmd, "per-task", gen.per_task, "Trajectories per task class")->check(CLI::PositiveNumber);
    gen_rec.add(gen_cmd, "min-ticks", gen.min_ticks, "Shortest trajectory, in ticks");
    gen_rec.add(gen_cmd, "max-ticks", gen.max_ticks, "Longest trajectory, in ticks");
    gen_rec.add(gen_cmd, "ds", gen.ds, "Centiseconds per tick");
    gen_rec.add(gen_cmd, "dwell-mean", gen.motion.dwell_mean, "Mean dwell, ticks");
    gen_rec.add(gen_cmd, "dwell-sd", gen.motion.dwell_sd, "Dwell standard deviation, ticks");
    gen_rec.add(gen_cmd, "travel-speed", gen.motion.travel_speed, "Travel speed, pixels per tick");
    gen_rec.add(gen_cmd, "travel-noise", gen.motion.travel_noise, "Travel noise sigma, pixels");
    gen_rec.add(gen_cmd, "overshoot-prob", gen.motion.overshoot_prob, "Probability a dwell lands outside the kernel");
    gen_rec.add(gen_cmd, "overshoot-max-px", gen.motion.overshoot_max_px, "Largest overshoot, pixels");
    gen_rec.add(gen_cmd, "jobs", gen_jobs, "Worker threads")->check(CLI::PositiveNumber);

    // ---- vectorize
    PipelineOptions vec;
    std::string vec_out;
    ParamRecorder vec_rec;
    auto* vec_cmd = app.add_subcommand("vectorize", "Turn trajectories into observation sequences");
    vec_rec.add(vec_cmd, "layout", vec.layout, "Layout JSON")->required();
    vec_rec.add(vec_cmd, "dataset", vec.dataset, "Dataset manifest (dataset.json)")->required();
    vec_rec.add(vec_cmd, "out", vec_out, "Output sequence file")->required();
    add_vectorizer_options(vec_cmd, vec_rec, vec);

    // ---- train
    PipelineOptions tr;
    std::string tr_sequences, tr_out;
    ParamRecorder tr_rec;
    auto* tr_cmd = app.add_subcommand("train", "Train a classifier on labelled sequences");
    tr_rec.add(tr_cmd, "layout", tr.layout, "Layout JSON (defines the alphabet)")->required();
    tr_rec.add(tr_cmd, "sequences", tr_sequences, "Labelled sequence file")->required();
    tr_rec.add(tr_cmd, "out", tr_out, "Output model JSON")->required();
    add_classifier_options(tr_cmd, tr_rec, tr);

    // ---- classify
    std::string cl_model, cl_sequences, cl_out;
    ParamRecorder cl_rec;
    auto* cl_cmd = app.add_subcommand("classify", "Classify sequences with a trained model");
    cl_rec.add(cl_cmd, "classifier", cl_model, "Model JSON written by train")->required();
    cl_rec.add(cl_cmd, "sequences", cl_sequences, "Sequence file")->required();
    cl_rec.add(cl_cmd, "out", cl_out, "Output predictions CSV")->required();

    // ---- loocv
    PipelineOptions lo;
    std::string lo_out;
    ParamRecorder lo_rec;
    auto* lo_cmd = app.add_subcommand("loocv", "Leave-one-out cross-validation");
    lo_rec.add(lo_cmd, "layout", lo.layout, "Layout JSON")->required();
    lo_rec.add(lo_cmd, "dataset", lo.dataset, "Dataset manifest (dataset.json)")->required();
    lo_rec.add(lo_cmd, "out", lo_out, "Output directory")->required();
    add_vectorizer_options(lo_cmd, lo_rec, lo);
    add_classifier_options(lo_cmd, lo_rec, lo);
    lo_rec.add(lo_cmd, "jobs", lo.jobs, "Worker threads")->check(CLI::PositiveNumber);

    // ---- sweep
    PipelineOptions sw;
    std::string sw_out, sw_omegas = "0:12:1";
    ParamRecorder sw_rec;
    auto* sw_cmd = app.add_subcommand("sweep", "Possibilistic LOOCV accuracy over a range of omega");
    sw_rec.add(sw_cmd, "layout", sw.layout, "Layout JSON")->required();
    sw_rec.add(sw_cmd, "dataset", sw.dataset, "Dataset manifest (dataset.json)")->required();
    sw_rec.add(sw_cmd, "out", sw_out, "Output directory")->required();
    sw_rec.add(sw_cmd, "omegas", sw_omegas, "start:stop:step (inclusive) or a comma list");
    sw_rec.add(sw_cmd, "m", sw.m, "Bezdek fuzzifier (> 1)");
    sw_rec.add(sw_cmd, "p-threshold", sw.p_threshold, "Possibility threshold P for Far emissions")
        ->check(CLI::Range(0.0, 1.0));
    add_classifier_options(sw_cmd, sw_rec, sw);
    sw_rec.add(sw_cmd, "jobs", sw.jobs, "Worker threads")->check(CLI::PositiveNumber);

    for (auto* sub : app.get_subcommands({})) sub->allow_config_extras(CLI::config_extras_mode::error);

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen_cmd->parsed()) {
            const fs::path dir = gen_out;
            const auto data = generate_dataset(gen, gen_jobs);
            ensure_dir(dir);
            const auto manifest = write_dataset(dir, data, gen);
            write_text_file(dir / "layout.json", layout_to_json(builtin_layout()).dump(2) + "\n");
            write_manifest(dir / "run_manifest.json", "gen", gen_rec.to_json_object(), gen.seed, {},
                           {manifest.string(), (dir / "layout.json").string()});
            out << "wrote " << data.size() << " trajectories to " << manifest.string() << "\n";
            return 0;
        }

        if (vec_cmd->parsed()) {
            const auto layout = load_layout(vec.layout);
            const auto data = load_dataset(vec.dataset);
            const auto config = vec.to_config();
            std::vector<ObservationSequence> seqs;
            if (config.vectorizer == VectorizerKind::Classical) {
                for (const auto& t : data) seqs.push_back(vectorize_classical(t, layout));
            } else {
                const auto stats = compute_attraction_stats(layout, data, config.params.omega);
                for (const auto& t : data) seqs.push_back(vectorize_possibilistic(t, layout, stats, config.params));
            }
            for (const auto& s : seqs)
                if (s.empty()) err << "warning: trajectory '" << s.source << "' produced an empty sequence\n";
            const auto text = sequences_to_text(seqs);
            write_text_file(vec_out, text);
            write_manifest(sidecar(vec_out), "vectorize", vec_rec.to_json_object(), 0, {vec.layout, vec.dataset},
                           {vec_out});
            out << "wrote " << seqs.size() << " sequences to " << vec_out << "\n";
            return 0;
        }

        if (tr_cmd->parsed()) {
            const auto layout = load_layout(tr.layout);
            const auto seqs = load_sequences(tr_sequences);
            const auto config = tr.to_config();
            const auto classes = dataset_classes(seqs);
            if (classes.size() < 2) fail(ErrorKind::DegenerateCorpus, "training needs at least two labelled classes");
            nlohmann::json model;
            if (config.classifier == ClassifierKind::Hmm) {
                std::vector<LabeledHmm> models;
                for (const auto& label : classes) {
                    std::vector<ObservationSequence> mine;
                    for (const auto& s : seqs)
                        if (s.label == label) mine.push_back(s);
                    HmmTrainOptions o = config.hmm;
                    o.seed = derive_seed(config.seed, {hash_string(label)});
                    models.push_back({label, baum_welch_train(mine, layout.names(), o)});
                }
                model = hmm_bundle_to_json(models);
            } else {
                std::vector<ObservationSequence> labelled;
                for (const auto& s : seqs)
                    if (s.label) labelled.push_back(s);
                CrfTrainOptions o = config.crf;
                o.seed = config.seed;
                model = {{"kind", "crf"},
                         {"version", kModelFormatVersion},
                         {"model", crf_to_json(train_crf(labelled, layout.names(), o))}};
            }
            write_text_file(tr_out, model.dump(2) + "\n");
            write_manifest(sidecar(tr_out), "train", tr_rec.to_json_object(), config.seed, {tr.layout, tr_sequences},
                           {tr_out});
            out << "wrote " << tr.model << " model for " << classes.size() << " classes to " << tr_out << "\n";
            return 0;
        }

        if (cl_cmd->parsed()) {
            const auto j = parse_json(read_text_file(cl_model), cl_model);
            const auto seqs = load_sequences(cl_sequences);
            std::function<std::string(const ObservationSequence&)> predict;
            const std::string kind = j.value("kind", std::string());
            if (kind == "hmm") {
                auto models = std::make_shared<std::vector<LabeledHmm>>();
                try {
                    for (const auto& c : j.at("classes"))
                        models->push_back({c.at("label").get<std::string>(), hmm_from_json(c.at("model"))});
                } catch (const nlohmann::json::exception& e) {
                    fail(ErrorKind::Format, cl_model + ": " + e.what());
                }
                predict = [models](const ObservationSequence& s) { return classify_hmm(*models, s); };
            } else if (kind == "crf") {
                if (!j.contains("model")) fail(ErrorKind::Format, cl_model + ": missing 'model'");
                auto model = std::make_shared<CrfModel>(crf_from_json(j.at("model")));
                predict = [model](const ObservationSequence& s) { return classify_crf(*model, s); };
            } else {
                fail(ErrorKind::Format, cl_model + ": unknown model kind '" + kind + "'");
            }
            std::string csv = "index,truth,predicted\n";
            std::size_t failures = 0;
            for (std::size_t i = 0; i < seqs.size(); ++i) {
                std::string p;
                try {
                    p = predict(seqs[i]);
                } catch (const Error& e) {
                    p = kFailedPrediction;
                    ++failures;
                    err << "warning: sequence " << i << ": " << e.what() << "\n";
                }
                csv += std::to_string(i) + ',' + seqs[i].label.value_or("") + ',' + p + '\n';
            }
            write_text_file(cl_out, csv);
            write_manifest(sidecar(cl_out), "classify", cl_rec.to_json_object(), 0, {cl_model, cl_sequences},
                           {cl_out});
            out << "classified " << seqs.size() << " sequences (" << failures << " failed)\n";
            return failures ? 1 : 0;
        }

        if (lo_cmd->parsed()) {
            const auto layout = load_layout(lo.layout);
            const auto data = load_dataset(lo.dataset);
            const auto config = lo.to_config();
            const auto r = run_loocv(data, layout, config);
            const fs::path dir = lo_out;
            ensure_dir(dir);
            std::string folds = "id,truth,predicted\n";
            for (const auto& f : r.folds) folds += f.id + ',' + f.truth + ',' + f.predicted + '\n';
            write_text_file(dir / "report.csv", report_csv(r.report));
            write_text_file(dir / "confusion.csv", confusion_csv(r));
            write_text_file(dir / "folds.csv", folds);
            write_manifest(dir / "run_manifest.json", "loocv", lo_rec.to_json_object(), config.seed,
                           {lo.layout, lo.dataset},
                           {(dir / "report.csv").string(), (dir / "confusion.csv").string(),
                            (dir / "folds.csv").string()});
            for (const auto& f : r.folds)
                if (f.failed) err << "warning: fold '" << f.id << "' failed: " << f.message << "\n";
            out << report_csv(r.report);
            return r.failures ? 1 : 0;
        }

        if (sw_cmd->parsed()) {
            const auto omegas = parse_omegas(sw_omegas);
            const auto layout = load_layout(sw.layout);
            const auto data = load_dataset(sw.dataset);
            const auto config = sw.to_config();
            const auto points = omega_sweep(data, layout, config, omegas);
            const fs::path dir = sw_out;
            ensure_dir(dir);
            write_text_file(dir / "sweep.csv", sweep_csv(points));
            write_manifest(dir / "run_manifest.json", "sweep", sw_rec.to_json_object(), config.seed,
                           {sw.layout, sw.dataset}, {(dir / "sweep.csv").string()});
            std::size_t failures = 0;
            for (const auto& p : points) failures += p.result.failures;
            if (failures) err << "warning: " << failures << " folds failed across the sweep\n";
            out << sweep_csv(points);
            return failures ? 1 : 0;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

} // namespace posseq::cli
