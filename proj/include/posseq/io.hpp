#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "posseq/crf.hpp"
#include "posseq/error.hpp"
#include "posseq/geometry.hpp"
#include "posseq/hmm.hpp"
#include "posseq/synthetic.hpp"
#include "posseq/vectorizer.hpp"

namespace posseq {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kDatasetFormatVersion = 1;

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) fail(ErrorKind::Format, "cannot format number");
    return std::string(buf, end);
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes via a sibling temporary file and a rename, so readers never observe
/// a half-written file.
inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
        out << content;
        if (!out) fail(ErrorKind::Io, "write failed for '" + path.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorKind::Io, "cannot move '" + tmp.string() + "' into place: " + ec.message());
}

inline json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Format, origin + ": " + e.what());
    }
}

// ---- layout ---------------------------------------------------------------

inline json layout_to_json(const InterfaceLayout& layout) {
    json arr = json::array();
    for (const auto& a : layout.areas())
        arr.push_back({{"name", a.name},
                       {"left", a.kernel.left},
                       {"top", a.kernel.top},
                       {"width", a.kernel.width},
                       {"height", a.kernel.height}});
    return arr;
}

inline InterfaceLayout layout_from_json(const json& j, const std::string& origin = "layout") {
    if (!j.is_array()) fail(ErrorKind::Format, origin + ": layout must be a JSON list of areas");
    std::vector<AreaOfInterest> areas;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        auto field = [&](const char* key) -> const json& {
            if (!e.is_object() || !e.contains(key))
                fail(ErrorKind::Format, origin + ": area " + std::to_string(i) + " lacks '" + key + "'");
            return e.at(key);
        };
        auto number = [&](const char* key) {
            const auto& v = field(key);
            if (!v.is_number()) fail(ErrorKind::Format, origin + ": area " + std::to_string(i) + " '" + key + "' is not a number");
            return v.get<double>();
        };
        const auto& name = field("name");
        if (!name.is_string()) fail(ErrorKind::Format, origin + ": area " + std::to_string(i) + " name is not a string");
        areas.push_back({name.get<std::string>(), {number("left"), number("top"), number("width"), number("height")}});
    }
    try {
        return InterfaceLayout(std::move(areas));
    } catch (const Error& e) {
        fail(ErrorKind::InvalidLayout, origin + ": " + e.what());
    }
}

inline InterfaceLayout load_layout(const std::filesystem::path& path) {
    return layout_from_json(parse_json(read_text_file(path), path.string()), path.string());
}

// ---- trajectories ---------------------------------------------------------

inline std::string trajectory_to_csv(const Trajectory& traj) {
    std::string out = "t,x,y\n";
    for (const auto& f : traj.fixations) {
        out += std::to_string(f.t);
        out += ',';
        out += format_number(f.x);
        out += ',';
        out += format_number(f.y);
        out += '\n';
    }
    return out;
}

inline Trajectory trajectory_from_csv(const std::string& text, const std::string& origin, std::string id) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto where = [&] { return origin + ":" + std::to_string(lineno); };
    Trajectory traj;
    traj.id = std::move(id);
    if (!std::getline(in, line)) fail(ErrorKind::Format, origin + ": empty trajectory file");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,x,y") fail(ErrorKind::Format, where() + ": expected header 't,x,y'");
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Fixation f;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        auto take = [&](auto& out, bool last) {
            auto [q, ec] = std::from_chars(p, end, out);
            if (ec != std::errc{}) fail(ErrorKind::Format, where() + ": malformed number");
            p = q;
            if (!last) {
                if (p == end || *p != ',') fail(ErrorKind::Format, where() + ": expected 3 comma-separated fields");
                ++p;
            } else if (p != end) {
                fail(ErrorKind::Format, where() + ": trailing characters");
            }
        };
        take(f.t, false);
        take(f.x, false);
        take(f.y, true);
        traj.fixations.push_back(f);
    }
    try {
        validate(traj);
    } catch (const Error& e) {
        fail(ErrorKind::InvalidTrajectory, origin + ": " + e.what());
    }
    return traj;
}

inline Trajectory load_trajectory(const std::filesystem::path& path, std::optional<std::string> label = {}) {
    auto traj = trajectory_from_csv(read_text_file(path), path.string(), path.stem().string());
    traj.label = std::move(label);
    return traj;
}

// ---- generator config and dataset manifest --------------------------------

inline json generator_config_to_json(const GeneratorConfig& c) {
    return {{"seed", c.seed},
            {"per_task", c.per_task},
            {"min_ticks", c.min_ticks},
            {"max_ticks", c.max_ticks},
            {"ds", c.ds},
            {"motion",
             {{"dwell_mean", c.motion.dwell_mean},
              {"dwell_sd", c.motion.dwell_sd},
              {"travel_speed", c.motion.travel_speed},
              {"travel_noise", c.motion.travel_noise},
              {"overshoot_prob", c.motion.overshoot_prob},
              {"overshoot_max_px", c.motion.overshoot_max_px}}}};
}

/// Missing keys keep their defaults.
inline GeneratorConfig generator_config_from_json(const json& j) {
    GeneratorConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        c.per_task = j.value("per_task", c.per_task);
        c.min_ticks = j.value("min_ticks", c.min_ticks);
        c.max_ticks = j.value("max_ticks", c.max_ticks);
        c.ds = j.value("ds", c.ds);
        if (j.contains("motion")) {
            const auto& m = j.at("motion");
            c.motion.dwell_mean = m.value("dwell_mean", c.motion.dwell_mean);
            c.motion.dwell_sd = m.value("dwell_sd", c.motion.dwell_sd);
            c.motion.travel_speed = m.value("travel_speed", c.motion.travel_speed);
            c.motion.travel_noise = m.value("travel_noise", c.motion.travel_noise);
            c.motion.overshoot_prob = m.value("overshoot_prob", c.motion.overshoot_prob);
            c.motion.overshoot_max_px = m.value("overshoot_max_px", c.motion.overshoot_max_px);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, std::string("generator config: ") + e.what());
    }
    c.validate();
    return c;
}

/// Writes one CSV per trajectory plus `dataset.json` into `dir`; returns the
/// manifest path.
inline std::filesystem::path write_dataset(const std::filesystem::path& dir, std::span<const Trajectory> data,
                                           const GeneratorConfig& config) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());
    json entries = json::array();
    for (const auto& t : data) {
        const std::string file = t.id + ".csv";
        write_text_file(dir / file, trajectory_to_csv(t));
        json e = {{"file", file}};
        if (t.label) e["label"] = *t.label;
        entries.push_back(std::move(e));
    }
    json manifest = {{"version", kDatasetFormatVersion},
                     {"seed", config.seed},
                     {"config", generator_config_to_json(config)},
                     {"entries", std::move(entries)}};
    const auto path = dir / "dataset.json";
    write_text_file(path, manifest.dump(2) + "\n");
    return path;
}

/// Loads every trajectory named by a dataset manifest; file paths resolve
/// relative to the manifest's directory.
inline std::vector<Trajectory> load_dataset(const std::filesystem::path& manifest_path) {
    const json j = parse_json(read_text_file(manifest_path), manifest_path.string());
    if (!j.is_object() || !j.contains("entries") || !j.at("entries").is_array())
        fail(ErrorKind::Format, manifest_path.string() + ": manifest needs an 'entries' list");
    const auto base = manifest_path.parent_path();
    std::vector<Trajectory> out;
    for (const auto& e : j.at("entries")) {
        if (!e.is_object() || !e.contains("file") || !e.at("file").is_string())
            fail(ErrorKind::Format, manifest_path.string() + ": entry without a 'file' string");
        std::optional<std::string> label;
        if (e.contains("label")) {
            if (!e.at("label").is_string()) fail(ErrorKind::Format, manifest_path.string() + ": label must be a string");
            label = e.at("label").get<std::string>();
        }
        out.push_back(load_trajectory(base / e.at("file").get<std::string>(), std::move(label)));
    }
    return out;
}

// ---- observation sequences ------------------------------------------------

/// One sequence per line: `label<TAB>` (when labeled) followed by
/// space-separated symbols. The source id is not stored.
inline std::string sequences_to_text(std::span<const ObservationSequence> seqs) {
    std::string out;
    for (const auto& s : seqs) {
        if (s.label) {
            if (s.label->empty() || s.label->find_first_of("\t\n\r") != std::string::npos)
                fail(ErrorKind::Format, "label '" + *s.label + "' cannot be written");
            out += *s.label;
            out += '\t';
        }
        for (std::size_t i = 0; i < s.symbols.size(); ++i) {
            const auto& sym = s.symbols[i];
            if (sym.empty() || sym.find_first_of(" \t\n\r\v\f") != std::string::npos)
                fail(ErrorKind::Format, "symbol '" + sym + "' cannot be written");
            if (i) out += ' ';
            out += sym;
        }
        out += '\n';
    }
    return out;
}

inline std::vector<ObservationSequence> sequences_from_text(const std::string& text, const std::string& origin) {
    std::vector<ObservationSequence> out;
    std::size_t pos = 0, lineno = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos)
            fail(ErrorKind::Format, origin + ":" + std::to_string(lineno + 1) + ": missing final newline");
        std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++lineno;
        ObservationSequence s;
        if (auto tab = line.find('\t'); tab != std::string::npos) {
            if (tab == 0) fail(ErrorKind::Format, origin + ":" + std::to_string(lineno) + ": empty label");
            s.label = line.substr(0, tab);
            line.erase(0, tab + 1);
        }
        std::istringstream words(line);
        for (std::string w; words >> w;) s.symbols.push_back(std::move(w));
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<ObservationSequence> load_sequences(const std::filesystem::path& path) {
    return sequences_from_text(read_text_file(path), path.string());
}

// ---- models ---------------------------------------------------------------

namespace io_detail {

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows; ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    return rows;
}

inline Matrix matrix_from_json(const json& j, const char* what) {
    if (!j.is_array()) fail(ErrorKind::Format, std::string(what) + " must be a list of rows");
    Matrix m;
    m.rows = j.size();
    for (const auto& row : j) {
        const auto v = row.get<std::vector<double>>();
        if (m.data.empty()) m.cols = v.size();
        if (v.size() != m.cols) fail(ErrorKind::Format, std::string(what) + " rows differ in length");
        m.data.insert(m.data.end(), v.begin(), v.end());
    }
    return m;
}

} // namespace io_detail

inline json hmm_to_json(const HmmModel& m) {
    return {{"version", kModelFormatVersion},
            {"alphabet", m.alphabet},
            {"n_states", m.n_states()},
            {"A", io_detail::matrix_to_json(m.transition)},
            {"B", io_detail::matrix_to_json(m.emission)},
            {"pi", m.initial},
            {"train_meta", {{"seed", m.meta.seed}, {"iters", m.meta.iters}, {"loglik", m.meta.loglik}}}};
}

inline HmmModel hmm_from_json(const json& j) {
    HmmModel m;
    try {
        if (j.at("version").get<int>() != kModelFormatVersion) fail(ErrorKind::InvalidModel, "unsupported model version");
        m.alphabet = j.at("alphabet").get<std::vector<std::string>>();
        m.transition = io_detail::matrix_from_json(j.at("A"), "A");
        m.emission = io_detail::matrix_from_json(j.at("B"), "B");
        m.initial = j.at("pi").get<std::vector<double>>();
        if (j.at("n_states").get<std::size_t>() != m.initial.size())
            fail(ErrorKind::InvalidModel, "n_states disagrees with pi");
        if (j.contains("train_meta")) {
            const auto& t = j.at("train_meta");
            m.meta.seed = t.value("seed", std::uint64_t{0});
            m.meta.iters = t.value("iters", std::size_t{0});
            m.meta.loglik = t.value("loglik", 0.0);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, std::string("HMM model: ") + e.what());
    }
    validate(m);
    return m;
}

inline json crf_to_json(const CrfModel& m) {
    const std::size_t Y = m.n_labels(), M = m.n_symbols();
    Matrix trans(Y, Y), state(Y, M);
    for (std::size_t a = 0; a < Y; ++a)
        for (std::size_t b = 0; b < Y; ++b) trans(a, b) = m.transition(a, b);
    for (std::size_t y = 0; y < Y; ++y)
        for (std::size_t x = 0; x < M; ++x) state(y, x) = m.state(y, x);
    json sigma = std::isinf(m.sigma2) ? json("inf") : json(m.sigma2);
    return {{"version", kModelFormatVersion},
            {"labels", m.labels},
            {"alphabet", m.alphabet},
            {"sigma2", sigma},
            {"transition_weights", io_detail::matrix_to_json(trans)},
            {"state_weights", io_detail::matrix_to_json(state)},
            {"train_meta",
             {{"seed", m.meta.seed},
              {"iters", m.meta.iters},
              {"objective", m.meta.objective},
              {"grad_inf", m.meta.grad_inf}}}};
}

inline CrfModel crf_from_json(const json& j) {
    CrfModel m;
    try {
        if (j.at("version").get<int>() != kModelFormatVersion) fail(ErrorKind::InvalidModel, "unsupported model version");
        m.labels = j.at("labels").get<std::vector<std::string>>();
        m.alphabet = j.at("alphabet").get<std::vector<std::string>>();
        const auto& s = j.at("sigma2");
        m.sigma2 = s.is_string() && s.get<std::string>() == "inf" ? std::numeric_limits<double>::infinity()
                                                                  : s.get<double>();
        const auto trans = io_detail::matrix_from_json(j.at("transition_weights"), "transition_weights");
        const auto state = io_detail::matrix_from_json(j.at("state_weights"), "state_weights");
        const std::size_t Y = m.labels.size(), M = m.alphabet.size();
        if (trans.rows != Y || trans.cols != Y || state.rows != Y || state.cols != M)
            fail(ErrorKind::InvalidModel, "CRF weight matrices do not match labels/alphabet");
        m.weights = trans.data;
        m.weights.insert(m.weights.end(), state.data.begin(), state.data.end());
        if (j.contains("train_meta")) {
            const auto& t = j.at("train_meta");
            m.meta.seed = t.value("seed", std::uint64_t{0});
            m.meta.iters = t.value("iters", std::size_t{0});
            m.meta.objective = t.value("objective", 0.0);
            m.meta.grad_inf = t.value("grad_inf", 0.0);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, std::string("CRF model: ") + e.what());
    }
    validate(m);
    return m;
}

} // namespace posseq
