#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "cli.hpp"

using namespace posseq;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("posseq_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

// Small dataset shared by the pipeline tests.
const fs::path& small_dataset() {
    static const fs::path dir = [] {
        auto d = fresh("small") / "data";
        const auto r = run({"gen", "--out", d.string(), "--per-task", "4", "--min-ticks", "80", "--max-ticks", "120"});
        EXPECT_EQ(r.code, 0) << r.err;
        return d;
    }();
    return dir;
}

std::string layout_of(const fs::path& d) { return (d / "layout.json").string(); }
std::string dataset_of(const fs::path& d) { return (d / "dataset.json").string(); }

} // namespace

TEST(CliBasics, VersionHelpAndUsageErrors) {
    auto r = run({"--version"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("posseq 1.0.0"), std::string::npos);
    EXPECT_NE(r.out.find("model format 1"), std::string::npos);
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"gen"}).code, 2);
    EXPECT_EQ(run({"gen", "--out", "x", "--per-task", "zero"}).code, 2);
    EXPECT_EQ(run({"loocv", "--layout", "a", "--dataset", "b", "--out", "c", "--model", "svm"}).code, 2);
}

TEST(CliOmegas, RangeAndList) {
    EXPECT_EQ(cli::parse_omegas("0:12:1").size(), 13u);
    EXPECT_EQ(cli::parse_omegas("0:1:0.25"), (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));
    EXPECT_EQ(cli::parse_omegas("3"), std::vector<double>{3});
    EXPECT_EQ(cli::parse_omegas("0,2.5,7"), (std::vector<double>{0, 2.5, 7}));
    EXPECT_THROW(cli::parse_omegas("1:0:1"), Error);
    EXPECT_THROW(cli::parse_omegas("0:4:0"), Error);
    EXPECT_THROW(cli::parse_omegas("-1"), Error);
    EXPECT_THROW(cli::parse_omegas("a,b"), Error);
}

TEST(CliGen, DefaultsAndPerTask) {
    const auto dir = fresh("gen");
    ASSERT_EQ(run({"gen", "--out", (dir / "a").string()}).code, 0);
    EXPECT_EQ(load_dataset(dir / "a" / "dataset.json").size(), 51u);
    ASSERT_EQ(run({"gen", "--out", (dir / "b").string(), "--per-task", "5"}).code, 0);
    EXPECT_EQ(load_dataset(dir / "b" / "dataset.json").size(), 15u);
    EXPECT_TRUE(fs::exists(dir / "b" / "run_manifest.json"));
    EXPECT_NO_THROW(load_layout(dir / "b" / "layout.json"));
}

TEST(CliGen, SameSeedIsByteIdentical) {
    const auto dir = fresh("gen_twice");
    ASSERT_EQ(run({"gen", "--seed", "42", "--per-task", "2", "--out", (dir / "a").string()}).code, 0);
    ASSERT_EQ(run({"gen", "--seed", "42", "--per-task", "2", "--out", (dir / "b").string(), "--jobs", "3"}).code, 0);
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        if (e.path().filename() == "run_manifest.json") continue;
        EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / e.path().filename())) << e.path();
    }
}

TEST(CliConfig, FlagsOverrideConfigOverrideDefaults) {
    const auto dir = fresh("precedence");
    write_text_file(dir / "cfg.json", R"({"gen": {"per-task": 2, "seed": 5}})");
    ASSERT_EQ(run({"gen", "--config", (dir / "cfg.json").string(), "--out", (dir / "a").string()}).code, 0);
    auto m = parse_json(slurp(dir / "a" / "run_manifest.json"), "m");
    EXPECT_EQ(m.at("params").at("per-task"), 2);
    EXPECT_EQ(m.at("seed"), 5);
    EXPECT_EQ(m.at("params").at("min-ticks"), 160);
    ASSERT_EQ(run({"gen", "--config", (dir / "cfg.json").string(), "--out", (dir / "b").string(), "--per-task", "3"})
                  .code,
              0);
    m = parse_json(slurp(dir / "b" / "run_manifest.json"), "m");
    EXPECT_EQ(m.at("params").at("per-task"), 3);
    EXPECT_EQ(m.at("seed"), 5);

    write_text_file(dir / "bad.json", R"({"gen": {"per-tusk": 2}})");
    EXPECT_EQ(run({"gen", "--config", (dir / "bad.json").string(), "--out", (dir / "c").string()}).code, 2);
    write_text_file(dir / "broken.json", "{");
    EXPECT_EQ(run({"gen", "--config", (dir / "broken.json").string(), "--out", (dir / "c").string()}).code, 2);
    EXPECT_FALSE(fs::exists(dir / "c"));
}

TEST(CliConfig, CommittedExperimentMatchesBuiltinDefaults) {
    const auto j = parse_json(slurp(POSSEQ_CONFIG_FILE), "experiment");
    const auto& g = j.at("gen");
    const GeneratorConfig d;
    EXPECT_EQ(g.at("seed").get<std::uint64_t>(), d.seed);
    EXPECT_EQ(g.at("per-task").get<std::size_t>(), d.per_task);
    EXPECT_EQ(g.at("min-ticks").get<std::int64_t>(), d.min_ticks);
    EXPECT_EQ(g.at("max-ticks").get<std::int64_t>(), d.max_ticks);
    EXPECT_EQ(g.at("ds").get<int>(), d.ds);
    EXPECT_EQ(g.at("dwell-mean").get<double>(), d.motion.dwell_mean);
    EXPECT_EQ(g.at("dwell-sd").get<double>(), d.motion.dwell_sd);
    EXPECT_EQ(g.at("travel-speed").get<double>(), d.motion.travel_speed);
    EXPECT_EQ(g.at("travel-noise").get<double>(), d.motion.travel_noise);
    EXPECT_EQ(g.at("overshoot-prob").get<double>(), d.motion.overshoot_prob);
    EXPECT_EQ(g.at("overshoot-max-px").get<int>(), d.motion.overshoot_max_px);

    const HmmTrainOptions h;
    const CrfTrainOptions c;
    const VectorizerParams v;
    for (const char* section : {"loocv", "sweep"}) {
        const auto& s = j.at(section);
        EXPECT_EQ(s.at("m").get<double>(), v.m);
        EXPECT_EQ(s.at("p-threshold").get<double>(), 1.0);
        EXPECT_EQ(s.at("states").get<std::size_t>(), h.n_states);
        EXPECT_EQ(s.at("restarts").get<std::size_t>(), h.restarts);
        EXPECT_EQ(s.at("hmm-max-iter").get<std::size_t>(), h.max_iter);
        EXPECT_EQ(s.at("hmm-tol").get<double>(), h.tol);
        EXPECT_EQ(s.at("sigma2").get<double>(), c.sigma2);
        EXPECT_EQ(s.at("crf-max-iter").get<std::size_t>(), c.max_iter);
        EXPECT_EQ(s.at("crf-tol").get<double>(), c.tol);
        EXPECT_EQ(s.at("seed").get<std::uint64_t>(), cli::kDefaultPipelineSeed);
    }
}

TEST(CliVectorize, MissingLayoutExitsTwoWithoutOutput) {
    const auto dir = fresh("nolayout");
    const auto out = dir / "seqs.txt";
    const auto r = run({"vectorize", "--layout", (dir / "missing.json").string(), "--dataset",
                        dataset_of(small_dataset()), "--out", out.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("missing.json"), std::string::npos);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_FALSE(fs::exists(cli::cli_detail::sidecar(out)));
}

TEST(CliVectorize, OffKernelTrajectoryWarnsAndWritesEmptyLine) {
    const auto dir = fresh("offkernel");
    Trajectory t;
    t.id = "lost";
    t.label = "X";
    t.fixations = {{0, 5, 5}, {1, 6, 5}};
    write_dataset(dir / "d", std::vector<Trajectory>{t}, GeneratorConfig{});
    write_text_file(dir / "layout.json", layout_to_json(builtin_layout()).dump());
    const auto r = run({"vectorize", "--layout", (dir / "layout.json").string(), "--dataset",
                        (dir / "d" / "dataset.json").string(), "--out", (dir / "s.txt").string()});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    EXPECT_EQ(slurp(dir / "s.txt"), "X\t\n");
}

TEST(CliVectorize, DegenerateSettingsReproduceClassicalFile) {
    const auto dir = fresh("degenerate");
    const auto& d = small_dataset();
    ASSERT_EQ(run({"vectorize", "--layout", layout_of(d), "--dataset", dataset_of(d), "--out",
                   (dir / "c.txt").string()})
                  .code,
              0);
    ASSERT_EQ(run({"vectorize", "--layout", layout_of(d), "--dataset", dataset_of(d), "--mode", "possibilistic",
                   "--omega", "0", "--p-threshold", "1", "--out", (dir / "p.txt").string()})
                  .code,
              0);
    EXPECT_EQ(slurp(dir / "c.txt"), slurp(dir / "p.txt"));
    ASSERT_EQ(run({"vectorize", "--layout", layout_of(d), "--dataset", dataset_of(d), "--mode", "possibilistic",
                   "--omega", "6", "--out", (dir / "p6.txt").string()})
                  .code,
              0);
    EXPECT_GT(slurp(dir / "p6.txt").size(), slurp(dir / "c.txt").size());
}

TEST(CliTrainClassify, HmmAndCrfRoundTrip) {
    const auto dir = fresh("train");
    const auto& d = small_dataset();
    ASSERT_EQ(run({"vectorize", "--layout", layout_of(d), "--dataset", dataset_of(d), "--mode", "possibilistic",
                   "--omega", "3", "--out", (dir / "s.txt").string()})
                  .code,
              0);
    for (const std::string model : {"hmm", "crf"}) {
        const auto m = (dir / (model + ".json")).string();
        const auto p = (dir / (model + ".csv")).string();
        auto r = run({"train", "--model", model, "--layout", layout_of(d), "--sequences", (dir / "s.txt").string(),
                      "--out", m, "--hmm-max-iter", "20"});
        ASSERT_EQ(r.code, 0) << r.err;
        r = run({"classify", "--classifier", m, "--sequences", (dir / "s.txt").string(), "--out", p});
        ASSERT_EQ(r.code, 0) << r.err;
        const auto csv = slurp(p);
        EXPECT_EQ(csv.substr(0, csv.find('\n')), "index,truth,predicted");
        EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
        EXPECT_TRUE(fs::exists(p + ".manifest.json"));
    }
    write_text_file(dir / "bogus.json", R"({"kind": "svm"})");
    EXPECT_EQ(run({"classify", "--classifier", (dir / "bogus.json").string(), "--sequences",
                   (dir / "s.txt").string(), "--out", (dir / "x.csv").string()})
                  .code,
              2);
}

TEST(CliLoocv, ReportShapeAndManifestRerun) {
    const auto dir = fresh("loocv");
    const auto& d = small_dataset();
    const auto a = dir / "a", b = dir / "b";
    ASSERT_EQ(run({"loocv", "--layout", layout_of(d), "--dataset", dataset_of(d), "--model", "hmm", "--mode",
                   "classical", "--hmm-max-iter", "15", "--out", a.string()})
                  .code,
              0);
    const auto report = slurp(a / "report.csv");
    EXPECT_EQ(report.substr(0, report.find('\n')), "class,samples,errors,accuracy_pct");
    EXPECT_NE(report.find("\nTOTAL,12,"), std::string::npos);
    ASSERT_EQ(run({"loocv", "--config", (a / "run_manifest.json").string(), "--out", b.string(), "--jobs", "2"}).code,
              0);
    for (const char* f : {"report.csv", "confusion.csv", "folds.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    // A manifest from another command is refused.
    EXPECT_EQ(run({"sweep", "--config", (a / "run_manifest.json").string()}).code, 2);
}

TEST(CliSweep, RowsPerOmegaAndRerun) {
    const auto dir = fresh("sweep");
    const auto& d = small_dataset();
    const auto a = dir / "a", b = dir / "b";
    ASSERT_EQ(run({"sweep", "--layout", layout_of(d), "--dataset", dataset_of(d), "--model", "crf", "--omegas",
                   "0:2:1", "--out", a.string()})
                  .code,
              0);
    const auto csv = slurp(a / "sweep.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "omega,accuracy_pct");
    ASSERT_EQ(run({"sweep", "--config", (a / "run_manifest.json").string(), "--out", b.string(), "--jobs", "2"}).code,
              0);
    EXPECT_EQ(csv, slurp(b / "sweep.csv"));
    EXPECT_EQ(run({"sweep", "--layout", layout_of(d), "--dataset", dataset_of(d), "--omegas", "2:1:1", "--out",
                   (dir / "c").string()})
                  .code,
              2);
}

TEST(CliManifest, InfiniteVarianceSurvivesRoundTrip) {
    const auto dir = fresh("inf");
    const auto& d = small_dataset();
    ASSERT_EQ(run({"vectorize", "--layout", layout_of(d), "--dataset", dataset_of(d), "--out",
                   (dir / "s.txt").string()})
                  .code,
              0);
    const auto m = (dir / "crf.json").string();
    ASSERT_EQ(run({"train", "--model", "crf", "--sigma2", "inf", "--layout", layout_of(d), "--sequences",
                   (dir / "s.txt").string(), "--out", m, "--crf-max-iter", "5"})
                  .code,
              0);
    const auto man = parse_json(slurp(m + ".manifest.json"), "m");
    EXPECT_EQ(man.at("params").at("sigma2"), "inf");
    EXPECT_EQ(parse_json(slurp(m), "m").at("model").at("sigma2"), "inf");
    ASSERT_EQ(run({"train", "--config", m + ".manifest.json", "--out", (dir / "crf2.json").string()}).code, 0);
    EXPECT_EQ(slurp(m), slurp(dir / "crf2.json"));
}
