#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include "json.hpp"
#include "verdoc/cli.hpp"
#include "verdoc/error.hpp"
#include "verdoc/train.hpp"

using namespace verdoc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

struct Run {
    int code;
    std::string out;
};

Run run(std::vector<std::string> args) {
    std::ostringstream captured;
    auto* old_out = std::cout.rdbuf(captured.rdbuf());
    std::ostringstream err;
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    int code = run_cli(args);
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    return {code, captured.str()};
}

struct Workspace {
    fs::path dir;
    fs::path config;

    std::string p(const std::string& rel) const { return (dir / rel).string(); }
};

// gen-synth -> build-vocab -> extract -> train, once for the whole file.
const Workspace& ws() {
    static const Workspace w = [] {
        Workspace w;
        w.dir = fs::temp_directory_path() / ("verdoc_cli_" + std::to_string(::getpid()));
        fs::remove_all(w.dir);
        fs::create_directories(w.dir);
        w.config = w.dir / "config.json";
        spit(w.config, R"({"seed": 5, "train": {"hidden": [32, 32], "epochs": 10, "batch_size": 20},
                           "evo": {"population": 12, "generations_per_round": 5, "rounds": 2}})");
        const std::string cfg = w.config.string();
        auto ok = [](const Run& r) {
            if (r.code != 0) throw std::runtime_error("pipeline step failed");
        };
        ok(run({"gen-synth", "--config", cfg, "--benign", "60", "--malicious", "40", "--out", w.p("corpus")}));
        ok(run({"build-vocab", "--config", cfg, "--corpus", w.p("corpus"), "--out", w.p("vocab")}));
        ok(run({"extract", "--config", cfg, "--corpus", w.p("corpus"), "--vocab", w.p("vocab/vocab.txt"), "--out",
                w.p("feat")}));
        ok(run({"train", "--config", cfg, "--features", w.p("feat/train.txt"), "--vocab", w.p("vocab/vocab.txt"),
                "--property", "none", "--out", w.p("regular")}));
        return w;
    }();
    static const struct Cleanup {
        fs::path dir;
        ~Cleanup() { fs::remove_all(dir); }
    } cleanup{w.dir};
    return w;
}

}  // namespace

TEST(Cli, PipelineArtifacts) {
    const auto& w = ws();
    for (const char* f : {"corpus/labels.csv", "corpus/manifest.json", "vocab/vocab.txt", "feat/features.txt",
                          "feat/train.txt", "feat/test.txt", "regular/model.bin", "regular/model.json",
                          "regular/train_log.csv"}) {
        EXPECT_TRUE(fs::exists(w.dir / f)) << f;
    }
    auto side = nlohmann::json::parse(slurp(w.dir / "regular/model.json"));
    EXPECT_EQ(side.at("training"), "regular");
    EXPECT_EQ(slurp(w.dir / "regular/train_log.csv").rfind("# verdoc/0.1.0 seed=5 config=", 0), 0u);
    EXPECT_EQ(slurp(w.dir / "feat/train.txt").rfind("# verdoc-features verdoc/0.1.0", 0), 0u);
}

TEST(Cli, PropertyNoneMatchesRegularTraining) {
    const auto& w = ws();
    auto vocab = Vocabulary::from_text(slurp(w.dir / "vocab/vocab.txt"));
    auto train = read_feature_file(slurp(w.dir / "feat/train.txt"), vocab.dim());
    TrainConfig cfg;
    cfg.hidden = {32, 32};
    cfg.epochs = 10;
    cfg.batch_size = 20;
    cfg.seed = 5;
    auto model = train_regular(train, vocab.dim(), cfg);
    EXPECT_EQ(save_model(model), slurp(w.dir / "regular/model.bin"));
}

TEST(Cli, VerifyDefaultsToConfiguredProperties) {
    const auto& w = ws();
    const auto cfg = w.dir / "props.json";
    spit(cfg, R"({"seed": 5, "properties": ["A", "C"]})");
    auto r = run({"verify", "--config", cfg.string(), "--model", w.p("regular/model.bin"), "--features",
                  w.p("feat/test.txt"), "--vocab", w.p("vocab/vocab.txt"), "--out", w.p("verify_props")});
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("VRA A "), std::string::npos);
    EXPECT_NE(r.out.find("VRA C "), std::string::npos);
    EXPECT_EQ(r.out.find("VRA B "), std::string::npos);
}

TEST(Cli, VerifyRegularModelOnInsertion) {
    const auto& w = ws();
    auto r = run({"verify", "--config", w.config.string(), "--model", w.p("regular/model.bin"), "--features",
                  w.p("feat/test.txt"), "--vocab", w.p("vocab/vocab.txt"), "--property", "B", "--out",
                  w.p("verify")});
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("VRA B "), std::string::npos);
    double v = std::stod(r.out.substr(r.out.find("VRA B ") + 6));
    EXPECT_LT(v, 0.2);
    auto csv = slurp(w.dir / "verify/verification.csv");
    EXPECT_EQ(csv.rfind("# verdoc/", 0), 0u);
}

TEST(Cli, OutputsIdenticalAcrossRerunsAndWorkers) {
    const auto& w = ws();
    const std::string cfg = w.config.string();
    ASSERT_EQ(run({"gen-synth", "--config", cfg, "--benign", "60", "--malicious", "40", "--out", w.p("corpus2")}).code,
              0);
    for (const auto& e : fs::recursive_directory_iterator(w.dir / "corpus")) {
        if (!e.is_regular_file()) continue;
        auto rel = fs::relative(e.path(), w.dir / "corpus");
        EXPECT_EQ(slurp(e.path()), slurp(w.dir / "corpus2" / rel)) << rel;
    }
    ASSERT_EQ(run({"train", "--config", cfg, "--features", w.p("feat/train.txt"), "--vocab", w.p("vocab/vocab.txt"),
                   "--property", "none", "--workers", "3", "--out", w.p("regular2")})
                  .code,
              0);
    EXPECT_EQ(slurp(w.dir / "regular/model.bin"), slurp(w.dir / "regular2/model.bin"));
    EXPECT_EQ(slurp(w.dir / "regular/train_log.csv"), slurp(w.dir / "regular2/train_log.csv"));
    auto a = nlohmann::json::parse(slurp(w.dir / "regular/model.json"));
    auto b = nlohmann::json::parse(slurp(w.dir / "regular2/model.json"));
    a.erase("train_minutes");
    b.erase("train_minutes");
    EXPECT_EQ(a, b);
    for (const char* workers : {"1", "3"}) {
        ASSERT_EQ(run({"verify", "--config", cfg, "--model", w.p("regular/model.bin"), "--features",
                       w.p("feat/test.txt"), "--vocab", w.p("vocab/vocab.txt"), "--property", "A,B",
                       "--workers", workers, "--out", w.p(std::string("verify_w") + workers)})
                      .code,
                  0);
    }
    EXPECT_EQ(slurp(w.dir / "verify_w1/verification.csv"), slurp(w.dir / "verify_w3/verification.csv"));
}

TEST(Cli, EvaluateAttackReport) {
    const auto& w = ws();
    const std::string cfg = w.config.string();
    ASSERT_EQ(run({"evaluate", "--config", cfg, "--model", w.p("regular/model.bin"), "--features",
                   w.p("feat/test.txt"), "--vocab", w.p("vocab/vocab.txt"), "--property", "A,B,C,D,E", "--name",
                   "Baseline NN", "--out", w.p("eval")})
                  .code,
              0);
    auto metrics = nlohmann::json::parse(slurp(w.dir / "eval/metrics.json"));
    EXPECT_GE(metrics.at("accuracy").get<double>(), 0.9);
    ASSERT_EQ(run({"attack", "--config", cfg, "--model", w.p("regular/model.bin"), "--features",
                   w.p("feat/test.txt"), "--vocab", w.p("vocab/vocab.txt"), "--corpus", w.p("corpus"), "--attack",
                   "evolutionary", "--max-seeds", "3", "--out", w.p("attack")})
                  .code,
              0);
    auto lines = slurp(w.dir / "attack/attacks.jsonl");
    EXPECT_EQ(lines.rfind("{\"provenance\":", 0), 0u);
    EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 1 + 3);
    ASSERT_EQ(run({"report", "--config", cfg, "--metrics", w.p("eval/metrics.json"), "--attacks",
                   "Baseline NN=" + w.p("attack/attacks.jsonl"), "--out", w.p("report")})
                  .code,
              0);
    auto md = slurp(w.dir / "report/table.md");
    EXPECT_NE(md.find("| Model | Acc | FPR | Train(m) | VRA A | VRA B | VRA C | VRA D | VRA E |"), std::string::npos)
        << md;
    EXPECT_NE(md.find("Baseline NN"), std::string::npos);
    EXPECT_TRUE(fs::exists(w.dir / "report/era_l0.svg"));
    EXPECT_TRUE(fs::exists(w.dir / "report/era_trace.svg"));
    EXPECT_NE(slurp(w.dir / "report/era.csv").find("Baseline NN,l0,0,1"), std::string::npos);
}

TEST(Cli, MonotonicMode) {
    const auto& w = ws();
    ASSERT_EQ(run({"train", "--config", w.config.string(), "--features", w.p("feat/train.txt"), "--vocab",
                   w.p("vocab/vocab.txt"), "--mode", "monotonic", "--learners", "10", "--out", w.p("mono")})
                  .code,
              0);
    EXPECT_TRUE(fs::exists(w.dir / "mono/model.gbdt.json"));
    auto v = run({"verify", "--config", w.config.string(), "--model", w.p("mono/model.gbdt.json"), "--features",
                  w.p("feat/test.txt"), "--vocab", w.p("vocab/vocab.txt"), "--property", "A,B", "--out", w.p("mono")});
    ASSERT_EQ(v.code, 0);
    EXPECT_NE(v.out.find("VRA A (lower bound) "), std::string::npos);
    EXPECT_NE(v.out.find("VRA B "), std::string::npos);
    EXPECT_EQ(v.out.find("VRA B (lower bound)"), std::string::npos);
    ASSERT_EQ(run({"evaluate", "--config", w.config.string(), "--model", w.p("mono/model.gbdt.json"), "--features",
                   w.p("feat/test.txt"), "--vocab", w.p("vocab/vocab.txt"), "--out", w.p("mono")})
                  .code,
              0);
    auto m = nlohmann::json::parse(slurp(w.dir / "mono/metrics.json"));
    EXPECT_EQ(m.at("vra_lower_bound"), nlohmann::json::array({"A", "C"}));
}

TEST(Cli, ExitCodes) {
    const auto& w = ws();
    const std::string cfg = w.config.string();
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({"build-vocab", "--bogus-flag"}).code, 1);
    EXPECT_EQ(run({"build-vocab", "--corpus", w.p("missing"), "--out", w.p("x")}).code, 1);
    spit(w.dir / "bad_config.json", R"({"sead": 1})");
    EXPECT_EQ(run({"gen-synth", "--config", w.p("bad_config.json"), "--out", w.p("x")}).code, 1);
    spit(w.dir / "broken_config.json", "{");
    EXPECT_EQ(run({"gen-synth", "--config", w.p("broken_config.json"), "--out", w.p("x")}).code, 1);
    EXPECT_EQ(run({"train", "--config", cfg, "--features", w.p("feat/train.txt"), "--vocab", w.p("vocab/vocab.txt"),
                   "--property", "Q", "--out", w.p("x")})
                  .code,
              1);
    spit(w.dir / "bad_vocab.txt", "not a vocabulary\n");
    EXPECT_EQ(run({"extract", "--corpus", w.p("corpus"), "--vocab", w.p("bad_vocab.txt"), "--out", w.p("x")}).code,
              2);
    spit(w.dir / "bad_model.bin", "garbage");
    EXPECT_EQ(run({"verify", "--model", w.p("bad_model.bin"), "--features", w.p("feat/test.txt"), "--vocab",
                   w.p("vocab/vocab.txt"), "--property", "A", "--out", w.p("x")})
                  .code,
              2);
    spit(w.dir / "bad_features.txt", "7 1 2\n");
    EXPECT_EQ(run({"verify", "--model", w.p("regular/model.bin"), "--features", w.p("bad_features.txt"), "--vocab",
                   w.p("vocab/vocab.txt"), "--property", "A", "--out", w.p("x")})
                  .code,
              2);
    EXPECT_EQ(run({"--version"}).code, 0);
}

TEST(Cli, ConfigRoundTrip) {
    auto c = ExperimentConfig::from_json(nlohmann::json::parse(R"({"seed": 3, "properties": ["A", "B"]})"));
    auto back = ExperimentConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    EXPECT_EQ(back.provenance(), c.provenance());
    auto d = c;
    d.workers = 7;
    EXPECT_EQ(d.provenance(), c.provenance());
    d.seed = 4;
    EXPECT_NE(d.provenance(), c.provenance());
    EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json::parse(R"({"seed": "x"})")), ConfigError);
    EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json::parse(R"({"test_fraction": 1.5})")), ConfigError);
}
