#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lfvg/checkpoint.hpp"
#include "lfvg/feature_store.hpp"
#include "lfvg_cli/cli.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace lfvg;

namespace {

struct Invocation {
  int code = -1;
  std::string out, err;
};

Invocation lfvg_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Invocation r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("lfvg_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ::unsetenv("LFVG_SEED");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string synth(const std::string& name, const std::string& seed = "3", const std::string& videos = "10") {
    const auto r = lfvg_run({"synth", "--out", path(name), "--videos", videos, "--segments", "12", "--events", "3",
                             "--dim", "12", "--latent", "6", "--seed", seed});
    EXPECT_EQ(r.code, cli::kExitOk) << r.err;
    return path(name);
  }

  std::vector<std::string> tiny_train(const std::string& data, const std::string& out) const {
    return {"train",    "--data",  data, "--out", out,      "--epochs", "1", "--hidden",
            "16",       "--batch-size", "8",  "--quiet", "--seed", "5"};
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SynthIsByteIdenticalForAFixedSeed) {
  const auto a = synth("a"), b = synth("b");
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().filename() == "run_manifest.json") continue;
    const fs::path other = fs::path(b) / fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path();
  }
  const auto c = synth("c", "4");
  EXPECT_NE(slurp(fs::path(a) / "queries.bin"), slurp(fs::path(c) / "queries.bin"));
}

TEST_F(CliTest, SeedFallsBackToEnvironmentThenZero) {
  const auto explicit0 = synth("z", "0");
  ASSERT_EQ(lfvg_run({"synth", "--out", path("d"), "--videos", "10", "--segments", "12", "--events", "3", "--dim",
                      "12", "--latent", "6"})
                .code,
            0);
  EXPECT_EQ(slurp(fs::path(explicit0) / "queries.bin"), slurp(dir_ / "d" / "queries.bin"));
  const json m = json::parse(slurp(dir_ / "d" / "run_manifest.json"));
  EXPECT_EQ(m["seed"], 0);

  ::setenv("LFVG_SEED", "3", 1);
  ASSERT_EQ(lfvg_run({"synth", "--out", path("e"), "--videos", "10", "--segments", "12", "--events", "3", "--dim",
                      "12", "--latent", "6"})
                .code,
            0);
  ::unsetenv("LFVG_SEED");
  const auto explicit3 = synth("t", "3");
  EXPECT_EQ(slurp(fs::path(explicit3) / "queries.bin"), slurp(dir_ / "e" / "queries.bin"));
  const json me = json::parse(slurp(dir_ / "e" / "run_manifest.json"));
  EXPECT_EQ(me["seed"], 3);
  // The manifest spells out the resolved seed so replay does not need the environment.
  const auto argv = me["argv"].get<std::vector<std::string>>();
  EXPECT_EQ(argv.back(), "3");
}

TEST_F(CliTest, ImportCheckSummarizesStore) {
  const auto data = synth("s");
  const auto r = lfvg_run({"import-check", "--data", data});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["videos"], 10);
  EXPECT_EQ(j["queries"], 30);
  EXPECT_EQ(j["frames"], 10 * 12 * 3);
  EXPECT_EQ(j["segment_dim"], 12);
  EXPECT_TRUE(j.contains("alignment_score"));
}

TEST_F(CliTest, ProposalsDumpSimilarityAndSpans) {
  const auto data = synth("s");
  const Dataset d = import_feature_store(data);
  const auto r = lfvg_run({"proposals", "--data", data, "--video", d.videos[1].id, "--k", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  ASSERT_EQ(j["videos"].size(), 1u);
  const json& v = j["videos"][0];
  EXPECT_EQ(v["video_id"], d.videos[1].id);
  ASSERT_EQ(v["similarity"].size(), 12u);
  EXPECT_NEAR(v["similarity"][4][4].get<double>(), 1.0, 1e-9);
  ASSERT_FALSE(v["proposals"].empty());
  for (const auto& p : v["proposals"]) {
    EXPECT_LE(p["first"].get<int>(), p["last"].get<int>());
    EXPECT_NEAR(p["start"].get<double>(), p["first"].get<double>() / 12.0, 1e-12);
  }
  EXPECT_EQ(lfvg_run({"proposals", "--data", data, "--video", "absent"}).code, cli::kExitUsage);
}

TEST_F(CliTest, TrainEvalRoundTrip) {
  const auto data = synth("s");
  const auto ck = path("ck");
  const auto t = lfvg_run(tiny_train(data, ck));
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(fs::path(ck) / "header.json"));
  EXPECT_TRUE(fs::exists(fs::path(ck) / "run_manifest.json"));

  const std::string csv = slurp(fs::path(ck) / "loss.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,epoch,loss_reg,loss_att,total");

  const json m = json::parse(slurp(fs::path(ck) / "run_manifest.json"));
  for (const char* key : {"command", "argv", "config", "config_hash", "seed", "build", "inputs", "outputs", "duration_s"}) {
    EXPECT_TRUE(m.contains(key)) << key;
  }
  EXPECT_EQ(m["config"]["epochs"], 1);
  EXPECT_EQ(m["config"]["hidden"], 16);
  EXPECT_EQ(m["seed"], 5);

  const auto e = lfvg_run({"eval", "--checkpoint", ck, "--data", data, "--out", path("ev.json")});
  ASSERT_EQ(e.code, 0) << e.err;
  const json ev = json::parse(slurp(dir_ / "ev.json"));
  EXPECT_EQ(ev["n_queries"], 30);
  EXPECT_GE(ev["miou"].get<double>(), 0.0);
  EXPECT_LE(ev["miou"].get<double>(), 100.0);
  EXPECT_GT(ev["random_baseline_miou"].get<double>(), 0.0);
  EXPECT_TRUE(fs::exists(dir_ / "ev.json.manifest.json"));
}

TEST_F(CliTest, OracleEvaluationIsPerfect) {
  const auto data = synth("s");
  const auto r = lfvg_run({"eval", "--oracle", "--data", data, "--out", path("o.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(slurp(dir_ / "o.json"));
  EXPECT_DOUBLE_EQ(j["miou"].get<double>(), 100.0);
  EXPECT_DOUBLE_EQ(j["recall"]["R@0.7"].get<double>(), 100.0);
}

TEST_F(CliTest, ConfigPrecedencePresetThenFileThenFlags) {
  const auto data = synth("s");
  {
    std::ofstream cfg(path("cfg.json"));
    cfg << R"({"epochs": 2, "hidden": 24, "lambda": 0.5})";
  }
  const auto ck = path("ck");
  const auto r = lfvg_run({"train", "--data", data, "--out", ck, "--config", path("cfg.json"), "--hidden", "16",
                           "--batch-size", "16", "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Checkpoint c = load_checkpoint(ck);
  EXPECT_EQ(c.config.epochs, 2);
  EXPECT_EQ(c.config.hidden, 16);
  EXPECT_DOUBLE_EQ(c.config.lambda, 0.5);
  EXPECT_EQ(c.config.k, 5);
}

TEST_F(CliTest, PaperPresetValues) {
  const auto data = synth("s");
  // An invalid override aborts after resolution, so nothing is trained.
  const auto r = lfvg_run({"train", "--data", data, "--out", path("ck"), "--preset", "paper", "--epochs", "0"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  const TrainConfig p = preset("paper");
  EXPECT_EQ(p.batch_size, 256);
  EXPECT_EQ(p.hidden, 256);
  EXPECT_EQ(p.n_candidates, 9);
  EXPECT_DOUBLE_EQ(p.xi, 1e-4);
  EXPECT_DOUBLE_EQ(p.tau, 1.0);
  EXPECT_EQ(lfvg_run({"train", "--data", data, "--out", path("x"), "--preset", "huge"}).code, cli::kExitUsage);
}

TEST_F(CliTest, InferReportsSecondsAndAttention) {
  const auto data = synth("s");
  const auto ck = path("ck");
  ASSERT_EQ(lfvg_run(tiny_train(data, ck)).code, 0);
  const Dataset d = import_feature_store(data);
  const auto& q = d.queries[4];
  const auto r = lfvg_run({"infer", "--checkpoint", ck, "--data", data, "--query", q.id});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  const auto& v = d.videos[*d.find_video(q.video_id)];
  EXPECT_EQ(j["video_id"], v.id);
  EXPECT_EQ(j["attention"].size(), 12u);
  double mass = 0.0;
  for (double a : j["attention"]) mass += a;
  EXPECT_NEAR(mass, 1.0, 1e-9);
  const double ts = j["t_s"], te = j["t_e"];
  EXPECT_LE(0.0, ts);
  EXPECT_LE(ts, te);
  EXPECT_LE(te, 1.0);
  EXPECT_NEAR(j["t_s_seconds"].get<double>(), ts * v.duration_s, 1e-12);
  EXPECT_NEAR(j["t_e_seconds"].get<double>(), te * v.duration_s, 1e-12);

  // Same feature through a standalone blob.
  const auto b = lfvg_run({"infer", "--checkpoint", ck, "--data", data, "--query-blob",
                           (fs::path(data) / "queries.bin").string(), "--row", "4", "--video", v.id});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(json::parse(b.out), j);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(lfvg_run({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(lfvg_run({"train", "--help"}).code, cli::kExitOk);
  EXPECT_EQ(lfvg_run({}).code, cli::kExitUsage);
  EXPECT_EQ(lfvg_run({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(lfvg_run({"train", "--data", path("nowhere")}).code, cli::kExitUsage);
  EXPECT_EQ(lfvg_run({"import-check", "--data", path("nowhere")}).code, cli::kExitUsage);
  EXPECT_EQ(lfvg_run({"synth", "--out", path("s"), "--dim", "4"}).code, cli::kExitUsage);

  const auto data = synth("s");
  EXPECT_EQ(lfvg_run({"eval", "--data", data}).code, cli::kExitUsage);
  EXPECT_EQ(lfvg_run({"infer", "--checkpoint", path("none"), "--data", data, "--query", "x"}).code, cli::kExitUsage);
  EXPECT_EQ(lfvg_run({"ablate", "--suite", "unknown"}).code, cli::kExitUsage);
  EXPECT_EQ(lfvg_run({"ablate", "--suite", "losses", "--seeds", "0,1"}).code, cli::kExitUsage);

  // A split without queries cannot be evaluated.
  Dataset empty = import_feature_store(data);
  empty.queries.clear();
  export_feature_store(empty, path("noq"));
  EXPECT_EQ(lfvg_run({"eval", "--oracle", "--data", path("noq")}).code, cli::kExitUsage);

  // Non-finite training aborts with the numeric code and names the step.
  const auto r = lfvg_run({"train", "--data", data, "--out", path("ck"), "--lr", "1e300", "--epochs", "2", "--hidden",
                           "16", "--quiet"});
  EXPECT_EQ(r.code, cli::kExitNumeric) << r.err;
  EXPECT_NE(r.err.find("step"), std::string::npos);
}

TEST_F(CliTest, ReplayIsBitIdentical) {
  const auto data = synth("s");
  const auto ck = path("ck");
  ASSERT_EQ(lfvg_run(tiny_train(data, ck)).code, 0);
  const auto r = lfvg_run({"replay", "--manifest", (fs::path(ck) / "run_manifest.json").string(), "--out", path("ck2")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& e : fs::recursive_directory_iterator(ck)) {
    if (!e.is_regular_file() || e.path().filename() == "run_manifest.json") continue;
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "ck2" / fs::relative(e.path(), ck))) << e.path();
  }
  const json a = json::parse(slurp(fs::path(ck) / "run_manifest.json"));
  const json b = json::parse(slurp(dir_ / "ck2" / "run_manifest.json"));
  EXPECT_EQ(a["config_hash"], b["config_hash"]);

  // Replaying synth regenerates the same store.
  const auto s2 = lfvg_run({"replay", "--manifest", (fs::path(data) / "run_manifest.json").string(), "--out",
                            path("s2")});
  ASSERT_EQ(s2.code, 0) << s2.err;
  EXPECT_EQ(slurp(fs::path(data) / "queries.bin"), slurp(dir_ / "s2" / "queries.bin"));
}

TEST_F(CliTest, NFramesSuiteWritesOneRowPerVariantAndSeed) {
  const auto r = lfvg_run({"ablate", "--suite", "n-frames", "--seeds", "0,1,2", "--train-videos", "4",
                           "--test-videos", "3", "--segments", "12", "--events", "3", "--dim", "6", "--latent", "4",
                           "--epochs", "1", "--hidden", "8", "--batch-size", "8", "--quiet", "--csv", path("r.csv"),
                           "--out", path("r.json"), "--assert-orderings"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(dir_ / "r.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "variant,seed,r03,r05,r07,miou");
  std::map<std::string, int> rows;
  while (std::getline(csv, line)) ++rows[line.substr(0, line.find(','))];
  const std::map<std::string, int> want{{"N=1", 3}, {"N=2", 3}, {"N=4", 3}, {"N=8", 3}, {"N=9", 3}, {"N=16", 3}};
  EXPECT_EQ(rows, want);
  const json j = json::parse(slurp(dir_ / "r.json"));
  EXPECT_TRUE(j["orderings"].empty());
}
