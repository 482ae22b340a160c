#include "commands.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "face_manifold/autoencoder.hpp"
#include "face_manifold/dataset.hpp"
#include "face_manifold/evaluator.hpp"
#include "face_manifold/morphable_model.hpp"

namespace face_manifold {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  CliRun run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
  }

  // Small model + expression/shape networks shared by the downstream commands.
  void small_pipeline() {
    ASSERT_EQ(run({"make-model", "--vertices", "162", "--p-id", "20", "--out", path("m.fmm")}).code, 0);
    ASSERT_EQ(run({"make-dataset", "--model", path("m.fmm"), "--count", "12", "--copies", "4",
                   "--train-out", path("e_tr.fds"), "--test-out", path("e_te.fds")}).code, 0);
    ASSERT_EQ(run({"make-dataset", "--model", path("m.fmm"), "--group", "shape", "--count", "12",
                   "--copies", "4", "--train-out", path("s_tr.fds"), "--test-out", path("s_te.fds")}).code, 0);
    ASSERT_EQ(run({"train", "--train", path("e_tr.fds"), "--test", path("e_te.fds"), "--out",
                   path("e.fwt"), "--metrics", path("e.json"), "--epochs", "1"}).code, 0);
    ASSERT_EQ(run({"train", "--train", path("s_tr.fds"), "--test", path("s_te.fds"), "--out",
                   path("s.fwt"), "--metrics", path("s.json"), "--epochs", "1"}).code, 0);
  }

  fs::path dir_;
};

TEST_F(Cli, NoSubcommandIsUsageError) {
  EXPECT_EQ(run({}).code, cli::kExitUsageError);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsageError);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST_F(Cli, MakeModelDefaultsLoad) {
  const auto r = run({"make-model", "--out", path("m.fmm")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = load_model(path("m.fmm"));
  EXPECT_EQ(m.vertex_count, 642u);
  EXPECT_EQ(m.param_count(ParamGroup::identity), 199u);
  EXPECT_EQ(m.param_count(ParamGroup::expression), 29u);
}

TEST_F(Cli, MakeModelSameSeedSameBytes) {
  ASSERT_EQ(run({"make-model", "--vertices", "162", "--seed", "7", "--out", path("a.fmm")}).code, 0);
  ASSERT_EQ(run({"make-model", "--vertices", "162", "--seed", "7", "--out", path("b.fmm")}).code, 0);
  ASSERT_EQ(run({"make-model", "--vertices", "162", "--seed", "8", "--out", path("c.fmm")}).code, 0);
  EXPECT_EQ(slurp(path("a.fmm")), slurp(path("b.fmm")));
  EXPECT_NE(slurp(path("a.fmm")), slurp(path("c.fmm")));
}

TEST_F(Cli, MakeModelUsageErrors) {
  EXPECT_EQ(run({"make-model", "--p-id", "0", "--out", path("m.fmm")}).code, cli::kExitUsageError);
  EXPECT_EQ(run({"make-model", "--vertices", "100", "--out", path("m.fmm")}).code, cli::kExitUsageError);
  EXPECT_EQ(run({"make-model", "--decay", "1.5", "--out", path("m.fmm")}).code, cli::kExitUsageError);
  EXPECT_EQ(run({"make-model"}).code, cli::kExitUsageError);
  EXPECT_FALSE(fs::exists(path("m.fmm")));
}

TEST_F(Cli, MakeDatasetExpressionAndShape) {
  ASSERT_EQ(run({"make-model", "--vertices", "162", "--out", path("m.fmm")}).code, 0);
  auto r = run({"make-dataset", "--model", path("m.fmm"), "--group", "expression", "--sigma", "2",
                "--copies", "50", "--count", "10", "--train-out", path("a.fds"), "--test-out", path("b.fds")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto tr = load_dataset(path("a.fds")), te = load_dataset(path("b.fds"));
  EXPECT_EQ(tr.size() + te.size(), 500u);
  EXPECT_EQ(te.size(), 50u);
  EXPECT_EQ(tr.normalization, 1.0);

  r = run({"make-dataset", "--model", path("m.fmm"), "--group", "shape", "--sigma", "500000",
           "--copies", "100", "--count", "10", "--train-out", path("c.fds"), "--test-out", path("d.fds")});
  ASSERT_EQ(r.code, 0) << r.err;
  tr = load_dataset(path("c.fds"));
  EXPECT_EQ(tr.group, ParamGroup::identity);
  EXPECT_EQ(tr.normalization, kShapeNormalization);
  EXPECT_EQ(tr.size() + load_dataset(path("d.fds")).size(), 1000u);
}

TEST_F(Cli, MakeDatasetUsageErrors) {
  ASSERT_EQ(run({"make-model", "--vertices", "162", "--out", path("m.fmm")}).code, 0);
  const std::vector<std::string> base{"make-dataset", "--model", path("m.fmm"), "--train-out",
                                      path("a.fds"), "--test-out", path("b.fds")};
  auto with = [&](std::vector<std::string> extra) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args).code;
  };
  EXPECT_EQ(with({"--test-fraction", "1.5"}), cli::kExitUsageError);
  EXPECT_EQ(with({"--test-fraction", "0"}), cli::kExitUsageError);
  EXPECT_EQ(with({"--group", "torso"}), cli::kExitUsageError);
  EXPECT_EQ(with({"--sigma", "-1"}), cli::kExitUsageError);
  EXPECT_EQ(with({"--copies", "0"}), cli::kExitUsageError);
}

TEST_F(Cli, MissingInputIsRuntimeError) {
  const auto r = run({"train", "--train", path("nope.fds"), "--test", path("nope.fds"), "--out",
                      path("w.fwt"), "--metrics", path("m.json")});
  EXPECT_EQ(r.code, cli::kExitRuntimeError);
  EXPECT_NE(r.err.find("not found"), std::string::npos) << r.err;
}

TEST_F(Cli, TrainDefaultsEchoIntoManifest) {
  ASSERT_EQ(run({"make-model", "--vertices", "162", "--out", path("m.fmm")}).code, 0);
  ASSERT_EQ(run({"make-dataset", "--model", path("m.fmm"), "--count", "6", "--copies", "3",
                 "--train-out", path("a.fds"), "--test-out", path("b.fds")}).code, 0);
  const auto r = run({"train", "--train", path("a.fds"), "--test", path("b.fds"), "--out", path("w.fwt"),
                      "--metrics", path("m.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto metrics = nlohmann::ordered_json::parse(slurp(path("m.json")));
  EXPECT_EQ(metrics["manifest"]["config"].dump(), R"({"epochs":10,"learning_rate":0.001,"batch_size":128})");
  EXPECT_EQ(metrics["manifest"]["subcommand"], "train");
  EXPECT_EQ(metrics["manifest"]["version"], cli::version());
  EXPECT_EQ(metrics["train_loss"].size(), 10u);
  EXPECT_EQ(metrics["test_loss"].size(), 10u);
  EXPECT_EQ(line_count(r.out), 11u);  // one progress line per epoch plus a summary
  EXPECT_EQ(load_weights(path("w.fwt")).spec.input_length, 29u);
}

TEST_F(Cli, GenerateCountsAndObjExport) {
  small_pipeline();
  const auto r = run({"generate", "--model", path("m.fmm"), "--shape-weights", path("s.fwt"),
                      "--exp-weights", path("e.fwt"), "--count", "100", "--export-obj", "3",
                      "--obj-dir", path("obj"), "--shape-out", path("gs.fds"), "--exp-out", path("ge.fds")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_dataset(path("gs.fds")).size(), 100u);
  EXPECT_EQ(load_dataset(path("ge.fds")).size(), 100u);
  std::size_t objs = 0;
  for (const auto& e : fs::directory_iterator(path("obj"))) objs += e.path().extension() == ".obj";
  EXPECT_EQ(objs, 12u);
  const auto obj = slurp(path("obj/face_0000_exp_denoised.obj"));
  EXPECT_EQ(obj.rfind("v ", 0), 0u);
  EXPECT_NE(obj.find("\nf "), std::string::npos);
}

TEST_F(Cli, GenerateDefaultsAreTenAndFifteen) {
  small_pipeline();
  const auto model = load_model(path("m.fmm"));
  ASSERT_EQ(run({"generate", "--model", path("m.fmm"), "--shape-weights", path("s.fwt"), "--exp-weights",
                 path("e.fwt"), "--count", "5", "--shape-out", path("a.fds"), "--exp-out", path("b.fds")}).code, 0);
  const auto s = load_dataset(path("a.fds")), e = load_dataset(path("b.fds"));
  const auto s_w = load_weights(path("s.fwt"));
  const auto e_w = load_weights(path("e.fwt"));
  const auto lib = generate_synthetic(model, &s_w, &e_w, 5, 10.0, 15.0, 0);
  EXPECT_EQ(s, lib.shape);
  EXPECT_EQ(e, lib.expression);
}

TEST_F(Cli, EvaluateSweepDiversityScatter) {
  small_pipeline();
  ASSERT_EQ(run({"generate", "--model", path("m.fmm"), "--shape-weights", path("s.fwt"), "--exp-weights",
                 path("e.fwt"), "--count", "100", "--shape-out", path("gs.fds"), "--exp-out", path("ge.fds")}).code, 0);
  const auto r = run({"evaluate", "--sweep", path("sweep.csv"), "--weights", path("e.fwt"), "--clean",
                      path("e_te.fds"), "--diversity", path("div.json"), "--scatter", path("sc.csv"),
                      "--scatter-cap", "70", "--dataset", "gaussian=" + path("e_tr.fds"), "--dataset",
                      "denoised=" + path("ge.fds"), "--dataset", "uniform@noisy=" + path("ge.fds")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto sweep = slurp(path("sweep.csv"));
  EXPECT_EQ(line_count(sweep), 1u + 9u);
  const auto div = nlohmann::json::parse(slurp(path("div.json")));
  EXPECT_EQ(div["traces"].size(), 3u);
  EXPECT_EQ(div["ratios"].size(), 3u);
  EXPECT_EQ(div["manifest"]["subcommand"], "evaluate");
  // e_tr holds 11 clean samples x 4 copies; the generated sets hold 100.
  const auto sc = slurp(path("sc.csv"));
  EXPECT_EQ(line_count(sc), 1u + 44u + 70u + 70u);
  EXPECT_EQ(run({"evaluate", "--sweep", path("x.csv")}).code, cli::kExitUsageError);
  EXPECT_EQ(run({"evaluate"}).code, cli::kExitUsageError);
  EXPECT_EQ(run({"evaluate", "--diversity", path("d.json"), "--dataset", "nameless"}).code, cli::kExitUsageError);
}

TEST_F(Cli, DenoiseMatchesLibrary) {
  small_pipeline();
  const auto r = run({"denoise", "--weights", path("e.fwt"), "--in", path("e_te.fds"), "--out", path("dn.fds")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto in = load_dataset(path("e_te.fds"));
  const auto out = load_dataset(path("dn.fds"));
  const auto w = load_weights(path("e.fwt"));
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_EQ(out.pairs[i].noisy, in.pairs[i].noisy);
    EXPECT_EQ(out.pairs[i].clean, forward(w, in.pairs[i].noisy).output);
  }
  EXPECT_EQ(run({"denoise", "--weights", path("s.fwt"), "--in", path("e_te.fds"), "--out", path("x.fds")}).code,
            cli::kExitRuntimeError);
}

TEST_F(Cli, ThreadsEnvironmentFallbackKeepsBytes) {
  ASSERT_EQ(run({"make-model", "--vertices", "162", "--out", path("m.fmm")}).code, 0);
  auto make = [&](const std::string& suffix) {
    return run({"make-dataset", "--model", path("m.fmm"), "--count", "8", "--copies", "5",
                "--train-out", path("tr" + suffix), "--test-out", path("te" + suffix)}).code;
  };
  ASSERT_EQ(make("1"), 0);
  ::setenv("FACE_MANIFOLD_THREADS", "3", 1);
  ASSERT_EQ(make("3"), 0);
  ::unsetenv("FACE_MANIFOLD_THREADS");
  EXPECT_EQ(slurp(path("tr1")), slurp(path("tr3")));
  EXPECT_EQ(slurp(path("te1")), slurp(path("te3")));
}

}  // namespace
}  // namespace face_manifold
