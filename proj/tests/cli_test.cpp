#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ptl/checkpoint.hpp"
#include "ptl/cli.hpp"
#include "ptl/dataset.hpp"
#include "ptl/training.hpp"

using namespace ptl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ptl");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() /
           ("ptl_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  void TearDown() override { fs::remove_all(root); }

  // a small, fast training configuration
  std::vector<std::string> tiny(const std::string& out, std::size_t epochs = 2) const {
    return {"--out", (root / out).string(), "--set", "data.classes=sphere,line", "data.per_class=3",
            "data.test_per_class=2", "data.cloud_points=32", "model.widths=8,8", "model.k=4",
            "model.head_hidden=8", "train.points=16", "train.batch_size=4",
            "train.epochs=" + std::to_string(epochs)};
  }

  fs::path root;
};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_F(CliTest, UsageErrorsAreValidationFailures) {
  EXPECT_EQ(cli({}).code, kExitValidation);
  EXPECT_EQ(cli({"bogus"}).code, kExitValidation);
  EXPECT_EQ(cli({"train"}).code, kExitValidation);  // --out is required
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST_F(CliTest, TrainWritesArtifactsAndEchoesConfig) {
  const Outcome r = cli(cat({"train"}, tiny("run")));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"config.txt", "history.csv", "final.ptck", "best.ptck"})
    EXPECT_TRUE(fs::exists(root / "run" / f)) << f;
  EXPECT_NE(r.out.find("epoch    2"), std::string::npos) << r.out;
  EXPECT_NE(r.err.find("train set: 6 examples; sphere=3 line=3"), std::string::npos) << r.err;
  const std::string cfg = slurp(root / "run" / "config.txt");
  EXPECT_NE(cfg.find("train.epochs=2\n"), std::string::npos);
  EXPECT_NE(cfg.find("model.widths=8,8\n"), std::string::npos);
  const RunHistory h = RunHistory::read_csv(root / "run" / "history.csv");
  EXPECT_EQ(h.records.size(), 2u);
  const Checkpoint ck = load_checkpoint(root / "run" / "final.ptck");
  EXPECT_EQ(ck.class_names, (std::vector<std::string>{"sphere", "line"}));
  EXPECT_EQ(ck.meta.epoch, 2u);
}

TEST_F(CliTest, RerunFromEchoedConfigIsBitwise) {
  ASSERT_EQ(cli(cat({"train"}, tiny("a"))).code, kExitOk);
  const Outcome b = cli({"train", "--config", (root / "a" / "config.txt").string(), "--out", (root / "b").string()});
  ASSERT_EQ(b.code, kExitOk) << b.err;
  for (const char* f : {"config.txt", "history.csv", "final.ptck", "best.ptck"})
    EXPECT_EQ(slurp(root / "a" / f), slurp(root / "b" / f)) << f;
}

TEST_F(CliTest, OutputDirectoryNeedsForce) {
  ASSERT_EQ(cli(cat({"train"}, tiny("run", 1))).code, kExitOk);
  const Outcome again = cli(cat({"train"}, tiny("run", 1)));
  EXPECT_EQ(again.code, kExitValidation);
  EXPECT_NE(again.err.find("--force"), std::string::npos);
  EXPECT_EQ(cli(cat({"train", "--force"}, tiny("run", 1))).code, kExitOk);
}

TEST_F(CliTest, ValidationErrorsHaveNoSideEffects) {
  auto args = cat({"train"}, tiny("x"));
  args.push_back("model.nonsense=3");
  const Outcome unknown = cli(args);
  EXPECT_EQ(unknown.code, kExitValidation);
  EXPECT_NE(unknown.err.find("model.nonsense"), std::string::npos) << unknown.err;
  EXPECT_FALSE(fs::exists(root / "x"));

  const Outcome missing = cli({"train", "--out", (root / "y").string(), "--set", "data.source=dir",
                           "data.dir=" + (root / "nowhere").string()});
  EXPECT_EQ(missing.code, kExitValidation);
  EXPECT_FALSE(fs::exists(root / "y"));

  EXPECT_EQ(cli(cat({"train"}, cat(tiny("z"), {"train.epochs=0"}))).code, kExitValidation);
}

TEST_F(CliTest, FinetuneFromMissingCheckpointNamesPath) {
  const std::string ghost = (root / "ghost.ptck").string();
  const Outcome r = cli(cat({"finetune", "--from", ghost}, tiny("ft")));
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find(ghost), std::string::npos) << r.err;
}

TEST_F(CliTest, FinetuneFreezeAndComparison) {
  ASSERT_EQ(cli(cat({"train"}, tiny("src"))).code, kExitOk);
  ASSERT_EQ(cli(cat({"train"}, cat(tiny("scratch"), {"data.classes=plane,cross,helix"}))).code, kExitOk);
  auto args = cat({"finetune", "--from", (root / "src" / "best.ptck").string(), "--baseline",
                   (root / "scratch" / "history.csv").string()},
                  cat(tiny("ft"), {"data.classes=plane,cross,helix", "train.freeze_backbone=true"}));
  const Outcome r = cli(args);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Checkpoint src = load_checkpoint(root / "src" / "best.ptck");
  const Checkpoint ft = load_checkpoint(root / "ft" / "final.ptck");
  EXPECT_EQ(ft.params.config.num_classes, 3u);
  for (const auto& [name, t] : src.params.tensors)
    if (!is_head_param(name)) EXPECT_TRUE(bitwise_equal(t, ft.params.tensors.at(name))) << name;
  const std::string table = slurp(root / "ft" / "comparison.md");
  EXPECT_NE(table.find("| Epochs | Method | Accuracy | F1 Score |"), std::string::npos);
  EXPECT_NE(table.find("Fine Tuning"), std::string::npos);
  EXPECT_NE(table.find("Retraining"), std::string::npos);
}

TEST_F(CliTest, EvalReportsAndRejectsClassMismatch) {
  ASSERT_EQ(cli(cat({"train"}, tiny("run"))).code, kExitOk);
  const std::string ck = (root / "run" / "final.ptck").string();
  const Outcome ok = cli({"eval", "--checkpoint", ck, "--config", (root / "run" / "config.txt").string(), "--out",
                      (root / "ev").string()});
  ASSERT_EQ(ok.code, kExitOk) << ok.err;
  EXPECT_NE(ok.out.find("examples 4\naccuracy "), std::string::npos) << ok.out;
  EXPECT_NE(ok.out.find("confusion"), std::string::npos);
  for (const char* f : {"metrics.csv", "per_class.csv", "confusion.csv", "predictions.csv"})
    EXPECT_TRUE(fs::exists(root / "ev" / f)) << f;

  const Outcome bad = cli({"eval", "--checkpoint", ck, "--out", (root / "ev2").string(), "--set",
                       "data.classes=sphere,line,torus", "data.cloud_points=32"});
  EXPECT_EQ(bad.code, kExitValidation);
  EXPECT_NE(bad.err.find("checkpoint has 2 classes, dataset has 3"), std::string::npos) << bad.err;
}

TEST_F(CliTest, EvalOfPerfectPredictorIsHundred) {
  // two trivially separable families trained to convergence
  auto args = cat({"train"}, tiny("run", 40));
  args.push_back("train.lr=0.01");
  ASSERT_EQ(cli(args).code, kExitOk);
  const Outcome r = cli({"eval", "--checkpoint", (root / "run" / "best.ptck").string(), "--config",
                     (root / "run" / "config.txt").string(), "--out", (root / "ev").string(), "--set",
                     "eval.split=train", "eval.points=16"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("accuracy 100\n"), std::string::npos) << r.out;
}

TEST_F(CliTest, PreprocessMeshes) {
  const fs::path in = root / "meshes";
  fs::create_directories(in / "tri" / "train");
  std::ofstream(in / "tri" / "train" / "a.off") << "OFF\n3 1 0\n1 0 0\n0 2 0\n0 0 3\n3 0 1 2\n";
  const Outcome r = cli({"preprocess", "--input", in.string(), "--out", (root / "p1").string(), "--points", "64"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const PointCloud c = read_pcld(root / "p1" / "tri" / "train" / "a.pcld");
  EXPECT_EQ(c.positions.size(), 64u);
  // normalized, but still coplanar: all points share one plane through their centroid
  const auto& p0 = c.positions[0];
  const auto& p1 = c.positions[1];
  const auto& p2 = c.positions[2];
  const Point3 u{p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]}, v{p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]};
  const Point3 n{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
  const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
  for (const auto& p : c.positions)
    EXPECT_NEAR((n[0] * (p[0] - p0[0]) + n[1] * (p[1] - p0[1]) + n[2] * (p[2] - p0[2])) / len, 0.0, 1e-9);
  EXPECT_NE(slurp(root / "p1" / "manifest.csv").find("tri/train/a.pcld,tri,64"), std::string::npos);

  ASSERT_EQ(cli({"preprocess", "--input", in.string(), "--out", (root / "p2").string(), "--points", "64"}).code,
            kExitOk);
  EXPECT_EQ(slurp(root / "p1" / "tri" / "train" / "a.pcld"), slurp(root / "p2" / "tri" / "train" / "a.pcld"));

  std::ofstream(in / "tri" / "train" / "broken.off") << "OFF\n3 1 0\n0 0 0\n1 0\n";
  const Outcome fail = cli({"preprocess", "--input", in.string(), "--out", (root / "p3").string()});
  EXPECT_EQ(fail.code, kExitRuntime);
  const Outcome skip = cli({"preprocess", "--input", in.string(), "--out", (root / "p4").string(), "--skip-bad"});
  EXPECT_EQ(skip.code, kExitOk);
  EXPECT_NE(slurp(root / "p4" / "errors.csv").find("broken.off"), std::string::npos);
}

TEST_F(CliTest, GradcheckFaultInjection) {
  const Outcome bad_op = cli({"gradcheck", "--seeds", "1", "--inject-fault", "nope"});
  EXPECT_EQ(bad_op.code, kExitValidation);
  const Outcome fault = cli({"gradcheck", "--seeds", "1", "--inject-fault", "softmax"});
  EXPECT_EQ(fault.code, kExitRuntime);
  EXPECT_NE(fault.out.find("FAIL"), std::string::npos) << fault.out;
}

TEST_F(CliTest, EvalFromTrainingConfigReproducesBestEvalAccuracy) {
  ASSERT_EQ(cli(cat({"train"}, tiny("run", 3))).code, kExitOk);
  const RunHistory h = RunHistory::read_csv(root / "run" / "history.csv");
  double best = -1.0;
  for (const auto& r : h.records) best = std::max(best, r.eval_acc);
  const Outcome r = cli({"eval", "--checkpoint", (root / "run" / "best.ptck").string(), "--config",
                     (root / "run" / "config.txt").string(), "--out", (root / "ev").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto at = r.out.find("accuracy ");
  ASSERT_NE(at, std::string::npos);
  EXPECT_NEAR(std::stod(r.out.substr(at + 9)), best, 1e-4) << r.out;
  EXPECT_NE(slurp(root / "ev" / "config.txt").find("eval.points=16\n"), std::string::npos);
}
