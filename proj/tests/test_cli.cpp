#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "emsa/emsa.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            (std::string("emsa_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  int run(const std::string& args) {
    const std::string cmd = std::string(EMSA_CLI) + " " + args + " > " + (root_ / "log.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string log() const {
    std::ifstream is(root_ / "log.txt");
    return {std::istreambuf_iterator<char>(is), {}};
  }
  std::string p(const std::string& rel) const { return (root_ / rel).string(); }
  json read_json(const std::string& rel) const {
    std::ifstream is(root_ / rel);
    return json::parse(is);
  }
  static std::string bytes(const fs::path& f) {
    std::ifstream is(f, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
  }

  fs::path root_;
};

}  // namespace

TEST_F(Cli, GroundTruthRoundTripScoresOne) {
  ASSERT_EQ(run("synth --seed 7 --n 5 --output " + p("ds")), 0) << log();
  ASSERT_EQ(run("encode-gt --input " + p("ds/test") + " --output " + p("enc")), 0) << log();
  ASSERT_EQ(run("decode --input " + p("enc") + " --output " + p("dec")), 0) << log();
  ASSERT_EQ(run("merge --input " + p("dec") + " --output " + p("mrg")), 0) << log();
  ASSERT_EQ(run("eval --input " + p("mrg") + " --gt " + p("ds/test") + " --output " + p("ev") +
                " --plot " + p("plots")),
            0)
      << log();
  const json m = read_json("ev/metrics.json");
  EXPECT_EQ(m.at("panoptic").at("all").at("pq").get<double>(), 1.0);
  EXPECT_EQ(m.at("miou").get<double>(), 1.0);
  EXPECT_LT(m.at("maae_matched").get<double>(), 1e-4);
  EXPECT_TRUE(fs::exists(p("plots/pq_per_class.png")));
  EXPECT_TRUE(fs::exists(p("mrg/000000/panoptic.png")));
}

TEST_F(Cli, ShiftedPredictionsScoreBelowOne) {
  ASSERT_EQ(run("synth --seed 3 --n 2 --output " + p("ds")), 0) << log();
  ASSERT_EQ(run("encode-gt --input " + p("ds/test") + " --output " + p("enc")), 0);
  ASSERT_EQ(run("decode --input " + p("enc") + " --output " + p("dec")), 0);
  ASSERT_EQ(run("merge --input " + p("dec") + " --output " + p("mrg")), 0);
  for (const char* id : {"000000", "000001"}) {
    for (const char* f : {"semantic.png", "instance.png"}) {
      const auto path = root_ / "mrg" / id / f;
      const emsa::LabelMap m = emsa::read_label_png(path);
      emsa::LabelMap shifted(m.height, m.width);
      for (std::size_t r = 0; r < m.height; ++r)
        for (std::size_t c = 0; c < m.width; ++c) shifted(r, c) = m(r, c >= 12 ? c - 12 : 0);
      emsa::write_label_png(path, shifted, std::string(f) == "semantic.png" ? 8 : 16);
    }
  }
  ASSERT_EQ(run("eval --input " + p("mrg") + " --gt " + p("ds/test") + " --output " + p("ev")), 0) << log();
  EXPECT_LT(read_json("ev/metrics.json").at("panoptic").at("all").at("pq").get<double>(), 1.0);
}

TEST_F(Cli, ForwardWritesContractedShapesIndependentOfThreads) {
  ASSERT_EQ(run("synth --seed 1 --n 1 --height 96 --width 128 --output " + p("ds")), 0) << log();
  ASSERT_EQ(run("forward --seed 2 --threads 1 --input " + p("ds/test") + " --output " + p("f1") +
                " --save-weights " + p("w")),
            0)
      << log();
  ASSERT_EQ(run("forward --threads 3 --weights " + p("w") + " --input " + p("ds/test") +
                " --output " + p("f3")),
            0)
      << log();
  const fs::path d1 = root_ / "f1" / "000000", d3 = root_ / "f3" / "000000";
  EXPECT_EQ(emsa::load_tensor(d1 / "semantic_logits.emt").shape(), (emsa::Shape{40, 96, 128}));
  EXPECT_EQ(emsa::load_tensor(d1 / "semantic_side0.emt").shape(), (emsa::Shape{40, 6, 8}));
  EXPECT_EQ(emsa::load_tensor(d1 / "semantic_side1.emt").shape(), (emsa::Shape{40, 12, 16}));
  EXPECT_EQ(emsa::load_tensor(d1 / "center.emt").shape(), (emsa::Shape{1, 96, 128}));
  EXPECT_EQ(emsa::load_tensor(d1 / "offset.emt").shape(), (emsa::Shape{2, 96, 128}));
  EXPECT_EQ(emsa::load_tensor(d1 / "scene_logits.emt").shape(), (emsa::Shape{10}));
  for (const char* f : {"semantic_logits.emt", "center.emt", "offset.emt", "orientation.emt",
                        "scene_logits.emt", "semantic.png"}) {
    EXPECT_EQ(bytes(d1 / f), bytes(d3 / f)) << f;
  }
  ASSERT_EQ(run("loss-eval --input " + p("f1") + " --gt " + p("ds/test") + " --output " + p("loss") +
                " --task-weights 1:0.25:3:1"),
            0)
      << log();
  const json l = read_json("loss/losses.json");
  EXPECT_GT(l.at("mean").at("total").get<double>(), 0.0);
}

TEST_F(Cli, ReportRendersCharts) {
  std::ofstream(root_ / "metrics.json") << R"({"miou": 0.5, "iou_per_class": {"wall": 0.4, "chair": 0.6},
    "panoptic_per_class": {"chair": {"pq": 0.3, "rq": 0.5, "sq": 0.6}}})";
  ASSERT_EQ(run("report --input " + p("metrics.json") + " --output " + p("rep")), 0) << log();
  EXPECT_TRUE(fs::exists(p("rep/iou_per_class.png")));
  EXPECT_TRUE(fs::exists(p("rep/sq_per_class.png")));
  const json s = read_json("rep/summary.json");
  EXPECT_EQ(s.at("miou").get<double>(), 0.5);
  const emsa::Image img = emsa::read_png(p("rep/iou_per_class.png"));
  EXPECT_EQ(img.channels, 3u);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("bogus"), 2);
  EXPECT_EQ(run("decode --pool-size 16 --input " + p("") + " --output " + p("x")), 2);
  EXPECT_NE(log().find("pool size"), std::string::npos);
  EXPECT_EQ(run("eval --task-weights 1:2:3 --input a --gt b --output c"), 2);
  EXPECT_EQ(run("decode --input " + p("missing") + " --output " + p("x")), 2);
  EXPECT_EQ(run("synth --n 1 --output " + p("ds")), 0);
  fs::remove(root_ / "ds" / "test" / "000000" / "depth.png");
  EXPECT_EQ(run("encode-gt --input " + p("ds/test") + " --output " + p("enc")), 1);
  EXPECT_NE(log().find("depth.png"), std::string::npos);
}

TEST_F(Cli, ConfigFileFlagsWin) {
  std::ofstream(root_ / "cfg.json") << R"({"codec": {"pool_size": 4}})";
  EXPECT_EQ(run("synth --n 1 --config " + p("cfg.json") + " --output " + p("ds")), 2);
  EXPECT_EQ(run("synth --n 1 --config " + p("cfg.json") + " --pool-size 5 --output " + p("ds")), 0)
      << log();
}
