#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "json.hpp"
#include "tumorscope/binary_io.hpp"
#include "tumorscope/pipeline.hpp"

namespace tumorscope {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kTool = TUMORSCOPE_CLI_PATH;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tumorscope_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Exit status of the tool; stdout and stderr go to files in the temp dir.
  int run(const std::string& args) {
    const std::string cmd = "cd '" + dir_.string() + "' && '" + kTool + "' " + args + " >out.txt 2>err.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string text(const std::string& name) {
    const auto b = io::read_file(dir_ / name);
    return {b.begin(), b.end()};
  }
  std::string tree_checksum(const fs::path& root) {
    std::vector<std::uint8_t> all;
    std::set<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) files.insert(e.path());
    }
    for (const auto& f : files) {
      const std::string rel = fs::relative(f, root).generic_string();
      all.insert(all.end(), rel.begin(), rel.end());
      const auto b = io::read_file(f);
      all.insert(all.end(), b.begin(), b.end());
    }
    return io::fnv1a_hex(all);
  }

  fs::path dir_;
};

TEST_F(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help"), 0);
  for (const char* sub : {"synth", "preprocess", "train", "eval", "explain", "report"}) {
    EXPECT_EQ(run(std::string(sub) + " --help"), 0) << sub;
    EXPECT_NE(text("out.txt").find("--help"), std::string::npos) << sub;
    EXPECT_EQ(run(std::string(sub) + " --no-such-flag 1"), 2) << sub;
  }
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("eval --out r.json"), 2);
}

TEST_F(CliTest, SynthCountsAndReproducibility) {
  ASSERT_EQ(run("synth --subjects 20 --tumour-rate 0.5 --size 32 --seed 7 --out a"), 0);
  ASSERT_EQ(run("synth --subjects 20 --tumour-rate 0.5 --size 32 --seed 7 --out b"), 0);
  EXPECT_EQ(tree_checksum(dir_ / "a"), tree_checksum(dir_ / "b"));
  const auto entries = read_volume_manifest(dir_ / "a" / "volumes.json");
  ASSERT_EQ(entries.size(), 20u);
  std::size_t with_tumour = 0;
  for (const auto& e : entries) {
    const Volume m = read_nifti(e.mask_path);
    bool any = false;
    for (const float v : m.voxels) any = any || v > 0.0f;
    with_tumour += any ? 1 : 0;
  }
  EXPECT_EQ(with_tumour, 10u);

  EXPECT_EQ(run("synth --subjects 2 --out c"), 2);
  ASSERT_EQ(run("synth --subjects 4 --tumour-rate 0 --size 32 --out z"), 0);
  for (const auto& e : read_volume_manifest(dir_ / "z" / "volumes.json")) {
    for (const float v : read_nifti(e.mask_path).voxels) ASSERT_EQ(v, 0.0f);
  }
}

TEST_F(CliTest, PreprocessSplitsAndDeterminism) {
  ASSERT_EQ(run("synth --subjects 10 --tumour-rate 0.7 --size 40 --seed 3 --out vols"), 0);
  ASSERT_EQ(run("preprocess --manifest vols/volumes.json --out d1 --target-side 120 --seed 4"), 0);
  ASSERT_EQ(run("preprocess --manifest vols/volumes.json --out d2 --target-side 120 --seed 4"), 0);
  EXPECT_EQ(tree_checksum(dir_ / "d1"), tree_checksum(dir_ / "d2"));

  const DatasetSplit d = read_dataset(dir_ / "d1");
  std::set<std::string> tr, va, te;
  std::size_t pos = 0;
  for (const auto& r : d.train) {
    tr.insert(r.subject_id);
    pos += r.label == 1 ? 1 : 0;
  }
  for (const auto& r : d.val) va.insert(r.subject_id);
  for (const auto& r : d.test) te.insert(r.subject_id);
  for (const auto& s : tr) EXPECT_TRUE(!va.count(s) && !te.count(s));
  for (const auto& s : va) EXPECT_FALSE(te.count(s));
  EXPECT_EQ(2 * pos, d.train.size());
  EXPECT_EQ(d.train.front().image.dim(1), 120u);
}

TEST_F(CliTest, EvalOnReportedConfusionCounts) {
  // Reported improved-model confusion counts as scores: tp 2353, fn 376, fp 96, tn 2633.
  std::string csv = "label,score\n";
  const auto rows = [&](int label, double score, int n) {
    for (int i = 0; i < n; ++i) csv += std::to_string(label) + "," + std::to_string(score) + "\n";
  };
  rows(1, 0.9, 2353);
  rows(1, 0.1, 376);
  rows(0, 0.9, 96);
  rows(0, 0.1, 2633);
  io::write_text(dir_ / "scores.csv", csv);
  ASSERT_EQ(run("eval --scores scores.csv --out report.json"), 0);
  const json rep = json::parse(text("report.json"));
  EXPECT_NEAR(rep["metrics"]["precision"].get<double>(), 0.9608, 0.0005);
  EXPECT_NEAR(rep["metrics"]["recall"].get<double>(), 0.8622, 0.0005);
  EXPECT_NEAR(rep["metrics"]["f1"].get<double>(), 0.9088, 0.0005);
  EXPECT_EQ(rep["confusion"]["tp"].get<int>(), 2353);
  EXPECT_TRUE(rep["misclassification"].is_null());

  io::write_text(dir_ / "bad.csv", "label,score\n1,1.5\n");
  EXPECT_EQ(run("eval --scores bad.csv --out r.json"), 1);
  EXPECT_EQ(run("eval --scores scores.csv --data . --out r.json"), 2);
}

TEST_F(CliTest, TrainExplainReport) {
  ASSERT_EQ(run("synth --subjects 6 --tumour-rate 1 --size 40 --seed 5 --out vols"), 0);
  ASSERT_EQ(run("preprocess --manifest vols/volumes.json --out data --target-side 120 --seed 5"), 0);
  io::write_text(dir_ / "cfg.json", R"({"model": {"hidden_units": 16}, "train": {"epochs": 2},
                                        "explain": {"grid_rows": 2, "grid_cols": 2}})");
  ASSERT_EQ(run("train --data data --config cfg.json --out run --seed 2"), 0);
  for (const char* f : {"history.csv", "best.tscp", "last.tscp", "epoch_001.tscp", "epoch_002.tscp", "config.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
  EXPECT_EQ(History::from_csv(text("run/history.csv")).rows.size(), 2u);

  // A model whose output bias forces every prediction positive, so any
  // tumour slice is a true positive.
  Model m = load_checkpoint(dir_ / "run" / "last.tscp");
  m.layers.back().bias[0] = 50.0f;
  save_checkpoint(m, dir_ / "pos.tscp");
  const DatasetSplit d = read_dataset(dir_ / "data");
  const SliceRecord* tp = nullptr;
  for (const auto& r : d.test) {
    if (r.label == 1) tp = &r;
  }
  ASSERT_NE(tp, nullptr);
  const std::string id = record_id(*tp);
  ASSERT_EQ(run("explain --checkpoint pos.tscp --slice data/slices/" + id + ".tssl --config cfg.json --out ex"), 0);
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir_ / "ex")) ++n;
  EXPECT_EQ(n, 2u);
  EXPECT_TRUE(fs::exists(dir_ / "ex" / (id + ".json")));
  const RgbImage img = read_ppm(dir_ / "ex" / (id + "_combined.ppm"));
  EXPECT_EQ(img.width, 2 * 120 + kGutter);
  EXPECT_EQ(json::parse(text("ex/" + id + ".json"))["target"], "tumour");

  ASSERT_EQ(run("report --data data --checkpoint pos.tscp --config cfg.json --out audit"), 0);
  const json rep = json::parse(text("audit/report.json"));
  const auto& bins = rep["misclassification"];
  const std::uint64_t fn = bins["false_negative_bins"]["poor_quality"].get<std::uint64_t>() +
                           bins["false_negative_bins"]["partial_tumour"].get<std::uint64_t>() +
                           bins["false_negative_bins"]["other"].get<std::uint64_t>();
  const std::uint64_t fp = bins["false_positive_bins"]["poor_quality"].get<std::uint64_t>() +
                           bins["false_positive_bins"]["anomaly_like"].get<std::uint64_t>();
  EXPECT_EQ(fn, rep["confusion"]["fn"].get<std::uint64_t>());
  EXPECT_EQ(fp, rep["confusion"]["fp"].get<std::uint64_t>());
  std::size_t composites = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "audit" / "cases")) {
    composites += e.path().extension() == ".ppm" ? 1 : 0;
  }
  EXPECT_EQ(composites, fn + fp);
  EXPECT_GT(fp, 0u);
}

TEST_F(CliTest, RuntimeErrorsExitOneWithOneLine) {
  io::write_text(dir_ / "bad.json", R"({"model": {"bogus": 1}})");
  fs::create_directories(dir_ / "data");
  EXPECT_EQ(run("train --data data --config bad.json --out r"), 1);
  const std::string err = text("err.txt");
  EXPECT_NE(err.find("config error"), std::string::npos);
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);

  EXPECT_EQ(run("train --data data --out r"), 1);  // no manifest.json
  io::write_text(dir_ / "junk.nii", "not a nifti file");
  io::write_text(dir_ / "m.json", R"([{"subject_id": "a", "image_path": "junk.nii", "mask_path": "junk.nii"}])");
  EXPECT_EQ(run("preprocess --manifest m.json --out o"), 1);
  EXPECT_NE(text("err.txt").find("nifti error"), std::string::npos);
}

}  // namespace
}  // namespace tumorscope
