#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "datasets.hpp"
#include "oracles.hpp"
#include "tep/cli.hpp"
#include "tep/dataset.hpp"
#include "tep/errors.hpp"

using namespace tep;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

CliResult run_cli(const testing_support::TempDir& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = quote(TEP_CLI) + " " + args + " >" + quote(out.string()) + " 2>" + quote(err.string());
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text_file(out);
  r.err = read_text_file(err);
  return r;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST(Config, DefaultsAndMissingKeys) {
  const auto cfg = cli::config_from_json(cli::default_config_document());
  EXPECT_EQ(cfg.fusion, FusionConfig{});
  EXPECT_TRUE(cfg.pipeline.apply_same_frame);

  Json doc = cli::default_config_document();
  doc["fusion"].erase("iou_threshold");
  try {
    cli::config_from_json(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    EXPECT_TRUE(contains(e.what(), "fusion.iou_threshold"));
    EXPECT_TRUE(contains(e.what(), "default 0.5"));
  }
  doc = cli::default_config_document();
  doc.erase("pipeline");
  EXPECT_THROW(cli::config_from_json(doc), Error);
  doc = cli::default_config_document();
  doc["pipeline"]["apply_same_frame"] = 1;
  EXPECT_THROW(cli::config_from_json(doc), Error);
  doc = cli::default_config_document();
  doc["extras"] = Json::object();
  EXPECT_THROW(cli::config_from_json(doc), Error);
}

TEST(BatchExit, Codes) {
  DatasetResult r;
  r.videos.resize(2);
  EXPECT_EQ(cli::batch_exit_code(r), cli::kOk);
  r.videos[0].error = "x";
  EXPECT_EQ(cli::batch_exit_code(r), cli::kPartial);
  r.videos[1].error = "y";
  EXPECT_EQ(cli::batch_exit_code(r), cli::kTotalFailure);
}

TEST(Cli, PrintConfigShowsDefaults) {
  testing_support::TempDir dir;
  const auto r = run_cli(dir, "run --print-config");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, dump_document(cli::default_config_document()));
}

TEST(Cli, UsageErrors) {
  testing_support::TempDir dir;
  EXPECT_EQ(run_cli(dir, "").code, 1);
  EXPECT_EQ(run_cli(dir, "bogus").code, 1);
  const auto r = run_cli(dir, "simulate --suite nope --out " + quote((dir / "d").string()));
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(contains(r.err, "drift-tiny")) << r.err;
  write_text_file(dir / "cfg.json", R"({"fusion": {}, "pipeline": {"apply_same_frame": true}})");
  const auto c = run_cli(dir, "run --print-config --config " + quote((dir / "cfg.json").string()));
  EXPECT_EQ(c.code, 1);
  EXPECT_TRUE(contains(c.err, "missing config key")) << c.err;
  EXPECT_EQ(run_cli(dir, "run --manifest " + quote((dir / "none.json").string()) + " --out x").code, 3);
  EXPECT_EQ(run_cli(dir, "run --backend carrier:pigeon --manifest x --out y").code, 1);
}

TEST(Cli, SimulateRunEvalReport) {
  testing_support::TempDir dir;
  const std::string data = (dir / "data").string();
  auto r = run_cli(dir, "simulate --suite drift-tiny --seed 2 --out " + quote(data));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string manifest = (dir / "data/manifest.json").string();
  EXPECT_EQ(r.out, manifest + "\n");

  const std::string base = (dir / "baseline").string(), full = (dir / "full").string();
  r = run_cli(dir, "run --manifest " + quote(manifest) + " --backend mock:scenario --baseline-only --out " + quote(base));
  ASSERT_EQ(r.code, 0) << r.err;
  r = run_cli(dir, "run --manifest " + quote(manifest) + " --backend mock:scenario --jobs 4 --out " + quote(full));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(contains(r.out, "Method | J&Ḟ"));
  EXPECT_TRUE(fs::exists(dir / "full/decisions.log"));
  EXPECT_TRUE(fs::exists(dir / "full/run.json"));
  const Json run = Json::parse(read_text_file(dir / "full/run.json"));
  EXPECT_EQ(run["mode"], "tep");
  EXPECT_EQ(run["videos"].size(), 10u);

  // Re-scoring the stored masks reproduces the run's report.
  const std::string rescored = (dir / "rescored").string();
  r = run_cli(dir, "eval --pred " + quote(full) + " --manifest " + quote(manifest) + " --out " + quote(rescored));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_text_file(dir / "rescored/report.json"), read_text_file(dir / "full/report.json"));

  r = run_cli(dir, "report " + quote(base) + " " + quote(full));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string l1, l2, l3, l4;
  std::getline(lines, l1);
  std::getline(lines, l2);
  std::getline(lines, l3);
  std::getline(lines, l4);
  EXPECT_EQ(l1, "Method | J&Ḟ | J | Ḟ | J&Ḟ_disappear | J&Ḟ_reappear | F | J&F");
  EXPECT_EQ(l2.rfind("baseline | ", 0), 0u);
  EXPECT_EQ(l3.rfind("full | ", 0), 0u);
  EXPECT_EQ(l4.rfind("delta full vs baseline | +", 0), 0u) << l4;
}

TEST(Cli, ReportWarnsAboutUnsharedVideosAndSkipsBrokenRuns) {
  testing_support::TempDir dir;
  const Json s = to_json(Scores{0.5, 0.5, 0.5, 0.5, 0.5, std::nullopt, std::nullopt});
  auto write_run = [&](const std::string& name, std::vector<std::string> ids) {
    Json videos = Json::array();
    for (const auto& id : ids) videos.push_back({{"video_id", id}, {"report", {{"overall", s}, {"per_object", Json::array()}}}});
    write_text_file(dir / (name + "/report.json"), dump_document({{"overall", s}, {"videos", videos}}));
  };
  write_run("a", {"v1", "v2"});
  write_run("b", {"v2", "v3"});
  write_text_file(dir / "c/report.json", "not json");
  std::ostringstream err;
  const std::string table = cli::compare_reports({dir / "a", dir / "b", dir / "c"}, err);
  EXPECT_TRUE(contains(err.str(), "comparing 1 shared videos; excluded: v1, v3")) << err.str();
  EXPECT_TRUE(contains(err.str(), "skipping")) << err.str();
  EXPECT_TRUE(contains(table, "delta b vs a | +0.00")) << table;
  EXPECT_THROW(cli::compare_reports({dir / "c"}, err), Error);
}

TEST(Cli, EvalObjectSetMismatch) {
  testing_support::TempDir dir;
  const auto manifest = datasets::write(dir / "data", {datasets::regular("a"), datasets::regular("b")});
  const auto video = generate(datasets::regular("a"));
  // Video a: ground truth under a wrong object id. Video b: nothing at all.
  ObjectSequences wrong;
  wrong["99"] = video.gt.begin()->second;
  write_mask_sequences(dir / "pred/a", wrong);
  const DatasetResult r = cli::evaluate_predictions(dir / "pred", manifest);
  ASSERT_EQ(r.videos.size(), 2u);
  ASSERT_TRUE(r.videos[0].error.has_value());
  EXPECT_TRUE(contains(*r.videos[0].error, "missing [1] extra [99]")) << *r.videos[0].error;
  EXPECT_TRUE(r.videos[1].error.has_value());
  EXPECT_EQ(cli::batch_exit_code(r), cli::kTotalFailure);

  write_mask_sequences(dir / "pred/b", generate(datasets::regular("b")).gt);
  const auto c = run_cli(dir, "eval --pred " + quote((dir / "pred").string()) + " --manifest " + quote(manifest.string()));
  EXPECT_EQ(c.code, 2) << c.err;
  EXPECT_TRUE(contains(c.err, "ObjectSetMismatch") || contains(c.err, "missing [1]")) << c.err;
}
