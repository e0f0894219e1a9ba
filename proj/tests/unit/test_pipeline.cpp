#include <gtest/gtest.h>

#include "datasets.hpp"
#include "oracles.hpp"
#include "tep/errors.hpp"
#include "tep/pipeline.hpp"

using namespace tep;

namespace {

std::shared_ptr<InMemoryScenes> scenes_of(const std::vector<SyntheticVideo>& videos) {
  auto s = std::make_shared<InMemoryScenes>();
  for (const auto& v : videos) s->add(v);
  return s;
}

MockModes all(MockMode m) { return {m, m, m, m}; }

/// Propagate calls per frame and prompted frames of one segmenter.
struct SegmenterLog {
  std::map<int, int> propagations;
  std::vector<int> prompts;
};

class CountingSegmenter final : public Segmenter {
 public:
  CountingSegmenter(std::unique_ptr<Segmenter> inner, std::shared_ptr<SegmenterLog> log)
      : inner_(std::move(inner)), log_(std::move(log)) {}
  std::string init(const SegmenterInit& i) override { return inner_->init(i); }
  Mask propagate(const std::string& s, int t) override {
    ++log_->propagations[t];
    return inner_->propagate(s, t);
  }
  void prompt_box(const std::string& s, int t, const BBox& b) override {
    log_->prompts.push_back(t);
    inner_->prompt_box(s, t, b);
  }

 private:
  std::unique_ptr<Segmenter> inner_;
  std::shared_ptr<SegmenterLog> log_;
};

/// Wraps a provider; optionally breaks one video's segmenter and keeps the
/// log of the latest segmenter handed out per video.
class TestProvider final : public BackendProvider {
 public:
  TestProvider(std::shared_ptr<const SceneSource> scenes, MockModes modes) : inner_(std::move(scenes), modes) {}
  std::unique_ptr<Segmenter> segmenter(const std::string& v) override {
    if (v == broken_video) throw Error(ErrorKind::BackendUnavailable, "segmenter down");
    auto log = std::make_shared<SegmenterLog>();
    {
      std::lock_guard lock(mu);
      logs[v] = log;
    }
    return std::make_unique<CountingSegmenter>(inner_.segmenter(v), log);
  }
  std::unique_ptr<Tracker> tracker(const std::string& v, const std::string& o) override {
    return inner_.tracker(v, o);
  }
  std::unique_ptr<Detector> detector(const std::string& v, const std::string& o) override {
    return inner_.detector(v, o);
  }
  std::unique_ptr<Judge> judge(const std::string& v) override { return inner_.judge(v); }

  std::string broken_video;
  std::mutex mu;
  std::map<std::string, std::shared_ptr<SegmenterLog>> logs;

 private:
  MockProvider inner_;
};

const MaskSequence& only(const ObjectSequences& s) { return s.begin()->second; }

}  // namespace

TEST(Pipeline, RegularObjectIsPlainPropagation) {
  const auto video = generate(datasets::regular("r"));
  auto scenes = scenes_of({video});
  MockProvider p(scenes, all(MockMode::Scenario));
  const RunResult full = run_video(video.entry, p, FusionConfig{});
  const RunResult base = run_video(video.entry, p, FusionConfig{}, {.baseline_only = true});
  EXPECT_EQ(full.classes.begin()->second.kind, TargetKind::Regular);
  EXPECT_TRUE(full.decisions.empty());
  EXPECT_EQ(full.predictions, base.predictions);
  EXPECT_EQ(full.predictions, video.gt);
}

TEST(Pipeline, TinyDriftIsCorrectedOnceAtTheFirstDriftedFrame) {
  const auto video = generate(datasets::tiny_drift("t", 6));
  auto scenes = scenes_of({video});
  TestProvider p(scenes, all(MockMode::Scenario));
  const RunResult r = run_video(video.entry, p, FusionConfig{});
  EXPECT_EQ(r.classes.begin()->second.kind, TargetKind::Tiny);

  int injections = 0;
  for (const auto& d : r.decisions) {
    if (d.decision.action == FusionAction::InjectAuxiliary) {
      ++injections;
      EXPECT_EQ(d.frame_index, 7);  // drift offset is k*3 px with k = t - 6
      EXPECT_EQ(d.decision.reason, FusionReason::HighConfidenceInject);
    }
  }
  EXPECT_EQ(injections, 1);
  EXPECT_EQ(r.predictions, video.gt);
  EXPECT_EQ(p.logs["t"]->prompts, std::vector<int>{7});
  EXPECT_EQ(p.logs["t"]->propagations[7], 2);

  const RunResult base = run_video(video.entry, p, FusionConfig{}, {.baseline_only = true});
  EXPECT_NE(only(base.predictions)[8], only(video.gt)[8]);
  EXPECT_TRUE(base.decisions.empty());
  EXPECT_TRUE(base.classes.empty());
}

TEST(Pipeline, WithoutSameFramePromptTheNextFrameIsFixed) {
  const auto video = generate(datasets::tiny_drift("t", 6));
  auto scenes = scenes_of({video});
  TestProvider p(scenes, all(MockMode::Scenario));
  const RunResult r = run_video(video.entry, p, FusionConfig{}, {.apply_same_frame = false});
  const auto& pred = only(r.predictions);
  const auto& gt = only(video.gt);
  EXPECT_NE(pred[7], gt[7]);
  for (int t = 8; t < 16; ++t) EXPECT_EQ(pred[t], gt[t]) << t;
  for (const auto& [t, n] : p.logs["t"]->propagations) EXPECT_EQ(n, 1) << t;
}

TEST(Pipeline, AtMostOneRepropagationPerFrame) {
  for (const auto& spec : scenario_suite("drift-tiny", 3)) {
    const auto video = generate(spec);
    TestProvider p(scenes_of({video}), all(MockMode::Scenario));
    const RunResult r = run_video(video.entry, p, FusionConfig{});
    const auto seg = p.logs[spec.video_id];
    for (const auto& [t, n] : seg->propagations) {
      const bool prompted = std::count(seg->prompts.begin(), seg->prompts.end(), t) > 0;
      EXPECT_LE(n, prompted ? 2 : 1) << spec.video_id << " frame " << t;
    }
  }
}

TEST(Pipeline, JudgeBlocksDetectorConfusion) {
  const auto video = generate(datasets::semantic_confusion("s"));
  auto scenes = scenes_of({video});
  MockProvider p(scenes, all(MockMode::Scenario));
  const RunResult r = run_video(video.entry, p, FusionConfig{});
  EXPECT_EQ(r.classes.begin()->second.kind, TargetKind::SemanticDominated);
  EXPECT_EQ(r.classes.begin()->second.description, "red coat");
  int judged = 0;
  for (const auto& d : r.decisions) {
    if (d.frame_index >= 4 && d.frame_index <= 6) {
      EXPECT_EQ(d.decision.reason, FusionReason::JudgeChoseBaseline) << d.frame_index;
      ++judged;
    } else {
      EXPECT_EQ(d.decision.reason, FusionReason::IoUAboveThreshold) << d.frame_index;
    }
  }
  EXPECT_EQ(judged, 3);
  EXPECT_EQ(r.predictions, video.gt);
}

TEST(Pipeline, FooledJudgeSwitchesIdentity) {
  auto spec = datasets::semantic_confusion("s");
  spec.mock.judge_script = {{5, JudgeChoice::AuxiliaryCrop}};
  const auto video = generate(spec);
  MockProvider p(scenes_of({video}), all(MockMode::Scenario));
  const RunResult r = run_video(video.entry, p, FusionConfig{});
  EXPECT_EQ(only(r.predictions)[5], video.frames[5].mask_of(2));
  EXPECT_EQ(only(r.predictions)[6], video.frames[6].mask_of(2));
  // Once the detector finds the described actor again the oracle judge
  // sides with it and the target is recovered.
  EXPECT_EQ(only(r.predictions)[7], only(video.gt)[7]);
}

TEST(Pipeline, DecisionLogLengthFollowsCadence) {
  for (int every : {1, 2, 3, 5, 20}) {
    for (const auto& spec : {datasets::tiny_drift("t"), datasets::semantic_confusion("s")}) {
      const auto video = generate(spec);
      MockProvider p(scenes_of({video}), all(MockMode::Scenario));
      FusionConfig cfg;
      cfg.evaluate_every = every;
      const RunResult r = run_video(video.entry, p, cfg);
      EXPECT_EQ(static_cast<int>(r.decisions.size()), (spec.num_frames - 1) / every)
          << spec.video_id << " every " << every;
      for (const auto& d : r.decisions) EXPECT_EQ(d.frame_index % every, 0);
    }
  }
}

TEST(Pipeline, MissingTrackerYieldsAuxMissing) {
  class NoTracker final : public BackendProvider {
   public:
    explicit NoTracker(std::shared_ptr<const SceneSource> s) : inner(std::move(s), MockModes{}) {}
    std::unique_ptr<Segmenter> segmenter(const std::string& v) override { return inner.segmenter(v); }
    std::unique_ptr<Tracker> tracker(const std::string&, const std::string&) override {
      throw Error(ErrorKind::ConnectRefused, "no tracker");
    }
    std::unique_ptr<Detector> detector(const std::string& v, const std::string& o) override {
      return inner.detector(v, o);
    }
    std::unique_ptr<Judge> judge(const std::string& v) override { return inner.judge(v); }
    MockProvider inner;
  };
  const auto video = generate(datasets::tiny_drift("t"));
  NoTracker p(scenes_of({video}));
  const RunResult r = run_video(video.entry, p, FusionConfig{});
  ASSERT_EQ(r.decisions.size(), 15u);
  for (const auto& d : r.decisions) EXPECT_EQ(d.decision.reason, FusionReason::AuxMissing);
}

TEST(Pipeline, OracleBackendsScorePerfectly) {
  testing_support::TempDir dir;
  const auto manifest_path = datasets::write(dir.path(), {datasets::regular("a"), datasets::tiny_drift("b")});
  const Manifest m = load_manifest(manifest_path);
  BackendSpecs specs;
  specs.segmenter = specs.tracker = specs.detector = specs.judge = BackendSpec::parse("mock:oracle");
  ConfiguredProvider p(specs, std::make_shared<DatasetScenes>(dir.path()));
  const DatasetResult r = run_dataset(m, dir.path(), p, FusionConfig{}, {}, 2);
  ASSERT_EQ(r.videos.size(), 2u);
  ASSERT_TRUE(r.aggregate.has_value());
  EXPECT_EQ(r.aggregate->overall.jf, 1.0);
  EXPECT_EQ(r.aggregate->overall.jf_dot, 1.0);
  EXPECT_EQ(r.failed_count(), 0u);
}

TEST(Pipeline, FailingVideoIsIsolated) {
  testing_support::TempDir dir;
  const auto manifest_path = datasets::write(
      dir.path(), {datasets::regular("a"), datasets::tiny_drift("b"), datasets::semantic_confusion("c")});
  const Manifest m = load_manifest(manifest_path);
  TestProvider p(std::make_shared<DatasetScenes>(dir.path()), all(MockMode::Scenario));
  p.broken_video = "b";
  const DatasetResult r = run_dataset(m, dir.path(), p, FusionConfig{}, {}, 3);
  EXPECT_EQ(r.failed_count(), 1u);
  ASSERT_TRUE(r.videos[1].error.has_value());
  EXPECT_FALSE(r.videos[1].report.has_value());
  EXPECT_TRUE(r.videos[1].result.predictions.empty());
  ASSERT_TRUE(r.videos[0].report && r.videos[2].report);
  const std::vector<Scores> ok = {r.videos[0].report->overall, r.videos[2].report->overall};
  EXPECT_EQ(r.aggregate->overall, mean_scores(ok));
}

TEST(Pipeline, DeadSegmenterEndpointFailsEveryVideo) {
  testing_support::TempDir dir;
  const auto manifest_path = datasets::write(dir.path(), {datasets::regular("a"), datasets::regular("b")});
  const Manifest m = load_manifest(manifest_path);
  BackendSpecs specs;
  specs.segmenter = BackendSpec::parse("exec:/nonexistent/segmenter");
  specs.tracker = specs.detector = specs.judge = BackendSpec::parse("mock:oracle");
  ConfiguredProvider p(specs, std::make_shared<DatasetScenes>(dir.path()), std::chrono::seconds(2));
  const DatasetResult r = run_dataset(m, dir.path(), p, FusionConfig{});
  EXPECT_EQ(r.failed_count(), 2u);
  EXPECT_FALSE(r.aggregate.has_value());
  EXPECT_NE(r.videos[0].error->find("SpawnFailed"), std::string::npos) << *r.videos[0].error;
}

TEST(Pipeline, AggregateIsMeanOfVideos) {
  testing_support::TempDir dir;
  const auto manifest_path = datasets::write(
      dir.path(), {datasets::regular("a"), datasets::tiny_drift("b"), datasets::semantic_confusion("c")});
  const Manifest m = load_manifest(manifest_path);
  TestProvider p(std::make_shared<DatasetScenes>(dir.path()), all(MockMode::Scenario));
  const DatasetResult r = run_dataset(m, dir.path(), p, FusionConfig{}, {.baseline_only = true});
  std::vector<Scores> each;
  for (const auto& v : r.videos) each.push_back(v.report->overall);
  EXPECT_EQ(r.aggregate->overall, mean_scores(each));
  EXPECT_LT(r.aggregate->overall.jf, 1.0);
}

TEST(Pipeline, Deterministic) {
  testing_support::TempDir dir;
  std::vector<ScenarioSpec> specs = scenario_suite("crowded", 1);
  specs.resize(3);
  const auto manifest_path = datasets::write(dir.path(), specs);
  const Manifest m = load_manifest(manifest_path);
  auto run = [&](int jobs) {
    MockProvider p(std::make_shared<DatasetScenes>(dir.path()), all(MockMode::Scenario));
    const DatasetResult r = run_dataset(m, dir.path(), p, FusionConfig{}, {}, jobs);
    std::string log;
    for (const auto& v : r.videos)
      for (const auto& d : v.result.decisions) log += format_decision(v.result.video_id, d) + "\n";
    return log + dump_document(report_document(r));
  };
  const std::string first = run(1);
  EXPECT_EQ(first, run(1));
  EXPECT_EQ(first, run(3));
}

TEST(Pipeline, BackendSpecParsing) {
  EXPECT_EQ(BackendSpec::parse("mock:scenario").mode, MockMode::Scenario);
  EXPECT_EQ(BackendSpec::parse("tcp:h:1").kind, BackendSpec::Kind::Remote);
  EXPECT_EQ(BackendSpec::parse("exec:srv --a").to_string(), "exec:srv --a");
  EXPECT_THROW(BackendSpec::parse("mock:other"), Error);
  EXPECT_THROW(BackendSpec::parse("grpc://x"), Error);
}

TEST(Artifacts, DecisionLineFormat) {
  DecisionRecord rec{"1", 7, {FusionAction::InjectAuxiliary, BBox(1, 2, 3, 4), 0.25, FusionReason::HighConfidenceInject}};
  EXPECT_EQ(format_decision("vid", rec), "vid\t1\t7\tInjectAuxiliary\tHighConfidenceInject\t0.250000");
  rec.decision = {FusionAction::KeepBaseline, std::nullopt, std::nullopt, FusionReason::AuxMissing};
  EXPECT_EQ(format_decision("vid", rec), "vid\t1\t7\tKeepBaseline\tAuxMissing\t-");
}
