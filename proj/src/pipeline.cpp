#include "tep/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

#include "tep/dataset.hpp"
#include "tep/errors.hpp"
#include "tep/json_io.hpp"

namespace fs = std::filesystem;

namespace tep {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Stands in for a judge that could not be reached; fuse_semantic degrades
// its failures to keeping the baseline.
class UnreachableJudge final : public Judge {
 public:
  explicit UnreachableJudge(std::string why) : why_(std::move(why)) {}
  JudgeVerdict compare(const CropRef&, const CropRef&, const CropRef&) override {
    throw Error(ErrorKind::BackendUnavailable, why_);
  }
  SemanticVerdict classify_semantic(const FrameRef&, const Mask&) override {
    throw Error(ErrorKind::BackendUnavailable, why_);
  }

 private:
  std::string why_;
};

struct ObjectState {
  const ObjectEntry* entry = nullptr;
  TargetClass target_class;
  std::string session;
  std::unique_ptr<Tracker> tracker;
  std::unique_ptr<Detector> detector;
  std::optional<std::string> description;
  CropRef reference;
  MaskSequence predictions;
};

template <typename F>
auto degrade_on_failure(F&& f) -> std::optional<decltype(f())> {
  try {
    return f();
  } catch (const std::exception& e) {
    if (!is_degradable(e)) throw;
    return std::nullopt;
  }
}

}  // namespace

RunResult run_video(const VideoEntry& entry, BackendProvider& backends, const FusionConfig& cfg,
                    const PipelineOptions& options) {
  cfg.validate();
  RunResult result;
  result.video_id = entry.video_id;
  result.config = cfg;
  const FrameDims dims = entry.dims();

  std::unique_ptr<Segmenter> segmenter = backends.segmenter(entry.video_id);
  std::unique_ptr<Judge> judge;
  if (!options.baseline_only) {
    try {
      judge = backends.judge(entry.video_id);
    } catch (const std::exception& e) {
      if (!is_degradable(e)) throw;
      judge = std::make_unique<UnreachableJudge>(e.what());
    }
  }

  std::vector<ObjectState> objects;
  objects.reserve(entry.objects.size());
  for (const ObjectEntry& o : entry.objects) {
    const FrameRef first{entry.video_id, o.first_frame_index};
    ObjectState st{&o, {}, {}, nullptr, nullptr, std::nullopt,
                   CropRef{first, crop(dims, *mask_to_bbox(o.first_mask), cfg.judge_crop_pad)}, {}};
    st.session = segmenter->init({entry.video_id, o.object_id, o.first_frame_index, o.first_mask});

    if (!options.baseline_only) {
      const auto start = Clock::now();
      auto cls = degrade_on_failure(
          [&] { return classify_target(o.first_mask, first, cfg.tiny_area_ratio, *judge); });
      // An unreachable oracle leaves the object on the baseline path.
      st.target_class = cls ? *cls
                            : TargetClass{TargetKind::Regular,
                                          static_cast<double>(mask_area(o.first_mask)) / dims.area(),
                                          std::nullopt, std::nullopt};
      if (st.target_class.kind == TargetKind::Tiny) {
        auto tracker = degrade_on_failure([&] { return backends.tracker(entry.video_id, o.object_id); });
        if (tracker && degrade_on_failure([&] {
              (*tracker)->init(first, *mask_to_bbox(o.first_mask));
              return true;
            })) {
          st.tracker = std::move(*tracker);
        }
      } else if (st.target_class.kind == TargetKind::SemanticDominated) {
        auto detector = degrade_on_failure([&] { return backends.detector(entry.video_id, o.object_id); });
        if (detector) {
          st.description = degrade_on_failure([&] { return (*detector)->describe(first, o.first_mask); });
          if (st.description) st.detector = std::move(*detector);
        }
      }
      result.timings.classify += seconds_since(start);
      result.classes[o.object_id] = st.target_class;
    }

    st.predictions.assign(static_cast<std::size_t>(entry.frame_count), Mask::empty(dims));
    st.predictions[static_cast<std::size_t>(o.first_frame_index)] = o.first_mask;
    objects.push_back(std::move(st));
  }

  for (int t = 0; t < entry.frame_count; ++t) {
    for (ObjectState& st : objects) {
      const int first = st.entry->first_frame_index;
      if (t <= first) continue;

      auto start = Clock::now();
      Mask mask = segmenter->propagate(st.session, t);
      result.timings.propagate += seconds_since(start);

      const TargetKind kind = st.target_class.kind;
      if (kind != TargetKind::Regular && (t - first) % cfg.evaluate_every == 0) {
        start = Clock::now();
        TrackOutput aux;
        if (kind == TargetKind::Tiny && st.tracker) {
          aux = degrade_on_failure([&] { return st.tracker->track(t); }).value_or(TrackOutput::missing());
        } else if (kind == TargetKind::SemanticDominated && st.detector) {
          aux = degrade_on_failure([&] { return st.detector->detect(t, *st.description); })
                    .value_or(TrackOutput::missing());
        }
        result.timings.auxiliary += seconds_since(start);

        start = Clock::now();
        const FusionDecision decision =
            kind == TargetKind::Tiny
                ? fuse_tiny(mask, aux, cfg)
                : fuse_semantic(mask, aux, st.reference, FrameRef{entry.video_id, t}, *judge, cfg);
        result.timings.fuse += seconds_since(start);

        if (decision.action == FusionAction::InjectAuxiliary) {
          start = Clock::now();
          segmenter->prompt_box(st.session, t, *decision.chosen_bbox);
          if (options.apply_same_frame) mask = segmenter->propagate(st.session, t);
          result.timings.propagate += seconds_since(start);
        }
        result.decisions.push_back({st.entry->object_id, t, decision});
      }
      st.predictions[static_cast<std::size_t>(t)] = std::move(mask);
    }
  }

  for (ObjectState& st : objects) {
    result.predictions.emplace(st.entry->object_id, std::move(st.predictions));
  }
  return result;
}

// ---------------------------------------------------------------------------

std::size_t DatasetResult::failed_count() const {
  std::size_t n = 0;
  for (const VideoOutcome& v : videos) n += v.error.has_value();
  return n;
}

std::optional<EvalReport> aggregate_reports(const std::vector<VideoOutcome>& videos) {
  std::vector<Scores> overall;
  for (const VideoOutcome& v : videos) {
    if (v.report) overall.push_back(v.report->overall);
  }
  if (overall.empty()) return std::nullopt;
  return EvalReport{mean_scores(overall), {}};
}

DatasetResult run_dataset(const Manifest& manifest, const fs::path& dataset_root,
                          BackendProvider& backends, const FusionConfig& cfg,
                          const PipelineOptions& options, int parallelism) {
  validate(manifest);
  cfg.validate();
  DatasetResult out;
  out.videos.resize(manifest.videos.size());

  auto process = [&](std::size_t i) {
    const VideoEntry& entry = manifest.videos[i];
    VideoOutcome& outcome = out.videos[i];
    outcome.result.video_id = entry.video_id;
    outcome.result.config = cfg;
    try {
      outcome.result = run_video(entry, backends, cfg, options);
      if (entry.gt_path) {
        const ObjectSequences gt = load_ground_truth(dataset_root, entry);
        outcome.report = evaluate(outcome.result.predictions, gt, EvalConfig{cfg.f_dot_tolerance, {}});
      }
    } catch (const std::exception& e) {
      outcome.error = e.what();
      outcome.result.predictions.clear();
      outcome.result.decisions.clear();
      outcome.report.reset();
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(parallelism, 1)), manifest.videos.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < manifest.videos.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < manifest.videos.size(); i = next++) process(i);
      });
    }
    for (std::thread& th : pool) th.join();
  }

  out.aggregate = aggregate_reports(out.videos);
  return out;
}

// ---------------------------------------------------------------------------

BackendSpec BackendSpec::parse(std::string_view text) {
  BackendSpec spec;
  if (text.starts_with("mock:")) {
    const std::string_view profile = text.substr(5);
    spec.kind = Kind::Mock;
    if (profile == "oracle") {
      spec.mode = MockMode::Oracle;
    } else if (profile == "scenario") {
      spec.mode = MockMode::Scenario;
    } else {
      throw Error(ErrorKind::ConfigError,
                  "unknown mock profile '" + std::string(profile) + "' (expected oracle or scenario)");
    }
    return spec;
  }
  spec.kind = Kind::Remote;
  spec.endpoint = protocol::Endpoint::parse(text);
  return spec;
}

std::string BackendSpec::to_string() const {
  if (kind == Kind::Remote) return endpoint.to_string();
  return mode == MockMode::Oracle ? "mock:oracle" : "mock:scenario";
}

bool BackendSpecs::any_mock() const {
  for (const BackendSpec* s : {&segmenter, &tracker, &detector, &judge}) {
    if (s->kind == BackendSpec::Kind::Mock) return true;
  }
  return false;
}

ConfiguredProvider::ConfiguredProvider(BackendSpecs specs, std::shared_ptr<const SceneSource> scenes,
                                       std::chrono::milliseconds timeout)
    : specs_(std::move(specs)), scenes_(std::move(scenes)), timeout_(timeout) {
  if (specs_.any_mock()) {
    if (!scenes_) throw Error(ErrorKind::ConfigError, "mock backends need a scene source");
    mocks_ = std::make_unique<MockProvider>(
        scenes_, MockModes{specs_.segmenter.mode, specs_.tracker.mode, specs_.detector.mode, specs_.judge.mode});
  }
}

std::unique_ptr<protocol::Connection> ConfiguredProvider::connect(const BackendSpec& spec) const {
  return protocol::Connection::open(spec.endpoint, timeout_);
}

std::unique_ptr<Segmenter> ConfiguredProvider::segmenter(const std::string& video_id) {
  if (specs_.segmenter.kind == BackendSpec::Kind::Mock) return mocks_->segmenter(video_id);
  return std::make_unique<protocol::RemoteSegmenter>(connect(specs_.segmenter));
}

std::unique_ptr<Tracker> ConfiguredProvider::tracker(const std::string& video_id,
                                                     const std::string& object_id) {
  if (specs_.tracker.kind == BackendSpec::Kind::Mock) return mocks_->tracker(video_id, object_id);
  return std::make_unique<protocol::RemoteTracker>(connect(specs_.tracker), object_id);
}

std::unique_ptr<Detector> ConfiguredProvider::detector(const std::string& video_id,
                                                       const std::string& object_id) {
  if (specs_.detector.kind == BackendSpec::Kind::Mock) return mocks_->detector(video_id, object_id);
  return std::make_unique<protocol::RemoteDetector>(connect(specs_.detector), object_id);
}

std::unique_ptr<Judge> ConfiguredProvider::judge(const std::string& video_id) {
  if (specs_.judge.kind == BackendSpec::Kind::Mock) return mocks_->judge(video_id);
  return std::make_unique<protocol::RemoteJudge>(connect(specs_.judge));
}

// ---------------------------------------------------------------------------

std::string format_decision(const std::string& video_id, const DecisionRecord& r) {
  char iou[32] = "-";
  if (r.decision.iou_observed) std::snprintf(iou, sizeof(iou), "%.6f", *r.decision.iou_observed);
  std::ostringstream line;
  line << video_id << '\t' << r.object_id << '\t' << r.frame_index << '\t' << to_string(r.decision.action)
       << '\t' << to_string(r.decision.reason) << '\t' << iou;
  return line.str();
}

std::string format_report(const DatasetResult& result) {
  std::string out = "Method";
  for (std::string_view c : kReportColumns) {
    out += " | ";
    out += c;
  }
  out += "\n";
  if (result.aggregate) out += "overall | " + format_scores_row(result.aggregate->overall) + "\n";
  for (const VideoOutcome& v : result.videos) {
    if (v.report) {
      out += v.result.video_id + " | " + format_scores_row(v.report->overall) + "\n";
    } else if (v.error) {
      out += v.result.video_id + " | failed\n";
    }
  }
  return out;
}

Json report_document(const DatasetResult& result) {
  Json videos = Json::array();
  for (const VideoOutcome& v : result.videos) {
    if (v.report) videos.push_back({{"video_id", v.result.video_id}, {"report", to_json(*v.report)}});
  }
  return {{"overall", result.aggregate ? to_json(result.aggregate->overall) : Json(nullptr)},
          {"videos", std::move(videos)}};
}

void write_run_artifacts(const fs::path& out, const DatasetResult& result, const RunInfo& info) {
  std::string log;
  Json videos = Json::array();
  for (const VideoOutcome& v : result.videos) {
    const RunResult& r = v.result;
    Json entry = {{"video_id", r.video_id}, {"status", v.error ? "failed" : "ok"}};
    if (v.error) {
      entry["error"] = *v.error;
    } else {
      write_mask_sequences(out / r.video_id, r.predictions);
      for (const DecisionRecord& d : r.decisions) log += format_decision(r.video_id, d) + "\n";
      Json classes = Json::array();
      for (const auto& [object_id, cls] : r.classes) {
        Json c = {{"object_id", object_id}, {"class", to_string(cls.kind)}, {"area_ratio", cls.area_ratio}};
        if (cls.description) c["description"] = *cls.description;
        classes.push_back(std::move(c));
      }
      entry["objects"] = std::move(classes);
      entry["decisions"] = r.decisions.size();
    }
    videos.push_back(std::move(entry));
  }
  write_text_file(out / "decisions.log", log);
  write_text_file(out / "report.txt", format_report(result));
  write_text_file(out / "report.json", dump_document(report_document(result)));

  const Json run = {
      {"mode", info.options.baseline_only ? "baseline-only" : "tep"},
      {"fusion", to_json(info.config)},
      {"pipeline", {{"apply_same_frame", info.options.apply_same_frame}}},
      {"backends",
       {{"segmenter", info.backends.segmenter.to_string()},
        {"tracker", info.backends.tracker.to_string()},
        {"detector", info.backends.detector.to_string()},
        {"judge", info.backends.judge.to_string()}}},
      {"failed", result.failed_count()},
      {"videos", std::move(videos)}};
  write_text_file(out / "run.json", dump_document(run));
}

}  // namespace tep
