#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tep/backends.hpp"
#include "tep/classification.hpp"
#include "tep/fusion.hpp"
#include "tep/manifest.hpp"
#include "tep/metrics.hpp"
#include "tep/mock_backends.hpp"
#include "tep/protocol.hpp"

namespace tep {

struct PipelineOptions {
  /// Plain propagation: no classification, no auxiliary paths.
  bool baseline_only = false;
  /// Re-propagate the frame that received a box prompt.
  bool apply_same_frame = true;
};

struct DecisionRecord {
  std::string object_id;
  int frame_index = 0;
  FusionDecision decision;
};

/// Wall-clock seconds per stage, summed over objects.
struct StageTimings {
  double classify = 0.0;
  double propagate = 0.0;
  double auxiliary = 0.0;
  double fuse = 0.0;
};

struct RunResult {
  std::string video_id;
  /// One mask per frame for every object; empty before the first frame.
  ObjectSequences predictions;
  std::vector<DecisionRecord> decisions;
  std::map<std::string, TargetClass> classes;
  StageTimings timings;
  FusionConfig config;
};

/// Runs one video. Segmenter failures propagate; auxiliary failures that
/// is_degradable accepts turn into missing auxiliary output.
RunResult run_video(const VideoEntry& entry, BackendProvider& backends, const FusionConfig& cfg,
                    const PipelineOptions& options = {});

struct VideoOutcome {
  RunResult result;
  /// Set when the video failed; `result` then holds no predictions.
  std::optional<std::string> error;
  std::optional<EvalReport> report;
};

struct DatasetResult {
  /// Manifest order.
  std::vector<VideoOutcome> videos;
  /// Mean of the per-video reports; absent when no video was evaluated.
  std::optional<EvalReport> aggregate;

  std::size_t failed_count() const;
};

/// Runs every video with up to `parallelism` videos in flight and evaluates
/// those with ground truth. `backends` must be safe to call from several
/// threads. A failing video is recorded and the batch continues.
DatasetResult run_dataset(const Manifest& manifest, const std::filesystem::path& dataset_root,
                          BackendProvider& backends, const FusionConfig& cfg,
                          const PipelineOptions& options = {}, int parallelism = 1);

/// Mean of per-video overall scores, in manifest order.
std::optional<EvalReport> aggregate_reports(const std::vector<VideoOutcome>& videos);

// ---------------------------------------------------------------------------
// Backend selection

/// `mock:oracle`, `mock:scenario`, `exec:<command>` or `tcp:<host>:<port>`.
struct BackendSpec {
  enum class Kind { Mock, Remote };
  Kind kind = Kind::Mock;
  MockMode mode = MockMode::Oracle;
  protocol::Endpoint endpoint;

  /// Throws ConfigError.
  static BackendSpec parse(std::string_view text);
  std::string to_string() const;
};

struct BackendSpecs {
  BackendSpec segmenter;
  BackendSpec tracker;
  BackendSpec detector;
  BackendSpec judge;

  bool any_mock() const;
};

/// Builds each role from its BackendSpec. Remote roles open one connection per
/// backend instance.
class ConfiguredProvider final : public BackendProvider {
 public:
  /// `scenes` may be null when no role is a mock.
  ConfiguredProvider(BackendSpecs specs, std::shared_ptr<const SceneSource> scenes,
                     std::chrono::milliseconds timeout = protocol::default_timeout());

  std::unique_ptr<Segmenter> segmenter(const std::string& video_id) override;
  std::unique_ptr<Tracker> tracker(const std::string& video_id,
                                   const std::string& object_id) override;
  std::unique_ptr<Detector> detector(const std::string& video_id,
                                     const std::string& object_id) override;
  std::unique_ptr<Judge> judge(const std::string& video_id) override;

 private:
  std::unique_ptr<protocol::Connection> connect(const BackendSpec& spec) const;

  BackendSpecs specs_;
  std::shared_ptr<const SceneSource> scenes_;
  std::chrono::milliseconds timeout_;
  std::unique_ptr<MockProvider> mocks_;
};

// ---------------------------------------------------------------------------
// Artifacts

struct RunInfo {
  FusionConfig config;
  PipelineOptions options;
  BackendSpecs backends;
};

/// Writes <out>/<video>/<object>/<frame>.rle, decisions.log, report.txt,
/// report.json and run.json. Contents depend only on the inputs, never on
/// timing or absolute paths.
void write_run_artifacts(const std::filesystem::path& out, const DatasetResult& result,
                         const RunInfo& info);

/// One tab-separated line: video, object, frame, action, reason, iou.
std::string format_decision(const std::string& video_id, const DecisionRecord& record);

/// report.txt body: header, the overall row and one row per evaluated video.
std::string format_report(const DatasetResult& result);

/// Machine-readable report: {"overall": ..., "videos": [{"video_id", "report"}]}.
Json report_document(const DatasetResult& result);

}  // namespace tep
