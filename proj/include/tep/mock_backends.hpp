#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "tep/backends.hpp"
#include "tep/simulator.hpp"

namespace tep {

/// Read access to scenario label grids, keyed by video id. Thread-safe.
class SceneSource {
 public:
  virtual ~SceneSource() = default;
  virtual const ScenarioSpec& scenario(const std::string& video_id) const = 0;
  virtual std::shared_ptr<const LabelGrid> frame(const std::string& video_id,
                                                 int frame_index) const = 0;
};

class InMemoryScenes final : public SceneSource {
 public:
  void add(const SyntheticVideo& video);
  const ScenarioSpec& scenario(const std::string& video_id) const override;
  std::shared_ptr<const LabelGrid> frame(const std::string& video_id,
                                         int frame_index) const override;

 private:
  struct Entry {
    ScenarioSpec spec;
    std::vector<std::shared_ptr<const LabelGrid>> frames;
  };
  std::map<std::string, Entry> videos_;
};

/// Loads <root>/<video>/scenario.json and frames/<frame>.lbl lazily.
class DatasetScenes final : public SceneSource {
 public:
  explicit DatasetScenes(std::filesystem::path root) : root_(std::move(root)) {}
  const ScenarioSpec& scenario(const std::string& video_id) const override;
  std::shared_ptr<const LabelGrid> frame(const std::string& video_id,
                                         int frame_index) const override;

 private:
  std::filesystem::path root_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::unique_ptr<ScenarioSpec>> specs_;
  mutable std::map<std::pair<std::string, int>, std::shared_ptr<const LabelGrid>> frames_;
};

/// Which failure models a mock applies: none (oracle) or the scenario's.
enum class MockMode { Oracle, Scenario };

/// Follows one actor's visible pixels, optionally under the scenario's DriftModel.
class MockSegmenter final : public Segmenter {
 public:
  MockSegmenter(const SceneSource& scenes, std::string video_id, std::optional<DriftModel> drift);
  std::string init(const SegmenterInit& init) override;
  Mask propagate(const std::string& session, int frame_index) override;
  void prompt_box(const std::string& session, int frame_index, const BBox& box) override;

 private:
  struct Session {
    Label anchor = kBackgroundLabel;
    int last_frame = 0;
    std::optional<int> prompt_frame;
    bool repropagated = false;
    bool drift_cancelled = false;
  };
  Session& get(const std::string& session);

  const SceneSource& scenes_;
  std::string video_id_;
  std::optional<DriftModel> drift_;
  std::map<std::string, Session> sessions_;
};

/// Ground-truth box of the template's actor; optional seeded noise.
class MockTracker final : public Tracker {
 public:
  MockTracker(const SceneSource& scenes, std::optional<TrackerNoise> noise);
  void init(const FrameRef& first_frame, const BBox& template_box) override;
  TrackOutput track(int frame_index) override;

  /// The jitter applied to a visible box; exposed for replay in tests.
  static BBox jitter_box(const BBox& box, FrameDims frame, const TrackerNoise& noise,
                         int frame_index);

 private:
  const SceneSource& scenes_;
  std::optional<TrackerNoise> noise_;
  std::optional<std::string> video_id_;
  Label anchor_ = kBackgroundLabel;
  std::optional<BBox> last_box_;
  int frames_absent_ = 0;
};

/// Describes the masked actor; detects the actor carrying that description,
/// or the scripted confusion actor inside a confusion window.
class MockDetector final : public Detector {
 public:
  MockDetector(const SceneSource& scenes, std::vector<ConfusionWindow> confusion);
  std::string describe(const FrameRef& first_frame, const Mask& mask) override;
  TrackOutput detect(int frame_index, const std::string& description) override;

 private:
  const SceneSource& scenes_;
  std::vector<ConfusionWindow> confusion_;
  std::optional<std::string> video_id_;
  Label described_ = kBackgroundLabel;
};

/// Identity-aware judge: picks the crop holding more pixels of the reference
/// crop's dominant actor; exact ties go to the baseline. Scripted frames
/// override the oracle.
class MockJudge final : public Judge {
 public:
  MockJudge(const SceneSource& scenes, std::map<int, JudgeChoice> script);
  JudgeVerdict compare(const CropRef& reference, const CropRef& crop_a,
                       const CropRef& crop_b) override;
  SemanticVerdict classify_semantic(const FrameRef& frame, const Mask& mask) override;

 private:
  const SceneSource& scenes_;
  std::map<int, JudgeChoice> script_;
};

/// Label of the target/distractor actor with most pixels under `mask`;
/// background when none overlaps. Ties go to the lower label.
Label dominant_actor(const ScenarioSpec& spec, const LabelGrid& grid, const Mask& mask);
Label dominant_actor(const ScenarioSpec& spec, const LabelGrid& grid, const BBox& box);

/// Mock backends over a scene source; one mode per role.
struct MockModes {
  MockMode segmenter = MockMode::Oracle;
  MockMode tracker = MockMode::Oracle;
  MockMode detector = MockMode::Oracle;
  MockMode judge = MockMode::Oracle;
};

class MockProvider final : public BackendProvider {
 public:
  MockProvider(std::shared_ptr<const SceneSource> scenes, MockModes modes);
  std::unique_ptr<Segmenter> segmenter(const std::string& video_id) override;
  std::unique_ptr<Tracker> tracker(const std::string& video_id,
                                   const std::string& object_id) override;
  std::unique_ptr<Detector> detector(const std::string& video_id,
                                     const std::string& object_id) override;
  std::unique_ptr<Judge> judge(const std::string& video_id) override;

 private:
  std::shared_ptr<const SceneSource> scenes_;
  MockModes modes_;
};

}  // namespace tep
