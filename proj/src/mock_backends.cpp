#include "tep/mock_backends.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tep/errors.hpp"
#include "tep/json_io.hpp"
#include "tep/rng.hpp"

namespace tep {
namespace {

bool is_trackable(const ScenarioSpec& spec, Label label) {
  if (label == kBackgroundLabel || label == kClutterLabel) return false;
  if (label > spec.actors.size()) return false;
  return spec.actors[label - 1].identity != Identity::Occluder;
}

Label pick_max(const std::map<Label, std::int64_t>& counts) {
  Label best = kBackgroundLabel;
  std::int64_t best_n = 0;
  for (const auto& [label, n] : counts) {
    if (n > best_n) {
      best = label;
      best_n = n;
    }
  }
  return best;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Label dominant_actor(const ScenarioSpec& spec, const LabelGrid& grid, const Mask& mask) {
  if (mask.dims() != grid.dims) throw Error(ErrorKind::DimensionMismatch, "mask vs label grid");
  const auto fg = mask.to_grid();
  std::map<Label, std::int64_t> counts;
  for (std::size_t i = 0; i < fg.size(); ++i) {
    if (fg[i] && is_trackable(spec, grid.labels[i])) ++counts[grid.labels[i]];
  }
  return pick_max(counts);
}

Label dominant_actor(const ScenarioSpec& spec, const LabelGrid& grid, const BBox& box) {
  std::map<Label, std::int64_t> counts;
  for (int y = std::max(0, box.y0()); y < std::min(grid.dims.height, box.y1()); ++y) {
    for (int x = std::max(0, box.x0()); x < std::min(grid.dims.width, box.x1()); ++x) {
      const Label l = grid.at(x, y);
      if (is_trackable(spec, l)) ++counts[l];
    }
  }
  return pick_max(counts);
}

// ---------------------------------------------------------------------------
// Scene sources

void InMemoryScenes::add(const SyntheticVideo& video) {
  Entry e{video.spec, {}};
  for (const LabelGrid& g : video.frames) e.frames.push_back(std::make_shared<const LabelGrid>(g));
  videos_.insert_or_assign(video.spec.video_id, std::move(e));
}

const ScenarioSpec& InMemoryScenes::scenario(const std::string& video_id) const {
  auto it = videos_.find(video_id);
  if (it == videos_.end()) throw Error(ErrorKind::InvalidArgument, "unknown video " + video_id);
  return it->second.spec;
}

std::shared_ptr<const LabelGrid> InMemoryScenes::frame(const std::string& video_id,
                                                       int frame_index) const {
  auto it = videos_.find(video_id);
  if (it == videos_.end()) throw Error(ErrorKind::InvalidArgument, "unknown video " + video_id);
  const auto& frames = it->second.frames;
  if (frame_index < 0 || frame_index >= static_cast<int>(frames.size())) {
    throw Error(ErrorKind::InvalidArgument,
                video_id + ": frame " + std::to_string(frame_index) + " out of range");
  }
  return frames[static_cast<std::size_t>(frame_index)];
}

const ScenarioSpec& DatasetScenes::scenario(const std::string& video_id) const {
  std::lock_guard lock(mu_);
  auto it = specs_.find(video_id);
  if (it == specs_.end()) {
    const auto text = read_file(root_ / video_id / "scenario.json");
    auto spec = std::make_unique<ScenarioSpec>(scenario_from_json(Json::parse(text)));
    it = specs_.emplace(video_id, std::move(spec)).first;
  }
  return *it->second;
}

std::shared_ptr<const LabelGrid> DatasetScenes::frame(const std::string& video_id,
                                                      int frame_index) const {
  const auto key = std::make_pair(video_id, frame_index);
  {
    std::lock_guard lock(mu_);
    if (auto it = frames_.find(key); it != frames_.end()) return it->second;
  }
  const auto path = root_ / video_id / "frames" / (frame_stem(frame_index) + ".lbl");
  auto grid = std::make_shared<const LabelGrid>(LabelGrid::parse(read_file(path)));
  std::lock_guard lock(mu_);
  return frames_.emplace(key, std::move(grid)).first->second;
}

// ---------------------------------------------------------------------------
// Segmenter

MockSegmenter::MockSegmenter(const SceneSource& scenes, std::string video_id,
                             std::optional<DriftModel> drift)
    : scenes_(scenes), video_id_(std::move(video_id)), drift_(drift) {}

MockSegmenter::Session& MockSegmenter::get(const std::string& session) {
  auto it = sessions_.find(session);
  if (it == sessions_.end()) throw Error(ErrorKind::NotInitialized, "no session " + session);
  return it->second;
}

std::string MockSegmenter::init(const SegmenterInit& init) {
  if (init.first_mask.is_empty()) {
    throw Error(ErrorKind::EmptyAnnotation, "object " + init.object_id + " has an empty first mask");
  }
  const std::string id = init.video_id + "/" + init.object_id;
  if (sessions_.contains(id)) throw Error(ErrorKind::DuplicateSession, id);
  const auto grid = scenes_.frame(init.video_id, init.first_frame_index);
  Session s;
  s.anchor = dominant_actor(scenes_.scenario(init.video_id), *grid, init.first_mask);
  s.last_frame = init.first_frame_index;
  sessions_.emplace(id, s);
  return id;
}

Mask MockSegmenter::propagate(const std::string& session, int frame_index) {
  Session& s = get(session);
  const bool repropagate = s.prompt_frame == frame_index && frame_index == s.last_frame &&
                           !s.repropagated;
  if (frame_index <= s.last_frame && !repropagate) {
    throw Error(ErrorKind::OutOfOrderFrame, session + ": frame " + std::to_string(frame_index) +
                                                " after " + std::to_string(s.last_frame));
  }
  if (repropagate) s.repropagated = true;
  s.last_frame = frame_index;

  const auto grid = scenes_.frame(video_id_, frame_index);
  if (s.anchor == kBackgroundLabel) return Mask::empty(grid->dims);
  Mask m = grid->mask_of(s.anchor);

  if (drift_ && drift_->occlusion_blindness && m.is_empty()) {
    // Lost: latch onto some other visible look-alike.
    const ScenarioSpec& spec = scenes_.scenario(video_id_);
    std::vector<Label> candidates;
    for (std::size_t i = 0; i < spec.actors.size(); ++i) {
      const Label l = actor_label(i);
      if (l == s.anchor || spec.actors[i].identity == Identity::Occluder) continue;
      if (std::find(grid->labels.begin(), grid->labels.end(), l) != grid->labels.end()) {
        candidates.push_back(l);
      }
    }
    if (candidates.empty()) {
      s.anchor = kBackgroundLabel;
      return m;
    }
    Rng rng(mix_seed(drift_->seed, static_cast<std::uint64_t>(frame_index)));
    s.anchor = candidates[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(candidates.size()) - 1))];
    m = grid->mask_of(s.anchor);
  }

  if (drift_ && !s.drift_cancelled && frame_index >= drift_->drift_start) {
    const int k = frame_index - drift_->drift_start;
    m = translate(m, k * drift_->dx, k * drift_->dy);
    if (drift_->shrink_per_frame > 0.0) m = scale_about_center(m, 1.0 - drift_->shrink_per_frame * k);
  }
  return m;
}

void MockSegmenter::prompt_box(const std::string& session, int frame_index, const BBox& box) {
  Session& s = get(session);
  if (frame_index < s.last_frame || s.prompt_frame == frame_index) {
    throw Error(ErrorKind::StaleFrame,
                session + ": cannot prompt frame " + std::to_string(frame_index));
  }
  const auto grid = scenes_.frame(video_id_, frame_index);
  s.anchor = dominant_actor(scenes_.scenario(video_id_), *grid, box);
  s.prompt_frame = frame_index;
  s.repropagated = false;
  if (drift_ && frame_index >= drift_->drift_start) s.drift_cancelled = true;
}

// ---------------------------------------------------------------------------
// Tracker

MockTracker::MockTracker(const SceneSource& scenes, std::optional<TrackerNoise> noise)
    : scenes_(scenes), noise_(noise) {}

void MockTracker::init(const FrameRef& first_frame, const BBox& template_box) {
  const auto grid = scenes_.frame(first_frame.video_id, first_frame.frame_index);
  video_id_ = first_frame.video_id;
  anchor_ = dominant_actor(scenes_.scenario(first_frame.video_id), *grid, template_box);
  last_box_.reset();
  frames_absent_ = 0;
}

BBox MockTracker::jitter_box(const BBox& box, FrameDims frame, const TrackerNoise& noise,
                             int frame_index) {
  Rng rng(mix_seed(noise.seed, static_cast<std::uint64_t>(frame_index)));
  const int j0 = rng.uniform_int(-noise.jitter, noise.jitter);
  const int j1 = rng.uniform_int(-noise.jitter, noise.jitter);
  const int j2 = rng.uniform_int(-noise.jitter, noise.jitter);
  const int j3 = rng.uniform_int(-noise.jitter, noise.jitter);
  auto moved = BBox::from_extents(
      std::clamp(box.x0() + j0, 0, frame.width), std::clamp(box.y0() + j1, 0, frame.height),
      std::clamp(box.x1() + j2, 0, frame.width), std::clamp(box.y1() + j3, 0, frame.height));
  return moved.value_or(box);
}

TrackOutput MockTracker::track(int frame_index) {
  if (!video_id_) throw Error(ErrorKind::NotInitialized, "track before init");
  const auto grid = scenes_.frame(*video_id_, frame_index);
  const auto visible = anchor_ == kBackgroundLabel ? std::nullopt
                                                   : mask_to_bbox(grid->mask_of(anchor_));
  if (visible) {
    frames_absent_ = 0;
    last_box_ = noise_ ? jitter_box(*visible, grid->dims, *noise_, frame_index) : *visible;
    return {last_box_, 1.0};
  }
  if (!noise_ || !last_box_) return TrackOutput::missing();
  ++frames_absent_;
  const double confidence = 1.0 - noise_->confidence_decay * frames_absent_;
  if (confidence <= 0.0) return TrackOutput::missing();
  return {last_box_, std::min(confidence, 1.0)};
}

// ---------------------------------------------------------------------------
// Detector

MockDetector::MockDetector(const SceneSource& scenes, std::vector<ConfusionWindow> confusion)
    : scenes_(scenes), confusion_(std::move(confusion)) {}

std::string MockDetector::describe(const FrameRef& first_frame, const Mask& mask) {
  const ScenarioSpec& spec = scenes_.scenario(first_frame.video_id);
  const auto grid = scenes_.frame(first_frame.video_id, first_frame.frame_index);
  video_id_ = first_frame.video_id;
  described_ = dominant_actor(spec, *grid, mask);
  if (described_ == kBackgroundLabel) return "nothing";
  const std::string& d = spec.actors[described_ - 1].description;
  return d.empty() ? "actor " + std::to_string(described_) : d;
}

TrackOutput MockDetector::detect(int frame_index, const std::string& description) {
  if (!video_id_) throw Error(ErrorKind::NotInitialized, "detect before describe");
  const ScenarioSpec& spec = scenes_.scenario(*video_id_);
  Label label = kBackgroundLabel;
  for (std::size_t i = 0; i < spec.actors.size(); ++i) {
    const auto& d = spec.actors[i].description;
    if ((!d.empty() && d == description) || description == "actor " + std::to_string(i + 1)) {
      label = actor_label(i);
      break;
    }
  }
  for (const ConfusionWindow& w : confusion_) {
    if (frame_index >= w.first && frame_index <= w.last) label = static_cast<Label>(w.actor_id);
  }
  if (label == kBackgroundLabel) return TrackOutput::missing();
  const auto grid = scenes_.frame(*video_id_, frame_index);
  if (auto box = mask_to_bbox(grid->mask_of(label))) return {box, 1.0};
  return TrackOutput::missing();
}

// ---------------------------------------------------------------------------
// Judge

MockJudge::MockJudge(const SceneSource& scenes, std::map<int, JudgeChoice> script)
    : scenes_(scenes), script_(std::move(script)) {}

JudgeVerdict MockJudge::compare(const CropRef& reference, const CropRef& crop_a,
                                const CropRef& crop_b) {
  if (auto it = script_.find(crop_a.frame.frame_index); it != script_.end()) {
    return {it->second, "scripted"};
  }
  const ScenarioSpec& spec = scenes_.scenario(reference.frame.video_id);
  const auto ref_grid = scenes_.frame(reference.frame.video_id, reference.frame.frame_index);
  const Label identity = dominant_actor(spec, *ref_grid, reference.box);
  const std::int64_t a =
      scenes_.frame(crop_a.frame.video_id, crop_a.frame.frame_index)->count_in(identity, crop_a.box);
  const std::int64_t b =
      scenes_.frame(crop_b.frame.video_id, crop_b.frame.frame_index)->count_in(identity, crop_b.box);
  return {b > a ? JudgeChoice::AuxiliaryCrop : JudgeChoice::BaselineCrop,
          "reference overlap baseline=" + std::to_string(a) + " auxiliary=" + std::to_string(b)};
}

SemanticVerdict MockJudge::classify_semantic(const FrameRef& frame, const Mask& mask) {
  const ScenarioSpec& spec = scenes_.scenario(frame.video_id);
  const auto grid = scenes_.frame(frame.video_id, frame.frame_index);
  const Label l = dominant_actor(spec, *grid, mask);
  if (l == kBackgroundLabel || spec.actors[l - 1].description.empty()) return {false, {}};
  return {true, spec.actors[l - 1].description};
}

// ---------------------------------------------------------------------------
// Provider

MockProvider::MockProvider(std::shared_ptr<const SceneSource> scenes, MockModes modes)
    : scenes_(std::move(scenes)), modes_(modes) {}

std::unique_ptr<Segmenter> MockProvider::segmenter(const std::string& video_id) {
  std::optional<DriftModel> drift;
  if (modes_.segmenter == MockMode::Scenario) drift = scenes_->scenario(video_id).mock.drift;
  return std::make_unique<MockSegmenter>(*scenes_, video_id, drift);
}

std::unique_ptr<Tracker> MockProvider::tracker(const std::string& video_id, const std::string&) {
  std::optional<TrackerNoise> noise;
  if (modes_.tracker == MockMode::Scenario) noise = scenes_->scenario(video_id).mock.tracker_noise;
  return std::make_unique<MockTracker>(*scenes_, noise);
}

std::unique_ptr<Detector> MockProvider::detector(const std::string& video_id, const std::string&) {
  std::vector<ConfusionWindow> confusion;
  if (modes_.detector == MockMode::Scenario) {
    confusion = scenes_->scenario(video_id).mock.detector_confusion;
  }
  return std::make_unique<MockDetector>(*scenes_, std::move(confusion));
}

std::unique_ptr<Judge> MockProvider::judge(const std::string& video_id) {
  std::map<int, JudgeChoice> script;
  if (modes_.judge == MockMode::Scenario) script = scenes_->scenario(video_id).mock.judge_script;
  return std::make_unique<MockJudge>(*scenes_, std::move(script));
}

}  // namespace tep
