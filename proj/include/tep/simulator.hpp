#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tep/backend_types.hpp"
#include "tep/geometry.hpp"
#include "tep/manifest.hpp"
#include "tep/metrics.hpp"

namespace tep {

enum class Shape { Rect, Disc };
enum class Identity { Target, Distractor, Occluder };

std::string_view to_string(Shape s);
std::string_view to_string(Identity i);

struct Waypoint {
  int frame = 0;
  int x = 0;
  int y = 0;
  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

/// Inclusive frame interval.
struct FrameRange {
  int first = 0;
  int last = 0;
  friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

/// A moving shape. Its position is the top-left corner of its size x size
/// footprint; waypoints are interpolated linearly with round-half-up.
struct ActorSpec {
  Shape shape = Shape::Rect;
  int size = 1;
  std::vector<Waypoint> trajectory;
  Identity identity = Identity::Target;
  /// Absent means visible on every frame.
  std::optional<std::vector<FrameRange>> visible_ranges;
  /// Verbalisable attribute; non-empty marks a semantically distinct actor.
  std::string description;
};

/// Detector confusion: on frames [first,last] the scripted detector reports
/// actor `actor_id` instead of the described one.
struct ConfusionWindow {
  int first = 0;
  int last = 0;
  int actor_id = 0;
};

/// Failure models the "scenario" mock profile applies.
struct MockProfile {
  std::optional<DriftModel> drift;
  std::optional<TrackerNoise> tracker_noise;
  std::vector<ConfusionWindow> detector_confusion;
  /// Frame index -> forced verdict for the scripted judge.
  std::map<int, JudgeChoice> judge_script;
};

struct ScenarioSpec {
  std::string video_id;
  int width = 0;
  int height = 0;
  int num_frames = 0;
  std::uint64_t seed = 0;
  std::vector<ActorSpec> actors;
  /// Probability that a background pixel is clutter.
  double noise = 0.0;
  MockProfile mock;

  FrameDims dims() const { return {width, height}; }
};

using Label = std::uint16_t;
inline constexpr Label kBackgroundLabel = 0;
inline constexpr Label kClutterLabel = 0xFFFF;

/// Actor i (0-based) is drawn with label i+1.
constexpr Label actor_label(std::size_t actor_index) { return static_cast<Label>(actor_index + 1); }

/// Per-pixel actor labels for one frame.
struct LabelGrid {
  FrameDims dims;
  std::vector<Label> labels;

  Label at(int x, int y) const { return labels[static_cast<std::size_t>(y) * dims.width + x]; }
  Mask mask_of(Label label) const;
  /// Pixels of `label` inside `box`.
  std::int64_t count_in(Label label, const BBox& box) const;

  /// "<w> <h> <label> <count> ..." run-length text.
  std::string to_string() const;
  static LabelGrid parse(std::string_view text);

  friend bool operator==(const LabelGrid&, const LabelGrid&) = default;
};

struct SyntheticVideo {
  ScenarioSpec spec;
  std::vector<LabelGrid> frames;
  /// Object id (the target's label as decimal) -> visible-pixel masks.
  ObjectSequences gt;
  VideoEntry entry;
};

/// Throws SpecError.
void validate(const ScenarioSpec& spec);

/// Interpolated, in-frame-clamped top-left corner of the actor at `frame`.
Pixel actor_position(const ActorSpec& actor, int frame, FrameDims dims);
bool actor_visible(const ActorSpec& actor, int frame);
/// Shape membership of pixel p for an actor whose corner is at `corner`.
bool shape_contains(const ActorSpec& actor, Pixel corner, Pixel p);

/// Pure function of the scenario. Draw order: clutter, targets, distractors,
/// occluders; later draws cover earlier ones.
SyntheticVideo generate(const ScenarioSpec& spec);

/// "drift-tiny", "distractor-semantic", "reappear", "crowded".
std::span<const std::string_view> suite_names();

/// Ten seeded specs for a named suite. Throws UnknownSuite.
std::vector<ScenarioSpec> scenario_suite(std::string_view name, std::uint64_t seed);

}  // namespace tep
