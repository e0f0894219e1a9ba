#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tep/geometry.hpp"

namespace tep {

/// Frames are referenced by id against a shared dataset, never shipped.
struct FrameRef {
  std::string video_id;
  int frame_index = 0;
  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

/// A judge-visible region: a box within one frame.
struct CropRef {
  FrameRef frame;
  BBox box;
};

struct SegmenterInit {
  std::string video_id;
  std::string object_id;
  int first_frame_index = 0;
  Mask first_mask;
};

/// Auxiliary localisation from a tracker or detector.
/// Invariant: confidence in [0,1], and no bbox implies confidence 0.
struct TrackOutput {
  std::optional<BBox> bbox;
  double confidence = 0.0;

  static TrackOutput missing() { return {}; }
  /// Throws ProtocolViolation when the invariant does not hold.
  void validate() const;
  friend bool operator==(const TrackOutput&, const TrackOutput&) = default;
};

enum class JudgeChoice { BaselineCrop, AuxiliaryCrop };

struct JudgeVerdict {
  JudgeChoice choice = JudgeChoice::BaselineCrop;
  std::string rationale;
};

struct SemanticVerdict {
  bool distinct = false;
  std::string description;
};

/// Failure injection for the mock segmenter.
///
/// From drift_start on, the predicted mask is the followed object's mask
/// shifted by k*offset and scaled by (1 - k*shrink_per_frame), k = t - drift_start.
/// A box prompt at or after drift_start cancels the drift for good. With
/// occlusion_blindness the segmenter loses an object that vanishes and latches
/// onto a look-alike chosen from `seed`.
struct DriftModel {
  int drift_start = 0;
  int dx = 0;
  int dy = 0;
  double shrink_per_frame = 0.0;
  bool occlusion_blindness = false;
  std::uint64_t seed = 0;
};

/// Noisy tracker: +-jitter px per box edge while visible; during absence the
/// last box is held with confidence 1 - confidence_decay*k, dropping to no
/// box at confidence 0. Confidence steps back to 1 on reappearance.
struct TrackerNoise {
  int jitter = 2;
  double confidence_decay = 0.05;
  std::uint64_t seed = 0;
};

}  // namespace tep
