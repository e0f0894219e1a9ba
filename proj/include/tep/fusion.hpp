#pragma once

#include <optional>
#include <string_view>

#include "tep/backend_types.hpp"
#include "tep/backends.hpp"
#include "tep/geometry.hpp"

namespace tep {

/// Thresholds and knobs of the prompt-fusion gate. Field names are also the
/// config-file keys.
struct FusionConfig {
  double iou_threshold = 0.5;
  double confidence_threshold = 0.5;
  double tiny_area_ratio = 0.001;
  int judge_crop_pad = 8;
  int evaluate_every = 1;
  int f_dot_tolerance = 1;

  /// Throws ConfigError.
  void validate() const;
  friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

enum class FusionAction { KeepBaseline, InjectAuxiliary };

enum class FusionReason {
  IoUAboveThreshold,
  AuxMissing,
  LowConfidence,
  HighConfidenceInject,
  JudgeChoseBaseline,
  JudgeChoseAuxiliary,
  /// Detector box injected because the baseline mask was empty.
  BaselineEmpty,
};

std::string_view to_string(FusionAction a);
std::string_view to_string(FusionReason r);

struct FusionDecision {
  FusionAction action = FusionAction::KeepBaseline;
  /// The injected box, or the baseline mask's box when kept.
  std::optional<BBox> chosen_bbox;
  std::optional<double> iou_observed;
  FusionReason reason = FusionReason::AuxMissing;

  friend bool operator==(const FusionDecision&, const FusionDecision&) = default;
};

/// Gate for tracker boxes: agreement keeps the baseline, disagreement
/// injects the auxiliary box only when its confidence clears the threshold.
/// An empty baseline mask counts as IoU 0.
FusionDecision fuse_tiny(const Mask& sam_mask, const TrackOutput& aux, const FusionConfig& cfg);

/// Gate for detector boxes: disagreement is arbitrated by the judge, which
/// compares padded crops of both boxes with the reference crop. With an
/// empty baseline mask the detector box is injected without asking the
/// judge. Judge failures degrade to KeepBaseline(AuxMissing).
FusionDecision fuse_semantic(const Mask& sam_mask, const TrackOutput& det, const CropRef& reference,
                             const FrameRef& frame, Judge& judge, const FusionConfig& cfg);

/// Backend failures that degrade an auxiliary path instead of aborting.
bool is_degradable(const std::exception& e);

}  // namespace tep
