#include "tep/fusion.hpp"

#include "tep/errors.hpp"

namespace tep {

void FusionConfig::validate() const {
  auto ratio = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorKind::ConfigError, std::string(name) + " must lie in [0,1]");
    }
  };
  ratio(iou_threshold, "fusion.iou_threshold");
  ratio(confidence_threshold, "fusion.confidence_threshold");
  ratio(tiny_area_ratio, "fusion.tiny_area_ratio");
  if (judge_crop_pad < 0) throw Error(ErrorKind::ConfigError, "fusion.judge_crop_pad must be >= 0");
  if (evaluate_every < 1) throw Error(ErrorKind::ConfigError, "fusion.evaluate_every must be >= 1");
  if (f_dot_tolerance < 0) throw Error(ErrorKind::ConfigError, "fusion.f_dot_tolerance must be >= 0");
}

std::string_view to_string(FusionAction a) {
  return a == FusionAction::KeepBaseline ? "KeepBaseline" : "InjectAuxiliary";
}

std::string_view to_string(FusionReason r) {
  switch (r) {
    case FusionReason::IoUAboveThreshold: return "IoUAboveThreshold";
    case FusionReason::AuxMissing: return "AuxMissing";
    case FusionReason::LowConfidence: return "LowConfidence";
    case FusionReason::HighConfidenceInject: return "HighConfidenceInject";
    case FusionReason::JudgeChoseBaseline: return "JudgeChoseBaseline";
    case FusionReason::JudgeChoseAuxiliary: return "JudgeChoseAuxiliary";
    case FusionReason::BaselineEmpty: return "BaselineEmpty";
  }
  return "?";
}

bool is_degradable(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  if (!err) return false;
  switch (err->kind()) {
    case ErrorKind::BackendTimeout:
    case ErrorKind::BackendUnavailable:
    case ErrorKind::RemoteError:
    case ErrorKind::ProtocolViolation:
    case ErrorKind::SpawnFailed:
    case ErrorKind::ConnectRefused:
    case ErrorKind::VersionMismatch:
      return true;
    default:
      return false;
  }
}

namespace {

FusionDecision keep(std::optional<BBox> sam_box, std::optional<double> iou, FusionReason reason) {
  return {FusionAction::KeepBaseline, sam_box, iou, reason};
}

FusionDecision inject(const BBox& aux, double iou, FusionReason reason) {
  return {FusionAction::InjectAuxiliary, aux, iou, reason};
}

double gate_iou(const std::optional<BBox>& sam_box, const BBox& aux) {
  return sam_box ? bbox_iou(*sam_box, aux) : 0.0;
}

}  // namespace

FusionDecision fuse_tiny(const Mask& sam_mask, const TrackOutput& aux, const FusionConfig& cfg) {
  const auto sam_box = mask_to_bbox(sam_mask);
  if (!aux.bbox) return keep(sam_box, std::nullopt, FusionReason::AuxMissing);
  const double iou = gate_iou(sam_box, *aux.bbox);
  if (iou >= cfg.iou_threshold) return keep(sam_box, iou, FusionReason::IoUAboveThreshold);
  if (aux.confidence < cfg.confidence_threshold) return keep(sam_box, iou, FusionReason::LowConfidence);
  return inject(*aux.bbox, iou, FusionReason::HighConfidenceInject);
}

FusionDecision fuse_semantic(const Mask& sam_mask, const TrackOutput& det, const CropRef& reference,
                             const FrameRef& frame, Judge& judge, const FusionConfig& cfg) {
  const auto sam_box = mask_to_bbox(sam_mask);
  if (!det.bbox) return keep(sam_box, std::nullopt, FusionReason::AuxMissing);
  const double iou = gate_iou(sam_box, *det.bbox);
  if (iou >= cfg.iou_threshold) return keep(sam_box, iou, FusionReason::IoUAboveThreshold);
  // Nothing to show the judge for the baseline side.
  if (!sam_box) return inject(*det.bbox, iou, FusionReason::BaselineEmpty);

  const FrameDims dims = sam_mask.dims();
  const CropRef baseline{frame, crop(dims, *sam_box, cfg.judge_crop_pad)};
  const CropRef auxiliary{frame, crop(dims, *det.bbox, cfg.judge_crop_pad)};
  JudgeVerdict verdict;
  try {
    verdict = judge.compare(reference, baseline, auxiliary);
  } catch (const std::exception& e) {
    if (!is_degradable(e)) throw;
    return keep(sam_box, iou, FusionReason::AuxMissing);
  }
  if (verdict.choice == JudgeChoice::AuxiliaryCrop) {
    return inject(*det.bbox, iou, FusionReason::JudgeChoseAuxiliary);
  }
  return keep(sam_box, iou, FusionReason::JudgeChoseBaseline);
}

}  // namespace tep
