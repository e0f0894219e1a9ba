#include "tep/classification.hpp"

#include "tep/errors.hpp"

namespace tep {

std::string_view to_string(TargetKind k) {
  switch (k) {
    case TargetKind::Regular: return "Regular";
    case TargetKind::Tiny: return "Tiny";
    case TargetKind::SemanticDominated: return "SemanticDominated";
  }
  return "?";
}

TargetClass classify_target(const Mask& first_mask, const FrameRef& first_frame,
                            double tiny_area_ratio, Judge& semantic_oracle) {
  const std::int64_t area = mask_area(first_mask);
  if (area == 0) {
    throw Error(ErrorKind::EmptyAnnotation,
                first_frame.video_id + ": empty first-frame mask at frame " +
                    std::to_string(first_frame.frame_index));
  }
  TargetClass out;
  out.area_ratio = static_cast<double>(area) / static_cast<double>(first_mask.dims().area());
  if (out.area_ratio < tiny_area_ratio) {
    out.kind = TargetKind::Tiny;
    return out;
  }
  const SemanticVerdict verdict = semantic_oracle.classify_semantic(first_frame, first_mask);
  out.semantic_verdict = verdict.distinct;
  if (verdict.distinct) {
    out.kind = TargetKind::SemanticDominated;
    out.description = verdict.description;
  }
  return out;
}

}  // namespace tep
