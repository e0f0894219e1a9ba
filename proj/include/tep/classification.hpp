#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "tep/backends.hpp"
#include "tep/geometry.hpp"

namespace tep {

enum class TargetKind { Regular, Tiny, SemanticDominated };

std::string_view to_string(TargetKind k);

/// Routing decision for one annotated object, with the evidence behind it.
struct TargetClass {
  TargetKind kind = TargetKind::Regular;
  double area_ratio = 0.0;
  /// Absent when the semantic query was not made (tiny objects).
  std::optional<bool> semantic_verdict;
  std::optional<std::string> description;
};

/// Area test first: a first-frame mask covering less than tiny_area_ratio of
/// the frame is Tiny without consulting the oracle. Otherwise the oracle's
/// verdict picks SemanticDominated or Regular.
///
/// Throws EmptyAnnotation for an empty mask; oracle errors propagate.
TargetClass classify_target(const Mask& first_mask, const FrameRef& first_frame,
                            double tiny_area_ratio, Judge& semantic_oracle);

}  // namespace tep
