#pragma once

#include <memory>
#include <string>

#include "tep/backend_types.hpp"

namespace tep {

/// Mask propagation model (the baseline video segmenter).
/// Sessions are single-owner; calls on one session are strictly sequential.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  /// Returns the session handle. Throws EmptyAnnotation, DuplicateSession.
  virtual std::string init(const SegmenterInit& init) = 0;
  /// Frames must increase; the single exception is re-propagating the frame a
  /// box prompt was just given for. Throws OutOfOrderFrame.
  virtual Mask propagate(const std::string& session, int frame_index) = 0;
  /// Conditions later propagation on `box`. Throws StaleFrame for frames
  /// before the last propagated one or for a second prompt on one frame.
  virtual void prompt_box(const std::string& session, int frame_index, const BBox& box) = 0;
};

/// Image-prompted single-object tracker; one instance per object.
class Tracker {
 public:
  virtual ~Tracker() = default;
  virtual void init(const FrameRef& first_frame, const BBox& template_box) = 0;
  /// Throws NotInitialized before init.
  virtual TrackOutput track(int frame_index) = 0;
};

/// Text-guided detector; one instance per object.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::string describe(const FrameRef& first_frame, const Mask& mask) = 0;
  /// Throws NotInitialized before describe.
  virtual TrackOutput detect(int frame_index, const std::string& description) = 0;
};

/// Forced-choice crop arbiter that also answers the classification query.
class Judge {
 public:
  virtual ~Judge() = default;
  /// crop_a is the baseline crop, crop_b the auxiliary one.
  virtual JudgeVerdict compare(const CropRef& reference, const CropRef& crop_a,
                               const CropRef& crop_b) = 0;
  /// Whether the masked object has a distinguishing verbalisable attribute.
  virtual SemanticVerdict classify_semantic(const FrameRef& frame, const Mask& mask) = 0;
};

/// Creates backend instances. Connection-backed providers open one
/// connection per returned instance.
class BackendProvider {
 public:
  virtual ~BackendProvider() = default;
  virtual std::unique_ptr<Segmenter> segmenter(const std::string& video_id) = 0;
  virtual std::unique_ptr<Tracker> tracker(const std::string& video_id,
                                           const std::string& object_id) = 0;
  virtual std::unique_ptr<Detector> detector(const std::string& video_id,
                                             const std::string& object_id) = 0;
  virtual std::unique_ptr<Judge> judge(const std::string& video_id) = 0;
};

}  // namespace tep
