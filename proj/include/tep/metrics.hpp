#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tep/geometry.hpp"

namespace tep {

using MaskSequence = std::vector<Mask>;
/// Object id -> per-frame masks. Ordered, so aggregation is in object-id order.
using ObjectSequences = std::map<std::string, MaskSequence>;

enum class Phase { BeforeFirstAppearance, Visible, Disappeared, Reappeared };

std::string_view to_string(Phase phase);

struct FrameStatus {
  int frame_index = 0;
  bool gt_present = false;
  Phase phase = Phase::BeforeFirstAppearance;
  friend bool operator==(const FrameStatus&, const FrameStatus&) = default;
};

std::vector<FrameStatus> classify_phases(const std::vector<bool>& gt_present);
std::vector<FrameStatus> classify_phases(const MaskSequence& gt);

/// Per-frame region similarity. Frames before the first GT appearance are
/// not counted; if GT never appears every frame is counted.
struct SequenceScores {
  std::vector<double> per_frame;
  std::vector<bool> counted;
  double mean = 0.0;
};
SequenceScores region_similarity(const MaskSequence& pred, const MaskSequence& gt);

/// Boundary F-measure. A boundary pixel matches when some boundary pixel of
/// the other mask lies within Euclidean distance `tolerance`.
double boundary_f(const Mask& pred, const Mask& gt, int tolerance);

/// ceil(0.8% of the frame diagonal), the tolerance used for the F column.
int default_boundary_tolerance(FrameDims dims);

struct EvalConfig {
  int f_dot_tolerance = 1;
  /// Overrides default_boundary_tolerance when set.
  std::optional<int> f_tolerance;
};

struct Scores {
  double j = 0.0;
  double f = 0.0;
  double jf = 0.0;
  double f_dot = 0.0;
  double jf_dot = 0.0;
  std::optional<double> jf_disappear;
  std::optional<double> jf_reappear;
  friend bool operator==(const Scores&, const Scores&) = default;
};

struct ObjectScores {
  std::string object_id;
  Scores scores;
};

struct EvalReport {
  Scores overall;
  std::vector<ObjectScores> per_object;
};

/// Everything computed per frame for one object; the report fields are
/// summaries of this.
struct ObjectFrameScores {
  std::vector<FrameStatus> phases;
  std::vector<double> j;
  std::vector<double> f;
  std::vector<double> f_dot;
  std::vector<bool> counted;
};

ObjectFrameScores score_object(const MaskSequence& pred, const MaskSequence& gt,
                               const EvalConfig& cfg);
Scores summarize(const ObjectFrameScores& frames);

/// Mean of (J + F-dot)/2 over frames in `phase`; absent when none qualify.
std::optional<double> phase_jf_dot(const ObjectFrameScores& frames, Phase phase);

/// Per-object scores then mean over objects. Throws ObjectSetMismatch,
/// LengthMismatch or DimensionMismatch.
EvalReport evaluate(const ObjectSequences& pred, const ObjectSequences& gt,
                    const EvalConfig& cfg);

/// Field-wise mean; optional fields average over the inputs that have them.
Scores mean_scores(std::span<const Scores> scores);

/// Report column order; values print as percentages with two decimals.
inline constexpr std::array<std::string_view, 7> kReportColumns = {
    "J&Ḟ", "J", "Ḟ", "J&Ḟ_disappear", "J&Ḟ_reappear", "F", "J&F"};

std::array<std::optional<double>, 7> in_column_order(const Scores& s);

/// Values in kReportColumns order, "-" for absent fields, joined by " | ".
std::string format_scores_row(const Scores& s);
/// Flat "key value" lines in kReportColumns order.
std::string format_scores_table(const Scores& s);

}  // namespace tep
