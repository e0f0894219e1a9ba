#include "tep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tep/errors.hpp"

namespace tep {
namespace {

void require_equal_lengths(const MaskSequence& pred, const MaskSequence& gt) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorKind::LengthMismatch, "prediction has " + std::to_string(pred.size()) +
                                               " frames, ground truth " +
                                               std::to_string(gt.size()));
  }
}

double mean_of(const std::vector<double>& values, const std::vector<bool>& use) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!use[i]) continue;
    sum += values[i];
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::vector<bool> counted_frames(const std::vector<FrameStatus>& phases) {
  std::vector<bool> counted(phases.size());
  bool any = false;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    counted[i] = phases[i].phase != Phase::BeforeFirstAppearance;
    any = any || counted[i];
  }
  if (!any) std::fill(counted.begin(), counted.end(), true);
  return counted;
}

// Fraction of `from` pixels that have a pixel of `to_grid` within tolerance.
std::int64_t count_matched(const std::vector<Pixel>& from, const std::vector<std::uint8_t>& to_grid,
                           FrameDims dims, int tolerance) {
  const std::int64_t tol2 = static_cast<std::int64_t>(tolerance) * tolerance;
  const int reach = std::min(tolerance, std::max(dims.width, dims.height));
  std::int64_t matched = 0;
  for (const Pixel& p : from) {
    const int y_lo = std::max(0, p.y - reach), y_hi = std::min(dims.height - 1, p.y + reach);
    const int x_lo = std::max(0, p.x - reach), x_hi = std::min(dims.width - 1, p.x + reach);
    bool hit = false;
    for (int y = y_lo; y <= y_hi && !hit; ++y) {
      const std::int64_t dy = y - p.y;
      for (int x = x_lo; x <= x_hi; ++x) {
        const std::int64_t dx = x - p.x;
        if (dx * dx + dy * dy <= tol2 && to_grid[static_cast<std::size_t>(y) * dims.width + x]) {
          hit = true;
          break;
        }
      }
    }
    if (hit) ++matched;
  }
  return matched;
}

std::vector<std::uint8_t> boundary_grid(const std::vector<Pixel>& pixels, FrameDims dims) {
  std::vector<std::uint8_t> grid(static_cast<std::size_t>(dims.area()), 0);
  for (const Pixel& p : pixels) grid[static_cast<std::size_t>(p.y) * dims.width + p.x] = 1;
  return grid;
}

std::optional<double> mean_optional(std::span<const Scores> scores,
                                    std::optional<double> Scores::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const Scores& s : scores) {
    if (const auto& v = s.*field) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::BeforeFirstAppearance: return "BeforeFirstAppearance";
    case Phase::Visible: return "Visible";
    case Phase::Disappeared: return "Disappeared";
    case Phase::Reappeared: return "Reappeared";
  }
  return "?";
}

std::vector<FrameStatus> classify_phases(const std::vector<bool>& gt_present) {
  std::vector<FrameStatus> out;
  out.reserve(gt_present.size());
  bool appeared = false;
  bool disappeared_once = false;
  for (std::size_t t = 0; t < gt_present.size(); ++t) {
    const bool present = gt_present[t];
    Phase phase;
    if (present) {
      phase = disappeared_once ? Phase::Reappeared : Phase::Visible;
      appeared = true;
    } else if (appeared) {
      phase = Phase::Disappeared;
      disappeared_once = true;
    } else {
      phase = Phase::BeforeFirstAppearance;
    }
    out.push_back({static_cast<int>(t), present, phase});
  }
  return out;
}

std::vector<FrameStatus> classify_phases(const MaskSequence& gt) {
  std::vector<bool> present(gt.size());
  for (std::size_t t = 0; t < gt.size(); ++t) present[t] = !gt[t].is_empty();
  return classify_phases(present);
}

SequenceScores region_similarity(const MaskSequence& pred, const MaskSequence& gt) {
  require_equal_lengths(pred, gt);
  SequenceScores out;
  out.per_frame.reserve(gt.size());
  for (std::size_t t = 0; t < gt.size(); ++t) out.per_frame.push_back(mask_iou(pred[t], gt[t]));
  out.counted = counted_frames(classify_phases(gt));
  out.mean = mean_of(out.per_frame, out.counted);
  return out;
}

double boundary_f(const Mask& pred, const Mask& gt, int tolerance) {
  if (pred.dims() != gt.dims()) {
    throw Error(ErrorKind::DimensionMismatch, "boundary_f on masks of different size");
  }
  if (tolerance < 0) throw Error(ErrorKind::InvalidArgument, "negative boundary tolerance");
  const auto pb = boundary_pixels(pred);
  const auto gb = boundary_pixels(gt);
  if (pb.empty() && gb.empty()) return 1.0;
  if (pb.empty() || gb.empty()) return 0.0;
  const auto dims = pred.dims();
  const double precision = static_cast<double>(count_matched(pb, boundary_grid(gb, dims), dims, tolerance)) /
                           static_cast<double>(pb.size());
  const double recall = static_cast<double>(count_matched(gb, boundary_grid(pb, dims), dims, tolerance)) /
                        static_cast<double>(gb.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

int default_boundary_tolerance(FrameDims dims) {
  const double diag = std::sqrt(static_cast<double>(dims.width) * dims.width +
                                static_cast<double>(dims.height) * dims.height);
  return static_cast<int>(std::ceil(0.008 * diag));
}

ObjectFrameScores score_object(const MaskSequence& pred, const MaskSequence& gt,
                               const EvalConfig& cfg) {
  require_equal_lengths(pred, gt);
  ObjectFrameScores out;
  out.phases = classify_phases(gt);
  out.counted = counted_frames(out.phases);
  for (std::size_t t = 0; t < gt.size(); ++t) {
    const int f_tol = cfg.f_tolerance.value_or(default_boundary_tolerance(gt[t].dims()));
    out.j.push_back(mask_iou(pred[t], gt[t]));
    out.f.push_back(boundary_f(pred[t], gt[t], f_tol));
    out.f_dot.push_back(boundary_f(pred[t], gt[t], cfg.f_dot_tolerance));
  }
  return out;
}

std::optional<double> phase_jf_dot(const ObjectFrameScores& frames, Phase phase) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < frames.phases.size(); ++t) {
    if (frames.phases[t].phase != phase) continue;
    sum += (frames.j[t] + frames.f_dot[t]) / 2.0;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

Scores summarize(const ObjectFrameScores& frames) {
  Scores s;
  s.j = mean_of(frames.j, frames.counted);
  s.f = mean_of(frames.f, frames.counted);
  s.f_dot = mean_of(frames.f_dot, frames.counted);
  s.jf = (s.j + s.f) / 2.0;
  s.jf_dot = (s.j + s.f_dot) / 2.0;
  s.jf_disappear = phase_jf_dot(frames, Phase::Disappeared);
  s.jf_reappear = phase_jf_dot(frames, Phase::Reappeared);
  return s;
}

EvalReport evaluate(const ObjectSequences& pred, const ObjectSequences& gt, const EvalConfig& cfg) {
  std::string diff;
  for (const auto& [id, _] : gt) {
    if (!pred.contains(id)) diff += " missing:" + id;
  }
  for (const auto& [id, _] : pred) {
    if (!gt.contains(id)) diff += " unexpected:" + id;
  }
  if (!diff.empty()) throw Error(ErrorKind::ObjectSetMismatch, "object sets differ:" + diff);
  if (gt.empty()) throw Error(ErrorKind::ObjectSetMismatch, "no objects to evaluate");

  EvalReport report;
  std::vector<Scores> all;
  for (const auto& [id, gt_seq] : gt) {
    Scores s = summarize(score_object(pred.at(id), gt_seq, cfg));
    report.per_object.push_back({id, s});
    all.push_back(s);
  }
  report.overall = mean_scores(all);
  return report;
}

Scores mean_scores(std::span<const Scores> scores) {
  Scores out;
  if (scores.empty()) return out;
  const double n = static_cast<double>(scores.size());
  for (const Scores& s : scores) {
    out.j += s.j;
    out.f += s.f;
    out.f_dot += s.f_dot;
  }
  out.j /= n;
  out.f /= n;
  out.f_dot /= n;
  out.jf = (out.j + out.f) / 2.0;
  out.jf_dot = (out.j + out.f_dot) / 2.0;
  out.jf_disappear = mean_optional(scores, &Scores::jf_disappear);
  out.jf_reappear = mean_optional(scores, &Scores::jf_reappear);
  return out;
}

namespace {

std::string percent(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v * 100.0);
  return buf;
}

}  // namespace

std::array<std::optional<double>, 7> in_column_order(const Scores& s) {
  return {s.jf_dot, s.j, s.f_dot, s.jf_disappear, s.jf_reappear, s.f, s.jf};
}

std::string format_scores_row(const Scores& s) {
  std::string out;
  const auto values = in_column_order(s);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += " | ";
    out += percent(values[i]);
  }
  return out;
}

std::string format_scores_table(const Scores& s) {
  std::string out;
  const auto values = in_column_order(s);
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += kReportColumns[i];
    out += ' ';
    out += percent(values[i]);
    out += '\n';
  }
  return out;
}

}  // namespace tep
