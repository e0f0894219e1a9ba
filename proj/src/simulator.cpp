#include "tep/simulator.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <cstdlib>

#include "tep/errors.hpp"
#include "tep/rng.hpp"

namespace tep {
namespace {

constexpr std::array<std::string_view, 4> kSuites = {"drift-tiny", "distractor-semantic",
                                                     "reappear", "crowded"};

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// round-half-up of num/den, den > 0
int round_half_up(std::int64_t num, std::int64_t den) {
  return static_cast<int>(floor_div(2 * num + den, 2 * den));
}

int interpolate(int a, int b, int t, int ta, int tb) {
  return a + round_half_up(static_cast<std::int64_t>(b - a) * (t - ta), tb - ta);
}

void spec_error(const std::string& msg) { throw Error(ErrorKind::SpecError, msg); }

}  // namespace

std::string_view to_string(Shape s) { return s == Shape::Rect ? "rect" : "disc"; }

std::string_view to_string(Identity i) {
  switch (i) {
    case Identity::Target: return "target";
    case Identity::Distractor: return "distractor";
    case Identity::Occluder: return "occluder";
  }
  return "?";
}

Mask LabelGrid::mask_of(Label label) const {
  std::vector<std::uint8_t> grid(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) grid[i] = labels[i] == label ? 1 : 0;
  return Mask::from_grid(dims, grid);
}

std::int64_t LabelGrid::count_in(Label label, const BBox& box) const {
  std::int64_t n = 0;
  for (int y = std::max(0, box.y0()); y < std::min(dims.height, box.y1()); ++y) {
    for (int x = std::max(0, box.x0()); x < std::min(dims.width, box.x1()); ++x) {
      if (at(x, y) == label) ++n;
    }
  }
  return n;
}

std::string LabelGrid::to_string() const {
  std::string out = std::to_string(dims.width) + " " + std::to_string(dims.height);
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    out += ' ' + std::to_string(labels[i]) + ' ' + std::to_string(j - i);
    i = j;
  }
  return out;
}

LabelGrid LabelGrid::parse(std::string_view text) {
  std::vector<std::int64_t> values;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\n' || *p == '\r' || *p == '\t')) ++p;
    if (p >= end) break;
    std::int64_t v = 0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || v < 0) throw Error(ErrorKind::InvalidArgument, "malformed label grid");
    values.push_back(v);
    p = next;
  }
  if (values.size() < 2 || values.size() % 2 != 0) {
    throw Error(ErrorKind::InvalidArgument, "malformed label grid header");
  }
  LabelGrid grid;
  grid.dims = {static_cast<int>(values[0]), static_cast<int>(values[1])};
  if (grid.dims.width < 1 || grid.dims.height < 1) {
    throw Error(ErrorKind::InvalidArgument, "label grid dimensions must be >= 1");
  }
  grid.labels.reserve(static_cast<std::size_t>(grid.dims.area()));
  for (std::size_t k = 2; k < values.size(); k += 2) {
    if (values[k] > kClutterLabel) throw Error(ErrorKind::InvalidArgument, "label out of range");
    if (static_cast<std::int64_t>(grid.labels.size()) + values[k + 1] > grid.dims.area()) {
      throw Error(ErrorKind::InvalidArgument, "label grid runs exceed frame area");
    }
    grid.labels.insert(grid.labels.end(), static_cast<std::size_t>(values[k + 1]),
                       static_cast<Label>(values[k]));
  }
  if (static_cast<std::int64_t>(grid.labels.size()) != grid.dims.area()) {
    throw Error(ErrorKind::InvalidArgument, "label grid runs do not cover the frame");
  }
  return grid;
}

void validate(const ScenarioSpec& spec) {
  if (spec.width < 1 || spec.height < 1) spec_error("frame dimensions must be >= 1");
  if (spec.num_frames < 1) spec_error("num_frames must be >= 1");
  if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) spec_error("noise must lie in [0,1]");
  if (spec.actors.size() >= kClutterLabel) spec_error("too many actors");
  bool has_target = false;
  for (std::size_t i = 0; i < spec.actors.size(); ++i) {
    const ActorSpec& a = spec.actors[i];
    const std::string who = "actor " + std::to_string(actor_label(i));
    has_target = has_target || a.identity == Identity::Target;
    if (a.size < 1 || a.size > std::min(spec.width, spec.height)) {
      spec_error(who + ": size " + std::to_string(a.size) + " does not fit the frame");
    }
    if (a.trajectory.empty()) spec_error(who + ": empty trajectory");
    for (std::size_t k = 0; k < a.trajectory.size(); ++k) {
      const Waypoint& w = a.trajectory[k];
      if (w.x < 0 || w.y < 0 || w.x >= spec.width || w.y >= spec.height) {
        spec_error(who + ": out-of-frame waypoint (" + std::to_string(w.x) + "," +
                   std::to_string(w.y) + ")");
      }
      if (k > 0 && w.frame <= a.trajectory[k - 1].frame) {
        spec_error(who + ": waypoint frames must be strictly increasing");
      }
    }
    if (a.visible_ranges) {
      for (std::size_t k = 0; k < a.visible_ranges->size(); ++k) {
        const FrameRange& r = (*a.visible_ranges)[k];
        if (r.first > r.last) spec_error(who + ": inverted visible range");
        if (k > 0 && r.first <= (*a.visible_ranges)[k - 1].last) {
          spec_error(who + ": overlapping or unordered visible_ranges");
        }
      }
    }
  }
  if (!has_target) spec_error("scenario has no target actor");
  for (const ConfusionWindow& w : spec.mock.detector_confusion) {
    if (w.actor_id < 1 || w.actor_id > static_cast<int>(spec.actors.size())) {
      spec_error("confusion window names unknown actor " + std::to_string(w.actor_id));
    }
  }
}

Pixel actor_position(const ActorSpec& actor, int frame, FrameDims dims) {
  const auto& path = actor.trajectory;
  int x = path.front().x, y = path.front().y;
  if (frame >= path.back().frame) {
    x = path.back().x;
    y = path.back().y;
  } else if (frame > path.front().frame) {
    for (std::size_t k = 1; k < path.size(); ++k) {
      if (frame <= path[k].frame) {
        const Waypoint& a = path[k - 1];
        const Waypoint& b = path[k];
        x = interpolate(a.x, b.x, frame, a.frame, b.frame);
        y = interpolate(a.y, b.y, frame, a.frame, b.frame);
        break;
      }
    }
  }
  return {std::clamp(x, 0, dims.width - actor.size), std::clamp(y, 0, dims.height - actor.size)};
}

bool actor_visible(const ActorSpec& actor, int frame) {
  if (!actor.visible_ranges) return true;
  return std::any_of(actor.visible_ranges->begin(), actor.visible_ranges->end(),
                     [&](const FrameRange& r) { return frame >= r.first && frame <= r.last; });
}

bool shape_contains(const ActorSpec& actor, Pixel corner, Pixel p) {
  const int lx = p.x - corner.x, ly = p.y - corner.y;
  if (lx < 0 || ly < 0 || lx >= actor.size || ly >= actor.size) return false;
  if (actor.shape == Shape::Rect) return true;
  // Disc inscribed in the footprint, tested on doubled pixel-centre coordinates.
  const std::int64_t u = 2 * lx + 1 - actor.size;
  const std::int64_t v = 2 * ly + 1 - actor.size;
  return u * u + v * v <= static_cast<std::int64_t>(actor.size) * actor.size;
}

SyntheticVideo generate(const ScenarioSpec& spec) {
  validate(spec);
  const FrameDims dims = spec.dims();
  SyntheticVideo video;
  video.spec = spec;
  video.frames.reserve(static_cast<std::size_t>(spec.num_frames));

  std::vector<std::size_t> draw_order;
  for (Identity pass : {Identity::Target, Identity::Distractor, Identity::Occluder}) {
    for (std::size_t i = 0; i < spec.actors.size(); ++i) {
      if (spec.actors[i].identity == pass) draw_order.push_back(i);
    }
  }

  for (int t = 0; t < spec.num_frames; ++t) {
    LabelGrid grid{dims, std::vector<Label>(static_cast<std::size_t>(dims.area()), kBackgroundLabel)};
    if (spec.noise > 0.0) {
      Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(t)));
      for (Label& l : grid.labels) {
        if (rng.bernoulli(spec.noise)) l = kClutterLabel;
      }
    }
    for (std::size_t i : draw_order) {
      const ActorSpec& a = spec.actors[i];
      if (!actor_visible(a, t)) continue;
      const Pixel corner = actor_position(a, t, dims);
      for (int y = corner.y; y < corner.y + a.size; ++y) {
        for (int x = corner.x; x < corner.x + a.size; ++x) {
          if (shape_contains(a, corner, {x, y})) {
            grid.labels[static_cast<std::size_t>(y) * dims.width + x] = actor_label(i);
          }
        }
      }
    }
    video.frames.push_back(std::move(grid));
  }

  video.entry.video_id = spec.video_id;
  video.entry.frame_count = spec.num_frames;
  video.entry.width = spec.width;
  video.entry.height = spec.height;
  video.entry.gt_path = spec.video_id + "/gt";
  for (std::size_t i = 0; i < spec.actors.size(); ++i) {
    if (spec.actors[i].identity != Identity::Target) continue;
    const std::string id = std::to_string(actor_label(i));
    MaskSequence seq;
    seq.reserve(video.frames.size());
    for (const LabelGrid& g : video.frames) seq.push_back(g.mask_of(actor_label(i)));
    auto first = std::find_if(seq.begin(), seq.end(), [](const Mask& m) { return !m.is_empty(); });
    if (first == seq.end()) spec_error("target " + id + " is never visible");
    video.entry.objects.push_back(
        {id, static_cast<int>(first - seq.begin()), *first});
    video.gt.emplace(id, std::move(seq));
  }
  return video;
}

std::span<const std::string_view> suite_names() { return kSuites; }

namespace {

constexpr int kWidth = 160;
constexpr int kHeight = 120;
constexpr int kFrames = 40;

constexpr std::array<std::string_view, 6> kColours = {"red", "blue", "green",
                                                      "yellow", "white", "orange"};
constexpr std::array<std::string_view, 4> kGarments = {"jersey", "cap", "backpack", "scarf"};

std::string make_description(Rng& rng) {
  return std::string(kColours[static_cast<std::size_t>(rng.uniform_int(0, 5))]) + " " +
         std::string(kGarments[static_cast<std::size_t>(rng.uniform_int(0, 3))]) + " number " +
         std::to_string(rng.uniform_int(1, 99));
}

Pixel clamp_corner(Pixel p, int size) {
  return {std::clamp(p.x, 0, kWidth - size), std::clamp(p.y, 0, kHeight - size)};
}

// Linear path from `start` to a random point within +-reach, over the clip.
std::vector<Waypoint> linear_path(Rng& rng, Pixel start, int size, int reach) {
  const Pixel end = clamp_corner(
      {start.x + rng.uniform_int(-reach, reach), start.y + rng.uniform_int(-reach, reach)}, size);
  return {{0, start.x, start.y}, {kFrames - 1, end.x, end.y}};
}

// Random corner at Chebyshev distance >= min_sep from every point in `avoid`.
Pixel place(Rng& rng, int size, int x_lo, int x_hi, int y_lo, int y_hi,
            const std::vector<Pixel>& avoid, int min_sep) {
  Pixel p{};
  for (int attempt = 0; attempt < 200; ++attempt) {
    p = {rng.uniform_int(x_lo, std::min(x_hi, kWidth - size)),
         rng.uniform_int(y_lo, std::min(y_hi, kHeight - size))};
    const bool clear = std::all_of(avoid.begin(), avoid.end(), [&](Pixel q) {
      return std::max(std::abs(p.x - q.x), std::abs(p.y - q.y)) >= min_sep;
    });
    if (clear) break;
  }
  return p;
}

std::pair<int, int> random_direction(Rng& rng) {
  static constexpr std::array<std::pair<int, int>, 4> kDirs = {
      {{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  return kDirs[static_cast<std::size_t>(rng.uniform_int(0, 3))];
}

ScenarioSpec base_spec(std::string_view suite, int index, std::uint64_t seed) {
  ScenarioSpec s;
  char id[64];
  std::snprintf(id, sizeof(id), "%.*s_%02d", static_cast<int>(suite.size()), suite.data(), index);
  s.video_id = id;
  s.width = kWidth;
  s.height = kHeight;
  s.num_frames = kFrames;
  s.seed = seed;
  return s;
}

// Tiny target under a constant-velocity segmenter drift; tracker is exact.
ScenarioSpec drift_tiny(int index, std::uint64_t seed) {
  Rng rng(seed);
  ScenarioSpec s = base_spec("drift-tiny", index, seed);
  const int size = rng.uniform_int(2, 3);
  const Pixel start{rng.uniform_int(40, 120), rng.uniform_int(40, 85)};
  ActorSpec target{Shape::Rect, size, linear_path(rng, start, size, 15), Identity::Target, {}, {}};
  s.actors.push_back(target);
  // Static look-alikes kept in a top band, away from the target's path.
  for (int k = 0; k < 2; ++k) {
    const Pixel p{rng.uniform_int(5, 145), rng.uniform_int(2, 14)};
    s.actors.push_back({Shape::Rect, 8, {{0, p.x, p.y}}, Identity::Distractor, {}, {}});
  }
  const auto [dx, dy] = random_direction(rng);
  s.mock.drift = DriftModel{rng.uniform_int(3, 8), dx, dy, 0.0, false, mix_seed(seed, 1)};
  return s;
}

// Standard-size described target among same-shape look-alikes; the segmenter
// drifts and the detector is confused for a window around the drift.
ScenarioSpec distractor_semantic(int index, std::uint64_t seed) {
  Rng rng(seed);
  ScenarioSpec s = base_spec("distractor-semantic", index, seed);
  const int size = rng.uniform_int(10, 14);
  const Shape shape = index % 2 == 0 ? Shape::Rect : Shape::Disc;
  const Pixel start = place(rng, size, 20, 130, 20, 90, {}, 0);
  s.actors.push_back({shape, size, linear_path(rng, start, size, 20), Identity::Target, {},
                      make_description(rng)});
  std::vector<Pixel> taken{start};
  const int n = rng.uniform_int(3, 5);
  for (int k = 0; k < n; ++k) {
    const Pixel p = place(rng, size, 0, kWidth, 0, kHeight, taken, 2 * size + 16);
    taken.push_back(p);
    s.actors.push_back({shape, size, linear_path(rng, p, size, 20), Identity::Distractor, {}, {}});
  }
  const auto [dx, dy] = random_direction(rng);
  const int drift_start = rng.uniform_int(4, 10);
  s.mock.drift = DriftModel{drift_start, dx, dy, 0.0, false, mix_seed(seed, 1)};
  const int first = drift_start + 2;
  s.mock.detector_confusion.push_back(
      {first, first + rng.uniform_int(4, 8), rng.uniform_int(2, n + 1)});
  return s;
}

// Target vanishes for >= 5 frames; the segmenter is occlusion-blind and
// latches onto a look-alike. Even indices are tiny, odd ones described.
ScenarioSpec reappear(int index, std::uint64_t seed) {
  Rng rng(seed);
  ScenarioSpec s = base_spec("reappear", index, seed);
  const bool tiny = index % 2 == 0;
  const int size = tiny ? rng.uniform_int(2, 3) : rng.uniform_int(10, 14);
  const Shape shape = (!tiny && index % 4 == 3) ? Shape::Disc : Shape::Rect;
  const Pixel start = place(rng, size, 20, 130, 20, 90, {}, 0);
  const int last_visible = rng.uniform_int(8, 14);
  const int gap = rng.uniform_int(5, 10);
  ActorSpec target{shape, size, linear_path(rng, start, size, 20), Identity::Target,
                   std::vector<FrameRange>{{0, last_visible}, {last_visible + gap + 1, kFrames - 1}},
                   tiny ? std::string{} : make_description(rng)};
  s.actors.push_back(target);
  std::vector<Pixel> taken{start};
  for (int k = 0; k < 3; ++k) {
    const Pixel p = place(rng, size, 0, kWidth, 0, kHeight, taken, 2 * size + 16);
    taken.push_back(p);
    s.actors.push_back({shape, size, linear_path(rng, p, size, 10), Identity::Distractor, {}, {}});
  }
  s.mock.drift = DriftModel{kFrames, 0, 0, 0.0, true, mix_seed(seed, 1)};
  return s;
}

// Everything at once: mixed target classes, look-alikes, crossing occluders,
// clutter, a blind drifting segmenter and a noisy tracker.
ScenarioSpec crowded(int index, std::uint64_t seed) {
  Rng rng(seed);
  ScenarioSpec s = base_spec("crowded", index, seed);
  s.noise = 0.02;
  const int targets = rng.uniform_int(1, 2);
  std::vector<Pixel> taken;
  for (int k = 0; k < targets; ++k) {
    const int kind = rng.uniform_int(0, 2);  // 0 tiny, 1 described, 2 plain
    const int size = kind == 0 ? rng.uniform_int(2, 3) : rng.uniform_int(10, 14);
    const Pixel p = place(rng, size, 10, 140, 25, 100, taken, 30);
    taken.push_back(p);
    s.actors.push_back({Shape::Rect, size, linear_path(rng, p, size, 20), Identity::Target, {},
                        kind == 1 ? make_description(rng) : std::string{}});
  }
  for (int k = 0; k < 6; ++k) {
    const int size = rng.uniform_int(4, 14);
    const Pixel p = place(rng, size, 0, kWidth, 0, kHeight, taken, size + 14);
    s.actors.push_back({k % 2 == 0 ? Shape::Rect : Shape::Disc, size,
                        linear_path(rng, p, size, 25), Identity::Distractor, {}, {}});
  }
  for (int k = 0; k < 2; ++k) {
    const int size = rng.uniform_int(16, 24);
    const int y = rng.uniform_int(20, kHeight - size - 10);
    const int from = rng.uniform_int(0, 1) == 0 ? 0 : kWidth - size;
    const int enter = rng.uniform_int(5, 20);
    ActorSpec occ{Shape::Rect, size, {{enter, from, y}, {kFrames - 1, kWidth - size - from, y}},
                  Identity::Occluder, std::vector<FrameRange>{{enter, kFrames - 1}}, {}};
    s.actors.push_back(occ);
  }
  const auto [dx, dy] = random_direction(rng);
  s.mock.drift = DriftModel{rng.uniform_int(8, 15), dx, dy, 0.0, true, mix_seed(seed, 1)};
  s.mock.tracker_noise = TrackerNoise{2, 0.05, mix_seed(seed, 2)};
  return s;
}

}  // namespace

std::vector<ScenarioSpec> scenario_suite(std::string_view name, std::uint64_t seed) {
  using Builder = ScenarioSpec (*)(int, std::uint64_t);
  Builder build = nullptr;
  if (name == "drift-tiny") build = drift_tiny;
  else if (name == "distractor-semantic") build = distractor_semantic;
  else if (name == "reappear") build = reappear;
  else if (name == "crowded") build = crowded;
  if (!build) {
    std::string valid;
    for (auto n : kSuites) valid += (valid.empty() ? "" : ", ") + std::string(n);
    throw Error(ErrorKind::UnknownSuite,
                "unknown suite '" + std::string(name) + "' (valid suites: " + valid + ")");
  }
  std::vector<ScenarioSpec> specs;
  for (int i = 0; i < 10; ++i) {
    specs.push_back(build(i, mix_seed(seed, static_cast<std::uint64_t>(i))));
    validate(specs.back());
  }
  return specs;
}

}  // namespace tep
