#include "tep/json_io.hpp"

#include <set>
#include <type_traits>

#include "tep/errors.hpp"

namespace tep {
namespace {

// Typed field access raising `kind` with the offending key in the message.
template <typename T>
T get(const Json& j, const char* key, ErrorKind kind) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(kind, std::string("missing field '") + key + "'");
  }
  const Json& v = j.at(key);
  // nlohmann converts between numeric types and would truncate 3.5 to 3.
  bool ok = true;
  if constexpr (std::is_same_v<T, bool>) {
    ok = v.is_boolean();
  } else if constexpr (std::is_integral_v<T>) {
    ok = v.is_number_integer() && (std::is_signed_v<T> || v.is_number_unsigned() || v.get<std::int64_t>() >= 0);
  } else if constexpr (std::is_floating_point_v<T>) {
    ok = v.is_number();
  }
  if (!ok) throw Error(kind, std::string("field '") + key + "' has the wrong type");
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(kind, std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback, ErrorKind kind) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return get<T>(j, key, kind);
}

const Json& array_field(const Json& j, const char* key, ErrorKind kind) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_array()) {
    throw Error(kind, std::string("field '") + key + "' must be an array");
  }
  return j.at(key);
}

Shape shape_from(const std::string& s) {
  if (s == "rect") return Shape::Rect;
  if (s == "disc") return Shape::Disc;
  throw Error(ErrorKind::SpecError, "unknown shape '" + s + "'");
}

Identity identity_from(const std::string& s) {
  if (s == "target") return Identity::Target;
  if (s == "distractor") return Identity::Distractor;
  if (s == "occluder") return Identity::Occluder;
  throw Error(ErrorKind::SpecError, "unknown identity '" + s + "'");
}

std::string_view choice_name(JudgeChoice c) {
  return c == JudgeChoice::AuxiliaryCrop ? "auxiliary" : "baseline";
}

JudgeChoice choice_from(const std::string& s) {
  if (s == "baseline") return JudgeChoice::BaselineCrop;
  if (s == "auxiliary") return JudgeChoice::AuxiliaryCrop;
  throw Error(ErrorKind::SpecError, "judge choice must be 'baseline' or 'auxiliary'");
}

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const BBox& b) { return Json::array({b.x0(), b.y0(), b.x1(), b.y1()}); }

std::optional<BBox> bbox_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorKind::InvalidArgument, "bbox must be [x0,y0,x1,y1] or null");
  }
  int v[4];
  for (int i = 0; i < 4; ++i) {
    if (!j[i].is_number_integer()) throw Error(ErrorKind::InvalidArgument, "bbox coordinates must be integers");
    v[i] = j[i].get<int>();
  }
  return BBox(v[0], v[1], v[2], v[3]);
}

// ---------------------------------------------------------------------------

Json to_json(const ScenarioSpec& spec) {
  Json actors = Json::array();
  for (const ActorSpec& a : spec.actors) {
    Json traj = Json::array();
    for (const Waypoint& w : a.trajectory) traj.push_back({{"frame", w.frame}, {"x", w.x}, {"y", w.y}});
    Json ranges = nullptr;
    if (a.visible_ranges) {
      ranges = Json::array();
      for (const FrameRange& r : *a.visible_ranges) ranges.push_back(Json::array({r.first, r.last}));
    }
    actors.push_back({{"shape", to_string(a.shape)},
                      {"size", a.size},
                      {"identity", to_string(a.identity)},
                      {"trajectory", std::move(traj)},
                      {"visible_ranges", std::move(ranges)},
                      {"description", a.description}});
  }

  Json mock;
  if (const auto& d = spec.mock.drift) {
    mock["drift"] = {{"drift_start", d->drift_start},
                     {"dx", d->dx},
                     {"dy", d->dy},
                     {"shrink_per_frame", d->shrink_per_frame},
                     {"occlusion_blindness", d->occlusion_blindness},
                     {"seed", d->seed}};
  } else {
    mock["drift"] = nullptr;
  }
  if (const auto& n = spec.mock.tracker_noise) {
    mock["tracker_noise"] = {{"jitter", n->jitter}, {"confidence_decay", n->confidence_decay}, {"seed", n->seed}};
  } else {
    mock["tracker_noise"] = nullptr;
  }
  mock["detector_confusion"] = Json::array();
  for (const ConfusionWindow& w : spec.mock.detector_confusion) {
    mock["detector_confusion"].push_back({{"first", w.first}, {"last", w.last}, {"actor_id", w.actor_id}});
  }
  mock["judge_script"] = Json::array();
  for (const auto& [frame, choice] : spec.mock.judge_script) {
    mock["judge_script"].push_back({{"frame", frame}, {"choice", choice_name(choice)}});
  }

  return {{"video_id", spec.video_id}, {"width", spec.width},         {"height", spec.height},
          {"num_frames", spec.num_frames}, {"seed", spec.seed},       {"noise", spec.noise},
          {"actors", std::move(actors)},   {"mock", std::move(mock)}};
}

ScenarioSpec scenario_from_json(const Json& j) {
  constexpr auto K = ErrorKind::SpecError;
  ScenarioSpec s;
  s.video_id = get<std::string>(j, "video_id", K);
  s.width = get<int>(j, "width", K);
  s.height = get<int>(j, "height", K);
  s.num_frames = get<int>(j, "num_frames", K);
  s.seed = get<std::uint64_t>(j, "seed", K);
  s.noise = get_or<double>(j, "noise", 0.0, K);
  for (const Json& a : array_field(j, "actors", K)) {
    ActorSpec actor;
    actor.shape = shape_from(get<std::string>(a, "shape", K));
    actor.size = get<int>(a, "size", K);
    actor.identity = identity_from(get<std::string>(a, "identity", K));
    for (const Json& w : array_field(a, "trajectory", K)) {
      actor.trajectory.push_back({get<int>(w, "frame", K), get<int>(w, "x", K), get<int>(w, "y", K)});
    }
    if (a.contains("visible_ranges") && !a["visible_ranges"].is_null()) {
      std::vector<FrameRange> ranges;
      for (const Json& r : array_field(a, "visible_ranges", K)) {
        if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() || !r[1].is_number_integer()) {
          throw Error(K, "visible range must be [first, last]");
        }
        ranges.push_back({r[0].get<int>(), r[1].get<int>()});
      }
      actor.visible_ranges = std::move(ranges);
    }
    actor.description = get_or<std::string>(a, "description", "", K);
    s.actors.push_back(std::move(actor));
  }
  if (j.contains("mock") && !j["mock"].is_null()) {
    const Json& m = j["mock"];
    if (m.contains("drift") && !m["drift"].is_null()) {
      const Json& d = m["drift"];
      s.mock.drift = DriftModel{get<int>(d, "drift_start", K),
                                get_or<int>(d, "dx", 0, K),
                                get_or<int>(d, "dy", 0, K),
                                get_or<double>(d, "shrink_per_frame", 0.0, K),
                                get_or<bool>(d, "occlusion_blindness", false, K),
                                get_or<std::uint64_t>(d, "seed", 0, K)};
    }
    if (m.contains("tracker_noise") && !m["tracker_noise"].is_null()) {
      const Json& n = m["tracker_noise"];
      s.mock.tracker_noise = TrackerNoise{get_or<int>(n, "jitter", 2, K),
                                          get_or<double>(n, "confidence_decay", 0.05, K),
                                          get_or<std::uint64_t>(n, "seed", 0, K)};
    }
    if (m.contains("detector_confusion")) {
      for (const Json& w : array_field(m, "detector_confusion", K)) {
        s.mock.detector_confusion.push_back(
            {get<int>(w, "first", K), get<int>(w, "last", K), get<int>(w, "actor_id", K)});
      }
    }
    if (m.contains("judge_script")) {
      for (const Json& e : array_field(m, "judge_script", K)) {
        s.mock.judge_script[get<int>(e, "frame", K)] = choice_from(get<std::string>(e, "choice", K));
      }
    }
  }
  return s;
}

// ---------------------------------------------------------------------------

Json to_json(const Manifest& manifest) {
  Json videos = Json::array();
  for (const VideoEntry& v : manifest.videos) {
    Json objects = Json::array();
    for (const ObjectEntry& o : v.objects) {
      objects.push_back({{"object_id", o.object_id},
                         {"first_frame_index", o.first_frame_index},
                         {"first_mask", o.first_mask.to_string()}});
    }
    Json entry = {{"video_id", v.video_id}, {"frame_count", v.frame_count}, {"width", v.width},
                  {"height", v.height},     {"objects", std::move(objects)}};
    if (v.gt_path) entry["gt_path"] = *v.gt_path;
    videos.push_back(std::move(entry));
  }
  return {{"dataset_root", manifest.dataset_root}, {"videos", std::move(videos)}};
}

Manifest manifest_from_json(const Json& j) {
  constexpr auto K = ErrorKind::ManifestError;
  Manifest m;
  m.dataset_root = get_or<std::string>(j, "dataset_root", ".", K);
  for (const Json& v : array_field(j, "videos", K)) {
    VideoEntry e;
    e.video_id = get<std::string>(v, "video_id", K);
    e.frame_count = get<int>(v, "frame_count", K);
    e.width = get<int>(v, "width", K);
    e.height = get<int>(v, "height", K);
    for (const Json& o : array_field(v, "objects", K)) {
      const std::string object_id = get<std::string>(o, "object_id", K);
      const int first_frame_index = get<int>(o, "first_frame_index", K);
      std::optional<Mask> first_mask;
      try {
        first_mask = Mask::parse(get<std::string>(o, "first_mask", K));
      } catch (const Error& err) {
        if (err.kind() == K) throw;
        throw Error(K, "video '" + e.video_id + "' object '" + object_id + "': " + err.what());
      }
      ObjectEntry obj{object_id, first_frame_index, std::move(*first_mask)};
      e.objects.push_back(std::move(obj));
    }
    if (v.contains("gt_path") && !v["gt_path"].is_null()) e.gt_path = get<std::string>(v, "gt_path", K);
    m.videos.push_back(std::move(e));
  }
  return m;
}

// ---------------------------------------------------------------------------

Json to_json(const Scores& s) {
  return {{"jf_dot", s.jf_dot},
          {"j", s.j},
          {"f_dot", s.f_dot},
          {"jf_disappear", opt(s.jf_disappear)},
          {"jf_reappear", opt(s.jf_reappear)},
          {"f", s.f},
          {"jf", s.jf}};
}

Scores scores_from_json(const Json& j) {
  constexpr auto K = ErrorKind::IoError;
  Scores s;
  s.jf_dot = get<double>(j, "jf_dot", K);
  s.j = get<double>(j, "j", K);
  s.f_dot = get<double>(j, "f_dot", K);
  if (j.contains("jf_disappear") && !j["jf_disappear"].is_null()) s.jf_disappear = get<double>(j, "jf_disappear", K);
  if (j.contains("jf_reappear") && !j["jf_reappear"].is_null()) s.jf_reappear = get<double>(j, "jf_reappear", K);
  s.f = get<double>(j, "f", K);
  s.jf = get<double>(j, "jf", K);
  return s;
}

Json to_json(const EvalReport& r) {
  Json per = Json::array();
  for (const ObjectScores& o : r.per_object) per.push_back({{"object_id", o.object_id}, {"scores", to_json(o.scores)}});
  return {{"overall", to_json(r.overall)}, {"per_object", std::move(per)}};
}

EvalReport report_from_json(const Json& j) {
  constexpr auto K = ErrorKind::IoError;
  EvalReport r;
  if (!j.contains("overall")) throw Error(K, "report lacks 'overall'");
  r.overall = scores_from_json(j["overall"]);
  for (const Json& o : array_field(j, "per_object", K)) {
    if (!o.contains("scores")) throw Error(K, "per-object entry lacks 'scores'");
    r.per_object.push_back({get<std::string>(o, "object_id", K), scores_from_json(o["scores"])});
  }
  return r;
}

// ---------------------------------------------------------------------------

Json to_json(const FusionConfig& cfg) {
  return {{"iou_threshold", cfg.iou_threshold},
          {"confidence_threshold", cfg.confidence_threshold},
          {"tiny_area_ratio", cfg.tiny_area_ratio},
          {"judge_crop_pad", cfg.judge_crop_pad},
          {"evaluate_every", cfg.evaluate_every},
          {"f_dot_tolerance", cfg.f_dot_tolerance}};
}

FusionConfig fusion_config_from_json(const Json& j) {
  constexpr auto K = ErrorKind::ConfigError;
  if (!j.is_object()) throw Error(K, "fusion section must be an object");
  const Json defaults = to_json(FusionConfig{});
  std::set<std::string> known;
  for (const auto& [key, value] : defaults.items()) {
    known.insert(key);
    if (!j.contains(key)) {
      throw Error(K, "missing config key 'fusion." + key + "' (default " + value.dump() + ")");
    }
  }
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(K, "unknown config key 'fusion." + key + "'");
  }
  FusionConfig cfg;
  cfg.iou_threshold = get<double>(j, "iou_threshold", K);
  cfg.confidence_threshold = get<double>(j, "confidence_threshold", K);
  cfg.tiny_area_ratio = get<double>(j, "tiny_area_ratio", K);
  cfg.judge_crop_pad = get<int>(j, "judge_crop_pad", K);
  cfg.evaluate_every = get<int>(j, "evaluate_every", K);
  cfg.f_dot_tolerance = get<int>(j, "f_dot_tolerance", K);
  cfg.validate();
  return cfg;
}

std::string dump_document(const Json& j) {
  return j.dump(2, ' ', false, Json::error_handler_t::strict) + "\n";
}

}  // namespace tep
