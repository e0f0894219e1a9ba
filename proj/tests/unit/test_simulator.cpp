#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "tep/classification.hpp"
#include "tep/errors.hpp"
#include "tep/json_io.hpp"
#include "tep/mock_backends.hpp"
#include "tep/simulator.hpp"

using namespace tep;

namespace {

ActorSpec actor(Shape shape, int size, std::vector<Waypoint> path, Identity id = Identity::Target) {
  ActorSpec a;
  a.shape = shape;
  a.size = size;
  a.trajectory = std::move(path);
  a.identity = id;
  return a;
}

ScenarioSpec base_spec(int w, int h, int frames) {
  ScenarioSpec s;
  s.video_id = "v";
  s.width = w;
  s.height = h;
  s.num_frames = frames;
  s.seed = 1;
  return s;
}

ErrorKind spec_kind(const ScenarioSpec& s) {
  try {
    generate(s);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

// Independent per-pixel rasteriser: interpolated corner, shape membership and
// draw order (targets, then distractors, then occluders) recomputed from the
// scenario for every pixel.
std::vector<Label> rasterise(const ScenarioSpec& s, int t) {
  std::vector<Label> out(static_cast<std::size_t>(s.width * s.height), kBackgroundLabel);
  for (Identity pass : {Identity::Target, Identity::Distractor, Identity::Occluder}) {
    for (std::size_t i = 0; i < s.actors.size(); ++i) {
      const ActorSpec& a = s.actors[i];
      if (a.identity != pass) continue;
      if (a.visible_ranges) {
        bool vis = false;
        for (const auto& r : *a.visible_ranges) vis = vis || (t >= r.first && t <= r.last);
        if (!vis) continue;
      }
      double px = a.trajectory.back().x, py = a.trajectory.back().y;
      if (t <= a.trajectory.front().frame) {
        px = a.trajectory.front().x;
        py = a.trajectory.front().y;
      } else {
        for (std::size_t k = 1; k < a.trajectory.size(); ++k) {
          const auto& p0 = a.trajectory[k - 1];
          const auto& p1 = a.trajectory[k];
          if (t <= p1.frame) {
            const double u = static_cast<double>(t - p0.frame) / (p1.frame - p0.frame);
            px = std::floor(p0.x + (p1.x - p0.x) * u + 0.5);
            py = std::floor(p0.y + (p1.y - p0.y) * u + 0.5);
            break;
          }
        }
      }
      const int cx = std::clamp(static_cast<int>(px), 0, s.width - a.size);
      const int cy = std::clamp(static_cast<int>(py), 0, s.height - a.size);
      for (int y = 0; y < s.height; ++y) {
        for (int x = 0; x < s.width; ++x) {
          bool inside = x >= cx && x < cx + a.size && y >= cy && y < cy + a.size;
          if (inside && a.shape == Shape::Disc) {
            const double r = a.size / 2.0;
            const double dx = x + 0.5 - (cx + r), dy = y + 0.5 - (cy + r);
            inside = dx * dx + dy * dy <= r * r;
          }
          if (inside) out[static_cast<std::size_t>(y * s.width + x)] = static_cast<Label>(i + 1);
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST(Generate, StaticTargetGivesIdenticalMasks) {
  ScenarioSpec s = base_spec(10, 10, 5);
  s.actors.push_back(actor(Shape::Rect, 4, {{0, 3, 2}}));
  const SyntheticVideo v = generate(s);
  ASSERT_EQ(v.gt.size(), 1u);
  const MaskSequence& seq = v.gt.at("1");
  ASSERT_EQ(seq.size(), 5u);
  for (const Mask& m : seq) {
    EXPECT_EQ(mask_area(m), 16);
    EXPECT_EQ(m, seq.front());
  }
  EXPECT_EQ(v.entry.objects.at(0).first_frame_index, 0);
  EXPECT_EQ(*mask_to_bbox(seq[0]), BBox(3, 2, 7, 6));
}

TEST(Generate, VisibleRangesDriveGtAndPhases) {
  ScenarioSpec s = base_spec(12, 12, 10);
  ActorSpec a = actor(Shape::Rect, 3, {{0, 1, 1}});
  a.visible_ranges = std::vector<FrameRange>{{0, 3}, {7, 9}};
  s.actors.push_back(a);
  const SyntheticVideo v = generate(s);
  const auto& seq = v.gt.at("1");
  for (int t = 0; t < 10; ++t) EXPECT_EQ(seq[t].is_empty(), t >= 4 && t <= 6) << t;
  const auto phases = classify_phases(seq);
  for (int t = 4; t <= 6; ++t) EXPECT_EQ(phases[t].phase, Phase::Disappeared);
  for (int t = 7; t <= 9; ++t) EXPECT_EQ(phases[t].phase, Phase::Reappeared);
}

TEST(Generate, OccluderHidesTargetCompletely) {
  ScenarioSpec s = base_spec(20, 10, 10);
  s.actors.push_back(actor(Shape::Rect, 3, {{0, 10, 3}}));
  s.actors.push_back(actor(Shape::Rect, 5, {{0, 0, 2}, {9, 18, 2}}, Identity::Occluder));
  const SyntheticVideo v = generate(s);
  for (int t = 0; t < 10; ++t) {
    const auto want = rasterise(s, t);
    EXPECT_EQ(v.frames[t].labels, want) << t;
    bool target_present = std::find(want.begin(), want.end(), Label{1}) != want.end();
    EXPECT_EQ(!v.gt.at("1")[t].is_empty(), target_present);
  }
  // The occluder's corner reaches x=10 at frame 5 and covers the whole target.
  EXPECT_TRUE(v.gt.at("1")[5].is_empty());
  EXPECT_FALSE(v.gt.at("1")[0].is_empty());
}

TEST(Generate, InterpolationRoundsHalfUp) {
  ActorSpec a = actor(Shape::Rect, 1, {{0, 0, 0}, {4, 2, 6}});
  const FrameDims d{20, 20};
  EXPECT_EQ(actor_position(a, 1, d), (Pixel{1, 2}));  // 0.5 -> 1, 1.5 -> 2
  EXPECT_EQ(actor_position(a, 2, d), (Pixel{1, 3}));
  EXPECT_EQ(actor_position(a, 3, d), (Pixel{2, 5}));  // 1.5 -> 2, 4.5 -> 5
  EXPECT_EQ(actor_position(a, 9, d), (Pixel{2, 6}));
}

TEST(Generate, EverySuiteMatchesRasterisationOracle) {
  for (std::string_view suite : suite_names()) {
    const auto specs = scenario_suite(suite, 3);
    for (std::size_t k = 0; k < 2; ++k) {
      ScenarioSpec s = specs[k];
      s.noise = 0.0;  // clutter is not part of the geometric oracle
      const SyntheticVideo v = generate(s);
      for (int t = 0; t < s.num_frames; t += 7) {
        EXPECT_EQ(v.frames[t].labels, rasterise(s, t)) << suite << " " << k << " " << t;
      }
      for (const auto& [id, seq] : v.gt) {
        const Label l = static_cast<Label>(std::stoi(id));
        for (int t = 0; t < s.num_frames; ++t) EXPECT_EQ(seq[t], v.frames[t].mask_of(l));
      }
    }
  }
}

TEST(Generate, IsPureFunctionOfSpec) {
  for (std::string_view suite : suite_names()) {
    const auto a = scenario_suite(suite, 8);
    const auto b = scenario_suite(suite, 8);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(to_json(a[i]).dump(), to_json(b[i]).dump());
      const SyntheticVideo va = generate(a[i]), vb = generate(b[i]);
      EXPECT_EQ(va.frames, vb.frames);
      EXPECT_EQ(va.gt, vb.gt);
    }
  }
  EXPECT_NE(to_json(scenario_suite("crowded", 1)[0]).dump(), to_json(scenario_suite("crowded", 2)[0]).dump());
}

TEST(Generate, ValidationErrors) {
  ScenarioSpec s = base_spec(10, 10, 5);
  s.actors.push_back(actor(Shape::Rect, 2, {{0, 12, 0}}));
  EXPECT_EQ(spec_kind(s), ErrorKind::SpecError);

  s.actors[0] = actor(Shape::Rect, 2, {{0, 1, 1}});
  s.actors[0].visible_ranges = std::vector<FrameRange>{{0, 3}, {2, 4}};
  EXPECT_EQ(spec_kind(s), ErrorKind::SpecError);

  s.actors[0].visible_ranges.reset();
  s.actors[0].identity = Identity::Distractor;
  EXPECT_EQ(spec_kind(s), ErrorKind::SpecError);  // no target

  s.actors[0].identity = Identity::Target;
  s.actors[0].visible_ranges = std::vector<FrameRange>{{7, 9}};
  EXPECT_EQ(spec_kind(s), ErrorKind::SpecError);  // never visible within 5 frames
}

TEST(Suites, UnknownSuiteNamesValidOnes) {
  try {
    scenario_suite("nope", 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownSuite);
    for (std::string_view s : suite_names()) EXPECT_NE(std::string(e.what()).find(s), std::string::npos);
  }
}

TEST(Suites, TenSpecsEach) {
  for (std::string_view suite : suite_names()) EXPECT_EQ(scenario_suite(suite, 0).size(), 10u);
}

TEST(Suites, DriftTinyTargetsAreTiny) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    for (const ScenarioSpec& s : scenario_suite("drift-tiny", seed)) {
      const SyntheticVideo v = generate(s);
      auto scenes = std::make_shared<InMemoryScenes>();
      scenes->add(v);
      MockJudge judge(*scenes, {});
      for (const ObjectEntry& o : v.entry.objects) {
        const double ratio = static_cast<double>(mask_area(o.first_mask)) / s.dims().area();
        EXPECT_GE(ratio, 0.0002);
        EXPECT_LE(ratio, 0.0008);
        EXPECT_EQ(classify_target(o.first_mask, {s.video_id, o.first_frame_index}, 0.001, judge).kind,
                  TargetKind::Tiny);
      }
    }
  }
}

TEST(Suites, DistractorSemanticHasLookAlikes) {
  for (const ScenarioSpec& s : scenario_suite("distractor-semantic", 4)) {
    const SyntheticVideo v = generate(s);
    auto scenes = std::make_shared<InMemoryScenes>();
    scenes->add(v);
    MockJudge judge(*scenes, s.mock.judge_script);
    for (std::size_t i = 0; i < s.actors.size(); ++i) {
      const ActorSpec& t = s.actors[i];
      if (t.identity != Identity::Target) continue;
      int alike = 0;
      for (const ActorSpec& d : s.actors) {
        alike += d.identity == Identity::Distractor && d.shape == t.shape && d.size == t.size;
      }
      EXPECT_GE(alike, 3);
    }
    for (const ObjectEntry& o : v.entry.objects) {
      EXPECT_EQ(classify_target(o.first_mask, {s.video_id, o.first_frame_index}, 0.001, judge).kind,
                TargetKind::SemanticDominated);
    }
  }
}

TEST(Suites, ReappearHasLongAbsence) {
  for (const ScenarioSpec& s : scenario_suite("reappear", 6)) {
    const SyntheticVideo v = generate(s);
    for (const auto& [id, seq] : v.gt) {
      const auto phases = classify_phases(seq);
      int run = 0, longest = 0;
      bool reappeared = false;
      for (const auto& f : phases) {
        run = f.phase == Phase::Disappeared ? run + 1 : 0;
        longest = std::max(longest, run);
        reappeared = reappeared || f.phase == Phase::Reappeared;
      }
      EXPECT_GE(longest, 5) << s.video_id;
      EXPECT_TRUE(reappeared) << s.video_id;
    }
  }
}

TEST(LabelGrid, TextRoundTrip) {
  const SyntheticVideo v = generate(scenario_suite("crowded", 2)[0]);
  for (const LabelGrid& g : v.frames) EXPECT_EQ(LabelGrid::parse(g.to_string()), g);
  EXPECT_THROW(LabelGrid::parse("2 2 0 3"), Error);
}

TEST(Scenario, JsonRoundTrip) {
  for (std::string_view suite : suite_names()) {
    for (const ScenarioSpec& s : scenario_suite(suite, 5)) {
      const Json j = to_json(s);
      EXPECT_EQ(to_json(scenario_from_json(Json::parse(j.dump()))).dump(), j.dump());
    }
  }
}
