#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

#include "datasets.hpp"
#include "oracles.hpp"
#include "tep/errors.hpp"
#include "tep/pipeline.hpp"
#include "tep/protocol.hpp"

using namespace tep;
using namespace tep::protocol;
using namespace std::chrono_literals;

namespace {

std::string fixture(const std::string& args) { return std::string(TEP_FIXTURE_SERVER) + " " + args; }

ErrorKind kind_of(const std::function<void()>& f, std::string* remote = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (remote) *remote = e.remote_kind();
    return e.kind();
  }
  ADD_FAILURE() << "no tep::Error thrown";
  return ErrorKind::InvalidArgument;
}

class WithDataset : public ::testing::Test {
 protected:
  void SetUp() override {
    datasets::write(dir.path(), {datasets::tiny_drift("tiny"), datasets::semantic_confusion("sem")});
    video = generate(datasets::tiny_drift("tiny"));
  }
  std::string server(const std::string& extra = "") const {
    return fixture("--dataset " + dir.path().string() + " " + extra);
  }
  std::unique_ptr<Connection> open(const std::string& extra = "", std::chrono::milliseconds t = 5s) const {
    return Connection::open(Endpoint::parse("exec:" + server(extra)), t);
  }
  SegmenterInit init() const {
    const auto& o = video.entry.objects.at(0);
    return {"tiny", o.object_id, o.first_frame_index, o.first_mask};
  }

  testing_support::TempDir dir;
  SyntheticVideo video;
};

}  // namespace

TEST(Wire, RequestRoundTrip) {
  const Request r{7, "track", Json{{"frame_index", 3}}};
  const std::string line = encode(r);
  EXPECT_EQ(line, R"({"id":7,"method":"track","params":{"frame_index":3}})");
  const Request back = decode_request(line);
  EXPECT_EQ(back.id, 7u);
  EXPECT_EQ(back.method, "track");
  EXPECT_EQ(back.params, r.params);
}

TEST(Wire, ResponseRoundTrip) {
  Response ok{3, true, Json{{"mask", "2 2 4"}}, "", ""};
  EXPECT_EQ(encode(ok), R"({"id":3,"status":"ok","payload":{"mask":"2 2 4"}})");
  const Response a = decode_response(encode(ok));
  EXPECT_TRUE(a.ok);
  EXPECT_EQ(a.payload, ok.payload);

  Response err{4, false, Json::object(), "StaleFrame", "late"};
  const Response b = decode_response(encode(err));
  EXPECT_FALSE(b.ok);
  EXPECT_EQ(b.error_kind, "StaleFrame");
  EXPECT_EQ(b.error_msg, "late");
}

TEST(Wire, MalformedLinesAreViolations) {
  for (const char* bad : {"", "nope", "[1,2]", R"({"id":"x","method":"a","params":{}})",
                          R"({"id":1,"params":{}})", R"({"id":1,"method":"a","params":3})"}) {
    EXPECT_EQ(kind_of([&] { decode_request(bad); }), ErrorKind::ProtocolViolation) << bad;
  }
  for (const char* bad : {"{}", R"({"id":1,"status":"maybe"})", R"({"id":1,"status":"error"})"}) {
    EXPECT_EQ(kind_of([&] { decode_response(bad); }), ErrorKind::ProtocolViolation) << bad;
  }
}

TEST(Wire, EveryBackendOperationHasOneMethod) {
  std::set<Method> used;
  for (BackendOp op : all_backend_ops()) used.insert(wire_method(op));
  EXPECT_EQ(used.size(), all_backend_ops().size());
  for (Method m : all_methods()) {
    EXPECT_EQ(method_from_string(to_string(m)), m);
    if (m != Method::Shutdown) {
      EXPECT_TRUE(used.contains(m)) << to_string(m);
    }
  }
  EXPECT_FALSE(method_from_string("hello").has_value());
}

TEST(Wire, TrackPayloadInvariant) {
  EXPECT_EQ(track_output_from_payload(Json{{"bbox", nullptr}, {"confidence", 0.0}}), TrackOutput::missing());
  const TrackOutput t{BBox(1, 2, 3, 4), 0.5};
  EXPECT_EQ(track_output_from_payload(to_payload(t)), t);
  EXPECT_EQ(kind_of([] { track_output_from_payload(Json{{"bbox", nullptr}, {"confidence", 0.3}}); }),
            ErrorKind::ProtocolViolation);
  EXPECT_EQ(kind_of([] { track_output_from_payload(Json{{"bbox", {0, 0, 2, 2}}, {"confidence", 1.5}}); }),
            ErrorKind::ProtocolViolation);
}

TEST(Endpoints, Parse) {
  const Endpoint e = Endpoint::parse("exec:python3 -m srv --x");
  EXPECT_EQ(e.kind, Endpoint::Kind::Exec);
  EXPECT_EQ(e.command, "python3 -m srv --x");
  const Endpoint t = Endpoint::parse("tcp:localhost:9000");
  EXPECT_EQ(t.kind, Endpoint::Kind::Tcp);
  EXPECT_EQ(t.host, "localhost");
  EXPECT_EQ(t.port, 9000);
  EXPECT_EQ(t.to_string(), "tcp:localhost:9000");
  for (const char* bad : {"", "exec:", "tcp:host", "tcp:host:0", "tcp:host:99999", "udp:x:1"}) {
    EXPECT_EQ(kind_of([&] { Endpoint::parse(bad); }), ErrorKind::ConfigError) << bad;
  }
}

TEST(Endpoints, TimeoutFromEnvironment) {
  ::setenv("TEP_BACKEND_TIMEOUT_MS", "1234", 1);
  EXPECT_EQ(default_timeout(), 1234ms);
  ::unsetenv("TEP_BACKEND_TIMEOUT_MS");
  EXPECT_EQ(default_timeout(), 30000ms);
}

TEST(Registry, HelloUnknownShutdownAndMalformed) {
  HandlerRegistry reg;
  reg.add(Method::Track, [](const Json& p) { return Json{{"echo", p.at("x")}}; });
  bool shutdown = false;

  Response r = decode_response(reg.handle_line(R"({"id":1,"method":"hello","params":{"protocol_version":1}})", shutdown));
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(r.payload["capabilities"], Json::array({"track"}));

  r = decode_response(reg.handle_line(R"({"id":2,"method":"hello","params":{"protocol_version":2}})", shutdown));
  EXPECT_EQ(r.error_kind, "VersionMismatch");

  r = decode_response(reg.handle_line(R"({"id":3,"method":"detect","params":{}})", shutdown));
  EXPECT_EQ(r.error_kind, "UnknownMethod");
  r = decode_response(reg.handle_line(R"({"id":4,"method":"dance","params":{}})", shutdown));
  EXPECT_EQ(r.error_kind, "UnknownMethod");
  EXPECT_EQ(r.id, 4u);

  r = decode_response(reg.handle_line(R"({"id":5,"method":"track","params":{}})", shutdown));
  EXPECT_EQ(r.error_kind, "InternalError");
  r = decode_response(reg.handle_line(R"({"id":6,"method":"track","params":{"x":9}})", shutdown));
  EXPECT_EQ(r.payload["echo"], 9);

  r = decode_response(reg.handle_line("garbage", shutdown));
  EXPECT_EQ(r.error_kind, "ProtocolViolation");
  EXPECT_FALSE(shutdown);

  r = decode_response(reg.handle_line(R"({"id":7,"method":"shutdown","params":{}})", shutdown));
  EXPECT_TRUE(r.ok);
  EXPECT_TRUE(shutdown);
}

TEST_F(WithDataset, HandshakeReportsCapabilities) {
  auto conn = open("--caps judge");
  EXPECT_EQ(conn->capabilities(), std::vector<std::string>{"judge"});
  std::string remote;
  EXPECT_EQ(kind_of([&] { conn->call(Method::Track, Json::object()); }, &remote), ErrorKind::RemoteError);
  EXPECT_EQ(remote, "UnknownMethod");
}

TEST_F(WithDataset, VersionMismatch) {
  EXPECT_EQ(kind_of([&] { open("--version 2"); }), ErrorKind::VersionMismatch);
}

TEST_F(WithDataset, TimeoutBreaksConnection) {
  auto conn = open("--hang track", 300ms);
  RemoteTracker tracker(std::move(conn), "1");
  tracker.init({"tiny", 0}, BBox(10, 10, 12, 12));
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(kind_of([&] { tracker.track(1); }), ErrorKind::BackendTimeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 3s);
  EXPECT_EQ(kind_of([&] { tracker.track(2); }), ErrorKind::BackendUnavailable);
}

TEST_F(WithDataset, GarbledReply) {
  auto conn = open("--garble describe");
  RemoteDetector det(std::move(conn), "1");
  EXPECT_EQ(kind_of([&] { det.describe({"tiny", 0}, init().first_mask); }), ErrorKind::ProtocolViolation);
}

TEST_F(WithDataset, MismatchedIdIsViolation) {
  auto conn = open("--wrong-id init_tracker");
  RemoteTracker tracker(std::move(conn), "1");
  EXPECT_EQ(kind_of([&] { tracker.init({"tiny", 0}, BBox(10, 10, 12, 12)); }), ErrorKind::ProtocolViolation);
}

TEST_F(WithDataset, RemoteErrorKindIsCarried) {
  auto conn = open("--fail propagate:OutOfOrderFrame");
  RemoteSegmenter seg(std::move(conn));
  const std::string s = seg.init(init());
  std::string remote;
  EXPECT_EQ(kind_of([&] { seg.propagate(s, 1); }, &remote), ErrorKind::RemoteError);
  EXPECT_EQ(remote, "OutOfOrderFrame");
}

TEST_F(WithDataset, MockPreconditionsCrossTheWire) {
  RemoteSegmenter seg(open());
  const std::string s = seg.init(init());
  seg.propagate(s, 3);
  std::string remote;
  EXPECT_EQ(kind_of([&] { seg.propagate(s, 2); }, &remote), ErrorKind::RemoteError);
  EXPECT_EQ(remote, "OutOfOrderFrame");
  EXPECT_EQ(kind_of([&] { seg.prompt_box(s, 1, BBox(0, 0, 2, 2)); }, &remote), ErrorKind::RemoteError);
  EXPECT_EQ(remote, "StaleFrame");
}

TEST_F(WithDataset, SpawnFailure) {
  EXPECT_EQ(kind_of([&] { Connection::open(Endpoint::parse("exec:/nonexistent/tep-server"), 2s); }),
            ErrorKind::SpawnFailed);
  EXPECT_EQ(kind_of([&] { open("--exit-after-hello --bogus-flag"); }), ErrorKind::SpawnFailed);
}

TEST_F(WithDataset, ConnectRefused) {
  // Bind and release a port so that nothing listens on it.
  auto probe = spawn_subprocess(server("--tcp 0"));
  const auto line = probe->recv_line(5s);
  ASSERT_TRUE(line.has_value());
  const int port = std::stoi(line->substr(5));
  probe.reset();
  EXPECT_EQ(kind_of([&] { Connection::open(Endpoint::parse("tcp:127.0.0.1:" + std::to_string(port)), 2s); }),
            ErrorKind::ConnectRefused);
}

TEST_F(WithDataset, TcpRoundTripMatchesInProcess) {
  auto srv = spawn_subprocess(server("--tcp 0"));
  const auto line = srv->recv_line(5s);
  ASSERT_TRUE(line.has_value());
  const std::string ep = "tcp:127.0.0.1:" + line->substr(5);

  RemoteSegmenter remote(Connection::open(Endpoint::parse(ep), 5s));
  InMemoryScenes scenes;
  scenes.add(video);
  MockSegmenter local(scenes, "tiny", std::nullopt);
  const std::string a = remote.init(init()), b = local.init(init());
  for (int t = 1; t < 16; ++t) EXPECT_EQ(remote.propagate(a, t), local.propagate(b, t)) << t;
}

TEST_F(WithDataset, StrictAlternation) {
  RemoteSegmenter seg(open("--strict-sequencing"));
  const std::string s = seg.init(init());
  for (int t = 1; t < 16; ++t) EXPECT_NO_THROW(seg.propagate(s, t));
}

TEST_F(WithDataset, MasksSurviveTheWire) {
  // Random masks through describe -> segmenter init on a rich mask.
  RemoteSegmenter seg(open());
  std::mt19937_64 gen(5);
  const auto grid = oracle::random_grid(gen, 80, 60);
  Mask m = Mask::from_grid({80, 60}, grid);
  if (m.is_empty()) m = init().first_mask;
  // The server replays the mask through its own parser; a round trip via
  // the text form must be exact.
  EXPECT_EQ(Mask::parse(m.to_string()), m);
  SegmenterInit in = init();
  in.first_mask = m;
  EXPECT_NO_THROW(seg.init(in));
}

TEST_F(WithDataset, RemotePipelineEqualsInProcess) {
  const Manifest manifest = load_manifest(dir.path() / "manifest.json");
  const FusionConfig cfg;
  auto scenes = std::make_shared<DatasetScenes>(dir.path());

  BackendSpecs local_specs;
  local_specs.segmenter = local_specs.tracker = local_specs.detector = local_specs.judge =
      BackendSpec::parse("mock:scenario");
  ConfiguredProvider local(local_specs, scenes);

  BackendSpecs remote_specs;
  remote_specs.segmenter = remote_specs.tracker = remote_specs.detector = remote_specs.judge =
      BackendSpec::parse("exec:" + server("--mode scenario"));
  ConfiguredProvider remote(remote_specs, nullptr, 10s);

  const DatasetResult a = run_dataset(manifest, dir.path(), local, cfg);
  const DatasetResult b = run_dataset(manifest, dir.path(), remote, cfg);
  ASSERT_EQ(a.videos.size(), b.videos.size());
  for (std::size_t i = 0; i < a.videos.size(); ++i) {
    ASSERT_FALSE(b.videos[i].error.has_value()) << *b.videos[i].error;
    EXPECT_EQ(a.videos[i].result.predictions, b.videos[i].result.predictions);
    ASSERT_EQ(a.videos[i].result.decisions.size(), b.videos[i].result.decisions.size());
    for (std::size_t k = 0; k < a.videos[i].result.decisions.size(); ++k) {
      EXPECT_EQ(format_decision("v", a.videos[i].result.decisions[k]),
                format_decision("v", b.videos[i].result.decisions[k]));
    }
  }
  EXPECT_EQ(dump_document(report_document(a)), dump_document(report_document(b)));
}
