#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tep/backends.hpp"
#include "tep/json_io.hpp"
#include "tep/mock_backends.hpp"

namespace tep::protocol {

inline constexpr int kProtocolVersion = 1;

/// The closed set of wire methods (the handshake "hello" is separate).
enum class Method {
  InitSegmenter,
  Propagate,
  PromptBox,
  InitTracker,
  Track,
  Describe,
  Detect,
  Judge,
  ClassifySemantic,
  Shutdown,
};

std::string_view to_string(Method m);
std::optional<Method> method_from_string(std::string_view name);
std::span<const Method> all_methods();

/// Every operation of the backend interfaces.
enum class BackendOp {
  SegmenterInit,
  SegmenterPropagate,
  SegmenterPromptBox,
  TrackerInit,
  TrackerTrack,
  DetectorDescribe,
  DetectorDetect,
  JudgeCompare,
  JudgeClassifySemantic,
};

std::span<const BackendOp> all_backend_ops();
/// The single wire method carrying `op`.
Method wire_method(BackendOp op);

struct Request {
  std::uint64_t id = 0;
  std::string method;
  Json params = Json::object();
};

struct Response {
  std::uint64_t id = 0;
  bool ok = true;
  Json payload = Json::object();
  std::string error_kind;
  std::string error_msg;
};

/// One line, no trailing newline: {"id":N,"method":"...","params":{...}}
std::string encode(const Request& r);
/// {"id":N,"status":"ok","payload":{...}} or
/// {"id":N,"status":"error","error_kind":"...","error_msg":"..."}
std::string encode(const Response& r);
/// Throws ProtocolViolation on malformed lines.
Request decode_request(std::string_view line);
Response decode_response(std::string_view line);

// ---------------------------------------------------------------------------
// Transports

/// Bidirectional line channel.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws BackendUnavailable when the peer is gone.
  virtual void send_line(std::string_view line) = 0;
  /// nullopt on timeout. Throws BackendUnavailable on EOF.
  virtual std::optional<std::string> recv_line(std::chrono::milliseconds timeout) = 0;
  /// Human-readable peer description for error messages.
  virtual std::string describe() const = 0;
  /// True once a subprocess peer has exited.
  virtual bool peer_exited() { return false; }
};

/// Runs `/bin/sh -c command` with its stdin/stdout as the channel.
std::unique_ptr<Transport> spawn_subprocess(const std::string& command);
/// Throws ConnectRefused.
std::unique_ptr<Transport> connect_tcp(const std::string& host, int port);

/// `exec:<command line>` or `tcp:<host>:<port>`.
struct Endpoint {
  enum class Kind { Exec, Tcp };
  Kind kind = Kind::Exec;
  std::string command;
  std::string host;
  int port = 0;

  /// Throws ConfigError for anything else.
  static Endpoint parse(std::string_view spec);
  std::string to_string() const;
};

/// Protocol timeout: TEP_BACKEND_TIMEOUT_MS when set, else 30 s.
std::chrono::milliseconds default_timeout();

// ---------------------------------------------------------------------------
// Client

/// A handshaken connection with strict request/response alternation.
class Connection {
 public:
  /// Sends hello and checks the version. Throws VersionMismatch,
  /// ProtocolViolation, BackendTimeout or BackendUnavailable.
  Connection(std::unique_ptr<Transport> transport, std::chrono::milliseconds timeout);
  /// Best-effort shutdown request.
  ~Connection();

  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  /// Spawns or dials the endpoint and handshakes. Maps an endpoint that dies
  /// before answering to SpawnFailed / ConnectRefused.
  static std::unique_ptr<Connection> open(const Endpoint& endpoint,
                                          std::chrono::milliseconds timeout = default_timeout());

  const std::vector<std::string>& capabilities() const { return capabilities_; }

  /// Returns the payload of an ok response. Throws BackendTimeout,
  /// ProtocolViolation, or RemoteError carrying the server's kind. After a
  /// timeout the connection is unusable (BackendUnavailable).
  Json call(Method method, Json params);

 private:
  Response exchange(const std::string& method, Json params);

  std::unique_ptr<Transport> transport_;
  std::chrono::milliseconds timeout_;
  std::uint64_t next_id_ = 1;
  bool broken_ = false;
  bool shut_down_ = false;
  std::vector<std::string> capabilities_;
};

// ---------------------------------------------------------------------------
// Remote backends (one connection each)

class RemoteSegmenter final : public Segmenter {
 public:
  explicit RemoteSegmenter(std::unique_ptr<Connection> conn) : conn_(std::move(conn)) {}
  std::string init(const SegmenterInit& init) override;
  Mask propagate(const std::string& session, int frame_index) override;
  void prompt_box(const std::string& session, int frame_index, const BBox& box) override;

 private:
  std::unique_ptr<Connection> conn_;
  std::map<std::string, std::string> video_of_session_;
};

class RemoteTracker final : public Tracker {
 public:
  RemoteTracker(std::unique_ptr<Connection> conn, std::string object_id)
      : conn_(std::move(conn)), object_id_(std::move(object_id)) {}
  void init(const FrameRef& first_frame, const BBox& template_box) override;
  TrackOutput track(int frame_index) override;

 private:
  std::unique_ptr<Connection> conn_;
  std::string object_id_;
  std::optional<std::string> video_id_;
};

class RemoteDetector final : public Detector {
 public:
  RemoteDetector(std::unique_ptr<Connection> conn, std::string object_id)
      : conn_(std::move(conn)), object_id_(std::move(object_id)) {}
  std::string describe(const FrameRef& first_frame, const Mask& mask) override;
  TrackOutput detect(int frame_index, const std::string& description) override;

 private:
  std::unique_ptr<Connection> conn_;
  std::string object_id_;
  std::optional<std::string> video_id_;
};

class RemoteJudge final : public Judge {
 public:
  explicit RemoteJudge(std::unique_ptr<Connection> conn) : conn_(std::move(conn)) {}
  JudgeVerdict compare(const CropRef& reference, const CropRef& crop_a,
                       const CropRef& crop_b) override;
  SemanticVerdict classify_semantic(const FrameRef& frame, const Mask& mask) override;

 private:
  std::unique_ptr<Connection> conn_;
};

/// Parses a track/detect payload and enforces the TrackOutput invariant.
TrackOutput track_output_from_payload(const Json& payload);
Json to_payload(const TrackOutput& out);

// ---------------------------------------------------------------------------
// Server side

/// Method name -> handler. A handler returns the payload or throws tep::Error,
/// whose kind becomes the response's error_kind.
class HandlerRegistry {
 public:
  using Handler = std::function<Json(const Json& params)>;

  void add(Method method, Handler handler);
  std::vector<std::string> capabilities() const;

  /// Turns one request line into one response line; never throws.
  /// Sets `shutdown` when the request was a shutdown.
  std::string handle_line(std::string_view line, bool& shutdown);

  /// Overrides the version reported in the hello reply (for fixtures).
  void set_reported_version(int v) { reported_version_ = v; }

 private:
  std::map<Method, Handler> handlers_;
  int reported_version_ = kProtocolVersion;
};

/// Serves requests from in_fd to out_fd until shutdown or EOF.
void serve(int in_fd, int out_fd, HandlerRegistry& registry);

/// Handlers backed by the in-process mocks. State (sessions, tracker and
/// detector instances) lives in the returned registry's closures.
HandlerRegistry mock_handlers(std::shared_ptr<const SceneSource> scenes, MockModes modes);

}  // namespace tep::protocol
