#include "tep/protocol.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <thread>

#include "tep/errors.hpp"

namespace tep::protocol {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::array<std::pair<Method, std::string_view>, 10> kMethodNames{{
    {Method::InitSegmenter, "init_segmenter"},
    {Method::Propagate, "propagate"},
    {Method::PromptBox, "prompt_box"},
    {Method::InitTracker, "init_tracker"},
    {Method::Track, "track"},
    {Method::Describe, "describe"},
    {Method::Detect, "detect"},
    {Method::Judge, "judge"},
    {Method::ClassifySemantic, "classify_semantic"},
    {Method::Shutdown, "shutdown"},
}};

constexpr std::array<Method, 10> kMethods = {
    Method::InitSegmenter, Method::Propagate, Method::PromptBox, Method::InitTracker,
    Method::Track,         Method::Describe,  Method::Detect,    Method::Judge,
    Method::ClassifySemantic, Method::Shutdown};

constexpr std::array<BackendOp, 9> kOps = {
    BackendOp::SegmenterInit,    BackendOp::SegmenterPropagate, BackendOp::SegmenterPromptBox,
    BackendOp::TrackerInit,      BackendOp::TrackerTrack,       BackendOp::DetectorDescribe,
    BackendOp::DetectorDetect,   BackendOp::JudgeCompare,       BackendOp::JudgeClassifySemantic};

[[noreturn]] void violation(const std::string& msg) { throw Error(ErrorKind::ProtocolViolation, msg); }

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

void write_all(int fd, std::string_view data, bool socket) {
  while (!data.empty()) {
    const ssize_t n = socket ? ::send(fd, data.data(), data.size(), MSG_NOSIGNAL)
                             : ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::BackendUnavailable, std::string("write failed: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Buffered newline reader over a file descriptor.
class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}

  std::optional<std::string> read_line(std::optional<std::chrono::milliseconds> timeout) {
    const auto deadline = timeout ? Clock::now() + *timeout : Clock::time_point::max();
    for (;;) {
      if (auto pos = buf_.find('\n'); pos != std::string::npos) {
        std::string line = buf_.substr(0, pos);
        buf_.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      int wait_ms = -1;
      if (timeout) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (left.count() <= 0) return std::nullopt;
        wait_ms = static_cast<int>(std::min<long long>(left.count(), 1 << 30));
      }
      pollfd pfd{fd_, POLLIN, 0};
      const int r = ::poll(&pfd, 1, wait_ms);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorKind::BackendUnavailable, std::string("poll failed: ") + std::strerror(errno));
      }
      if (r == 0) return std::nullopt;
      char chunk[4096];
      const ssize_t n = ::read(fd_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorKind::BackendUnavailable, std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw Error(ErrorKind::BackendUnavailable, "peer closed the connection");
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buf_;
};

class SubprocessTransport final : public Transport {
 public:
  SubprocessTransport(pid_t pid, int to_child, int from_child, std::string command)
      : pid_(pid), to_child_(to_child), from_child_(from_child), reader_(from_child),
        command_(std::move(command)) {}

  ~SubprocessTransport() override {
    ::close(to_child_);
    for (int i = 0; i < 100 && !peer_exited(); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (!exited_) {
      ::kill(-pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    } else {
      ::kill(-pid_, SIGKILL);  // stragglers left behind by the shell
    }
    ::close(from_child_);
  }

  void send_line(std::string_view line) override {
    std::string framed(line);
    framed += '\n';
    write_all(to_child_, framed, false);
  }

  std::optional<std::string> recv_line(std::chrono::milliseconds timeout) override {
    return reader_.read_line(timeout);
  }

  std::string describe() const override { return "exec:" + command_; }

  bool peer_exited() override {
    if (exited_) return true;
    int status = 0;
    if (::waitpid(pid_, &status, WNOHANG) == pid_) exited_ = true;
    return exited_;
  }

 private:
  pid_t pid_;
  int to_child_;
  int from_child_;
  LineReader reader_;
  std::string command_;
  bool exited_ = false;
};

class TcpTransport final : public Transport {
 public:
  TcpTransport(int fd, std::string peer) : fd_(fd), reader_(fd), peer_(std::move(peer)) {}
  ~TcpTransport() override { ::close(fd_); }

  void send_line(std::string_view line) override {
    std::string framed(line);
    framed += '\n';
    write_all(fd_, framed, true);
  }

  std::optional<std::string> recv_line(std::chrono::milliseconds timeout) override {
    return reader_.read_line(timeout);
  }

  std::string describe() const override { return "tcp:" + peer_; }

 private:
  int fd_;
  LineReader reader_;
  std::string peer_;
};

// Checked payload field access; anything off-schema is a protocol violation.
const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) violation(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::string str_field(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_string()) violation(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

int int_field(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_number_integer()) violation(std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

Mask mask_field(const Json& j, const char* key) {
  try {
    return Mask::parse(str_field(j, key));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ProtocolViolation) throw;
    violation(std::string("field '") + key + "': " + e.what());
  }
}

std::optional<BBox> bbox_field(const Json& j, const char* key) {
  try {
    return bbox_from_json(field(j, key));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ProtocolViolation) throw;
    violation(std::string("field '") + key + "': " + e.what());
  }
}

Json crop_json(const CropRef& c) {
  return Json{{"video_id", c.frame.video_id}, {"frame_index", c.frame.frame_index},
              {"bbox", to_json(c.box)}};
}

CropRef crop_from_json(const Json& j) {
  auto box = bbox_field(j, "bbox");
  if (!box) violation("crop bbox must not be null");
  return {{str_field(j, "video_id"), int_field(j, "frame_index")}, *box};
}

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& [k, name] : kMethodNames) {
    if (k == m) return name;
  }
  return "?";
}

std::optional<Method> method_from_string(std::string_view name) {
  for (const auto& [k, n] : kMethodNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::span<const Method> all_methods() { return kMethods; }
std::span<const BackendOp> all_backend_ops() { return kOps; }

Method wire_method(BackendOp op) {
  switch (op) {
    case BackendOp::SegmenterInit: return Method::InitSegmenter;
    case BackendOp::SegmenterPropagate: return Method::Propagate;
    case BackendOp::SegmenterPromptBox: return Method::PromptBox;
    case BackendOp::TrackerInit: return Method::InitTracker;
    case BackendOp::TrackerTrack: return Method::Track;
    case BackendOp::DetectorDescribe: return Method::Describe;
    case BackendOp::DetectorDetect: return Method::Detect;
    case BackendOp::JudgeCompare: return Method::Judge;
    case BackendOp::JudgeClassifySemantic: return Method::ClassifySemantic;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown backend op");
}

std::string encode(const Request& r) {
  Json j;
  j["id"] = r.id;
  j["method"] = r.method;
  j["params"] = r.params;
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

std::string encode(const Response& r) {
  Json j;
  j["id"] = r.id;
  j["status"] = r.ok ? "ok" : "error";
  if (r.ok) {
    j["payload"] = r.payload;
  } else {
    j["error_kind"] = r.error_kind;
    j["error_msg"] = r.error_msg;
  }
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

Request decode_request(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const std::exception& e) {
    violation(std::string("malformed request line: ") + e.what());
  }
  if (!j.is_object()) violation("request must be an object");
  const Json& id = field(j, "id");
  if (!id.is_number_unsigned()) violation("request id must be a non-negative integer");
  Request r;
  r.id = id.get<std::uint64_t>();
  r.method = str_field(j, "method");
  if (j.contains("params")) {
    if (!j["params"].is_object()) violation("params must be an object");
    r.params = j["params"];
  }
  return r;
}

Response decode_response(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const std::exception& e) {
    violation(std::string("malformed response line: ") + e.what());
  }
  if (!j.is_object()) violation("response must be an object");
  const Json& id = field(j, "id");
  if (!id.is_number_unsigned()) violation("response id must be a non-negative integer");
  Response r;
  r.id = id.get<std::uint64_t>();
  const std::string status = str_field(j, "status");
  if (status == "ok") {
    r.ok = true;
    r.payload = field(j, "payload");
    if (!r.payload.is_object()) violation("payload must be an object");
  } else if (status == "error") {
    r.ok = false;
    r.error_kind = str_field(j, "error_kind");
    if (j.contains("error_msg") && j["error_msg"].is_string()) r.error_msg = j["error_msg"];
  } else {
    violation("unknown status '" + status + "'");
  }
  return r;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Transport> spawn_subprocess(const std::string& command) {
  ignore_sigpipe();
  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) {
    throw Error(ErrorKind::SpawnFailed, std::string("pipe: ") + std::strerror(errno));
  }
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw Error(ErrorKind::SpawnFailed, std::string("pipe: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw Error(ErrorKind::SpawnFailed, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    // Own process group, so that killing the group also reaches whatever
    // the shell started.
    ::setpgid(0, 0);
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);  // also from the parent, whichever runs first
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  return std::make_unique<SubprocessTransport>(pid, in_pipe[1], out_pipe[0], command);
}

std::unique_ptr<Transport> connect_tcp(const std::string& host, int port) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port_str = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorKind::ConnectRefused, host + ":" + port_str + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  int last_errno = 0;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) {
      last_errno = errno;
      continue;
    }
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    last_errno = errno;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    throw Error(ErrorKind::ConnectRefused, host + ":" + port_str + ": " + std::strerror(last_errno));
  }
  return std::make_unique<TcpTransport>(fd, host + ":" + port_str);
}

Endpoint Endpoint::parse(std::string_view spec) {
  Endpoint e;
  if (spec.starts_with("exec:")) {
    e.kind = Kind::Exec;
    e.command = std::string(spec.substr(5));
    if (e.command.empty()) throw Error(ErrorKind::ConfigError, "exec: endpoint needs a command");
    return e;
  }
  if (spec.starts_with("tcp:")) {
    const std::string_view rest = spec.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
      throw Error(ErrorKind::ConfigError, "tcp endpoint must be tcp:<host>:<port>");
    }
    e.kind = Kind::Tcp;
    e.host = std::string(rest.substr(0, colon));
    try {
      std::size_t used = 0;
      const std::string port_text(rest.substr(colon + 1));
      e.port = std::stoi(port_text, &used);
      if (used != port_text.size() || e.port <= 0 || e.port > 65535) throw std::out_of_range("port");
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConfigError, "invalid tcp port in '" + std::string(spec) + "'");
    }
    return e;
  }
  throw Error(ErrorKind::ConfigError, "endpoint must be exec:<command> or tcp:<host>:<port>, got '" +
                                          std::string(spec) + "'");
}

std::string Endpoint::to_string() const {
  return kind == Kind::Exec ? "exec:" + command : "tcp:" + host + ":" + std::to_string(port);
}

std::chrono::milliseconds default_timeout() {
  if (const char* env = std::getenv("TEP_BACKEND_TIMEOUT_MS")) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return std::chrono::milliseconds(v);
  }
  return std::chrono::milliseconds(30000);
}

// ---------------------------------------------------------------------------

Connection::Connection(std::unique_ptr<Transport> transport, std::chrono::milliseconds timeout)
    : transport_(std::move(transport)), timeout_(timeout) {
  const Response r = exchange("hello", Json{{"protocol_version", kProtocolVersion}});
  if (!r.ok) {
    if (r.error_kind == "VersionMismatch") {
      throw Error(ErrorKind::VersionMismatch, transport_->describe() + ": " + r.error_msg);
    }
    throw Error::remote(r.error_kind, "hello rejected: " + r.error_msg);
  }
  const Json& version = field(r.payload, "protocol_version");
  if (!version.is_number_integer() || version.get<int>() != kProtocolVersion) {
    throw Error(ErrorKind::VersionMismatch, transport_->describe() + " speaks protocol " +
                                                version.dump() + ", expected " +
                                                std::to_string(kProtocolVersion));
  }
  const Json& caps = field(r.payload, "capabilities");
  if (!caps.is_array()) violation("capabilities must be an array");
  for (const Json& c : caps) {
    if (!c.is_string()) violation("capabilities must be strings");
    capabilities_.push_back(c.get<std::string>());
  }
}

Connection::~Connection() {
  if (broken_ || shut_down_) return;
  try {
    timeout_ = std::min(timeout_, std::chrono::milliseconds(1000));
    exchange(std::string(to_string(Method::Shutdown)), Json::object());
  } catch (...) {
  }
}

std::unique_ptr<Connection> Connection::open(const Endpoint& endpoint,
                                             std::chrono::milliseconds timeout) {
  std::unique_ptr<Transport> transport = endpoint.kind == Endpoint::Kind::Exec
                                             ? spawn_subprocess(endpoint.command)
                                             : connect_tcp(endpoint.host, endpoint.port);
  try {
    return std::make_unique<Connection>(std::move(transport), timeout);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::BackendUnavailable) throw;
    if (endpoint.kind == Endpoint::Kind::Exec) {
      throw Error(ErrorKind::SpawnFailed,
                  "'" + endpoint.command + "' exited before completing the handshake");
    }
    throw Error(ErrorKind::ConnectRefused, endpoint.to_string() + " closed during the handshake");
  }
}

Response Connection::exchange(const std::string& method, Json params) {
  if (broken_) {
    throw Error(ErrorKind::BackendUnavailable,
                transport_->describe() + " is unusable after an earlier failure");
  }
  Request req{next_id_++, method, std::move(params)};
  try {
    transport_->send_line(encode(req));
    auto line = transport_->recv_line(timeout_);
    if (!line) {
      broken_ = true;
      throw Error(ErrorKind::BackendTimeout, transport_->describe() + ": no reply to '" + method +
                                                 "' within " + std::to_string(timeout_.count()) +
                                                 " ms");
    }
    Response resp = decode_response(*line);
    if (resp.id != req.id) {
      broken_ = true;
      violation("response id " + std::to_string(resp.id) + " does not match request id " +
                std::to_string(req.id));
    }
    if (method == to_string(Method::Shutdown)) shut_down_ = true;
    return resp;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::BackendUnavailable || e.kind() == ErrorKind::ProtocolViolation) {
      broken_ = true;
    }
    throw;
  }
}

Json Connection::call(Method method, Json params) {
  Response r = exchange(std::string(to_string(method)), std::move(params));
  if (!r.ok) throw Error::remote(r.error_kind, r.error_msg);
  return std::move(r.payload);
}

// ---------------------------------------------------------------------------

TrackOutput track_output_from_payload(const Json& payload) {
  TrackOutput out;
  out.bbox = bbox_field(payload, "bbox");
  const Json& c = field(payload, "confidence");
  if (!c.is_number()) violation("confidence must be a number");
  out.confidence = c.get<double>();
  out.validate();
  return out;
}

Json to_payload(const TrackOutput& out) {
  return Json{{"bbox", out.bbox ? to_json(*out.bbox) : Json(nullptr)}, {"confidence", out.confidence}};
}

std::string RemoteSegmenter::init(const SegmenterInit& init) {
  const Json payload = conn_->call(Method::InitSegmenter,
                                   Json{{"video_id", init.video_id},
                                        {"object_id", init.object_id},
                                        {"first_frame_index", init.first_frame_index},
                                        {"first_mask", init.first_mask.to_string()}});
  std::string session = str_field(payload, "session");
  video_of_session_[session] = init.video_id;
  return session;
}

Mask RemoteSegmenter::propagate(const std::string& session, int frame_index) {
  const Json payload = conn_->call(
      Method::Propagate,
      Json{{"session", session}, {"video_id", video_of_session_[session]}, {"frame_index", frame_index}});
  return mask_field(payload, "mask");
}

void RemoteSegmenter::prompt_box(const std::string& session, int frame_index, const BBox& box) {
  conn_->call(Method::PromptBox, Json{{"session", session},
                                      {"video_id", video_of_session_[session]},
                                      {"frame_index", frame_index},
                                      {"bbox", to_json(box)}});
}

void RemoteTracker::init(const FrameRef& first_frame, const BBox& template_box) {
  conn_->call(Method::InitTracker, Json{{"video_id", first_frame.video_id},
                                        {"object_id", object_id_},
                                        {"frame_index", first_frame.frame_index},
                                        {"bbox", to_json(template_box)}});
  video_id_ = first_frame.video_id;
}

TrackOutput RemoteTracker::track(int frame_index) {
  if (!video_id_) throw Error(ErrorKind::NotInitialized, "track before init");
  return track_output_from_payload(conn_->call(
      Method::Track,
      Json{{"video_id", *video_id_}, {"object_id", object_id_}, {"frame_index", frame_index}}));
}

std::string RemoteDetector::describe(const FrameRef& first_frame, const Mask& mask) {
  const Json payload = conn_->call(Method::Describe, Json{{"video_id", first_frame.video_id},
                                                          {"object_id", object_id_},
                                                          {"frame_index", first_frame.frame_index},
                                                          {"mask", mask.to_string()}});
  video_id_ = first_frame.video_id;
  return str_field(payload, "description");
}

TrackOutput RemoteDetector::detect(int frame_index, const std::string& description) {
  if (!video_id_) throw Error(ErrorKind::NotInitialized, "detect before describe");
  return track_output_from_payload(conn_->call(Method::Detect, Json{{"video_id", *video_id_},
                                                                    {"object_id", object_id_},
                                                                    {"frame_index", frame_index},
                                                                    {"description", description}}));
}

JudgeVerdict RemoteJudge::compare(const CropRef& reference, const CropRef& crop_a,
                                  const CropRef& crop_b) {
  const Json payload = conn_->call(
      Method::Judge,
      Json{{"reference", crop_json(reference)}, {"crop_a", crop_json(crop_a)}, {"crop_b", crop_json(crop_b)}});
  const std::string choice = str_field(payload, "choice");
  JudgeVerdict v;
  if (choice == "baseline") {
    v.choice = JudgeChoice::BaselineCrop;
  } else if (choice == "auxiliary") {
    v.choice = JudgeChoice::AuxiliaryCrop;
  } else {
    violation("judge choice must be 'baseline' or 'auxiliary', got '" + choice + "'");
  }
  if (payload.contains("rationale") && payload["rationale"].is_string()) v.rationale = payload["rationale"];
  return v;
}

SemanticVerdict RemoteJudge::classify_semantic(const FrameRef& frame, const Mask& mask) {
  const Json payload = conn_->call(Method::ClassifySemantic, Json{{"video_id", frame.video_id},
                                                                  {"frame_index", frame.frame_index},
                                                                  {"mask", mask.to_string()}});
  const Json& distinct = field(payload, "distinct");
  if (!distinct.is_boolean()) violation("distinct must be a boolean");
  SemanticVerdict v{distinct.get<bool>(), {}};
  if (payload.contains("description") && payload["description"].is_string()) {
    v.description = payload["description"];
  }
  return v;
}

// ---------------------------------------------------------------------------

void HandlerRegistry::add(Method method, Handler handler) { handlers_[method] = std::move(handler); }

std::vector<std::string> HandlerRegistry::capabilities() const {
  std::vector<std::string> out;
  for (const auto& [m, _] : handlers_) out.emplace_back(to_string(m));
  return out;
}

std::string HandlerRegistry::handle_line(std::string_view line, bool& shutdown) {
  shutdown = false;
  Response resp;
  Request req;
  try {
    req = decode_request(line);
  } catch (const Error& e) {
    resp.ok = false;
    resp.error_kind = std::string(to_string(ErrorKind::ProtocolViolation));
    resp.error_msg = e.what();
    return encode(resp);
  }
  resp.id = req.id;
  auto fail = [&](std::string kind, std::string msg) {
    resp.ok = false;
    resp.error_kind = std::move(kind);
    resp.error_msg = std::move(msg);
    return encode(resp);
  };
  if (req.method == "hello") {
    const Json& v = req.params.contains("protocol_version") ? req.params["protocol_version"] : Json();
    if (!v.is_number_integer() || v.get<int>() != reported_version_) {
      return fail(std::string(to_string(ErrorKind::VersionMismatch)),
                  "server speaks protocol " + std::to_string(reported_version_));
    }
    resp.payload = Json{{"protocol_version", reported_version_}, {"capabilities", capabilities()}};
    return encode(resp);
  }
  const auto method = method_from_string(req.method);
  if (method == Method::Shutdown) {
    shutdown = true;
    return encode(resp);
  }
  if (!method || !handlers_.contains(*method)) {
    return fail(std::string(to_string(ErrorKind::UnknownMethod)), "unsupported method '" + req.method + "'");
  }
  try {
    resp.payload = handlers_.at(*method)(req.params);
  } catch (const Error& e) {
    return fail(std::string(to_string(e.kind())), e.what());
  } catch (const std::exception& e) {
    return fail("InternalError", e.what());
  }
  return encode(resp);
}

void serve(int in_fd, int out_fd, HandlerRegistry& registry) {
  ignore_sigpipe();
  LineReader reader(in_fd);
  for (;;) {
    std::optional<std::string> line;
    try {
      line = reader.read_line(std::nullopt);
    } catch (const Error&) {
      return;  // EOF
    }
    if (!line) continue;
    bool shutdown = false;
    std::string reply = registry.handle_line(*line, shutdown);
    reply += '\n';
    try {
      write_all(out_fd, reply, false);
    } catch (const Error&) {
      return;
    }
    if (shutdown) return;
  }
}

HandlerRegistry mock_handlers(std::shared_ptr<const SceneSource> scenes, MockModes modes) {
  struct State {
    MockProvider provider;
    std::map<std::string, std::unique_ptr<Segmenter>> segmenters;
    std::map<std::string, std::unique_ptr<Tracker>> trackers;
    std::map<std::string, std::unique_ptr<Detector>> detectors;
    std::map<std::string, std::unique_ptr<Judge>> judges;

    Segmenter& segmenter(const std::string& video) {
      auto& s = segmenters[video];
      if (!s) s = provider.segmenter(video);
      return *s;
    }
    Judge& judge(const std::string& video) {
      auto& j = judges[video];
      if (!j) j = provider.judge(video);
      return *j;
    }
  };
  auto st = std::make_shared<State>(State{MockProvider(scenes, modes), {}, {}, {}, {}});
  auto key = [](const Json& p) { return str_field(p, "video_id") + "/" + str_field(p, "object_id"); };

  HandlerRegistry reg;
  reg.add(Method::InitSegmenter, [st](const Json& p) {
    SegmenterInit init{str_field(p, "video_id"), str_field(p, "object_id"),
                       int_field(p, "first_frame_index"), mask_field(p, "first_mask")};
    return Json{{"session", st->segmenter(init.video_id).init(init)}};
  });
  reg.add(Method::Propagate, [st](const Json& p) {
    const Mask m = st->segmenter(str_field(p, "video_id"))
                       .propagate(str_field(p, "session"), int_field(p, "frame_index"));
    return Json{{"mask", m.to_string()}};
  });
  reg.add(Method::PromptBox, [st](const Json& p) {
    auto box = bbox_field(p, "bbox");
    if (!box) violation("prompt bbox must not be null");
    st->segmenter(str_field(p, "video_id"))
        .prompt_box(str_field(p, "session"), int_field(p, "frame_index"), *box);
    return Json::object();
  });
  reg.add(Method::InitTracker, [st, key](const Json& p) {
    auto box = bbox_field(p, "bbox");
    if (!box) violation("template bbox must not be null");
    auto& t = st->trackers[key(p)];
    t = st->provider.tracker(str_field(p, "video_id"), str_field(p, "object_id"));
    t->init({str_field(p, "video_id"), int_field(p, "frame_index")}, *box);
    return Json::object();
  });
  reg.add(Method::Track, [st, key](const Json& p) {
    auto it = st->trackers.find(key(p));
    if (it == st->trackers.end()) throw Error(ErrorKind::NotInitialized, "track before init_tracker");
    return to_payload(it->second->track(int_field(p, "frame_index")));
  });
  reg.add(Method::Describe, [st, key](const Json& p) {
    auto& d = st->detectors[key(p)];
    d = st->provider.detector(str_field(p, "video_id"), str_field(p, "object_id"));
    return Json{{"description",
                 d->describe({str_field(p, "video_id"), int_field(p, "frame_index")}, mask_field(p, "mask"))}};
  });
  reg.add(Method::Detect, [st, key](const Json& p) {
    auto it = st->detectors.find(key(p));
    if (it == st->detectors.end()) throw Error(ErrorKind::NotInitialized, "detect before describe");
    return to_payload(it->second->detect(int_field(p, "frame_index"), str_field(p, "description")));
  });
  reg.add(Method::Judge, [st](const Json& p) {
    const CropRef ref = crop_from_json(field(p, "reference"));
    const JudgeVerdict v = st->judge(ref.frame.video_id)
                               .compare(ref, crop_from_json(field(p, "crop_a")),
                                        crop_from_json(field(p, "crop_b")));
    return Json{{"choice", v.choice == JudgeChoice::AuxiliaryCrop ? "auxiliary" : "baseline"},
                {"rationale", v.rationale}};
  });
  reg.add(Method::ClassifySemantic, [st](const Json& p) {
    const std::string video = str_field(p, "video_id");
    const SemanticVerdict v =
        st->judge(video).classify_semantic({video, int_field(p, "frame_index")}, mask_field(p, "mask"));
    return Json{{"distinct", v.distinct}, {"description", v.description}};
  });
  return reg;
}

}  // namespace tep::protocol
