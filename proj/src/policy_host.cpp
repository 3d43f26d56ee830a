#include "visor/image_io.hpp"
#include "visor/policies.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <arpa/inet.h>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <sstream>

namespace visor {

using nlohmann::json;

namespace {

/// Line framing over a pair of file descriptors.
class FdTransport : public Transport {
 public:
  FdTransport(int read_fd, int write_fd, bool socket) : read_fd_(read_fd), write_fd_(write_fd), socket_(socket) {}

  ~FdTransport() override {
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  }

  void send_line(const std::string& line) override {
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = socket_ ? ::send(write_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                                : ::write(write_fd_, data.data() + off, data.size() - off);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw TransportClosed(std::string("write failed: ") + std::strerror(errno));
      off += static_cast<std::size_t>(n);
    }
  }

  std::string recv_line(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw PolicyTimeout("no reply within " + std::to_string(timeout.count()) + " ms");
      pollfd p{read_fd_, POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0 && errno == EINTR) continue;
      if (rc < 0) throw TransportClosed(std::string("poll failed: ") + std::strerror(errno));
      if (rc == 0) continue;
      char chunk[65536];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw TransportClosed("policy closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  int read_fd_;
  int write_fd_;
  bool socket_;
  std::string buffer_;
};

class SubprocessTransport : public FdTransport {
 public:
  SubprocessTransport(int read_fd, int write_fd, pid_t pid) : FdTransport(read_fd, write_fd, false), pid_(pid) {}

  ~SubprocessTransport() override {
    // Closing stdin lets a well-behaved child exit on EOF.
    ::close(write_fd_);
    write_fd_ = -1;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) != 0) return;
      ::usleep(10000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }

 private:
  pid_t pid_;
};

}  // namespace

std::unique_ptr<Transport> spawn_subprocess(const std::vector<std::string>& argv) {
  if (argv.empty()) throw InvalidConfig("empty policy command");
  std::signal(SIGPIPE, SIG_IGN);
  int to_child[2], from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0 || ::pipe2(from_child, O_CLOEXEC) != 0) {
    throw TransportClosed(std::string("pipe failed: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw TransportClosed(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::make_unique<SubprocessTransport>(from_child[0], to_child[1], pid);
}

std::unique_ptr<Transport> connect_tcp(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) {
    throw TransportClosed("cannot resolve " + host);
  }
  int fd = -1;
  for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportClosed("cannot connect to " + host + ":" + std::to_string(port));
  return std::make_unique<FdTransport>(fd, fd, true);
}

// ---------------------------------------------------------------------------

std::string encode_query(const PolicyQuery& query) {
  const json msg = {{"v", kProtocolVersion},
                    {"type", "query"},
                    {"decision_index", query.decision_index},
                    {"instruction", query.instruction},
                    {"panorama_png_b64", base64_encode(encode_png(query.panorama))},
                    {"topdown_png_b64", base64_encode(encode_png(query.topdown))}};
  return msg.dump();
}

ExternalPolicy::ExternalPolicy(std::unique_ptr<Transport> transport, std::chrono::milliseconds timeout)
    : transport_(std::move(transport)), timeout_(timeout) {
  transport_->send_line(json{{"type", "hello"}, {"v", kProtocolVersion}}.dump());
  const std::string line = transport_->recv_line(timeout_);
  json reply;
  try {
    reply = json::parse(line);
  } catch (const json::exception&) {
    throw ProtocolViolation("handshake reply is not JSON");
  }
  if (!reply.is_object() || reply.value("type", "") != "hello" || !reply.contains("v") ||
      reply["v"] != kProtocolVersion) {
    throw ProtocolViolation("handshake version mismatch: " + line.substr(0, 200));
  }
}

namespace {

std::optional<std::string> decode_response(const std::string& line, std::string& why) {
  json msg;
  try {
    msg = json::parse(line);
  } catch (const json::exception&) {
    why = "reply is not JSON";
    return std::nullopt;
  }
  if (!msg.is_object() || msg.value("type", "") != "response" || !msg.contains("v") || msg["v"] != kProtocolVersion) {
    why = "reply is not a v1 response";
    return std::nullopt;
  }
  for (const char* field : {"think", "think_summary", "action"}) {
    if (!msg.contains(field) || !msg[field].is_string()) {
      why = std::string("reply lacks string field ") + field;
      return std::nullopt;
    }
  }
  return format_response(msg["think"].get<std::string>(), msg["think_summary"].get<std::string>(),
                         msg["action"].get<std::string>());
}

}  // namespace

std::string ExternalPolicy::respond(const PolicyQuery& query) {
  const std::string request = encode_query(query);
  std::string why;
  for (int attempt = 0; attempt < 2; ++attempt) {
    transport_->send_line(request);
    if (auto text = decode_response(transport_->recv_line(timeout_), why)) return *text;
    ++protocol_errors_;
    spdlog::debug("external policy: {}", why);
  }
  throw ProtocolViolation(why);
}

// ---------------------------------------------------------------------------

PolicyFactory make_policy_factory(const std::string& spec, std::chrono::milliseconds timeout) {
  if (spec == "oracle") return [] { return std::make_unique<OraclePolicy>(); };
  if (spec == "random") return [] { return std::make_unique<RandomPolicy>(); };
  if (spec == "heuristic") return [] { return std::make_unique<HeuristicPolicy>(); };
  if (spec.rfind("exec:", 0) == 0) {
    std::vector<std::string> argv;
    std::istringstream in(spec.substr(5));
    for (std::string a; in >> a;) argv.push_back(a);
    if (argv.empty()) throw InvalidConfig("exec: policy needs a command");
    return [argv, timeout] { return std::make_unique<ExternalPolicy>(spawn_subprocess(argv), timeout); };
  }
  if (spec.rfind("tcp:", 0) == 0) {
    const std::string rest = spec.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw InvalidConfig("tcp policy must be tcp:<host>:<port>");
    const std::string host = rest.substr(0, colon);
    int port = 0;
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw InvalidConfig("bad tcp port in " + spec);
    }
    return [host, port, timeout] { return std::make_unique<ExternalPolicy>(connect_tcp(host, port), timeout); };
  }
  throw InvalidConfig("unknown policy: " + spec);
}

}  // namespace visor
