#include "fake_server.hpp"
#include "helpers.hpp"

#include "visor/dataset.hpp"
#include "visor/eval.hpp"
#include "visor/policies.hpp"

#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

using namespace visor;
using namespace std::chrono_literals;

namespace {

std::string action_of(const std::string& text) { return extract_tag(text, "action").value_or("?"); }

/// Gray walls above the horizon, floor below, labels at the given columns on row 200.
PolicyQuery synthetic_query(const std::string& instruction, const std::vector<std::pair<char, int>>& labels) {
  PolicyQuery q;
  q.instruction = instruction;
  q.panorama = RgbImage(kPanoramaWidth, kPanoramaHeight, kWallColorX);
  for (int r = kHorizonRow + 1; r < kPanoramaHeight; ++r)
    for (int c = 0; c < kPanoramaWidth; ++c) q.panorama.set(r, c, kFloorColor);
  for (auto [letter, col] : labels) draw_label(q.panorama, {200, col}, letter);
  q.topdown = RgbImage(256, 256, {24, 24, 24});
  return q;
}

void paint(RgbImage& img, int r0, int r1, int c0, int c1, Rgb color) {
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) img.set(r, c, color);
}

Rgb palette(const std::string& name) {
  for (const auto& nc : color_palette())
    if (name == nc.name) return nc.rgb;
  FAIL("no such color " << name);
  return {};
}

/// One-connection TCP server on an ephemeral loopback port.
class TcpFakeServer {
 public:
  explicit TcpFakeServer(fake::Mode mode) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    REQUIRE(::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    REQUIRE(::listen(listen_fd_, 1) == 0);
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this, mode] {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) return;
      std::string buffer;
      fake::serve(
          mode,
          [&]() -> std::optional<std::string> {
            for (;;) {
              const auto nl = buffer.find('\n');
              if (nl != std::string::npos) {
                std::string line = buffer.substr(0, nl);
                buffer.erase(0, nl + 1);
                return line;
              }
              char chunk[65536];
              const ssize_t n = ::read(fd, chunk, sizeof chunk);
              if (n <= 0) return std::nullopt;
              buffer.append(chunk, static_cast<std::size_t>(n));
            }
          },
          [&](const std::string& line) {
            const std::string data = line + "\n";
            (void)!::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
          });
      ::close(fd);
    });
  }
  ~TcpFakeServer() {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    thread_.join();
  }
  int port() const { return port_; }

 private:
  int listen_fd_ = -1;
  int port_ = 0;
  std::thread thread_;
};

PolicyQuery labelled_query() { return synthetic_query("Find the red chair.", {{'B', 100}, {'C', 400}}); }

}  // namespace

TEST_SUITE("policies") {

TEST_CASE("oracle follows the privileged ground truth") {
  WaypointSet set;
  set.candidates.push_back({'D', Vec2::Zero(), {}, 3, 2.0});
  set.candidates.push_back({'K', Vec2::Zero(), {}, 3, 5.0});
  set.best_label = 'D';
  OraclePolicy oracle;
  oracle.set_privileged({nullptr, nullptr, &set, {}, std::nullopt});
  CHECK(action_of(oracle.respond({})) == "D");
  set.stop_correct = true;
  set.agent_geodesic = 0.8;
  CHECK(action_of(oracle.respond({})) == "stop");
  WaypointSet empty;
  oracle.set_privileged({nullptr, nullptr, &empty, {}, std::nullopt});
  CHECK(action_of(oracle.respond({})) == "turn_around");
  OraclePolicy blind;
  CHECK_THROWS_AS(blind.respond({}), PolicyFailure);
}

TEST_CASE("random policy is seeded and only names visible labels") {
  const PolicyQuery q = labelled_query();
  std::map<std::string, int> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    RandomPolicy a, b;
    a.reset(seed);
    b.reset(seed);
    const std::string ra = a.respond(q);
    CHECK(ra == b.respond(q));
    seen[action_of(ra)] += 1;
  }
  CHECK(seen.size() == 4);
  for (const auto& [action, n] : seen) {
    CHECK((action == "B" || action == "C" || action == "stop" || action == "turn_around"));
    CHECK(n > 25);
  }
}

TEST_CASE("heuristic picks the single label near the instruction color") {
  PolicyQuery q = labelled_query();
  q.panorama = synthetic_query("Find the red chair.", {{'B', 100}, {'C', 400}, {'E', 650}}).panorama;
  paint(q.panorama, 90, 126, 392, 408, palette("red"));
  const auto ev = analyze_query(q);
  REQUIRE(ev.color.has_value());
  CHECK(std::string(ev.color->name) == "red");
  REQUIRE(ev.labels.size() == 3);
  CHECK(ev.labels[1].keyword > ev.labels[0].keyword);
  CHECK(ev.labels[1].keyword > ev.labels[2].keyword);
  CHECK(action_of(HeuristicPolicy().respond(q)) == "C");
}

TEST_CASE("heuristic falls back to the most open label") {
  PolicyQuery q = synthetic_query("Find the chair with a lamp on top of it.", {{'B', 100}, {'C', 400}, {'E', 650}});
  // Only E looks onto open floor.
  paint(q.panorama, kHorizonRow + 1, kPanoramaHeight - 1, 0, 600, kWallColorY);
  draw_label(q.panorama, {200, 100}, 'B');
  draw_label(q.panorama, {200, 400}, 'C');
  CHECK_FALSE(instruction_color(q.instruction).has_value());
  CHECK(action_of(HeuristicPolicy().respond(q)) == "E");
}

TEST_CASE("heuristic stops when the target blob reaches the bottom rows") {
  PolicyQuery q = labelled_query();
  paint(q.panorama, 90, 250, 560, 600, palette("red"));
  const auto ev = analyze_query(q);
  CHECK(ev.target_range < HeuristicParams{}.stop_range);
  CHECK(action_of(HeuristicPolicy().respond(q)) == "stop");
}

TEST_CASE("instruction colors match whole words only") {
  CHECK(std::string(instruction_color("the Red chair")->name) == "red");
  CHECK_FALSE(instruction_color("a bored cat").has_value());
}

TEST_CASE("policy factory specs") {
  CHECK(make_policy_factory("oracle")()->name() == "oracle");
  CHECK(make_policy_factory("random")()->name() == "random");
  CHECK(make_policy_factory("heuristic")()->name() == "heuristic");
  CHECK_THROWS_AS(make_policy_factory("gpt"), InvalidConfig);
  CHECK_THROWS_AS(make_policy_factory("tcp:localhost"), InvalidConfig);
  CHECK_THROWS_AS(make_policy_factory("exec:"), InvalidConfig);
}

TEST_CASE("query encoding round-trips images") {
  const PolicyQuery q = labelled_query();
  const auto msg = nlohmann::json::parse(encode_query(q));
  CHECK(msg["v"] == 1);
  CHECK(msg["type"] == "query");
  CHECK(msg["instruction"] == q.instruction);
  CHECK(decode_png(base64_decode(msg["panorama_png_b64"].get<std::string>())) == q.panorama);
  CHECK(decode_png(base64_decode(msg["topdown_png_b64"].get<std::string>())) == q.topdown);
  CHECK_THROWS_AS(base64_decode("!!!"), Error);
}

TEST_CASE("external policy over a subprocess") {
  const PolicyQuery q = labelled_query();
  SUBCASE("valid server") {
    ExternalPolicy p(spawn_subprocess({FAKE_SERVER, "valid"}), 5s);
    const auto parsed = parse_response(p.respond(q), [] {
      WaypointSet s;
      s.candidates.push_back({'B', Vec2::Zero(), {}, 1, 0.0});
      s.candidates.push_back({'C', Vec2::Zero(), {}, 1, 0.0});
      return s;
    }());
    CHECK(parsed.action == HighLevelDecision::go_to('B'));
    CHECK(p.protocol_errors() == 0);
  }
  SUBCASE("junk replies fail after one retry") {
    ExternalPolicy p(spawn_subprocess({FAKE_SERVER, "junk"}), 5s);
    CHECK_THROWS_AS(p.respond(q), ProtocolViolation);
    CHECK(p.protocol_errors() == 2);
  }
  SUBCASE("one malformed reply is retried") {
    ExternalPolicy p(spawn_subprocess({FAKE_SERVER, "flaky"}), 5s);
    CHECK(action_of(p.respond(q)) == "B");
    CHECK(p.protocol_errors() == 1);
  }
  SUBCASE("slow server times out") {
    ExternalPolicy p(spawn_subprocess({FAKE_SERVER, "slow"}), 200ms);
    CHECK_THROWS_AS(p.respond(q), PolicyTimeout);
  }
  SUBCASE("version mismatch in the handshake") {
    CHECK_THROWS_AS(ExternalPolicy(spawn_subprocess({FAKE_SERVER, "bad-hello"}), 5s), ProtocolViolation);
  }
  SUBCASE("a child that exits closes the transport") {
    CHECK_THROWS_AS(ExternalPolicy(spawn_subprocess({"/bin/true"}), 5s), TransportClosed);
  }
}

TEST_CASE("external policy over TCP") {
  const PolicyQuery q = labelled_query();
  SUBCASE("valid") {
    TcpFakeServer server(fake::Mode::Valid);
    auto p = make_policy_factory("tcp:127.0.0.1:" + std::to_string(server.port()), 5s)();
    CHECK(action_of(p->respond(q)) == "B");
  }
  SUBCASE("junk") {
    TcpFakeServer server(fake::Mode::Junk);
    ExternalPolicy p(connect_tcp("127.0.0.1", server.port()), 5s);
    CHECK_THROWS_AS(p.respond(q), ProtocolViolation);
  }
  SUBCASE("bad hello") {
    TcpFakeServer server(fake::Mode::BadHello);
    CHECK_THROWS_AS(ExternalPolicy(connect_tcp("127.0.0.1", server.port()), 5s), ProtocolViolation);
  }
}

TEST_CASE("episodes run end to end through an external policy") {
  const auto eps = generate_episodes(3, 11, "bench");
  const auto report = evaluate(make_policy_factory(std::string("exec:") + FAKE_SERVER + " valid", 10s), eps,
                               EpisodeMode::Normal, 5);
  CHECK(report.episodes == 3);
  CHECK(report.parse_failures == 0);
  CHECK(report.hallucinations == 0);
  CHECK(report.terminations.count("policy_error") == 0);

  const auto broken = evaluate(make_policy_factory(std::string("exec:") + FAKE_SERVER + " junk", 10s), eps,
                               EpisodeMode::Normal, 5);
  CHECK(broken.terminations.at("policy_error") == 3);
}

}  // TEST_SUITE
