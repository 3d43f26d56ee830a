#pragma once

#include "visor/policy.hpp"
#include "visor/sensors.hpp"

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace visor {

/// Privileged upper bound: Stop inside the success radius, otherwise the
/// ground-truth label. Turns around when nothing is in view.
class OraclePolicy : public Policy, public PrivilegedPolicy {
 public:
  std::string name() const override { return "oracle"; }
  bool concurrent_safe() const override { return false; }
  void set_privileged(const PrivilegedInfo& info) override { info_ = info; }
  std::string respond(const PolicyQuery& query) override;

 private:
  PrivilegedInfo info_;
};

/// Uniform over the labels it can read off the panorama, stop and turn_around.
class RandomPolicy : public Policy {
 public:
  std::string name() const override { return "random"; }
  void reset(std::uint64_t episode_seed) override { seed_ = episode_seed; }
  std::string respond(const PolicyQuery& query) override;

 private:
  std::uint64_t seed_ = 0;
};

struct HeuristicParams {
  /// Stop once the bottom of a target-colored blob implies a range below this.
  double stop_range = 0.95;
  /// Columns on either side of a label searched for target color.
  int keyword_window = 48;
  /// Columns on either side of a label counted for open floor.
  int open_window = 24;
  double keyword_weight = 4.0;
  double unexplored_weight = 1.0;
  /// Top-down map meters per pixel; the default matches a 48-cell world.
  double topdown_meters_per_pixel = 12.0 / 256.0;
  int color_tolerance = 8;
};

struct LabelEvidence {
  char letter = '?';
  PixelPos center;
  double keyword = 0.0;     ///< target color near the label, in [0, 1]
  double open = 0.0;        ///< open floor and apparent range, in [0, 1]
  double unexplored = 0.0;  ///< unexplored top-down area around the label, in [0, 1]
};

/// What can be read off a query's pixels without privileged data.
struct SceneEvidence {
  std::optional<NamedColor> color;
  std::vector<LabelEvidence> labels;  ///< alphabetical
  int target_columns = 0;
  int target_bottom_row = -1;
  /// Range implied by the lowest target-colored pixel, +inf when none is
  /// visible and 0 when the blob reaches the bottom edge.
  double target_range = 0.0;
};

SceneEvidence analyze_query(const PolicyQuery& query, const HeuristicParams& params = {});

/// Non-privileged baseline working from pixels only: target color from the
/// instruction, open floor and unexplored map area around each label.
class HeuristicPolicy : public Policy {
 public:
  explicit HeuristicPolicy(HeuristicParams params = {}) : params_(params) {}
  std::string name() const override { return "heuristic"; }
  std::string respond(const PolicyQuery& query) override;

 private:
  HeuristicParams params_;
};

/// First palette color word appearing in an instruction.
std::optional<NamedColor> instruction_color(const std::string& instruction);

// ---------------------------------------------------------------------------
// External policies over newline-delimited JSON.

class PolicyTimeout : public PolicyFailure {
 public:
  using PolicyFailure::PolicyFailure;
};

class ProtocolViolation : public PolicyFailure {
 public:
  using PolicyFailure::PolicyFailure;
};

class TransportClosed : public PolicyFailure {
 public:
  using PolicyFailure::PolicyFailure;
};

inline constexpr int kProtocolVersion = 1;

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send_line(const std::string& line) = 0;
  /// Throws PolicyTimeout or TransportClosed.
  virtual std::string recv_line(std::chrono::milliseconds timeout) = 0;
};

/// Child process speaking over its stdin/stdout.
std::unique_ptr<Transport> spawn_subprocess(const std::vector<std::string>& argv);
/// TCP client connection.
std::unique_ptr<Transport> connect_tcp(const std::string& host, int port);

class ExternalPolicy : public Policy {
 public:
  /// Performs the hello handshake. Throws ProtocolViolation or PolicyTimeout.
  ExternalPolicy(std::unique_ptr<Transport> transport,
                 std::chrono::milliseconds timeout = std::chrono::seconds(30));
  std::string name() const override { return "external"; }
  bool concurrent_safe() const override { return false; }
  /// Re-sends the query once on a malformed reply, then throws ProtocolViolation.
  std::string respond(const PolicyQuery& query) override;

  int protocol_errors() const { return protocol_errors_; }

 private:
  std::unique_ptr<Transport> transport_;
  std::chrono::milliseconds timeout_;
  int protocol_errors_ = 0;
};

std::string encode_query(const PolicyQuery& query);

/// Builds a policy from "oracle", "random", "heuristic", "exec:<command>" or
/// "tcp:<host>:<port>". Throws InvalidConfig.
PolicyFactory make_policy_factory(const std::string& spec, std::chrono::milliseconds timeout = std::chrono::seconds(30));

}  // namespace visor
