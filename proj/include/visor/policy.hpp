#pragma once

#include "visor/types.hpp"
#include "visor/waypoints.hpp"
#include "visor/world.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace visor {

enum class DecisionKind { GoTo, Stop, TurnAround };

struct HighLevelDecision {
  DecisionKind kind = DecisionKind::Stop;
  char label = 0;  ///< only for GoTo

  static HighLevelDecision go_to(char l) { return {DecisionKind::GoTo, l}; }
  static HighLevelDecision stop() { return {DecisionKind::Stop, 0}; }
  static HighLevelDecision turn_around() { return {DecisionKind::TurnAround, 0}; }

  /// Wire form: a single letter, "stop" or "turn_around".
  std::string str() const;
  friend bool operator==(const HighLevelDecision&, const HighLevelDecision&) = default;
};

/// What a policy is allowed to see at one decision.
struct PolicyQuery {
  std::string instruction;
  RgbImage panorama;  ///< 768x256 with label overlays
  RgbImage topdown;   ///< 256x256
  bool stop_allowed = true;
  int decision_index = 0;
  int attempt = 0;  ///< 1 on the retry after a malformed response
};

/// Policies answer with raw tagged text; the harness parses it.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  /// False when respond() must not be called from several threads at once.
  virtual bool concurrent_safe() const { return true; }
  /// Called once per episode before the first query.
  virtual void reset(std::uint64_t /*episode_seed*/) {}
  virtual std::string respond(const PolicyQuery& query) = 0;
};

/// Evaluation-only ground truth, handed to policies that implement
/// PrivilegedPolicy and never placed in a PolicyQuery.
struct PrivilegedInfo {
  const GridWorld* world = nullptr;
  const SceneObject* target = nullptr;
  const WaypointSet* set = nullptr;
  Pose pose;
  std::optional<HighLevelDecision> last_decision;
};

class PrivilegedPolicy {
 public:
  virtual ~PrivilegedPolicy() = default;
  virtual void set_privileged(const PrivilegedInfo& info) = 0;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

/// Transport or protocol failure of a policy; ends the episode as PolicyError.
class PolicyFailure : public Error {
 public:
  using Error::Error;
};

std::string format_response(const std::string& think, const std::string& think_summary, const std::string& action);

}  // namespace visor
