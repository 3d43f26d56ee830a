#pragma once

#include "visor/policy.hpp"
#include "visor/sensors.hpp"
#include "visor/waypoints.hpp"
#include "visor/world.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace visor {

// ---------------------------------------------------------------------------
// Response parsing.

class ParseError : public Error {
 public:
  using Error::Error;
};

class MissingTag : public ParseError {
 public:
  explicit MissingTag(std::string tag) : ParseError("missing <" + tag + "> tag"), tag_(std::move(tag)) {}
  const std::string& tag() const { return tag_; }

 private:
  std::string tag_;
};

class HallucinatedLabel : public ParseError {
 public:
  explicit HallucinatedLabel(char letter)
      : ParseError(std::string("label ") + letter + " is not on the panorama"), letter_(letter) {}
  char letter() const { return letter_; }

 private:
  char letter_;
};

class UnknownAction : public ParseError {
 public:
  explicit UnknownAction(const std::string& text) : ParseError("unknown action: '" + text + "'") {}
};

struct ParsedResponse {
  std::string think;
  std::string think_summary;
  HighLevelDecision action;
};

/// Content of the first <tag>...</tag> pair, or nullopt.
std::optional<std::string> extract_tag(const std::string& text, const std::string& tag);

/// Normalizes an action string ("d", " D. ", "Stop", "turn around") without
/// validating letters against a label set.
HighLevelDecision normalize_action(const std::string& text);

/// Tags may come in any order. Throws MissingTag, HallucinatedLabel or
/// UnknownAction.
ParsedResponse parse_response(const std::string& text, const WaypointSet& set);

// ---------------------------------------------------------------------------
// Episodes.

inline constexpr int kMaxLowLevelSteps = 500;
inline constexpr int kMaxDecisions = 100;

struct EpisodeSpec {
  const GridWorld* world = nullptr;
  Pose start;
  int target_id = -1;
  std::string instruction;
  std::string episode_id;
  int max_low_level_steps = kMaxLowLevelSteps;
  double success_radius = kSuccessRadius;
  int max_decisions = kMaxDecisions;
};

enum class EpisodeMode { Normal, OracleStop };
enum class Termination { StoppedCorrect, StoppedWrong, StepBudget, PolicyError };

const char* to_string(EpisodeMode m);
const char* to_string(Termination t);
EpisodeMode mode_from_string(const std::string& s);
Termination termination_from_string(const std::string& s);

struct DecisionLog {
  int index = 0;
  Pose pose;
  WaypointSet set;
  std::vector<std::string> responses;  ///< raw policy outputs, one per attempt
  std::optional<HighLevelDecision> decision;
  std::string error;  ///< last parse or policy error text
  int steps_before = 0;
  int steps_after = 0;
  RgbImage panorama;  ///< overlaid frame, kept only when requested
  RgbImage topdown;
};

struct EpisodeResult {
  std::string episode_id;
  bool success = false;
  int low_level_steps = 0;
  int forward_steps = 0;
  double path_length = 0.0;    ///< p
  double shortest_path = 0.0;  ///< l, start to target
  double final_geodesic = 0.0;
  Pose final_pose;
  Termination termination = Termination::StepBudget;
  int hallucinations = 0;
  int parse_failures = 0;
  std::vector<DecisionLog> decisions;
};

struct RunOptions {
  WaypointParams waypoint_params;
  bool keep_frames = false;
};

/// Invalid when the world or target is missing, the start is not Free, or
/// the target cannot be reached.
void validate_spec(const EpisodeSpec& spec);

EpisodeResult run_episode(const EpisodeSpec& spec, Policy& policy, EpisodeMode mode, std::uint64_t seed,
                          const RunOptions& options = {});

/// Same decisions, poses and totals; frames and raw text are not compared.
bool same_outcome(const EpisodeResult& a, const EpisodeResult& b);

// ---------------------------------------------------------------------------
// Logs and replay.

inline constexpr int kEpisodeLogVersion = 1;

/// episode.json, decisions.jsonl and, when frames were kept, per-decision PNGs.
void write_episode_log(const std::filesystem::path& dir, const EpisodeSpec& spec, const EpisodeResult& result,
                       EpisodeMode mode, std::uint64_t seed);

struct EpisodeLog {
  GridWorld world;
  Pose start;
  int target_id = -1;
  std::string instruction;
  std::string episode_id;
  int max_low_level_steps = kMaxLowLevelSteps;
  double success_radius = kSuccessRadius;
  int max_decisions = kMaxDecisions;
  EpisodeMode mode = EpisodeMode::Normal;
  std::uint64_t seed = 0;
  nlohmann::json summary;
  std::vector<std::vector<std::string>> responses;  ///< per decision, per attempt
};

EpisodeLog read_episode_log(const std::filesystem::path& dir);
EpisodeSpec spec_from_log(const EpisodeLog& log);

/// Plays back logged responses in order.
class ReplayPolicy : public Policy {
 public:
  explicit ReplayPolicy(std::vector<std::vector<std::string>> responses) : responses_(std::move(responses)) {}
  std::string name() const override { return "replay"; }
  bool concurrent_safe() const override { return false; }
  std::string respond(const PolicyQuery& query) override;

 private:
  std::vector<std::vector<std::string>> responses_;
};

nlohmann::json result_summary(const EpisodeResult& r);

}  // namespace visor
