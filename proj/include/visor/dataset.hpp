#pragma once

#include "visor/episode.hpp"
#include "visor/image_io.hpp"
#include "visor/rng.hpp"
#include "visor/waypoints.hpp"
#include "visor/world.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace visor {

// ---------------------------------------------------------------------------
// Instructions.

class NoAttributes : public Error {
 public:
  using Error::Error;
};

struct Instruction {
  std::string text;
  ObjectDescription mentions;  ///< exactly what the text asserts about the target
};

/// Words and punctuation marks, the unit of instruction length.
std::vector<std::string> tokenize(const std::string& text);

/// Templated sentence naming the category plus at least one intrinsic and,
/// when the object has any, one extrinsic cue. Throws NoAttributes.
Instruction synthesize_instruction(const GridWorld& world, const SceneObject& target, Rng& rng);

/// Noun phrase plus clauses for a description, without opener or closer.
std::string describe_text(const ObjectDescription& mentions);

/// True iff no other object satisfies everything the instruction mentions.
bool filter_unique(const GridWorld& world, const Instruction& instruction, const SceneObject& target);

/// Tries several syntheses and keeps the first unique one.
std::optional<Instruction> unique_instruction(const GridWorld& world, const SceneObject& target, Rng& rng,
                                              int attempts = 12);

// ---------------------------------------------------------------------------
// Benchmark episodes.

struct EpisodeParams {
  double min_geodesic = 2.5;
  double max_geodesic = 10.0;
  WorldConfig world;
};

struct BenchmarkEpisode {
  std::shared_ptr<const GridWorld> world;
  Pose start;
  int target_id = -1;
  Instruction instruction;
  std::string id;
  std::uint64_t seed = 0;

  EpisodeSpec spec() const;
};

/// Disjoint seed streams per split name.
std::uint64_t split_seed(std::uint64_t seed, const std::string& split);

/// One world per episode; starts sampled in clear Free cells at a bounded
/// geodesic distance from a target with a unique instruction.
std::vector<BenchmarkEpisode> generate_episodes(int n, std::uint64_t seed, const std::string& split,
                                                const EpisodeParams& params = {});

nlohmann::json episodes_to_json(const std::vector<BenchmarkEpisode>& episodes);
std::vector<BenchmarkEpisode> episodes_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Corpus records.

struct CandidateInfo {
  char label = '?';
  Vec2 world_pos = Vec2::Zero();
  PixelPos pixel_pos;
  int cluster_size = 0;
  double geodesic_to_target = 0.0;
  friend bool operator==(const CandidateInfo&, const CandidateInfo&) = default;
};

struct Trace {
  std::string think;
  std::string think_summary;
  std::string action;
  friend bool operator==(const Trace&, const Trace&) = default;
};

struct DecisionRecord {
  std::string episode_id;
  int step_index = 0;
  std::uint64_t seed = 0;
  std::string instruction;
  Bytes panorama_png;
  Bytes topdown_png;
  double distance_to_goal = 0.0;
  std::string gt_label;  ///< letter or "stop"
  std::vector<std::string> distractors;
  Trace trace;
  std::vector<CandidateInfo> candidates;
  Pose pose;
  int target_id = -1;
  std::uint64_t world_seed = 0;
  /// Features the toy policy reads, per candidate label in `candidates` order:
  /// target-color evidence and open floor around each label, plus the
  /// apparent range of the nearest target-colored blob.
  std::vector<double> keyword_evidence;
  std::vector<double> open_space;
  double target_range = 0.0;

  bool is_stop() const { return gt_label == "stop"; }
  friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

/// Line form; images are referenced by sidecar path relative to the split dir.
nlohmann::json record_to_json(const DecisionRecord& r);
/// Loads sidecar images from `split_dir` when given.
DecisionRecord record_from_json(const nlohmann::json& doc, const std::filesystem::path& split_dir = {});
std::string image_name(const DecisionRecord& r, const char* kind);

/// Evidence text about what is visible around each label.
struct LabelContext {
  char label = '?';
  double bearing_deg = 0.0;  ///< relative to heading, positive to the left
  double range = 0.0;
  std::vector<std::string> visible;  ///< e.g. "red chair"
};

std::vector<LabelContext> label_contexts(const GridWorld& world, const PanoramicObservation& obs, const Pose& pose,
                                         const WaypointSet& set);

/// Deterministic three-part trace whose action is the ground truth.
Trace synthesize_trace(const SceneObject& target, const WaypointSet& set, const std::vector<LabelContext>& contexts,
                       double distance_to_goal);

struct CorpusOptions {
  EpisodeParams episode;
  WaypointParams waypoints;
  int max_decisions = 60;
  int jobs = 1;
  bool keep_images = true;
};

struct CorpusResult {
  std::vector<DecisionRecord> records;
  int episodes = 0;
  int aborted = 0;
};

/// Shortest-path follower over generated episodes: one record per decision
/// toward the ground-truth waypoint and a final stop record within 1 m.
CorpusResult generate_corpus(int n_episodes, std::uint64_t seed, const std::string& split,
                             const CorpusOptions& options = {});

/// corpus/<split>/records.jsonl plus img/ sidecars.
void write_corpus(const std::filesystem::path& root, const std::string& split, const std::vector<DecisionRecord>& records);
std::vector<DecisionRecord> read_corpus(const std::filesystem::path& root, const std::string& split,
                                        bool load_images = false);

class NoStopRecords : public Error {
 public:
  using Error::Error;
};

/// All stop records plus an equal-size uniform sample of non-stop records,
/// in original order.
std::vector<DecisionRecord> balance_rl(const std::vector<DecisionRecord>& records, std::uint64_t seed);

struct CorpusStats {
  std::string split;
  int samples = 0;
  int stop_actions = 0;
  int non_stop_actions = 0;
  double avg_action_space_size = 0.0;
  int episodes = 0;
  int max_stops_per_episode = 0;
  double mean_instruction_tokens = 0.0;
};

CorpusStats corpus_stats(const std::string& split, const std::vector<DecisionRecord>& records);
std::string stats_table(const std::vector<CorpusStats>& rows);

}  // namespace visor
