#include "visor/episode.hpp"

#include "visor/image_io.hpp"
#include "visor/rng.hpp"
#include "visor/world_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace visor {

using nlohmann::json;

std::string HighLevelDecision::str() const {
  switch (kind) {
    case DecisionKind::GoTo: return std::string(1, label);
    case DecisionKind::Stop: return "stop";
    case DecisionKind::TurnAround: return "turn_around";
  }
  return "";
}

std::string format_response(const std::string& think, const std::string& think_summary, const std::string& action) {
  return "<think>" + think + "</think>\n<think_summary>" + think_summary + "</think_summary>\n<action>" + action +
         "</action>";
}

std::optional<std::string> extract_tag(const std::string& text, const std::string& tag) {
  const std::string open = "<" + tag + ">";
  const std::string close = "</" + tag + ">";
  const auto a = text.find(open);
  if (a == std::string::npos) return std::nullopt;
  const auto b = text.find(close, a + open.size());
  if (b == std::string::npos) return std::nullopt;
  return text.substr(a + open.size(), b - a - open.size());
}

HighLevelDecision normalize_action(const std::string& text) {
  std::string s;
  for (char ch : text) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalpha(u)) {
      s += static_cast<char>(std::tolower(u));
    } else if (ch == '_' || std::isspace(u) || ch == '-') {
      if (!s.empty() && s.back() != ' ') s += ' ';
    }
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();
  if (s == "stop") return HighLevelDecision::stop();
  if (s == "turn around" || s == "turnaround") return HighLevelDecision::turn_around();
  if (s.size() == 1) return HighLevelDecision::go_to(static_cast<char>(std::toupper(static_cast<unsigned char>(s[0]))));
  for (const char* prefix : {"go to ", "goto ", "label "}) {
    const std::string p(prefix);
    if (s.size() == p.size() + 1 && s.compare(0, p.size(), p) == 0) {
      return HighLevelDecision::go_to(static_cast<char>(std::toupper(static_cast<unsigned char>(s.back()))));
    }
  }
  throw UnknownAction(text);
}

ParsedResponse parse_response(const std::string& text, const WaypointSet& set) {
  ParsedResponse out;
  auto think = extract_tag(text, "think");
  auto summary = extract_tag(text, "think_summary");
  auto action = extract_tag(text, "action");
  if (!think) throw MissingTag("think");
  if (!summary) throw MissingTag("think_summary");
  if (!action) throw MissingTag("action");
  out.think = *think;
  out.think_summary = *summary;
  out.action = normalize_action(*action);
  if (out.action.kind == DecisionKind::GoTo && set.find(out.action.label) == nullptr) {
    throw HallucinatedLabel(out.action.label);
  }
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(EpisodeMode m) { return m == EpisodeMode::Normal ? "normal" : "oracle-stop"; }

const char* to_string(Termination t) {
  switch (t) {
    case Termination::StoppedCorrect: return "stopped_correct";
    case Termination::StoppedWrong: return "stopped_wrong";
    case Termination::StepBudget: return "step_budget";
    case Termination::PolicyError: return "policy_error";
  }
  return "?";
}

EpisodeMode mode_from_string(const std::string& s) {
  if (s == "normal") return EpisodeMode::Normal;
  if (s == "oracle-stop" || s == "oracle_stop" || s == "os") return EpisodeMode::OracleStop;
  throw InvalidConfig("unknown mode: " + s);
}

Termination termination_from_string(const std::string& s) {
  for (auto t : {Termination::StoppedCorrect, Termination::StoppedWrong, Termination::StepBudget,
                 Termination::PolicyError}) {
    if (s == to_string(t)) return t;
  }
  throw Error("unknown termination: " + s);
}

void validate_spec(const EpisodeSpec& spec) {
  if (spec.world == nullptr) throw InvalidConfig("episode has no world");
  const SceneObject* target = spec.world->object(spec.target_id);
  if (target == nullptr) throw InvalidConfig("episode target id not in world");
  const Vec2 s = spec.start.position();
  if (!spec.world->contains(s) || !spec.world->is_free(spec.world->cell_of(s))) {
    throw InvalidConfig("episode start is not in a Free cell");
  }
  const auto l = geodesic_distance(*spec.world, s, target->anchor);
  if (!l) throw InvalidConfig("episode target unreachable from start");
  if (*l <= 0.0) throw InvalidConfig("episode start coincides with target");
  if (spec.max_low_level_steps <= 0 || spec.max_decisions <= 0) throw InvalidConfig("episode budgets must be positive");
}

namespace {

class EpisodeRunner {
 public:
  EpisodeRunner(const EpisodeSpec& spec, Policy& policy, EpisodeMode mode, std::uint64_t seed,
                const RunOptions& options)
      : spec_(spec),
        world_(*spec.world),
        target_(*spec.world->object(spec.target_id)),
        policy_(policy),
        privileged_(dynamic_cast<PrivilegedPolicy*>(&policy)),
        mode_(mode),
        seed_(seed),
        options_(options),
        field_(geodesic_field(world_, target_.anchor)),
        map_(world_),
        pose_(spec.start) {}

  EpisodeResult run() {
    result_.episode_id = spec_.episode_id;
    result_.shortest_path = geodesic(spec_.start);
    policy_.reset(derive_seed(seed_, 0x5EED));
    std::optional<HighLevelDecision> last;
    bool done = false;
    for (int d = 0; d < spec_.max_decisions && !done; ++d) {
      DecisionLog log;
      log.index = d;
      log.pose = pose_;
      log.steps_before = result_.low_level_steps;

      const PanoramicObservation obs = render_panorama(world_, pose_);
      map_.update(obs, pose_);
      log.set = make_set(obs, d);
      PolicyQuery query;
      query.instruction = spec_.instruction;
      query.panorama = overlay_labels(obs, log.set).color;
      query.topdown = map_.render();
      query.decision_index = d;
      if (privileged_ != nullptr) privileged_->set_privileged({&world_, &target_, &log.set, pose_, last});

      const std::optional<HighLevelDecision> decision = ask(query, log);
      if (options_.keep_frames) {
        log.panorama = query.panorama;
        log.topdown = query.topdown;
      }
      if (!decision) {
        result_.termination = Termination::PolicyError;
        log.steps_after = result_.low_level_steps;
        result_.decisions.push_back(std::move(log));
        done = true;
        break;
      }
      log.decision = decision;
      last = decision;
      switch (decision->kind) {
        case DecisionKind::Stop:
          result_.success = geodesic(pose_) < spec_.success_radius;
          result_.termination = result_.success ? Termination::StoppedCorrect : Termination::StoppedWrong;
          done = true;
          break;
        case DecisionKind::TurnAround:
          for (int k = 0; k < kTurnAroundSteps && !done; ++k) done = step(LowLevelAction::TurnLeft);
          break;
        case DecisionKind::GoTo: {
          const WaypointCandidate* c = log.set.find(decision->label);
          std::vector<LowLevelAction> actions;
          try {
            actions = plan_to_actions(world_, pose_, c->world_pos);
          } catch (const Unreachable& e) {
            spdlog::warn("episode {}: waypoint {} unreachable: {}", spec_.episode_id, decision->label, e.what());
          }
          for (std::size_t k = 0; k < actions.size() && !done; ++k) done = step(actions[k]);
          break;
        }
      }
      log.steps_after = result_.low_level_steps;
      result_.decisions.push_back(std::move(log));
    }
    if (!done) result_.termination = Termination::StepBudget;
    result_.final_pose = pose_;
    result_.final_geodesic = geodesic(pose_);
    result_.path_length = kForwardStep * result_.forward_steps;
    return result_;
  }

 private:
  double geodesic(const Pose& p) const { return field_.at(world_.cell_of(p.position())); }

  WaypointSet make_set(const PanoramicObservation& obs, int d) const {
    const std::uint64_t label_seed = derive_seed(seed_, static_cast<std::uint64_t>(d) + 1);
    try {
      return build_waypoint_set(world_, pose_, obs, target_, label_seed, options_.waypoint_params, &field_);
    } catch (const NoCandidates&) {
      WaypointSet empty;
      empty.rng_seed = label_seed;
      empty.agent_geodesic = geodesic(pose_);
      empty.stop_correct = empty.agent_geodesic < kSuccessRadius;
      return empty;
    }
  }

  /// One query plus one retry on malformed output.
  std::optional<HighLevelDecision> ask(PolicyQuery& query, DecisionLog& log) {
    for (int attempt = 0; attempt < 2; ++attempt) {
      query.attempt = attempt;
      try {
        log.responses.push_back(policy_.respond(query));
        return parse_response(log.responses.back(), log.set).action;
      } catch (const HallucinatedLabel& e) {
        ++result_.hallucinations;
        ++result_.parse_failures;
        log.error = e.what();
      } catch (const ParseError& e) {
        ++result_.parse_failures;
        log.error = e.what();
      } catch (const PolicyFailure& e) {
        log.error = e.what();
        spdlog::warn("episode {}: policy failure: {}", spec_.episode_id, e.what());
        return std::nullopt;
      }
      spdlog::debug("episode {} decision {}: {}", spec_.episode_id, log.index, log.error);
    }
    return std::nullopt;
  }

  /// Executes one low-level action; true when the episode ends.
  bool step(LowLevelAction a) {
    bool blocked = false;
    pose_ = apply_action(world_, pose_, a, &blocked);
    ++result_.low_level_steps;
    if (a == LowLevelAction::Forward && !blocked) ++result_.forward_steps;
    if (mode_ == EpisodeMode::OracleStop && geodesic(pose_) < spec_.success_radius) {
      result_.success = true;
      result_.termination = Termination::StoppedCorrect;
      return true;
    }
    if (result_.low_level_steps >= spec_.max_low_level_steps) {
      result_.termination = Termination::StepBudget;
      return true;
    }
    return false;
  }

  const EpisodeSpec& spec_;
  const GridWorld& world_;
  const SceneObject& target_;
  Policy& policy_;
  PrivilegedPolicy* privileged_;
  EpisodeMode mode_;
  std::uint64_t seed_;
  RunOptions options_;
  DistanceField field_;
  TopDownMap map_;
  Pose pose_;
  EpisodeResult result_;
};

}  // namespace

EpisodeResult run_episode(const EpisodeSpec& spec, Policy& policy, EpisodeMode mode, std::uint64_t seed,
                          const RunOptions& options) {
  validate_spec(spec);
  return EpisodeRunner(spec, policy, mode, seed, options).run();
}

bool same_outcome(const EpisodeResult& a, const EpisodeResult& b) {
  if (a.success != b.success || a.low_level_steps != b.low_level_steps || a.forward_steps != b.forward_steps ||
      a.path_length != b.path_length || a.shortest_path != b.shortest_path || a.termination != b.termination ||
      !(a.final_pose == b.final_pose) || a.decisions.size() != b.decisions.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.decisions.size(); ++i) {
    const auto& x = a.decisions[i];
    const auto& y = b.decisions[i];
    if (!(x.pose == y.pose) || x.decision != y.decision || x.steps_after != y.steps_after ||
        x.set.labels() != y.set.labels() || x.set.gt() != y.set.gt()) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

json result_summary(const EpisodeResult& r) {
  return {{"episode_id", r.episode_id},
          {"success", r.success},
          {"termination", to_string(r.termination)},
          {"low_level_steps", r.low_level_steps},
          {"forward_steps", r.forward_steps},
          {"path_length", r.path_length},
          {"shortest_path", r.shortest_path},
          {"final_geodesic", r.final_geodesic},
          {"final_pose", pose_to_json(r.final_pose)},
          {"decisions", r.decisions.size()},
          {"hallucinations", r.hallucinations},
          {"parse_failures", r.parse_failures}};
}

namespace {

json set_to_json(const WaypointSet& set) {
  json cands = json::array();
  for (const auto& c : set.candidates) {
    cands.push_back({{"label", std::string(1, c.label)},
                     {"world", {c.world_pos.x(), c.world_pos.y()}},
                     {"pixel", {c.pixel_pos.row, c.pixel_pos.col}},
                     {"cluster_size", c.cluster_size},
                     {"geodesic_to_target", c.geodesic_to_target}});
  }
  return {{"candidates", cands}, {"gt", set.gt()}, {"agent_geodesic", set.agent_geodesic}, {"rng_seed", set.rng_seed}};
}

std::string frame_name(int index, const char* kind) {
  std::ostringstream s;
  s << std::setw(3) << std::setfill('0') << index << "_" << kind << ".png";
  return s.str();
}

}  // namespace

void write_episode_log(const std::filesystem::path& dir, const EpisodeSpec& spec, const EpisodeResult& result,
                       EpisodeMode mode, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  json meta = {{"version", kEpisodeLogVersion},
               {"episode_id", spec.episode_id},
               {"seed", seed},
               {"mode", to_string(mode)},
               {"start", pose_to_json(spec.start)},
               {"target_id", spec.target_id},
               {"instruction", spec.instruction},
               {"max_low_level_steps", spec.max_low_level_steps},
               {"success_radius", spec.success_radius},
               {"max_decisions", spec.max_decisions},
               {"world", world_to_json(*spec.world)},
               {"result", result_summary(result)}};
  write_text(dir / "episode.json", meta.dump(1) + "\n");

  std::string lines;
  for (const auto& d : result.decisions) {
    json line = {{"index", d.index},
                 {"pose", pose_to_json(d.pose)},
                 {"waypoints", set_to_json(d.set)},
                 {"responses", d.responses},
                 {"decision", d.decision ? json(d.decision->str()) : json(nullptr)},
                 {"error", d.error},
                 {"steps_before", d.steps_before},
                 {"steps_after", d.steps_after}};
    lines += line.dump() + "\n";
    if (d.panorama.width() > 0) write_file(dir / frame_name(d.index, "pano"), encode_png(d.panorama));
    if (d.topdown.width() > 0) write_file(dir / frame_name(d.index, "topdown"), encode_png(d.topdown));
  }
  write_text(dir / "decisions.jsonl", lines);
}

EpisodeLog read_episode_log(const std::filesystem::path& dir) {
  const json meta = json::parse(read_text(dir / "episode.json"));
  if (meta.at("version").get<int>() != kEpisodeLogVersion) throw Error("unsupported episode log version");
  EpisodeLog log;
  log.world = world_from_json(meta.at("world"));
  log.start = pose_from_json(meta.at("start"));
  log.target_id = meta.at("target_id").get<int>();
  log.instruction = meta.at("instruction").get<std::string>();
  log.episode_id = meta.at("episode_id").get<std::string>();
  log.max_low_level_steps = meta.at("max_low_level_steps").get<int>();
  log.success_radius = meta.at("success_radius").get<double>();
  log.max_decisions = meta.at("max_decisions").get<int>();
  log.mode = mode_from_string(meta.at("mode").get<std::string>());
  log.seed = meta.at("seed").get<std::uint64_t>();
  log.summary = meta.at("result");
  std::istringstream in(read_text(dir / "decisions.jsonl"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    log.responses.push_back(json::parse(line).at("responses").get<std::vector<std::string>>());
  }
  return log;
}

EpisodeSpec spec_from_log(const EpisodeLog& log) {
  EpisodeSpec spec;
  spec.world = &log.world;
  spec.start = log.start;
  spec.target_id = log.target_id;
  spec.instruction = log.instruction;
  spec.episode_id = log.episode_id;
  spec.max_low_level_steps = log.max_low_level_steps;
  spec.success_radius = log.success_radius;
  spec.max_decisions = log.max_decisions;
  return spec;
}

std::string ReplayPolicy::respond(const PolicyQuery& query) {
  const auto d = static_cast<std::size_t>(query.decision_index);
  const auto a = static_cast<std::size_t>(query.attempt);
  if (d >= responses_.size() || a >= responses_[d].size()) throw PolicyFailure("replay log exhausted");
  return responses_[d][a];
}

}  // namespace visor
