#include "visor/dataset.hpp"

#include "visor/policies.hpp"
#include "visor/world_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

namespace visor {

using nlohmann::json;

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char ch : text) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u) || ch == '\'') {
      word += ch;
    } else {
      flush();
      if (std::ispunct(u)) out.emplace_back(1, ch);
    }
  }
  flush();
  return out;
}

namespace {

std::string relation_clause(RelationKind kind, const std::string& subject) {
  switch (kind) {
    case RelationKind::In: return "in a " + subject;
    case RelationKind::Near: return "near the " + subject;
    case RelationKind::LeftOf: return "to the left of the " + subject;
    case RelationKind::RightOf: return "to the right of the " + subject;
  }
  return "";
}

constexpr std::array<const char*, 10> kOpeners{
    "Find the",
    "Go to the",
    "Navigate to the",
    "Please walk over to the",
    "I need you to find the",
    "Head over to the",
    "Can you take me to the",
    "Search the house for the",
    "Move toward the",
    "Locate the",
};

constexpr std::array<const char*, 6> kClosers{
    ".",
    ", then stop next to it.",
    ", and stop once you are close to it.",
    ". Stop when you reach it.",
    " and wait beside it.",
    ", and come to a halt within reach of it.",
};

}  // namespace

std::string describe_text(const ObjectDescription& m) {
  std::string np;
  if (!m.intrinsic.color.empty()) np += m.intrinsic.color + " ";
  if (!m.intrinsic.material.empty()) np += m.intrinsic.material + " ";
  np += m.category;
  if (!m.intrinsic.on_top.empty()) np += " with " + m.intrinsic.on_top + " on top of it";
  for (std::size_t i = 0; i < m.relations.size(); ++i) {
    np += (i == 0 ? ", " : (i + 1 == m.relations.size() ? " and " : ", "));
    np += relation_clause(m.relations[i].first, m.relations[i].second);
  }
  return np;
}

Instruction synthesize_instruction(const GridWorld& /*world*/, const SceneObject& target, Rng& rng) {
  const Attributes& a = target.intrinsic;
  if (a.color.empty() && a.material.empty() && a.on_top.empty() && target.extrinsic.empty()) {
    throw NoAttributes("object " + std::to_string(target.id) + " has no attributes or relations");
  }
  ObjectDescription m;
  m.category = target.category;
  m.intrinsic.color = a.color;
  if (!a.material.empty() && (a.color.empty() || rng.bernoulli(0.6))) m.intrinsic.material = a.material;
  if (!a.on_top.empty() && rng.bernoulli(0.7)) m.intrinsic.on_top = a.on_top;
  if (m.intrinsic.color.empty() && m.intrinsic.material.empty()) m.intrinsic.on_top = a.on_top;

  std::vector<std::pair<RelationKind, std::string>> in_rel, obj_rel;
  for (const auto& r : target.extrinsic) {
    auto pair = std::make_pair(r.kind, r.subject);
    auto& bucket = r.kind == RelationKind::In ? in_rel : obj_rel;
    if (std::find(bucket.begin(), bucket.end(), pair) == bucket.end()) bucket.push_back(pair);
  }
  rng.shuffle(std::span(obj_rel));
  const int n_obj = obj_rel.empty() ? 0 : rng.uniform_int(0, std::min<int>(2, static_cast<int>(obj_rel.size())));
  for (int i = 0; i < n_obj; ++i) m.relations.push_back(obj_rel[i]);
  if (!in_rel.empty() && (m.relations.empty() || rng.bernoulli(0.75))) m.relations.push_back(in_rel.front());
  if (m.relations.empty() && !obj_rel.empty()) m.relations.push_back(obj_rel.front());

  Instruction ins;
  ins.mentions = m;
  ins.text = std::string(kOpeners[rng.uniform_int(0, kOpeners.size() - 1)]) + " " + describe_text(m) +
             kClosers[rng.uniform_int(0, kClosers.size() - 1)];
  return ins;
}

bool filter_unique(const GridWorld& world, const Instruction& instruction, const SceneObject& target) {
  if (!matches(world, target, instruction.mentions)) return false;
  for (const auto& other : world.objects()) {
    if (other.id != target.id && matches(world, other, instruction.mentions)) return false;
  }
  return true;
}

std::optional<Instruction> unique_instruction(const GridWorld& world, const SceneObject& target, Rng& rng,
                                              int attempts) {
  for (int i = 0; i < attempts; ++i) {
    Instruction ins = synthesize_instruction(world, target, rng);
    if (filter_unique(world, ins, target)) return ins;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

EpisodeSpec BenchmarkEpisode::spec() const {
  EpisodeSpec s;
  s.world = world.get();
  s.start = start;
  s.target_id = target_id;
  s.instruction = instruction.text;
  s.episode_id = id;
  return s;
}

std::uint64_t split_seed(std::uint64_t seed, const std::string& split) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : split) h = (h ^ c) * 1099511628211ull;
  return derive_seed(seed, h);
}

namespace {

std::optional<BenchmarkEpisode> try_episode(std::uint64_t ep_seed, const EpisodeParams& params) {
  auto world = std::make_shared<const GridWorld>(generate_world(ep_seed, params.world));
  Rng rng(derive_seed(ep_seed, 0xE9));
  std::vector<int> order(world->objects().size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));
  for (int idx : order) {
    const SceneObject& target = world->objects()[idx];
    auto ins = unique_instruction(*world, target, rng);
    if (!ins) continue;
    const DistanceField field = geodesic_field(*world, target.anchor);
    std::vector<CellIndex> starts;
    for (int y = 0; y < world->height(); ++y) {
      for (int x = 0; x < world->width(); ++x) {
        const CellIndex c{x, y};
        if (!world->is_free(c) || obstacle_clearance(*world, world->center(c)) < 0.25) continue;
        const double d = field.at(c);
        if (d >= params.min_geodesic && d <= params.max_geodesic) starts.push_back(c);
      }
    }
    if (starts.empty()) continue;
    const CellIndex s = starts[rng.uniform_int(0, static_cast<int>(starts.size()) - 1)];
    BenchmarkEpisode ep;
    ep.world = world;
    ep.start = {world->center(s).x(), world->center(s).y(), deg2rad(kTurnStepDeg * rng.uniform_int(0, 23))};
    ep.target_id = target.id;
    ep.instruction = *ins;
    ep.seed = ep_seed;
    return ep;
  }
  return std::nullopt;
}

}  // namespace

std::vector<BenchmarkEpisode> generate_episodes(int n, std::uint64_t seed, const std::string& split,
                                                const EpisodeParams& params) {
  if (n < 1) throw InvalidConfig("need at least one episode");
  const std::uint64_t base = split_seed(seed, split);
  std::vector<BenchmarkEpisode> out;
  for (int i = 0; i < n; ++i) {
    std::optional<BenchmarkEpisode> ep;
    for (std::uint64_t attempt = 0; attempt < 16 && !ep; ++attempt) {
      ep = try_episode(derive_seed(derive_seed(base, static_cast<std::uint64_t>(i)), attempt), params);
    }
    if (!ep) throw GenerationFailed("could not build episode " + std::to_string(i) + " of split " + split);
    std::ostringstream id;
    id << split << "_" << std::setw(4) << std::setfill('0') << i;
    ep->id = id.str();
    out.push_back(std::move(*ep));
  }
  return out;
}

namespace {

json description_to_json(const ObjectDescription& d) {
  json rels = json::array();
  for (const auto& [k, s] : d.relations) rels.push_back({to_string(k), s});
  return {{"category", d.category},
          {"color", d.intrinsic.color},
          {"material", d.intrinsic.material},
          {"on_top", d.intrinsic.on_top},
          {"relations", rels}};
}

ObjectDescription description_from_json(const json& j) {
  ObjectDescription d;
  d.category = j.at("category").get<std::string>();
  d.intrinsic.color = j.at("color").get<std::string>();
  d.intrinsic.material = j.at("material").get<std::string>();
  d.intrinsic.on_top = j.at("on_top").get<std::string>();
  for (const auto& r : j.at("relations")) {
    d.relations.emplace_back(relation_from_string(r.at(0).get<std::string>()), r.at(1).get<std::string>());
  }
  return d;
}

}  // namespace

json episodes_to_json(const std::vector<BenchmarkEpisode>& episodes) {
  json eps = json::array();
  for (const auto& e : episodes) {
    eps.push_back({{"id", e.id},
                   {"seed", e.seed},
                   {"start", pose_to_json(e.start)},
                   {"target_id", e.target_id},
                   {"instruction", e.instruction.text},
                   {"mentions", description_to_json(e.instruction.mentions)},
                   {"world", world_to_json(*e.world)}});
  }
  return {{"version", 1}, {"episodes", eps}};
}

std::vector<BenchmarkEpisode> episodes_from_json(const json& doc) {
  if (doc.at("version").get<int>() != 1) throw Error("unsupported episode set version");
  std::vector<BenchmarkEpisode> out;
  for (const auto& e : doc.at("episodes")) {
    BenchmarkEpisode ep;
    ep.id = e.at("id").get<std::string>();
    ep.seed = e.at("seed").get<std::uint64_t>();
    ep.start = pose_from_json(e.at("start"));
    ep.target_id = e.at("target_id").get<int>();
    ep.instruction.text = e.at("instruction").get<std::string>();
    ep.instruction.mentions = description_from_json(e.at("mentions"));
    ep.world = std::make_shared<const GridWorld>(world_from_json(e.at("world")));
    out.push_back(std::move(ep));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Records.

std::string image_name(const DecisionRecord& r, const char* kind) {
  std::ostringstream s;
  s << "img/" << r.episode_id << "_" << std::setw(3) << std::setfill('0') << r.step_index << "_" << kind << ".png";
  return s.str();
}

json record_to_json(const DecisionRecord& r) {
  json cands = json::array();
  for (const auto& c : r.candidates) {
    cands.push_back({{"label", std::string(1, c.label)},
                     {"world", {c.world_pos.x(), c.world_pos.y()}},
                     {"pixel", {c.pixel_pos.row, c.pixel_pos.col}},
                     {"cluster_size", c.cluster_size},
                     {"geodesic_to_target", c.geodesic_to_target}});
  }
  return {{"episode_id", r.episode_id},
          {"step_index", r.step_index},
          {"seed", r.seed},
          {"instruction", r.instruction},
          {"panorama", image_name(r, "pano")},
          {"topdown", image_name(r, "topdown")},
          {"distance_to_goal", r.distance_to_goal},
          {"gt_label", r.gt_label},
          {"distractors", r.distractors},
          {"trace", {{"think", r.trace.think}, {"think_summary", r.trace.think_summary}, {"action", r.trace.action}}},
          {"candidates", cands},
          {"pose", pose_to_json(r.pose)},
          {"target_id", r.target_id},
          {"world_seed", r.world_seed},
          {"keyword_evidence", r.keyword_evidence},
          {"open_space", r.open_space},
          {"target_range", std::isfinite(r.target_range) ? json(r.target_range) : json(nullptr)}};
}

DecisionRecord record_from_json(const json& j, const std::filesystem::path& split_dir) {
  DecisionRecord r;
  r.episode_id = j.at("episode_id").get<std::string>();
  r.step_index = j.at("step_index").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.instruction = j.at("instruction").get<std::string>();
  r.distance_to_goal = j.at("distance_to_goal").get<double>();
  r.gt_label = j.at("gt_label").get<std::string>();
  r.distractors = j.at("distractors").get<std::vector<std::string>>();
  const auto& t = j.at("trace");
  r.trace = {t.at("think").get<std::string>(), t.at("think_summary").get<std::string>(),
             t.at("action").get<std::string>()};
  for (const auto& c : j.at("candidates")) {
    CandidateInfo ci;
    ci.label = c.at("label").get<std::string>().at(0);
    ci.world_pos = {c.at("world").at(0).get<double>(), c.at("world").at(1).get<double>()};
    ci.pixel_pos = {c.at("pixel").at(0).get<int>(), c.at("pixel").at(1).get<int>()};
    ci.cluster_size = c.at("cluster_size").get<int>();
    ci.geodesic_to_target = c.at("geodesic_to_target").get<double>();
    r.candidates.push_back(ci);
  }
  r.pose = pose_from_json(j.at("pose"));
  r.target_id = j.at("target_id").get<int>();
  r.world_seed = j.at("world_seed").get<std::uint64_t>();
  r.keyword_evidence = j.at("keyword_evidence").get<std::vector<double>>();
  r.open_space = j.at("open_space").get<std::vector<double>>();
  r.target_range = j.at("target_range").is_null() ? std::numeric_limits<double>::infinity()
                                                  : j.at("target_range").get<double>();
  if (!split_dir.empty()) {
    r.panorama_png = read_file(split_dir / j.at("panorama").get<std::string>());
    r.topdown_png = read_file(split_dir / j.at("topdown").get<std::string>());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Traces.

std::vector<LabelContext> label_contexts(const GridWorld& world, const PanoramicObservation& obs, const Pose& pose,
                                         const WaypointSet& set) {
  std::vector<LabelContext> out;
  for (const auto& c : set.candidates) {
    LabelContext ctx;
    ctx.label = c.label;
    ctx.bearing_deg = (camera_offset(c.pixel_pos.col) + column_angle(c.pixel_pos.col)) * 180.0 / kPi;
    ctx.range = (c.world_pos - pose.position()).norm();
    // Objects seen in nearby columns, closest column first.
    for (int off = 0; off <= 32 && ctx.visible.size() < 2; ++off) {
      for (int col : {c.pixel_pos.col - off, c.pixel_pos.col + off}) {
        if (col < 0 || col >= kPanoramaWidth || obs.hit_object[col] < 0) continue;
        if (obs.wall_depth[col] > obs.max_depth) continue;
        const SceneObject* o = world.object(obs.hit_object[col]);
        const std::string name = o->intrinsic.color + " " + o->category;
        if (std::find(ctx.visible.begin(), ctx.visible.end(), name) == ctx.visible.end() && ctx.visible.size() < 2) {
          ctx.visible.push_back(name);
        }
      }
    }
    out.push_back(ctx);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.label < b.label; });
  return out;
}

namespace {

std::string direction_words(double deg) {
  const double a = std::abs(deg);
  const char* side = deg > 0 ? "left" : "right";
  if (a < 20.0) return "straight ahead";
  if (a < 70.0) return std::string("ahead to the ") + side;
  if (a < 110.0) return std::string("to the ") + side;
  return std::string("behind on the ") + side;
}

std::string meters(double d) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << d;
  return s.str();
}

}  // namespace

Trace synthesize_trace(const SceneObject& target, const WaypointSet& set, const std::vector<LabelContext>& contexts,
                       double distance_to_goal) {
  const std::string goal = target.intrinsic.color + " " + target.category;
  Trace t;
  if (set.stop_correct) {
    t.think = "The goal is the " + goal + ". It is only about " + meters(distance_to_goal) +
              " m away, which is within reach, so there is no need to move to another waypoint.";
    t.think_summary = "The " + goal + " is within 1 m, so I stop here.";
    t.action = "stop";
    return t;
  }
  std::ostringstream think;
  think << "The goal is the " << goal << ".";
  std::string cue;
  for (const auto& ctx : contexts) {
    think << " Label " << ctx.label << " is " << direction_words(ctx.bearing_deg) << ", about " << meters(ctx.range)
          << " m away";
    if (!ctx.visible.empty()) {
      think << ", with the ";
      for (std::size_t i = 0; i < ctx.visible.size(); ++i) think << (i ? " and the " : "") << ctx.visible[i];
      think << " in view";
    } else {
      think << ", facing open floor";
    }
    if (ctx.label == set.best_label) {
      const bool sees_goal = std::find(ctx.visible.begin(), ctx.visible.end(), goal) != ctx.visible.end();
      cue = sees_goal ? "the " + goal + " is visible beyond it" : "it lies on the shortest route toward the " + goal;
      think << ", and " << cue;
    }
    think << ".";
  }
  t.think = think.str();
  t.think_summary = std::string("Label ") + set.best_label + " is the best choice because " + cue + ".";
  t.action = std::string(1, set.best_label);
  return t;
}

// ---------------------------------------------------------------------------
// Corpus generation.

namespace {

struct EpisodeOutcome {
  std::vector<DecisionRecord> records;
  bool aborted = false;
};

EpisodeOutcome follow_episode(const BenchmarkEpisode& ep, const CorpusOptions& options) {
  const GridWorld& world = *ep.world;
  const SceneObject& target = *world.object(ep.target_id);
  const DistanceField field = geodesic_field(world, target.anchor);
  TopDownMap map(world);
  Pose pose = ep.start;
  EpisodeOutcome out;
  bool turned = false;
  int empty_views = 0;
  int step = 0;
  auto turn_around = [&] {
    for (int k = 0; k < kTurnAroundSteps; ++k) pose = apply_action(world, pose, LowLevelAction::TurnLeft);
  };
  for (int d = 0; d < options.max_decisions; ++d) {
    const PanoramicObservation obs = render_panorama(world, pose);
    map.update(obs, pose);
    const double dist = field.at(world.cell_of(pose.position()));
    WaypointSet set;
    const std::uint64_t label_seed = derive_seed(ep.seed, 1000 + static_cast<std::uint64_t>(d));
    try {
      set = build_waypoint_set(world, pose, obs, target, label_seed, options.waypoints, &field);
    } catch (const NoCandidates&) {
      set.rng_seed = label_seed;
      set.agent_geodesic = dist;
      set.stop_correct = dist < kSuccessRadius;
      if (!set.stop_correct) {
        if (++empty_views > 2) break;
        turn_around();
        turned = true;
        continue;
      }
    }
    const WaypointCandidate* best = set.best_label ? set.find(set.best_label) : nullptr;
    const bool improves = best != nullptr && best->geodesic_to_target < dist - 1e-9;
    if (!set.stop_correct && !improves) {
      if (!turned) {
        turn_around();
        turned = true;
        continue;
      }
      // Nothing better in either direction: move on without recording.
      if (best != nullptr) {
        try {
          for (auto a : plan_to_actions(world, pose, best->world_pos)) pose = apply_action(world, pose, a);
        } catch (const Unreachable&) {
          break;
        }
      }
      turned = false;
      continue;
    }
    turned = false;

    DecisionRecord r;
    r.episode_id = ep.id;
    r.step_index = step++;
    r.seed = set.rng_seed;
    r.instruction = ep.instruction.text;
    r.distance_to_goal = dist;
    r.gt_label = set.gt();
    for (const auto& c : set.candidates) {
      if (std::string(1, c.label) != r.gt_label) r.distractors.emplace_back(1, c.label);
      r.candidates.push_back({c.label, c.world_pos, c.pixel_pos, c.cluster_size, c.geodesic_to_target});
    }
    r.trace = synthesize_trace(target, set, label_contexts(world, obs, pose, set), dist);
    r.pose = pose;
    r.target_id = target.id;
    r.world_seed = world.seed();

    PolicyQuery q;
    q.instruction = r.instruction;
    q.panorama = overlay_labels(obs, set).color;
    q.topdown = map.render();
    const SceneEvidence ev = analyze_query(q);
    for (const auto& c : set.candidates) {
      double kw = 0.0, open = 0.0;
      for (const auto& l : ev.labels) {
        if (l.letter == c.label) {
          kw = l.keyword;
          open = l.open;
        }
      }
      r.keyword_evidence.push_back(kw);
      r.open_space.push_back(open);
    }
    r.target_range = ev.target_range;
    if (options.keep_images) {
      r.panorama_png = encode_png(q.panorama);
      r.topdown_png = encode_png(q.topdown);
    }
    out.records.push_back(std::move(r));
    if (set.stop_correct) return out;

    try {
      for (auto a : plan_to_actions(world, pose, best->world_pos)) pose = apply_action(world, pose, a);
    } catch (const Unreachable& e) {
      spdlog::warn("corpus episode {}: {}", ep.id, e.what());
      break;
    }
  }
  out.aborted = true;
  return out;
}

}  // namespace

CorpusResult generate_corpus(int n_episodes, std::uint64_t seed, const std::string& split,
                             const CorpusOptions& options) {
  const auto episodes = generate_episodes(n_episodes, seed, split, options.episode);
  std::vector<EpisodeOutcome> outcomes(episodes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < episodes.size(); i = next++) outcomes[i] = follow_episode(episodes[i], options);
  };
  const int jobs = std::max(1, options.jobs);
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  CorpusResult result;
  result.episodes = n_episodes;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].aborted) {
      ++result.aborted;
      spdlog::info("corpus episode {} aborted, skipped", episodes[i].id);
      continue;
    }
    for (auto& r : outcomes[i].records) result.records.push_back(std::move(r));
  }
  return result;
}

void write_corpus(const std::filesystem::path& root, const std::string& split, const std::vector<DecisionRecord>& records) {
  const auto dir = root / split;
  std::filesystem::create_directories(dir / "img");
  std::string lines;
  for (const auto& r : records) {
    lines += record_to_json(r).dump() + "\n";
    if (!r.panorama_png.empty()) write_file(dir / image_name(r, "pano"), r.panorama_png);
    if (!r.topdown_png.empty()) write_file(dir / image_name(r, "topdown"), r.topdown_png);
  }
  write_text(dir / "records.jsonl", lines);
}

std::vector<DecisionRecord> read_corpus(const std::filesystem::path& root, const std::string& split, bool load_images) {
  const auto dir = root / split;
  std::istringstream in(read_text(dir / "records.jsonl"));
  std::vector<DecisionRecord> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(record_from_json(json::parse(line), load_images ? dir : std::filesystem::path{}));
  }
  return out;
}

std::vector<DecisionRecord> balance_rl(const std::vector<DecisionRecord>& records, std::uint64_t seed) {
  std::vector<std::size_t> stop, other;
  for (std::size_t i = 0; i < records.size(); ++i) (records[i].is_stop() ? stop : other).push_back(i);
  if (stop.empty()) throw NoStopRecords("corpus has no stop records");
  const std::size_t k = std::min(stop.size(), other.size());
  Rng rng(seed);
  rng.shuffle(std::span(stop));
  rng.shuffle(std::span(other));
  std::vector<std::size_t> keep(stop.begin(), stop.begin() + k);
  keep.insert(keep.end(), other.begin(), other.begin() + k);
  std::sort(keep.begin(), keep.end());
  std::vector<DecisionRecord> out;
  for (std::size_t i : keep) out.push_back(records[i]);
  return out;
}

CorpusStats corpus_stats(const std::string& split, const std::vector<DecisionRecord>& records) {
  CorpusStats s;
  s.split = split;
  s.samples = static_cast<int>(records.size());
  std::map<std::string, int> stops_per_episode;
  double actions = 0.0, tokens = 0.0;
  for (const auto& r : records) {
    stops_per_episode[r.episode_id] += r.is_stop() ? 1 : 0;
    (r.is_stop() ? s.stop_actions : s.non_stop_actions) += 1;
    actions += static_cast<double>(r.candidates.size());
    tokens += static_cast<double>(tokenize(r.instruction).size());
  }
  s.episodes = static_cast<int>(stops_per_episode.size());
  for (const auto& [id, n] : stops_per_episode) s.max_stops_per_episode = std::max(s.max_stops_per_episode, n);
  if (!records.empty()) {
    s.avg_action_space_size = actions / records.size();
    s.mean_instruction_tokens = tokens / records.size();
  }
  return s;
}

std::string stats_table(const std::vector<CorpusStats>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "Split" << " | " << std::setw(9) << "#Samples" << " | " << std::setw(13)
      << "#Stop Actions" << " | " << std::setw(17) << "#Non-Stop Actions" << " | "
      << "Avg. Action Space Size\n";
  out << std::string(12, '-') << "-|-" << std::string(9, '-') << "-|-" << std::string(13, '-') << "-|-"
      << std::string(17, '-') << "-|-" << std::string(22, '-') << "\n";
  for (const auto& s : rows) {
    out << std::left << std::setw(12) << s.split << " | " << std::setw(9) << s.samples << " | " << std::setw(13)
        << s.stop_actions << " | " << std::setw(17) << s.non_stop_actions << " | " << std::fixed << std::setprecision(2)
        << s.avg_action_space_size << "\n";
  }
  return out.str();
}

}  // namespace visor
