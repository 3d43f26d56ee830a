#include "visor/world.hpp"

#include "visor/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>

namespace visor {

const char* to_string(RelationKind kind) {
  switch (kind) {
    case RelationKind::Near: return "near";
    case RelationKind::In: return "in";
    case RelationKind::LeftOf: return "left_of";
    case RelationKind::RightOf: return "right_of";
  }
  return "?";
}

RelationKind relation_from_string(const std::string& s) {
  if (s == "near") return RelationKind::Near;
  if (s == "in") return RelationKind::In;
  if (s == "left_of") return RelationKind::LeftOf;
  if (s == "right_of") return RelationKind::RightOf;
  throw Error("unknown relation kind: " + s);
}

const char* to_string(LowLevelAction a) {
  switch (a) {
    case LowLevelAction::Forward: return "forward";
    case LowLevelAction::TurnLeft: return "turn_left";
    case LowLevelAction::TurnRight: return "turn_right";
    case LowLevelAction::Stop: return "stop";
  }
  return "?";
}

GridWorld::GridWorld(int width, int height, double resolution, std::vector<Cell> cells,
                     std::vector<Room> rooms, std::vector<SceneObject> objects, std::uint64_t seed,
                     WorldConfig config)
    : width_(width),
      height_(height),
      resolution_(resolution),
      cells_(std::move(cells)),
      rooms_(std::move(rooms)),
      objects_(std::move(objects)),
      object_grid_(static_cast<std::size_t>(width) * height, -1),
      seed_(seed),
      config_(config) {
  if (width <= 0 || height <= 0 || resolution <= 0.0 ||
      cells_.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidConfig("grid dimensions do not match cell buffer");
  }
  for (const auto& obj : objects_) {
    const CellIndex c = cell_of(obj.anchor);
    if (in_bounds(c)) object_grid_[index(c)] = obj.id;
  }
}

CellIndex GridWorld::cell_of(const Vec2& p) const {
  return {static_cast<int>(std::floor(p.x() / resolution_)),
          static_cast<int>(std::floor(p.y() / resolution_))};
}

const SceneObject* GridWorld::object(int id) const {
  for (const auto& o : objects_) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

int GridWorld::object_at(CellIndex c) const { return in_bounds(c) ? object_grid_[index(c)] : -1; }

const Room* GridWorld::room_of(const Vec2& p) const {
  const CellIndex c = cell_of(p);
  for (const auto& r : rooms_) {
    if (r.contains(c)) return &r;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

int flood_fill_count(const GridWorld& world, CellIndex seed) {
  if (!world.is_free(seed)) return 0;
  std::vector<std::uint8_t> seen(world.cells().size(), 0);
  std::deque<CellIndex> queue{seed};
  seen[world.index(seed)] = 1;
  int count = 0;
  constexpr std::array<std::array<int, 2>, 4> kDirs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  while (!queue.empty()) {
    const CellIndex c = queue.front();
    queue.pop_front();
    ++count;
    for (const auto& d : kDirs) {
      const CellIndex n{c.x + d[0], c.y + d[1]};
      if (world.is_free(n) && !seen[world.index(n)]) {
        seen[world.index(n)] = 1;
        queue.push_back(n);
      }
    }
  }
  return count;
}

int free_cell_count(const GridWorld& world) {
  return static_cast<int>(std::count(world.cells().begin(), world.cells().end(), Cell::Free));
}

bool is_free_space_connected(const GridWorld& world) {
  for (int y = 0; y < world.height(); ++y) {
    for (int x = 0; x < world.width(); ++x) {
      if (world.is_free({x, y})) return flood_fill_count(world, {x, y}) == free_cell_count(world);
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

bool is_near(const SceneObject& a, const SceneObject& b) {
  return a.id != b.id && (a.anchor - b.anchor).norm() <= kNearRadius;
}

bool is_left_of(const GridWorld& world, const SceneObject& a, const SceneObject& b) {
  if (a.id == b.id) return false;
  const Room* ra = world.room_of(a.anchor);
  const Room* rb = world.room_of(b.anchor);
  if (ra == nullptr || ra != rb) return false;
  return a.anchor.x() < b.anchor.x() - kLeftRightMargin;
}

bool is_in_room(const GridWorld& world, const SceneObject& a, const std::string& room) {
  const Room* r = world.room_of(a.anchor);
  return r != nullptr && r->name == room;
}

bool matches(const GridWorld& world, const SceneObject& obj, const ObjectDescription& desc) {
  if (!desc.category.empty() && desc.category != obj.category) return false;
  const auto& want = desc.intrinsic;
  if (!want.color.empty() && want.color != obj.intrinsic.color) return false;
  if (!want.material.empty() && want.material != obj.intrinsic.material) return false;
  if (!want.on_top.empty() && want.on_top != obj.intrinsic.on_top) return false;
  for (const auto& [kind, subject] : desc.relations) {
    bool ok = false;
    if (kind == RelationKind::In) {
      ok = is_in_room(world, obj, subject);
    } else {
      for (const auto& other : world.objects()) {
        if (other.id == obj.id || other.category != subject) continue;
        if ((kind == RelationKind::Near && is_near(obj, other)) ||
            (kind == RelationKind::LeftOf && is_left_of(world, obj, other)) ||
            (kind == RelationKind::RightOf && is_left_of(world, other, obj))) {
          ok = true;
          break;
        }
      }
    }
    if (!ok) return false;
  }
  return true;
}

ObjectDescription describe(const SceneObject& obj) {
  ObjectDescription d;
  d.category = obj.category;
  d.intrinsic = obj.intrinsic;
  for (const auto& rel : obj.extrinsic) d.relations.emplace_back(rel.kind, rel.subject);
  return d;
}

// ---------------------------------------------------------------------------
// Generation.

namespace {

struct Rect {
  int x0, y0, x1, y1;
  int w() const { return x1 - x0 + 1; }
  int h() const { return y1 - y0 + 1; }
};

struct WallSegment {
  bool vertical;  // wall at x = pos spanning [lo, hi] in y; else y = pos spanning x
  int pos, lo, hi;
};

constexpr std::array<const char*, 8> kRoomNames{"bedroom",     "kitchen", "living room", "bathroom",
                                                "office",      "hallway", "dining room", "laundry room"};
constexpr std::array<const char*, 12> kCategories{"chair",   "table", "sofa",      "bed",
                                                  "cabinet", "plant", "lamp",      "shelf",
                                                  "desk",    "dresser", "armchair", "bench"};
constexpr std::array<const char*, 9> kColors{"red",    "green",  "blue",   "yellow", "white",
                                             "black",  "orange", "purple", "brown"};
constexpr std::array<Rgb, 9> kColorBase{{{200, 40, 40},
                                         {40, 160, 60},
                                         {40, 70, 200},
                                         {220, 200, 40},
                                         {235, 235, 228},
                                         {30, 30, 30},
                                         {235, 130, 30},
                                         {130, 50, 160},
                                         {120, 80, 40}}};
constexpr std::array<const char*, 7> kMaterials{"wooden", "metal", "leather", "glass",
                                                "wicker", "marble", "fabric"};
constexpr std::array<const char*, 7> kOnTop{"a mirror", "a lamp",  "some books", "a vase",
                                            "a plant",  "a clock", "a picture frame"};

}  // namespace

const std::vector<NamedColor>& color_palette() {
  static const std::vector<NamedColor> palette = [] {
    std::vector<NamedColor> out;
    for (std::size_t i = 0; i < kColors.size(); ++i) out.push_back({kColors[i], kColorBase[i]});
    return out;
  }();
  return palette;
}

namespace {

Rgb jittered(Rgb base, int id) {
  auto j = [](int v, int k) { return static_cast<std::uint8_t>(std::clamp(v + k, 0, 255)); };
  return {j(base.r, (id % 5) * 2 - 4), j(base.g, ((id / 5) % 5) * 2 - 4),
          j(base.b, ((id / 25) % 5) * 2 - 4)};
}

std::optional<GridWorld> try_generate(std::uint64_t seed, const WorldConfig& cfg, Rng& rng) {
  const int W = cfg.width;
  const int H = cfg.height;
  std::vector<Cell> cells(static_cast<std::size_t>(W) * H, Cell::Obstacle);
  auto at = [&](int x, int y) -> Cell& { return cells[static_cast<std::size_t>(y) * W + x]; };

  // Binary space partition of the interior into rooms separated by 1-cell walls.
  std::vector<Rect> regions{{1, 1, W - 2, H - 2}};
  std::vector<WallSegment> walls;
  const int m = cfg.min_room_side;
  while (static_cast<int>(regions.size()) < cfg.rooms) {
    int best = -1;
    int best_area = 0;
    for (int i = 0; i < static_cast<int>(regions.size()); ++i) {
      const Rect& r = regions[i];
      const bool splittable = r.w() >= 2 * m + 1 || r.h() >= 2 * m + 1;
      if (splittable && r.w() * r.h() > best_area) {
        best = i;
        best_area = r.w() * r.h();
      }
    }
    if (best < 0) return std::nullopt;
    const Rect r = regions[best];
    bool vertical = r.w() >= r.h();
    if (vertical && r.w() < 2 * m + 1) vertical = false;
    if (!vertical && r.h() < 2 * m + 1) vertical = true;
    if (vertical) {
      const int s = rng.uniform_int(r.x0 + m, r.x1 - m);
      regions[best] = {r.x0, r.y0, s - 1, r.y1};
      regions.push_back({s + 1, r.y0, r.x1, r.y1});
      walls.push_back({true, s, r.y0, r.y1});
    } else {
      const int s = rng.uniform_int(r.y0 + m, r.y1 - m);
      regions[best] = {r.x0, r.y0, r.x1, s - 1};
      regions.push_back({r.x0, s + 1, r.x1, r.y1});
      walls.push_back({false, s, r.x0, r.x1});
    }
  }
  for (const Rect& r : regions) {
    for (int y = r.y0; y <= r.y1; ++y) {
      for (int x = r.x0; x <= r.x1; ++x) at(x, y) = Cell::Free;
    }
  }

  // One door per partition wall; every split joins its two halves, so the
  // partition tree keeps all rooms connected.
  std::vector<CellIndex> door_cells;
  for (const WallSegment& w : walls) {
    const int len = rng.uniform_int(cfg.min_door, cfg.max_door);
    std::vector<int> starts;
    for (int t = w.lo; t + len - 1 <= w.hi; ++t) {
      bool ok = true;
      for (int k = -1; k <= len && ok; ++k) {
        const int u = t + k;
        if (u < w.lo || u > w.hi) continue;
        const bool interior = k >= 0 && k < len;
        const Cell a = w.vertical ? at(w.pos - 1, u) : at(u, w.pos - 1);
        const Cell b = w.vertical ? at(w.pos + 1, u) : at(u, w.pos + 1);
        // Door cells need Free on both sides, and the cells flanking the door
        // must not sit on a junction with a perpendicular wall.
        if (interior && (a != Cell::Free || b != Cell::Free)) ok = false;
        if (!interior && (a != Cell::Free || b != Cell::Free)) ok = false;
      }
      if (ok) starts.push_back(t);
    }
    if (starts.empty()) return std::nullopt;
    const int t = starts[rng.uniform_int(0, static_cast<int>(starts.size()) - 1)];
    for (int k = 0; k < len; ++k) {
      const CellIndex c = w.vertical ? CellIndex{w.pos, t + k} : CellIndex{t + k, w.pos};
      at(c.x, c.y) = Cell::Free;
      door_cells.push_back(c);
    }
  }

  std::array<int, kRoomNames.size()> name_order{};
  for (int i = 0; i < static_cast<int>(name_order.size()); ++i) name_order[i] = i;
  rng.shuffle(std::span<int>(name_order));
  std::vector<Room> rooms;
  for (int i = 0; i < static_cast<int>(regions.size()); ++i) {
    const Rect& r = regions[i];
    std::string name = kRoomNames[name_order[i % name_order.size()]];
    if (i >= static_cast<int>(name_order.size())) name += " " + std::to_string(i / name_order.size() + 1);
    rooms.push_back({r.x0, r.y0, r.x1, r.y1, name});
  }

  // Objects: single obstacle cells inside rooms, kept away from doors and
  // from each other so they never seal a passage.
  const int n_cat = std::min<int>(static_cast<int>(kCategories.size()), std::max(3, cfg.objects * 2 / 3));
  std::vector<int> cat_pool(kCategories.size());
  for (int i = 0; i < static_cast<int>(cat_pool.size()); ++i) cat_pool[i] = i;
  rng.shuffle(std::span<int>(cat_pool));
  cat_pool.resize(n_cat);

  std::vector<SceneObject> objects;
  std::vector<CellIndex> object_cells;
  const double res = cfg.resolution;
  for (int id = 0; id < cfg.objects; ++id) {
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      const Room& room = rooms[rng.uniform_int(0, static_cast<int>(rooms.size()) - 1)];
      const CellIndex c{rng.uniform_int(room.x0 + 1, room.x1 - 1), rng.uniform_int(room.y0 + 1, room.y1 - 1)};
      auto cheb = [&](CellIndex a) { return std::max(std::abs(a.x - c.x), std::abs(a.y - c.y)); };
      bool ok = at(c.x, c.y) == Cell::Free;
      for (const auto& d : door_cells) ok = ok && cheb(d) > 2;
      for (const auto& o : object_cells) ok = ok && cheb(o) > 2;
      if (!ok) continue;
      SceneObject obj;
      obj.id = id;
      obj.category = kCategories[cat_pool[rng.uniform_int(0, n_cat - 1)]];
      obj.anchor = Vec2((c.x + 0.5) * res, (c.y + 0.5) * res);
      const int color = rng.uniform_int(0, static_cast<int>(kColors.size()) - 1);
      obj.intrinsic.color = kColors[color];
      if (rng.bernoulli(0.7)) obj.intrinsic.material = kMaterials[rng.uniform_int(0, kMaterials.size() - 1)];
      if (rng.bernoulli(0.4)) obj.intrinsic.on_top = kOnTop[rng.uniform_int(0, kOnTop.size() - 1)];
      obj.render_color = jittered(kColorBase[color], id);
      at(c.x, c.y) = Cell::Obstacle;
      objects.push_back(std::move(obj));
      object_cells.push_back(c);
      placed = true;
    }
    if (!placed) return std::nullopt;
  }

  GridWorld world(W, H, res, cells, rooms, objects, seed, cfg);
  if (!is_free_space_connected(world)) return std::nullopt;

  // Extrinsic relations follow from geometry.
  for (auto& obj : objects) {
    if (const Room* r = world.room_of(obj.anchor)) obj.extrinsic.push_back({RelationKind::In, r->name, -1});
    for (const auto& other : objects) {
      if (is_near(obj, other)) obj.extrinsic.push_back({RelationKind::Near, other.category, other.id});
      if (is_left_of(world, obj, other)) obj.extrinsic.push_back({RelationKind::LeftOf, other.category, other.id});
      if (is_left_of(world, other, obj)) obj.extrinsic.push_back({RelationKind::RightOf, other.category, other.id});
    }
  }
  GridWorld final_world(W, H, res, std::move(cells), std::move(rooms), objects, seed, cfg);

  bool any_unique = false;
  for (const auto& obj : final_world.objects()) {
    const ObjectDescription d = describe(obj);
    bool unique = true;
    for (const auto& other : final_world.objects()) {
      if (other.id != obj.id && matches(final_world, other, d)) {
        unique = false;
        break;
      }
    }
    any_unique = any_unique || unique;
  }
  if (!any_unique) return std::nullopt;
  return final_world;
}

}  // namespace

GridWorld generate_world(std::uint64_t seed, const WorldConfig& config) {
  if (config.rooms < 2) throw InvalidConfig("world config needs at least 2 rooms");
  if (config.objects < 4) throw InvalidConfig("world config needs at least 4 objects");
  if (config.width < 40 || config.height < 40) throw InvalidConfig("grid side must be at least 40 cells");
  if (std::abs(config.resolution - 0.25) > 1e-12) throw InvalidConfig("resolution must be 0.25 m/cell");
  if (config.min_door < 3 || config.max_door < config.min_door) throw InvalidConfig("door gaps must be >= 3 cells");
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    if (auto w = try_generate(seed, config, rng)) return std::move(*w);
  }
  throw GenerationFailed("world generation failed after " + std::to_string(config.max_retries) +
                         " attempts (seed " + std::to_string(seed) + ")");
}

// ---------------------------------------------------------------------------
// Geodesics.

namespace {

constexpr std::array<std::array<int, 2>, 8> kNeighbours{
    {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};

}  // namespace

bool diagonal_clear(const GridWorld& world, CellIndex from, CellIndex to) {
  const int dx = to.x - from.x;
  const int dy = to.y - from.y;
  if (dx == 0 || dy == 0) return true;
  return world.is_free({from.x + dx, from.y}) && world.is_free({from.x, from.y + dy});
}

double DistanceField::at(CellIndex c) const {
  if (world_ == nullptr || !world_->in_bounds(c)) return std::numeric_limits<double>::infinity();
  return dist_[world_->index(c)];
}

std::optional<double> DistanceField::to(const Vec2& p) const {
  const double d = at(world_->cell_of(p));
  if (!std::isfinite(d)) return std::nullopt;
  return d;
}

namespace {

std::vector<double> dijkstra(const GridWorld& world, CellIndex src) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(world.cells().size(), inf);
  if (!world.in_bounds(src)) return dist;
  const double res = world.resolution();
  const double diag = std::sqrt(2.0) * res;
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[world.index(src)] = 0.0;
  heap.push({0.0, world.index(src)});
  while (!heap.empty()) {
    const auto [d, i] = heap.top();
    heap.pop();
    if (d > dist[i]) continue;
    const CellIndex c{static_cast<int>(i % world.width()), static_cast<int>(i / world.width())};
    // Obstacle cells terminate paths unless they are the source.
    if (!world.is_free(c) && !(c == src)) continue;
    for (const auto& n : kNeighbours) {
      const CellIndex nc{c.x + n[0], c.y + n[1]};
      if (!world.in_bounds(nc) || !diagonal_clear(world, c, nc)) continue;
      const double nd = d + ((n[0] != 0 && n[1] != 0) ? diag : res);
      const std::size_t ni = world.index(nc);
      if (nd < dist[ni]) {
        dist[ni] = nd;
        heap.push({nd, ni});
      }
    }
  }
  return dist;
}

}  // namespace

DistanceField geodesic_field(const GridWorld& world, const Vec2& source) {
  const CellIndex src = world.cell_of(source);
  return DistanceField(&world, src, dijkstra(world, src));
}

std::optional<double> geodesic_distance(const GridWorld& world, const Vec2& a, const Vec2& b) {
  const CellIndex ca = world.cell_of(a);
  const CellIndex cb = world.cell_of(b);
  if (!world.in_bounds(ca) || !world.in_bounds(cb)) return std::nullopt;
  if (ca == cb) return 0.0;
  const double d = dijkstra(world, ca)[world.index(cb)];
  if (!std::isfinite(d)) return std::nullopt;
  return d;
}

// ---------------------------------------------------------------------------
// Kinematics and planning.

Pose apply_action(const GridWorld& world, const Pose& pose, LowLevelAction action, bool* blocked) {
  if (blocked) *blocked = false;
  Pose next = pose;
  switch (action) {
    case LowLevelAction::Forward: {
      const Vec2 p = pose.position() + kForwardStep * Vec2(std::cos(pose.heading), std::sin(pose.heading));
      if (world.contains(p) && world.is_free(world.cell_of(p))) {
        next.x = p.x();
        next.y = p.y();
      } else if (blocked) {
        *blocked = true;
      }
      break;
    }
    case LowLevelAction::TurnLeft:
      next.heading = wrap_angle(pose.heading + deg2rad(kTurnStepDeg));
      break;
    case LowLevelAction::TurnRight:
      next.heading = wrap_angle(pose.heading - deg2rad(kTurnStepDeg));
      break;
    case LowLevelAction::Stop:
      break;
  }
  return next;
}

std::vector<CellIndex> astar_path(const GridWorld& world, CellIndex from, CellIndex to) {
  if (!world.is_free(from) || !world.is_free(to)) throw Unreachable("path endpoint is not a Free cell");
  const double res = world.resolution();
  const double diag = std::sqrt(2.0) * res;
  auto heuristic = [&](CellIndex c) {
    const int dx = std::abs(c.x - to.x);
    const int dy = std::abs(c.y - to.y);
    return res * (std::max(dx, dy) - std::min(dx, dy)) + diag * std::min(dx, dy);
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> g(world.cells().size(), inf);
  std::vector<std::int64_t> parent(world.cells().size(), -1);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  g[world.index(from)] = 0.0;
  open.push({heuristic(from), world.index(from)});
  const std::size_t goal = world.index(to);
  while (!open.empty()) {
    const auto [f, i] = open.top();
    open.pop();
    if (i == goal) break;
    const CellIndex c{static_cast<int>(i % world.width()), static_cast<int>(i / world.width())};
    if (f - heuristic(c) > g[i] + 1e-12) continue;
    for (const auto& n : kNeighbours) {
      const CellIndex nc{c.x + n[0], c.y + n[1]};
      if (!world.is_free(nc) || !diagonal_clear(world, c, nc)) continue;
      const double ng = g[i] + ((n[0] != 0 && n[1] != 0) ? diag : res);
      const std::size_t ni = world.index(nc);
      if (ng < g[ni]) {
        g[ni] = ng;
        parent[ni] = static_cast<std::int64_t>(i);
        open.push({ng + heuristic(nc), ni});
      }
    }
  }
  if (!std::isfinite(g[goal])) throw Unreachable("no path between cells");
  std::vector<CellIndex> path;
  for (std::int64_t i = static_cast<std::int64_t>(goal); i >= 0; i = parent[i]) {
    path.push_back({static_cast<int>(i % world.width()), static_cast<int>(i / world.width())});
    if (static_cast<std::size_t>(i) == world.index(from)) break;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

double obstacle_clearance(const GridWorld& world, const Vec2& p, int radius_cells) {
  const CellIndex c = world.cell_of(p);
  const double res = world.resolution();
  double best = std::numeric_limits<double>::infinity();
  for (int dy = -radius_cells; dy <= radius_cells; ++dy) {
    for (int dx = -radius_cells; dx <= radius_cells; ++dx) {
      const CellIndex n{c.x + dx, c.y + dy};
      if (world.is_free(n)) continue;
      const double cx = std::clamp(p.x(), n.x * res, (n.x + 1) * res);
      const double cy = std::clamp(p.y(), n.y * res, (n.y + 1) * res);
      best = std::min(best, std::hypot(p.x() - cx, p.y() - cy));
    }
  }
  return best;
}

namespace {

bool segment_clear(const GridWorld& world, const Vec2& a, const Vec2& b, double margin) {
  const double len = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / 0.05)));
  for (int k = 0; k <= n; ++k) {
    const Vec2 p = a + (b - a) * (static_cast<double>(k) / n);
    if (!world.contains(p) || !world.is_free(world.cell_of(p)) || obstacle_clearance(world, p) < margin) return false;
  }
  return true;
}

}  // namespace

std::vector<LowLevelAction> plan_to_actions(const GridWorld& world, const Pose& from, const Vec2& to) {
  const CellIndex start = world.cell_of(from.position());
  const CellIndex goal = world.cell_of(to);
  std::vector<Vec2> route;
  for (const CellIndex& c : astar_path(world, start, goal)) route.push_back(world.center(c));
  route.back() = to;

  constexpr double kReached = 0.15;
  constexpr double kShortcutMargin = 0.1;
  constexpr int kLookahead = 12;
  constexpr int kMaxActions = 20000;
  const double tol = deg2rad(kHeadingToleranceDeg);

  std::vector<LowLevelAction> actions;
  Pose pose = from;
  std::size_t next = 0;
  bool direct = false;  // after a near-collision, follow cell centers without shortcuts
  int replans = 0;
  while ((to - pose.position()).norm() >= kArrivalTolerance) {
    if (static_cast<int>(actions.size()) > kMaxActions) throw Unreachable("controller failed to converge");
    while (next + 1 < route.size() && (route[next] - pose.position()).norm() < kReached) {
      ++next;
      direct = false;
    }
    // Aim at the farthest upcoming route vertex reachable in a straight line
    // with clearance; fall back to the next vertex.
    std::size_t aim = next;
    for (std::size_t k = std::min(route.size() - 1, next + kLookahead); k > next && !direct; --k) {
      if (segment_clear(world, pose.position(), route[k], kShortcutMargin)) {
        aim = k;
        break;
      }
    }
    next = aim;
    const Vec2 delta = route[aim] - pose.position();
    const double err = angle_diff(std::atan2(delta.y(), delta.x()), pose.heading);
    LowLevelAction a = LowLevelAction::Forward;
    if (std::abs(err) >= tol + 1e-9) a = err > 0.0 ? LowLevelAction::TurnLeft : LowLevelAction::TurnRight;
    bool blocked = false;
    const Pose moved = apply_action(world, pose, a, &blocked);
    if (blocked) {
      // Quantized headings drifted off the free corridor: re-route from the
      // current cell along cell centers.
      if (++replans > 64) throw Unreachable("controller collided with an obstacle");
      route.clear();
      for (const CellIndex& c : astar_path(world, world.cell_of(pose.position()), goal)) route.push_back(world.center(c));
      route.back() = to;
      next = 0;
      direct = true;
      continue;
    }
    pose = moved;
    actions.push_back(a);
  }
  return actions;
}

}  // namespace visor
