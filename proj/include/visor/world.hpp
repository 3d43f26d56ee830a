#pragma once

#include "visor/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace visor {

enum class Cell : std::uint8_t { Free = 0, Obstacle = 1 };

struct CellIndex {
  int x = 0;
  int y = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Axis-aligned room; bounds are inclusive interior cell indices.
struct Room {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  std::string name;

  bool contains(CellIndex c) const { return c.x >= x0 && c.x <= x1 && c.y >= y0 && c.y <= y1; }
  friend bool operator==(const Room&, const Room&) = default;
};

enum class RelationKind { Near, In, LeftOf, RightOf };

const char* to_string(RelationKind kind);
RelationKind relation_from_string(const std::string& s);

/// Extrinsic relation. `subject` is a room name for In, otherwise the
/// category of the referenced object `object_id`.
struct Relation {
  RelationKind kind = RelationKind::In;
  std::string subject;
  int object_id = -1;
  friend bool operator==(const Relation&, const Relation&) = default;
};

/// Intrinsic attributes; empty strings mean "not present".
struct Attributes {
  std::string color;
  std::string material;
  std::string on_top;
  friend bool operator==(const Attributes&, const Attributes&) = default;
};

struct SceneObject {
  int id = 0;
  std::string category;
  Vec2 anchor = Vec2::Zero();
  Attributes intrinsic;
  std::vector<Relation> extrinsic;
  Rgb render_color;

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  ///< radians in [0, 2pi), counter-clockwise from +x

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose&, const Pose&) = default;
};

enum class LowLevelAction { Forward, TurnLeft, TurnRight, Stop };

inline constexpr double kForwardStep = 0.25;
inline constexpr double kTurnStepDeg = 15.0;
inline constexpr int kTurnAroundSteps = 12;

const char* to_string(LowLevelAction a);

struct WorldConfig {
  int width = 48;   ///< cells along x
  int height = 48;  ///< cells along y
  double resolution = 0.25;
  int rooms = 4;
  int objects = 10;
  int min_room_side = 8;
  int min_door = 3;
  int max_door = 4;
  int max_retries = 64;

  friend bool operator==(const WorldConfig&, const WorldConfig&) = default;
};

class GenerationFailed : public Error {
 public:
  using Error::Error;
};

class Unreachable : public Error {
 public:
  using Error::Error;
};

/// Occupancy grid plus rooms and attributed objects. Immutable once built.
class GridWorld {
 public:
  GridWorld() = default;
  GridWorld(int width, int height, double resolution, std::vector<Cell> cells,
            std::vector<Room> rooms = {}, std::vector<SceneObject> objects = {},
            std::uint64_t seed = 0, WorldConfig config = {});

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  std::uint64_t seed() const { return seed_; }
  const WorldConfig& config() const { return config_; }

  bool in_bounds(CellIndex c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  Cell cell(CellIndex c) const { return cells_[index(c)]; }
  /// Out-of-bounds cells read as obstacles.
  bool is_free(CellIndex c) const { return in_bounds(c) && cells_[index(c)] == Cell::Free; }
  bool contains(const Vec2& p) const {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() < width_ * resolution_ && p.y() < height_ * resolution_;
  }

  CellIndex cell_of(const Vec2& p) const;
  Vec2 center(CellIndex c) const { return {(c.x + 0.5) * resolution_, (c.y + 0.5) * resolution_}; }
  std::size_t index(CellIndex c) const { return static_cast<std::size_t>(c.y) * width_ + c.x; }

  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<Room>& rooms() const { return rooms_; }
  const std::vector<SceneObject>& objects() const { return objects_; }

  const SceneObject* object(int id) const;
  /// Id of the object occupying a cell, or -1.
  int object_at(CellIndex c) const;
  const Room* room_of(const Vec2& p) const;

  friend bool operator==(const GridWorld&, const GridWorld&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 0.25;
  std::vector<Cell> cells_;
  std::vector<Room> rooms_;
  std::vector<SceneObject> objects_;
  std::vector<int> object_grid_;
  std::uint64_t seed_ = 0;
  WorldConfig config_;
};

/// Deterministic procedural world. Throws InvalidConfig on a bad config and
/// GenerationFailed after `max_retries` rejected attempts.
GridWorld generate_world(std::uint64_t seed, const WorldConfig& config = {});

/// Number of Free cells 4-connected to `seed` (flood fill).
int flood_fill_count(const GridWorld& world, CellIndex seed);
int free_cell_count(const GridWorld& world);
bool is_free_space_connected(const GridWorld& world);

/// Object color words with their rendered base colors (before per-id jitter).
struct NamedColor {
  const char* name;
  Rgb rgb;
};
const std::vector<NamedColor>& color_palette();

// ---------------------------------------------------------------------------
// Object description predicates shared by generation and instruction filtering.

inline constexpr double kNearRadius = 1.5;
inline constexpr double kLeftRightMargin = 0.5;

bool is_near(const SceneObject& a, const SceneObject& b);
/// a is left of b along the room's canonical +x axis; both must share a room.
bool is_left_of(const GridWorld& world, const SceneObject& a, const SceneObject& b);
bool is_in_room(const GridWorld& world, const SceneObject& a, const std::string& room);

/// A partial description: every non-empty field must hold for a match.
struct ObjectDescription {
  std::string category;
  Attributes intrinsic;
  /// (kind, subject) pairs; subject is a category or, for In, a room name.
  std::vector<std::pair<RelationKind, std::string>> relations;
};

bool matches(const GridWorld& world, const SceneObject& obj, const ObjectDescription& desc);
/// Full description of an object from its stored attributes and relations.
ObjectDescription describe(const SceneObject& obj);

// ---------------------------------------------------------------------------
// Geodesics: 8-connected shortest paths over Free cell centers, diagonal cost
// sqrt(2)*resolution, no corner cutting. An Obstacle cell may appear only as
// a path endpoint (object anchors).

class DistanceField {
 public:
  DistanceField() = default;
  DistanceField(const GridWorld* world, CellIndex source, std::vector<double> dist)
      : world_(world), source_(source), dist_(std::move(dist)) {}

  CellIndex source() const { return source_; }
  /// +inf when unreachable.
  double at(CellIndex c) const;
  std::optional<double> to(const Vec2& p) const;

 private:
  const GridWorld* world_ = nullptr;
  CellIndex source_;
  std::vector<double> dist_;
};

DistanceField geodesic_field(const GridWorld& world, const Vec2& source);
std::optional<double> geodesic_distance(const GridWorld& world, const Vec2& a, const Vec2& b);

/// Distance from p to the nearest Obstacle cell square within `radius_cells`;
/// +inf when none is that close.
double obstacle_clearance(const GridWorld& world, const Vec2& p, int radius_cells = 2);

/// True when a move between 8-neighbours is allowed (diagonals need both
/// orthogonal cells Free). Endpoints are not checked.
bool diagonal_clear(const GridWorld& world, CellIndex from, CellIndex to);

// ---------------------------------------------------------------------------
// Low-level kinematics and planning.

/// Applies one action. Forward is blocked (no motion) if it would end in an
/// Obstacle cell; `blocked` reports that when non-null.
Pose apply_action(const GridWorld& world, const Pose& pose, LowLevelAction action,
                  bool* blocked = nullptr);

/// A* over the geodesic graph. Throws Unreachable.
std::vector<CellIndex> astar_path(const GridWorld& world, CellIndex from, CellIndex to);

inline constexpr double kArrivalTolerance = 0.25;
inline constexpr double kHeadingToleranceDeg = 7.5;

/// Greedy heading controller along the A* path: turn in 15 degree steps until
/// the heading error is below 7.5 degrees, then step forward. Ends within
/// kArrivalTolerance of `to`; never emits Stop. Throws Unreachable.
std::vector<LowLevelAction> plan_to_actions(const GridWorld& world, const Pose& from, const Vec2& to);

}  // namespace visor
