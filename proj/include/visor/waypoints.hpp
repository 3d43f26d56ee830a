#pragma once

#include "visor/sensors.hpp"
#include "visor/world.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace visor {

inline constexpr double kSuccessRadius = 1.0;

struct WaypointParams {
  double eps = 0.5;
  int min_pts = 5;
  int k_max = 6;
  int stride = 4;
  double inflation = 0.25;
  double max_depth = kDefaultMaxDepth;
  bool per_camera = true;
};

struct WaypointCandidate {
  char label = '?';
  Vec2 world_pos = Vec2::Zero();
  PixelPos pixel_pos;
  int cluster_size = 0;
  double geodesic_to_target = 0.0;  ///< evaluation-side bookkeeping
};

struct WaypointSet {
  std::vector<WaypointCandidate> candidates;
  char best_label = 0;        ///< argmin-geodesic candidate, 0 when empty
  bool stop_correct = false;  ///< agent already within the success radius
  double agent_geodesic = 0.0;
  std::uint64_t rng_seed = 0;

  /// "stop", a single letter, or "" when there is nothing to choose.
  std::string gt() const;
  const WaypointCandidate* find(char label) const;
  std::vector<char> labels() const;
};

class NoCandidates : public Error {
 public:
  using Error::Error;
};

/// Floor pixels on a stride grid, projected to the world and kept when within
/// max_depth, inside a Free cell and at least `inflation` from any obstacle.
std::vector<Vec2> valid_positions(const GridWorld& world, const PanoramicObservation& obs, const Pose& pose,
                                  const WaypointParams& params = {});

/// Standard DBSCAN (Euclidean, neighbourhoods include the point itself).
/// Returns one label per point: cluster index in discovery order, or -1 for noise.
std::vector<int> dbscan(std::span<const Vec2> points, double eps, int min_pts);

struct Cluster {
  Vec2 centroid = Vec2::Zero();
  int size = 0;
};

/// DBSCAN centroids sorted by size (descending, ties by discovery order) and
/// truncated to k_max. Centroids snap to the nearest Free cell center when a
/// world is given.
std::vector<Cluster> cluster_waypoints(std::span<const Vec2> points, double eps, int min_pts, int k_max,
                                       const GridWorld* snap_world = nullptr);

/// Nearest Free cell center (ties: lower row, then lower column).
Vec2 snap_to_free(const GridWorld& world, const Vec2& p);

/// Candidates from the observation, lettered with distinct random letters,
/// with the ground truth chosen by geodesic distance to the target. Throws
/// NoCandidates. `target_field` may be passed to reuse a distance field
/// rooted at the target anchor.
WaypointSet build_waypoint_set(const GridWorld& world, const Pose& pose, const PanoramicObservation& obs,
                               const SceneObject& target, std::uint64_t seed, const WaypointParams& params = {},
                               const DistanceField* target_field = nullptr);

// ---------------------------------------------------------------------------
// Label overlays.

inline constexpr int kLabelRadius = 12;
inline constexpr Rgb kLabelRed{255, 0, 0};
inline constexpr Rgb kLabelWhite{255, 255, 255};
inline constexpr int kGlyphWidth = 10;
inline constexpr int kGlyphHeight = 14;

/// Red disks with white letters drawn in alphabetical label order; depth is
/// left untouched.
PanoramicObservation overlay_labels(const PanoramicObservation& obs, const WaypointSet& set);
void draw_label(RgbImage& image, PixelPos center, char letter);

/// True when `letter`'s glyph covers pixel (dy, dx) of its 10x14 box.
bool glyph_pixel(char letter, int dy, int dx);

struct DetectedLabel {
  char letter = '?';
  PixelPos center;
  double match = 0.0;  ///< fraction of glyph-box pixels agreeing with the template
};

/// Finds overlay disks by their exact colors and reads each glyph by template
/// matching against the built-in font.
std::vector<DetectedLabel> detect_labels(const RgbImage& image);

}  // namespace visor
