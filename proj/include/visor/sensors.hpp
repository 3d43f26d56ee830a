#pragma once

#include "visor/types.hpp"
#include "visor/world.hpp"

#include <optional>
#include <vector>

namespace visor {

inline constexpr int kCameraCount = 3;
inline constexpr int kCameraWidth = 256;
inline constexpr int kPanoramaWidth = kCameraCount * kCameraWidth;
inline constexpr int kPanoramaHeight = 256;
inline constexpr int kHorizonRow = kPanoramaHeight / 2;
/// (camera width / 2) / tan(45 deg); 90 degree horizontal field of view.
inline constexpr double kFocal = 128.0;
inline constexpr double kFocalVertical = 128.0;
inline constexpr double kCameraHeight = 0.88;
inline constexpr double kDefaultMaxDepth = 5.0;

inline constexpr Rgb kFloorColor{176, 168, 150};
inline constexpr Rgb kWallColorX{150, 150, 150};
inline constexpr Rgb kWallColorY{122, 122, 128};

class PoseInObstacle : public Error {
 public:
  using Error::Error;
};

/// Three 256x256 cameras (left, front, right at +90, 0, -90 degrees) tiled
/// into a 768x256 panorama. Depth is horizontal range along the pixel's ray.
struct PanoramicObservation {
  RgbImage color;
  DepthImage depth;
  MaskImage floor;             ///< 1 where the pixel sees floor
  Eigen::VectorXd wall_depth;  ///< per column range to the first obstacle
  std::vector<int> hit_object; ///< per column object id, -1 for walls
  double max_depth = kDefaultMaxDepth;
  Pose pose;
};

/// Heading offset of the camera that owns a panorama column.
double camera_offset(int col);
/// Angle of a column relative to its camera axis, atan((127.5 - c) / f),
/// positive to the left.
double column_angle(int col);
/// World bearing of a column's ray.
inline double column_bearing(const Pose& pose, int col) { return pose.heading + camera_offset(col) + column_angle(col); }
/// Range at which a floor pixel's ray meets the floor; +inf at or above the horizon.
double floor_range(int row);

struct RayHit {
  double distance = 0.0;
  CellIndex cell;
  bool x_face = true;  ///< crossed a vertical cell boundary last
};

/// Exact grid traversal until the first non-Free cell.
RayHit cast_ray(const GridWorld& world, const Vec2& origin, double bearing);

/// Throws PoseInObstacle.
PanoramicObservation render_panorama(const GridWorld& world, const Pose& pose,
                                     double max_depth = kDefaultMaxDepth);

/// Inverse camera projection of a pixel with finite depth.
Vec2 pixel_to_world(const PanoramicObservation& obs, const Pose& pose, int row, int col);

struct PixelPos {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelPos&, const PixelPos&) = default;
};

/// Forward projection of a floor point; nullopt when it falls behind the rig
/// (the uncovered rear 90 degrees) or below the image.
std::optional<PixelPos> world_to_pixel(const Pose& pose, const Vec2& point);

/// Allocentric top-down map accumulated over an episode.
class TopDownMap {
 public:
  static constexpr int kImageSize = 256;

  TopDownMap() = default;
  explicit TopDownMap(const GridWorld& world);

  /// Marks cells along every column ray as explored and the hit cell as an
  /// obstacle when in range; appends a trajectory vertex if the pose moved.
  void update(const PanoramicObservation& obs, const Pose& pose);

  bool explored(CellIndex c) const { return explored_[index(c)] != 0; }
  bool obstacle(CellIndex c) const { return obstacle_[index(c)] != 0; }
  int explored_count() const;
  const std::vector<Vec2>& trajectory() const { return trajectory_; }
  const std::optional<Pose>& agent() const { return agent_; }

  RgbImage render() const;

  friend bool operator==(const TopDownMap&, const TopDownMap&) = default;

 private:
  std::size_t index(CellIndex c) const { return static_cast<std::size_t>(c.y) * width_ + c.x; }

  int width_ = 0;
  int height_ = 0;
  double resolution_ = 0.25;
  std::vector<std::uint8_t> explored_;
  std::vector<std::uint8_t> obstacle_;
  std::vector<Vec2> trajectory_;
  std::optional<Pose> agent_;
};

TopDownMap update_topdown(TopDownMap map, const PanoramicObservation& obs, const Pose& pose);

}  // namespace visor
