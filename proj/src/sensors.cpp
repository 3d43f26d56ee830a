#include "visor/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace visor {

double camera_offset(int col) {
  switch (col / kCameraWidth) {
    case 0: return kPi / 2.0;
    case 1: return 0.0;
    default: return -kPi / 2.0;
  }
}

double column_angle(int col) {
  const int local = col % kCameraWidth;
  return std::atan((127.5 - local) / kFocal);
}

double floor_range(int row) {
  if (row <= kHorizonRow) return std::numeric_limits<double>::infinity();
  return kCameraHeight * kFocalVertical / static_cast<double>(row - kHorizonRow);
}

namespace {

/// Visits cells along a ray in order with their entry distance. The visitor
/// returns false to stop. Starts with the origin cell at distance 0.
template <class Visit>
void traverse(const GridWorld& world, const Vec2& origin, double bearing, Visit&& visit) {
  const double res = world.resolution();
  const double dx = std::cos(bearing);
  const double dy = std::sin(bearing);
  CellIndex c = world.cell_of(origin);
  const int step_x = dx > 0 ? 1 : -1;
  const int step_y = dy > 0 ? 1 : -1;
  const double inf = std::numeric_limits<double>::infinity();
  const double next_x = (dx > 0 ? (c.x + 1) * res : c.x * res);
  const double next_y = (dy > 0 ? (c.y + 1) * res : c.y * res);
  double t_max_x = std::abs(dx) < 1e-15 ? inf : (next_x - origin.x()) / dx;
  double t_max_y = std::abs(dy) < 1e-15 ? inf : (next_y - origin.y()) / dy;
  const double t_delta_x = std::abs(dx) < 1e-15 ? inf : res / std::abs(dx);
  const double t_delta_y = std::abs(dy) < 1e-15 ? inf : res / std::abs(dy);
  if (!visit(c, 0.0, true)) return;
  for (int guard = 0; guard < 4 * (world.width() + world.height()); ++guard) {
    double t;
    bool x_face;
    if (t_max_x < t_max_y) {
      t = t_max_x;
      c.x += step_x;
      t_max_x += t_delta_x;
      x_face = true;
    } else {
      t = t_max_y;
      c.y += step_y;
      t_max_y += t_delta_y;
      x_face = false;
    }
    if (!visit(c, t, x_face)) return;
  }
}

}  // namespace

RayHit cast_ray(const GridWorld& world, const Vec2& origin, double bearing) {
  RayHit hit;
  hit.distance = std::numeric_limits<double>::infinity();
  traverse(world, origin, bearing, [&](CellIndex c, double t, bool x_face) {
    if (world.is_free(c)) return true;
    hit = {t, c, x_face};
    return false;
  });
  return hit;
}

PanoramicObservation render_panorama(const GridWorld& world, const Pose& pose, double max_depth) {
  const Vec2 origin = pose.position();
  if (!world.contains(origin) || !world.is_free(world.cell_of(origin))) {
    throw PoseInObstacle("pose is not in a Free cell");
  }
  PanoramicObservation obs;
  obs.color = RgbImage(kPanoramaWidth, kPanoramaHeight);
  obs.depth = DepthImage(kPanoramaHeight, kPanoramaWidth);
  obs.floor = MaskImage::Zero(kPanoramaHeight, kPanoramaWidth);
  obs.wall_depth.resize(kPanoramaWidth);
  obs.hit_object.assign(kPanoramaWidth, -1);
  obs.max_depth = max_depth;
  obs.pose = pose;

  for (int col = 0; col < kPanoramaWidth; ++col) {
    const RayHit hit = cast_ray(world, origin, column_bearing(pose, col));
    const double wall = hit.distance;
    obs.wall_depth[col] = wall;
    const int obj = world.object_at(hit.cell);
    obs.hit_object[col] = obj;
    Rgb wall_color = hit.x_face ? kWallColorX : kWallColorY;
    if (obj >= 0) wall_color = world.object(obj)->render_color;
    for (int row = 0; row < kPanoramaHeight; ++row) {
      const double f = floor_range(row);
      if (f < wall) {
        obs.color.set(row, col, kFloorColor);
        obs.depth(row, col) = f;
        obs.floor(row, col) = 1;
      } else {
        obs.color.set(row, col, wall_color);
        obs.depth(row, col) = wall;
      }
    }
  }
  return obs;
}

Vec2 pixel_to_world(const PanoramicObservation& obs, const Pose& pose, int row, int col) {
  const double b = column_bearing(pose, col);
  return pose.position() + obs.depth(row, col) * Vec2(std::cos(b), std::sin(b));
}

std::optional<PixelPos> world_to_pixel(const Pose& pose, const Vec2& point) {
  const Vec2 v = point - pose.position();
  const double range = v.norm();
  if (range <= 1e-9) return std::nullopt;
  const double rel = angle_diff(std::atan2(v.y(), v.x()), pose.heading);
  int cam;
  if (rel > kPi / 4.0 && rel <= 3.0 * kPi / 4.0) {
    cam = 0;
  } else if (rel >= -kPi / 4.0 && rel <= kPi / 4.0) {
    cam = 1;
  } else if (rel >= -3.0 * kPi / 4.0 && rel < -kPi / 4.0) {
    cam = 2;
  } else {
    return std::nullopt;
  }
  const double local = rel - camera_offset(cam * kCameraWidth);
  const double c = 127.5 - kFocal * std::tan(local);
  const int col = cam * kCameraWidth + std::clamp(static_cast<int>(std::lround(c)), 0, kCameraWidth - 1);
  const int row = static_cast<int>(std::lround(kHorizonRow + kCameraHeight * kFocalVertical / range));
  if (row >= kPanoramaHeight) return std::nullopt;
  return PixelPos{row, col};
}

// ---------------------------------------------------------------------------

TopDownMap::TopDownMap(const GridWorld& world)
    : width_(world.width()),
      height_(world.height()),
      resolution_(world.resolution()),
      explored_(world.cells().size(), 0),
      obstacle_(world.cells().size(), 0) {}

void TopDownMap::update(const PanoramicObservation& obs, const Pose& pose) {
  const Vec2 origin = pose.position();
  auto in_bounds = [&](CellIndex c) { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; };
  for (int col = 0; col < kPanoramaWidth; ++col) {
    const double wall = obs.wall_depth[col];
    const double limit = std::min(wall, obs.max_depth);
    const double b = column_bearing(pose, col);
    const double dx = std::cos(b), dy = std::sin(b);
    // Same traversal as the renderer, bounded by the observed wall range.
    const int step_x = dx > 0 ? 1 : -1;
    const int step_y = dy > 0 ? 1 : -1;
    const double inf = std::numeric_limits<double>::infinity();
    CellIndex c{static_cast<int>(std::floor(origin.x() / resolution_)),
                static_cast<int>(std::floor(origin.y() / resolution_))};
    double t_max_x = std::abs(dx) < 1e-15 ? inf : ((dx > 0 ? (c.x + 1) : c.x) * resolution_ - origin.x()) / dx;
    double t_max_y = std::abs(dy) < 1e-15 ? inf : ((dy > 0 ? (c.y + 1) : c.y) * resolution_ - origin.y()) / dy;
    const double t_delta_x = std::abs(dx) < 1e-15 ? inf : resolution_ / std::abs(dx);
    const double t_delta_y = std::abs(dy) < 1e-15 ? inf : resolution_ / std::abs(dy);
    double t = 0.0;
    while (in_bounds(c)) {
      if (t >= limit) break;
      const double t_exit = std::min(t_max_x, t_max_y);
      if (t_exit >= wall - 1e-12) {
        // The ray ends inside this cell's far boundary: next cell is the hit.
        explored_[index(c)] = 1;
        if (t_max_x < t_max_y) {
          c.x += step_x;
        } else {
          c.y += step_y;
        }
        if (wall <= obs.max_depth && in_bounds(c)) obstacle_[index(c)] = 1;
        break;
      }
      explored_[index(c)] = 1;
      if (t_max_x < t_max_y) {
        t = t_max_x;
        c.x += step_x;
        t_max_x += t_delta_x;
      } else {
        t = t_max_y;
        c.y += step_y;
        t_max_y += t_delta_y;
      }
    }
  }
  if (trajectory_.empty() || (trajectory_.back() - origin).norm() > 1e-9) trajectory_.push_back(origin);
  agent_ = pose;
}

int TopDownMap::explored_count() const {
  return static_cast<int>(std::count(explored_.begin(), explored_.end(), std::uint8_t{1}));
}

namespace {

constexpr Rgb kUnexplored{24, 24, 24};
constexpr Rgb kExplored{205, 205, 205};
constexpr Rgb kSeenObstacle{60, 84, 150};
constexpr Rgb kTrajectory{20, 160, 40};
constexpr Rgb kAgent{255, 140, 0};

void draw_line(RgbImage& img, double r0, double c0, double r1, double c1, Rgb color) {
  const int n = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(r1 - r0), std::abs(c1 - c0)))));
  for (int k = 0; k <= n; ++k) {
    const double s = static_cast<double>(k) / n;
    const int r = static_cast<int>(std::lround(r0 + s * (r1 - r0)));
    const int c = static_cast<int>(std::lround(c0 + s * (c1 - c0)));
    if (img.contains(r, c)) img.set(r, c, color);
  }
}

}  // namespace

RgbImage TopDownMap::render() const {
  RgbImage img(kImageSize, kImageSize, kUnexplored);
  if (width_ == 0) return img;
  // Pixels per meter, world auto-scaled into the square with +y up.
  const double scale = kImageSize / (std::max(width_, height_) * resolution_);
  auto to_px = [&](const Vec2& p) {
    return std::pair<double, double>{kImageSize - p.y() * scale, p.x() * scale};
  };
  for (int row = 0; row < kImageSize; ++row) {
    for (int col = 0; col < kImageSize; ++col) {
      const double x = (col + 0.5) / scale;
      const double y = (kImageSize - row - 0.5) / scale;
      const CellIndex c{static_cast<int>(std::floor(x / resolution_)), static_cast<int>(std::floor(y / resolution_))};
      if (c.x >= width_ || c.y >= height_) continue;
      if (obstacle_[index(c)]) {
        img.set(row, col, kSeenObstacle);
      } else if (explored_[index(c)]) {
        img.set(row, col, kExplored);
      }
    }
  }
  for (std::size_t i = 1; i < trajectory_.size(); ++i) {
    const auto [r0, c0] = to_px(trajectory_[i - 1]);
    const auto [r1, c1] = to_px(trajectory_[i]);
    draw_line(img, r0, c0, r1, c1, kTrajectory);
  }
  if (agent_) {
    const auto [ar, ac] = to_px(agent_->position());
    for (int dr = -4; dr <= 4; ++dr) {
      for (int dc = -4; dc <= 4; ++dc) {
        const int r = static_cast<int>(std::lround(ar)) + dr;
        const int c = static_cast<int>(std::lround(ac)) + dc;
        if (dr * dr + dc * dc <= 16 && img.contains(r, c)) img.set(r, c, kAgent);
      }
    }
    draw_line(img, ar, ac, ar - 10.0 * std::sin(agent_->heading), ac + 10.0 * std::cos(agent_->heading), kAgent);
  }
  return img;
}

TopDownMap update_topdown(TopDownMap map, const PanoramicObservation& obs, const Pose& pose) {
  map.update(obs, pose);
  return map;
}

}  // namespace visor
