#include "visor/waypoints.hpp"

#include "visor/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace visor {

std::string WaypointSet::gt() const {
  if (stop_correct) return "stop";
  if (best_label == 0) return "";
  return std::string(1, best_label);
}

const WaypointCandidate* WaypointSet::find(char label) const {
  for (const auto& c : candidates) {
    if (c.label == label) return &c;
  }
  return nullptr;
}

std::vector<char> WaypointSet::labels() const {
  std::vector<char> out;
  for (const auto& c : candidates) out.push_back(c.label);
  return out;
}

std::vector<Vec2> valid_positions(const GridWorld& world, const PanoramicObservation& obs, const Pose& pose,
                                  const WaypointParams& params) {
  std::vector<Vec2> out;
  const int stride = std::max(1, params.stride);
  const int radius_cells = static_cast<int>(std::ceil(params.inflation / world.resolution())) + 1;
  for (int row = kHorizonRow + 1 + stride / 2; row < kPanoramaHeight; row += stride) {
    for (int col = stride / 2; col < kPanoramaWidth; col += stride) {
      if (!obs.floor(row, col) || obs.depth(row, col) > params.max_depth) continue;
      const Vec2 p = pixel_to_world(obs, pose, row, col);
      if (!world.contains(p) || !world.is_free(world.cell_of(p))) continue;
      if (obstacle_clearance(world, p, radius_cells) < params.inflation) continue;
      out.push_back(p);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

/// Uniform bucket grid with cell size eps for radius queries.
class NeighbourIndex {
 public:
  NeighbourIndex(std::span<const Vec2> pts, double eps) : pts_(pts), eps_(eps) {
    for (std::size_t i = 0; i < pts.size(); ++i) buckets_[key(cell(pts[i]))].push_back(static_cast<int>(i));
  }

  void query(int i, std::vector<int>& out) const {
    out.clear();
    const auto [cx, cy] = cell(pts_[i]);
    const double eps2 = eps_ * eps_;
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const auto it = buckets_.find(key({cx + dx, cy + dy}));
        if (it == buckets_.end()) continue;
        for (int j : it->second) {
          if ((pts_[j] - pts_[i]).squaredNorm() <= eps2) out.push_back(j);
        }
      }
    }
  }

 private:
  std::pair<std::int64_t, std::int64_t> cell(const Vec2& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / eps_)), static_cast<std::int64_t>(std::floor(p.y() / eps_))};
  }
  static std::uint64_t key(std::pair<std::int64_t, std::int64_t> c) {
    return (static_cast<std::uint64_t>(c.first) << 32) ^ (static_cast<std::uint64_t>(c.second) & 0xffffffffull);
  }

  std::span<const Vec2> pts_;
  double eps_;
  std::unordered_map<std::uint64_t, std::vector<int>> buckets_;
};

}  // namespace

std::vector<int> dbscan(std::span<const Vec2> points, double eps, int min_pts) {
  if (eps <= 0.0 || min_pts < 1) throw InvalidConfig("dbscan needs eps > 0 and min_pts >= 1");
  constexpr int kUnvisited = -2;
  constexpr int kNoise = -1;
  std::vector<int> label(points.size(), kUnvisited);
  if (points.empty()) return label;
  const NeighbourIndex index(points, eps);
  std::vector<int> nbrs;
  std::vector<int> inner;
  int cluster = 0;
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    if (label[i] != kUnvisited) continue;
    index.query(i, nbrs);
    if (static_cast<int>(nbrs.size()) < min_pts) {
      label[i] = kNoise;
      continue;
    }
    label[i] = cluster;
    std::vector<int> frontier;
    auto claim = [&](const std::vector<int>& ns) {
      for (int j : ns) {
        if (label[j] == kNoise) label[j] = cluster;  // border point
        if (label[j] != kUnvisited) continue;
        label[j] = cluster;
        frontier.push_back(j);
      }
    };
    claim(nbrs);
    while (!frontier.empty()) {
      const int q = frontier.back();
      frontier.pop_back();
      index.query(q, inner);
      if (static_cast<int>(inner.size()) >= min_pts) claim(inner);
    }
    ++cluster;
  }
  return label;
}

Vec2 snap_to_free(const GridWorld& world, const Vec2& p) {
  const CellIndex c = world.cell_of(p);
  if (world.is_free(c)) return world.center(c);
  double best = std::numeric_limits<double>::infinity();
  CellIndex best_cell{-1, -1};
  const int max_r = std::max(world.width(), world.height());
  for (int r = 1; r <= max_r; ++r) {
    for (int y = c.y - r; y <= c.y + r; ++y) {
      for (int x = c.x - r; x <= c.x + r; ++x) {
        if (std::max(std::abs(x - c.x), std::abs(y - c.y)) != r || !world.is_free({x, y})) continue;
        const double d = (world.center({x, y}) - p).norm();
        if (d < best - 1e-12) {
          best = d;
          best_cell = {x, y};
        }
      }
    }
    // Any cell in a later ring is at least (r - 1) cells away.
    if (best_cell.x >= 0 && best <= (r - 0.5) * world.resolution()) break;
  }
  if (best_cell.x < 0) throw NoCandidates("world has no Free cell");
  return world.center(best_cell);
}

std::vector<Cluster> cluster_waypoints(std::span<const Vec2> points, double eps, int min_pts, int k_max,
                                       const GridWorld* snap_world) {
  const std::vector<int> label = dbscan(points, eps, min_pts);
  const int n_clusters = label.empty() ? 0 : *std::max_element(label.begin(), label.end()) + 1;
  std::vector<Cluster> clusters(std::max(0, n_clusters));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (label[i] < 0) continue;
    clusters[label[i]].centroid += points[i];
    clusters[label[i]].size += 1;
  }
  for (auto& c : clusters) c.centroid /= static_cast<double>(c.size);
  std::stable_sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) { return a.size > b.size; });
  if (static_cast<int>(clusters.size()) > k_max) clusters.resize(std::max(0, k_max));
  if (snap_world != nullptr) {
    for (auto& c : clusters) c.centroid = snap_to_free(*snap_world, c.centroid);
  }
  return clusters;
}

namespace {

/// A label is drawn whole and apart from every label already placed, so each
/// letter stays readable on the panorama.
bool label_fits(const PixelPos& px, const std::vector<WaypointCandidate>& placed) {
  if (px.col < kLabelRadius || px.col >= kPanoramaWidth - kLabelRadius || px.row >= kPanoramaHeight - kLabelRadius) {
    return false;
  }
  return std::none_of(placed.begin(), placed.end(), [&](const WaypointCandidate& w) {
    const int dr = w.pixel_pos.row - px.row, dc = w.pixel_pos.col - px.col;
    return dr * dr + dc * dc < 4 * kLabelRadius * kLabelRadius;
  });
}

}  // namespace

WaypointSet build_waypoint_set(const GridWorld& world, const Pose& pose, const PanoramicObservation& obs,
                               const SceneObject& target, std::uint64_t seed, const WaypointParams& params,
                               const DistanceField* target_field) {
  const std::vector<Vec2> points = valid_positions(world, obs, pose, params);
  // Cluster without truncation first: candidates that cannot be shown on the
  // panorama are dropped before the k_max cap applies.
  std::vector<Cluster> clusters;
  if (params.per_camera) {
    // One clustering per camera sector so a single open room yields a
    // candidate toward each side instead of one centroid at the agent's feet.
    std::array<std::vector<Vec2>, 3> sectors;
    for (const auto& p : points) {
      const Vec2 d = p - pose.position();
      const double b = angle_diff(std::atan2(d.y(), d.x()), pose.heading);
      sectors[b > kPi / 4 ? 0 : (b < -kPi / 4 ? 2 : 1)].push_back(p);
    }
    for (const auto& s : sectors) {
      auto part = cluster_waypoints(s, params.eps, params.min_pts, std::numeric_limits<int>::max(), &world);
      clusters.insert(clusters.end(), part.begin(), part.end());
    }
    std::stable_sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) { return a.size > b.size; });
  } else {
    clusters = cluster_waypoints(points, params.eps, params.min_pts, std::numeric_limits<int>::max(), &world);
  }

  DistanceField local_field;
  if (target_field == nullptr) {
    local_field = geodesic_field(world, target.anchor);
    target_field = &local_field;
  }

  WaypointSet set;
  set.rng_seed = seed;
  for (const auto& cl : clusters) {
    if (static_cast<int>(set.candidates.size()) >= params.k_max) break;
    const bool duplicate = std::any_of(set.candidates.begin(), set.candidates.end(),
                                       [&](const WaypointCandidate& w) { return (w.world_pos - cl.centroid).norm() < 1e-9; });
    if (duplicate) continue;
    const auto px = world_to_pixel(pose, cl.centroid);
    if (!px || !label_fits(*px, set.candidates)) continue;
    WaypointCandidate cand;
    cand.world_pos = cl.centroid;
    cand.pixel_pos = *px;
    cand.cluster_size = cl.size;
    cand.geodesic_to_target = target_field->at(world.cell_of(cl.centroid));
    set.candidates.push_back(cand);
  }
  if (set.candidates.empty()) throw NoCandidates("no waypoint candidates in view");

  std::array<char, 26> letters{};
  std::iota(letters.begin(), letters.end(), 'A');
  Rng rng(seed);
  rng.shuffle(std::span<char>(letters));
  for (std::size_t i = 0; i < set.candidates.size(); ++i) set.candidates[i].label = letters[i];

  std::size_t best = 0;
  for (std::size_t i = 1; i < set.candidates.size(); ++i) {
    const auto& a = set.candidates[i];
    const auto& b = set.candidates[best];
    if (a.geodesic_to_target < b.geodesic_to_target - 1e-12) {
      best = i;
    } else if (std::abs(a.geodesic_to_target - b.geodesic_to_target) <= 1e-12) {
      const double ea = (a.world_pos - target.anchor).norm();
      const double eb = (b.world_pos - target.anchor).norm();
      if (ea < eb - 1e-12) best = i;
    }
  }
  set.best_label = set.candidates[best].label;
  set.agent_geodesic = target_field->at(world.cell_of(pose.position()));
  set.stop_correct = set.agent_geodesic < kSuccessRadius;
  return set;
}

// ---------------------------------------------------------------------------
// Overlay and glyphs.

namespace {

// 5x7 bitmap font, rows top to bottom, bit 4 = leftmost column.
constexpr std::array<std::array<std::uint8_t, 7>, 26> kFont{{
    {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // A
    {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},  // B
    {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E},  // C
    {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E},  // D
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F},  // E
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},  // F
    {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F},  // G
    {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // H
    {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E},  // I
    {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},  // J
    {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11},  // K
    {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},  // L
    {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11},  // M
    {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},  // N
    {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E},  // O
    {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},  // P
    {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D},  // Q
    {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},  // R
    {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E},  // S
    {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},  // T
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E},  // U
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},  // V
    {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A},  // W
    {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},  // X
    {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04},  // Y
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F},  // Z
}};

}  // namespace

bool glyph_pixel(char letter, int dy, int dx) {
  if (letter < 'A' || letter > 'Z' || dy < 0 || dx < 0 || dy >= kGlyphHeight || dx >= kGlyphWidth) return false;
  return (kFont[letter - 'A'][dy / 2] >> (4 - dx / 2)) & 1;
}

void draw_label(RgbImage& image, PixelPos center, char letter) {
  for (int dr = -kLabelRadius; dr <= kLabelRadius; ++dr) {
    for (int dc = -kLabelRadius; dc <= kLabelRadius; ++dc) {
      if (dr * dr + dc * dc > kLabelRadius * kLabelRadius) continue;
      const int r = center.row + dr;
      const int c = center.col + dc;
      if (image.contains(r, c)) image.set(r, c, kLabelRed);
    }
  }
  const int top = center.row - kGlyphHeight / 2;
  const int left = center.col - kGlyphWidth / 2;
  for (int dy = 0; dy < kGlyphHeight; ++dy) {
    for (int dx = 0; dx < kGlyphWidth; ++dx) {
      if (glyph_pixel(letter, dy, dx) && image.contains(top + dy, left + dx)) image.set(top + dy, left + dx, kLabelWhite);
    }
  }
}

PanoramicObservation overlay_labels(const PanoramicObservation& obs, const WaypointSet& set) {
  PanoramicObservation out = obs;
  std::vector<const WaypointCandidate*> order;
  for (const auto& c : set.candidates) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->label < b->label; });
  for (const auto* c : order) draw_label(out.color, c->pixel_pos, c->label);
  return out;
}

std::vector<DetectedLabel> detect_labels(const RgbImage& image) {
  const int h = image.height();
  const int w = image.width();
  auto is_overlay = [&](int r, int c) {
    const Rgb p = image.at(r, c);
    return p == kLabelRed || p == kLabelWhite;
  };
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
  std::vector<DetectedLabel> out;
  for (int r0 = 0; r0 < h; ++r0) {
    for (int c0 = 0; c0 < w; ++c0) {
      if (seen[static_cast<std::size_t>(r0) * w + c0] || image.at(r0, c0) != kLabelRed) continue;
      int min_r = r0, max_r = r0, min_c = c0, max_c = c0, count = 0;
      std::deque<PixelPos> queue{{r0, c0}};
      seen[static_cast<std::size_t>(r0) * w + c0] = 1;
      while (!queue.empty()) {
        const PixelPos p = queue.front();
        queue.pop_front();
        ++count;
        min_r = std::min(min_r, p.row);
        max_r = std::max(max_r, p.row);
        min_c = std::min(min_c, p.col);
        max_c = std::max(max_c, p.col);
        constexpr std::array<std::array<int, 2>, 4> kDirs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
        for (const auto& d : kDirs) {
          const int r = p.row + d[0];
          const int c = p.col + d[1];
          if (r < 0 || c < 0 || r >= h || c >= w) continue;
          auto& s = seen[static_cast<std::size_t>(r) * w + c];
          if (s || !is_overlay(r, c)) continue;
          s = 1;
          queue.push_back({r, c});
        }
      }
      if (count < 40) continue;
      // Disks clipped by the image border keep their known radius.
      PixelPos center{(min_r + max_r + 1) / 2, (min_c + max_c + 1) / 2};
      if (max_r - min_r < 2 * kLabelRadius) center.row = (min_r == 0) ? max_r - kLabelRadius : min_r + kLabelRadius;
      if (max_c - min_c < 2 * kLabelRadius) center.col = (min_c == 0) ? max_c - kLabelRadius : min_c + kLabelRadius;

      DetectedLabel best;
      best.center = center;
      const int top = center.row - kGlyphHeight / 2;
      const int left = center.col - kGlyphWidth / 2;
      for (char letter = 'A'; letter <= 'Z'; ++letter) {
        int agree = 0;
        int total = 0;
        for (int dy = 0; dy < kGlyphHeight; ++dy) {
          for (int dx = 0; dx < kGlyphWidth; ++dx) {
            if (!image.contains(top + dy, left + dx)) continue;
            ++total;
            const bool white = image.at(top + dy, left + dx) == kLabelWhite;
            agree += (white == glyph_pixel(letter, dy, dx)) ? 1 : 0;
          }
        }
        const double score = total > 0 ? static_cast<double>(agree) / total : 0.0;
        if (score > best.match) {
          best.match = score;
          best.letter = letter;
        }
      }
      out.push_back(best);
    }
  }
  return out;
}

}  // namespace visor
