#pragma once

// Slow, straightforward re-implementations used as references by the tests.
// None of these call into the library's algorithms beyond plain accessors.

#include "visor/world.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

namespace oracle {

using visor::CellIndex;
using visor::GridWorld;
using visor::Vec2;

inline bool free_at(const GridWorld& w, int x, int y) {
  return x >= 0 && y >= 0 && x < w.width() && y < w.height() && w.cells()[y * w.width() + x] == visor::Cell::Free;
}

/// Explicit-stack depth-first 4-connected fill.
inline int flood_fill(const GridWorld& w, int sx, int sy) {
  if (!free_at(w, sx, sy)) return 0;
  std::vector<char> seen(w.cells().size(), 0);
  std::vector<std::pair<int, int>> stack{{sx, sy}};
  seen[sy * w.width() + sx] = 1;
  int count = 0;
  while (!stack.empty()) {
    auto [x, y] = stack.back();
    stack.pop_back();
    ++count;
    const int nx[4] = {x + 1, x - 1, x, x};
    const int ny[4] = {y, y, y + 1, y - 1};
    for (int k = 0; k < 4; ++k) {
      if (free_at(w, nx[k], ny[k]) && !seen[ny[k] * w.width() + nx[k]]) {
        seen[ny[k] * w.width() + nx[k]] = 1;
        stack.emplace_back(nx[k], ny[k]);
      }
    }
  }
  return count;
}

/// Shortest 8-connected distances from one cell by repeated full relaxation
/// (Bellman-Ford). Non-Free cells can be reached but are never expanded,
/// except the source. Diagonals need both orthogonal cells Free.
inline std::vector<double> grid_distances(const GridWorld& w, int sx, int sy) {
  const double inf = std::numeric_limits<double>::infinity();
  const int W = w.width(), H = w.height();
  const double r = w.resolution();
  std::vector<double> d(static_cast<std::size_t>(W) * H, inf);
  d[sy * W + sx] = 0.0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const double here = d[y * W + x];
        if (!std::isfinite(here)) continue;
        if (!free_at(w, x, y) && !(x == sx && y == sy)) continue;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
            if (dx != 0 && dy != 0 && (!free_at(w, x + dx, y) || !free_at(w, x, y + dy))) continue;
            const double step = (dx != 0 && dy != 0) ? std::sqrt(2.0) * r : r;
            if (here + step < d[ny * W + nx] - 1e-12) {
              d[ny * W + nx] = here + step;
              changed = true;
            }
          }
        }
      }
    }
  }
  return d;
}

/// Distance from p to the nearest Obstacle square anywhere in the grid,
/// including the out-of-bounds frame.
inline double clearance(const GridWorld& w, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  const double r = w.resolution();
  for (int y = -1; y <= w.height(); ++y) {
    for (int x = -1; x <= w.width(); ++x) {
      if (free_at(w, x, y)) continue;
      const double cx = std::clamp(p.x(), x * r, (x + 1) * r);
      const double cy = std::clamp(p.y(), y * r, (y + 1) * r);
      best = std::min(best, std::hypot(p.x() - cx, p.y() - cy));
    }
  }
  return best;
}

/// Line of sight by dense sampling: true if no sample between a and b falls in
/// a non-Free cell.
inline bool line_of_sight(const GridWorld& w, const Vec2& a, const Vec2& b, double step = 0.005) {
  const double len = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  const double r = w.resolution();
  for (int k = 0; k <= n; ++k) {
    const Vec2 p = a + (b - a) * (static_cast<double>(k) / n);
    if (!free_at(w, static_cast<int>(std::floor(p.x() / r)), static_cast<int>(std::floor(p.y() / r)))) return false;
  }
  return true;
}

/// DBSCAN by definition: core points and their eps-graph components, border
/// points with the set of clusters they may legitimately join.
struct DensityClustering {
  std::vector<bool> core;
  std::vector<int> component;           ///< per core point, -1 otherwise
  std::vector<std::set<int>> reachable; ///< per non-core point, components of its core neighbours
};

inline DensityClustering density_reachability(const std::vector<Vec2>& pts, double eps, int min_pts) {
  const int n = static_cast<int>(pts.size());
  DensityClustering out;
  out.core.assign(n, false);
  out.component.assign(n, -1);
  out.reachable.assign(n, {});
  auto near = [&](int i, int j) { return (pts[i] - pts[j]).norm() <= eps; };
  for (int i = 0; i < n; ++i) {
    int count = 0;
    for (int j = 0; j < n; ++j) count += near(i, j) ? 1 : 0;
    out.core[i] = count >= min_pts;
  }
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (out.core[i] && out.core[j] && near(i, j)) parent[find(i)] = find(j);
  for (int i = 0; i < n; ++i)
    if (out.core[i]) out.component[i] = find(i);
  for (int i = 0; i < n; ++i) {
    if (out.core[i]) continue;
    for (int j = 0; j < n; ++j)
      if (out.core[j] && near(i, j)) out.reachable[i].insert(out.component[j]);
  }
  return out;
}

/// True when `labels` is a valid DBSCAN result: a bijection between oracle
/// components and labels on core points, border points in a reachable
/// cluster, everything else noise.
inline bool consistent(const DensityClustering& oracle, const std::vector<int>& labels) {
  const int n = static_cast<int>(labels.size());
  if (n != static_cast<int>(oracle.core.size())) return false;
  std::map<int, int> comp_to_label, label_to_comp;
  for (int i = 0; i < n; ++i) {
    if (!oracle.core[i]) continue;
    if (labels[i] < 0) return false;
    auto [a, ins_a] = comp_to_label.emplace(oracle.component[i], labels[i]);
    auto [b, ins_b] = label_to_comp.emplace(labels[i], oracle.component[i]);
    if (a->second != labels[i] || b->second != oracle.component[i]) return false;
  }
  for (int i = 0; i < n; ++i) {
    if (oracle.core[i]) continue;
    if (oracle.reachable[i].empty()) {
      if (labels[i] != -1) return false;
      continue;
    }
    auto it = label_to_comp.find(labels[i]);
    if (it == label_to_comp.end() || !oracle.reachable[i].count(it->second)) return false;
  }
  return true;
}

/// Room lookup by interior rectangle of the anchor's cell.
inline const visor::Room* room_at(const GridWorld& w, const Vec2& p) {
  const int x = static_cast<int>(std::floor(p.x() / w.resolution()));
  const int y = static_cast<int>(std::floor(p.y() / w.resolution()));
  for (const auto& r : w.rooms())
    if (x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1) return &r;
  return nullptr;
}

/// Whether an object satisfies every field of a description.
inline bool satisfies(const GridWorld& w, const visor::SceneObject& o, const visor::ObjectDescription& d) {
  if (!d.category.empty() && o.category != d.category) return false;
  if (!d.intrinsic.color.empty() && o.intrinsic.color != d.intrinsic.color) return false;
  if (!d.intrinsic.material.empty() && o.intrinsic.material != d.intrinsic.material) return false;
  if (!d.intrinsic.on_top.empty() && o.intrinsic.on_top != d.intrinsic.on_top) return false;
  for (const auto& [kind, subject] : d.relations) {
    bool any = false;
    if (kind == visor::RelationKind::In) {
      const auto* r = room_at(w, o.anchor);
      any = r != nullptr && r->name == subject;
    }
    for (const auto& other : w.objects()) {
      if (kind == visor::RelationKind::In || any) break;
      if (other.id == o.id || other.category != subject) continue;
      const auto* ro = room_at(w, o.anchor);
      const bool same_room = ro != nullptr && ro == room_at(w, other.anchor);
      switch (kind) {
        case visor::RelationKind::Near:
          any = (o.anchor - other.anchor).norm() <= 1.5;
          break;
        case visor::RelationKind::LeftOf:
          any = same_room && o.anchor.x() < other.anchor.x() - 0.5;
          break;
        case visor::RelationKind::RightOf:
          any = same_room && other.anchor.x() < o.anchor.x() - 0.5;
          break;
        default:
          break;
      }
    }
    if (!any) return false;
  }
  return true;
}

}  // namespace oracle
