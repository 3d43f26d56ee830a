#pragma once

#include "visor/rng.hpp"
#include "visor/world.hpp"

#include <string>
#include <vector>

namespace testing {

/// Rows top to bottom are y = 0, 1, ...; '#' is an obstacle.
inline visor::GridWorld ascii_world(const std::vector<std::string>& rows, double resolution = 0.25,
                                    std::vector<visor::SceneObject> objects = {}) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.front().size());
  std::vector<visor::Cell> cells;
  for (const auto& r : rows)
    for (char ch : r) cells.push_back(ch == '#' ? visor::Cell::Obstacle : visor::Cell::Free);
  return visor::GridWorld(w, h, resolution, std::move(cells), {}, std::move(objects));
}

/// A walled rectangle with a free interior.
inline visor::GridWorld open_room(int w, int h, std::vector<visor::SceneObject> objects = {}) {
  std::vector<std::string> rows;
  for (int y = 0; y < h; ++y) {
    std::string r(w, '.');
    if (y == 0 || y == h - 1) r.assign(w, '#');
    r.front() = r.back() = '#';
    rows.push_back(r);
  }
  std::vector<visor::Cell> cells;
  for (const auto& r : rows)
    for (char ch : r) cells.push_back(ch == '#' ? visor::Cell::Obstacle : visor::Cell::Free);
  std::vector<visor::Room> rooms{{1, 1, w - 2, h - 2, "bedroom"}};
  return visor::GridWorld(w, h, 0.25, std::move(cells), std::move(rooms), std::move(objects));
}

inline visor::GridWorld random_maze(int w, int h, double density, visor::Rng& rng) {
  std::vector<visor::Cell> cells(static_cast<std::size_t>(w) * h);
  for (auto& c : cells) c = rng.bernoulli(density) ? visor::Cell::Obstacle : visor::Cell::Free;
  return visor::GridWorld(w, h, 0.25, std::move(cells));
}

inline std::vector<visor::CellIndex> free_cells(const visor::GridWorld& world) {
  std::vector<visor::CellIndex> out;
  for (int y = 0; y < world.height(); ++y)
    for (int x = 0; x < world.width(); ++x)
      if (world.is_free({x, y})) out.push_back({x, y});
  return out;
}

/// Free cells whose 8 neighbours are Free too.
inline std::vector<visor::CellIndex> clear_cells(const visor::GridWorld& world) {
  std::vector<visor::CellIndex> out;
  for (const auto& c : free_cells(world)) {
    bool ok = true;
    for (int dy = -1; dy <= 1 && ok; ++dy)
      for (int dx = -1; dx <= 1 && ok; ++dx) ok = world.is_free({c.x + dx, c.y + dy});
    if (ok) out.push_back(c);
  }
  return out;
}

}  // namespace testing
