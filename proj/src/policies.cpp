#include "visor/policies.hpp"

#include "visor/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

namespace visor {

std::string OraclePolicy::respond(const PolicyQuery& /*query*/) {
  if (info_.set == nullptr) throw PolicyFailure("oracle policy queried without privileged data");
  const WaypointSet& set = *info_.set;
  std::ostringstream think;
  think << "Agent is " << set.agent_geodesic << " m from the target along the shortest path.";
  if (set.stop_correct) {
    return format_response(think.str(), "Within the success radius, stopping.", "stop");
  }
  const WaypointCandidate* best = set.best_label ? set.find(set.best_label) : nullptr;
  if (best == nullptr) return format_response(think.str(), "No waypoint in view, turning around.", "turn_around");
  think << " Waypoint " << best->label << " is " << best->geodesic_to_target << " m from it.";
  return format_response(think.str(), std::string("Waypoint ") + best->label + " is closest to the target.",
                         std::string(1, best->label));
}

std::string RandomPolicy::respond(const PolicyQuery& query) {
  std::vector<std::string> options;
  for (const auto& d : detect_labels(query.panorama)) {
    if (d.match >= 0.9) options.emplace_back(1, d.letter);
  }
  options.emplace_back("stop");
  options.emplace_back("turn_around");
  Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(query.decision_index) * 2 + query.attempt));
  const std::string& pick = options[rng.uniform_int(0, static_cast<int>(options.size()) - 1)];
  return format_response("Picking uniformly among " + std::to_string(options.size()) + " options.",
                         "Chose " + pick + " at random.", pick);
}

std::optional<NamedColor> instruction_color(const std::string& instruction) {
  std::string lower;
  for (char c : instruction) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::optional<NamedColor> best;
  std::size_t best_pos = std::string::npos;
  for (const auto& nc : color_palette()) {
    const std::string word(nc.name);
    for (std::size_t pos = lower.find(word); pos != std::string::npos; pos = lower.find(word, pos + 1)) {
      const bool left_ok = pos == 0 || !std::isalpha(static_cast<unsigned char>(lower[pos - 1]));
      const std::size_t end = pos + word.size();
      const bool right_ok = end >= lower.size() || !std::isalpha(static_cast<unsigned char>(lower[end]));
      if (left_ok && right_ok && pos < best_pos) {
        best = nc;
        best_pos = pos;
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Heuristic policy.

namespace {

constexpr int kProbeRow = 100;  // above the horizon and above any label disk
constexpr Rgb kTopdownUnexplored{24, 24, 24};
constexpr Rgb kTopdownAgent{255, 140, 0};

bool near_color(Rgb a, Rgb b, int tol) {
  return std::abs(a.r - b.r) <= tol && std::abs(a.g - b.g) <= tol && std::abs(a.b - b.b) <= tol;
}

/// Heading-relative bearing of a panorama column.
double relative_bearing(int col) { return camera_offset(col) + column_angle(col); }

struct AgentMarker {
  double row = 0.0;
  double col = 0.0;
  double heading = 0.0;
  bool found = false;
};

/// Agent disk centroid and heading from the direction-tick pixels.
AgentMarker find_agent(const RgbImage& topdown) {
  AgentMarker m;
  double sr = 0.0, sc = 0.0;
  int n = 0;
  for (int r = 0; r < topdown.height(); ++r) {
    for (int c = 0; c < topdown.width(); ++c) {
      if (topdown.at(r, c) == kTopdownAgent) {
        sr += r;
        sc += c;
        ++n;
      }
    }
  }
  if (n == 0) return m;
  // The disk dominates the centroid; refine with pixels within the disk radius.
  double cr = sr / n, cc = sc / n;
  double dr = 0.0, dc = 0.0, disk_r = 0.0, disk_c = 0.0;
  int tick = 0, disk = 0;
  for (int r = std::max(0, static_cast<int>(cr) - 14); r < std::min(topdown.height(), static_cast<int>(cr) + 15); ++r) {
    for (int c = std::max(0, static_cast<int>(cc) - 14); c < std::min(topdown.width(), static_cast<int>(cc) + 15); ++c) {
      if (topdown.at(r, c) != kTopdownAgent) continue;
      const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
      if (d2 <= 20.0) {
        disk_r += r;
        disk_c += c;
        ++disk;
      }
    }
  }
  if (disk > 0) {
    cr = disk_r / disk;
    cc = disk_c / disk;
  }
  for (int r = std::max(0, static_cast<int>(cr) - 12); r < std::min(topdown.height(), static_cast<int>(cr) + 13); ++r) {
    for (int c = std::max(0, static_cast<int>(cc) - 12); c < std::min(topdown.width(), static_cast<int>(cc) + 13); ++c) {
      if (topdown.at(r, c) != kTopdownAgent) continue;
      const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
      if (d2 > 30.0) {
        dr += r - cr;
        dc += c - cc;
        ++tick;
      }
    }
  }
  m.row = cr;
  m.col = cc;
  m.heading = tick > 0 ? std::atan2(-dr, dc) : 0.0;
  m.found = true;
  return m;
}

double floor_range_at(double row) { return kCameraHeight * kFocalVertical / std::max(0.5, row - kHorizonRow); }

}  // namespace

SceneEvidence analyze_query(const PolicyQuery& query, const HeuristicParams& params) {
  const RgbImage& pano = query.panorama;
  SceneEvidence ev;
  ev.color = instruction_color(query.instruction);
  ev.target_range = std::numeric_limits<double>::infinity();

  // Target-colored columns and the lowest row each reaches.
  std::vector<int> bottom(pano.width(), -1);
  if (ev.color) {
    for (int c = 0; c < pano.width(); ++c) {
      if (!near_color(pano.at(kProbeRow, c), ev.color->rgb, params.color_tolerance)) continue;
      ++ev.target_columns;
      for (int r = kProbeRow; r < pano.height(); ++r) {
        if (near_color(pano.at(r, c), ev.color->rgb, params.color_tolerance)) bottom[c] = r;
      }
      ev.target_bottom_row = std::max(ev.target_bottom_row, bottom[c]);
      const double range = bottom[c] >= pano.height() - 1 ? 0.0 : floor_range_at(bottom[c] + 0.5);
      ev.target_range = std::min(ev.target_range, range);
    }
  }

  const AgentMarker agent = find_agent(query.topdown);
  const double px_per_m = 1.0 / params.topdown_meters_per_pixel;
  for (const auto& d : detect_labels(pano)) {
    if (d.match < 0.9) continue;
    LabelEvidence l;
    l.letter = d.letter;
    l.center = d.center;
    const double b = relative_bearing(d.center.col);
    for (int c = 0; c < pano.width() && ev.target_columns > 0; ++c) {
      if (bottom[c] < 0) continue;
      const double diff = std::abs(angle_diff(relative_bearing(c), b));
      l.keyword = std::max(l.keyword, 1.0 - diff / (params.keyword_window / kFocal));
    }
    int floor_px = 0, total = 0;
    for (int c = d.center.col - params.open_window; c <= d.center.col + params.open_window; ++c) {
      if (c < 0 || c >= pano.width()) continue;
      for (int r = kHorizonRow + 1; r < pano.height(); ++r) {
        const Rgb p = pano.at(r, c);
        ++total;
        floor_px += p == kFloorColor || p == kLabelRed || p == kLabelWhite;
      }
    }
    const double range = floor_range_at(d.center.row);
    l.open = 0.5 * (total ? static_cast<double>(floor_px) / total : 0.0) + 0.5 * std::min(range / 5.0, 1.0);
    if (agent.found) {
      const double wb = agent.heading + b;
      const double lr = agent.row - range * std::sin(wb) * px_per_m;
      const double lc = agent.col + range * std::cos(wb) * px_per_m;
      int n = 0, dark = 0;
      const int rad = static_cast<int>(std::lround(1.5 * px_per_m));
      for (int r = static_cast<int>(lr) - rad; r <= static_cast<int>(lr) + rad; ++r) {
        for (int c = static_cast<int>(lc) - rad; c <= static_cast<int>(lc) + rad; ++c) {
          if (!query.topdown.contains(r, c) || (r - lr) * (r - lr) + (c - lc) * (c - lc) > rad * rad) continue;
          ++n;
          dark += query.topdown.at(r, c) == kTopdownUnexplored;
        }
      }
      l.unexplored = n ? static_cast<double>(dark) / n : 0.0;
    }
    ev.labels.push_back(l);
  }
  std::sort(ev.labels.begin(), ev.labels.end(), [](const auto& a, const auto& b) { return a.letter < b.letter; });
  return ev;
}

std::string HeuristicPolicy::respond(const PolicyQuery& query) {
  const SceneEvidence ev = analyze_query(query, params_);
  const std::string color_name = ev.color ? ev.color->name : "target";
  if (ev.color && ev.target_range < params_.stop_range) {
    std::ostringstream think;
    think << "A " << color_name << " object reaches down to row " << ev.target_bottom_row << " of the panorama, "
          << "so it is about " << std::max(ev.target_range, floor_range_at(kPanoramaHeight - 0.5)) << " m away or closer.";
    return format_response(think.str(), "The " + color_name + " object is within reach, stopping.", "stop");
  }
  if (ev.labels.empty()) {
    return format_response("No labels are visible.", "Nothing to go to here, turning around.", "turn_around");
  }
  std::ostringstream think;
  const LabelEvidence* best = nullptr;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& l : ev.labels) {
    const double score = params_.keyword_weight * l.keyword + l.open + params_.unexplored_weight * l.unexplored;
    think << "Label " << l.letter << ": ";
    if (l.keyword > 0.0) think << color_name << " pixels nearby (" << l.keyword << "), ";
    think << "open floor " << l.open << ", unexplored " << l.unexplored << ". ";
    if (score > best_score) {
      best_score = score;
      best = &l;
    }
  }
  const std::string reason =
      best->keyword > 0.0 ? "it lies toward the " + color_name + " object" : "it leads into the most open, unexplored space";
  return format_response(think.str(), std::string("Going to ") + best->letter + " because " + reason + ".",
                         std::string(1, best->letter));
}

}  // namespace visor
