#pragma once

#include "visor/world.hpp"

#include <json.hpp>

namespace visor {

inline constexpr int kWorldFormatVersion = 1;

/// Versioned world document: run-length-encoded grid, rooms, objects, seed
/// and generator config.
nlohmann::json world_to_json(const GridWorld& world);
GridWorld world_from_json(const nlohmann::json& doc);

nlohmann::json config_to_json(const WorldConfig& config);
WorldConfig config_from_json(const nlohmann::json& doc);

nlohmann::json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& doc);

}  // namespace visor
