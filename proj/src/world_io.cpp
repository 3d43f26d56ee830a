#include "visor/world_io.hpp"

namespace visor {

using nlohmann::json;

json config_to_json(const WorldConfig& c) {
  return {{"width", c.width},       {"height", c.height},     {"resolution", c.resolution},
          {"rooms", c.rooms},       {"objects", c.objects},   {"min_room_side", c.min_room_side},
          {"min_door", c.min_door}, {"max_door", c.max_door}, {"max_retries", c.max_retries}};
}

WorldConfig config_from_json(const json& doc) {
  WorldConfig c;
  c.width = doc.value("width", c.width);
  c.height = doc.value("height", c.height);
  c.resolution = doc.value("resolution", c.resolution);
  c.rooms = doc.value("rooms", c.rooms);
  c.objects = doc.value("objects", c.objects);
  c.min_room_side = doc.value("min_room_side", c.min_room_side);
  c.min_door = doc.value("min_door", c.min_door);
  c.max_door = doc.value("max_door", c.max_door);
  c.max_retries = doc.value("max_retries", c.max_retries);
  return c;
}

json pose_to_json(const Pose& p) { return {{"x", p.x}, {"y", p.y}, {"heading", p.heading}}; }

Pose pose_from_json(const json& doc) {
  return {doc.at("x").get<double>(), doc.at("y").get<double>(), doc.at("heading").get<double>()};
}

json world_to_json(const GridWorld& world) {
  json rle = json::array();
  const auto& cells = world.cells();
  for (std::size_t i = 0; i < cells.size();) {
    std::size_t j = i;
    while (j < cells.size() && cells[j] == cells[i]) ++j;
    rle.push_back({static_cast<int>(cells[i]), j - i});
    i = j;
  }
  json rooms = json::array();
  for (const auto& r : world.rooms()) {
    rooms.push_back({{"name", r.name}, {"x0", r.x0}, {"y0", r.y0}, {"x1", r.x1}, {"y1", r.y1}});
  }
  json objects = json::array();
  for (const auto& o : world.objects()) {
    json rels = json::array();
    for (const auto& rel : o.extrinsic) {
      rels.push_back({{"kind", to_string(rel.kind)}, {"subject", rel.subject}, {"object_id", rel.object_id}});
    }
    objects.push_back({{"id", o.id},
                       {"category", o.category},
                       {"anchor", {o.anchor.x(), o.anchor.y()}},
                       {"color", o.intrinsic.color},
                       {"material", o.intrinsic.material},
                       {"on_top", o.intrinsic.on_top},
                       {"relations", rels},
                       {"render_color", {o.render_color.r, o.render_color.g, o.render_color.b}}});
  }
  return {{"version", kWorldFormatVersion},
          {"seed", world.seed()},
          {"config", config_to_json(world.config())},
          {"width", world.width()},
          {"height", world.height()},
          {"resolution", world.resolution()},
          {"grid_rle", rle},
          {"rooms", rooms},
          {"objects", objects}};
}

GridWorld world_from_json(const json& doc) {
  if (doc.value("version", 0) != kWorldFormatVersion) throw Error("unsupported world document version");
  const int w = doc.at("width").get<int>();
  const int h = doc.at("height").get<int>();
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(w) * h);
  for (const auto& run : doc.at("grid_rle")) {
    const auto value = static_cast<Cell>(run.at(0).get<int>());
    cells.insert(cells.end(), run.at(1).get<std::size_t>(), value);
  }
  std::vector<Room> rooms;
  for (const auto& r : doc.at("rooms")) {
    rooms.push_back({r.at("x0").get<int>(), r.at("y0").get<int>(), r.at("x1").get<int>(), r.at("y1").get<int>(),
                     r.at("name").get<std::string>()});
  }
  std::vector<SceneObject> objects;
  for (const auto& o : doc.at("objects")) {
    SceneObject obj;
    obj.id = o.at("id").get<int>();
    obj.category = o.at("category").get<std::string>();
    obj.anchor = Vec2(o.at("anchor").at(0).get<double>(), o.at("anchor").at(1).get<double>());
    obj.intrinsic = {o.at("color").get<std::string>(), o.at("material").get<std::string>(),
                     o.at("on_top").get<std::string>()};
    for (const auto& rel : o.at("relations")) {
      obj.extrinsic.push_back({relation_from_string(rel.at("kind").get<std::string>()),
                               rel.at("subject").get<std::string>(), rel.at("object_id").get<int>()});
    }
    const auto& rc = o.at("render_color");
    obj.render_color = {rc.at(0).get<std::uint8_t>(), rc.at(1).get<std::uint8_t>(), rc.at(2).get<std::uint8_t>()};
    objects.push_back(std::move(obj));
  }
  return GridWorld(w, h, doc.at("resolution").get<double>(), std::move(cells), std::move(rooms),
                   std::move(objects), doc.at("seed").get<std::uint64_t>(), config_from_json(doc.at("config")));
}

}  // namespace visor
