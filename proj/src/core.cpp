#include "layopt/core.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace layopt {

using nlohmann::json;

std::vector<RobotType> default_catalog() {
  std::vector<RobotType> catalog(3);
  catalog[0] = {"UR5e", RobotKind::arm, 1.0, 0.18, 0.85, 0.15, 5.0};
  catalog[1] = {"IRB4600", RobotKind::arm, 3.0, 0.4, 2.05, 0.35, 60.0};
  catalog[2] = {"belt", RobotKind::belt, 0.0, 0.0, 0.0, 0.1, 50.0};
  return catalog;
}

std::vector<Vec2> grid_points(const Vec2& floor_min, const Vec2& floor_max,
                              double spacing) {
  if (spacing <= 0.0) throw SceneError("spacing", "must be positive");
  const Vec2 span = floor_max - floor_min;
  if (span.x() < 0.0 || span.y() < 0.0)
    throw SceneError("floor", "floor_max must not be below floor_min");
  // Small slack so spans that are exact multiples of the pitch keep their
  // far boundary despite floating-point division.
  const double slack = 1e-9;
  const int nx = static_cast<int>(std::floor(span.x() / spacing + slack)) + 1;
  const int ny = static_cast<int>(std::floor(span.y() / spacing + slack)) + 1;
  std::vector<Vec2> points;
  points.reserve(static_cast<size_t>(nx) * static_cast<size_t>(ny));
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      points.emplace_back(floor_min.x() + ix * spacing,
                          floor_min.y() + iy * spacing);
  return points;
}

namespace {

bool inside_rect(const Vec2& p, const Vec2& lo, const Vec2& hi) {
  return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() &&
         p.y() <= hi.y();
}

void validate_type(const RobotType& type, const std::string& path) {
  if (type.id.empty()) throw SceneError(path + ".id", "must be non-empty");
  if (type.kind == RobotKind::arm) {
    if (type.reach_min <= 0.0 || type.reach_max <= type.reach_min)
      throw SceneError(path + ".reach_min",
                       "arm needs 0 < reach_min < reach_max");
  }
  if (type.clearance_radius <= 0.0)
    throw SceneError(path + ".clearance", "must be positive");
  if (type.payload <= 0.0)
    throw SceneError(path + ".payload", "must be positive");
  if (type.cost < 0.0) throw SceneError(path + ".cost", "must be nonnegative");
}

}  // namespace

void validate_scene(const Scene& scene) {
  if (scene.spacing <= 0.0) throw SceneError("spacing", "must be positive");
  if (!(scene.floor_min.x() < scene.floor_max.x()) ||
      !(scene.floor_min.y() < scene.floor_max.y()))
    throw SceneError("floor", "floor_min must be strictly below floor_max");
  if (scene.outputs.empty())
    throw SceneError("outputs", "scene needs at least one output");
  for (size_t i = 0; i < scene.outputs.size(); ++i) {
    const auto& out = scene.outputs[i];
    const std::string path = "outputs[" + std::to_string(i) + "]";
    if (!inside_rect(out.pos, scene.floor_min, scene.floor_max))
      throw SceneError(path + ".pos", "output lies outside the floor");
    if (out.weight <= 0.0)
      throw SceneError(path + ".weight", "must be positive");
  }
  if (scene.catalog.empty())
    throw SceneError("catalog", "scene needs at least one robot type");
  for (size_t i = 0; i < scene.catalog.size(); ++i)
    validate_type(scene.catalog[i], "catalog[" + std::to_string(i) + "]");
  for (size_t i = 0; i < scene.catalog.size(); ++i)
    for (size_t j = i + 1; j < scene.catalog.size(); ++j)
      if (scene.catalog[i].id == scene.catalog[j].id)
        throw SceneError("catalog[" + std::to_string(j) + "].id",
                         "duplicate robot type id");
  if (scene.costs.belt_per_meter < 0.0 || scene.costs.motor < 0.0 ||
      scene.costs.multiway_junction < 0.0 ||
      scene.costs.turning_junction < 0.0)
    throw SceneError("costs", "prices must be nonnegative");
}

namespace {

Vec2 parse_vec2(const json& node, const std::string& path) {
  if (!node.is_array() || node.size() != 2 || !node[0].is_number() ||
      !node[1].is_number())
    throw SceneError(path, "expected [x, y]");
  return Vec2(node[0].get<double>(), node[1].get<double>());
}

double parse_number(const json& node, const std::string& path) {
  if (!node.is_number()) throw SceneError(path, "expected a number");
  return node.get<double>();
}

const json& require(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SceneError(path, "missing field");
  return *it;
}

RobotType parse_type(const json& node, const std::string& path) {
  if (!node.is_object()) throw SceneError(path, "expected an object");
  RobotType type;
  const std::string id =
      require(node, "id", path + ".id").is_string()
          ? node["id"].get<std::string>()
          : throw SceneError(path + ".id", "expected a string");
  type.id = id;
  // Known ids start from their default entry so scenes may override fields
  // selectively; unknown ids must spell everything out.
  bool known = false;
  for (const auto& def : default_catalog())
    if (def.id == id) {
      type = def;
      known = true;
      break;
    }
  if (node.contains("kind")) {
    const auto& kind = node["kind"];
    if (!kind.is_string()) throw SceneError(path + ".kind", "expected a string");
    const std::string name = kind.get<std::string>();
    if (name == "arm")
      type.kind = RobotKind::arm;
    else if (name == "belt")
      type.kind = RobotKind::belt;
    else
      throw SceneError(path + ".kind", "unknown robot kind '" + name + "'");
  } else if (!known) {
    throw SceneError(path + ".kind", "missing field");
  }
  auto take = [&](const char* key, double& slot, bool needed) {
    if (node.contains(key))
      slot = parse_number(node[key], path + "." + key);
    else if (needed && !known)
      throw SceneError(path + "." + key, "missing field");
  };
  take("cost", type.cost, type.kind == RobotKind::arm);
  take("reach_min", type.reach_min, type.kind == RobotKind::arm);
  take("reach_max", type.reach_max, type.kind == RobotKind::arm);
  take("clearance", type.clearance_radius, true);
  take("payload", type.payload, true);
  return type;
}

}  // namespace

Scene parse_scene(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& err) {
    throw SceneError("document", std::string("invalid JSON: ") + err.what());
  }
  if (!doc.is_object()) throw SceneError("document", "expected an object");

  Scene scene;
  const json& floor = require(doc, "floor", "floor");
  if (!floor.is_object()) throw SceneError("floor", "expected an object");
  scene.floor_min = parse_vec2(require(floor, "min", "floor.min"), "floor.min");
  scene.floor_max = parse_vec2(require(floor, "max", "floor.max"), "floor.max");
  scene.spacing = parse_number(require(doc, "spacing", "spacing"), "spacing");
  scene.input = parse_vec2(require(doc, "input", "input"), "input");

  const json& outputs = require(doc, "outputs", "outputs");
  if (!outputs.is_array()) throw SceneError("outputs", "expected an array");
  for (size_t i = 0; i < outputs.size(); ++i) {
    const std::string path = "outputs[" + std::to_string(i) + "]";
    const json& node = outputs[i];
    if (!node.is_object()) throw SceneError(path, "expected an object");
    OutputPort port;
    port.pos = parse_vec2(require(node, "pos", path + ".pos"), path + ".pos");
    if (node.contains("weight"))
      port.weight = parse_number(node["weight"], path + ".weight");
    scene.outputs.push_back(port);
  }

  if (doc.contains("catalog")) {
    const json& catalog = doc["catalog"];
    if (!catalog.is_array()) throw SceneError("catalog", "expected an array");
    for (size_t i = 0; i < catalog.size(); ++i)
      scene.catalog.push_back(
          parse_type(catalog[i], "catalog[" + std::to_string(i) + "]"));
  } else {
    scene.catalog = default_catalog();
  }

  if (doc.contains("costs")) {
    const json& costs = doc["costs"];
    if (!costs.is_object()) throw SceneError("costs", "expected an object");
    auto take = [&](const char* key, double& slot) {
      if (costs.contains(key))
        slot = parse_number(costs[key], std::string("costs.") + key);
    };
    take("belt_per_meter", scene.costs.belt_per_meter);
    take("motor", scene.costs.motor);
    take("multiway", scene.costs.multiway_junction);
    take("turning", scene.costs.turning_junction);
  }

  validate_scene(scene);
  return scene;
}

std::string write_scene(const Scene& scene) {
  json doc;
  doc["floor"]["min"] = {scene.floor_min.x(), scene.floor_min.y()};
  doc["floor"]["max"] = {scene.floor_max.x(), scene.floor_max.y()};
  doc["spacing"] = scene.spacing;
  doc["input"] = {scene.input.x(), scene.input.y()};
  doc["outputs"] = json::array();
  for (const auto& out : scene.outputs)
    doc["outputs"].push_back(
        {{"pos", {out.pos.x(), out.pos.y()}}, {"weight", out.weight}});
  doc["catalog"] = json::array();
  for (const auto& type : scene.catalog)
    doc["catalog"].push_back(
        {{"id", type.id},
         {"kind", type.kind == RobotKind::arm ? "arm" : "belt"},
         {"cost", type.cost},
         {"reach_min", type.reach_min},
         {"reach_max", type.reach_max},
         {"clearance", type.clearance_radius},
         {"payload", type.payload}});
  doc["costs"] = {{"belt_per_meter", scene.costs.belt_per_meter},
                  {"motor", scene.costs.motor},
                  {"multiway", scene.costs.multiway_junction},
                  {"turning", scene.costs.turning_junction}};
  return doc.dump(2);
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneError("file", "cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scene(buffer.str());
}

}  // namespace layopt
