#pragma once

// Line-delimited JSON records for scenes, simulation trajectories and
// posterior samples; tab-separated tables for predictions and results.

#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipe/core/scene.hpp"
#include "ipe/dynamics/simulate.hpp"
#include "ipe/render/renderer.hpp"
#include "ipe/vision/mh.hpp"

namespace ipe::harness {

using nlohmann::json;

inline json camera_to_json(const render::Camera& c)
{
  return {{"r", c.r},
          {"theta", c.theta},
          {"z", c.z},
          {"focal_point", {c.focal_point.x(), c.focal_point.y(), c.focal_point.z()}},
          {"tilt", c.tilt},
          {"fov", c.fov},
          {"axis_origin", {c.axis_origin.x(), c.axis_origin.y()}}};
}

inline render::Camera camera_from_json(const json& j)
{
  render::Camera c;
  c.r = j.at("r").get<double>();
  c.theta = j.at("theta").get<double>();
  c.z = j.at("z").get<double>();
  const auto& f = j.at("focal_point");
  c.focal_point = Vec3(f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>());
  c.tilt = j.at("tilt").get<double>();
  c.fov = j.value("fov", 45.0);
  if (j.contains("axis_origin"))
    c.axis_origin = Vec2(j["axis_origin"].at(0).get<double>(), j["axis_origin"].at(1).get<double>());
  return c;
}

/// One scene per line: seed, n_blocks, centers, side, density, stable,
/// visual_instability (labels computed on write).
inline json scene_to_json(const SceneState& scene)
{
  json centers = json::array();
  for (const Block& b : scene.blocks)
    centers.push_back({b.center.x(), b.center.y(), b.center.z()});
  const double side = scene.blocks.empty() ? 1.0 : scene.blocks.front().side;
  const double density = scene.blocks.empty() ? 500.0 : scene.blocks.front().density;
  return {{"seed", scene.seed},
          {"n_blocks", scene.blocks.size()},
          {"centers", centers},
          {"side", side},
          {"density", density},
          {"stable", analytic_stability(scene).stable},
          {"visual_instability", visual_instability(scene).score}};
}

inline SceneState scene_from_json(const json& j)
{
  SceneState scene;
  scene.seed = j.at("seed").get<std::uint64_t>();
  const double side = j.value("side", 1.0);
  const double density = j.value("density", 500.0);
  const auto& centers = j.at("centers");
  if (centers.size() != j.at("n_blocks").get<std::size_t>())
    throw std::runtime_error("scene record: n_blocks does not match centers");
  for (const auto& c : centers) {
    Block b;
    b.center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    b.side = side;
    b.density = density;
    scene.blocks.push_back(b);
  }
  return scene;
}

inline std::string scene_line(const SceneState& scene) { return scene_to_json(scene).dump(); }

inline std::vector<json> read_jsonl(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  std::vector<json> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty())
      continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<SceneState> read_scenes(const std::string& path)
{
  std::vector<SceneState> scenes;
  for (const json& j : read_jsonl(path))
    scenes.push_back(scene_from_json(j));
  return scenes;
}

inline void write_scenes(const std::vector<SceneState>& scenes, const std::string& path)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path + " for writing");
  for (const SceneState& s : scenes)
    out << scene_line(s) << '\n';
  if (!out)
    throw std::runtime_error("write failed: " + path);
}

inline json outcome_to_json(const dynamics::SimOutcome& o)
{
  return {{"fell", o.fell},
          {"top_block_z_drop", o.top_block_z_drop},
          {"per_block_displacement", o.per_block_displacement},
          {"steps_executed", o.steps_executed}};
}

inline json bodies_to_json(int step, double t, const std::vector<dynamics::RigidBody>& bodies)
{
  json arr = json::array();
  for (const dynamics::RigidBody& b : bodies)
    arr.push_back({{"p", {b.position.x(), b.position.y(), b.position.z()}},
                   {"q", {b.orientation.w(), b.orientation.x(), b.orientation.y(), b.orientation.z()}}});
  return {{"step", step}, {"t", t}, {"bodies", arr}};
}

inline json posterior_sample_to_json(std::size_t index, const vision::PosteriorSample& s)
{
  json centers = json::array();
  for (const Block& b : s.state.blocks)
    centers.push_back({b.center.x(), b.center.y(), b.center.z()});
  return {{"index", index}, {"log_posterior", s.log_posterior}, {"n_blocks", s.state.size()}, {"centers", centers}};
}

/// Fixed-precision number formatting for tables, so result files are
/// byte-stable.
inline std::string fmt(double v, int precision = 6)
{
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace ipe::harness
