#pragma once

// Labeled image datasets: generated scenes, one sampled camera each,
// rendered to PGM and indexed in a CSV file.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipe/core/parallel.hpp"
#include "ipe/core/scene.hpp"
#include "ipe/harness/experiments.hpp"
#include "ipe/harness/io.hpp"
#include "ipe/render/renderer.hpp"

namespace ipe::harness {

struct DatasetConfig {
  int n_train = 1000;
  int n_test = 0;
  int n_blocks = 4;
  int resolution = 256;
  std::string out_dir;
  std::uint64_t seed = 2017;
  unsigned threads = 0;

  void validate() const
  {
    if (n_train + n_test < 1 || n_train < 0 || n_test < 0)
      throw std::invalid_argument("DatasetConfig: need at least one image");
    if (n_blocks < 2)
      throw std::invalid_argument("DatasetConfig: n_blocks must be >= 2");
    if (out_dir.empty())
      throw std::invalid_argument("DatasetConfig: out_dir is empty");
  }
};

struct DatasetEntry {
  std::string image;  // relative to out_dir
  std::string split;
  SceneState scene;
  render::Camera camera;
  bool stable = false;
};

/// Train scenes come from one seed namespace and test scenes from another,
/// so the splits never share a scene seed.
inline DatasetEntry dataset_entry(const DatasetConfig& cfg, double stddev, bool test, int index)
{
  DatasetEntry e;
  e.split = test ? "test" : "train";
  const std::uint64_t scene_seed =
      derive_seed(cfg.seed, test ? stream::test : stream::train, static_cast<std::uint64_t>(index));
  e.scene = generate_scene(GenParams(cfg.n_blocks, stddev, scene_seed));
  e.camera = render::sample_camera(e.scene, derive_seed(scene_seed, stream::camera));
  e.stable = analytic_stability(e.scene).stable;
  char name[32];
  std::snprintf(name, sizeof name, "%06d.pgm", index);
  e.image = "images/" + e.split + "/" + name;
  return e;
}

/// Writes images/{train,test}/NNNNNN.pgm, scenes.jsonl and index.csv under
/// out_dir. On failure every file written so far is removed, along with
/// out_dir itself if this call created it.
inline std::vector<DatasetEntry> gen_dataset(const DatasetConfig& cfg)
{
  namespace fs = std::filesystem;
  cfg.validate();
  render::RenderConfig rc;
  rc.resolution = cfg.resolution;
  rc.validate();

  const fs::path root(cfg.out_dir);
  const bool created_root = !fs::exists(root);
  std::vector<fs::path> written;
  std::vector<fs::path> made_dirs;
  auto make_dir = [&](const fs::path& p) {
    if (!fs::exists(p)) {
      fs::create_directories(p);
      made_dirs.push_back(p);
    }
  };

  std::vector<DatasetEntry> entries;
  try {
    make_dir(root);
    make_dir(root / "images");
    make_dir(root / "images" / "train");
    if (cfg.n_test > 0)
      make_dir(root / "images" / "test");

    const double stddev = default_stddev(cfg.n_blocks);
    for (int i = 0; i < cfg.n_train; ++i)
      entries.push_back(dataset_entry(cfg, stddev, false, i));
    for (int i = 0; i < cfg.n_test; ++i)
      entries.push_back(dataset_entry(cfg, stddev, true, i));

    for (const DatasetEntry& e : entries)
      written.push_back(root / e.image);
    parallel_for(
        entries.size(),
        [&](std::size_t i) { render::write_pgm(render::render_scene(entries[i].scene, entries[i].camera, rc),
                                               (root / entries[i].image).string()); },
        cfg.threads);

    written.push_back(root / "scenes.jsonl");
    std::ofstream scenes(root / "scenes.jsonl");
    written.push_back(root / "index.csv");
    std::ofstream index(root / "index.csv");
    if (!scenes || !index)
      throw std::runtime_error("cannot open dataset files in " + cfg.out_dir);
    index << "image,split,scene_line,stable,n_blocks,visual_instability\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const DatasetEntry& e = entries[i];
      json j = scene_to_json(e.scene);
      j["image"] = e.image;
      j["split"] = e.split;
      j["camera"] = camera_to_json(e.camera);
      scenes << j.dump() << '\n';
      index << e.image << ',' << e.split << ',' << i << ',' << (e.stable ? 1 : 0) << ',' << e.scene.size() << ','
            << fmt(visual_instability(e.scene).score) << '\n';
    }
    scenes.flush();
    index.flush();
    if (!scenes || !index)
      throw std::runtime_error("write failed in " + cfg.out_dir);
  } catch (...) {
    std::error_code ec;
    for (const fs::path& p : written)
      fs::remove(p, ec);
    if (created_root)
      fs::remove_all(root, ec);
    else
      for (auto it = made_dirs.rbegin(); it != made_dirs.rend(); ++it)
        fs::remove(*it, ec);
    throw;
  }
  return entries;
}

}  // namespace ipe::harness
