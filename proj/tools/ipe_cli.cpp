// Command-line front end for scene generation, rendering, simulation,
// inference, datasets and the experiment pipelines.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ipe/harness/dataset.hpp"
#include "ipe/harness/experiments.hpp"
#include "ipe/harness/io.hpp"

namespace fs = std::filesystem;
using namespace ipe;
using namespace ipe::harness;

namespace {

std::ofstream open_out(const std::string& path)
{
  const fs::path p(path);
  if (p.has_parent_path())
    fs::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

std::vector<std::size_t> select(const std::vector<SceneState>& scenes, int only)
{
  std::vector<std::size_t> ids;
  if (only >= 0) {
    if (static_cast<std::size_t>(only) >= scenes.size())
      throw std::out_of_range("scene index " + std::to_string(only) + " out of range");
    ids.push_back(static_cast<std::size_t>(only));
  } else {
    for (std::size_t i = 0; i < scenes.size(); ++i)
      ids.push_back(i);
  }
  return ids;
}

std::string numbered(const std::string& dir, std::size_t i, const std::string& suffix)
{
  char name[48];
  std::snprintf(name, sizeof name, "%06zu%s", i, suffix.c_str());
  return (fs::path(dir) / name).string();
}

void write_experiment(const ResultTable& table, const std::string& out_dir, const std::string& id)
{
  fs::create_directories(out_dir);
  write_results_tsv(table, (fs::path(out_dir) / (id + "_results.tsv")).string());
  write_records_tsv(table.records, (fs::path(out_dir) / (id + "_predictions.tsv")).string());
  for (const ResultRow& r : table.rows)
    std::cout << r.condition << "\taccuracy=" << fmt(r.acc.overall, 3) << "\tstable=" << fmt(r.acc.stable, 3)
              << "\tunstable=" << fmt(r.acc.unstable, 3) << "\tmean_p_fall=" << fmt(r.mean_p_fall, 3)
              << "\tn=" << r.n << '\n';
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Simulation-based block-tower stability prediction"};
  app.require_subcommand(1);

  std::uint64_t seed = 2017;
  unsigned threads = 0;
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (0 = hardware)")->capture_default_str();

  // gen-scenes
  auto* gen = app.add_subcommand("gen-scenes", "generate random stacks as JSON lines");
  int gen_n = 100;
  int gen_blocks = 4;
  std::optional<double> gen_stddev;
  std::string gen_out = "scenes.jsonl";
  gen->add_option("-n,--count", gen_n)->capture_default_str();
  gen->add_option("--blocks", gen_blocks)->capture_default_str();
  gen->add_option("--stddev", gen_stddev, "offset stddev (default: calibrated for a 50% stable rate)");
  gen->add_option("-o,--out", gen_out)->capture_default_str();

  // render
  auto* ren = app.add_subcommand("render", "render scenes from sampled cameras to PGM");
  std::string ren_scenes;
  std::string ren_dir = "renders";
  int ren_res = 256;
  bool ren_triplet = false;
  bool ren_restricted = false;
  ren->add_option("--scenes", ren_scenes)->required();
  ren->add_option("--out-dir", ren_dir)->capture_default_str();
  ren->add_option("--resolution", ren_res)->capture_default_str();
  ren->add_flag("--triplet", ren_triplet, "render three views 45 degrees apart");
  ren->add_flag("--restricted", ren_restricted, "narrow camera distribution");

  // gen-dataset
  auto* ds = app.add_subcommand("gen-dataset", "rendered, labeled dataset with index");
  DatasetConfig ds_cfg;
  ds->add_option("-n,--count", ds_cfg.n_train, "training images")->capture_default_str();
  ds->add_option("--test-count", ds_cfg.n_test, "test images")->capture_default_str();
  ds->add_option("--blocks", ds_cfg.n_blocks)->capture_default_str();
  ds->add_option("--resolution", ds_cfg.resolution)->capture_default_str();
  ds->add_option("--out-dir", ds_cfg.out_dir)->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "noisy perturbed simulation of each scene");
  std::string sim_scenes;
  std::string sim_out = "outcomes.jsonl";
  std::string sim_traj;
  double sim_phi = 0.0;
  double sim_sigma = 0.0;
  int sim_only = -1;
  sim->add_option("--scenes", sim_scenes)->required();
  sim->add_option("--phi", sim_phi)->capture_default_str();
  sim->add_option("--sigma", sim_sigma)->capture_default_str();
  sim->add_option("--scene-index", sim_only, "simulate one scene only");
  sim->add_option("-o,--out", sim_out)->capture_default_str();
  sim->add_option("--trajectory", sim_traj, "per-step body poses as JSON lines");

  // ipe
  auto* ip = app.add_subcommand("ipe", "stability predictions from scene states");
  std::string ip_scenes;
  std::string ip_out = "predictions.tsv";
  IpeParams ip_params;
  ip->add_option("--scenes", ip_scenes)->required();
  ip->add_option("--sigma", ip_params.sigma)->capture_default_str();
  ip->add_option("--phi", ip_params.phi)->capture_default_str();
  ip->add_option("--n-sims", ip_params.n_sims)->capture_default_str();
  ip->add_flag("--scale-phi", ip_params.scale_phi_by_block_count, "phi = 10 N per block");
  ip->add_option("-o,--out", ip_out)->capture_default_str();

  // infer
  auto* inf = app.add_subcommand("infer", "render scenes and sample stack posteriors");
  std::string inf_scenes;
  std::string inf_out = "posterior.jsonl";
  int inf_only = -1;
  int inf_thin = 1;
  vision::MhConfig mh;
  inf->add_option("--scenes", inf_scenes)->required();
  inf->add_option("--scene-index", inf_only, "infer one scene only");
  inf->add_option("--steps", mh.steps)->capture_default_str();
  inf->add_option("--burn-in", mh.burn_in)->capture_default_str();
  inf->add_option("--resolution", mh.resolution)->capture_default_str();
  inf->add_flag("--infer-count", mh.infer_block_count, "also infer the number of blocks");
  inf->add_option("--thin", inf_thin, "keep every k-th sample")->capture_default_str();
  inf->add_option("-o,--out", inf_out)->capture_default_str();

  // experiments
  ExperimentConfig ex;
  std::string ex_dir = "results";
  int ex_mh_steps = 5000;
  auto add_exp = [&](const std::string& name, const std::string& help, int default_n) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("-n,--count", ex.n_scenes, "scenes (per level / per block count where applicable)")
        ->default_val(default_n);
    s->add_option("--out-dir", ex_dir)->capture_default_str();
    s->add_option("--n-sims", ex.ipe.n_sims)->capture_default_str();
    s->add_flag("--vision", ex.use_vision, "infer scene states from renders first (slow)");
    s->add_option("--mh-steps", ex_mh_steps)->capture_default_str();
    return s;
  };
  auto* e1 = add_exp("exp1", "accuracy over the sigma x phi grid", 1000);
  e1->add_option("--sigmas", ex.sigmas)->delimiter(',')->capture_default_str();
  e1->add_option("--phis", ex.phis)->delimiter(',')->capture_default_str();
  auto* e3 = add_exp("exp3", "balanced stacks at increasing visual instability", 100);
  e3->add_option("--levels", ex.levels)->delimiter(',')->capture_default_str();
  auto* e4 = add_exp("exp4", "transfer across block counts", 200);
  e4->add_option("--block-counts", ex.block_counts)->delimiter(',')->capture_default_str();

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "offset stddev giving a 50% stable rate");
  int cal_blocks = 4;
  int cal_n = 10000;
  cal->add_option("--blocks", cal_blocks)->capture_default_str();
  cal->add_option("-n,--count", cal_n)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const double stddev = gen_stddev ? *gen_stddev : default_stddev(gen_blocks);
      std::ofstream out = open_out(gen_out);
      for (int i = 0; i < gen_n; ++i)
        out << scene_line(generate_scene(
                   GenParams(gen_blocks, stddev, derive_seed(seed, stream::scene, static_cast<std::uint64_t>(i)))))
            << '\n';
    } else if (*ren) {
      const std::vector<SceneState> scenes = read_scenes(ren_scenes);
      render::RenderConfig rc;
      rc.resolution = ren_res;
      fs::create_directories(ren_dir);
      std::ofstream cams = open_out((fs::path(ren_dir) / "cameras.jsonl").string());
      const render::CameraSampling sampling = ren_restricted ? render::CameraSampling::restricted()
                                                             : render::CameraSampling{};
      for (std::size_t i = 0; i < scenes.size(); ++i) {
        const render::Camera cam = render::sample_camera(scenes[i], derive_seed(seed, stream::camera, i), sampling);
        cams << json{{"scene_id", i}, {"camera", camera_to_json(cam)}}.dump() << '\n';
        if (ren_triplet) {
          const auto views = render::render_triplet(scenes[i], cam, rc);
          for (std::size_t v = 0; v < views.size(); ++v)
            render::write_pgm(views[v], numbered(ren_dir, i, "_v" + std::to_string(v) + ".pgm"));
        } else {
          render::write_pgm(render::render_scene(scenes[i], cam, rc), numbered(ren_dir, i, ".pgm"));
        }
      }
    } else if (*ds) {
      ds_cfg.seed = seed;
      ds_cfg.threads = threads;
      const auto entries = gen_dataset(ds_cfg);
      std::cout << "wrote " << entries.size() << " images to " << ds_cfg.out_dir << '\n';
    } else if (*sim) {
      const std::vector<SceneState> scenes = read_scenes(sim_scenes);
      std::ofstream out = open_out(sim_out);
      std::optional<std::ofstream> traj;
      if (!sim_traj.empty())
        traj = open_out(sim_traj);
      for (std::size_t i : select(scenes, sim_only)) {
        dynamics::TrajectoryObserver obs;
        if (traj)
          obs = [&](int step, double t, const std::vector<dynamics::RigidBody>& bodies) {
            json j = bodies_to_json(step, t, bodies);
            j["scene_id"] = i;
            *traj << j.dump() << '\n';
          };
        const dynamics::SimOutcome o =
            dynamics::simulate_scene(scenes[i], dynamics::SimConfig{}, sim_phi, sim_sigma,
                                     derive_seed(seed, stream::ipe, i), obs);
        json j = outcome_to_json(o);
        j["scene_id"] = i;
        out << j.dump() << '\n';
      }
    } else if (*ip) {
      const std::vector<SceneState> scenes = read_scenes(ip_scenes);
      ExperimentConfig cfg;
      cfg.master_seed = seed;
      cfg.threads = threads;
      std::vector<PredictionRecord> records;
      predict_condition("ipe", scenes, {}, ip_params, cfg, records);
      write_records_tsv(records, ip_out);
    } else if (*inf) {
      const std::vector<SceneState> scenes = read_scenes(inf_scenes);
      std::ofstream out = open_out(inf_out);
      for (std::size_t i : select(scenes, inf_only)) {
        const std::uint64_t scene_seed = derive_seed(seed, stream::vision, i);
        const render::Camera cam = render::sample_camera(scenes[i], derive_seed(scene_seed, stream::camera));
        render::RenderConfig rc;
        rc.resolution = mh.resolution;
        const vision::Triplet observed = render::render_triplet(scenes[i], cam, rc);
        vision::MhConfig cfg = mh;
        cfg.seed = derive_seed(scene_seed, stream::vision);
        const vision::ScenePosterior post = vision::infer_scene(observed, render::triplet_cameras(cam), cfg);
        for (const std::string& w : post.warnings)
          std::cerr << "scene " << i << ": " << w << '\n';
        for (std::size_t k = 0; k < post.samples.size(); k += static_cast<std::size_t>(std::max(1, inf_thin))) {
          json j = posterior_sample_to_json(k, post.samples[k]);
          j["scene_id"] = i;
          out << j.dump() << '\n';
        }
      }
    } else if (*e1 || *e3 || *e4) {
      ex.master_seed = seed;
      ex.threads = threads;
      ex.mh.steps = ex_mh_steps;
      ex.mh.burn_in = std::min(ex.mh.burn_in, ex_mh_steps / 5);
      if (*e1)
        write_experiment(run_exp1(ex), ex_dir, "exp1");
      else if (*e3)
        write_experiment(run_exp3(ex), ex_dir, "exp3");
      else
        write_experiment(run_exp4(ex), ex_dir, "exp4");
    } else if (*cal) {
      std::cout << fmt(calibrate_stddev(cal_blocks, cal_n), 6) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
