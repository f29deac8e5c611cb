#pragma once

// Experiment pipelines: the sigma/phi accuracy grid, balanced boundary
// stacks, and block-count transfer. Each scene's seeds come from the master
// seed through derive_seed, so results do not depend on thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipe/core/parallel.hpp"
#include "ipe/core/scene.hpp"
#include "ipe/harness/io.hpp"
#include "ipe/harness/metrics.hpp"
#include "ipe/predict/ipe.hpp"
#include "ipe/render/renderer.hpp"
#include "ipe/vision/inference.hpp"

namespace ipe::harness {

namespace stream {
inline constexpr std::uint64_t scene = 1;
inline constexpr std::uint64_t ipe = 2;
inline constexpr std::uint64_t camera = 3;
inline constexpr std::uint64_t vision = 4;
inline constexpr std::uint64_t boundary = 5;
inline constexpr std::uint64_t train = 6;
inline constexpr std::uint64_t test = 7;
}  // namespace stream

struct ExperimentConfig {
  std::string id = "exp1";
  std::uint64_t master_seed = 2017;
  /// exp1: scenes in the test set; exp3: scenes per level; exp4: per count.
  int n_scenes = 1000;
  std::vector<double> sigmas{0.0, 0.05, 0.1, 0.15, 0.2};
  std::vector<double> phis{0.0, 35.0, 40.0, 45.0, 50.0};
  std::vector<int> block_counts{3, 4, 5};
  std::vector<int> levels{1, 2, 3, 4};
  IpeParams ipe{};
  dynamics::SimConfig sim{};
  /// Slow path: infer each scene from rendered images before simulating.
  bool use_vision = false;
  vision::MhConfig mh{};
  int posterior_thin = 100;
  unsigned threads = 0;

  void validate() const
  {
    if (n_scenes < 1)
      throw std::invalid_argument("ExperimentConfig: n_scenes must be > 0");
    if (sigmas.empty() || phis.empty() || block_counts.empty() || levels.empty())
      throw std::invalid_argument("ExperimentConfig: grids must be non-empty");
    if (posterior_thin < 1)
      throw std::invalid_argument("ExperimentConfig: posterior_thin must be >= 1");
    ipe.validate();
  }
};

struct PredictionRecord {
  std::size_t scene_id = 0;
  std::string condition;
  double sigma = 0.0;
  double phi = 0.0;
  int n_blocks = 0;
  double p_fall = 0.0;
  double graded_response = 0.0;
  StabilityLabel predicted = StabilityLabel::stable;
  StabilityLabel truth = StabilityLabel::stable;
};

struct ResultRow {
  std::string condition;
  AccuracyBreakdown acc;
  double mean_graded = 0.0;
  double mean_p_fall = 0.0;
  /// Pearson r between this condition's per-scene graded responses and
  /// the reference condition's; NaN when undefined.
  double graded_corr_ref = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<PredictionRecord> records;

  const ResultRow& row(const std::string& condition) const
  {
    for (const ResultRow& r : rows)
      if (r.condition == condition)
        return r;
    throw std::out_of_range("ResultTable: no condition " + condition);
  }
};

inline std::string grid_condition(double sigma, double phi)
{
  std::ostringstream os;
  os << "sigma=" << sigma << ",phi=" << phi;
  return os.str();
}

/// Summary row for one condition, from its records in scene order.
inline ResultRow summarize_condition(const std::string& condition, const std::vector<PredictionRecord>& records)
{
  std::vector<StabilityLabel> pred;
  std::vector<StabilityLabel> truth;
  ResultRow row;
  row.condition = condition;
  for (const PredictionRecord& r : records) {
    if (r.condition != condition)
      continue;
    pred.push_back(r.predicted);
    truth.push_back(r.truth);
    row.mean_graded += r.graded_response;
    row.mean_p_fall += r.p_fall;
  }
  row.acc = accuracy(pred, truth);
  row.n = pred.size();
  row.mean_graded /= static_cast<double>(row.n);
  row.mean_p_fall /= static_cast<double>(row.n);
  return row;
}

/// Rebuilds the summary rows (in first-seen condition order) from records.
inline std::vector<ResultRow> rows_from_records(const std::vector<PredictionRecord>& records,
                                                const std::string& reference_condition = "")
{
  std::vector<std::string> order;
  for (const PredictionRecord& r : records)
    if (std::find(order.begin(), order.end(), r.condition) == order.end())
      order.push_back(r.condition);
  std::map<std::string, std::vector<double>> graded;
  for (const PredictionRecord& r : records)
    graded[r.condition].push_back(r.graded_response);

  std::vector<ResultRow> rows;
  for (const std::string& c : order) {
    ResultRow row = summarize_condition(c, records);
    if (!reference_condition.empty() && graded.count(reference_condition) != 0 &&
        graded[reference_condition].size() == graded[c].size()) {
      try {
        row.graded_corr_ref = pearson(graded[c], graded[reference_condition]);
      } catch (const UndefinedCorrelation&) {
      }
    }
    rows.push_back(row);
  }
  return rows;
}

/// Perception for the slow path: render the scene's triplet from a sampled
/// camera and return thinned posterior states.
inline std::vector<SceneState> perceive(const SceneState& truth, std::uint64_t seed, const vision::MhConfig& mh_base,
                                        int thin, const render::CameraSampling& sampling = {})
{
  const render::Camera camera = render::sample_camera(truth, derive_seed(seed, stream::camera), sampling);
  render::RenderConfig rc;
  rc.resolution = mh_base.resolution;
  const vision::CameraTriplet cams = render::triplet_cameras(camera);
  const vision::Triplet observed{render::render_scene(truth, cams[0], rc), render::render_scene(truth, cams[1], rc),
                                 render::render_scene(truth, cams[2], rc)};
  vision::MhConfig mh = mh_base;
  mh.seed = derive_seed(seed, stream::vision);
  return vision::infer_scene(observed, cams, mh).thinned(thin);
}

/// Runs one IPE condition over a scene list and appends its records.
inline void predict_condition(const std::string& condition, const std::vector<SceneState>& scenes,
                              const std::vector<std::vector<SceneState>>& perceived, const IpeParams& params,
                              const ExperimentConfig& cfg, std::vector<PredictionRecord>& records)
{
  std::vector<PredictionRecord> out(scenes.size());
  parallel_for(
      scenes.size(),
      [&](std::size_t i) {
        const std::uint64_t seed = derive_seed(cfg.master_seed, stream::ipe, i);
        const IpePrediction pred = perceived.empty() ? ipe_predict(scenes[i], params, cfg.sim, seed)
                                                     : ipe_predict(perceived[i], params, cfg.sim, seed);
        PredictionRecord& r = out[i];
        r.scene_id = i;
        r.condition = condition;
        r.sigma = params.sigma;
        r.phi = params.scale_phi_by_block_count ? scale_phi(static_cast<int>(scenes[i].size()), params) : params.phi;
        r.n_blocks = static_cast<int>(scenes[i].size());
        r.p_fall = pred.p_fall;
        r.graded_response = pred.graded_response;
        r.predicted = ipe_classify(pred, params);
        r.truth = label_of(analytic_stability(scenes[i]).stable);
      },
      cfg.threads);
  records.insert(records.end(), out.begin(), out.end());
}

inline std::vector<std::vector<SceneState>> perceive_all(const std::vector<SceneState>& scenes,
                                                         const ExperimentConfig& cfg, std::uint64_t stream_offset,
                                                         const render::CameraSampling& sampling = {})
{
  std::vector<std::vector<SceneState>> out;
  if (!cfg.use_vision)
    return out;
  out.resize(scenes.size());
  parallel_for(
      scenes.size(),
      [&](std::size_t i) {
        out[i] = perceive(scenes[i], derive_seed(cfg.master_seed, stream::vision + stream_offset, i), cfg.mh,
                          cfg.posterior_thin, sampling);
      },
      cfg.threads);
  return out;
}

inline std::vector<SceneState> generate_test_scenes(int n_blocks, int count, double stddev, std::uint64_t master,
                                                    std::uint64_t stream_id)
{
  std::vector<SceneState> scenes;
  scenes.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    scenes.push_back(
        generate_scene(GenParams(n_blocks, stddev, derive_seed(master, stream_id, static_cast<std::uint64_t>(i)))));
  return scenes;
}

inline constexpr double kReferenceSigma = 0.1;
inline constexpr double kReferencePhi = 40.0;

/// Accuracy over the sigma x phi grid on 4-block scenes. Every cell uses
/// the same scenes and the same per-scene simulation seeds.
inline ResultTable run_exp1(const ExperimentConfig& cfg)
{
  cfg.validate();
  const std::vector<SceneState> scenes =
      generate_test_scenes(4, cfg.n_scenes, default_stddev(4), cfg.master_seed, stream::scene);
  const auto perceived = perceive_all(scenes, cfg, 0);

  ResultTable table;
  for (double sigma : cfg.sigmas) {
    for (double phi : cfg.phis) {
      IpeParams params = cfg.ipe;
      params.sigma = sigma;
      params.phi = phi;
      params.scale_phi_by_block_count = false;
      predict_condition(grid_condition(sigma, phi), scenes, perceived, params, cfg, table.records);
    }
  }
  table.rows = rows_from_records(table.records, grid_condition(kReferenceSigma, kReferencePhi));
  return table;
}

inline std::string level_condition(int level) { return "level=" + std::to_string(level); }

inline std::vector<SceneState> boundary_scenes(int level, int count, std::uint64_t master)
{
  BoundaryParams bp;
  bp.level = level;
  bp.stable = true;
  bp.n_blocks = 4;
  bp.proposal_stddev = 2.0 * default_stddev(4);
  std::vector<SceneState> scenes;
  for (int i = 0; i < count; ++i)
    scenes.push_back(generate_boundary_scene(
        bp, derive_seed(master, stream::boundary, static_cast<std::uint64_t>(level) * 1000003ULL + i)));
  return scenes;
}

/// Balanced (stable) stacks at visual-instability levels; cameras restricted
/// on the vision path.
inline ResultTable run_exp3(const ExperimentConfig& cfg)
{
  cfg.validate();
  ResultTable table;
  for (int level : cfg.levels) {
    const std::vector<SceneState> scenes = boundary_scenes(level, cfg.n_scenes, cfg.master_seed);
    const auto perceived =
        perceive_all(scenes, cfg, 100 + static_cast<std::uint64_t>(level), render::CameraSampling::restricted());
    IpeParams params = cfg.ipe;
    params.scale_phi_by_block_count = false;
    predict_condition(level_condition(level), scenes, perceived, params, cfg, table.records);
  }
  table.rows = rows_from_records(table.records);
  return table;
}

inline std::string count_condition(int n_blocks) { return "blocks=" + std::to_string(n_blocks); }

/// Transfer across block counts: generation stddev calibrated per count and
/// phi scaled by block count. The vision path also infers the count.
inline ResultTable run_exp4(const ExperimentConfig& cfg)
{
  cfg.validate();
  ResultTable table;
  ExperimentConfig vcfg = cfg;
  vcfg.mh.infer_block_count = true;
  for (int n : cfg.block_counts) {
    const std::vector<SceneState> scenes =
        generate_test_scenes(n, cfg.n_scenes, calibrate_stddev(n), cfg.master_seed, stream::scene + 100 * n);
    const auto perceived = perceive_all(scenes, vcfg, 200 + static_cast<std::uint64_t>(n));
    IpeParams params = cfg.ipe;
    params.scale_phi_by_block_count = true;
    predict_condition(count_condition(n), scenes, perceived, params, cfg, table.records);
  }
  table.rows = rows_from_records(table.records);
  return table;
}

inline void write_results_tsv(const ResultTable& table, const std::string& path)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path + " for writing");
  out << "condition\taccuracy\tstable_accuracy\tunstable_accuracy\tmean_graded\tmean_p_fall\tgraded_corr_ref\tn\n";
  for (const ResultRow& r : table.rows)
    out << r.condition << '\t' << fmt(r.acc.overall) << '\t' << fmt(r.acc.stable) << '\t' << fmt(r.acc.unstable)
        << '\t' << fmt(r.mean_graded) << '\t' << fmt(r.mean_p_fall) << '\t' << fmt(r.graded_corr_ref) << '\t' << r.n
        << '\n';
  if (!out)
    throw std::runtime_error("write failed: " + path);
}

inline void write_records_tsv(const std::vector<PredictionRecord>& records, const std::string& path)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path + " for writing");
  out << "scene_id\tcondition\tsigma\tphi\tn_blocks\tp_fall\tgraded_response\tlabel\ttruth\n";
  for (const PredictionRecord& r : records)
    out << r.scene_id << '\t' << r.condition << '\t' << fmt(r.sigma) << '\t' << fmt(r.phi) << '\t' << r.n_blocks
        << '\t' << fmt(r.p_fall) << '\t' << fmt(r.graded_response) << '\t' << to_string(r.predicted) << '\t'
        << to_string(r.truth) << '\n';
  if (!out)
    throw std::runtime_error("write failed: " + path);
}

inline StabilityLabel parse_label(const std::string& s)
{
  if (s == "stable")
    return StabilityLabel::stable;
  if (s == "unstable")
    return StabilityLabel::unstable;
  throw std::runtime_error("unknown label '" + s + "'");
}

inline std::vector<PredictionRecord> read_records_tsv(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<PredictionRecord> out;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::istringstream row(line);
    PredictionRecord r;
    std::string label;
    std::string truth;
    std::getline(row, line, '\t');
    r.scene_id = std::stoul(line);
    std::getline(row, r.condition, '\t');
    row >> r.sigma >> r.phi >> r.n_blocks >> r.p_fall >> r.graded_response >> label >> truth;
    if (!row && !row.eof())
      throw std::runtime_error("malformed record in " + path);
    r.predicted = parse_label(label);
    r.truth = parse_label(truth);
    out.push_back(r);
  }
  return out;
}

}  // namespace ipe::harness
