#pragma once

// Analysis-by-synthesis: score stack hypotheses by rendering them from the
// known cameras and comparing blurred images under Gaussian pixel noise.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "ipe/render/renderer.hpp"
#include "ipe/vision/mh.hpp"

namespace ipe::vision {

using Triplet = std::array<render::Image, 3>;
using CameraTriplet = std::array<render::Camera, 3>;

/// Precomputes everything about the observation that does not depend on the
/// hypothesis: blurred observed views and per-camera backgrounds.
class ImageLikelihood {
public:
  ImageLikelihood(const Triplet& observed, const CameraTriplet& cameras, const MhConfig& cfg,
                  const render::RenderConfig& render_cfg = {})
      : cameras_(cameras), cfg_(cfg), render_cfg_(render_cfg)
  {
    render_cfg_.resolution = cfg.resolution;
    render_cfg_.validate();
    for (std::size_t v = 0; v < 3; ++v) {
      if (observed[v].width != cfg.resolution || observed[v].height != cfg.resolution)
        throw std::invalid_argument("ImageLikelihood: observed image resolution does not match MhConfig");
      blurred_[v] = render::gaussian_blur(observed[v], cfg.blur_width);
      backgrounds_[v] = render::render_background(cameras[v], render_cfg_);
    }
    const double s = cfg.pixel_noise_stddev;
    const double pixels = 3.0 * cfg.resolution * cfg.resolution;
    normalizer_ = -pixels * std::log(s * std::sqrt(2.0 * std::numbers::pi));
  }

  double operator()(const SceneState& hypothesis) const
  {
    const double inv_two_var = 1.0 / (2.0 * cfg_.pixel_noise_stddev * cfg_.pixel_noise_stddev);
    double sq = 0.0;
    for (std::size_t v = 0; v < 3; ++v) {
      render::Frame frame;
      try {
        frame = render::rasterize(hypothesis, cameras_[v], render_cfg_, backgrounds_[v]);
      } catch (const std::invalid_argument&) {
        return -std::numeric_limits<double>::infinity();  // block behind a camera
      }
      const render::Image rendered = render::gaussian_blur(frame.image, cfg_.blur_width);
      const auto& a = rendered.pixels;
      const auto& b = blurred_[v].pixels;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sq += d * d;
      }
    }
    return normalizer_ - sq * inv_two_var;
  }

  const render::Image& background(std::size_t view) const { return backgrounds_.at(view); }
  const CameraTriplet& cameras() const { return cameras_; }

private:
  CameraTriplet cameras_;
  MhConfig cfg_;
  render::RenderConfig render_cfg_;
  std::array<render::Image, 3> blurred_;
  std::array<render::Image, 3> backgrounds_;
  double normalizer_ = 0.0;
};

inline double log_likelihood(const SceneState& hypothesis, const Triplet& observed, const CameraTriplet& cameras,
                             const MhConfig& cfg)
{
  return ImageLikelihood(observed, cameras, cfg)(hypothesis);
}

/// Horizontal position of the pile: the point closest (least squares) to
/// the rays through each view's foreground centroid.
inline Vec2 triangulate_silhouette(const Triplet& observed, const ImageLikelihood& model)
{
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  Vec3 rhs = Vec3::Zero();
  int used = 0;
  for (std::size_t v = 0; v < 3; ++v) {
    const render::Image& img = observed[v];
    const render::Image& bg = model.background(v);
    double sx = 0.0;
    double sy = 0.0;
    double count = 0.0;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        if (std::abs(img.at(x, y) - bg.at(x, y)) > 0.02) {
          sx += x + 0.5;
          sy += y + 0.5;
          count += 1.0;
        }
    if (count == 0.0)
      continue;
    const render::Projector proj(model.cameras()[v], img.width, img.height);
    const Vec3 d = proj.ray(sx / count, sy / count);
    const Eigen::Matrix3d m = Eigen::Matrix3d::Identity() - d * d.transpose();
    a += m;
    rhs += m * proj.eye();
    ++used;
  }
  if (used < 2)
    return Vec2::Zero();
  return a.ldlt().solve(rhs).head<2>();
}

/// Initial hypothesis: an aligned stack of initial_block_count blocks above
/// the triangulated silhouette centroid.
inline SceneState initial_hypothesis(const Triplet& observed, const ImageLikelihood& model, const MhConfig& cfg)
{
  const Vec2 c = triangulate_silhouette(observed, model);
  return stack_from_horizontal(std::vector<Vec2>(static_cast<std::size_t>(cfg.initial_block_count), c));
}

/// Posterior over stacks given a noiseless-camera image triplet.
inline ScenePosterior infer_scene(const Triplet& observed, const CameraTriplet& cameras, const MhConfig& cfg)
{
  cfg.validate();
  const ImageLikelihood likelihood(observed, cameras, cfg);
  const SceneState init = initial_hypothesis(observed, likelihood, cfg);
  return run_mh(
      init, [&](const SceneState& s) { return likelihood(s) + log_prior(s, cfg); }, cfg);
}

}  // namespace ipe::vision
