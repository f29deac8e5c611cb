#pragma once

// Software renderer for block stacks: a perspective camera placed in
// cylindrical coordinates around the pile, depth-buffered rasterization of
// cube faces, flat Lambertian shading from one point light plus ambient, and
// an infinite ground plane.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ipe/core/random.hpp"
#include "ipe/core/scene.hpp"
#include "ipe/render/image.hpp"

namespace ipe::render {

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

struct Camera {
  double r = 11.0;
  double theta = 0.0;  // radians
  double z = 3.0;
  Vec3 focal_point = Vec3(0.0, 0.0, 2.0);
  double tilt = 0.0;  // degrees, roll about the view axis
  double fov = 45.0;  // degrees, vertical and horizontal
  /// Ground point the cylindrical coordinates are measured from.
  Vec2 axis_origin = Vec2::Zero();

  Vec3 position() const
  {
    return Vec3(axis_origin.x() + r * std::cos(theta), axis_origin.y() + r * std::sin(theta), z);
  }

  Camera rotated_by(double dtheta) const
  {
    Camera c = *this;
    c.theta += dtheta;
    return c;
  }

  bool operator==(const Camera&) const = default;
};

struct RenderConfig {
  int resolution = 256;
  Vec3 light_position = Vec3(0.0, 0.0, 16.0);
  double ambient = 0.2;
  double block_albedo = 0.9;
  double ground_albedo = 0.5;
  double sky = 0.0;

  void validate() const
  {
    if (resolution < 32 || resolution > 1024)
      throw std::invalid_argument("RenderConfig: resolution must be in [32, 1024]");
    if (ambient < 0.0 || ambient > 1.0)
      throw std::invalid_argument("RenderConfig: ambient must be in [0, 1]");
  }
};

/// World-to-image projection for one camera at one resolution.
class Projector {
public:
  Projector(const Camera& camera, int width, int height) : width_(width), height_(height)
  {
    if (!(camera.r > 0.0))
      throw std::invalid_argument("Camera: r must be > 0");
    eye_ = camera.position();
    forward_ = (camera.focal_point - eye_).normalized();
    Vec3 right = forward_.cross(Vec3::UnitZ());
    if (right.norm() < 1e-9)
      throw std::invalid_argument("Camera: view direction is vertical");
    right.normalize();
    const Vec3 up = right.cross(forward_);
    const double t = deg2rad(camera.tilt);
    right_ = std::cos(t) * right + std::sin(t) * up;
    up_ = -std::sin(t) * right + std::cos(t) * up;
    tan_half_ = std::tan(0.5 * deg2rad(camera.fov));
  }

  const Vec3& eye() const { return eye_; }

  Vec3 to_camera(const Vec3& p) const
  {
    const Vec3 d = p - eye_;
    return Vec3(d.dot(right_), d.dot(up_), d.dot(forward_));
  }

  /// Continuous pixel coordinates (x right, y down) and view depth.
  Vec3 project(const Vec3& p) const
  {
    const Vec3 c = to_camera(p);
    const double nx = c.x() / (c.z() * tan_half_);
    const double ny = c.y() / (c.z() * tan_half_);
    return Vec3(0.5 * (nx + 1.0) * width_, 0.5 * (1.0 - ny) * height_, c.z());
  }

  /// Unit world-space ray through continuous pixel coordinates.
  Vec3 ray(double px, double py) const
  {
    const double nx = 2.0 * px / width_ - 1.0;
    const double ny = 1.0 - 2.0 * py / height_;
    return (forward_ + nx * tan_half_ * right_ + ny * tan_half_ * up_).normalized();
  }

private:
  int width_;
  int height_;
  Vec3 eye_;
  Vec3 forward_;
  Vec3 right_;
  Vec3 up_;
  double tan_half_ = 1.0;
};

inline constexpr double kNearPlane = 0.1;

/// True when every block corner lies in front of the camera and projects
/// inside the image.
inline bool in_frustum(const SceneState& scene, const Camera& camera)
{
  const Projector proj(camera, 1, 1);
  for (const Block& b : scene.blocks) {
    const Eigen::Matrix3d rot = b.orientation.toRotationMatrix();
    const double h = 0.5 * b.side;
    for (int i = 0; i < 8; ++i) {
      const Vec3 corner = b.center + rot * Vec3((i & 1) ? h : -h, (i & 2) ? h : -h, (i & 4) ? h : -h);
      const Vec3 p = proj.project(corner);
      if (p.z() < kNearPlane || p.x() < 0.0 || p.x() > 1.0 || p.y() < 0.0 || p.y() > 1.0)
        return false;
    }
  }
  return true;
}

struct CameraSampling {
  double r_mean = 11.0;
  double r_stddev = 0.3;
  double theta_min = 0.0;
  double theta_max = std::numbers::pi / 2.0;
  double z_mean = 3.0;
  double z_stddev = 0.01;
  double focal_stddev = 0.2;
  double tilt_stddev = 2.0;  // degrees
  int max_attempts = 100;

  /// Narrowed distribution for boundary-case stimuli.
  static CameraSampling restricted()
  {
    CameraSampling s;
    s.theta_max = std::numbers::pi / 8.0;
    s.tilt_stddev = 0.0;
    return s;
  }

  static CameraSampling noiseless()
  {
    CameraSampling s;
    s.r_stddev = 0.0;
    s.z_stddev = 0.0;
    s.focal_stddev = 0.0;
    s.tilt_stddev = 0.0;
    return s;
  }
};

inline Vec3 pile_center(const SceneState& scene)
{
  Vec3 c = Vec3::Zero();
  for (const Block& b : scene.blocks)
    c += b.center;
  return c / static_cast<double>(scene.blocks.size());
}

/// Draws a camera around the pile; redraws until the pile is fully visible
/// from the camera and from both of its triplet rotations.
inline Camera sample_camera(const SceneState& scene, std::uint64_t seed, const CameraSampling& s = {})
{
  if (scene.blocks.empty())
    throw std::invalid_argument("sample_camera: empty scene");
  Rng rng = make_rng(seed);
  const Vec3 center = pile_center(scene);
  for (int attempt = 0; attempt < s.max_attempts; ++attempt) {
    Camera cam;
    cam.axis_origin = scene.blocks.front().horizontal();
    cam.r = s.r_mean + s.r_stddev * standard_normal(rng);
    cam.theta = uniform(rng, s.theta_min, s.theta_max);
    cam.z = s.z_mean + s.z_stddev * standard_normal(rng);
    const double fx = standard_normal(rng);
    const double fy = standard_normal(rng);
    const double fz = standard_normal(rng);
    cam.focal_point = center + s.focal_stddev * Vec3(fx, fy, fz);
    cam.tilt = s.tilt_stddev * standard_normal(rng);
    if (cam.r > 0.0 && in_frustum(scene, cam) && in_frustum(scene, cam.rotated_by(std::numbers::pi / 4.0)) &&
        in_frustum(scene, cam.rotated_by(std::numbers::pi / 2.0)))
      return cam;
  }
  throw std::runtime_error("sample_camera: no camera containing the scene after " + std::to_string(s.max_attempts) +
                           " draws");
}

/// Shaded image plus the index of the block visible at each pixel (-1 for
/// ground or sky).
struct Frame {
  Image image;
  std::vector<int> block_id;

  std::size_t silhouette_area() const
  {
    std::size_t n = 0;
    for (int id : block_id)
      n += id >= 0 ? 1 : 0;
    return n;
  }
};

inline double lambert(const RenderConfig& cfg, double albedo, const Vec3& normal, const Vec3& point)
{
  const Vec3 l = (cfg.light_position - point).normalized();
  const double diffuse = std::max(0.0, normal.dot(l));
  return std::clamp(albedo * (cfg.ambient + (1.0 - cfg.ambient) * diffuse), 0.0, 1.0);
}

/// Ground and sky only; blocks are rasterized over it.
inline Image render_background(const Camera& camera, const RenderConfig& cfg)
{
  cfg.validate();
  const int n = cfg.resolution;
  const Projector proj(camera, n, n);
  Image img(n, n, cfg.sky);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const Vec3 d = proj.ray(x + 0.5, y + 0.5);
      if (d.z() >= -1e-12)
        continue;
      const double t = -proj.eye().z() / d.z();
      const Vec3 g = proj.eye() + t * d;
      img.at(x, y) = lambert(cfg, cfg.ground_albedo, Vec3::UnitZ(), g);
    }
  }
  return img;
}

/// Rasterizes the scene's visible cube faces over a prepared background.
inline Frame rasterize(const SceneState& scene, const Camera& camera, const RenderConfig& cfg, const Image& background)
{
  const int n = cfg.resolution;
  const Projector proj(camera, n, n);
  Frame frame{background, std::vector<int>(static_cast<std::size_t>(n) * n, -1)};
  std::vector<double> inv_depth(static_cast<std::size_t>(n) * n, 0.0);

  for (std::size_t bi = 0; bi < scene.blocks.size(); ++bi) {
    const Block& b = scene.blocks[bi];
    const Eigen::Matrix3d rot = b.orientation.toRotationMatrix();
    const double h = 0.5 * b.side;
    for (int axis = 0; axis < 3; ++axis) {
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        const Vec3 normal = sgn * rot.col(axis);
        const Vec3 face_center = b.center + h * normal;
        if (normal.dot(proj.eye() - face_center) <= 0.0)
          continue;
        const Vec3 u = h * rot.col((axis + 1) % 3);
        const Vec3 v = h * rot.col((axis + 2) % 3);
        const double shade = lambert(cfg, cfg.block_albedo, normal, face_center);
        const std::array<Vec3, 4> quad{proj.project(face_center + u + v), proj.project(face_center - u + v),
                                       proj.project(face_center - u - v), proj.project(face_center + u - v)};
        for (const Vec3& q : quad)
          if (q.z() < kNearPlane)
            throw std::invalid_argument("rasterize: block behind the near plane");

        for (int tri = 0; tri < 2; ++tri) {
          const Vec3& p0 = quad[0];
          const Vec3& p1 = quad[static_cast<std::size_t>(1 + tri)];
          const Vec3& p2 = quad[static_cast<std::size_t>(2 + tri)];
          const double area = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p1.y() - p0.y()) * (p2.x() - p0.x());
          if (std::abs(area) < 1e-12)
            continue;
          const int x0 = std::max(0, static_cast<int>(std::floor(std::min({p0.x(), p1.x(), p2.x()}))));
          const int x1 = std::min(n - 1, static_cast<int>(std::ceil(std::max({p0.x(), p1.x(), p2.x()}))));
          const int y0 = std::max(0, static_cast<int>(std::floor(std::min({p0.y(), p1.y(), p2.y()}))));
          const int y1 = std::min(n - 1, static_cast<int>(std::ceil(std::max({p0.y(), p1.y(), p2.y()}))));
          for (int y = y0; y <= y1; ++y) {
            const double py = y + 0.5;
            for (int x = x0; x <= x1; ++x) {
              const double px = x + 0.5;
              const double w0 = ((p1.x() - px) * (p2.y() - py) - (p1.y() - py) * (p2.x() - px)) / area;
              const double w1 = ((p2.x() - px) * (p0.y() - py) - (p2.y() - py) * (p0.x() - px)) / area;
              const double w2 = 1.0 - w0 - w1;
              if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0)
                continue;
              const double iz = w0 / p0.z() + w1 / p1.z() + w2 / p2.z();
              const std::size_t idx = static_cast<std::size_t>(y) * n + x;
              if (iz <= inv_depth[idx])
                continue;
              inv_depth[idx] = iz;
              frame.image.pixels[idx] = shade;
              frame.block_id[idx] = static_cast<int>(bi);
            }
          }
        }
      }
    }
  }
  return frame;
}

inline Frame render_frame(const SceneState& scene, const Camera& camera, const RenderConfig& cfg)
{
  return rasterize(scene, camera, cfg, render_background(camera, cfg));
}

inline Image render_scene(const SceneState& scene, const Camera& camera, const RenderConfig& cfg = {})
{
  return render_frame(scene, camera, cfg).image;
}

inline constexpr double kTripletStep = std::numbers::pi / 4.0;

/// Cameras at theta, theta + 45 deg and theta + 90 deg.
inline std::array<Camera, 3> triplet_cameras(const Camera& base)
{
  return {base, base.rotated_by(kTripletStep), base.rotated_by(2.0 * kTripletStep)};
}

inline std::array<Image, 3> render_triplet(const SceneState& scene, const Camera& base, const RenderConfig& cfg = {})
{
  const std::array<Camera, 3> cams = triplet_cameras(base);
  return {render_scene(scene, cams[0], cfg), render_scene(scene, cams[1], cfg), render_scene(scene, cams[2], cfg)};
}

}  // namespace ipe::render
