#pragma once

// Narrow phase for cubes: separating-axis box/box test with reference-face
// clipping, plus the box/ground-plane test.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "ipe/dynamics/body.hpp"

namespace ipe::dynamics {

/// Normal points from body b (or the ground) toward body a.
struct Contact {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double penetration = 0.0;
};

inline constexpr double kContactTolerance = 1e-4;

/// Corners at or below the ground plane z = 0 (within tolerance).
inline std::vector<Contact> contact_manifold_ground(const RigidBody& body, double tolerance = kContactTolerance)
{
  std::vector<Contact> out;
  if (body.position.z() - body.half() * std::sqrt(3.0) > tolerance)
    return out;
  for (const Vec3& c : body.corners()) {
    if (c.z() <= tolerance) {
      const double pen = std::max(0.0, -c.z());
      out.push_back({Vec3(c.x(), c.y(), -0.5 * pen), Vec3::UnitZ(), pen});
    }
  }
  return out;
}

namespace detail {

using Polygon = std::vector<Vec3>;

/// Keeps the part of the polygon with dot(n, p) <= offset.
inline Polygon clip_polygon(const Polygon& poly, const Vec3& n, double offset)
{
  Polygon out;
  if (poly.empty())
    return out;
  out.reserve(poly.size() + 2);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec3& p = poly[i];
    const Vec3& q = poly[(i + 1) % poly.size()];
    const double dp = n.dot(p) - offset;
    const double dq = n.dot(q) - offset;
    if (dp <= 0.0)
      out.push_back(p);
    // Interpolate from the inside endpoint so the result does not depend on
    // the polygon's winding.
    if (dp < 0.0 && dq > 0.0)
      out.push_back(p + (q - p) * (dp / (dp - dq)));
    else if (dp > 0.0 && dq < 0.0)
      out.push_back(q + (p - q) * (dq / (dq - dp)));
  }
  return out;
}

/// Face contact: `ref_normal` is the outward normal of the reference face on
/// `ref`, pointing toward `inc`. Returned normals point from `ref` to `inc`.
inline std::vector<Contact> face_contacts(const RigidBody& ref, int ref_axis, const Vec3& ref_normal,
                                          const RigidBody& inc, double tolerance)
{
  const Mat3 rr = ref.rotation();
  const Mat3 ri = inc.rotation();

  int inc_axis = 0;
  double best = -1.0;
  for (int j = 0; j < 3; ++j) {
    const double d = std::abs(ri.col(j).dot(ref_normal));
    if (d > best) {
      best = d;
      inc_axis = j;
    }
  }
  const double sign = ri.col(inc_axis).dot(ref_normal) > 0.0 ? -1.0 : 1.0;
  const Vec3 inc_face_center = inc.position + sign * inc.half() * ri.col(inc_axis);
  const Vec3 iu = ri.col((inc_axis + 1) % 3) * inc.half();
  const Vec3 iv = ri.col((inc_axis + 2) % 3) * inc.half();
  Polygon poly{inc_face_center + iu + iv, inc_face_center - iu + iv, inc_face_center - iu - iv,
               inc_face_center + iu - iv};

  for (int k = 1; k <= 2; ++k) {
    const Vec3 side = rr.col((ref_axis + k) % 3);
    const double c = side.dot(ref.position);
    poly = clip_polygon(poly, side, c + ref.half());
    poly = clip_polygon(poly, Vec3(-side), -c + ref.half());
  }

  std::vector<Contact> out;
  const double face_offset = ref_normal.dot(ref.position) + ref.half();
  for (const Vec3& p : poly) {
    const double depth = face_offset - ref_normal.dot(p);
    if (depth < -tolerance)
      continue;
    const double pen = std::max(0.0, depth);
    out.push_back({p + ref_normal * (0.5 * depth), ref_normal, pen});
  }
  return out;
}

}  // namespace detail

/// Contacts between two cubes; empty when separated. At most 8 points.
inline std::vector<Contact> contact_manifold(const RigidBody& a, const RigidBody& b,
                                             double tolerance = kContactTolerance)
{
  const Vec3 d = b.position - a.position;
  const double reach = (a.half() + b.half()) * std::sqrt(3.0);
  if (d.squaredNorm() > (reach + tolerance) * (reach + tolerance))
    return {};

  const Mat3 ra = a.rotation();
  const Mat3 rb = b.rotation();
  const double ha = a.half();
  const double hb = b.half();

  auto overlap_on = [&](const Vec3& axis) {
    double pa = 0.0;
    double pb = 0.0;
    for (int k = 0; k < 3; ++k) {
      pa += std::abs(ra.col(k).dot(axis));
      pb += std::abs(rb.col(k).dot(axis));
    }
    return ha * pa + hb * pb - std::abs(d.dot(axis));
  };

  // Best face axis (A faces first, then B; ties favor earlier axes).
  double face_overlap = std::numeric_limits<double>::infinity();
  int face_index = -1;
  for (int i = 0; i < 6; ++i) {
    const Vec3 axis = i < 3 ? Vec3(ra.col(i)) : Vec3(rb.col(i - 3));
    const double o = overlap_on(axis);
    if (o < -tolerance)
      return {};
    if (o < face_overlap - 1e-9) {
      face_overlap = o;
      face_index = i;
    }
  }

  double edge_overlap = std::numeric_limits<double>::infinity();
  int edge_i = -1;
  int edge_j = -1;
  Vec3 edge_axis = Vec3::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Vec3 axis = ra.col(i).cross(rb.col(j));
      const double len = axis.norm();
      if (len < 1e-6)
        continue;
      axis /= len;
      const double o = overlap_on(axis);
      if (o < -tolerance)
        return {};
      if (o < edge_overlap) {
        edge_overlap = o;
        edge_i = i;
        edge_j = j;
        edge_axis = axis;
      }
    }
  }

  // Prefer face contacts unless an edge axis is clearly shallower.
  if (edge_i >= 0 && edge_overlap < 0.95 * face_overlap - 0.01) {
    if (edge_axis.dot(d) < 0.0)
      edge_axis = -edge_axis;  // now points from a toward b
    Vec3 pa = a.position;
    Vec3 pb = b.position;
    for (int k = 0; k < 3; ++k) {
      if (k != edge_i)
        pa += (ra.col(k).dot(edge_axis) > 0.0 ? ha : -ha) * ra.col(k);
      if (k != edge_j)
        pb += (rb.col(k).dot(edge_axis) > 0.0 ? -hb : hb) * rb.col(k);
    }
    const Vec3 ua = ra.col(edge_i);
    const Vec3 ub = rb.col(edge_j);
    const Vec3 r = pa - pb;
    const double uab = ua.dot(ub);
    const double denom = 1.0 - uab * uab;
    double sa = 0.0;
    double sb = 0.0;
    if (denom > 1e-12) {
      sa = (uab * ub.dot(r) - ua.dot(r)) / denom;
      sb = (ub.dot(r) - uab * ua.dot(r)) / denom;
    }
    sa = std::clamp(sa, -ha, ha);
    sb = std::clamp(sb, -hb, hb);
    const Vec3 qa = pa + sa * ua;
    const Vec3 qb = pb + sb * ub;
    return {{0.5 * (qa + qb), -edge_axis, std::max(0.0, edge_overlap)}};
  }

  if (face_index < 3) {
    Vec3 n = ra.col(face_index);
    if (n.dot(d) < 0.0)
      n = -n;
    std::vector<Contact> out = detail::face_contacts(a, face_index, n, b, tolerance);
    for (Contact& c : out)
      c.normal = -c.normal;
    return out;
  }
  Vec3 n = rb.col(face_index - 3);
  if (n.dot(d) > 0.0)
    n = -n;  // B's face pointing toward A
  return detail::face_contacts(b, face_index - 3, n, a, tolerance);
}

}  // namespace ipe::dynamics
