#include "pcprep/boxes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace pcprep {

Box3D make_box(double cx, double cy, double cz, double l, double w, double h, double heading) {
  if (!(l > 0.0) || !(w > 0.0) || !(h > 0.0)) throw std::invalid_argument("box sizes must be > 0");
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(cz) || !std::isfinite(heading))
    throw std::invalid_argument("box parameters must be finite");
  return Box3D{cx, cy, cz, l, w, h, normalize_angle(heading)};
}

RotationZ RotationZ::from_heading(double heading) {
  return RotationZ{std::cos(heading), std::sin(heading)};
}

Point to_local(const Point& p, const Box3D& box) {
  const RotationZ r = RotationZ::from_heading(box.heading);
  const double dx = p.x - box.cx;
  const double dy = p.y - box.cy;
  Point out;
  out.x = dx * r.cos_h + dy * r.sin_h;
  out.y = -dx * r.sin_h + dy * r.cos_h;
  out.z = p.z - box.cz;
  out.extras = p.extras;
  return out;
}

Point from_local(const Point& p_local, const Box3D& box) {
  const RotationZ r = RotationZ::from_heading(box.heading);
  Point out;
  out.x = p_local.x * r.cos_h - p_local.y * r.sin_h + box.cx;
  out.y = p_local.x * r.sin_h + p_local.y * r.cos_h + box.cy;
  out.z = p_local.z + box.cz;
  out.extras = p_local.extras;
  return out;
}

bool contains(const Box3D& box, const Point& p) {
  const Point local = to_local(p, box);
  return std::abs(local.x) <= box.l / 2 && std::abs(local.y) <= box.w / 2 && std::abs(local.z) <= box.h / 2;
}

std::pair<Box3D, PointCloud> rescale_object(const Box3D& box, const PointCloud& points, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("scale factor must be > 0");

  Box3D scaled = box;
  scaled.l *= alpha;
  scaled.w *= alpha;
  scaled.h *= alpha;

  PointCloud out;
  out.feature_dim = points.feature_dim;
  out.points.reserve(points.size());
  for (const Point& p : points.points) {
    Point local = to_local(p, box);
    local.x *= alpha;
    local.y *= alpha;
    local.z *= alpha;
    out.points.push_back(from_local(local, box));
  }
  return {scaled, std::move(out)};
}

namespace {

struct Vec2 {
  double x, y;
};

// Footprint corners, counter-clockwise.
std::array<Vec2, 4> bev_corners(const Box3D& b) {
  const RotationZ r = RotationZ::from_heading(b.heading);
  const double hl = b.l / 2, hw = b.w / 2;
  const std::array<Vec2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Vec2, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i].x = local[i].x * r.cos_h - local[i].y * r.sin_h + b.cx;
    out[i].y = local[i].x * r.sin_h + local[i].y * r.cos_h + b.cy;
  }
  return out;
}

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Sutherland-Hodgman clip of a convex polygon against the half-plane left
// of edge (e0, e1).
std::vector<Vec2> clip_edge(const std::vector<Vec2>& poly, const Vec2& e0, const Vec2& e1) {
  std::vector<Vec2> out;
  out.reserve(poly.size() + 1);
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& cur = poly[i];
    const Vec2& nxt = poly[(i + 1) % n];
    const double dc = cross(e0, e1, cur);
    const double dn = cross(e0, e1, nxt);
    if (dc >= 0.0) out.push_back(cur);
    if ((dc > 0.0 && dn < 0.0) || (dc < 0.0 && dn > 0.0)) {
      const double t = dc / (dc - dn);
      out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
    }
  }
  return out;
}

double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    acc += a.x * b.y - b.x * a.y;
  }
  return std::abs(acc) / 2.0;
}

// Clipping A against B and B against A can round differently; ordering the
// operands makes the IoU functions exactly symmetric.
bool box_ordered_before(const Box3D& a, const Box3D& b) {
  return std::tie(a.cx, a.cy, a.cz, a.l, a.w, a.h, a.heading) <
         std::tie(b.cx, b.cy, b.cz, b.l, b.w, b.h, b.heading);
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const Box3D& first = box_ordered_before(b, a) ? b : a;
  const Box3D& second = box_ordered_before(b, a) ? a : b;
  const auto ca = bev_corners(first);
  const auto cb = bev_corners(second);
  std::vector<Vec2> poly(ca.begin(), ca.end());
  for (int i = 0; i < 4 && !poly.empty(); ++i)
    poly = clip_edge(poly, cb[i], cb[(i + 1) % 4]);
  return polygon_area(poly);
}

}  // namespace

double iou_bev(const Box3D& a, const Box3D& b) {
  const double inter = bev_intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.l * a.w + b.l * b.w - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double z_lo = std::max(a.cz - a.h / 2, b.cz - b.h / 2);
  const double z_hi = std::min(a.cz + a.h / 2, b.cz + b.h / 2);
  const double z_overlap = z_hi - z_lo;
  if (z_overlap <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * z_overlap;
  if (inter <= 0.0) return 0.0;
  const double uni = a.l * a.w * a.h + b.l * b.w * b.h - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

}  // namespace pcprep
