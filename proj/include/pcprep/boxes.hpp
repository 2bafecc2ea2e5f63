#pragma once

#include <utility>

#include "pcprep/geometry.hpp"

namespace pcprep {

// 7-DoF gravity-aligned box: center, size, heading about +z.
struct Box3D {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double l = 1.0;      // > 0
  double w = 1.0;      // > 0
  double h = 1.0;      // > 0
  double heading = 0;  // radians in [-pi, pi)
};

// Validates sizes and normalizes heading into [-pi, pi).
Box3D make_box(double cx, double cy, double cz, double l, double w, double h, double heading);

struct RotationZ {
  double cos_h = 1.0;
  double sin_h = 0.0;

  static RotationZ from_heading(double heading);
};

// Box local frame: translate by -center, then apply the row-vector rotation
// (dx, dy, dz) * R with R = [[cos, -sin, 0], [sin, cos, 0], [0, 0, 1]].
// from_local is the exact inverse (multiply by R^T, add center).
Point to_local(const Point& p, const Box3D& box);
Point from_local(const Point& p_local, const Box3D& box);

// Closed boundary: |local| <= half size on every axis.
bool contains(const Box3D& box, const Point& p);

// Scales the in-box points and the box size by alpha about the box center,
// in the box local frame. Center and heading are unchanged, extras kept.
std::pair<Box3D, PointCloud> rescale_object(const Box3D& box, const PointCloud& points, double alpha);

// Area IoU of the heading-rotated footprints, by convex polygon clipping.
double iou_bev(const Box3D& a, const Box3D& b);

// BEV intersection area times z-extent overlap, over the volume union.
double iou_3d(const Box3D& a, const Box3D& b);

}  // namespace pcprep
