#pragma once

#include <cstddef>
#include <vector>

namespace pcprep {

struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  std::vector<float> extras;  // per-point features beyond xyz, e.g. intensity
};

// Azimuth theta is measured from the +y axis toward +x and lies in
// [-pi, pi); inclination phi is measured from the horizontal plane toward
// +z and lies in [-pi/2, pi/2]. This convention makes theta = atan2(x, y),
// the full-quadrant extension of arctan(x/y).
struct SphericalCoord {
  double r = 0.0;      // meters, >= 0
  double theta = 0.0;  // radians
  double phi = 0.0;    // radians
};

struct PointCloud {
  std::vector<Point> points;
  int feature_dim = 3;  // 3 + extras length

  std::size_t size() const { return points.size(); }
};

// Row-major beam x column grid of ranges. Range 0.0 marks a cell with no
// return; physical returns are strictly positive.
struct RangeImage {
  int n_beams = 0;
  int n_cols = 0;
  int extras_dim = 0;
  std::vector<float> ranges;              // n_beams * n_cols
  std::vector<float> extras;              // n_beams * n_cols * extras_dim
  std::vector<double> beam_inclinations;  // strictly ascending, radians

  float range_at(int row, int col) const { return ranges[static_cast<std::size_t>(row) * n_cols + col]; }
  float& range_at(int row, int col) { return ranges[static_cast<std::size_t>(row) * n_cols + col]; }
  const float* extras_at(int row, int col) const {
    return extras.data() + (static_cast<std::size_t>(row) * n_cols + col) * extras_dim;
  }
  float* extras_at(int row, int col) {
    return extras.data() + (static_cast<std::size_t>(row) * n_cols + col) * extras_dim;
  }
  std::size_t occupied_cells() const;
};

// Wraps an angle into [-pi, pi).
double normalize_angle(double a);

// Azimuth of column center j: (j + 0.5) / n_cols * 2pi - pi.
double column_center_azimuth(int col, int n_cols);

// Total functions. r = 0 maps to theta = phi = 0; points on the z axis get
// theta = 0.
SphericalCoord to_spherical(const Point& p);
Point from_spherical(const SphericalCoord& s);

// Each point lands in the row whose inclination is nearest its phi and the
// column floor((theta + pi) / 2pi * n_cols), clamped. On collision a cell
// keeps the nearest return. Points with r = 0 produce no return.
RangeImage cloud_to_range_image(const PointCloud& cloud,
                                const std::vector<double>& beam_inclinations,
                                int n_cols);

// One point per occupied cell, at the cell's beam inclination and
// column-center azimuth. Extras are copied through.
PointCloud range_image_to_cloud(const RangeImage& img);

// target < n_beams: uniform row subsampling at indices round(i*(n-1)/(t-1)),
// rows copied bit-exactly. target > n_beams: linear interpolation of rows
// and inclinations; a cell interpolates only when both neighbors are valid.
// target == n_beams: identity copy.
RangeImage resample_beams(const RangeImage& img, int target_beams);

}  // namespace pcprep
