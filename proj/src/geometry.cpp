#include "pcprep/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pcprep {

std::size_t RangeImage::occupied_cells() const {
  return static_cast<std::size_t>(std::count_if(ranges.begin(), ranges.end(), [](float r) { return r > 0.0f; }));
}

double normalize_angle(double a) {
  a = std::remainder(a, 2.0 * M_PI);  // (-pi, pi]
  if (a >= M_PI) a -= 2.0 * M_PI;
  return a;
}

double column_center_azimuth(int col, int n_cols) {
  return (col + 0.5) / n_cols * 2.0 * M_PI - M_PI;
}

SphericalCoord to_spherical(const Point& p) {
  SphericalCoord s;
  s.r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
  if (s.r > 0.0) {
    s.theta = normalize_angle(std::atan2(p.x, p.y));
    // asin(z/r) absorbs the horizontal offset near the poles; the atan2
    // form is the same angle without the cancellation
    s.phi = std::atan2(p.z, std::hypot(p.x, p.y));
  }
  return s;
}

Point from_spherical(const SphericalCoord& s) {
  Point p;
  const double horizontal = s.r * std::cos(s.phi);
  p.x = horizontal * std::sin(s.theta);
  p.y = horizontal * std::cos(s.theta);
  p.z = s.r * std::sin(s.phi);
  return p;
}

namespace {

int nearest_beam_row(const std::vector<double>& inclinations, double phi) {
  auto it = std::lower_bound(inclinations.begin(), inclinations.end(), phi);
  if (it == inclinations.begin()) return 0;
  if (it == inclinations.end()) return static_cast<int>(inclinations.size()) - 1;
  int hi = static_cast<int>(it - inclinations.begin());
  int lo = hi - 1;
  // ties go to the lower row
  return (phi - inclinations[lo] <= inclinations[hi] - phi) ? lo : hi;
}

void check_inclinations(const std::vector<double>& inclinations) {
  if (inclinations.empty()) throw std::invalid_argument("beam_inclinations must be non-empty");
  for (std::size_t i = 0; i < inclinations.size(); ++i) {
    if (std::abs(inclinations[i]) > M_PI / 2 + 1e-12)
      throw std::invalid_argument("beam inclination outside [-pi/2, pi/2]");
    if (i > 0 && inclinations[i] <= inclinations[i - 1])
      throw std::invalid_argument("beam_inclinations must be strictly ascending");
  }
}

}  // namespace

RangeImage cloud_to_range_image(const PointCloud& cloud,
                                const std::vector<double>& beam_inclinations,
                                int n_cols) {
  check_inclinations(beam_inclinations);
  if (n_cols < 1) throw std::invalid_argument("n_cols must be >= 1");

  RangeImage img;
  img.n_beams = static_cast<int>(beam_inclinations.size());
  img.n_cols = n_cols;
  img.extras_dim = cloud.feature_dim - 3;
  img.beam_inclinations = beam_inclinations;
  img.ranges.assign(static_cast<std::size_t>(img.n_beams) * n_cols, 0.0f);
  img.extras.assign(static_cast<std::size_t>(img.n_beams) * n_cols * img.extras_dim, 0.0f);

  for (const Point& p : cloud.points) {
    SphericalCoord s = to_spherical(p);
    if (s.r <= 0.0) continue;  // no return
    int row = nearest_beam_row(beam_inclinations, s.phi);
    int col = static_cast<int>(std::floor((s.theta + M_PI) / (2.0 * M_PI) * n_cols));
    col = std::clamp(col, 0, n_cols - 1);
    float& cell = img.range_at(row, col);
    if (cell == 0.0f || s.r < cell) {
      cell = static_cast<float>(s.r);
      if (img.extras_dim > 0) {
        float* e = img.extras_at(row, col);
        for (int k = 0; k < img.extras_dim; ++k)
          e[k] = k < static_cast<int>(p.extras.size()) ? p.extras[k] : 0.0f;
      }
    }
  }
  return img;
}

PointCloud range_image_to_cloud(const RangeImage& img) {
  PointCloud cloud;
  cloud.feature_dim = 3 + img.extras_dim;
  cloud.points.reserve(img.occupied_cells());
  for (int row = 0; row < img.n_beams; ++row) {
    for (int col = 0; col < img.n_cols; ++col) {
      float r = img.range_at(row, col);
      if (r <= 0.0f) continue;
      SphericalCoord s{r, column_center_azimuth(col, img.n_cols), img.beam_inclinations[row]};
      Point p = from_spherical(s);
      if (img.extras_dim > 0) {
        const float* e = img.extras_at(row, col);
        p.extras.assign(e, e + img.extras_dim);
      }
      cloud.points.push_back(std::move(p));
    }
  }
  return cloud;
}

namespace {

void copy_row(const RangeImage& src, int src_row, RangeImage& dst, int dst_row) {
  std::copy_n(&src.ranges[static_cast<std::size_t>(src_row) * src.n_cols], src.n_cols,
              &dst.ranges[static_cast<std::size_t>(dst_row) * dst.n_cols]);
  if (src.extras_dim > 0) {
    std::copy_n(&src.extras[static_cast<std::size_t>(src_row) * src.n_cols * src.extras_dim],
                static_cast<std::size_t>(src.n_cols) * src.extras_dim,
                &dst.extras[static_cast<std::size_t>(dst_row) * dst.n_cols * dst.extras_dim]);
  }
}

}  // namespace

RangeImage resample_beams(const RangeImage& img, int target_beams) {
  if (target_beams < 1) throw std::invalid_argument("target_beams must be >= 1");
  if (target_beams == img.n_beams) return img;

  const int n = img.n_beams;
  const int t = target_beams;
  RangeImage out;
  out.n_beams = t;
  out.n_cols = img.n_cols;
  out.extras_dim = img.extras_dim;
  out.beam_inclinations.resize(t);
  out.ranges.assign(static_cast<std::size_t>(t) * img.n_cols, 0.0f);
  out.extras.assign(static_cast<std::size_t>(t) * img.n_cols * img.extras_dim, 0.0f);

  if (t < n) {
    // uniform subsampling, endpoints preserved
    for (int i = 0; i < t; ++i) {
      int src = t == 1 ? 0 : static_cast<int>(std::llround(static_cast<double>(i) * (n - 1) / (t - 1)));
      out.beam_inclinations[i] = img.beam_inclinations[src];
      copy_row(img, src, out, i);
    }
    return out;
  }

  if (n < 2)
    throw std::invalid_argument("cannot upsample a range image with fewer than 2 beams");

  for (int i = 0; i < t; ++i) {
    double pos = std::clamp(static_cast<double>(i) * (n - 1) / (t - 1), 0.0, static_cast<double>(n - 1));
    int lo = std::min(static_cast<int>(pos), n - 2);
    double frac = pos - lo;
    if (frac <= 0.0 || frac >= 1.0) {
      int src = frac >= 1.0 ? lo + 1 : lo;
      out.beam_inclinations[i] = img.beam_inclinations[src];
      copy_row(img, src, out, i);
      continue;
    }
    out.beam_inclinations[i] =
        img.beam_inclinations[lo] + frac * (img.beam_inclinations[lo + 1] - img.beam_inclinations[lo]);
    for (int col = 0; col < img.n_cols; ++col) {
      float a = img.range_at(lo, col);
      float b = img.range_at(lo + 1, col);
      if (a <= 0.0f || b <= 0.0f) continue;  // both neighbors must be valid
      out.range_at(i, col) = static_cast<float>(a + frac * (b - a));
      if (img.extras_dim > 0) {
        const float* ea = img.extras_at(lo, col);
        const float* eb = img.extras_at(lo + 1, col);
        float* eo = out.extras_at(i, col);
        for (int k = 0; k < img.extras_dim; ++k)
          eo[k] = static_cast<float>(ea[k] + frac * (eb[k] - ea[k]));
      }
    }
  }
  return out;
}

}  // namespace pcprep
