#include "pcprep/dataset.hpp"

#include <stdexcept>

namespace pcprep {

DatasetConfig DatasetConfig::once() {
  DatasetConfig c;
  c.name = "once";
  c.point_range = {-75.2, -75.2, -5.0, 75.2, 75.2, 3.0};
  c.voxel_size = {0.1, 0.1, 0.2};
  c.feature_dim = 4;  // x, y, z, intensity
  c.class_names = {"Vehicle", "Pedestrian", "Cyclist"};
  return c;
}

DatasetConfig DatasetConfig::waymo() {
  DatasetConfig c;
  c.name = "waymo";
  c.point_range = {-75.2, -75.2, -2.0, 75.2, 75.2, 4.0};
  c.voxel_size = {0.1, 0.1, 0.15};
  c.feature_dim = 5;  // x, y, z, intensity, elongation
  c.class_names = {"Vehicle", "Pedestrian", "Cyclist"};
  return c;
}

DatasetConfig DatasetConfig::nuscenes() {
  DatasetConfig c;
  c.name = "nuscenes";
  c.point_range = {-51.2, -51.2, -5.0, 51.2, 51.2, 3.0};
  c.voxel_size = {0.1, 0.1, 0.2};
  c.feature_dim = 5;  // x, y, z, intensity, timestamp
  c.class_names = {"Car",     "Truck",   "Construction vehicle", "Bus",        "Trailer",
                   "Barrier", "Motorcycle", "Bicycle",           "Pedestrian", "Traffic cone"};
  return c;
}

DatasetConfig DatasetConfig::kitti() {
  DatasetConfig c;
  c.name = "kitti";
  c.point_range = {0.0, -40.0, -3.0, 70.4, 40.0, 1.0};
  c.voxel_size = {0.05, 0.05, 0.1};
  c.feature_dim = 4;  // x, y, z, intensity
  c.class_names = {"Car", "Pedestrian", "Cyclist"};
  return c;
}

void validate(const DatasetConfig& config) {
  for (int axis = 0; axis < 3; ++axis) {
    if (!(config.point_range[axis] < config.point_range[axis + 3]))
      throw std::invalid_argument("point_range min must be < max on every axis");
    if (!(config.voxel_size[axis] > 0.0)) throw std::invalid_argument("voxel_size must be > 0 on every axis");
  }
  if (config.feature_dim < 3) throw std::invalid_argument("feature_dim must be >= 3");
}

PointCloud crop_to_range(const PointCloud& cloud, const DatasetConfig& config) {
  validate(config);
  const auto& r = config.point_range;
  PointCloud out;
  out.feature_dim = cloud.feature_dim;
  out.points.reserve(cloud.size());
  for (const Point& p : cloud.points) {
    if (p.x >= r[0] && p.x <= r[3] && p.y >= r[1] && p.y <= r[4] && p.z >= r[2] && p.z <= r[5])
      out.points.push_back(p);
  }
  return out;
}

}  // namespace pcprep
