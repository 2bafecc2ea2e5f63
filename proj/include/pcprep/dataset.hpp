#pragma once

#include <array>
#include <string>
#include <vector>

#include "pcprep/geometry.hpp"

namespace pcprep {

struct DatasetConfig {
  std::string name;
  std::array<double, 6> point_range{-75.2, -75.2, -5.0, 75.2, 75.2, 3.0};  // min xyz, max xyz
  std::array<double, 3> voxel_size{0.1, 0.1, 0.2};
  int feature_dim = 4;
  std::vector<std::string> class_names{"Vehicle", "Pedestrian", "Cyclist"};

  static DatasetConfig once();
  static DatasetConfig waymo();
  static DatasetConfig nuscenes();
  static DatasetConfig kitti();
};

void validate(const DatasetConfig& config);

// Keeps points inside the closed axis-aligned range box.
PointCloud crop_to_range(const PointCloud& cloud, const DatasetConfig& config);

}  // namespace pcprep
