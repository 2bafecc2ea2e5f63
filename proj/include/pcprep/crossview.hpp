#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "pcprep/boxes.hpp"
#include "pcprep/rng.hpp"

namespace pcprep {

// One randomized view transform: rotate about +z, scale uniformly, then
// mirror. flip_x mirrors across the x-z plane (y -> -y, heading -> -heading);
// flip_y mirrors across the y-z plane (x -> -x, heading -> pi - heading).
struct AugmentationSpec {
  double rotation = 0.0;  // radians, counter-clockwise
  double scale = 1.0;
  bool flip_x = false;
  bool flip_y = false;
  std::uint64_t seed = 0;
};

// Default sampler: rotation in [-pi, pi], scale in [0.7, 1.2], each flip
// with probability 0.5.
AugmentationSpec sample_augmentation_spec(RngStream& rng);

enum class ProposalLabel { kVehicle, kPedestrian, kCyclist, kUnknown, kForegroundUnknown };

const char* to_string(ProposalLabel label);
std::optional<ProposalLabel> proposal_label_from_string(std::string_view name);

// Region proposal with an opaque feature vector; proposal generation itself
// happens upstream.
struct Proposal {
  Box3D box;
  std::vector<float> feature;
  double objectness = 0.0;  // [0, 1]
  ProposalLabel label = ProposalLabel::kUnknown;
};

struct MatchPair {
  int view1_index = 0;
  int view2_index = 0;
  double center_distance = 0.0;  // meters, in the common un-augmented frame
};

// One-to-one pairs; every distance is < tau.
struct MatchSet {
  std::vector<MatchPair> pairs;

  std::size_t size() const { return pairs.size(); }
};

struct MatchConfig {
  int top_m = 256;
  double tau = 0.3;  // meters
};

std::pair<PointCloud, std::vector<Box3D>> apply_augmentation(const PointCloud& cloud,
                                                             const std::vector<Box3D>& boxes,
                                                             const AugmentationSpec& spec);

// Exact inverse of apply_augmentation's action on boxes.
std::vector<Box3D> inverse_transform_boxes(const std::vector<Box3D>& boxes, const AugmentationSpec& spec);

// Indices of the min(m, N) highest-objectness proposals; ties keep the lower
// original index. Returned in selection order.
std::vector<int> select_top_m_indices(const std::vector<Proposal>& proposals, int m);
std::vector<Proposal> select_top_m(const std::vector<Proposal>& proposals, int m);

// Maps both views back to the common frame, takes the top-M per view, then
// greedily pairs candidates with center distance < tau by ascending distance.
// Pair indices refer to the input proposal lists.
MatchSet match_cross_view(const std::vector<Proposal>& view1,
                          const std::vector<Proposal>& view2,
                          const AugmentationSpec& spec1,
                          const AugmentationSpec& spec2,
                          const MatchConfig& cfg = {});

enum class FeatureReduction { kMeanOverDims, kSumOverDims };

struct ConsistencyLossResult {
  double value = 0.0;
  bool empty_match = false;  // set when there are no pairs to average over
};

// Squared feature differences of the matched pairs, reduced per pair over
// the feature dimensions, summed and divided by batch_size * K.
ConsistencyLossResult consistency_loss(const MatchSet& matches,
                                       const std::vector<Proposal>& view1,
                                       const std::vector<Proposal>& view2,
                                       int batch_size,
                                       FeatureReduction reduction = FeatureReduction::kMeanOverDims);

// Matched proposals labeled Unknown become ForegroundUnknown; everything
// else is untouched.
std::pair<std::vector<Proposal>, std::vector<Proposal>> promote_unknowns(const std::vector<Proposal>& view1,
                                                                         const std::vector<Proposal>& view2,
                                                                         const MatchSet& matches);

}  // namespace pcprep
