#include "pcprep/crossview.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pcprep {

AugmentationSpec sample_augmentation_spec(RngStream& rng) {
  AugmentationSpec spec;
  spec.rotation = rng.uniform(-M_PI, M_PI);
  spec.scale = rng.uniform(0.7, 1.2);
  spec.flip_x = rng.bernoulli(0.5);
  spec.flip_y = rng.bernoulli(0.5);
  return spec;
}

const char* to_string(ProposalLabel label) {
  switch (label) {
    case ProposalLabel::kVehicle: return "Vehicle";
    case ProposalLabel::kPedestrian: return "Pedestrian";
    case ProposalLabel::kCyclist: return "Cyclist";
    case ProposalLabel::kUnknown: return "Unknown";
    case ProposalLabel::kForegroundUnknown: return "ForegroundUnknown";
  }
  return "Unknown";
}

std::optional<ProposalLabel> proposal_label_from_string(std::string_view name) {
  if (name == "Vehicle") return ProposalLabel::kVehicle;
  if (name == "Pedestrian") return ProposalLabel::kPedestrian;
  if (name == "Cyclist") return ProposalLabel::kCyclist;
  if (name == "Unknown") return ProposalLabel::kUnknown;
  if (name == "ForegroundUnknown") return ProposalLabel::kForegroundUnknown;
  return std::nullopt;
}

namespace {

void transform_xyz(double& x, double& y, double& z, const AugmentationSpec& spec) {
  const double c = std::cos(spec.rotation);
  const double s = std::sin(spec.rotation);
  const double rx = x * c - y * s;
  const double ry = x * s + y * c;
  x = rx * spec.scale;
  y = ry * spec.scale;
  z = z * spec.scale;
  if (spec.flip_x) y = -y;
  if (spec.flip_y) x = -x;
}

double transform_heading(double heading, const AugmentationSpec& spec) {
  heading += spec.rotation;
  if (spec.flip_x) heading = -heading;
  if (spec.flip_y) heading = M_PI - heading;
  return normalize_angle(heading);
}

}  // namespace

std::pair<PointCloud, std::vector<Box3D>> apply_augmentation(const PointCloud& cloud,
                                                             const std::vector<Box3D>& boxes,
                                                             const AugmentationSpec& spec) {
  if (!(spec.scale > 0.0)) throw std::invalid_argument("augmentation scale must be > 0");

  PointCloud out_cloud = cloud;
  for (Point& p : out_cloud.points) transform_xyz(p.x, p.y, p.z, spec);

  std::vector<Box3D> out_boxes;
  out_boxes.reserve(boxes.size());
  for (const Box3D& box : boxes) {
    Box3D b = box;
    transform_xyz(b.cx, b.cy, b.cz, spec);
    b.l *= spec.scale;
    b.w *= spec.scale;
    b.h *= spec.scale;
    b.heading = transform_heading(box.heading, spec);
    out_boxes.push_back(b);
  }
  return {std::move(out_cloud), std::move(out_boxes)};
}

std::vector<Box3D> inverse_transform_boxes(const std::vector<Box3D>& boxes, const AugmentationSpec& spec) {
  if (!(spec.scale > 0.0)) throw std::invalid_argument("augmentation scale must be > 0");

  const double c = std::cos(spec.rotation);
  const double s = std::sin(spec.rotation);
  std::vector<Box3D> out;
  out.reserve(boxes.size());
  for (const Box3D& box : boxes) {
    Box3D b = box;
    double heading = box.heading;
    // undo flips, then scale, then rotation
    if (spec.flip_y) {
      b.cx = -b.cx;
      heading = M_PI - heading;
    }
    if (spec.flip_x) {
      b.cy = -b.cy;
      heading = -heading;
    }
    b.cx /= spec.scale;
    b.cy /= spec.scale;
    b.cz /= spec.scale;
    b.l /= spec.scale;
    b.w /= spec.scale;
    b.h /= spec.scale;
    const double rx = b.cx * c + b.cy * s;
    const double ry = -b.cx * s + b.cy * c;
    b.cx = rx;
    b.cy = ry;
    b.heading = normalize_angle(heading - spec.rotation);
    out.push_back(b);
  }
  return out;
}

std::vector<int> select_top_m_indices(const std::vector<Proposal>& proposals, int m) {
  if (m < 1) throw std::invalid_argument("top_m must be >= 1");
  std::vector<int> idx(proposals.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return proposals[a].objectness > proposals[b].objectness; });
  if (static_cast<int>(idx.size()) > m) idx.resize(m);
  return idx;
}

std::vector<Proposal> select_top_m(const std::vector<Proposal>& proposals, int m) {
  std::vector<Proposal> out;
  for (int i : select_top_m_indices(proposals, m)) out.push_back(proposals[i]);
  return out;
}

MatchSet match_cross_view(const std::vector<Proposal>& view1,
                          const std::vector<Proposal>& view2,
                          const AugmentationSpec& spec1,
                          const AugmentationSpec& spec2,
                          const MatchConfig& cfg) {
  if (cfg.top_m < 1) throw std::invalid_argument("top_m must be >= 1");
  if (!(cfg.tau > 0.0)) throw std::invalid_argument("tau must be > 0");
  std::size_t feature_dim = !view1.empty() ? view1.front().feature.size()
                                           : (!view2.empty() ? view2.front().feature.size() : 0);
  for (const Proposal& p : view1)
    if (p.feature.size() != feature_dim) throw std::invalid_argument("feature dimensions differ within view 1");
  for (const Proposal& p : view2)
    if (p.feature.size() != feature_dim)
      throw std::invalid_argument("feature dimensions differ between the two views");

  auto boxes_of = [](const std::vector<Proposal>& props) {
    std::vector<Box3D> boxes;
    boxes.reserve(props.size());
    for (const Proposal& p : props) boxes.push_back(p.box);
    return boxes;
  };
  const std::vector<Box3D> common1 = inverse_transform_boxes(boxes_of(view1), spec1);
  const std::vector<Box3D> common2 = inverse_transform_boxes(boxes_of(view2), spec2);

  const std::vector<int> top1 = select_top_m_indices(view1, cfg.top_m);
  const std::vector<int> top2 = select_top_m_indices(view2, cfg.top_m);

  std::vector<MatchPair> candidates;
  for (int i : top1) {
    for (int j : top2) {
      const Box3D& a = common1[i];
      const Box3D& b = common2[j];
      const double d = std::sqrt((a.cx - b.cx) * (a.cx - b.cx) + (a.cy - b.cy) * (a.cy - b.cy) +
                                 (a.cz - b.cz) * (a.cz - b.cz));
      if (d < cfg.tau) candidates.push_back({i, j, d});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const MatchPair& a, const MatchPair& b) {
    if (a.center_distance != b.center_distance) return a.center_distance < b.center_distance;
    if (a.view1_index != b.view1_index) return a.view1_index < b.view1_index;
    return a.view2_index < b.view2_index;
  });

  MatchSet out;
  std::vector<bool> used1(view1.size(), false), used2(view2.size(), false);
  for (const MatchPair& cand : candidates) {
    if (used1[cand.view1_index] || used2[cand.view2_index]) continue;
    used1[cand.view1_index] = true;
    used2[cand.view2_index] = true;
    out.pairs.push_back(cand);
  }
  return out;
}

ConsistencyLossResult consistency_loss(const MatchSet& matches,
                                       const std::vector<Proposal>& view1,
                                       const std::vector<Proposal>& view2,
                                       int batch_size,
                                       FeatureReduction reduction) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (matches.pairs.empty()) return {0.0, true};

  double total = 0.0;
  for (const MatchPair& pair : matches.pairs) {
    if (pair.view1_index < 0 || pair.view1_index >= static_cast<int>(view1.size()) ||
        pair.view2_index < 0 || pair.view2_index >= static_cast<int>(view2.size()))
      throw std::invalid_argument("match pair index out of range");
    const std::vector<float>& f1 = view1[pair.view1_index].feature;
    const std::vector<float>& f2 = view2[pair.view2_index].feature;
    if (f1.size() != f2.size()) throw std::invalid_argument("matched features have different dimensions");
    double acc = 0.0;
    for (std::size_t k = 0; k < f1.size(); ++k) {
      const double d = static_cast<double>(f1[k]) - static_cast<double>(f2[k]);
      acc += d * d;
    }
    if (reduction == FeatureReduction::kMeanOverDims && !f1.empty()) acc /= static_cast<double>(f1.size());
    total += acc;
  }
  const double k = static_cast<double>(matches.pairs.size());
  return {total / (static_cast<double>(batch_size) * k), false};
}

std::pair<std::vector<Proposal>, std::vector<Proposal>> promote_unknowns(const std::vector<Proposal>& view1,
                                                                         const std::vector<Proposal>& view2,
                                                                         const MatchSet& matches) {
  std::vector<Proposal> out1 = view1;
  std::vector<Proposal> out2 = view2;
  for (const MatchPair& pair : matches.pairs) {
    if (pair.view1_index < 0 || pair.view1_index >= static_cast<int>(out1.size()) ||
        pair.view2_index < 0 || pair.view2_index >= static_cast<int>(out2.size()))
      throw std::invalid_argument("match pair index out of range");
    Proposal& p1 = out1[pair.view1_index];
    Proposal& p2 = out2[pair.view2_index];
    if (p1.label == ProposalLabel::kUnknown) p1.label = ProposalLabel::kForegroundUnknown;
    if (p2.label == ProposalLabel::kUnknown) p2.label = ProposalLabel::kForegroundUnknown;
  }
  return {std::move(out1), std::move(out2)};
}

}  // namespace pcprep
