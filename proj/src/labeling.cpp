#include "pcprep/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace pcprep {

ClassMap ClassMap::once_default() {
  return ClassMap{{{"Car", "Vehicle"},
                   {"Bus", "Vehicle"},
                   {"Truck", "Vehicle"},
                   {"Vehicle", "Vehicle"},
                   {"Pedestrian", "Pedestrian"},
                   {"Cyclist", "Cyclist"}}};
}

ThresholdPolicy ThresholdPolicy::once_default() {
  return ThresholdPolicy{{{"Vehicle", 0.8}, {"Pedestrian", 0.7}, {"Cyclist", 0.7}}};
}

LabeledFrame apply_class_map(const LabeledFrame& frame, const ClassMap& map) {
  LabeledFrame out = frame;
  for (Detection& det : out.detections) {
    auto it = map.mapping.find(det.class_name);
    if (it == map.mapping.end())
      throw std::invalid_argument("class not covered by class map: " + det.class_name);
    det.class_name = it->second;
  }
  return out;
}

LabeledFrame committee_merge(const std::vector<std::pair<std::string, LabeledFrame>>& frames_by_source,
                             const CommitteeAssignment& assignment) {
  if (frames_by_source.empty()) throw std::invalid_argument("committee_merge needs at least one source");
  const std::string& frame_id = frames_by_source.front().second.frame_id;
  for (const auto& [source, frame] : frames_by_source) {
    if (frame.frame_id != frame_id)
      throw std::invalid_argument("committee_merge sources disagree on frame_id: '" + frame.frame_id +
                                  "' vs '" + frame_id + "'");
  }

  LabeledFrame out;
  out.frame_id = frame_id;
  for (const auto& [source, frame] : frames_by_source) {
    if (out.cloud_ref.empty()) out.cloud_ref = frame.cloud_ref;
  }
  for (const auto& [class_name, source_id] : assignment.class_to_source) {
    auto src = std::find_if(frames_by_source.begin(), frames_by_source.end(),
                            [&](const auto& entry) { return entry.first == source_id; });
    if (src == frames_by_source.end())
      throw std::invalid_argument("no source '" + source_id + "' for assigned class '" + class_name + "'");
    for (const Detection& det : src->second.detections) {
      if (det.class_name == class_name) out.detections.push_back(det);
    }
  }
  return out;
}

LabeledFrame filter_by_threshold(const LabeledFrame& frame, const ThresholdPolicy& policy) {
  LabeledFrame out;
  out.frame_id = frame.frame_id;
  out.cloud_ref = frame.cloud_ref;
  for (const Detection& det : frame.detections) {
    auto it = policy.min_score.find(det.class_name);
    if (it == policy.min_score.end())
      throw std::invalid_argument("no threshold for class: " + det.class_name);
    if (det.score >= it->second) out.detections.push_back(det);
  }
  return out;
}

std::map<std::string, double> frame_statistics(const std::vector<LabeledFrame>& frames,
                                               const std::vector<std::string>& classes) {
  if (frames.empty()) throw std::invalid_argument("frame_statistics needs a non-empty frame list");

  std::map<std::string, long long> counts;
  for (const std::string& cls : classes) counts[cls] = 0;
  for (const LabeledFrame& frame : frames) {
    for (const Detection& det : frame.detections) {
      if (classes.empty() || counts.count(det.class_name)) ++counts[det.class_name];
    }
  }

  std::map<std::string, double> means;
  for (const auto& [cls, count] : counts)
    means[cls] = static_cast<double>(count) / static_cast<double>(frames.size());
  return means;
}

std::optional<double> default_once_iou_threshold(const std::string& class_name) {
  if (class_name == "Vehicle") return 0.7;
  if (class_name == "Pedestrian") return 0.3;
  if (class_name == "Cyclist") return 0.5;
  return std::nullopt;
}

namespace {

struct ScoredPrediction {
  double score = 0.0;
  bool tp = false;
  std::size_t frame_index = 0;
  std::size_t det_index = 0;
};

void check_aligned(const std::vector<LabeledFrame>& predictions,
                   const std::vector<LabeledFrame>& ground_truth) {
  std::set<std::string> pred_ids, gt_ids;
  for (const LabeledFrame& f : predictions) {
    if (f.frame_id.empty()) throw std::invalid_argument("frame_id must be non-empty");
    if (!pred_ids.insert(f.frame_id).second)
      throw std::invalid_argument("duplicate prediction frame_id: " + f.frame_id);
  }
  for (const LabeledFrame& f : ground_truth) {
    if (!gt_ids.insert(f.frame_id).second)
      throw std::invalid_argument("duplicate ground-truth frame_id: " + f.frame_id);
  }
  if (pred_ids != gt_ids)
    throw std::invalid_argument("prediction and ground-truth frame sets do not match");
}

// Greedy per-frame matching for one class at a fixed score cutoff. Returns
// score-annotated predictions with TP flags, in no particular order.
std::vector<ScoredPrediction> match_class(const std::vector<LabeledFrame>& predictions,
                                          const std::vector<LabeledFrame>& ground_truth,
                                          const std::string& class_name,
                                          double iou_threshold,
                                          double min_score) {
  std::map<std::string, const LabeledFrame*> gt_by_id;
  for (const LabeledFrame& f : ground_truth) gt_by_id[f.frame_id] = &f;

  std::vector<ScoredPrediction> out;
  for (std::size_t fi = 0; fi < predictions.size(); ++fi) {
    const LabeledFrame& pred_frame = predictions[fi];
    const LabeledFrame& gt_frame = *gt_by_id.at(pred_frame.frame_id);

    std::vector<std::size_t> pred_idx;
    for (std::size_t i = 0; i < pred_frame.detections.size(); ++i) {
      const Detection& det = pred_frame.detections[i];
      if (det.class_name == class_name && det.score >= min_score) pred_idx.push_back(i);
    }
    std::stable_sort(pred_idx.begin(), pred_idx.end(), [&](std::size_t a, std::size_t b) {
      return pred_frame.detections[a].score > pred_frame.detections[b].score;
    });

    std::vector<std::size_t> gt_idx;
    for (std::size_t i = 0; i < gt_frame.detections.size(); ++i) {
      if (gt_frame.detections[i].class_name == class_name) gt_idx.push_back(i);
    }

    std::vector<bool> gt_used(gt_idx.size(), false);
    for (std::size_t pi : pred_idx) {
      const Detection& det = pred_frame.detections[pi];
      double best_iou = -1.0;
      std::size_t best_g = gt_idx.size();
      for (std::size_t g = 0; g < gt_idx.size(); ++g) {
        if (gt_used[g]) continue;
        double iou = iou_3d(det.box, gt_frame.detections[gt_idx[g]].box);
        if (iou >= iou_threshold && iou > best_iou) {
          best_iou = iou;
          best_g = g;  // equal IoU keeps the lower ground-truth index
        }
      }
      bool tp = best_g < gt_idx.size();
      if (tp) gt_used[best_g] = true;
      out.push_back({det.score, tp, fi, pi});
    }
  }
  return out;
}

long long count_gt(const std::vector<LabeledFrame>& ground_truth, const std::string& class_name) {
  long long n = 0;
  for (const LabeledFrame& f : ground_truth)
    for (const Detection& det : f.detections)
      if (det.class_name == class_name) ++n;
  return n;
}

void check_iou_threshold(double iou_threshold) {
  if (!(iou_threshold > 0.0) || iou_threshold > 1.0)
    throw std::invalid_argument("iou_threshold must lie in (0, 1]");
}

}  // namespace

double precision_at_iou(const std::vector<LabeledFrame>& predictions,
                        const std::vector<LabeledFrame>& ground_truth,
                        double iou_threshold,
                        const std::string& class_name) {
  check_iou_threshold(iou_threshold);
  check_aligned(predictions, ground_truth);
  const auto matched = match_class(predictions, ground_truth, class_name, iou_threshold, 0.0);
  if (matched.empty()) return 1.0;  // vacuous
  long long tp = std::count_if(matched.begin(), matched.end(), [](const auto& m) { return m.tp; });
  return static_cast<double>(tp) / static_cast<double>(matched.size());
}

std::optional<double> average_precision_once(const std::vector<LabeledFrame>& predictions,
                                             const std::vector<LabeledFrame>& ground_truth,
                                             const std::string& class_name,
                                             double iou_threshold) {
  check_iou_threshold(iou_threshold);
  check_aligned(predictions, ground_truth);
  const long long total_gt = count_gt(ground_truth, class_name);
  if (total_gt == 0) return std::nullopt;

  auto matched = match_class(predictions, ground_truth, class_name, iou_threshold, 0.0);
  std::sort(matched.begin(), matched.end(), [](const ScoredPrediction& a, const ScoredPrediction& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame_index != b.frame_index) return a.frame_index < b.frame_index;
    return a.det_index < b.det_index;
  });

  std::vector<std::pair<double, double>> curve;  // (recall, precision)
  curve.reserve(matched.size());
  long long tp = 0, fp = 0;
  for (const ScoredPrediction& m : matched) {
    m.tp ? ++tp : ++fp;
    curve.emplace_back(static_cast<double>(tp) / static_cast<double>(total_gt),
                       static_cast<double>(tp) / static_cast<double>(tp + fp));
  }

  // max precision at recall >= r, walking the curve from the right
  double acc = 0.0;
  std::size_t pos = curve.size();
  double best = 0.0;
  for (int k = 50; k >= 1; --k) {
    const double r = k * 0.02;
    while (pos > 0 && curve[pos - 1].first >= r - 1e-12) {
      best = std::max(best, curve[pos - 1].second);
      --pos;
    }
    acc += best;
  }
  return 100.0 * acc / 50.0;
}

std::vector<SweepPoint> threshold_sweep(const std::vector<LabeledFrame>& predictions,
                                        const std::vector<LabeledFrame>& ground_truth,
                                        const std::string& class_name,
                                        double iou_threshold,
                                        const std::vector<double>& score_thresholds) {
  check_iou_threshold(iou_threshold);
  check_aligned(predictions, ground_truth);
  std::vector<SweepPoint> out;
  out.reserve(score_thresholds.size());
  for (double s : score_thresholds) {
    const auto matched = match_class(predictions, ground_truth, class_name, iou_threshold, s);
    SweepPoint point;
    point.score_threshold = s;
    point.tp = std::count_if(matched.begin(), matched.end(), [](const auto& m) { return m.tp; });
    point.fp = static_cast<long long>(matched.size()) - point.tp;
    point.precision = matched.empty() ? 1.0 : static_cast<double>(point.tp) / static_cast<double>(matched.size());
    out.push_back(point);
  }
  return out;
}

}  // namespace pcprep
