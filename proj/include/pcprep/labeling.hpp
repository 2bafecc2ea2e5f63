#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcprep/boxes.hpp"

namespace pcprep {

struct Detection {
  Box3D box;
  std::string class_name;
  double score = 0.0;  // [0, 1]
  std::string source_id;
};

struct LabeledFrame {
  std::string frame_id;  // non-empty
  std::vector<Detection> detections;
  std::string cloud_ref;  // optional path of the frame's point cloud
};

// Source class name -> unified class name. Must be total on the classes it
// is applied to.
struct ClassMap {
  std::map<std::string, std::string> mapping;

  // Car/Bus/Truck -> Vehicle; Vehicle, Pedestrian, Cyclist map to themselves.
  static ClassMap once_default();
};

// Detections scoring below their class threshold are dropped; score equal to
// the threshold is kept.
struct ThresholdPolicy {
  std::map<std::string, double> min_score;

  // Vehicle 0.8, Pedestrian 0.7, Cyclist 0.7.
  static ThresholdPolicy once_default();
};

// Which source detector is authoritative for each class. Declaration order
// drives the order of merged output.
struct CommitteeAssignment {
  std::vector<std::pair<std::string, std::string>> class_to_source;
};

LabeledFrame apply_class_map(const LabeledFrame& frame, const ClassMap& map);

// Keeps, per assigned class, exactly that class's detections from its
// assigned source; detections of unassigned classes are dropped.
LabeledFrame committee_merge(const std::vector<std::pair<std::string, LabeledFrame>>& frames_by_source,
                             const CommitteeAssignment& assignment);

LabeledFrame filter_by_threshold(const LabeledFrame& frame, const ThresholdPolicy& policy);

// Mean instances per frame for each class. When `classes` is empty the class
// set is derived from the data.
std::map<std::string, double> frame_statistics(const std::vector<LabeledFrame>& frames,
                                               const std::vector<std::string>& classes = {});

// Greedy matching per frame: predictions in descending score order, each
// matched to the highest-IoU (3D) unmatched ground truth of the class with
// IoU >= threshold. Returns TP/(TP+FP); 1.0 when there are no predictions.
double precision_at_iou(const std::vector<LabeledFrame>& predictions,
                        const std::vector<LabeledFrame>& ground_truth,
                        double iou_threshold,
                        const std::string& class_name);

// 100 x the precision-envelope integral over the recall grid 0.02..1.00 at
// step 0.02. Empty when the class has no ground-truth instances.
std::optional<double> average_precision_once(const std::vector<LabeledFrame>& predictions,
                                             const std::vector<LabeledFrame>& ground_truth,
                                             const std::string& class_name,
                                             double iou_threshold);

// Vehicle 0.7, Pedestrian 0.3, Cyclist 0.5; empty otherwise.
std::optional<double> default_once_iou_threshold(const std::string& class_name);

struct SweepPoint {
  double score_threshold = 0.0;
  double precision = 1.0;
  long long tp = 0;
  long long fp = 0;
};

// Precision after dropping predictions below each score threshold.
std::vector<SweepPoint> threshold_sweep(const std::vector<LabeledFrame>& predictions,
                                        const std::vector<LabeledFrame>& ground_truth,
                                        const std::string& class_name,
                                        double iou_threshold,
                                        const std::vector<double>& score_thresholds);

}  // namespace pcprep
