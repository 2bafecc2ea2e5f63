#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pcprep/crossview.hpp"
#include "pcprep/dataset.hpp"
#include "pcprep/geometry.hpp"
#include "pcprep/labeling.hpp"
#include "pcprep/pipeline.hpp"

namespace pcprep {

// Raw little-endian float32, row-major N x feature_dim (KITTI-bin style).
// Reads reject non-finite values and byte counts not divisible by the row
// size; writes are atomic (temp file + rename).
PointCloud read_point_cloud(const std::filesystem::path& path, int feature_dim);
void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path);

// "PCRI" header (u32 n_beams, n_cols, extras_dim), float32 inclinations,
// float32 ranges, float32 extras, all little-endian.
RangeImage read_range_image(const std::filesystem::path& path);
void write_range_image(const RangeImage& img, const std::filesystem::path& path);

// JSON Lines, one frame per line:
// {"frame_id": str, "detections": [{"box": [7], "class": str, "score": f, "source": str}]}
std::vector<LabeledFrame> read_labeled_frames(const std::filesystem::path& path);
void write_labeled_frames(const std::vector<LabeledFrame>& frames, const std::filesystem::path& path);
std::string frame_to_jsonl(const LabeledFrame& frame);
LabeledFrame frame_from_jsonl(const std::string& line);

// JSON Lines, one proposal per line:
// {"box": [7], "feature": [C], "objectness": f, "label": str}
std::vector<Proposal> read_proposals(const std::filesystem::path& path);
void write_proposals(const std::vector<Proposal>& proposals, const std::filesystem::path& path);

AugmentationSpec parse_augmentation_spec(const std::string& json_text);
std::string augmentation_spec_to_json(const AugmentationSpec& spec);

DatasetConfig parse_dataset_config(const std::string& json_text);
ClassMap parse_class_map(const std::string& json_text);
ThresholdPolicy parse_threshold_policy(const std::string& json_text);
CommitteeAssignment parse_committee_assignment(const std::string& json_text);
PipelineConfig parse_pipeline_config(const std::string& json_text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file_atomic(const std::string& text, const std::filesystem::path& path);

}  // namespace pcprep
