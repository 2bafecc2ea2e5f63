#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pcprep/crossview.hpp"
#include "pcprep/dataset.hpp"
#include "pcprep/labeling.hpp"
#include "pcprep/rng.hpp"

namespace pcprep {

// Cloud -> range image -> row resampling -> cloud. The intermediate image
// rows are the configured inclinations.
struct BeamResampleStage {
  std::vector<double> inclinations;
  int n_cols = 1800;
  int target_beams = 0;
};

// Per-detection scale factor drawn uniformly from [alpha_min, alpha_max];
// boxes are processed in label order. remove_occluded drops background
// points that end up inside an enlarged box.
struct ObjectRescaleStage {
  double alpha_min = 0.9;
  double alpha_max = 1.1;
  bool remove_occluded = false;
};

struct ClassMapStage {
  ClassMap map;
};

struct ThresholdStage {
  ThresholdPolicy policy;
};

// Emits two augmented copies of the frame (suffixes .view1/.view2). Must be
// the last stage. Specs are drawn per frame unless fixed here.
struct TwoViewAugmentStage {
  std::optional<AugmentationSpec> spec1;
  std::optional<AugmentationSpec> spec2;
};

using PipelineStage =
    std::variant<BeamResampleStage, ObjectRescaleStage, ClassMapStage, ThresholdStage, TwoViewAugmentStage>;

const char* stage_name(const PipelineStage& stage);

struct PipelineConfig {
  std::uint64_t global_seed = 0;
  std::vector<PipelineStage> stages;
};

void validate(const PipelineConfig& config);

struct FrameData {
  PointCloud cloud;
  LabeledFrame labels;
};

struct ProcessedView {
  std::string suffix;  // "" for single-view output, ".view1"/".view2" after two-view augmentation
  FrameData frame;
};

// Applies the stages in declared order. All randomness comes from
// SeedStream(config.global_seed, frame_id), so the result is a pure function
// of (frame, config).
std::vector<ProcessedView> apply_stages(const FrameData& frame, const PipelineConfig& config);

struct RescaleFrameResult {
  FrameData frame;
  std::vector<double> alphas;  // one draw per detection, in label order
};

RescaleFrameResult rescale_frame(const FrameData& frame,
                                 double alpha_min,
                                 double alpha_max,
                                 RngStream& rng,
                                 bool remove_occluded);

struct FrameFailure {
  std::string frame_id;
  std::string stage;
  std::string message;
};

// One malformed frame never aborts the run; it is recorded and skipped.
struct PipelineSummary {
  std::uint64_t processed = 0;
  std::uint64_t failed = 0;
  std::vector<FrameFailure> failures;  // input order
};

using ProgressFn = std::function<void(std::uint64_t done, std::uint64_t total)>;

// Processes every <frame_id>.bin / <frame_id>.jsonl pair under input_dir and
// writes one output pair per frame (or per view) to output_dir. Results are
// independent of the worker count.
PipelineSummary run_pipeline(const std::filesystem::path& input_dir,
                             const std::filesystem::path& output_dir,
                             const PipelineConfig& config,
                             int feature_dim,
                             int workers = 1,
                             const ProgressFn& progress = {});

}  // namespace pcprep
