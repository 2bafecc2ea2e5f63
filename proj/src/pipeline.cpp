#include "pcprep/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "pcprep/errors.hpp"
#include "pcprep/io.hpp"

namespace pcprep {

namespace fs = std::filesystem;

const char* stage_name(const PipelineStage& stage) {
  struct Visitor {
    const char* operator()(const BeamResampleStage&) const { return "beam_resample"; }
    const char* operator()(const ObjectRescaleStage&) const { return "object_rescale"; }
    const char* operator()(const ClassMapStage&) const { return "class_map"; }
    const char* operator()(const ThresholdStage&) const { return "threshold"; }
    const char* operator()(const TwoViewAugmentStage&) const { return "two_view_augment"; }
  };
  return std::visit(Visitor{}, stage);
}

void validate(const PipelineConfig& config) {
  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const PipelineStage& stage = config.stages[i];
    if (const auto* resample = std::get_if<BeamResampleStage>(&stage)) {
      if (resample->inclinations.empty())
        throw std::invalid_argument("beam_resample stage needs inclinations");
      for (std::size_t k = 1; k < resample->inclinations.size(); ++k)
        if (resample->inclinations[k] <= resample->inclinations[k - 1])
          throw std::invalid_argument("beam_resample inclinations must be strictly ascending");
      if (resample->n_cols < 1) throw std::invalid_argument("beam_resample n_cols must be >= 1");
      if (resample->target_beams < 1) throw std::invalid_argument("beam_resample target_beams must be >= 1");
    } else if (const auto* rescale = std::get_if<ObjectRescaleStage>(&stage)) {
      if (!(rescale->alpha_min > 0.0)) throw std::invalid_argument("alpha_min must be > 0");
      if (rescale->alpha_min > rescale->alpha_max)
        throw std::invalid_argument("alpha_min must be <= alpha_max");
    } else if (const auto* two_view = std::get_if<TwoViewAugmentStage>(&stage)) {
      if (i + 1 != config.stages.size())
        throw std::invalid_argument("two_view_augment must be the last stage");
      if (two_view->spec1 && !(two_view->spec1->scale > 0.0))
        throw std::invalid_argument("two_view_augment spec1 scale must be > 0");
      if (two_view->spec2 && !(two_view->spec2->scale > 0.0))
        throw std::invalid_argument("two_view_augment spec2 scale must be > 0");
    }
  }
}

RescaleFrameResult rescale_frame(const FrameData& frame,
                                 double alpha_min,
                                 double alpha_max,
                                 RngStream& rng,
                                 bool remove_occluded) {
  if (!(alpha_min > 0.0) || alpha_min > alpha_max)
    throw std::invalid_argument("invalid alpha range");

  RescaleFrameResult result;
  result.frame.labels = frame.labels;

  // boxes are processed in label order against the current cloud state;
  // point order is preserved
  PointCloud current = frame.cloud;
  for (Detection& det : result.frame.labels.detections) {
    // one draw per detection, no matter how many points it holds
    const double alpha = rng.uniform(alpha_min, alpha_max);
    result.alphas.push_back(alpha);

    const Box3D scaled_box = rescale_object(det.box, PointCloud{{}, current.feature_dim}, alpha).first;
    PointCloud next;
    next.feature_dim = current.feature_dim;
    next.points.reserve(current.size());
    for (Point& p : current.points) {
      if (contains(det.box, p)) {
        Point local = to_local(p, det.box);
        local.x *= alpha;
        local.y *= alpha;
        local.z *= alpha;
        next.points.push_back(from_local(local, det.box));
      } else if (remove_occluded && contains(scaled_box, p)) {
        continue;  // background point swallowed by the enlarged box
      } else {
        next.points.push_back(std::move(p));
      }
    }
    det.box = scaled_box;
    current = std::move(next);
  }
  result.frame.cloud = std::move(current);
  return result;
}

namespace {

FrameData apply_beam_resample(const FrameData& frame, const BeamResampleStage& stage) {
  FrameData out;
  out.labels = frame.labels;
  const RangeImage img = cloud_to_range_image(frame.cloud, stage.inclinations, stage.n_cols);
  out.cloud = range_image_to_cloud(resample_beams(img, stage.target_beams));
  return out;
}

std::vector<Box3D> frame_boxes(const LabeledFrame& labels) {
  std::vector<Box3D> boxes;
  boxes.reserve(labels.detections.size());
  for (const Detection& det : labels.detections) boxes.push_back(det.box);
  return boxes;
}

}  // namespace

std::vector<ProcessedView> apply_stages(const FrameData& frame, const PipelineConfig& config) {
  validate(config);
  if (frame.labels.frame_id.empty()) throw std::invalid_argument("frame_id must be non-empty");

  RngStream rng = SeedStream{config.global_seed}.stream_for(frame.labels.frame_id);
  FrameData current = frame;

  for (const PipelineStage& stage : config.stages) {
    if (const auto* resample = std::get_if<BeamResampleStage>(&stage)) {
      current = apply_beam_resample(current, *resample);
    } else if (const auto* rescale = std::get_if<ObjectRescaleStage>(&stage)) {
      current = rescale_frame(current, rescale->alpha_min, rescale->alpha_max, rng,
                              rescale->remove_occluded)
                    .frame;
    } else if (const auto* map = std::get_if<ClassMapStage>(&stage)) {
      current.labels = apply_class_map(current.labels, map->map);
    } else if (const auto* threshold = std::get_if<ThresholdStage>(&stage)) {
      current.labels = filter_by_threshold(current.labels, threshold->policy);
    } else if (const auto* two_view = std::get_if<TwoViewAugmentStage>(&stage)) {
      const AugmentationSpec spec1 = two_view->spec1 ? *two_view->spec1 : sample_augmentation_spec(rng);
      const AugmentationSpec spec2 = two_view->spec2 ? *two_view->spec2 : sample_augmentation_spec(rng);
      std::vector<ProcessedView> views;
      int view_no = 1;
      for (const AugmentationSpec& spec : {spec1, spec2}) {
        auto [cloud, boxes] = apply_augmentation(current.cloud, frame_boxes(current.labels), spec);
        FrameData view;
        view.cloud = std::move(cloud);
        view.labels = current.labels;
        for (std::size_t i = 0; i < boxes.size(); ++i) view.labels.detections[i].box = boxes[i];
        views.push_back({".view" + std::to_string(view_no++), std::move(view)});
      }
      return views;
    }
  }
  return {{"", std::move(current)}};
}

namespace {

struct FrameEntry {
  std::string frame_id;
  fs::path cloud_path;
  fs::path labels_path;
};

std::vector<FrameEntry> enumerate_frames(const fs::path& input_dir) {
  if (!fs::is_directory(input_dir)) throw IoError("input directory not found: " + input_dir.string());
  std::vector<FrameEntry> entries;
  for (const auto& item : fs::directory_iterator(input_dir)) {
    if (!item.is_regular_file() || item.path().extension() != ".bin") continue;
    FrameEntry entry;
    entry.frame_id = item.path().stem().string();
    entry.cloud_path = item.path();
    entry.labels_path = item.path().parent_path() / (entry.frame_id + ".jsonl");
    entries.push_back(std::move(entry));
  }
  std::sort(entries.begin(), entries.end(),
            [](const FrameEntry& a, const FrameEntry& b) { return a.frame_id < b.frame_id; });
  return entries;
}

}  // namespace

PipelineSummary run_pipeline(const fs::path& input_dir,
                             const fs::path& output_dir,
                             const PipelineConfig& config,
                             int feature_dim,
                             int workers,
                             const ProgressFn& progress) {
  validate(config);
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");

  const std::vector<FrameEntry> entries = enumerate_frames(input_dir);
  fs::create_directories(output_dir);

  std::vector<std::optional<FrameFailure>> failures(entries.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::uint64_t> done{0};
  std::mutex progress_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t index = next.fetch_add(1);
      if (index >= entries.size()) return;
      const FrameEntry& entry = entries[index];
      std::string stage = "read";
      try {
        FrameData frame;
        frame.cloud = read_point_cloud(entry.cloud_path, feature_dim);
        if (fs::exists(entry.labels_path)) {
          auto frames = read_labeled_frames(entry.labels_path);
          if (frames.size() != 1)
            throw ParseError(entry.labels_path.string() + ": expected exactly one frame per labels file");
          frame.labels = std::move(frames.front());
          if (frame.labels.frame_id != entry.frame_id)
            throw ParseError(entry.labels_path.string() + ": frame_id does not match the file name");
        } else {
          frame.labels.frame_id = entry.frame_id;
        }

        stage = "apply";
        const std::vector<ProcessedView> views = apply_stages(frame, config);

        stage = "write";
        for (const ProcessedView& view : views) {
          write_point_cloud(view.frame.cloud, output_dir / (entry.frame_id + view.suffix + ".bin"));
          write_labeled_frames({view.frame.labels}, output_dir / (entry.frame_id + view.suffix + ".jsonl"));
        }
      } catch (const std::exception& e) {
        failures[index] = FrameFailure{entry.frame_id, stage, e.what()};
      }
      const std::uint64_t finished = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(finished, entries.size());
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int count = static_cast<int>(
        std::min(static_cast<std::size_t>(workers), std::max<std::size_t>(entries.size(), 1)));
    pool.reserve(count);
    for (int i = 0; i < count; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  PipelineSummary summary;
  for (const auto& failure : failures) {
    if (failure) {
      ++summary.failed;
      summary.failures.push_back(*failure);
    } else {
      ++summary.processed;
    }
  }
  return summary;
}

}  // namespace pcprep
