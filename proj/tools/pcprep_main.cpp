// pcprep command-line frontend. Machine-readable output (JSON or CSV) goes
// to stdout, diagnostics to stderr. Exit codes: 0 success, 1 usage error,
// 2 data error.
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcprep/pcprep.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

using nlohmann::json;

int fail_data(const std::string& context) {
  std::fprintf(stderr, "pcprep: %s: %s\n", context.c_str(), pcp_last_error_message());
  return kExitData;
}

int fail_usage(const std::string& message) {
  std::fprintf(stderr, "pcprep: %s\n", message.c_str());
  return kExitUsage;
}

struct CloudDeleter {
  void operator()(pcp_cloud* p) const { pcp_cloud_free(p); }
};
struct ImageDeleter {
  void operator()(pcp_range_image* p) const { pcp_range_image_free(p); }
};
struct FramesDeleter {
  void operator()(pcp_frames* p) const { pcp_frames_free(p); }
};
struct ProposalsDeleter {
  void operator()(pcp_proposals* p) const { pcp_proposals_free(p); }
};
struct MatchSetDeleter {
  void operator()(pcp_match_set* p) const { pcp_match_set_free(p); }
};
using CloudPtr = std::unique_ptr<pcp_cloud, CloudDeleter>;
using ImagePtr = std::unique_ptr<pcp_range_image, ImageDeleter>;
using FramesPtr = std::unique_ptr<pcp_frames, FramesDeleter>;
using ProposalsPtr = std::unique_ptr<pcp_proposals, ProposalsDeleter>;
using MatchSetPtr = std::unique_ptr<pcp_match_set, MatchSetDeleter>;

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string format_fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// "Class=value" flag pairs
std::optional<std::pair<std::string, double>> parse_class_value(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(text.substr(eq + 1), &used);
    if (used != text.size() - eq - 1) return std::nullopt;
    return std::make_pair(text.substr(0, eq), v);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<double> default_iou(const std::string& cls) {
  if (cls == "Vehicle") return 0.7;
  if (cls == "Pedestrian") return 0.3;
  if (cls == "Cyclist") return 0.5;
  return std::nullopt;
}

/* ---- resample ---- */

struct ResampleArgs {
  std::string input, output, inclinations_file;
  int beams = 0;
  int cols = 1800;
  int feature_dim = 4;
};

int run_resample(const ResampleArgs& args) {
  std::vector<double> inclinations;
  {
    std::ifstream in(args.inclinations_file);
    if (!in) {
      std::fprintf(stderr, "pcprep: cannot open inclinations file %s\n", args.inclinations_file.c_str());
      return kExitData;
    }
    double v = 0;
    while (in >> v) inclinations.push_back(v);
    if (inclinations.empty()) {
      std::fprintf(stderr, "pcprep: inclinations file %s holds no values\n", args.inclinations_file.c_str());
      return kExitData;
    }
  }

  pcp_cloud* raw_cloud = nullptr;
  if (pcp_cloud_read(args.input.c_str(), args.feature_dim, &raw_cloud) != PCP_OK)
    return fail_data(args.input);
  CloudPtr cloud(raw_cloud);
  uint64_t input_points = 0;
  pcp_cloud_num_points(cloud.get(), &input_points);

  pcp_range_image* raw_img = nullptr;
  if (pcp_cloud_to_range_image(cloud.get(), inclinations.data(),
                               static_cast<uint32_t>(inclinations.size()), args.cols, &raw_img) != PCP_OK)
    return fail_data("projecting to range image");
  ImagePtr img(raw_img);

  pcp_range_image* raw_resampled = nullptr;
  if (pcp_range_image_resample(img.get(), args.beams, &raw_resampled) != PCP_OK)
    return fail_data("resampling beams");
  ImagePtr resampled(raw_resampled);

  pcp_cloud* raw_out = nullptr;
  if (pcp_range_image_to_cloud(resampled.get(), &raw_out) != PCP_OK)
    return fail_data("reprojecting to points");
  CloudPtr out(raw_out);
  if (pcp_cloud_write(out.get(), args.output.c_str()) != PCP_OK) return fail_data(args.output);

  uint64_t output_points = 0;
  pcp_cloud_num_points(out.get(), &output_points);
  const json summary{{"input_points", input_points},
                     {"output_points", output_points},
                     {"source_beams", inclinations.size()},
                     {"target_beams", args.beams}};
  std::printf("%s\n", summary.dump().c_str());
  return kExitOk;
}

/* ---- rescale ---- */

struct RescaleArgs {
  std::string input_cloud, input_labels, output_cloud, output_labels;
  double alpha_min = 0.9;
  double alpha_max = 1.1;
  uint64_t seed = 0;
  bool remove_occluded = false;
  int feature_dim = 4;
};

int run_rescale(const RescaleArgs& args) {
  if (!(args.alpha_min > 0.0) || args.alpha_min > args.alpha_max)
    return fail_usage("--alpha-min must be > 0 and <= --alpha-max");

  pcp_cloud* raw_cloud = nullptr;
  if (pcp_cloud_read(args.input_cloud.c_str(), args.feature_dim, &raw_cloud) != PCP_OK)
    return fail_data(args.input_cloud);
  CloudPtr cloud(raw_cloud);
  pcp_frames* raw_labels = nullptr;
  if (pcp_frames_read(args.input_labels.c_str(), &raw_labels) != PCP_OK)
    return fail_data(args.input_labels);
  FramesPtr labels(raw_labels);

  pcp_cloud* raw_out_cloud = nullptr;
  pcp_frames* raw_out_labels = nullptr;
  char* raw_summary = nullptr;
  if (pcp_rescale_frames(cloud.get(), labels.get(), args.alpha_min, args.alpha_max, args.seed,
                         args.remove_occluded ? 1 : 0, &raw_out_cloud, &raw_out_labels,
                         &raw_summary) != PCP_OK)
    return fail_data("rescaling objects");
  CloudPtr out_cloud(raw_out_cloud);
  FramesPtr out_labels(raw_out_labels);
  std::string summary_text(raw_summary);
  pcp_string_free(raw_summary);

  if (pcp_cloud_write(out_cloud.get(), args.output_cloud.c_str()) != PCP_OK)
    return fail_data(args.output_cloud);
  if (pcp_frames_write(out_labels.get(), args.output_labels.c_str()) != PCP_OK)
    return fail_data(args.output_labels);

  uint64_t in_points = 0, out_points = 0;
  pcp_cloud_num_points(cloud.get(), &in_points);
  pcp_cloud_num_points(out_cloud.get(), &out_points);
  json summary = json::parse(summary_text);
  summary["input_points"] = in_points;
  summary["output_points"] = out_points;
  summary["seed"] = args.seed;
  std::printf("%s\n", summary.dump().c_str());
  return kExitOk;
}

/* ---- filter-labels ---- */

struct FilterArgs {
  std::string input, output;
  std::vector<std::string> thresholds;
};

std::optional<std::string> policy_json_from_flags(const std::vector<std::string>& flags) {
  json policy{{"Vehicle", 0.8}, {"Pedestrian", 0.7}, {"Cyclist", 0.7}};
  for (const std::string& flag : flags) {
    const auto parsed = parse_class_value(flag);
    if (!parsed) return std::nullopt;
    policy[parsed->first] = parsed->second;
  }
  return policy.dump();
}

int run_filter(const FilterArgs& args) {
  const auto policy = policy_json_from_flags(args.thresholds);
  if (!policy) return fail_usage("--threshold expects Class=value");

  pcp_frames* raw_in = nullptr;
  if (pcp_frames_read(args.input.c_str(), &raw_in) != PCP_OK) return fail_data(args.input);
  FramesPtr frames(raw_in);

  pcp_frames* raw_out = nullptr;
  if (pcp_frames_filter_by_threshold(frames.get(), policy->c_str(), &raw_out) != PCP_OK)
    return fail_data("filtering");
  FramesPtr filtered(raw_out);
  if (pcp_frames_write(filtered.get(), args.output.c_str()) != PCP_OK) return fail_data(args.output);

  uint64_t frame_count = 0, before = 0, after = 0;
  pcp_frames_count(frames.get(), &frame_count);
  pcp_frames_detection_count(frames.get(), &before);
  pcp_frames_detection_count(filtered.get(), &after);
  const json summary{
      {"frames", frame_count}, {"detections_in", before}, {"detections_out", after}, {"removed", before - after}};
  std::printf("%s\n", summary.dump().c_str());
  return kExitOk;
}

/* ---- stats ---- */

struct StatsArgs {
  std::string input;
  std::vector<std::string> classes{"Vehicle", "Pedestrian", "Cyclist"};
};

int run_stats(const StatsArgs& args) {
  pcp_frames* raw = nullptr;
  if (pcp_frames_read(args.input.c_str(), &raw) != PCP_OK) return fail_data(args.input);
  FramesPtr frames(raw);

  std::printf("class,mean_instances_per_frame\n");
  for (const std::string& cls : args.classes) {
    double mean = 0.0;
    if (pcp_frames_mean_instances(frames.get(), cls.c_str(), &mean) != PCP_OK) return fail_data(cls);
    std::printf("%s,%s\n", cls.c_str(), format_fixed2(mean).c_str());
  }
  return kExitOk;
}

/* ---- eval ---- */

struct EvalArgs {
  std::string predictions, ground_truth;
  std::vector<std::string> classes{"Vehicle", "Pedestrian", "Cyclist"};
  std::vector<std::string> iou_flags;
  int sweep = 0;
};

int run_eval(const EvalArgs& args) {
  std::vector<std::pair<std::string, double>> class_ious;
  for (const std::string& cls : args.classes) {
    std::optional<double> iou = default_iou(cls);
    for (const std::string& flag : args.iou_flags) {
      const auto parsed = parse_class_value(flag);
      if (!parsed) return fail_usage("--iou expects Class=value");
      if (parsed->first == cls) iou = parsed->second;
    }
    if (!iou) return fail_usage("no IoU threshold for class '" + cls + "'; pass --iou " + cls + "=VALUE");
    class_ious.emplace_back(cls, *iou);
  }

  pcp_frames* raw_pred = nullptr;
  if (pcp_frames_read(args.predictions.c_str(), &raw_pred) != PCP_OK) return fail_data(args.predictions);
  FramesPtr predictions(raw_pred);
  pcp_frames* raw_gt = nullptr;
  if (pcp_frames_read(args.ground_truth.c_str(), &raw_gt) != PCP_OK) return fail_data(args.ground_truth);
  FramesPtr ground_truth(raw_gt);

  if (args.sweep > 0) {
    std::vector<double> grid(args.sweep);
    for (int i = 0; i < args.sweep; ++i) grid[i] = static_cast<double>(i) / args.sweep;
    std::printf("class,score_threshold,precision,tp,fp\n");
    for (const auto& [cls, iou] : class_ious) {
      std::vector<double> precisions(grid.size());
      std::vector<uint64_t> tp(grid.size()), fp(grid.size());
      if (pcp_threshold_sweep(predictions.get(), ground_truth.get(), cls.c_str(), iou, grid.data(),
                              grid.size(), precisions.data(), tp.data(), fp.data()) != PCP_OK)
        return fail_data(cls);
      for (std::size_t i = 0; i < grid.size(); ++i)
        std::printf("%s,%s,%.4f,%" PRIu64 ",%" PRIu64 "\n", cls.c_str(), format_fixed2(grid[i]).c_str(),
                    precisions[i], tp[i], fp[i]);
    }
    return kExitOk;
  }

  std::printf("class,iou_threshold,ap\n");
  for (const auto& [cls, iou] : class_ious) {
    double ap = 0.0;
    int defined = 0;
    if (pcp_average_precision(predictions.get(), ground_truth.get(), cls.c_str(), iou, &ap, &defined) !=
        PCP_OK)
      return fail_data(cls);
    if (defined)
      std::printf("%s,%s,%s\n", cls.c_str(), format_fixed2(iou).c_str(), format_fixed2(ap).c_str());
    else
      std::printf("%s,%s,NA\n", cls.c_str(), format_fixed2(iou).c_str());
  }
  return kExitOk;
}

/* ---- match ---- */

struct MatchArgs {
  std::string view1, view2, spec1, spec2;
  int top_m = 256;
  double tau = 0.3;
  int batch_size = 1;
  std::string loss_reduction = "mean";
};

int run_match(const MatchArgs& args) {
  if (args.loss_reduction != "mean" && args.loss_reduction != "sum")
    return fail_usage("--loss-reduction must be 'mean' or 'sum'");
  if (args.top_m < 1) return fail_usage("--top-m must be >= 1");
  if (!(args.tau > 0.0)) return fail_usage("--tau must be > 0");
  if (args.batch_size < 1) return fail_usage("--batch-size must be >= 1");

  std::optional<std::string> spec1_text, spec2_text;
  if (!args.spec1.empty()) {
    spec1_text = read_file(args.spec1);
    if (!spec1_text) {
      std::fprintf(stderr, "pcprep: cannot open %s\n", args.spec1.c_str());
      return kExitData;
    }
  }
  if (!args.spec2.empty()) {
    spec2_text = read_file(args.spec2);
    if (!spec2_text) {
      std::fprintf(stderr, "pcprep: cannot open %s\n", args.spec2.c_str());
      return kExitData;
    }
  }

  pcp_proposals* raw1 = nullptr;
  if (pcp_proposals_read(args.view1.c_str(), &raw1) != PCP_OK) return fail_data(args.view1);
  ProposalsPtr view1(raw1);
  pcp_proposals* raw2 = nullptr;
  if (pcp_proposals_read(args.view2.c_str(), &raw2) != PCP_OK) return fail_data(args.view2);
  ProposalsPtr view2(raw2);

  pcp_match_set* raw_matches = nullptr;
  if (pcp_match_cross_view(view1.get(), view2.get(), spec1_text ? spec1_text->c_str() : nullptr,
                           spec2_text ? spec2_text->c_str() : nullptr, args.top_m, args.tau,
                           &raw_matches) != PCP_OK)
    return fail_data("matching");
  MatchSetPtr matches(raw_matches);

  double loss = 0.0;
  int empty = 0;
  if (pcp_consistency_loss(matches.get(), view1.get(), view2.get(), args.batch_size,
                           args.loss_reduction == "sum" ? 1 : 0, &loss, &empty) != PCP_OK)
    return fail_data("consistency loss");

  pcp_proposals* raw_promoted1 = nullptr;
  pcp_proposals* raw_promoted2 = nullptr;
  if (pcp_promote_unknowns(view1.get(), view2.get(), matches.get(), &raw_promoted1, &raw_promoted2) != PCP_OK)
    return fail_data("promoting unknowns");
  ProposalsPtr promoted1(raw_promoted1);
  ProposalsPtr promoted2(raw_promoted2);

  auto promoted_indices = [](const pcp_proposals* before, const pcp_proposals* after) {
    json out = json::array();
    uint64_t count = 0;
    pcp_proposals_count(before, &count);
    for (uint64_t i = 0; i < count; ++i) {
      const char* old_label = nullptr;
      const char* new_label = nullptr;
      pcp_proposals_label(before, i, &old_label);
      pcp_proposals_label(after, i, &new_label);
      if (std::string(old_label) != new_label) out.push_back(i);
    }
    return out;
  };

  uint64_t k = 0;
  pcp_match_set_size(matches.get(), &k);
  json pairs = json::array();
  for (uint64_t i = 0; i < k; ++i) {
    uint64_t a = 0, b = 0;
    double d = 0.0;
    pcp_match_set_pair(matches.get(), i, &a, &b, &d);
    pairs.push_back(json::array({a, b, d}));
  }
  const json output{{"k", k},
                    {"pairs", std::move(pairs)},
                    {"loss", loss},
                    {"empty_match", empty != 0},
                    {"loss_reduction", args.loss_reduction},
                    {"batch_size", args.batch_size},
                    {"promoted_view1", promoted_indices(view1.get(), promoted1.get())},
                    {"promoted_view2", promoted_indices(view2.get(), promoted2.get())}};
  std::printf("%s\n", output.dump().c_str());
  return kExitOk;
}

/* ---- pipeline ---- */

struct PipelineArgs {
  std::string input_dir, output_dir, config;
  std::optional<uint64_t> seed;
  int feature_dim = 4;
  int workers = 1;
};

void print_progress(uint64_t done, uint64_t total, void*) {
  if (done == total || done % 100 == 0) std::fprintf(stderr, "\rframes %" PRIu64 "/%" PRIu64, done, total);
  if (done == total) std::fprintf(stderr, "\n");
}

int run_pipeline_cmd(const PipelineArgs& args) {
  if (args.workers < 1) return fail_usage("--workers must be >= 1");
  auto config_text = read_file(args.config);
  if (!config_text) {
    std::fprintf(stderr, "pcprep: cannot open %s\n", args.config.c_str());
    return kExitData;
  }
  if (args.seed) {
    json config = json::parse(*config_text, nullptr, false);
    if (config.is_discarded() || !config.is_object()) {
      std::fprintf(stderr, "pcprep: %s is not a JSON object\n", args.config.c_str());
      return kExitData;
    }
    config["seed"] = *args.seed;
    config_text = config.dump();
  }

  char* raw_summary = nullptr;
  if (pcp_pipeline_run(args.input_dir.c_str(), args.output_dir.c_str(), config_text->c_str(),
                       args.feature_dim, args.workers, print_progress, nullptr, &raw_summary) != PCP_OK)
    return fail_data("pipeline");
  std::string summary(raw_summary);
  pcp_string_free(raw_summary);
  std::printf("%s\n", summary.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-cloud dataset preparation toolkit"};
  app.set_version_flag("--version", std::string(pcp_version()));
  app.require_subcommand(1);

  ResampleArgs resample_args;
  CLI::App* resample = app.add_subcommand("resample", "Re-sample lidar beams through a range image");
  resample->add_option("--input", resample_args.input, "Input point cloud (.bin)")->required();
  resample->add_option("--output", resample_args.output, "Output point cloud (.bin)")->required();
  resample->add_option("--beams", resample_args.beams, "Target beam count")->required()
      ->check(CLI::PositiveNumber);
  resample->add_option("--inclinations", resample_args.inclinations_file,
                       "File of source beam inclinations (radians, whitespace separated)")
      ->required();
  resample->add_option("--cols", resample_args.cols, "Range image columns")->capture_default_str()
      ->check(CLI::PositiveNumber);
  resample->add_option("--feature-dim", resample_args.feature_dim, "Floats per point in the .bin file")
      ->capture_default_str()
      ->check(CLI::Range(3, 1 << 20));

  RescaleArgs rescale_args;
  CLI::App* rescale = app.add_subcommand("rescale", "Randomly re-scale labeled objects");
  rescale->add_option("--input-cloud", rescale_args.input_cloud)->required();
  rescale->add_option("--input-labels", rescale_args.input_labels)->required();
  rescale->add_option("--output-cloud", rescale_args.output_cloud)->required();
  rescale->add_option("--output-labels", rescale_args.output_labels)->required();
  rescale->add_option("--alpha-min", rescale_args.alpha_min)->capture_default_str();
  rescale->add_option("--alpha-max", rescale_args.alpha_max)->capture_default_str();
  rescale->add_option("--seed", rescale_args.seed)->capture_default_str();
  rescale->add_flag("--remove-occluded", rescale_args.remove_occluded,
                    "Drop background points inside an enlarged box");
  rescale->add_option("--feature-dim", rescale_args.feature_dim)->capture_default_str()
      ->check(CLI::Range(3, 1 << 20));

  FilterArgs filter_args;
  CLI::App* filter = app.add_subcommand("filter-labels", "Drop detections below per-class score thresholds");
  filter->add_option("--input", filter_args.input, "Input labels (.jsonl)")->required();
  filter->add_option("--output", filter_args.output, "Output labels (.jsonl)")->required();
  filter->add_option("--threshold", filter_args.thresholds,
                     "Override as Class=value (defaults: Vehicle=0.8 Pedestrian=0.7 Cyclist=0.7)");

  StatsArgs stats_args;
  CLI::App* stats = app.add_subcommand("stats", "Per-class mean instances per frame (CSV)");
  stats->add_option("--input", stats_args.input, "Labels (.jsonl)")->required();
  stats->add_option("--classes", stats_args.classes, "Classes to report")->delimiter(',')
      ->capture_default_str();

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Average precision against ground truth (CSV)");
  eval->add_option("--predictions", eval_args.predictions)->required();
  eval->add_option("--ground-truth", eval_args.ground_truth)->required();
  eval->add_option("--classes", eval_args.classes)->delimiter(',')->capture_default_str();
  eval->add_option("--iou", eval_args.iou_flags,
                   "Override as Class=value (defaults: Vehicle=0.7 Pedestrian=0.3 Cyclist=0.5)");
  eval->add_option("--sweep", eval_args.sweep,
                   "Emit precision at N score thresholds instead of AP")
      ->check(CLI::PositiveNumber);

  MatchArgs match_args;
  CLI::App* match = app.add_subcommand("match", "Cross-view proposal matching and consistency loss");
  match->add_option("--view1", match_args.view1, "Proposals of view 1 (.jsonl)")->required();
  match->add_option("--view2", match_args.view2, "Proposals of view 2 (.jsonl)")->required();
  match->add_option("--spec1", match_args.spec1, "Augmentation spec of view 1 (JSON; default identity)");
  match->add_option("--spec2", match_args.spec2, "Augmentation spec of view 2 (JSON; default identity)");
  match->add_option("--top-m", match_args.top_m)->capture_default_str();
  match->add_option("--tau", match_args.tau)->capture_default_str();
  match->add_option("--batch-size", match_args.batch_size)->capture_default_str();
  match->add_option("--loss-reduction", match_args.loss_reduction, "mean or sum over feature dims")
      ->capture_default_str();

  PipelineArgs pipeline_args;
  CLI::App* pipeline = app.add_subcommand("pipeline", "Run a staged pipeline over a frame directory");
  pipeline->add_option("--input-dir", pipeline_args.input_dir)->required();
  pipeline->add_option("--output-dir", pipeline_args.output_dir)->required();
  pipeline->add_option("--config", pipeline_args.config, "Pipeline config (JSON)")->required();
  uint64_t seed_flag = 0;
  CLI::Option* seed_opt = pipeline->add_option("--seed", seed_flag, "Override the config seed");
  pipeline->add_option("--feature-dim", pipeline_args.feature_dim)->capture_default_str()
      ->check(CLI::Range(3, 1 << 20));
  pipeline->add_option("--workers", pipeline_args.workers)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (seed_opt->count() > 0) pipeline_args.seed = seed_flag;

  if (resample->parsed()) return run_resample(resample_args);
  if (rescale->parsed()) return run_rescale(rescale_args);
  if (filter->parsed()) return run_filter(filter_args);
  if (stats->parsed()) return run_stats(stats_args);
  if (eval->parsed()) return run_eval(eval_args);
  if (match->parsed()) return run_match(match_args);
  if (pipeline->parsed()) return run_pipeline_cmd(pipeline_args);
  return kExitUsage;
}
