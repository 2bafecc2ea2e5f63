#include "pcprep/pcprep.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcprep/boxes.hpp"
#include "pcprep/crossview.hpp"
#include "pcprep/dataset.hpp"
#include "pcprep/errors.hpp"
#include "pcprep/geometry.hpp"
#include "pcprep/io.hpp"
#include "pcprep/labeling.hpp"
#include "pcprep/pipeline.hpp"
#include "pcprep/rng.hpp"

struct pcp_cloud {
  pcprep::PointCloud value;
};
struct pcp_range_image {
  pcprep::RangeImage value;
};
struct pcp_frames {
  std::vector<pcprep::LabeledFrame> value;
};
struct pcp_proposals {
  std::vector<pcprep::Proposal> value;
};
struct pcp_match_set {
  pcprep::MatchSet value;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return PCP_OK;
  } catch (const std::invalid_argument& e) {
    return fail(PCP_ERR_INVALID_ARGUMENT, e.what());
  } catch (const pcprep::IoError& e) {
    return fail(PCP_ERR_IO, e.what());
  } catch (const pcprep::ParseError& e) {
    return fail(PCP_ERR_PARSE, e.what());
  } catch (const std::exception& e) {
    return fail(PCP_ERR_INTERNAL, e.what());
  }
}

void require(bool condition, const char* message) {
  if (!condition) throw std::invalid_argument(message);
}

pcprep::Box3D to_cpp(const pcp_box& b) {
  return pcprep::make_box(b.cx, b.cy, b.cz, b.l, b.w, b.h, b.heading);
}

pcp_box to_c(const pcprep::Box3D& b) {
  return pcp_box{b.cx, b.cy, b.cz, b.l, b.w, b.h, b.heading};
}

pcprep::AugmentationSpec spec_from_json_or_identity(const char* spec_json) {
  if (spec_json == nullptr) return pcprep::AugmentationSpec{};
  return pcprep::parse_augmentation_spec(spec_json);
}

char* copy_string(const std::string& text) {
  char* out = new char[text.size() + 1];
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* pcp_version(void) { return PCPREP_VERSION; }

const char* pcp_strerror(int code) {
  switch (code) {
    case PCP_OK: return "ok";
    case PCP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PCP_ERR_IO: return "i/o error";
    case PCP_ERR_PARSE: return "parse error";
    case PCP_ERR_INTERNAL: return "internal error";
  }
  return "unknown error";
}

const char* pcp_last_error_message(void) { return g_last_error.c_str(); }

/* ---- point clouds ---- */

int pcp_cloud_create(const float* data, uint64_t n_points, uint32_t feature_dim, pcp_cloud** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    require(feature_dim >= 3, "feature_dim must be >= 3");
    require(data != nullptr || n_points == 0, "data is null");
    auto cloud = std::make_unique<pcp_cloud>();
    cloud->value.feature_dim = static_cast<int>(feature_dim);
    cloud->value.points.resize(n_points);
    for (uint64_t i = 0; i < n_points; ++i) {
      const float* row = data + i * feature_dim;
      for (uint32_t k = 0; k < feature_dim; ++k)
        require(std::isfinite(row[k]), "point values must be finite");
      pcprep::Point& p = cloud->value.points[i];
      p.x = row[0];
      p.y = row[1];
      p.z = row[2];
      p.extras.assign(row + 3, row + feature_dim);
    }
    *out = cloud.release();
  });
}

int pcp_cloud_read(const char* path, uint32_t feature_dim, pcp_cloud** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path/out is null");
    auto cloud = std::make_unique<pcp_cloud>();
    cloud->value = pcprep::read_point_cloud(path, static_cast<int>(feature_dim));
    *out = cloud.release();
  });
}

int pcp_cloud_write(const pcp_cloud* cloud, const char* path) {
  return guarded([&] {
    require(cloud != nullptr && path != nullptr, "cloud/path is null");
    pcprep::write_point_cloud(cloud->value, path);
  });
}

int pcp_cloud_num_points(const pcp_cloud* cloud, uint64_t* out) {
  return guarded([&] {
    require(cloud != nullptr && out != nullptr, "cloud/out is null");
    *out = cloud->value.size();
  });
}

int pcp_cloud_feature_dim(const pcp_cloud* cloud, uint32_t* out) {
  return guarded([&] {
    require(cloud != nullptr && out != nullptr, "cloud/out is null");
    *out = static_cast<uint32_t>(cloud->value.feature_dim);
  });
}

int pcp_cloud_copy_data(const pcp_cloud* cloud, float* buffer, uint64_t buffer_len) {
  return guarded([&] {
    require(cloud != nullptr, "cloud is null");
    const uint64_t needed = cloud->value.size() * cloud->value.feature_dim;
    require(buffer != nullptr || needed == 0, "buffer is null");
    require(buffer_len >= needed, "buffer too small");
    float* dst = buffer;
    for (const pcprep::Point& p : cloud->value.points) {
      *dst++ = static_cast<float>(p.x);
      *dst++ = static_cast<float>(p.y);
      *dst++ = static_cast<float>(p.z);
      for (float e : p.extras) *dst++ = e;
    }
  });
}

int pcp_cloud_crop_to_range(const pcp_cloud* cloud, const double range[6], pcp_cloud** out) {
  return guarded([&] {
    require(cloud != nullptr && range != nullptr && out != nullptr, "cloud/range/out is null");
    pcprep::DatasetConfig config;
    for (int i = 0; i < 6; ++i) config.point_range[i] = range[i];
    config.feature_dim = cloud->value.feature_dim;
    auto result = std::make_unique<pcp_cloud>();
    result->value = pcprep::crop_to_range(cloud->value, config);
    *out = result.release();
  });
}

void pcp_cloud_free(pcp_cloud* cloud) { delete cloud; }

/* ---- spherical conversions ---- */

int pcp_to_spherical(double x, double y, double z, double* r, double* theta, double* phi) {
  return guarded([&] {
    require(r != nullptr && theta != nullptr && phi != nullptr, "out is null");
    require(std::isfinite(x) && std::isfinite(y) && std::isfinite(z), "coordinates must be finite");
    const pcprep::SphericalCoord s = pcprep::to_spherical(pcprep::Point{x, y, z, {}});
    *r = s.r;
    *theta = s.theta;
    *phi = s.phi;
  });
}

int pcp_from_spherical(double r, double theta, double phi, double* x, double* y, double* z) {
  return guarded([&] {
    require(x != nullptr && y != nullptr && z != nullptr, "out is null");
    require(r >= 0.0, "r must be >= 0");
    const pcprep::Point p = pcprep::from_spherical(pcprep::SphericalCoord{r, theta, phi});
    *x = p.x;
    *y = p.y;
    *z = p.z;
  });
}

/* ---- range images ---- */

int pcp_cloud_to_range_image(const pcp_cloud* cloud, const double* inclinations, uint32_t n_beams,
                             uint32_t n_cols, pcp_range_image** out) {
  return guarded([&] {
    require(cloud != nullptr && inclinations != nullptr && out != nullptr, "cloud/inclinations/out is null");
    require(n_beams > 0, "n_beams must be > 0");
    std::vector<double> incl(inclinations, inclinations + n_beams);
    auto img = std::make_unique<pcp_range_image>();
    img->value = pcprep::cloud_to_range_image(cloud->value, incl, static_cast<int>(n_cols));
    *out = img.release();
  });
}

int pcp_range_image_to_cloud(const pcp_range_image* img, pcp_cloud** out) {
  return guarded([&] {
    require(img != nullptr && out != nullptr, "img/out is null");
    auto cloud = std::make_unique<pcp_cloud>();
    cloud->value = pcprep::range_image_to_cloud(img->value);
    *out = cloud.release();
  });
}

int pcp_range_image_resample(const pcp_range_image* img, uint32_t target_beams, pcp_range_image** out) {
  return guarded([&] {
    require(img != nullptr && out != nullptr, "img/out is null");
    auto result = std::make_unique<pcp_range_image>();
    result->value = pcprep::resample_beams(img->value, static_cast<int>(target_beams));
    *out = result.release();
  });
}

int pcp_range_image_read(const char* path, pcp_range_image** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path/out is null");
    auto img = std::make_unique<pcp_range_image>();
    img->value = pcprep::read_range_image(path);
    *out = img.release();
  });
}

int pcp_range_image_write(const pcp_range_image* img, const char* path) {
  return guarded([&] {
    require(img != nullptr && path != nullptr, "img/path is null");
    pcprep::write_range_image(img->value, path);
  });
}

int pcp_range_image_n_beams(const pcp_range_image* img, uint32_t* out) {
  return guarded([&] {
    require(img != nullptr && out != nullptr, "img/out is null");
    *out = static_cast<uint32_t>(img->value.n_beams);
  });
}

int pcp_range_image_n_cols(const pcp_range_image* img, uint32_t* out) {
  return guarded([&] {
    require(img != nullptr && out != nullptr, "img/out is null");
    *out = static_cast<uint32_t>(img->value.n_cols);
  });
}

int pcp_range_image_occupied_cells(const pcp_range_image* img, uint64_t* out) {
  return guarded([&] {
    require(img != nullptr && out != nullptr, "img/out is null");
    *out = img->value.occupied_cells();
  });
}

void pcp_range_image_free(pcp_range_image* img) { delete img; }

/* ---- box geometry ---- */

int pcp_box_contains(const pcp_box* box, double x, double y, double z, int* out) {
  return guarded([&] {
    require(box != nullptr && out != nullptr, "box/out is null");
    *out = pcprep::contains(to_cpp(*box), pcprep::Point{x, y, z, {}}) ? 1 : 0;
  });
}

int pcp_iou_bev(const pcp_box* a, const pcp_box* b, double* out) {
  return guarded([&] {
    require(a != nullptr && b != nullptr && out != nullptr, "a/b/out is null");
    *out = pcprep::iou_bev(to_cpp(*a), to_cpp(*b));
  });
}

int pcp_iou_3d(const pcp_box* a, const pcp_box* b, double* out) {
  return guarded([&] {
    require(a != nullptr && b != nullptr && out != nullptr, "a/b/out is null");
    *out = pcprep::iou_3d(to_cpp(*a), to_cpp(*b));
  });
}

int pcp_rescale_object(const pcp_box* box, const pcp_cloud* points, double alpha, pcp_box* out_box,
                       pcp_cloud** out_points) {
  return guarded([&] {
    require(box != nullptr && points != nullptr && out_box != nullptr && out_points != nullptr,
            "box/points/out is null");
    auto [scaled_box, scaled_points] = pcprep::rescale_object(to_cpp(*box), points->value, alpha);
    auto result = std::make_unique<pcp_cloud>();
    result->value = std::move(scaled_points);
    *out_box = to_c(scaled_box);
    *out_points = result.release();
  });
}

/* ---- labeled frames ---- */

int pcp_frames_read(const char* path, pcp_frames** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path/out is null");
    auto frames = std::make_unique<pcp_frames>();
    frames->value = pcprep::read_labeled_frames(path);
    *out = frames.release();
  });
}

int pcp_frames_write(const pcp_frames* frames, const char* path) {
  return guarded([&] {
    require(frames != nullptr && path != nullptr, "frames/path is null");
    pcprep::write_labeled_frames(frames->value, path);
  });
}

int pcp_frames_count(const pcp_frames* frames, uint64_t* out) {
  return guarded([&] {
    require(frames != nullptr && out != nullptr, "frames/out is null");
    *out = frames->value.size();
  });
}

int pcp_frames_detection_count(const pcp_frames* frames, uint64_t* out) {
  return guarded([&] {
    require(frames != nullptr && out != nullptr, "frames/out is null");
    uint64_t n = 0;
    for (const pcprep::LabeledFrame& f : frames->value) n += f.detections.size();
    *out = n;
  });
}

void pcp_frames_free(pcp_frames* frames) { delete frames; }

int pcp_frames_apply_class_map(const pcp_frames* frames, const char* class_map_json, pcp_frames** out) {
  return guarded([&] {
    require(frames != nullptr && out != nullptr, "frames/out is null");
    const pcprep::ClassMap map =
        class_map_json ? pcprep::parse_class_map(class_map_json) : pcprep::ClassMap::once_default();
    auto result = std::make_unique<pcp_frames>();
    result->value.reserve(frames->value.size());
    for (const pcprep::LabeledFrame& f : frames->value)
      result->value.push_back(pcprep::apply_class_map(f, map));
    *out = result.release();
  });
}

int pcp_frames_filter_by_threshold(const pcp_frames* frames, const char* policy_json, pcp_frames** out) {
  return guarded([&] {
    require(frames != nullptr && out != nullptr, "frames/out is null");
    const pcprep::ThresholdPolicy policy =
        policy_json ? pcprep::parse_threshold_policy(policy_json) : pcprep::ThresholdPolicy::once_default();
    auto result = std::make_unique<pcp_frames>();
    result->value.reserve(frames->value.size());
    for (const pcprep::LabeledFrame& f : frames->value)
      result->value.push_back(pcprep::filter_by_threshold(f, policy));
    *out = result.release();
  });
}

int pcp_frames_committee_merge(const pcp_frames* const* sources, const char* const* source_ids,
                               uint64_t n_sources, const char* assignment_json, pcp_frames** out) {
  return guarded([&] {
    require(sources != nullptr && source_ids != nullptr && out != nullptr, "sources/source_ids/out is null");
    require(n_sources > 0, "n_sources must be > 0");
    require(assignment_json != nullptr, "assignment_json is null");
    const pcprep::CommitteeAssignment assignment = pcprep::parse_committee_assignment(assignment_json);

    for (uint64_t s = 0; s < n_sources; ++s)
      require(sources[s] != nullptr && source_ids[s] != nullptr, "null source");
    const std::size_t n_frames = sources[0]->value.size();
    for (uint64_t s = 1; s < n_sources; ++s)
      require(sources[s]->value.size() == n_frames, "sources must hold the same number of frames");

    // align every source list by frame_id
    std::vector<std::map<std::string, const pcprep::LabeledFrame*>> by_id(n_sources);
    for (uint64_t s = 0; s < n_sources; ++s)
      for (const pcprep::LabeledFrame& f : sources[s]->value) {
        if (!by_id[s].emplace(f.frame_id, &f).second)
          throw std::invalid_argument("duplicate frame_id '" + f.frame_id + "' in source " + source_ids[s]);
      }

    auto result = std::make_unique<pcp_frames>();
    for (const pcprep::LabeledFrame& lead : sources[0]->value) {
      std::vector<std::pair<std::string, pcprep::LabeledFrame>> frames_by_source;
      for (uint64_t s = 0; s < n_sources; ++s) {
        auto it = by_id[s].find(lead.frame_id);
        if (it == by_id[s].end())
          throw std::invalid_argument("source " + std::string(source_ids[s]) + " is missing frame '" +
                                      lead.frame_id + "'");
        frames_by_source.emplace_back(source_ids[s], *it->second);
      }
      result->value.push_back(pcprep::committee_merge(frames_by_source, assignment));
    }
    *out = result.release();
  });
}

int pcp_frames_class_names(const pcp_frames* frames, char*** out_names, uint64_t* out_count) {
  return guarded([&] {
    require(frames != nullptr && out_names != nullptr && out_count != nullptr, "frames/out is null");
    std::set<std::string> classes;
    for (const pcprep::LabeledFrame& f : frames->value)
      for (const pcprep::Detection& d : f.detections) classes.insert(d.class_name);
    char** names = new char*[classes.size()];
    uint64_t i = 0;
    for (const std::string& c : classes) names[i++] = copy_string(c);
    *out_names = names;
    *out_count = classes.size();
  });
}

void pcp_string_array_free(char** names, uint64_t count) {
  if (names == nullptr) return;
  for (uint64_t i = 0; i < count; ++i) delete[] names[i];
  delete[] names;
}

int pcp_frames_mean_instances(const pcp_frames* frames, const char* class_name, double* out) {
  return guarded([&] {
    require(frames != nullptr && class_name != nullptr && out != nullptr, "frames/class/out is null");
    const auto stats = pcprep::frame_statistics(frames->value, {class_name});
    *out = stats.at(class_name);
  });
}

/* ---- evaluation ---- */

int pcp_precision_at_iou(const pcp_frames* predictions, const pcp_frames* ground_truth,
                         const char* class_name, double iou_threshold, double* out) {
  return guarded([&] {
    require(predictions != nullptr && ground_truth != nullptr && class_name != nullptr && out != nullptr,
            "predictions/ground_truth/class/out is null");
    *out = pcprep::precision_at_iou(predictions->value, ground_truth->value, iou_threshold, class_name);
  });
}

int pcp_average_precision(const pcp_frames* predictions, const pcp_frames* ground_truth,
                          const char* class_name, double iou_threshold, double* out_ap, int* out_defined) {
  return guarded([&] {
    require(predictions != nullptr && ground_truth != nullptr && class_name != nullptr &&
                out_ap != nullptr && out_defined != nullptr,
            "predictions/ground_truth/class/out is null");
    const auto ap =
        pcprep::average_precision_once(predictions->value, ground_truth->value, class_name, iou_threshold);
    *out_defined = ap.has_value() ? 1 : 0;
    if (ap) *out_ap = *ap;
  });
}

int pcp_threshold_sweep(const pcp_frames* predictions, const pcp_frames* ground_truth,
                        const char* class_name, double iou_threshold, const double* score_thresholds,
                        uint64_t n_thresholds, double* out_precisions, uint64_t* out_tp, uint64_t* out_fp) {
  return guarded([&] {
    require(predictions != nullptr && ground_truth != nullptr && class_name != nullptr, "input is null");
    require(score_thresholds != nullptr || n_thresholds == 0, "score_thresholds is null");
    require(out_precisions != nullptr && out_tp != nullptr && out_fp != nullptr, "out is null");
    const std::vector<double> grid(score_thresholds, score_thresholds + n_thresholds);
    const auto points =
        pcprep::threshold_sweep(predictions->value, ground_truth->value, class_name, iou_threshold, grid);
    for (std::size_t i = 0; i < points.size(); ++i) {
      out_precisions[i] = points[i].precision;
      out_tp[i] = static_cast<uint64_t>(points[i].tp);
      out_fp[i] = static_cast<uint64_t>(points[i].fp);
    }
  });
}

/* ---- frame re-scaling ---- */

int pcp_rescale_frames(const pcp_cloud* cloud, const pcp_frames* labels, double alpha_min, double alpha_max,
                       uint64_t seed, int remove_occluded, pcp_cloud** out_cloud, pcp_frames** out_labels,
                       char** out_summary_json) {
  return guarded([&] {
    require(cloud != nullptr && labels != nullptr, "cloud/labels is null");
    require(out_cloud != nullptr && out_labels != nullptr && out_summary_json != nullptr, "out is null");
    require(labels->value.size() == 1, "labels must hold exactly one frame");

    pcprep::FrameData frame{cloud->value, labels->value.front()};
    pcprep::RngStream rng = pcprep::SeedStream{seed}.stream_for(frame.labels.frame_id);
    pcprep::RescaleFrameResult rescaled =
        pcprep::rescale_frame(frame, alpha_min, alpha_max, rng, remove_occluded != 0);

    // per-class 10-bin histogram of the drawn factors over [alpha_min, alpha_max]
    std::map<std::string, std::vector<int>> histogram;
    const double span = alpha_max - alpha_min;
    for (std::size_t i = 0; i < rescaled.alphas.size(); ++i) {
      auto& bins = histogram.try_emplace(frame.labels.detections[i].class_name, std::vector<int>(10, 0))
                       .first->second;
      int bin = span > 0.0 ? static_cast<int>((rescaled.alphas[i] - alpha_min) / span * 10.0) : 0;
      bins[std::min(bin, 9)] += 1;
    }
    nlohmann::json hist_json = nlohmann::json::object();
    for (const auto& [cls, bins] : histogram) hist_json[cls] = bins;
    const nlohmann::json summary{{"frame_id", frame.labels.frame_id},
                                 {"objects", rescaled.alphas.size()},
                                 {"alpha_min", alpha_min},
                                 {"alpha_max", alpha_max},
                                 {"alpha_histogram", std::move(hist_json)}};

    auto result_cloud = std::make_unique<pcp_cloud>();
    result_cloud->value = std::move(rescaled.frame.cloud);
    auto result_labels = std::make_unique<pcp_frames>();
    result_labels->value = {std::move(rescaled.frame.labels)};
    *out_cloud = result_cloud.release();
    *out_labels = result_labels.release();
    *out_summary_json = copy_string(summary.dump());
  });
}

void pcp_string_free(char* text) { delete[] text; }

/* ---- cross-view proposals ---- */

int pcp_proposals_read(const char* path, pcp_proposals** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path/out is null");
    auto proposals = std::make_unique<pcp_proposals>();
    proposals->value = pcprep::read_proposals(path);
    *out = proposals.release();
  });
}

int pcp_proposals_write(const pcp_proposals* proposals, const char* path) {
  return guarded([&] {
    require(proposals != nullptr && path != nullptr, "proposals/path is null");
    pcprep::write_proposals(proposals->value, path);
  });
}

int pcp_proposals_count(const pcp_proposals* proposals, uint64_t* out) {
  return guarded([&] {
    require(proposals != nullptr && out != nullptr, "proposals/out is null");
    *out = proposals->value.size();
  });
}

int pcp_proposals_label(const pcp_proposals* proposals, uint64_t index, const char** out) {
  return guarded([&] {
    require(proposals != nullptr && out != nullptr, "proposals/out is null");
    require(index < proposals->value.size(), "index out of range");
    *out = pcprep::to_string(proposals->value[index].label);
  });
}

void pcp_proposals_free(pcp_proposals* proposals) { delete proposals; }

int pcp_apply_augmentation(const pcp_cloud* cloud, const pcp_box* boxes, uint64_t n_boxes,
                           const char* spec_json, pcp_cloud** out_cloud, pcp_box* out_boxes) {
  return guarded([&] {
    require(cloud != nullptr && out_cloud != nullptr, "cloud/out is null");
    require(boxes != nullptr || n_boxes == 0, "boxes is null");
    require(out_boxes != nullptr || n_boxes == 0, "out_boxes is null");
    std::vector<pcprep::Box3D> in_boxes;
    in_boxes.reserve(n_boxes);
    for (uint64_t i = 0; i < n_boxes; ++i) in_boxes.push_back(to_cpp(boxes[i]));
    auto [result_cloud, result_boxes] =
        pcprep::apply_augmentation(cloud->value, in_boxes, spec_from_json_or_identity(spec_json));
    auto wrapped = std::make_unique<pcp_cloud>();
    wrapped->value = std::move(result_cloud);
    for (uint64_t i = 0; i < n_boxes; ++i) out_boxes[i] = to_c(result_boxes[i]);
    *out_cloud = wrapped.release();
  });
}

int pcp_inverse_transform_boxes(const pcp_box* boxes, uint64_t n_boxes, const char* spec_json,
                                pcp_box* out_boxes) {
  return guarded([&] {
    require(boxes != nullptr || n_boxes == 0, "boxes is null");
    require(out_boxes != nullptr || n_boxes == 0, "out_boxes is null");
    std::vector<pcprep::Box3D> in_boxes;
    in_boxes.reserve(n_boxes);
    for (uint64_t i = 0; i < n_boxes; ++i) in_boxes.push_back(to_cpp(boxes[i]));
    const auto result = pcprep::inverse_transform_boxes(in_boxes, spec_from_json_or_identity(spec_json));
    for (uint64_t i = 0; i < n_boxes; ++i) out_boxes[i] = to_c(result[i]);
  });
}

int pcp_match_cross_view(const pcp_proposals* view1, const pcp_proposals* view2, const char* spec1_json,
                         const char* spec2_json, int top_m, double tau, pcp_match_set** out) {
  return guarded([&] {
    require(view1 != nullptr && view2 != nullptr && out != nullptr, "view1/view2/out is null");
    pcprep::MatchConfig cfg;
    cfg.top_m = top_m;
    cfg.tau = tau;
    auto matches = std::make_unique<pcp_match_set>();
    matches->value = pcprep::match_cross_view(view1->value, view2->value,
                                              spec_from_json_or_identity(spec1_json),
                                              spec_from_json_or_identity(spec2_json), cfg);
    *out = matches.release();
  });
}

int pcp_match_set_size(const pcp_match_set* matches, uint64_t* out) {
  return guarded([&] {
    require(matches != nullptr && out != nullptr, "matches/out is null");
    *out = matches->value.size();
  });
}

int pcp_match_set_pair(const pcp_match_set* matches, uint64_t index, uint64_t* view1_index,
                       uint64_t* view2_index, double* center_distance) {
  return guarded([&] {
    require(matches != nullptr && view1_index != nullptr && view2_index != nullptr &&
                center_distance != nullptr,
            "matches/out is null");
    require(index < matches->value.size(), "index out of range");
    const pcprep::MatchPair& pair = matches->value.pairs[index];
    *view1_index = static_cast<uint64_t>(pair.view1_index);
    *view2_index = static_cast<uint64_t>(pair.view2_index);
    *center_distance = pair.center_distance;
  });
}

void pcp_match_set_free(pcp_match_set* matches) { delete matches; }

int pcp_consistency_loss(const pcp_match_set* matches, const pcp_proposals* view1, const pcp_proposals* view2,
                         uint32_t batch_size, int sum_over_dims, double* out_value, int* out_empty) {
  return guarded([&] {
    require(matches != nullptr && view1 != nullptr && view2 != nullptr, "matches/views is null");
    require(out_value != nullptr && out_empty != nullptr, "out is null");
    const auto reduction = sum_over_dims ? pcprep::FeatureReduction::kSumOverDims
                                         : pcprep::FeatureReduction::kMeanOverDims;
    const auto result = pcprep::consistency_loss(matches->value, view1->value, view2->value,
                                                 static_cast<int>(batch_size), reduction);
    *out_value = result.value;
    *out_empty = result.empty_match ? 1 : 0;
  });
}

int pcp_promote_unknowns(const pcp_proposals* view1, const pcp_proposals* view2, const pcp_match_set* matches,
                         pcp_proposals** out1, pcp_proposals** out2) {
  return guarded([&] {
    require(view1 != nullptr && view2 != nullptr && matches != nullptr, "views/matches is null");
    require(out1 != nullptr && out2 != nullptr, "out is null");
    auto [promoted1, promoted2] = pcprep::promote_unknowns(view1->value, view2->value, matches->value);
    auto wrapped1 = std::make_unique<pcp_proposals>();
    wrapped1->value = std::move(promoted1);
    auto wrapped2 = std::make_unique<pcp_proposals>();
    wrapped2->value = std::move(promoted2);
    *out1 = wrapped1.release();
    *out2 = wrapped2.release();
  });
}

/* ---- pipeline runner ---- */

int pcp_pipeline_run(const char* input_dir, const char* output_dir, const char* pipeline_config_json,
                     uint32_t feature_dim, int workers, pcp_progress_fn progress, void* user_data,
                     char** out_summary_json) {
  return guarded([&] {
    require(input_dir != nullptr && output_dir != nullptr, "input_dir/output_dir is null");
    require(pipeline_config_json != nullptr && out_summary_json != nullptr, "config/out is null");
    const pcprep::PipelineConfig config = pcprep::parse_pipeline_config(pipeline_config_json);

    pcprep::ProgressFn progress_fn;
    if (progress != nullptr)
      progress_fn = [progress, user_data](uint64_t done, uint64_t total) { progress(done, total, user_data); };

    const pcprep::PipelineSummary summary =
        pcprep::run_pipeline(input_dir, output_dir, config, static_cast<int>(feature_dim), workers, progress_fn);

    nlohmann::json failures = nlohmann::json::array();
    for (const pcprep::FrameFailure& f : summary.failures)
      failures.push_back({{"frame_id", f.frame_id}, {"stage", f.stage}, {"message", f.message}});
    const nlohmann::json doc{
        {"processed", summary.processed}, {"failed", summary.failed}, {"failures", std::move(failures)}};
    *out_summary_json = copy_string(doc.dump());
  });
}

} /* extern "C" */
