/* pcprep — lidar point-cloud data preparation library.
 *
 * C API over the C++ core. Every function returns PCP_OK (0) on success or
 * a PCP_ERR_* code; pcp_last_error_message() describes the most recent
 * failure on the calling thread. Out-parameters are written only on
 * success. Handles are opaque and freed with their pcp_*_free function.
 */
#ifndef PCPREP_H
#define PCPREP_H

#include <stddef.h>
#include <stdint.h>

#ifndef PCP_API
#if defined(_WIN32)
#define PCP_API __declspec(dllexport)
#else
#define PCP_API __attribute__((visibility("default")))
#endif
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define PCP_OK 0
#define PCP_ERR_INVALID_ARGUMENT 1 /* bad parameter or precondition violation */
#define PCP_ERR_IO 2               /* file could not be opened, read or written */
#define PCP_ERR_PARSE 3            /* file or JSON contents violate the format */
#define PCP_ERR_INTERNAL 4

typedef struct pcp_cloud pcp_cloud;             /* N x D point cloud */
typedef struct pcp_range_image pcp_range_image; /* beams x columns range grid */
typedef struct pcp_frames pcp_frames;           /* list of labeled frames */
typedef struct pcp_proposals pcp_proposals;     /* one view's proposal list */
typedef struct pcp_match_set pcp_match_set;     /* cross-view pair set */

/* 7-DoF box: center, size, heading about +z (radians). */
typedef struct pcp_box {
  double cx, cy, cz;
  double l, w, h;
  double heading;
} pcp_box;

PCP_API const char* pcp_version(void);
PCP_API const char* pcp_strerror(int code);
/* Message of the last failure on this thread; empty string if none. */
PCP_API const char* pcp_last_error_message(void);

/* ---- point clouds (raw little-endian float32, row-major N x D) ---- */

/* data is n_points * feature_dim floats, xyz first. */
PCP_API int pcp_cloud_create(const float* data, uint64_t n_points, uint32_t feature_dim, pcp_cloud** out);
PCP_API int pcp_cloud_read(const char* path, uint32_t feature_dim, pcp_cloud** out);
PCP_API int pcp_cloud_write(const pcp_cloud* cloud, const char* path);
PCP_API int pcp_cloud_num_points(const pcp_cloud* cloud, uint64_t* out);
PCP_API int pcp_cloud_feature_dim(const pcp_cloud* cloud, uint32_t* out);
/* buffer must hold n_points * feature_dim floats. */
PCP_API int pcp_cloud_copy_data(const pcp_cloud* cloud, float* buffer, uint64_t buffer_len);
/* range is x_min y_min z_min x_max y_max z_max; boundary closed. */
PCP_API int pcp_cloud_crop_to_range(const pcp_cloud* cloud, const double range[6], pcp_cloud** out);
PCP_API void pcp_cloud_free(pcp_cloud* cloud);

/* ---- spherical conversions ---- */

/* theta = full-quadrant azimuth atan2(x, y) in [-pi, pi); phi = asin(z/r).
 * The origin maps to r = theta = phi = 0. */
PCP_API int pcp_to_spherical(double x, double y, double z, double* r, double* theta, double* phi);
PCP_API int pcp_from_spherical(double r, double theta, double phi, double* x, double* y, double* z);

/* ---- range images ---- */

PCP_API int pcp_cloud_to_range_image(const pcp_cloud* cloud, const double* inclinations, uint32_t n_beams,
                                     uint32_t n_cols, pcp_range_image** out);
PCP_API int pcp_range_image_to_cloud(const pcp_range_image* img, pcp_cloud** out);
PCP_API int pcp_range_image_resample(const pcp_range_image* img, uint32_t target_beams, pcp_range_image** out);
/* "PCRI" binary format. */
PCP_API int pcp_range_image_read(const char* path, pcp_range_image** out);
PCP_API int pcp_range_image_write(const pcp_range_image* img, const char* path);
PCP_API int pcp_range_image_n_beams(const pcp_range_image* img, uint32_t* out);
PCP_API int pcp_range_image_n_cols(const pcp_range_image* img, uint32_t* out);
PCP_API int pcp_range_image_occupied_cells(const pcp_range_image* img, uint64_t* out);
PCP_API void pcp_range_image_free(pcp_range_image* img);

/* ---- box geometry ---- */

PCP_API int pcp_box_contains(const pcp_box* box, double x, double y, double z, int* out);
PCP_API int pcp_iou_bev(const pcp_box* a, const pcp_box* b, double* out);
PCP_API int pcp_iou_3d(const pcp_box* a, const pcp_box* b, double* out);
/* points must be exactly the in-box points; alpha > 0. */
PCP_API int pcp_rescale_object(const pcp_box* box, const pcp_cloud* points, double alpha, pcp_box* out_box,
                               pcp_cloud** out_points);

/* ---- labeled frames (JSON Lines) ---- */

PCP_API int pcp_frames_read(const char* path, pcp_frames** out);
PCP_API int pcp_frames_write(const pcp_frames* frames, const char* path);
PCP_API int pcp_frames_count(const pcp_frames* frames, uint64_t* out);
PCP_API int pcp_frames_detection_count(const pcp_frames* frames, uint64_t* out);
PCP_API void pcp_frames_free(pcp_frames* frames);

/* class_map_json: {"Car": "Vehicle", ...}; NULL uses the bundled
 * Car/Bus/Truck -> Vehicle map. */
PCP_API int pcp_frames_apply_class_map(const pcp_frames* frames, const char* class_map_json, pcp_frames** out);
/* policy_json: {"Vehicle": 0.8, ...}; NULL uses 0.8/0.7/0.7. Scores equal
 * to the threshold are kept. */
PCP_API int pcp_frames_filter_by_threshold(const pcp_frames* frames, const char* policy_json, pcp_frames** out);
/* assignment_json maps class -> source id, e.g. {"Vehicle": "a", ...}.
 * Sources are frame lists aligned by frame_id. */
PCP_API int pcp_frames_committee_merge(const pcp_frames* const* sources, const char* const* source_ids,
                                       uint64_t n_sources, const char* assignment_json, pcp_frames** out);

/* Class names seen in the frames, sorted; free with pcp_string_array_free. */
PCP_API int pcp_frames_class_names(const pcp_frames* frames, char*** out_names, uint64_t* out_count);
PCP_API void pcp_string_array_free(char** names, uint64_t count);
/* Mean detections per frame for one class. */
PCP_API int pcp_frames_mean_instances(const pcp_frames* frames, const char* class_name, double* out);

/* ---- evaluation ---- */

PCP_API int pcp_precision_at_iou(const pcp_frames* predictions, const pcp_frames* ground_truth,
                                 const char* class_name, double iou_threshold, double* out);
/* out_defined is 0 when the class has no ground-truth instances (AP is then
 * undefined and out_ap is not written). */
PCP_API int pcp_average_precision(const pcp_frames* predictions, const pcp_frames* ground_truth,
                                  const char* class_name, double iou_threshold, double* out_ap,
                                  int* out_defined);
/* Precision/TP/FP after dropping predictions that score below each
 * threshold. All three output arrays have n_thresholds entries. */
PCP_API int pcp_threshold_sweep(const pcp_frames* predictions, const pcp_frames* ground_truth,
                                const char* class_name, double iou_threshold, const double* score_thresholds,
                                uint64_t n_thresholds, double* out_precisions, uint64_t* out_tp,
                                uint64_t* out_fp);

/* ---- per-object re-scaling over a whole frame ---- */

/* labels must hold exactly one frame. Draws one alpha per detection from
 * the (seed, frame_id) stream and returns a JSON summary with the per-class
 * 10-bin alpha histogram. Free the summary with pcp_string_free. */
PCP_API int pcp_rescale_frames(const pcp_cloud* cloud, const pcp_frames* labels, double alpha_min,
                               double alpha_max, uint64_t seed, int remove_occluded, pcp_cloud** out_cloud,
                               pcp_frames** out_labels, char** out_summary_json);
PCP_API void pcp_string_free(char* text);

/* ---- cross-view proposals ---- */

PCP_API int pcp_proposals_read(const char* path, pcp_proposals** out);
PCP_API int pcp_proposals_write(const pcp_proposals* proposals, const char* path);
PCP_API int pcp_proposals_count(const pcp_proposals* proposals, uint64_t* out);
/* Pointer stays valid until the handle is freed or overwritten. */
PCP_API int pcp_proposals_label(const pcp_proposals* proposals, uint64_t index, const char** out);
PCP_API void pcp_proposals_free(pcp_proposals* proposals);

/* spec_json: {"rotation": rad, "scale": s, "flip_x": b, "flip_y": b,
 * "seed": n}; missing keys default to the identity. NULL means identity. */
PCP_API int pcp_apply_augmentation(const pcp_cloud* cloud, const pcp_box* boxes, uint64_t n_boxes,
                                   const char* spec_json, pcp_cloud** out_cloud, pcp_box* out_boxes);
PCP_API int pcp_inverse_transform_boxes(const pcp_box* boxes, uint64_t n_boxes, const char* spec_json,
                                        pcp_box* out_boxes);

/* Boxes are compared in the common un-augmented frame; pairs are one-to-one
 * with center distance < tau, greedily matched by ascending distance after
 * top-M selection per view. Pair indices refer to the input lists. */
PCP_API int pcp_match_cross_view(const pcp_proposals* view1, const pcp_proposals* view2,
                                 const char* spec1_json, const char* spec2_json, int top_m, double tau,
                                 pcp_match_set** out);
PCP_API int pcp_match_set_size(const pcp_match_set* matches, uint64_t* out);
PCP_API int pcp_match_set_pair(const pcp_match_set* matches, uint64_t index, uint64_t* view1_index,
                               uint64_t* view2_index, double* center_distance);
PCP_API void pcp_match_set_free(pcp_match_set* matches);

/* sum_over_dims 0: per-pair mean over feature dimensions (default
 * convention); 1: per-pair sum. out_empty is 1 when there are no pairs (the
 * loss is then defined as 0). */
PCP_API int pcp_consistency_loss(const pcp_match_set* matches, const pcp_proposals* view1,
                                 const pcp_proposals* view2, uint32_t batch_size, int sum_over_dims,
                                 double* out_value, int* out_empty);
/* Matched proposals labeled Unknown become ForegroundUnknown. */
PCP_API int pcp_promote_unknowns(const pcp_proposals* view1, const pcp_proposals* view2,
                                 const pcp_match_set* matches, pcp_proposals** out1, pcp_proposals** out2);

/* ---- pipeline runner ---- */

typedef void (*pcp_progress_fn)(uint64_t done, uint64_t total, void* user_data);

/* Processes every <frame_id>.bin / <frame_id>.jsonl pair under input_dir
 * with the stages in pipeline_config_json and writes one output pair per
 * frame (or per view). Output is byte-identical for equal inputs, config
 * and seed, independent of the worker count. Per-frame failures are
 * reported in the JSON summary, not as an error code. */
PCP_API int pcp_pipeline_run(const char* input_dir, const char* output_dir, const char* pipeline_config_json,
                             uint32_t feature_dim, int workers, pcp_progress_fn progress, void* user_data,
                             char** out_summary_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PCPREP_H */
