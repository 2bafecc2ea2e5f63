#include "pcprep/io.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pcprep/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary point-cloud and range-image formats are little-endian");

namespace pcprep {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::atomic<std::uint64_t> temp_counter{0};

fs::path temp_path_for(const fs::path& path) {
  return fs::path(path.string() + ".tmp" + std::to_string(temp_counter.fetch_add(1)));
}

void atomic_commit(const fs::path& tmp, const fs::path& path) {
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move temporary file into place for " + path.string());
  }
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& what) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) known = true;
    if (!known) throw ParseError("unknown key '" + key + "' in " + what);
  }
}

json must_get(const json& obj, const char* key, const std::string& what) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("missing key '" + std::string(key) + "' in " + what);
  return *it;
}

Box3D box_from_json(const json& arr, const std::string& what) {
  if (!arr.is_array() || arr.size() != 7) throw ParseError("'box' must be an array of 7 numbers in " + what);
  std::array<double, 7> v{};
  for (int i = 0; i < 7; ++i) {
    if (!arr[i].is_number()) throw ParseError("'box' must be an array of 7 numbers in " + what);
    v[i] = arr[i].get<double>();
  }
  try {
    return make_box(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string(e.what()) + " in " + what);
  }
}

json box_to_json(const Box3D& b) {
  return json::array({b.cx, b.cy, b.cz, b.l, b.w, b.h, b.heading});
}

json parse_document(const std::string& text, const std::string& what) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ParseError("invalid JSON in " + what);
  return doc;
}

}  // namespace

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file_atomic(const std::string& text, const fs::path& path) {
  const fs::path tmp = temp_path_for(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  atomic_commit(tmp, path);
}

PointCloud read_point_cloud(const fs::path& path, int feature_dim) {
  if (feature_dim < 3) throw std::invalid_argument("feature_dim must be >= 3");
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const std::streamoff bytes = in.tellg();
  in.seekg(0);

  const std::size_t row_bytes = sizeof(float) * static_cast<std::size_t>(feature_dim);
  if (bytes % row_bytes != 0)
    throw ParseError(path.string() + ": size " + std::to_string(bytes) +
                     " bytes is not divisible by the row size " + std::to_string(row_bytes) +
                     " (feature_dim " + std::to_string(feature_dim) + ")");

  const std::size_t n = static_cast<std::size_t>(bytes) / row_bytes;
  std::vector<float> raw(n * feature_dim);
  if (n > 0) {
    in.read(reinterpret_cast<char*>(raw.data()), bytes);
    if (!in) throw IoError("short read from " + path.string());
  }

  PointCloud cloud;
  cloud.feature_dim = feature_dim;
  cloud.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = raw.data() + i * feature_dim;
    for (int k = 0; k < feature_dim; ++k)
      if (!std::isfinite(row[k]))
        throw ParseError(path.string() + ": non-finite value at point " + std::to_string(i));
    Point& p = cloud.points[i];
    p.x = row[0];
    p.y = row[1];
    p.z = row[2];
    p.extras.assign(row + 3, row + feature_dim);
  }
  return cloud;
}

void write_point_cloud(const PointCloud& cloud, const fs::path& path) {
  std::vector<float> raw;
  raw.reserve(cloud.size() * cloud.feature_dim);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Point& p = cloud.points[i];
    if (static_cast<int>(p.extras.size()) != cloud.feature_dim - 3)
      throw std::invalid_argument("point " + std::to_string(i) + " has " + std::to_string(p.extras.size()) +
                                  " extras, expected " + std::to_string(cloud.feature_dim - 3));
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw std::invalid_argument("non-finite coordinate at point " + std::to_string(i));
    for (float e : p.extras)
      if (!std::isfinite(e)) throw std::invalid_argument("non-finite extra at point " + std::to_string(i));
    raw.push_back(static_cast<float>(p.x));
    raw.push_back(static_cast<float>(p.y));
    raw.push_back(static_cast<float>(p.z));
    raw.insert(raw.end(), p.extras.begin(), p.extras.end());
  }
  std::string bytes(reinterpret_cast<const char*>(raw.data()), raw.size() * sizeof(float));
  write_text_file_atomic(bytes, path);
}

namespace {

constexpr char kRangeImageMagic[4] = {'P', 'C', 'R', 'I'};

void append_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void append_f32(std::string& out, const float* data, std::size_t count) {
  out.append(reinterpret_cast<const char*>(data), count * sizeof(float));
}

}  // namespace

RangeImage read_range_image(const fs::path& path) {
  const std::string bytes = read_text_file(path);
  auto fail = [&](const std::string& msg) -> ParseError { return ParseError(path.string() + ": " + msg); };

  if (bytes.size() < 16 || std::memcmp(bytes.data(), kRangeImageMagic, 4) != 0)
    throw fail("not a PCRI range-image file");
  std::uint32_t header[3];
  std::memcpy(header, bytes.data() + 4, 12);
  const std::size_t n = header[0], m = header[1], e = header[2];
  const std::size_t expected = 16 + sizeof(float) * (n + n * m + n * m * e);
  if (n == 0 || m == 0) throw fail("empty grid dimensions");
  if (bytes.size() != expected)
    throw fail("size " + std::to_string(bytes.size()) + " bytes, expected " + std::to_string(expected));

  RangeImage img;
  img.n_beams = static_cast<int>(n);
  img.n_cols = static_cast<int>(m);
  img.extras_dim = static_cast<int>(e);
  const float* f = reinterpret_cast<const float*>(bytes.data() + 16);
  img.beam_inclinations.assign(f, f + n);
  img.ranges.assign(f + n, f + n + n * m);
  img.extras.assign(f + n + n * m, f + n + n * m + n * m * e);
  for (std::size_t i = 1; i < n; ++i)
    if (img.beam_inclinations[i] <= img.beam_inclinations[i - 1])
      throw fail("beam inclinations are not strictly ascending");
  for (float r : img.ranges)
    if (!(r >= 0.0f)) throw fail("negative or non-finite range value");
  return img;
}

void write_range_image(const RangeImage& img, const fs::path& path) {
  std::string bytes;
  bytes.reserve(16 + sizeof(float) * (img.beam_inclinations.size() + img.ranges.size() + img.extras.size()));
  bytes.append(kRangeImageMagic, 4);
  append_u32(bytes, static_cast<std::uint32_t>(img.n_beams));
  append_u32(bytes, static_cast<std::uint32_t>(img.n_cols));
  append_u32(bytes, static_cast<std::uint32_t>(img.extras_dim));
  std::vector<float> incl(img.beam_inclinations.begin(), img.beam_inclinations.end());
  append_f32(bytes, incl.data(), incl.size());
  append_f32(bytes, img.ranges.data(), img.ranges.size());
  append_f32(bytes, img.extras.data(), img.extras.size());
  write_text_file_atomic(bytes, path);
}

LabeledFrame frame_from_jsonl(const std::string& line) {
  const json doc = parse_document(line, "frame line");
  if (!doc.is_object()) throw ParseError("frame line must be a JSON object");
  check_keys(doc, {"frame_id", "detections", "cloud_ref"}, "frame");

  LabeledFrame frame;
  const json id = must_get(doc, "frame_id", "frame");
  if (!id.is_string() || id.get<std::string>().empty())
    throw ParseError("'frame_id' must be a non-empty string");
  frame.frame_id = id.get<std::string>();
  if (doc.contains("cloud_ref")) frame.cloud_ref = doc["cloud_ref"].get<std::string>();

  const json dets = must_get(doc, "detections", "frame");
  if (!dets.is_array()) throw ParseError("'detections' must be an array");
  for (const json& d : dets) {
    const std::string what = "detection of frame " + frame.frame_id;
    if (!d.is_object()) throw ParseError(what + " must be an object");
    check_keys(d, {"box", "class", "score", "source"}, what);
    Detection det;
    det.box = box_from_json(must_get(d, "box", what), what);
    det.class_name = must_get(d, "class", what).get<std::string>();
    if (det.class_name.empty()) throw ParseError("'class' must be non-empty in " + what);
    det.score = must_get(d, "score", what).get<double>();
    if (!(det.score >= 0.0 && det.score <= 1.0)) throw ParseError("'score' outside [0, 1] in " + what);
    if (d.contains("source")) det.source_id = d["source"].get<std::string>();
    frame.detections.push_back(std::move(det));
  }
  return frame;
}

std::string frame_to_jsonl(const LabeledFrame& frame) {
  json dets = json::array();
  for (const Detection& det : frame.detections) {
    dets.push_back(json{{"box", box_to_json(det.box)},
                        {"class", det.class_name},
                        {"score", det.score},
                        {"source", det.source_id}});
  }
  json doc{{"frame_id", frame.frame_id}, {"detections", std::move(dets)}};
  if (!frame.cloud_ref.empty()) doc["cloud_ref"] = frame.cloud_ref;
  return doc.dump();
}

std::vector<LabeledFrame> read_labeled_frames(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<LabeledFrame> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      frames.push_back(frame_from_jsonl(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return frames;
}

void write_labeled_frames(const std::vector<LabeledFrame>& frames, const fs::path& path) {
  std::string text;
  for (const LabeledFrame& frame : frames) {
    text += frame_to_jsonl(frame);
    text += '\n';
  }
  write_text_file_atomic(text, path);
}

std::vector<Proposal> read_proposals(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Proposal> proposals;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string what = path.string() + ":" + std::to_string(line_no);
    try {
      const json doc = parse_document(line, "proposal line");
      if (!doc.is_object()) throw ParseError("proposal line must be a JSON object");
      check_keys(doc, {"box", "feature", "objectness", "label"}, "proposal");
      Proposal p;
      p.box = box_from_json(must_get(doc, "box", "proposal"), "proposal");
      const json feat = must_get(doc, "feature", "proposal");
      if (!feat.is_array()) throw ParseError("'feature' must be an array");
      for (const json& v : feat) p.feature.push_back(v.get<float>());
      p.objectness = must_get(doc, "objectness", "proposal").get<double>();
      if (!(p.objectness >= 0.0 && p.objectness <= 1.0)) throw ParseError("'objectness' outside [0, 1]");
      const std::string label = must_get(doc, "label", "proposal").get<std::string>();
      auto parsed = proposal_label_from_string(label);
      if (!parsed) throw ParseError("unknown proposal label '" + label + "'");
      p.label = *parsed;
      if (!proposals.empty() && proposals.front().feature.size() != p.feature.size())
        throw ParseError("feature dimension differs from the first proposal");
      proposals.push_back(std::move(p));
    } catch (const ParseError& e) {
      throw ParseError(what + ": " + e.what());
    }
  }
  return proposals;
}

void write_proposals(const std::vector<Proposal>& proposals, const fs::path& path) {
  std::string text;
  for (const Proposal& p : proposals) {
    json feat = json::array();
    for (float f : p.feature) feat.push_back(f);
    json doc{{"box", box_to_json(p.box)},
             {"feature", std::move(feat)},
             {"objectness", p.objectness},
             {"label", to_string(p.label)}};
    text += doc.dump();
    text += '\n';
  }
  write_text_file_atomic(text, path);
}

AugmentationSpec parse_augmentation_spec(const std::string& json_text) {
  const json doc = parse_document(json_text, "augmentation spec");
  if (!doc.is_object()) throw ParseError("augmentation spec must be a JSON object");
  check_keys(doc, {"rotation", "scale", "flip_x", "flip_y", "seed"}, "augmentation spec");
  AugmentationSpec spec;
  if (doc.contains("rotation")) spec.rotation = doc["rotation"].get<double>();
  if (doc.contains("scale")) spec.scale = doc["scale"].get<double>();
  if (doc.contains("flip_x")) spec.flip_x = doc["flip_x"].get<bool>();
  if (doc.contains("flip_y")) spec.flip_y = doc["flip_y"].get<bool>();
  if (doc.contains("seed")) spec.seed = doc["seed"].get<std::uint64_t>();
  if (!(spec.scale > 0.0)) throw ParseError("augmentation 'scale' must be > 0");
  return spec;
}

std::string augmentation_spec_to_json(const AugmentationSpec& spec) {
  return json{{"rotation", spec.rotation},
              {"scale", spec.scale},
              {"flip_x", spec.flip_x},
              {"flip_y", spec.flip_y},
              {"seed", spec.seed}}
      .dump();
}

DatasetConfig parse_dataset_config(const std::string& json_text) {
  const json doc = parse_document(json_text, "dataset config");
  if (!doc.is_object()) throw ParseError("dataset config must be a JSON object");
  check_keys(doc, {"preset", "name", "point_range", "voxel_size", "feature_dim", "class_names"},
             "dataset config");

  DatasetConfig config;
  if (doc.contains("preset")) {
    const std::string preset = doc["preset"].get<std::string>();
    if (preset == "once") config = DatasetConfig::once();
    else if (preset == "waymo") config = DatasetConfig::waymo();
    else if (preset == "nuscenes") config = DatasetConfig::nuscenes();
    else if (preset == "kitti") config = DatasetConfig::kitti();
    else throw ParseError("unknown dataset preset '" + preset + "'");
  }
  if (doc.contains("name")) config.name = doc["name"].get<std::string>();
  if (doc.contains("point_range")) {
    const json& r = doc["point_range"];
    if (!r.is_array() || r.size() != 6) throw ParseError("'point_range' must be an array of 6 numbers");
    for (int i = 0; i < 6; ++i) config.point_range[i] = r[i].get<double>();
  }
  if (doc.contains("voxel_size")) {
    const json& v = doc["voxel_size"];
    if (!v.is_array() || v.size() != 3) throw ParseError("'voxel_size' must be an array of 3 numbers");
    for (int i = 0; i < 3; ++i) config.voxel_size[i] = v[i].get<double>();
  }
  if (doc.contains("feature_dim")) config.feature_dim = doc["feature_dim"].get<int>();
  if (doc.contains("class_names")) {
    config.class_names.clear();
    for (const json& c : doc["class_names"]) config.class_names.push_back(c.get<std::string>());
  }
  try {
    validate(config);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("dataset config: ") + e.what());
  }
  return config;
}

ClassMap parse_class_map(const std::string& json_text) {
  const json doc = parse_document(json_text, "class map");
  if (!doc.is_object()) throw ParseError("class map must be a JSON object");
  ClassMap map;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_string()) throw ParseError("class map values must be strings");
    map.mapping[key] = value.get<std::string>();
  }
  return map;
}

ThresholdPolicy parse_threshold_policy(const std::string& json_text) {
  const json doc = parse_document(json_text, "threshold policy");
  if (!doc.is_object()) throw ParseError("threshold policy must be a JSON object");
  ThresholdPolicy policy;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_number()) throw ParseError("threshold policy values must be numbers");
    const double t = value.get<double>();
    if (!(t >= 0.0 && t <= 1.0)) throw ParseError("threshold for '" + key + "' outside [0, 1]");
    policy.min_score[key] = t;
  }
  return policy;
}

CommitteeAssignment parse_committee_assignment(const std::string& json_text) {
  // ordered_json keeps declaration order, which drives the merge order
  const ordered_json doc = ordered_json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ParseError("committee assignment must be a JSON object");
  CommitteeAssignment assignment;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_string()) throw ParseError("committee assignment values must be source ids");
    assignment.class_to_source.emplace_back(key, value.get<std::string>());
  }
  return assignment;
}

PipelineConfig parse_pipeline_config(const std::string& json_text) {
  const json doc = parse_document(json_text, "pipeline config");
  if (!doc.is_object()) throw ParseError("pipeline config must be a JSON object");
  check_keys(doc, {"seed", "stages"}, "pipeline config");

  PipelineConfig config;
  if (doc.contains("seed")) config.global_seed = doc["seed"].get<std::uint64_t>();
  const json stages = must_get(doc, "stages", "pipeline config");
  if (!stages.is_array()) throw ParseError("'stages' must be an array");

  for (const json& s : stages) {
    if (!s.is_object()) throw ParseError("each stage must be a JSON object");
    const std::string kind = must_get(s, "stage", "stage").get<std::string>();
    if (kind == "beam_resample") {
      check_keys(s, {"stage", "inclinations", "n_cols", "target_beams"}, "beam_resample stage");
      BeamResampleStage stage;
      const json incl = must_get(s, "inclinations", "beam_resample stage");
      if (!incl.is_array() || incl.empty()) throw ParseError("'inclinations' must be a non-empty array");
      for (const json& v : incl) stage.inclinations.push_back(v.get<double>());
      if (s.contains("n_cols")) stage.n_cols = s["n_cols"].get<int>();
      stage.target_beams = must_get(s, "target_beams", "beam_resample stage").get<int>();
      config.stages.emplace_back(std::move(stage));
    } else if (kind == "object_rescale") {
      check_keys(s, {"stage", "alpha_min", "alpha_max", "remove_occluded"}, "object_rescale stage");
      ObjectRescaleStage stage;
      if (s.contains("alpha_min")) stage.alpha_min = s["alpha_min"].get<double>();
      if (s.contains("alpha_max")) stage.alpha_max = s["alpha_max"].get<double>();
      if (s.contains("remove_occluded")) stage.remove_occluded = s["remove_occluded"].get<bool>();
      config.stages.emplace_back(stage);
    } else if (kind == "class_map") {
      check_keys(s, {"stage", "mapping"}, "class_map stage");
      ClassMapStage stage{ClassMap::once_default()};
      if (s.contains("mapping")) stage.map = parse_class_map(s["mapping"].dump());
      config.stages.emplace_back(std::move(stage));
    } else if (kind == "threshold") {
      check_keys(s, {"stage", "policy"}, "threshold stage");
      ThresholdStage stage{ThresholdPolicy::once_default()};
      if (s.contains("policy")) stage.policy = parse_threshold_policy(s["policy"].dump());
      config.stages.emplace_back(std::move(stage));
    } else if (kind == "two_view_augment") {
      check_keys(s, {"stage", "spec1", "spec2"}, "two_view_augment stage");
      TwoViewAugmentStage stage;
      if (s.contains("spec1")) stage.spec1 = parse_augmentation_spec(s["spec1"].dump());
      if (s.contains("spec2")) stage.spec2 = parse_augmentation_spec(s["spec2"].dump());
      config.stages.emplace_back(std::move(stage));
    } else {
      throw ParseError("unknown stage '" + kind + "'");
    }
  }
  try {
    validate(config);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("pipeline config: ") + e.what());
  }
  return config;
}

}  // namespace pcprep
