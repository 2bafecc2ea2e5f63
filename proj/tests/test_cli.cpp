// End-to-end checks of the CLI binary: exit codes, stdout payloads, file
// side effects. The binary path arrives in the PCPREP_CLI environment
// variable.
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <doctest.h>
#include <json.hpp>

#include "pcprep/io.hpp"
#include "pcprep/labeling.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string stdout_text;
};

std::string cli_path() {
  const char* path = std::getenv("PCPREP_CLI");
  REQUIRE_MESSAGE(path != nullptr, "PCPREP_CLI must point at the binary");
  return path;
}

CommandResult run(const std::string& args) {
  const std::string command = cli_path() + " " + args + " 2>/dev/null";
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CommandResult result;
  std::array<char, 4096> buffer;
  std::size_t n = 0;
  while ((n = fread(buffer.data(), 1, buffer.size(), pipe)) > 0) result.stdout_text.append(buffer.data(), n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("pcprep_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("--version prints a semver") {
  const CommandResult result = run("--version");
  CHECK(result.exit_code == 0);
  CHECK(result.stdout_text.find("0.1.0") != std::string::npos);
}

TEST_CASE("flag misuse exits 1, missing data exits 2") {
  CHECK(run("definitely-not-a-subcommand").exit_code == 1);
  CHECK(run("resample --input a.bin").exit_code == 1);  // missing required flags
  TempDir dir;
  const fs::path inclinations = dir.path / "beams.txt";
  std::ofstream(inclinations) << "-0.1 0.0 0.1\n";
  const fs::path out = dir.path / "out.bin";
  const CommandResult missing = run("resample --input " + (dir.path / "absent.bin").string() + " --output " +
                                    out.string() + " --beams 2 --inclinations " + inclinations.string());
  CHECK(missing.exit_code == 2);
  CHECK_FALSE(fs::exists(out));  // no output file on failure
  // usage error: bad alpha range
  const CommandResult bad_alpha =
      run("rescale --input-cloud x --input-labels y --output-cloud z --output-labels w --alpha-min 0 ");
  CHECK(bad_alpha.exit_code == 1);
}

TEST_CASE("resample reports the documented JSON summary") {
  TempDir dir;
  pcprep::PointCloud cloud;
  cloud.feature_dim = 4;
  // points on two distinct beams
  for (int i = 0; i < 10; ++i) {
    pcprep::Point p = pcprep::from_spherical({10.0 + i, -M_PI + 0.25 + i * 0.6, i % 2 == 0 ? -0.1 : 0.1});
    p.extras = {0.5f};
    cloud.points.push_back(p);
  }
  const fs::path in = dir.path / "in.bin";
  pcprep::write_point_cloud(cloud, in);
  const fs::path inclinations = dir.path / "beams.txt";
  std::ofstream(inclinations) << "-0.1\n0.1\n";
  const fs::path out = dir.path / "out.bin";

  const CommandResult result = run("resample --input " + in.string() + " --output " + out.string() +
                                   " --beams 2 --inclinations " + inclinations.string() + " --cols 32");
  REQUIRE(result.exit_code == 0);
  const json summary = json::parse(result.stdout_text);
  CHECK(summary["input_points"] == 10);
  CHECK(summary["source_beams"] == 2);
  CHECK(summary["target_beams"] == 2);
  CHECK(summary["output_points"] == summary["input_points"]);  // distinct cells, projection-only change
  CHECK(fs::exists(out));
}

TEST_CASE("rescale with alpha pinned to 1 reproduces the input") {
  TempDir dir;
  pcprep::PointCloud cloud;
  cloud.feature_dim = 4;
  cloud.points.push_back(pcprep::Point{1, 0.5, 0, {0.9f}});
  cloud.points.push_back(pcprep::Point{30, 30, 1, {0.1f}});
  const fs::path in_cloud = dir.path / "in.bin";
  pcprep::write_point_cloud(cloud, in_cloud);
  pcprep::LabeledFrame frame;
  frame.frame_id = "f1";
  frame.detections.push_back({pcprep::make_box(0, 0, 0, 4, 2, 2, 0), "Vehicle", 0.9, "a"});
  const fs::path in_labels = dir.path / "in.jsonl";
  pcprep::write_labeled_frames({frame}, in_labels);

  const fs::path out_cloud = dir.path / "out.bin";
  const fs::path out_labels = dir.path / "out.jsonl";
  const std::string flags = "rescale --input-cloud " + in_cloud.string() + " --input-labels " +
                            in_labels.string() + " --output-cloud " + out_cloud.string() +
                            " --output-labels " + out_labels.string();

  const CommandResult identity = run(flags + " --alpha-min 1 --alpha-max 1 --seed 3");
  REQUIRE(identity.exit_code == 0);
  const json summary = json::parse(identity.stdout_text);
  CHECK(summary["objects"] == 1);
  CHECK(summary["alpha_histogram"].contains("Vehicle"));
  CHECK(slurp(out_cloud) == slurp(in_cloud));

  // same seed twice: byte-identical outputs
  const CommandResult once = run(flags + " --alpha-min 0.9 --alpha-max 1.1 --seed 42");
  REQUIRE(once.exit_code == 0);
  const std::string bytes = slurp(out_cloud);
  const CommandResult twice = run(flags + " --alpha-min 0.9 --alpha-max 1.1 --seed 42");
  REQUIRE(twice.exit_code == 0);
  CHECK(slurp(out_cloud) == bytes);
}

TEST_CASE("filter-labels honors the inclusive boundary") {
  TempDir dir;
  pcprep::LabeledFrame frame;
  frame.frame_id = "f1";
  for (double score : {0.69, 0.70, 0.71})
    frame.detections.push_back({pcprep::make_box(score * 100, 0, 0, 1, 1, 2, 0), "Pedestrian", score, "a"});
  const fs::path in = dir.path / "in.jsonl";
  pcprep::write_labeled_frames({frame}, in);
  const fs::path out = dir.path / "out.jsonl";

  const CommandResult result = run("filter-labels --input " + in.string() + " --output " + out.string());
  REQUIRE(result.exit_code == 0);
  const json summary = json::parse(result.stdout_text);
  CHECK(summary["detections_in"] == 3);
  CHECK(summary["detections_out"] == 2);
  const auto kept = pcprep::read_labeled_frames(out);
  REQUIRE(kept[0].detections.size() == 2);
  CHECK(kept[0].detections[0].score == 0.70);
  CHECK(kept[0].detections[1].score == 0.71);
}

TEST_CASE("stats emits the documented CSV") {
  TempDir dir;
  std::vector<pcprep::LabeledFrame> frames;
  for (int i = 0; i < 2; ++i) {
    pcprep::LabeledFrame frame;
    frame.frame_id = "f" + std::to_string(i);
    const int vehicles = i == 0 ? 3 : 1;
    for (int k = 0; k < vehicles; ++k)
      frame.detections.push_back({pcprep::make_box(5.0 * k, 0, 0, 4, 2, 2, 0), "Vehicle", 0.9, "a"});
    frames.push_back(frame);
  }
  const fs::path in = dir.path / "labels.jsonl";
  pcprep::write_labeled_frames(frames, in);

  const CommandResult result = run("stats --input " + in.string());
  REQUIRE(result.exit_code == 0);
  const auto lines = csv_lines(result.stdout_text);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "class,mean_instances_per_frame");
  CHECK(lines[1] == "Vehicle,2.00");
  CHECK(lines[2] == "Pedestrian,0.00");
  CHECK(lines[3] == "Cyclist,0.00");
}

TEST_CASE("eval of predictions against themselves yields AP 100 per class") {
  TempDir dir;
  pcprep::LabeledFrame frame;
  frame.frame_id = "f1";
  frame.detections.push_back({pcprep::make_box(0, 0, 0, 4, 2, 2, 0), "Vehicle", 0.9, "a"});
  frame.detections.push_back({pcprep::make_box(10, 0, 0, 1, 1, 2, 0), "Pedestrian", 0.8, "a"});
  frame.detections.push_back({pcprep::make_box(20, 0, 0, 2, 1, 2, 0), "Cyclist", 0.7, "a"});
  const fs::path labels = dir.path / "labels.jsonl";
  pcprep::write_labeled_frames({frame}, labels);

  const CommandResult result =
      run("eval --predictions " + labels.string() + " --ground-truth " + labels.string());
  REQUIRE(result.exit_code == 0);
  const auto lines = csv_lines(result.stdout_text);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "class,iou_threshold,ap");
  CHECK(lines[1] == "Vehicle,0.70,100.00");
  CHECK(lines[2] == "Pedestrian,0.30,100.00");
  CHECK(lines[3] == "Cyclist,0.50,100.00");

  SUBCASE("sweep emits one row per threshold") {
    const CommandResult sweep = run("eval --predictions " + labels.string() + " --ground-truth " +
                                    labels.string() + " --classes Vehicle --sweep 4");
    REQUIRE(sweep.exit_code == 0);
    const auto sweep_lines = csv_lines(sweep.stdout_text);
    REQUIRE(sweep_lines.size() == 5);
    CHECK(sweep_lines[0] == "class,score_threshold,precision,tp,fp");
    CHECK(sweep_lines[1] == "Vehicle,0.00,1.0000,1,0");
  }
  SUBCASE("class without a default IoU requires --iou") {
    CHECK(run("eval --predictions " + labels.string() + " --ground-truth " + labels.string() +
              " --classes Barrier")
              .exit_code == 1);
  }
}

TEST_CASE("match on identical files with identity specs self-matches") {
  TempDir dir;
  const fs::path props = dir.path / "props.jsonl";
  std::ofstream(props) << R"({"box":[0,0,0,1,1,1,0],"feature":[1,2],"objectness":0.9,"label":"Unknown"})"
                       << "\n"
                       << R"({"box":[5,0,0,1,1,1,0],"feature":[3,4],"objectness":0.8,"label":"Vehicle"})"
                       << "\n";

  const CommandResult result = run("match --view1 " + props.string() + " --view2 " + props.string());
  REQUIRE(result.exit_code == 0);
  const json output = json::parse(result.stdout_text);
  CHECK(output["k"] == 2);
  CHECK(output["loss"] == 0.0);
  CHECK(output["empty_match"] == false);
  CHECK(output["promoted_view1"] == json::array({0}));
  CHECK(output["pairs"][0][2] == 0.0);
}

TEST_CASE("pipeline run is reproducible across worker counts") {
  TempDir dir;
  const fs::path input = dir.path / "in";
  fs::create_directories(input);
  for (int i = 0; i < 6; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "f%02d", i);
    pcprep::PointCloud cloud;
    cloud.feature_dim = 4;
    for (int k = 0; k < 8; ++k)
      cloud.points.push_back(pcprep::Point{1.0 * k, 0.5 * i, 0.1, {0.25f}});
    pcprep::write_point_cloud(cloud, input / (std::string(name) + ".bin"));
    pcprep::LabeledFrame frame;
    frame.frame_id = name;
    frame.detections.push_back({pcprep::make_box(2, 1, 0, 3, 2, 1, 0.2), "Vehicle", 0.95, "a"});
    pcprep::write_labeled_frames({frame}, input / (std::string(name) + ".jsonl"));
  }
  const fs::path config = dir.path / "pipeline.json";
  std::ofstream(config) << R"({"seed": 11, "stages": [{"stage": "threshold"}, )"
                        << R"({"stage": "object_rescale", "alpha_min": 0.9, "alpha_max": 1.1}]})";

  auto tree = [&](const fs::path& root) {
    std::map<std::string, std::string> bytes;
    for (const auto& item : fs::recursive_directory_iterator(root))
      if (item.is_regular_file()) bytes[item.path().filename().string()] = slurp(item.path());
    return bytes;
  };

  const std::string base = "pipeline --input-dir " + input.string() + " --config " + config.string();
  const CommandResult run1 = run(base + " --output-dir " + (dir.path / "o1").string() + " --workers 1");
  REQUIRE(run1.exit_code == 0);
  const json summary = json::parse(run1.stdout_text);
  CHECK(summary["processed"] == 6);
  CHECK(summary["failed"] == 0);
  const CommandResult run4 = run(base + " --output-dir " + (dir.path / "o4").string() + " --workers 4");
  REQUIRE(run4.exit_code == 0);
  CHECK(tree(dir.path / "o1") == tree(dir.path / "o4"));

  // --seed overrides the config seed
  const CommandResult other_seed =
      run(base + " --output-dir " + (dir.path / "o5").string() + " --workers 1 --seed 12");
  REQUIRE(other_seed.exit_code == 0);
  CHECK(tree(dir.path / "o1") != tree(dir.path / "o5"));
}
