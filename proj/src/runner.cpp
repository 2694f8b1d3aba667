#include "pollisim/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "pollisim/mission.hpp"
#include "pollisim/render.hpp"
#include "pollisim/scenario.hpp"
#include "pollisim/vision.hpp"

namespace pollisim {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_metrics_csv(const std::string& path, const MissionReport& report) {
  std::ofstream out(path, std::ios::binary);
  out << "distance_m,sim_time_s,pollinated,attempted,ready_total,rate,collisions,"
         "pose_rmse_m\n";
  const MissionMetrics& m = report.metrics;
  out << fmt(m.distance_driven, 9) << "," << fmt(m.sim_time, 9) << "," << m.pollinated
      << "," << m.attempted << "," << m.ready_total << ","
      << fmt(report.pollination_rate, 9) << "," << m.collisions << ","
      << fmt(m.pose_rmse, 9) << "\n";
}

void write_trajectory_csv(const std::string& path, const Mission& mission) {
  std::ofstream out(path, std::ios::binary);
  out << "t,x,y,theta\n";
  for (const TrajectorySample& s : mission.trajectory()) {
    out << fmt(s.t, 6) << "," << fmt(s.pose.x, 12) << "," << fmt(s.pose.y, 12) << ","
        << fmt(s.pose.theta, 12) << "\n";
  }
}

void write_flowers_json(const std::string& path, const Mission& mission) {
  nlohmann::ordered_json doc;
  auto& flowers = doc["flowers"] = nlohmann::ordered_json::array();
  for (const Flower& f : mission.world().flowers) {
    nlohmann::ordered_json entry{
        {"id", f.id},
        {"cell",
         {{"row", f.cell.row_id},
          {"side", to_string(f.cell.side)},
          {"index", f.cell.index}}},
        {"position", {f.position.x, f.position.y, f.position.z}},
        {"ready_time", f.ready_time},
        {"wilt_time", f.wilt_time},
        {"state", to_string(f.state)},
        {"pistil_coverage", f.pistil_coverage},
    };
    if (f.pollinated_time >= 0.0)
      entry["pollinated_time"] = f.pollinated_time;
    else
      entry["pollinated_time"] = nullptr;
    flowers.push_back(entry);
  }
  auto& attempts = doc["attempts"] = nlohmann::ordered_json::array();
  for (const AttemptRecord& a : mission.database().attempts) {
    attempts.push_back({{"flower_id", a.flower_id},
                        {"cell",
                         {{"row", a.cell.row_id},
                          {"side", to_string(a.cell.side)},
                          {"index", a.cell.index}}},
                        {"time", a.time},
                        {"success", a.success}});
  }
  std::ofstream out(path, std::ios::binary);
  out << doc.dump(2) << "\n";
}

int run_single(const Scenario& scenario, const std::string& out_dir, bool svg, bool quiet) {
  fs::create_directories(out_dir);
  Mission mission(scenario);
  mission.run();

  const MissionReport report = summarize(mission.metrics(), mission.database());
  write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), report);
  write_trajectory_csv((fs::path(out_dir) / "trajectory.csv").string(), mission);
  write_flowers_json((fs::path(out_dir) / "flowers.json").string(), mission);
  if (svg) write_map_svg((fs::path(out_dir) / "map.svg").string(), mission);

  if (!quiet) {
    std::cout << "phase=" << to_string(mission.phase())
              << " time=" << fmt(report.metrics.sim_time, 1)
              << "s distance=" << fmt(report.metrics.distance_driven, 2)
              << "m pollinated=" << report.metrics.pollinated << "/"
              << report.metrics.ready_total
              << " rate=" << fmt(report.pollination_rate, 3)
              << " collisions=" << report.metrics.collisions
              << " rmse=" << fmt(report.metrics.pose_rmse, 4) << "m\n";
  }
  if (!mission.done()) {
    std::cerr << "mission stopped at max time in phase " << to_string(mission.phase())
              << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int run_scenario_cli(const RunOptions& options) {
  Scenario scenario;
  try {
    scenario = load_scenario(options.scenario_path);
    if (options.seed) scenario.world.seed = *options.seed;
    if (options.max_time) scenario.mission.max_time = *options.max_time;
    build_world(scenario.world);  // surface geometry problems as validation
  } catch (const std::exception& e) {
    std::cerr << "scenario validation failed: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (options.parallel_seeds <= 1)
      return run_single(scenario, options.out_dir, options.svg, options.quiet);

    std::vector<int> codes(options.parallel_seeds, kExitOk);
    std::vector<std::thread> workers;
    for (int k = 0; k < options.parallel_seeds; ++k) {
      workers.emplace_back([&, k]() {
        Scenario copy = scenario;
        copy.world.seed += static_cast<std::uint64_t>(k);
        const std::string dir =
            (fs::path(options.out_dir) / ("seed_" + std::to_string(copy.world.seed)))
                .string();
        try {
          codes[k] = run_single(copy, dir, options.svg, options.quiet);
        } catch (const std::exception&) {
          codes[k] = kExitRuntime;
        }
      });
    }
    for (std::thread& w : workers) w.join();
    for (int code : codes)
      if (code != kExitOk) return code;
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "mission failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

namespace {

struct LabeledImage {
  std::string filename;
  bool flower{false};
  bool test{false};
};

std::vector<LabeledImage> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open labels file " + path);
  std::vector<LabeledImage> entries;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.rfind("filename", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    std::istringstream row(line);
    std::string name, label, split;
    if (!std::getline(row, name, ',') || !std::getline(row, label, ',') ||
        !std::getline(row, split, ','))
      throw ValidationError("malformed labels row: " + line);
    if (label != "flower" && label != "non_flower")
      throw ValidationError("unknown label '" + label + "' in " + line);
    if (split != "train" && split != "test")
      throw ValidationError("unknown split '" + split + "' in " + line);
    entries.push_back({name, label == "flower", split == "test"});
  }
  return entries;
}

void write_report(const std::string& path, const ConfusionCounts& counts) {
  const PrecisionRecall pr = precision_recall(counts);
  std::ofstream out(path, std::ios::binary);
  out << "tp,fp,tn,fn,precision,recall\n";
  out << counts.tp << "," << counts.fp << "," << counts.tn << "," << counts.fn << ","
      << fmt(pr.precision, 6) << "," << fmt(pr.recall, 6) << "\n";
}

int eval_from_counts(const EvalVisionOptions& options) {
  std::ifstream in(options.counts_path);
  if (!in) {
    std::cerr << "cannot open counts file " << options.counts_path << "\n";
    return kExitValidation;
  }
  std::string line;
  ConfusionCounts counts;
  bool parsed = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("tp", 0) == 0) continue;
    if (std::sscanf(line.c_str(), "%ld,%ld,%ld,%ld", &counts.tp, &counts.fp, &counts.tn,
                    &counts.fn) == 4) {
      parsed = true;
      break;
    }
  }
  if (!parsed || counts.tp < 0 || counts.fp < 0 || counts.tn < 0 || counts.fn < 0) {
    std::cerr << "counts file must hold a tp,fp,tn,fn row\n";
    return kExitValidation;
  }
  write_report(options.out_path, counts);
  if (!options.quiet) {
    const PrecisionRecall pr = precision_recall(counts);
    std::cout << "precision=" << fmt(pr.precision, 4) << " recall=" << fmt(pr.recall, 4)
              << "\n";
  }
  return kExitOk;
}

}  // namespace

int eval_vision_cli(const EvalVisionOptions& options) {
  if (!options.counts_path.empty()) return eval_from_counts(options);

  std::vector<LabeledImage> entries;
  std::vector<LabeledPixel> train_pixels;
  try {
    entries = read_labels(options.labels_path);
    int tests = 0;
    for (const LabeledImage& e : entries) tests += e.test ? 1 : 0;
    if (entries.empty()) throw ValidationError("labels file is empty");
    if (tests == 0) throw ValidationError("test split is empty");
    if (tests == static_cast<int>(entries.size()))
      throw ValidationError("training split is empty");

    for (const LabeledImage& e : entries) {
      if (e.test) continue;
      const Image img = read_ppm((fs::path(options.images_dir) / e.filename).string());
      for (std::size_t i = 0; i < img.data.size(); i += 3)
        train_pixels.push_back({img.data[i], img.data[i + 1], img.data[i + 2], e.flower});
    }
  } catch (const std::exception& e) {
    std::cerr << "vision evaluation input error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    const ColorModel model = train_color_model(train_pixels);
    const SegmentationLUT lut = build_lut(model);
    const ThresholdPatchClassifier classifier(options.patch_tau, options.patch_min_area,
                                              options.patch_max_area);
    ConfusionCounts counts;
    for (const LabeledImage& e : entries) {
      if (!e.test) continue;
      const Image img = read_ppm((fs::path(options.images_dir) / e.filename).string());
      const auto patches = segment_image(img, lut, options.min_blob);
      bool predicted = false;
      for (const ImagePatch& p : patches) predicted |= classify_patch(p, classifier);
      if (e.flower && predicted) ++counts.tp;
      if (e.flower && !predicted) ++counts.fn;
      if (!e.flower && predicted) ++counts.fp;
      if (!e.flower && !predicted) ++counts.tn;
    }
    write_report(options.out_path, counts);
    if (!options.quiet) {
      const PrecisionRecall pr = precision_recall(counts);
      std::cout << "tp=" << counts.tp << " fp=" << counts.fp << " tn=" << counts.tn
                << " fn=" << counts.fn << " precision=" << fmt(pr.precision, 4)
                << " recall=" << fmt(pr.recall, 4) << "\n";
    }
    return kExitOk;
  } catch (const MissingClassError& e) {
    std::cerr << "vision evaluation input error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "vision evaluation failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace pollisim
