#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace pollisim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

struct RunOptions {
  std::string scenario_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;     // overrides the scenario seed
  std::optional<double> max_time;       // overrides the scenario max time
  bool svg{true};
  bool quiet{false};
  int parallel_seeds{1};                 // >1 runs seed..seed+N-1 into subdirs
};

/// Run a scenario to completion and write metrics.csv, flowers.json,
/// trajectory.csv and map.svg into out_dir. Returns a process exit code.
int run_scenario_cli(const RunOptions& options);

struct EvalVisionOptions {
  std::string images_dir;
  std::string labels_path;
  std::string counts_path;  // alternative input: a tp,fp,tn,fn file
  std::string out_path;     // confusion report destination
  int min_blob{25};
  double patch_tau{0.6};
  int patch_min_area{25};
  int patch_max_area{1000000};
  bool quiet{false};
};

/// Train on the train split, evaluate patch classification on the test split,
/// and write the confusion report. Returns a process exit code.
int eval_vision_cli(const EvalVisionOptions& options);

}  // namespace pollisim
