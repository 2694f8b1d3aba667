#include <CLI11.hpp>

#include "pollisim/corpus.hpp"
#include "pollisim/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"greenhouse pollination mission simulator"};
  app.require_subcommand(1);

  pollisim::RunOptions run_opts;
  std::uint64_t seed_flag = 0;
  double max_time_flag = 0.0;
  CLI::App* run = app.add_subcommand("run", "run a scenario and write mission outputs");
  run->add_option("--scenario", run_opts.scenario_path, "scenario JSON file")->required();
  run->add_option("--out-dir", run_opts.out_dir, "output directory")->required();
  auto* seed_opt = run->add_option("--seed", seed_flag, "override the scenario seed");
  auto* time_opt = run->add_option("--max-time", max_time_flag, "override max sim time [s]");
  run->add_option("--svg", run_opts.svg, "write map.svg (default true)");
  run->add_flag("--quiet", run_opts.quiet, "suppress the summary line");
  run->add_option("--parallel-seeds", run_opts.parallel_seeds,
                  "run N consecutive seeds into per-seed subdirectories");

  pollisim::EvalVisionOptions eval_opts;
  CLI::App* eval = app.add_subcommand("eval-vision",
                                      "train/evaluate the color segmentation pipeline");
  eval->add_option("--images", eval_opts.images_dir, "directory of P6 pixmaps");
  eval->add_option("--labels", eval_opts.labels_path, "labels.csv (filename,label,split)");
  eval->add_option("--counts", eval_opts.counts_path,
                   "skip evaluation and report from a tp,fp,tn,fn file");
  eval->add_option("--out", eval_opts.out_path, "confusion report destination")->required();
  eval->add_option("--min-blob", eval_opts.min_blob, "segmentation blob floor [px]");
  eval->add_flag("--quiet", eval_opts.quiet, "suppress the summary line");

  pollisim::CorpusOptions gen_opts;
  CLI::App* gen = app.add_subcommand("gen-vision", "generate a synthetic patch corpus");
  gen->add_option("--out", gen_opts.out_dir, "output directory")->required();
  gen->add_option("--train", gen_opts.train_per_class, "training patches per class");
  gen->add_option("--test", gen_opts.test_per_class, "test patches per class");
  gen->add_option("--seed", gen_opts.seed, "corpus seed");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    if (*seed_opt) run_opts.seed = seed_flag;
    if (*time_opt) run_opts.max_time = max_time_flag;
    return pollisim::run_scenario_cli(run_opts);
  }
  if (eval->parsed()) {
    if (eval_opts.counts_path.empty() &&
        (eval_opts.images_dir.empty() || eval_opts.labels_path.empty())) {
      std::cerr << "eval-vision needs --images and --labels, or --counts\n";
      return pollisim::kExitValidation;
    }
    return pollisim::eval_vision_cli(eval_opts);
  }
  if (gen->parsed()) {
    pollisim::generate_vision_corpus(gen_opts);
    return 0;
  }
  return 0;
}
