// Command-line front end: run a strategy over a suite, inject lessons into a
// pool file, and render reports for completed runs.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mentoract/harness.hpp"

namespace {

int run_command(const mentoract::harness::RunConfig& config) {
  auto result = mentoract::harness::run(config);
  mentoract::harness::LoadedRun loaded;
  loaded.dir = config.out_dir;
  loaded.header = result.run_log.header;
  loaded.metrics = result.metrics;
  std::cout << mentoract::harness::render_report({loaded});
  std::cout << "\ntrace: " << result.run_log_path << "\nmetrics: " << result.metrics_path
            << "\n";
  return 0;  // a completed run is success regardless of task outcomes
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-reflective task planning over a household text world"};
  app.require_subcommand(1);

  mentoract::harness::RunConfig config;
  std::string strategy = "fcrf";
  auto* run = app.add_subcommand("run", "Run one strategy over a scenario suite");
  run->add_option("--suite", config.suite_path, "Scenario file or directory of *.json")
      ->required();
  run->add_option("--strategy", strategy,
                  "planning-only | reasoning-only | reasoning-reflection | fcrf | "
                  "fcrf-no-experience | fcrf-no-lesson");
  run->add_option("--episodes", config.ep_total, "Trial budget per task");
  run->add_option("--backend", config.backend_spec, "scripted:PATH or live:URL")
      ->required();
  run->add_option("--k-window", config.k_window, "Reflections included per prompt");
  run->add_option("--pool-cap", config.pool_capacity, "Lesson pool capacity");
  run->add_option("--out", config.out_dir, "Output directory")->required();
  run->add_option("--seed", config.seed, "Run seed, recorded in the trace");
  run->add_option("--max-steps", config.max_steps, "Per-trial action limit");
  run->add_option("--model", config.model_id, "Model id for live backends");
  run->add_option("--pool", config.pool_path, "Initial lesson pool file");
  run->add_flag("--parallel", config.parallel,
                "Run tasks concurrently against a pool snapshot (not the faithful "
                "online loop)");

  std::string pool_path, lesson_text;
  auto* inject = app.add_subcommand("inject-lesson", "Append a human lesson to a pool");
  inject->add_option("--pool", pool_path, "Lesson pool file (created if missing)")
      ->required();
  inject->add_option("--text", lesson_text, "One imperative sentence")->required();

  std::vector<std::string> report_dirs;
  auto* report = app.add_subcommand("report", "Render tables for completed runs");
  report->add_option("dirs", report_dirs, "One or two run directories")
      ->expected(1, 2)
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      config.strategy = mentoract::harness::strategy_from_name(strategy);
      return run_command(config);
    }
    if (inject->parsed()) {
      auto result = mentoract::harness::inject_lesson(pool_path, lesson_text);
      if (result.added)
        std::cout << "added lesson #" << result.lesson_id << " to " << pool_path << "\n";
      else
        std::cout << "duplicate of lesson #" << result.lesson_id
                  << "; pool unchanged\n";
      return 0;
    }
    if (report->parsed()) {
      std::vector<mentoract::harness::LoadedRun> runs;
      for (const auto& dir : report_dirs)
        runs.push_back(mentoract::harness::load_run_dir(dir));
      std::cout << mentoract::harness::render_report(runs);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
