#pragma once

// Wires the whole loop together for one strategy over a scenario suite:
// trials, reflections, lesson-pool maintenance, tracing, and reports.

#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mentoract/actor.hpp"
#include "mentoract/backend.hpp"
#include "mentoract/evaluation.hpp"
#include "mentoract/memory.hpp"
#include "mentoract/mentor.hpp"
#include "mentoract/scheduler.hpp"
#include "mentoract/textworld.hpp"

namespace mentoract::harness {

namespace fs = std::filesystem;
using evaluation::MetricsReport;
using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class Strategy {
  PlanningOnly,
  ReasoningOnly,
  ReasoningReflection,
  Fcrf,
  FcrfNoExperience,
  FcrfNoLesson,
};

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::PlanningOnly: return "planning-only";
    case Strategy::ReasoningOnly: return "reasoning-only";
    case Strategy::ReasoningReflection: return "reasoning-reflection";
    case Strategy::Fcrf: return "fcrf";
    case Strategy::FcrfNoExperience: return "fcrf-no-experience";
    case Strategy::FcrfNoLesson: return "fcrf-no-lesson";
  }
  return "?";
}

inline Strategy strategy_from_name(const std::string& name) {
  for (Strategy s : {Strategy::PlanningOnly, Strategy::ReasoningOnly,
                     Strategy::ReasoningReflection, Strategy::Fcrf,
                     Strategy::FcrfNoExperience, Strategy::FcrfNoLesson})
    if (name == strategy_name(s)) return s;
  throw ConfigError("unknown strategy '" + name + "'");
}

inline bool uses_mentor(Strategy s) {
  return s == Strategy::Fcrf || s == Strategy::FcrfNoExperience ||
         s == Strategy::FcrfNoLesson;
}

struct RunConfig {
  std::string suite_path;
  Strategy strategy = Strategy::Fcrf;
  int ep_total = 5;
  std::string backend_spec;  // "scripted:PATH" or "live:URL"
  int k_window = 3;
  int pool_capacity = 50;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool parallel = false;
  int max_steps = 50;
  std::string model_id = "local";
  std::string pool_path;  // optional initial pool; default <out>/pool.jsonl if present
};

inline std::vector<textworld::Scenario> load_suite(const std::string& path) {
  std::vector<textworld::Scenario> suite;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) suite.push_back(textworld::load_scenario(f.string()));
  } else if (fs::is_regular_file(path)) {
    suite.push_back(textworld::load_scenario(path));
  } else {
    throw ConfigError("suite path does not exist: " + path);
  }
  if (suite.empty()) throw ConfigError("suite contains no scenario files: " + path);
  return suite;
}

inline std::unique_ptr<backend::Backend> make_backend(const RunConfig& config) {
  const std::string& spec = config.backend_spec;
  if (spec.rfind("scripted:", 0) == 0)
    return std::make_unique<backend::ScriptedBackend>(
        backend::Fixture::load(spec.substr(9)));
  if (spec.rfind("live:", 0) == 0) {
    backend::BackendConfig bc;
    bc.endpoint = spec.substr(5);
    bc.model_id = config.model_id;
    return std::make_unique<backend::LiveBackend>(bc);
  }
  throw ConfigError("backend spec must be scripted:PATH or live:URL, got '" + spec +
                    "'");
}

namespace detail {

inline std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  if (!out.empty()) out.pop_back();
  return out;
}

inline mentor::ReflectionRecord baseline_reflection(const std::string& goal,
                                                    const actor::Trajectory& traj,
                                                    backend::Backend& b) {
  auto messages = prompts::render_prompt(
      "baseline_reflection",
      {{"goal", goal}, {"trajectory", actor::render_trajectory(traj)}});
  mentor::ReflectionRecord record;
  record.task_id = traj.task_id;
  record.trial_index = traj.trial_index;
  record.intensity = scheduler::Intensity::Simple;
  record.full_text =
      b.complete({traj.task_id, backend::CallPurpose::BaselineReflection}, messages);
  record.word_count = mentor::word_count(record.full_text);
  return record;
}

struct PendingLesson {
  std::string task_id;
  int trial_index = 0;
  std::string text;
};

struct TaskOutcome {
  std::vector<json> events;
  std::vector<PendingLesson> pending;  // parallel mode: merged at the barrier
};

// The full episode loop for one task. In sequential mode `pool` is the live
// shared pool and updates land inline; in parallel mode it is a snapshot and
// new lessons are returned for the merge barrier.
inline TaskOutcome run_task(const textworld::Scenario& sc, const RunConfig& config,
                            const scheduler::SuiteMeta& suite_meta,
                            backend::Backend& backend_impl, mentor::LessonPool& pool,
                            bool defer_pool_updates) {
  memory::TaskMemory mem(sc.id);
  TaskOutcome outcome;
  auto reference = textworld::solve_reference(sc);
  std::vector<std::string> reference_strings;
  for (const auto& a : reference) reference_strings.push_back(textworld::render_action(a));
  std::string goal = textworld::goal_text(sc);

  mem.log_event(json{{"kind", "task-begin"},
                     {"task", sc.id},
                     {"task_type", textworld::task_type_name(sc.task_type)},
                     {"goal", goal},
                     {"num_obj", sc.num_obj},
                     {"num_inter", sc.num_inter},
                     {"reference", reference_strings}});

  scheduler::EpisodeSchedule schedule;
  if (uses_mentor(config.strategy)) {
    scheduler::TaskMeta meta{sc.task_type, sc.num_obj, sc.num_inter};
    schedule = scheduler::allocate_episodes(
        scheduler::assess_difficulty(meta, suite_meta), config.ep_total);
    mem.log_event(json{{"kind", "schedule"},
                       {"task", sc.id},
                       {"ep_total", schedule.ep_total},
                       {"k1", schedule.k1},
                       {"k2", schedule.k2},
                       {"difficulty", schedule.difficulty}});
  }

  actor::ActorMode mode = config.strategy == Strategy::PlanningOnly
                              ? actor::ActorMode::OneShot
                              : actor::ActorMode::ReAct;
  bool reflects = config.strategy != Strategy::PlanningOnly &&
                  config.strategy != Strategy::ReasoningOnly;

  int failures = 0;
  std::optional<std::string> injected_plan;
  std::optional<actor::Trajectory> last_failed;

  for (int trial = 1; trial <= config.ep_total; ++trial) {
    actor::PlanContext ctx;
    ctx.goal = goal;
    if (reflects) ctx.reflections = mem.recent_reflections(config.k_window);
    if (uses_mentor(config.strategy)) ctx.injected_plan = injected_plan;

    mem.begin_trial(trial);
    auto traj = actor::run_trial(sc, ctx, backend_impl, mode, config.max_steps, sc.id,
                                 trial);
    mem.commit_trajectory(traj);

    if (traj.failure == actor::FailureReason::BackendError) {
      mem.log_event(json{{"kind", "task-error"},
                         {"task", sc.id},
                         {"trial", trial},
                         {"message", traj.failure_detail}});
      break;
    }
    if (traj.success) {
      if (uses_mentor(config.strategy) && last_failed) {
        if (defer_pool_updates) {
          auto text =
              mentor::summarize_correction_lesson(*last_failed, traj, backend_impl);
          if (text) outcome.pending.push_back({sc.id, trial, *text});
        } else {
          auto updates = mentor::maintain_lesson_pool({{*last_failed, traj}}, pool,
                                                      backend_impl);
          for (const auto& u : updates)
            mem.log_event(json{{"kind", "pool-update"},
                               {"task", u.task_id},
                               {"trial", u.trial_index},
                               {"added", u.added},
                               {"lesson_id", u.lesson_id},
                               {"text", u.text},
                               {"evicted", u.evicted ? json(*u.evicted) : json(nullptr)},
                               {"size", pool.size()}});
        }
      }
      break;
    }

    ++failures;
    last_failed = traj;
    injected_plan.reset();
    if (!reflects) continue;

    try {
      if (config.strategy == Strategy::ReasoningReflection) {
        mem.append_reflection(baseline_reflection(goal, traj, backend_impl));
      } else {
        auto intensity = scheduler::intensity_for_episode(schedule, failures);
        mentor::ReflectOptions options;
        options.use_experience = config.strategy != Strategy::FcrfNoExperience;
        options.use_lesson = config.strategy != Strategy::FcrfNoLesson;
        try {
          auto record =
              mentor::reflect(intensity, goal, traj, pool, backend_impl, options);
          injected_plan = detail::join_lines(record.plan.actions);
          mem.append_reflection(record);
        } catch (const mentor::ConstructionError& e) {
          // Fall back to reflection-text-only injection for the next trial.
          mem.append_reflection(e.partial);
        }
      }
    } catch (const backend::BackendError& e) {
      mem.log_event(json{{"kind", "task-error"},
                         {"task", sc.id},
                         {"trial", trial},
                         {"message", e.what()}});
      break;
    }
  }

  outcome.events = mem.events();
  return outcome;
}

inline std::string format_ratio(std::optional<double> v, int decimals = 4) {
  if (!v) return "";
  std::ostringstream out;
  out << std::fixed << std::setprecision(decimals) << *v;
  return out.str();
}

}  // namespace detail

struct RunResult {
  MetricsReport metrics;
  std::string run_log_path;
  std::string metrics_path;
  memory::RunLog run_log;
};

inline void write_reports(const MetricsReport& metrics, const fs::path& out_dir) {
  {
    std::ofstream out(out_dir / "metrics.json", std::ios::binary);
    out << metrics.to_json().dump(2) << "\n";
  }
  {
    std::ofstream out(out_dir / "per_task.csv", std::ios::binary);
    out << "task,type,episodes_used,success,recall,precision,reflection_words\n";
    for (const auto& row : metrics.rows) {
      std::string words;
      for (std::size_t i = 0; i < row.reflection_words.size(); ++i)
        words += (i ? ";" : "") + std::to_string(row.reflection_words[i]);
      out << row.task_id << "," << row.type_label << "," << row.episodes_used << ","
          << (row.success ? 1 : 0) << "," << detail::format_ratio(row.recall) << ","
          << detail::format_ratio(row.precision) << "," << words << "\n";
    }
  }
  {
    std::ofstream out(out_dir / "episode_curve.csv", std::ios::binary);
    out << "episode,successes\n";
    for (std::size_t i = 0; i < metrics.episode_curve.size(); ++i)
      out << (i + 1) << "," << metrics.episode_curve[i] << "\n";
  }
}

// Runs the configured strategy over the suite with a caller-supplied
// backend. Sequential mode is the faithful online loop: the lesson pool at
// task i reflects only tasks before i. Parallel mode runs tasks against a
// pool snapshot and merges new lessons at a single barrier.
inline RunResult run_with_backend(const RunConfig& config,
                                  backend::Backend& backend_ref) {
  if (config.ep_total < 1) throw ConfigError("episodes must be >= 1");
  if (config.k_window < 0) throw ConfigError("k-window must be >= 0");
  if (config.pool_capacity < 1) throw ConfigError("pool capacity must be >= 1");
  if (config.out_dir.empty()) throw ConfigError("output directory is required");

  auto suite = load_suite(config.suite_path);
  fs::create_directories(config.out_dir);
  fs::path out_dir(config.out_dir);

  mentor::LessonPool pool(config.pool_capacity);
  std::string pool_source = config.pool_path;
  if (pool_source.empty() && fs::exists(out_dir / "pool.jsonl"))
    pool_source = (out_dir / "pool.jsonl").string();
  if (!pool_source.empty())
    pool = mentor::LessonPool::load(pool_source, config.pool_capacity);

  backend::Backend* backend_impl = &backend_ref;

  scheduler::SuiteMeta suite_meta;
  for (const auto& sc : suite)
    suite_meta.max_complexity =
        std::max(suite_meta.max_complexity, sc.num_obj + sc.num_inter);

  memory::RunLog run_log;
  run_log.header = json{{"kind", "header"},
                        {"version", 1},
                        {"config",
                         {{"suite", config.suite_path},
                          {"strategy", strategy_name(config.strategy)},
                          {"episodes", config.ep_total},
                          {"backend", config.backend_spec},
                          {"k_window", config.k_window},
                          {"pool_capacity", config.pool_capacity},
                          {"seed", config.seed},
                          {"parallel", config.parallel},
                          {"max_steps", config.max_steps}}}};

  if (!config.parallel) {
    for (const auto& sc : suite) {
      auto outcome = detail::run_task(sc, config, suite_meta, *backend_impl, pool,
                                      /*defer_pool_updates=*/false);
      for (auto& e : outcome.events) run_log.events.push_back(std::move(e));
    }
  } else {
    std::vector<std::future<detail::TaskOutcome>> futures;
    std::vector<mentor::LessonPool> snapshots(suite.size(), pool);
    for (std::size_t i = 0; i < suite.size(); ++i) {
      futures.push_back(std::async(std::launch::async, [&, i] {
        return detail::run_task(suite[i], config, suite_meta, *backend_impl,
                                snapshots[i], /*defer_pool_updates=*/true);
      }));
    }
    std::vector<detail::TaskOutcome> outcomes;
    for (auto& f : futures) outcomes.push_back(f.get());
    for (auto& outcome : outcomes)
      for (auto& e : outcome.events) run_log.events.push_back(std::move(e));
    // Merge barrier: apply new lessons in suite order.
    for (const auto& outcome : outcomes) {
      for (const auto& p : outcome.pending) {
        mentor::Provenance prov;
        prov.kind = mentor::Provenance::Kind::MentorSummarized;
        prov.task_id = p.task_id;
        prov.trial_index = p.trial_index;
        auto result = pool.add(p.text, prov);
        run_log.events.push_back(
            json{{"kind", "pool-update"},
                 {"task", p.task_id},
                 {"trial", p.trial_index},
                 {"added", result.added},
                 {"lesson_id", result.lesson_id},
                 {"text", p.text},
                 {"evicted", result.evicted ? json(*result.evicted) : json(nullptr)},
                 {"size", pool.size()}});
      }
    }
  }

  memory::persist_run(run_log, (out_dir / "run.jsonl").string());
  pool.save((out_dir / "pool.jsonl").string());

  RunResult result;
  result.metrics = evaluation::compute_metrics(run_log);
  result.run_log = run_log;
  result.run_log_path = (out_dir / "run.jsonl").string();
  result.metrics_path = (out_dir / "metrics.json").string();
  write_reports(result.metrics, out_dir);
  return result;
}

inline RunResult run(const RunConfig& config) {
  auto backend_impl = make_backend(config);
  return run_with_backend(config, *backend_impl);
}

struct InjectResult {
  bool added = false;
  int lesson_id = 0;
};

// Appends a human lesson to a pool file, creating the file if needed.
// Duplicates (after normalization) are a no-op.
inline InjectResult inject_lesson(const std::string& pool_path, const std::string& text,
                                  int capacity = 50) {
  if (mentor::normalize_lesson(text).empty())
    throw ConfigError("lesson text must contain letters or digits");
  mentor::LessonPool pool(capacity);
  if (fs::exists(pool_path)) pool = mentor::LessonPool::load(pool_path, capacity);
  mentor::Provenance prov;
  prov.kind = mentor::Provenance::Kind::HumanInjected;
  auto result = pool.add(text, prov);
  if (result.added) pool.save(pool_path);
  return {result.added, result.lesson_id};
}

struct LoadedRun {
  std::string dir;
  json header;
  MetricsReport metrics;
};

inline LoadedRun load_run_dir(const std::string& dir) {
  auto run = memory::load_run((fs::path(dir) / "run.jsonl").string());
  LoadedRun loaded;
  loaded.dir = dir;
  loaded.header = run.header;
  loaded.metrics = evaluation::compute_metrics(run);
  return loaded;
}

namespace detail {

inline std::string pct(double ratio) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1) << ratio * 100.0;
  return out.str();
}

inline std::string cell(const std::string& text, std::size_t width) {
  std::string out = text;
  if (out.size() < width) out.append(width - out.size(), ' ');
  return out;
}

}  // namespace detail

// Side-by-side tables for one or more completed runs: per-type success rate
// in the fixed column order, then flexibility and efficiency.
inline std::string render_report(const std::vector<LoadedRun>& runs) {
  static const std::vector<std::string> kColumns = {"Put",     "Clean",   "Heat",
                                                    "Cool",    "Examine", "Put two"};
  std::ostringstream out;
  auto run_label = [](const LoadedRun& r) {
    std::string label = r.dir;
    if (r.header.contains("config"))
      label = r.header["config"].value("strategy", label);
    return label;
  };

  std::size_t name_width = 10;
  for (const auto& r : runs) name_width = std::max(name_width, run_label(r).size() + 2);

  out << "Success rate (%)\n";
  out << detail::cell("run", name_width);
  for (const auto& c : kColumns) out << detail::cell(c, 9);
  out << "| ALL\n";
  for (const auto& r : runs) {
    out << detail::cell(run_label(r), name_width);
    for (const auto& c : kColumns) {
      auto it = r.metrics.per_type.find(c);
      out << detail::cell(it == r.metrics.per_type.end() ? "-" : detail::pct(it->second.rate()),
                          9);
    }
    out << "| " << detail::pct(r.metrics.overall.rate()) << "\n";
  }

  out << "\nFlexibility and efficiency\n";
  out << detail::cell("run", name_width) << detail::cell("AVE(words)", 12)
      << detail::cell("STD(words)", 12) << detail::cell("Recall(%)", 11)
      << detail::cell("Precision(%)", 13) << "\n";
  for (const auto& r : runs) {
    auto opt_words = [](const std::optional<double>& v) {
      if (!v) return std::string("-");
      std::ostringstream o;
      o << std::fixed << std::setprecision(1) << *v;
      return o.str();
    };
    auto opt_pct = [](const std::optional<double>& v) {
      return v ? detail::pct(*v) : std::string("-");
    };
    out << detail::cell(run_label(r), name_width)
        << detail::cell(opt_words(r.metrics.flexibility_ave), 12)
        << detail::cell(opt_words(r.metrics.flexibility_std), 12)
        << detail::cell(opt_pct(r.metrics.recall_exp), 11)
        << detail::cell(opt_pct(r.metrics.precision_corr), 13) << "\n";
  }

  out << "\nEpisode curve (cumulative successes)\n";
  for (const auto& r : runs) {
    out << detail::cell(run_label(r), name_width);
    for (std::size_t i = 0; i < r.metrics.episode_curve.size(); ++i)
      out << (i ? " " : "") << "ep" << (i + 1) << "=" << r.metrics.episode_curve[i];
    out << "\n";
  }
  return out.str();
}

}  // namespace mentoract::harness
