#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "mentoract/harness.hpp"

using namespace mentoract;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string data_path(const std::string& rel) {
  return std::string(MENTORACT_DATA_DIR) + "/" + rel;
}

std::string fresh_dir(const std::string& name) {
  fs::path dir = fs::path(testing::TempDir()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

harness::RunConfig base_config(harness::Strategy strategy, const std::string& out,
                               const std::string& fixture) {
  harness::RunConfig config;
  config.suite_path = data_path("scenarios");
  config.strategy = strategy;
  config.backend_spec = "scripted:" + fixture;
  config.out_dir = out;
  return config;
}

int count_events(const memory::RunLog& run, const std::string& kind) {
  int n = 0;
  for (const auto& e : run.events)
    if (e.value("kind", "") == kind) ++n;
  return n;
}

std::string fixture_per_task(const std::string& name,
                             const std::function<std::vector<std::string>(
                                 const textworld::Scenario&)>& responses) {
  backend::Fixture fx;
  for (const auto& sc : harness::load_suite(data_path("scenarios"))) {
    auto lines = responses(sc);
    for (std::size_t i = 0; i < lines.size(); ++i)
      fx.add({sc.id, static_cast<int>(i), lines[i]});
  }
  auto path = (fs::path(testing::TempDir()) / name).string();
  fx.save(path);
  return path;
}

int occurrences(const std::string& text, const std::string& needle) {
  int n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size()))
    ++n;
  return n;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(MENTORACT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Run, FcrfDemoHitsItsTargets) {
  auto result = harness::run(base_config(harness::Strategy::Fcrf, fresh_dir("fcrf-t"),
                                         data_path("fixtures/fcrf_demo.jsonl")));
  EXPECT_DOUBLE_EQ(result.metrics.overall.rate(), 1.0);
  ASSERT_TRUE(result.metrics.recall_exp.has_value());
  EXPECT_DOUBLE_EQ(*result.metrics.recall_exp, 1.0);
  ASSERT_TRUE(result.metrics.precision_corr.has_value());
  EXPECT_GE(*result.metrics.precision_corr, 0.9);
  for (const auto& row : result.metrics.rows) EXPECT_LE(row.episodes_used, 5);
}

TEST(Run, PlanningOnlyRecordsNoReflections) {
  auto fixture = fixture_per_task("planning_wrong.jsonl", [](const auto&) {
    return std::vector<std::string>{"go to garbagecan 1"};
  });
  auto config = base_config(harness::Strategy::PlanningOnly,
                            fresh_dir("planning-t"), fixture);
  config.ep_total = 1;
  auto result = harness::run(config);
  EXPECT_DOUBLE_EQ(result.metrics.overall.rate(), 0.0);
  EXPECT_EQ(count_events(result.run_log, "reflection"), 0);
  EXPECT_EQ(count_events(result.run_log, "schedule"), 0);
  EXPECT_EQ(result.metrics.reflection_count, 0);

  // without reflections the flexibility/efficiency row renders as absent
  harness::LoadedRun loaded;
  loaded.dir = config.out_dir;
  loaded.header = result.run_log.header;
  loaded.metrics = result.metrics;
  auto table = harness::render_report({loaded});
  EXPECT_NE(table.find("-"), std::string::npos);
  EXPECT_FALSE(result.metrics.flexibility_ave.has_value());
}

TEST(Run, ReasoningOnlyRecordsNoReflections) {
  auto fixture = fixture_per_task("reasoning_giveup.jsonl", [](const auto&) {
    return std::vector<std::string>{"give up"};
  });
  auto config = base_config(harness::Strategy::ReasoningOnly,
                            fresh_dir("reasoning-t"), fixture);
  config.ep_total = 1;
  auto result = harness::run(config);
  EXPECT_EQ(count_events(result.run_log, "reflection"), 0);
  EXPECT_DOUBLE_EQ(result.metrics.overall.rate(), 0.0);
}

TEST(Run, ReasoningReflectionReflectsOncePerFailedTrial) {
  auto result = harness::run(
      base_config(harness::Strategy::ReasoningReflection, fresh_dir("rr-t"),
                  data_path("fixtures/reasoning_reflection_demo.jsonl")));
  EXPECT_DOUBLE_EQ(result.metrics.overall.rate(), 0.75);

  int failed_commits = 0;
  for (const auto& e : result.run_log.events)
    if (e.value("kind", "") == "trajectory-commit" &&
        e.value("terminal", "") == "failure")
      ++failed_commits;
  EXPECT_EQ(count_events(result.run_log, "reflection"), failed_commits);
  EXPECT_GT(failed_commits, 0);
}

// In sequential mode the trace must show the pool evolving task by task:
// sizes consistent with the update stream, and every extracted lesson
// already present before it is used.
TEST(Run, SequentialPoolEvolutionIsAuditable) {
  auto result = harness::run(base_config(harness::Strategy::Fcrf,
                                         fresh_dir("fcrf-audit"),
                                         data_path("fixtures/fcrf_demo.jsonl")));
  int model_size = 0;
  std::set<std::string> added_texts;
  for (const auto& e : result.run_log.events) {
    auto kind = e.value("kind", "");
    if (kind == "pool-update") {
      if (e.value("added", false)) ++model_size;
      if (!e.at("evicted").is_null()) --model_size;
      EXPECT_EQ(e.value("size", -1), model_size);
      added_texts.insert(e.value("text", ""));
    } else if (kind == "reflection" && !e.at("lesson").is_null()) {
      EXPECT_TRUE(added_texts.count(e.at("lesson").value("text", "")))
          << "lesson used before any prior task added it";
    }
  }
  EXPECT_GT(count_events(result.run_log, "pool-update"), 0);
}

TEST(Run, RerunsAreByteIdentical) {
  auto out1 = fresh_dir("det-1");
  auto out2 = fresh_dir("det-2");
  auto r1 = harness::run(base_config(harness::Strategy::Fcrf, out1,
                                     data_path("fixtures/fcrf_demo.jsonl")));
  auto r2 = harness::run(base_config(harness::Strategy::Fcrf, out2,
                                     data_path("fixtures/fcrf_demo.jsonl")));
  EXPECT_TRUE(r1.run_log == r2.run_log);
  auto a = file_bytes(out1 + "/run.jsonl");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, file_bytes(out2 + "/run.jsonl"));
  EXPECT_EQ(file_bytes(out1 + "/metrics.json"), file_bytes(out2 + "/metrics.json"));
}

TEST(Run, InjectedLessonIsExtractableInTheNextRun) {
  auto pool_path = (fs::path(testing::TempDir()) / "inject_pool.jsonl").string();
  fs::remove(pool_path);
  EXPECT_THROW(harness::inject_lesson(pool_path, "  !!! "), harness::ConfigError);
  auto first = harness::inject_lesson(pool_path, "Always check the armchair first.");
  EXPECT_TRUE(first.added);
  auto dup = harness::inject_lesson(pool_path, "always check the armchair first");
  EXPECT_FALSE(dup.added);

  auto sc = textworld::load_scenario(data_path("scenarios/pick_place_02.json"));
  std::vector<std::string> oracle;
  for (const auto& a : textworld::solve_reference(sc))
    oracle.push_back(textworld::render_action(a));

  backend::Fixture fx;
  int i = 0;
  fx.add({sc.id, i++, "give up"});
  fx.add({sc.id, i++, "Nothing in that attempt helped."});
  fx.add({sc.id, i++, "1"});
  fx.add({sc.id, i++, "Head straight for the goal.\n" + oracle[0] + "\n" + oracle[1] +
                          "\n" + oracle[2] + "\n" + oracle[3]});
  for (const auto& line : oracle) fx.add({sc.id, i++, line});
  fx.add({sc.id, i++, "Commit to the goal instead of giving up."});
  auto fixture_path = (fs::path(testing::TempDir()) / "inject_run.jsonl").string();
  fx.save(fixture_path);

  harness::RunConfig config;
  config.suite_path = data_path("scenarios/pick_place_02.json");
  config.strategy = harness::Strategy::Fcrf;
  config.backend_spec = "scripted:" + fixture_path;
  config.out_dir = fresh_dir("inject-run");
  config.pool_path = pool_path;
  auto result = harness::run(config);

  EXPECT_DOUBLE_EQ(result.metrics.overall.rate(), 1.0);
  bool used_injected = false;
  for (const auto& e : result.run_log.events) {
    if (e.value("kind", "") == "reflection" && !e.at("lesson").is_null())
      used_injected =
          e.at("lesson").value("text", "") == "Always check the armchair first.";
  }
  EXPECT_TRUE(used_injected);

  auto final_pool = mentor::LessonPool::load(config.out_dir + "/pool.jsonl");
  ASSERT_EQ(final_pool.size(), 2);
  EXPECT_EQ(final_pool.at(0).reference_count, 1);  // the injected lesson was used
}

TEST(Run, BackendUnderrunMarksTaskFailedAndContinues) {
  auto fixture = fixture_per_task("underrun.jsonl", [](const textworld::Scenario& sc) {
    if (sc.id == "pick_two_02") return std::vector<std::string>{};  // no entries
    std::string plan;
    for (const auto& a : textworld::solve_reference(sc))
      plan += textworld::render_action(a) + "\n";
    return std::vector<std::string>{plan};
  });
  auto config = base_config(harness::Strategy::PlanningOnly,
                            fresh_dir("underrun-t"), fixture);
  config.ep_total = 1;
  auto result = harness::run(config);
  EXPECT_EQ(result.metrics.overall.total, 12);
  EXPECT_EQ(result.metrics.overall.successes, 11);
  EXPECT_EQ(count_events(result.run_log, "task-error"), 1);

  bool backend_failure_commit = false;
  for (const auto& e : result.run_log.events)
    if (e.value("kind", "") == "trajectory-commit" &&
        e.value("task", "") == "pick_two_02")
      backend_failure_commit = e.value("reason", "") == "backend_error";
  EXPECT_TRUE(backend_failure_commit);
}

namespace {

// Per-task scripts for a full-suite mentor run whose trials always go
// fail/reflect/succeed. With an empty starting pool and snapshot isolation no
// extraction call ever happens, which keeps the scripts valid in parallel
// mode too.
std::vector<std::string> mentor_task_script(const textworld::Scenario& sc,
                                            bool with_experience) {
  std::vector<std::string> lines;
  lines.push_back("give up");
  if (with_experience) lines.push_back("The attempt ended before anything useful.");
  std::string plan = "Go straight at the goal this time.";
  for (const auto& a : textworld::solve_reference(sc))
    plan += "\n" + textworld::render_action(a);
  lines.push_back(plan);
  for (const auto& a : textworld::solve_reference(sc))
    lines.push_back(textworld::render_action(a));
  lines.push_back("unique lesson for " + sc.id);
  return lines;
}

}  // namespace

TEST(Run, AblationStrategiesSkipTheirModule) {
  auto no_exp_fixture = fixture_per_task(
      "ablation_noexp.jsonl",
      [](const textworld::Scenario& sc) { return mentor_task_script(sc, false); });
  backend::ScriptedBackend no_exp(backend::Fixture::load(no_exp_fixture));
  auto config = base_config(harness::Strategy::FcrfNoExperience,
                            fresh_dir("ablation-noexp"), "unused");
  config.parallel = true;  // snapshot pools stay empty, so no extraction calls
  auto result = harness::run_with_backend(config, no_exp);
  EXPECT_DOUBLE_EQ(result.metrics.overall.rate(), 1.0);
  for (const auto& call : no_exp.call_log())
    EXPECT_NE(call.purpose, backend::CallPurpose::ExperienceSummary);
  for (const auto& e : result.run_log.events) {
    if (e.value("kind", "") == "reflection") {
      EXPECT_TRUE(e.at("experience").at("summary").get<std::string>().empty());
    }
  }

  auto no_lesson_fixture = fixture_per_task(
      "ablation_nolesson.jsonl",
      [](const textworld::Scenario& sc) { return mentor_task_script(sc, true); });
  backend::ScriptedBackend no_lesson(backend::Fixture::load(no_lesson_fixture));
  auto config2 = base_config(harness::Strategy::FcrfNoLesson,
                             fresh_dir("ablation-nolesson"), "unused");
  auto result2 = harness::run_with_backend(config2, no_lesson);
  EXPECT_DOUBLE_EQ(result2.metrics.overall.rate(), 1.0);
  for (const auto& call : no_lesson.call_log())
    EXPECT_NE(call.purpose, backend::CallPurpose::LessonExtraction);
  for (const auto& e : result2.run_log.events) {
    if (e.value("kind", "") == "reflection") {
      EXPECT_TRUE(e.at("lesson").is_null());
    }
  }
}

TEST(Run, ParallelFcrfMergesLessonsAtTheBarrier) {
  auto fixture = fixture_per_task(
      "parallel_fcrf.jsonl",
      [](const textworld::Scenario& sc) { return mentor_task_script(sc, true); });
  auto make = [&](const std::string& name) {
    auto config = base_config(harness::Strategy::Fcrf, fresh_dir(name), fixture);
    config.parallel = true;
    return config;
  };
  auto r1 = harness::run(make("par-fcrf-1"));
  EXPECT_DOUBLE_EQ(r1.metrics.overall.rate(), 1.0);

  // all 12 distinct lessons land in the final pool, applied in suite order
  auto pool = mentor::LessonPool::load(
      (fs::path(testing::TempDir()) / "par-fcrf-1" / "pool.jsonl").string());
  EXPECT_EQ(pool.size(), 12);

  // pool updates happen only at the merge barrier, after every task event
  bool seen_pool_update = false;
  for (const auto& e : r1.run_log.events) {
    auto kind = e.value("kind", "");
    if (kind == "pool-update") seen_pool_update = true;
    if (seen_pool_update) {
      EXPECT_EQ(kind, "pool-update");
    }
  }
  EXPECT_TRUE(seen_pool_update);

  auto r2 = harness::run(make("par-fcrf-2"));
  EXPECT_TRUE(r1.run_log == r2.run_log);
}

TEST(Run, ParallelModeIsDeterministicForPoolFreeStrategies) {
  auto make = [&](const std::string& name) {
    auto config = base_config(harness::Strategy::ReasoningReflection, fresh_dir(name),
                              data_path("fixtures/reasoning_reflection_demo.jsonl"));
    config.parallel = true;
    return config;
  };
  auto r1 = harness::run(make("par-1"));
  auto r2 = harness::run(make("par-2"));
  EXPECT_TRUE(r1.run_log == r2.run_log);
  EXPECT_DOUBLE_EQ(r1.metrics.overall.rate(), 0.75);

  auto sequential = harness::run(
      base_config(harness::Strategy::ReasoningReflection, fresh_dir("par-seq"),
                  data_path("fixtures/reasoning_reflection_demo.jsonl")));
  EXPECT_EQ(r1.metrics.to_json(), sequential.metrics.to_json());
}

TEST(Run, HeaderRecordsTheConfiguration) {
  auto config = base_config(harness::Strategy::Fcrf, fresh_dir("header-t"),
                            data_path("fixtures/fcrf_demo.jsonl"));
  config.seed = 42;
  auto result = harness::run(config);
  const auto& c = result.run_log.header.at("config");
  EXPECT_EQ(c.at("seed"), 42);
  EXPECT_EQ(c.at("strategy"), "fcrf");
  EXPECT_EQ(c.at("episodes"), 5);
}

// The actor prompt may embed at most k reflections plus one suggested plan.
TEST(Run, PromptWindowDisciplineHolds) {
  backend::ScriptedBackend scripted(
      backend::Fixture::load(data_path("fixtures/reasoning_reflection_demo.jsonl")));
  auto config = base_config(harness::Strategy::ReasoningReflection,
                            fresh_dir("window-t"), "unused");
  config.k_window = 3;
  harness::run_with_backend(config, scripted);

  int max_reflections = 0;
  for (const auto& call : scripted.call_log()) {
    if (call.purpose != backend::CallPurpose::ActorStep) continue;
    const auto& prompt = call.messages.back().content;
    max_reflections = std::max(max_reflections, occurrences(prompt, "Reflection "));
    EXPECT_LE(occurrences(prompt, "Reflection "), 3);
    EXPECT_LE(occurrences(prompt, "Suggested plan from your mentor:"), 1);
  }
  EXPECT_EQ(max_reflections, 3);  // the window actually clips at k
}

TEST(Run, LongTaskTypesHaveDeepOracles) {
  std::map<textworld::TaskType, std::size_t> deepest;
  for (const auto& sc : harness::load_suite(data_path("scenarios"))) {
    auto n = textworld::solve_reference(sc).size();
    deepest[sc.task_type] = std::max(deepest[sc.task_type], n);
  }
  EXPECT_GT(deepest[textworld::TaskType::HeatPlace], 10u);
  EXPECT_GT(deepest[textworld::TaskType::CoolPlace], 10u);
  EXPECT_GT(deepest[textworld::TaskType::CleanPlace], 10u);
  EXPECT_GT(deepest[textworld::TaskType::PickTwoPlace], 10u);
}

TEST(Report, RendersSideBySideAndErrorsOnBrokenTraces) {
  auto out1 = fresh_dir("rep-1");
  auto out2 = fresh_dir("rep-2");
  harness::run(base_config(harness::Strategy::Fcrf, out1,
                           data_path("fixtures/fcrf_demo.jsonl")));
  harness::run(base_config(harness::Strategy::ReasoningReflection, out2,
                           data_path("fixtures/reasoning_reflection_demo.jsonl")));

  auto text = harness::render_report(
      {harness::load_run_dir(out1), harness::load_run_dir(out2)});
  EXPECT_NE(text.find("Put two"), std::string::npos);
  EXPECT_NE(text.find("fcrf"), std::string::npos);
  EXPECT_NE(text.find("reasoning-reflection"), std::string::npos);

  EXPECT_TRUE(fs::exists(fs::path(out1) / "per_task.csv"));
  EXPECT_TRUE(fs::exists(fs::path(out1) / "episode_curve.csv"));
  std::ifstream csv(fs::path(out1) / "per_task.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "task,type,episodes_used,success,recall,precision,reflection_words");

  auto broken = fresh_dir("rep-broken");
  {
    std::ofstream out(fs::path(broken) / "run.jsonl");
    out << json{{"kind", "header"}}.dump() << "\n";
    out << json{{"kind", "task-begin"}, {"task", "x"}}.dump() << "\n";
    out << "{\"kind\": \"trunc";
  }
  try {
    harness::load_run_dir(broken);
    FAIL() << "expected TraceError";
  } catch (const memory::TraceError& e) {
    EXPECT_NE(std::string(e.what()).find("last valid event"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("task-begin"), std::string::npos);
  }
}

TEST(Cli, EndToEndSubcommands) {
  auto out = fresh_dir("cli-out");
  int rc = run_cli("run --suite " + data_path("scenarios") +
                   " --strategy fcrf --backend scripted:" +
                   data_path("fixtures/fcrf_demo.jsonl") + " --out " + out);
  EXPECT_EQ(rc, 0);
  EXPECT_TRUE(fs::exists(fs::path(out) / "run.jsonl"));
  EXPECT_TRUE(fs::exists(fs::path(out) / "metrics.json"));
  EXPECT_TRUE(fs::exists(fs::path(out) / "pool.jsonl"));

  EXPECT_EQ(run_cli("report " + out), 0);
  EXPECT_EQ(run_cli("report " + out + " " + out), 0);

  auto pool = (fs::path(testing::TempDir()) / "cli_pool.jsonl").string();
  fs::remove(pool);
  EXPECT_EQ(run_cli("inject-lesson --pool " + pool +
                    " --text \"open the fridge before taking food\""),
            0);
  EXPECT_EQ(run_cli("inject-lesson --pool " + pool +
                    " --text \"open the fridge before taking food\""),
            0);  // duplicate is a no-op notice, still success
  EXPECT_TRUE(fs::exists(pool));

  // configuration errors exit nonzero
  EXPECT_NE(run_cli("run --suite " + data_path("scenarios") +
                    " --strategy not-a-strategy --backend scripted:x --out " + out),
            0);
  EXPECT_NE(run_cli("report /no/such/dir"), 0);
  EXPECT_NE(run_cli("run --suite /no/such/suite --strategy fcrf --backend "
                    "scripted:/no/such/fixture --out " +
                    out),
            0);
}
