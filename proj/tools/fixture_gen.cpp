// Builds the bundled replay fixtures by recording policy-driven sessions
// through the real harness flow, then replays each fixture and checks the
// targets it has to hit.

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mentoract/harness.hpp"

namespace fs = std::filesystem;
using namespace mentoract;

namespace {

class RecordingBackend : public backend::Backend {
 public:
  using Policy = std::function<std::string(const backend::CallContext&)>;
  explicit RecordingBackend(Policy policy) : policy_(std::move(policy)) {}

  const backend::Fixture& fixture() const { return fixture_; }

 protected:
  std::string do_complete(const backend::CallContext& ctx,
                          const std::vector<backend::ChatMessage>&) override {
    std::lock_guard<std::mutex> lock(mutex_);
    int index = next_[ctx.task_id]++;
    std::string response = policy_(ctx);
    fixture_.add({ctx.task_id, index, response});
    return response;
  }

 private:
  Policy policy_;
  backend::Fixture fixture_;
  std::map<std::string, int> next_;
  std::mutex mutex_;
};

// Repeats sentences from a bank until the word target is reached. Keeps the
// demo reflection texts plausible while pinning their lengths.
std::string prose(const std::vector<std::string>& bank, int target_words) {
  std::string out;
  int words = 0;
  std::size_t i = 0;
  while (words < target_words) {
    const std::string& s = bank[i % bank.size()];
    if (!out.empty()) out += ' ';
    out += s;
    words += mentor::word_count(s);
    ++i;
  }
  return out;
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  if (!out.empty()) out.pop_back();
  return out;
}

struct TaskInfo {
  textworld::Scenario scenario;
  std::vector<std::string> oracle;
  std::vector<std::string> prefix;  // correct opening kept in the failed trial
  bool in_depth_first = false;
  std::string target;
};

struct TaskState {
  int trial = 1;
  std::size_t pos = 0;
};

std::string lesson_for(textworld::TaskType type) {
  switch (type) {
    case textworld::TaskType::CleanPlace:
      return "Wash an item at the sinkbasin before placing it at its destination.";
    case textworld::TaskType::CoolPlace:
      return "Chill an item with the fridge before delivering it to the goal.";
    case textworld::TaskType::HeatPlace:
      return "Heat an item with the microwave before placing it at the goal.";
    case textworld::TaskType::PickPlace:
      return "Open a closed receptacle before trying to take an item from it.";
    case textworld::TaskType::ExamineInLight:
      return "Carry the item to the lamp and use the lamp to examine it.";
    case textworld::TaskType::PickTwoPlace:
      return "Deliver one item at a time; only one object can be carried.";
  }
  return "Check preconditions before acting.";
}

std::string experience_text(const TaskInfo& info) {
  std::vector<std::string> bank = {
      "The attempt made real progress before it drifted off course.",
      "The agent located the " + info.target + " and handled it correctly at first.",
      "The visit to the garbagecan 1 contributed nothing toward the goal.",
      "Examining items without acting on them advanced nothing.",
      "The opening steps below were effective and are worth keeping.",
  };
  std::vector<std::string> deep_bank = {
      "A careful read of the trajectory separates genuine progress from noise.",
      "The agent located the " + info.target +
          " and carried out the early manipulation steps exactly as the task requires.",
      "After that point the attempt wandered: the visit to the garbagecan 1 had no "
          "connection to the goal, and the pause to examine the " + info.target +
          " changed nothing about the world.",
      "Such detours are the classic signature of exploration that has lost its "
          "objective, and they cost steps the budget cannot spare.",
      "What deserves to survive into the next attempt is the disciplined opening: "
          "navigate to where the item actually is, deal with any container in the way, "
          "and secure the item before anything else.",
      "Every remaining step after the handoff point must be rebuilt from the goal "
          "statement rather than improvised.",
      "The block below lists the actions that genuinely advanced the task, in the "
          "order they were taken.",
  };
  const auto& chosen = info.in_depth_first ? deep_bank : bank;
  int target_words = info.in_depth_first ? 130 : 45;
  return prose(chosen, target_words) + "\n```actions\n" + join(info.prefix) + "\n```";
}

std::string plan_text(const TaskInfo& info) {
  std::vector<std::string> bank = {
      "The next attempt keeps the good opening and then finishes the job directly.",
      "No detours this time.",
  };
  std::vector<std::string> deep_bank = {
      "The corrected plan keeps the verified opening sequence and then completes the "
          "task in the shortest remaining order.",
      "Each manipulation is paired with the receptacle that enables it, and every "
          "carried item is delivered before the next one is picked up.",
      "The wasted visits from the failed attempt are removed entirely.",
      "Where a container is closed, it is opened before anything is taken from it or "
          "placed inside it.",
      "This ordering satisfies the goal with no spare motion.",
  };
  const auto& chosen = info.in_depth_first ? deep_bank : bank;
  int target_words = info.in_depth_first ? 90 : 20;
  return prose(chosen, target_words) + "\n" + join(info.oracle);
}

const char* kBaselineReflection =
    "The attempt failed because the agent wandered instead of committing to the "
    "goal. It visited locations that had no bearing on the task and gave up before "
    "recovering. The next attempt should restate the goal, identify the receptacle "
    "that holds the needed item, and move there directly. If a container is closed "
    "it must be opened before taking anything from it. Once the item is in hand the "
    "agent should perform whatever preparation the goal demands and then deliver "
    "the item to its destination without any side trips. The agent must also "
    "remember that it can only carry one object at a time, so each delivery has to "
    "be completed before the next pickup begins. Staying on this path keeps the "
    "step count low and leaves budget to recover from small mistakes. The same "
    "discipline applies to every room layout: find, prepare, deliver, verify. "
    "Finally, the agent should not give up while admissible actions remain, because "
    "an unfinished attempt scores nothing even when most of the work was already "
    "done correctly and only the last placement was missing.";

struct DemoBuilder {
  std::map<std::string, TaskInfo> tasks;
  std::vector<std::string> task_order;

  explicit DemoBuilder(const std::vector<textworld::Scenario>& suite) {
    scheduler::SuiteMeta meta;
    for (const auto& sc : suite)
      meta.max_complexity = std::max(meta.max_complexity, sc.num_obj + sc.num_inter);
    for (const auto& sc : suite) {
      TaskInfo info;
      info.scenario = sc;
      for (const auto& a : textworld::solve_reference(sc))
        info.oracle.push_back(textworld::render_action(a));
      std::size_t keep = std::max<std::size_t>(1, info.oracle.size() / 2);
      info.prefix.assign(info.oracle.begin(), info.oracle.begin() + keep);
      info.target = sc.goal.targets.front();
      scheduler::TaskMeta tm{sc.task_type, sc.num_obj, sc.num_inter};
      auto schedule =
          scheduler::allocate_episodes(scheduler::assess_difficulty(tm, meta), 5);
      info.in_depth_first = schedule.k1 == 0;
      tasks[sc.id] = std::move(info);
      task_order.push_back(sc.id);
    }
  }

  std::vector<std::string> failed_trial_lines(const TaskInfo& info) const {
    std::vector<std::string> lines;
    lines.push_back("think: I will start with the places most likely to hold the " +
                    info.target + ".");
    for (const auto& a : info.prefix) lines.push_back(a);
    lines.push_back("go to garbagecan 1");
    lines.push_back("examine " + info.target);
    lines.push_back("give up");
    return lines;
  }

  RecordingBackend::Policy fcrf_policy() {
    auto state = std::make_shared<std::map<std::string, TaskState>>();
    return [this, state](const backend::CallContext& ctx) -> std::string {
      const TaskInfo& info = tasks.at(ctx.task_id);
      TaskState& st = (*state)[ctx.task_id];
      switch (ctx.purpose) {
        case backend::CallPurpose::ActorStep: {
          auto lines = st.trial == 1 ? failed_trial_lines(info) : info.oracle;
          return lines.at(st.pos++);
        }
        case backend::CallPurpose::ExperienceSummary:
          st.trial = 2;
          st.pos = 0;
          return experience_text(info);
        case backend::CallPurpose::LessonExtraction:
          return "1";
        case backend::CallPurpose::PlanConstruction:
          return plan_text(info);
        case backend::CallPurpose::PoolMaintenance:
          return lesson_for(info.scenario.task_type);
        default:
          throw std::runtime_error("unexpected call purpose in fcrf demo");
      }
    };
  }

  RecordingBackend::Policy rr_policy(const std::set<std::string>& failing) {
    auto state = std::make_shared<std::map<std::string, TaskState>>();
    return [this, state, failing](const backend::CallContext& ctx) -> std::string {
      const TaskInfo& info = tasks.at(ctx.task_id);
      TaskState& st = (*state)[ctx.task_id];
      bool fails_forever = failing.count(ctx.task_id) > 0;
      switch (ctx.purpose) {
        case backend::CallPurpose::ActorStep: {
          std::vector<std::string> lines;
          if (fails_forever || st.trial == 1)
            lines = {"think: I will check the room quickly.", "go to garbagecan 1",
                     "give up"};
          else
            lines = info.oracle;
          return lines.at(st.pos++);
        }
        case backend::CallPurpose::BaselineReflection:
          ++st.trial;
          st.pos = 0;
          return kBaselineReflection;
        default:
          throw std::runtime_error("unexpected call purpose in rr demo");
      }
    };
  }
};

harness::RunConfig demo_config(const std::string& suite, harness::Strategy strategy,
                               const fs::path& out_dir) {
  harness::RunConfig config;
  config.suite_path = suite;
  config.strategy = strategy;
  config.ep_total = 5;
  config.k_window = 3;
  config.pool_capacity = 50;
  config.out_dir = out_dir.string();
  config.backend_spec = "recording";
  return config;
}

bool check(bool ok, const std::string& what) {
  std::cout << (ok ? "  ok: " : "  FAILED: ") << what << "\n";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate and verify the bundled replay fixtures"};
  std::string suite_path = "data/scenarios";
  std::string out_path = "data/fixtures";
  app.add_option("--suite", suite_path, "Scenario directory");
  app.add_option("--out", out_path, "Fixture output directory");
  CLI11_PARSE(app, argc, argv);

  try {
    auto suite = harness::load_suite(suite_path);
    DemoBuilder builder(suite);
    fs::create_directories(out_path);
    fs::path work = fs::temp_directory_path() / "mentoract-fixturegen";
    fs::remove_all(work);

    // Record the strategy sessions.
    {
      RecordingBackend rec(builder.fcrf_policy());
      harness::run_with_backend(
          demo_config(suite_path, harness::Strategy::Fcrf, work / "rec-fcrf"), rec);
      rec.fixture().save((fs::path(out_path) / "fcrf_demo.jsonl").string());
    }
    std::set<std::string> failing = {"clean_place_02", "heat_place_02", "pick_two_02"};
    {
      RecordingBackend rec(builder.rr_policy(failing));
      harness::run_with_backend(
          demo_config(suite_path, harness::Strategy::ReasoningReflection,
                      work / "rec-rr"),
          rec);
      rec.fixture().save(
          (fs::path(out_path) / "reasoning_reflection_demo.jsonl").string());
    }

    // Replay both and verify the properties the fixtures exist to provide.
    auto fcrf_cfg = demo_config(suite_path, harness::Strategy::Fcrf, work / "fcrf");
    fcrf_cfg.backend_spec =
        "scripted:" + (fs::path(out_path) / "fcrf_demo.jsonl").string();
    auto fcrf = harness::run(fcrf_cfg);

    auto rr_cfg = demo_config(suite_path, harness::Strategy::ReasoningReflection,
                              work / "rr");
    rr_cfg.backend_spec =
        "scripted:" + (fs::path(out_path) / "reasoning_reflection_demo.jsonl").string();
    auto rr = harness::run(rr_cfg);

    bool ok = true;
    std::cout << "fcrf_demo:\n";
    ok &= check(fcrf.metrics.overall.rate() == 1.0, "overall success rate 1.0");
    ok &= check(fcrf.metrics.recall_exp && *fcrf.metrics.recall_exp == 1.0,
                "experience recall 1.0");
    ok &= check(fcrf.metrics.precision_corr && *fcrf.metrics.precision_corr >= 0.9,
                "correction precision >= 0.9");
    bool within_budget = true;
    for (const auto& row : fcrf.metrics.rows)
      within_budget = within_budget && row.episodes_used <= 5;
    ok &= check(within_budget, "every task within 5 trials");
    std::cout << "reasoning_reflection_demo:\n";
    ok &= check(rr.metrics.overall.rate() <= 0.75, "overall success rate <= 0.75");
    ok &= check(rr.metrics.flexibility_std && fcrf.metrics.flexibility_std &&
                    *rr.metrics.flexibility_std < *fcrf.metrics.flexibility_std,
                "reflection-length std strictly below the fcrf run");
    std::cout << (ok ? "fixtures verified\n" : "fixture verification FAILED\n");
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
