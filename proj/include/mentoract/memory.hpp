#pragma once

// Short-term trajectory store, long-term reflection store, and run trace
// persistence. One TaskMemory per task; the trace is JSON Lines, one event
// per line, so runs diff and replay cleanly.

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mentoract/actor.hpp"
#include "mentoract/mentor.hpp"

namespace mentoract::memory {

using actor::Trajectory;
using json = nlohmann::json;
using mentor::ReflectionRecord;

class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

class TraceError : public std::runtime_error {
 public:
  explicit TraceError(const std::string& what) : std::runtime_error(what) {}
};

inline json trajectory_step_event(const std::string& task, int trial,
                                  const actor::TrialStep& step) {
  json e{{"kind", "trajectory-step"},
         {"task", task},
         {"trial", trial},
         {"step", step.kind == actor::StepKind::Thought ? "thought" : "action"},
         {"text", step.text}};
  if (step.kind == actor::StepKind::ActionStep) e["observation"] = step.observation;
  return e;
}

inline json trajectory_commit_event(const Trajectory& traj) {
  json e{{"kind", "trajectory-commit"},
         {"task", traj.task_id},
         {"trial", traj.trial_index},
         {"terminal", traj.success ? "success" : "failure"},
         {"action_count", traj.action_count}};
  if (!traj.success) e["reason"] = actor::failure_reason_name(traj.failure);
  if (!traj.failure_detail.empty()) e["detail"] = traj.failure_detail;
  return e;
}

inline json reflection_event(const ReflectionRecord& r) {
  json lesson = nullptr;
  if (r.lesson) lesson = mentor::LessonPool::lesson_to_json(*r.lesson);
  return json{{"kind", "reflection"},
              {"task", r.task_id},
              {"trial", r.trial_index},
              {"intensity", scheduler::intensity_name(r.intensity)},
              {"experience",
               {{"summary", r.experience.summary},
                {"retained", r.experience.retained_actions}}},
              {"lesson", lesson},
              {"plan", {{"actions", r.plan.actions}, {"rationale", r.plan.rationale}}},
              {"full_text", r.full_text},
              {"word_count", r.word_count}};
}

// Per-task memory: the in-flight trial slot, committed trajectories, the
// append-only reflection list, and this task's slice of the run trace.
class TaskMemory {
 public:
  explicit TaskMemory(std::string task_id) : task_id_(std::move(task_id)) {}

  const std::string& task_id() const { return task_id_; }

  void begin_trial(int trial_index) {
    if (open_trial_)
      throw UsageError("begin_trial: trial " + std::to_string(open_index_) +
                       " of task '" + task_id_ + "' is still uncommitted");
    if (trial_index != last_committed_ + 1)
      throw UsageError("begin_trial: expected trial " +
                       std::to_string(last_committed_ + 1) + " for task '" + task_id_ +
                       "', got " + std::to_string(trial_index));
    open_trial_ = true;
    open_index_ = trial_index;
  }

  void commit_trajectory(const Trajectory& traj) {
    if (!open_trial_) throw UsageError("commit_trajectory without begin_trial");
    if (traj.trial_index != open_index_ || traj.task_id != task_id_)
      throw UsageError("commit_trajectory: trajectory does not match the open trial");
    for (const auto& step : traj.steps)
      events_.push_back(trajectory_step_event(task_id_, traj.trial_index, step));
    events_.push_back(trajectory_commit_event(traj));
    committed_.push_back(traj);
    last_committed_ = open_index_;
    open_trial_ = false;
  }

  void append_reflection(const ReflectionRecord& record) {
    for (const auto& r : reflections_)
      if (r.trial_index == record.trial_index)
        throw UsageError("append_reflection: duplicate trial " +
                         std::to_string(record.trial_index) + " for task '" +
                         task_id_ + "'");
    reflections_.push_back(record);
    events_.push_back(reflection_event(record));
  }

  // At most the k most recent reflection texts, oldest first.
  std::vector<std::string> recent_reflections(int k) const {
    std::vector<std::string> out;
    if (k <= 0) return out;
    std::size_t start =
        reflections_.size() > static_cast<std::size_t>(k) ? reflections_.size() - k : 0;
    for (std::size_t i = start; i < reflections_.size(); ++i)
      out.push_back(reflections_[i].full_text);
    return out;
  }

  void log_event(json event) { events_.push_back(std::move(event)); }

  const std::vector<Trajectory>& committed() const { return committed_; }
  const std::vector<ReflectionRecord>& reflections() const { return reflections_; }
  const std::vector<json>& events() const { return events_; }
  bool trial_open() const { return open_trial_; }
  int last_committed() const { return last_committed_; }

 private:
  std::string task_id_;
  bool open_trial_ = false;
  int open_index_ = 0;
  int last_committed_ = 0;
  std::vector<Trajectory> committed_;
  std::vector<ReflectionRecord> reflections_;
  std::vector<json> events_;
};

struct RunLog {
  json header;  // first line of the trace
  std::vector<json> events;

  bool operator==(const RunLog& other) const {
    return header == other.header && events == other.events;
  }
};

inline void persist_run(const RunLog& run, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError("cannot write run log: " + path);
  out << run.header.dump() << "\n";
  for (const auto& e : run.events) out << e.dump() << "\n";
}

inline RunLog load_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open run log: " + path);
  RunLog run;
  std::string line;
  int line_no = 0;
  std::string last_valid = "none";
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty())
      throw TraceError("run log " + path + " line " + std::to_string(line_no) +
                       ": empty line (last valid event: " + last_valid + ")");
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw TraceError("run log " + path + " line " + std::to_string(line_no) + ": " +
                       e.what() + " (last valid event: " + last_valid + ")");
    }
    if (line_no == 1) {
      run.header = std::move(doc);
      last_valid = "header";
    } else {
      last_valid = doc.value("kind", "?") + " at line " + std::to_string(line_no);
      run.events.push_back(std::move(doc));
    }
  }
  if (line_no == 0) throw TraceError("run log " + path + " is empty");
  return run;
}

}  // namespace mentoract::memory
