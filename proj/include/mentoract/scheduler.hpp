#pragma once

// Difficulty-driven split of a task's trial budget between simple and
// in-depth reflection.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mentoract/textworld.hpp"

namespace mentoract::scheduler {

class ScheduleError : public std::runtime_error {
 public:
  explicit ScheduleError(const std::string& what) : std::runtime_error(what) {}
};

struct TaskMeta {
  textworld::TaskType task_type = textworld::TaskType::PickPlace;
  int num_obj = 1;
  int num_inter = 1;

  int complexity() const { return num_obj + num_inter; }
};

struct SuiteMeta {
  int max_complexity = 0;
};

enum class Intensity { Simple, InDepth };

inline const char* intensity_name(Intensity i) {
  return i == Intensity::Simple ? "simple" : "in_depth";
}

struct EpisodeSchedule {
  int ep_total = 0;
  int k1 = 0;  // simple-reflection trials, scheduled first
  int k2 = 0;  // in-depth trials
  double difficulty = 0.0;
};

// Difficulty of one task relative to the hardest task in the suite, in (0, 1].
// The task type enters only through num_obj and num_inter.
inline double assess_difficulty(const TaskMeta& task, const SuiteMeta& suite) {
  if (suite.max_complexity <= 0)
    throw ScheduleError("suite max_complexity must be positive");
  if (task.complexity() > suite.max_complexity)
    throw ScheduleError("task complexity exceeds suite max_complexity");
  return static_cast<double>(task.complexity()) / suite.max_complexity;
}

inline int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

// k2 = clamp(round_half_up(ep_total * difficulty), 1, ep_total). The lower
// clamp guarantees at least one in-depth attempt within the budget.
inline EpisodeSchedule allocate_episodes(double difficulty, int ep_total) {
  if (ep_total < 1) throw ScheduleError("ep_total must be >= 1");
  if (!(difficulty > 0.0) || difficulty > 1.0)
    throw ScheduleError("difficulty must lie in (0, 1]");
  EpisodeSchedule s;
  s.ep_total = ep_total;
  s.difficulty = difficulty;
  s.k2 = std::clamp(round_half_up(ep_total * difficulty), 1, ep_total);
  s.k1 = ep_total - s.k2;
  return s;
}

// Simple reflection for the first k1 failures, in-depth afterwards.
inline Intensity intensity_for_episode(const EpisodeSchedule& schedule,
                                       int failure_index) {
  if (failure_index < 1 || failure_index > schedule.ep_total)
    throw ScheduleError("failure_index out of range");
  return failure_index <= schedule.k1 ? Intensity::Simple : Intensity::InDepth;
}

}  // namespace mentoract::scheduler
