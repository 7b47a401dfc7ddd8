#pragma once

// One planning trial: ReAct-style interleaved thought/action against the
// text world, or a one-shot plan executed sequentially.

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mentoract/backend.hpp"
#include "mentoract/prompts.hpp"
#include "mentoract/textworld.hpp"

namespace mentoract::actor {

using backend::Backend;
using backend::CallContext;
using backend::CallPurpose;
using textworld::Action;
using textworld::Scenario;

enum class StepKind { Thought, ActionStep };

struct TrialStep {
  StepKind kind = StepKind::Thought;
  std::string text;         // thought content, or the canonical action string
  std::string observation;  // empty for thoughts
};

enum class FailureReason { None, StepLimit, GaveUp, BackendError };

inline const char* failure_reason_name(FailureReason r) {
  switch (r) {
    case FailureReason::None: return "none";
    case FailureReason::StepLimit: return "step_limit";
    case FailureReason::GaveUp: return "gave_up";
    case FailureReason::BackendError: return "backend_error";
  }
  return "?";
}

struct Trajectory {
  std::string task_id;
  int trial_index = 1;
  std::vector<TrialStep> steps;
  bool success = false;
  FailureReason failure = FailureReason::None;
  std::string failure_detail;
  int action_count = 0;

  std::vector<std::string> action_strings() const {
    std::vector<std::string> out;
    for (const auto& s : steps)
      if (s.kind == StepKind::ActionStep) out.push_back(s.text);
    return out;
  }
};

struct PlanContext {
  std::string goal;
  std::string current_observation;
  std::vector<std::string> reflections;       // at most the window k, oldest first
  std::optional<std::string> injected_plan;   // constructed plan, one action per line
};

enum class ActorMode { ReAct, OneShot };

struct ParsedOutput {
  enum class Kind { Thought, Act, GiveUp, Unparseable };
  Kind kind = Kind::Unparseable;
  std::string thought;
  Action action;
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline bool strip_prefix(std::string* text, const std::string& prefix) {
  if (lowercase(text->substr(0, prefix.size())) != prefix) return false;
  *text = trim(text->substr(prefix.size()));
  return true;
}

}  // namespace detail

// Lines prefixed "think:" are thoughts; grammar lines (with or without an
// "action:" prefix) are actions; the literal "give up" ends the trial.
inline ParsedOutput parse_actor_output(const std::string& text) {
  ParsedOutput out;
  std::string line = detail::trim(text);
  if (detail::lowercase(line) == "give up") {
    out.kind = ParsedOutput::Kind::GiveUp;
    return out;
  }
  std::string body = line;
  if (detail::strip_prefix(&body, "think:")) {
    out.kind = ParsedOutput::Kind::Thought;
    out.thought = body;
    return out;
  }
  detail::strip_prefix(&body, "action:");
  if (auto action = textworld::parse_action(detail::lowercase(body))) {
    out.kind = ParsedOutput::Kind::Act;
    out.action = *action;
    return out;
  }
  return out;
}

// Grammar lines from free-form plan text, tolerating bullets and an optional
// "action:" prefix. Anything else is skipped.
inline std::vector<Action> parse_action_lines(const std::string& text) {
  std::vector<Action> actions;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    std::string line = detail::trim(raw);
    if (line.empty()) continue;
    while (!line.empty() && (line.front() == '-' || line.front() == '*'))
      line = detail::trim(line.substr(1));
    detail::strip_prefix(&line, "action:");
    if (auto action = textworld::parse_action(detail::lowercase(line)))
      actions.push_back(*action);
  }
  return actions;
}

inline std::string render_trajectory(const Trajectory& traj) {
  if (traj.steps.empty()) return "(no steps taken)";
  std::string out;
  for (const auto& s : traj.steps) {
    if (s.kind == StepKind::Thought)
      out += "> think: " + s.text + "\nOK.\n";
    else
      out += "> " + s.text + "\n" + s.observation + "\n";
  }
  out.pop_back();
  return out;
}

namespace detail {

inline std::string reflections_block(const std::vector<std::string>& reflections) {
  if (reflections.empty()) return "";
  std::string out = "Reflections on earlier failed attempts:\n";
  for (std::size_t i = 0; i < reflections.size(); ++i)
    out += "Reflection " + std::to_string(i + 1) + ":\n" + reflections[i] + "\n";
  return out + "\n";
}

inline std::string plan_block(const std::optional<std::string>& plan) {
  if (!plan) return "";
  return "Suggested plan from your mentor:\n" + *plan + "\n\n";
}

}  // namespace detail

inline Trajectory run_trial(const Scenario& scenario, const PlanContext& context,
                            Backend& backend, ActorMode mode, int max_steps,
                            const std::string& task_id, int trial_index) {
  Trajectory traj;
  traj.task_id = task_id;
  traj.trial_index = trial_index;

  auto [state, initial_obs] = textworld::reset(scenario);
  std::string goal = context.goal.empty() ? textworld::goal_text(scenario) : context.goal;
  std::string reflections = detail::reflections_block(context.reflections);
  std::string plan = detail::plan_block(context.injected_plan);

  auto fail = [&](FailureReason reason, std::string detail_text = "") {
    traj.failure = reason;
    traj.failure_detail = std::move(detail_text);
    return traj;
  };

  if (mode == ActorMode::OneShot) {
    std::string text;
    try {
      auto messages = prompts::render_prompt("actor_oneshot",
                                             {{"goal", goal},
                                              {"reflections", reflections},
                                              {"suggested_plan", plan},
                                              {"observation", initial_obs}});
      text = backend.complete({task_id, CallPurpose::ActorPlan}, messages);
    } catch (const backend::BackendError& e) {
      return fail(FailureReason::BackendError, e.what());
    }
    for (const auto& action : parse_action_lines(text)) {
      if (traj.action_count >= max_steps) break;
      auto [next, out] = textworld::step(state, scenario, action);
      state = std::move(next);
      traj.steps.push_back({StepKind::ActionStep, textworld::render_action(action),
                            out.observation});
      ++traj.action_count;
      if (out.success) {
        traj.success = true;
        return traj;
      }
    }
    return fail(FailureReason::StepLimit);
  }

  std::string transcript = initial_obs + "\n";
  int thoughts = 0;
  while (true) {
    std::string text;
    try {
      auto messages = prompts::render_prompt("actor_react",
                                             {{"goal", goal},
                                              {"reflections", reflections},
                                              {"suggested_plan", plan},
                                              {"transcript", transcript}});
      text = backend.complete({task_id, CallPurpose::ActorStep}, messages);
      auto parsed = parse_actor_output(text);
      if (parsed.kind == ParsedOutput::Kind::Unparseable) {
        // One re-prompt with a format reminder; then fall back to a no-op
        // thought recorded verbatim.
        messages.push_back({"assistant", text.empty() ? "(empty reply)" : text});
        messages.push_back({"user",
                            "That line could not be parsed. Reply with exactly one "
                            "line: 'think: ...', a single command, or 'give up'."});
        text = backend.complete({task_id, CallPurpose::ActorStep}, messages);
        parsed = parse_actor_output(text);
        if (parsed.kind == ParsedOutput::Kind::Unparseable) {
          parsed.kind = ParsedOutput::Kind::Thought;
          parsed.thought = text;
        }
      }
      switch (parsed.kind) {
        case ParsedOutput::Kind::GiveUp:
          return fail(FailureReason::GaveUp);
        case ParsedOutput::Kind::Thought:
          traj.steps.push_back({StepKind::Thought, parsed.thought, ""});
          transcript += "> think: " + parsed.thought + "\nOK.\n";
          ++thoughts;
          break;
        case ParsedOutput::Kind::Act: {
          auto [next, out] = textworld::step(state, scenario, parsed.action);
          state = std::move(next);
          std::string rendered = textworld::render_action(parsed.action);
          traj.steps.push_back({StepKind::ActionStep, rendered, out.observation});
          transcript += "> " + rendered + "\n" + out.observation + "\n";
          ++traj.action_count;
          if (out.success) {
            traj.success = true;
            return traj;
          }
          break;
        }
        case ParsedOutput::Kind::Unparseable:
          break;  // unreachable
      }
    } catch (const backend::BackendError& e) {
      return fail(FailureReason::BackendError, e.what());
    }
    if (traj.action_count >= max_steps || thoughts >= max_steps)
      return fail(FailureReason::StepLimit);
  }
}

}  // namespace mentoract::actor
