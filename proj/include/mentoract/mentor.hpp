#pragma once

// Mentor side of the reflection loop: valuable-experience summaries, the
// cross-task lesson pool, and constructive plan synthesis.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mentoract/actor.hpp"
#include "mentoract/backend.hpp"
#include "mentoract/prompts.hpp"
#include "mentoract/scheduler.hpp"

namespace mentoract::mentor {

using actor::Trajectory;
using backend::Backend;
using backend::CallContext;
using backend::CallPurpose;
using json = nlohmann::json;

struct Experience {
  std::string summary;                        // full summarizer output
  std::vector<std::string> retained_actions;  // subset of the trajectory's actions
};

struct Provenance {
  enum class Kind { MentorSummarized, HumanInjected };
  Kind kind = Kind::MentorSummarized;
  std::string task_id;  // empty for human-injected lessons
  int trial_index = 0;
};

struct Lesson {
  int id = 0;
  std::string text;
  Provenance provenance;
  int reference_count = 0;
};

inline int word_count(const std::string& text) {
  std::istringstream in(text);
  std::string token;
  int n = 0;
  while (in >> token) ++n;
  return n;
}

// Case-folded, punctuation-stripped, whitespace-collapsed key for dedup.
inline std::string normalize_lesson(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      if (pending_space && !out.empty()) out += ' ';
      pending_space = false;
      out += static_cast<char>(std::tolower(c));
    } else if (std::isspace(c)) {
      pending_space = true;
    }
  }
  return out;
}

class LessonPool {
 public:
  explicit LessonPool(int capacity = 50) : capacity_(capacity) {}

  struct AddResult {
    bool added = false;
    int lesson_id = 0;            // id of the new or already-present lesson
    std::optional<int> evicted;   // id removed to make room
  };

  AddResult add(const std::string& text, Provenance provenance) {
    std::string key = normalize_lesson(text);
    if (key.empty()) return {false, 0, std::nullopt};
    for (const auto& l : lessons_)
      if (normalize_lesson(l.text) == key) return {false, l.id, std::nullopt};
    AddResult result;
    if (static_cast<int>(lessons_.size()) >= capacity_) result.evicted = evict();
    Lesson lesson;
    lesson.id = next_id_++;
    lesson.text = text;
    lesson.provenance = std::move(provenance);
    lessons_.push_back(std::move(lesson));
    result.added = true;
    result.lesson_id = lessons_.back().id;
    return result;
  }

  const std::vector<Lesson>& lessons() const { return lessons_; }
  bool empty() const { return lessons_.empty(); }
  int size() const { return static_cast<int>(lessons_.size()); }
  int capacity() const { return capacity_; }

  Lesson& at(int index) { return lessons_.at(index); }

  std::string numbered_text() const {
    std::string out;
    for (std::size_t i = 0; i < lessons_.size(); ++i)
      out += std::to_string(i + 1) + ". " + lessons_[i].text + "\n";
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write lesson pool: " + path);
    for (const auto& l : lessons_) out << lesson_to_json(l).dump() << "\n";
  }

  static LessonPool load(const std::string& path, int capacity = 50) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open lesson pool: " + path);
    LessonPool pool(capacity);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        Lesson l = lesson_from_json(json::parse(line));
        pool.next_id_ = std::max(pool.next_id_, l.id + 1);
        pool.lessons_.push_back(std::move(l));
      } catch (const json::exception& e) {
        throw std::runtime_error("lesson pool " + path + " line " +
                                 std::to_string(line_no) + ": " + e.what());
      }
    }
    return pool;
  }

  static json lesson_to_json(const Lesson& l) {
    json prov;
    if (l.provenance.kind == Provenance::Kind::HumanInjected) {
      prov = {{"kind", "human_injected"}};
    } else {
      prov = {{"kind", "mentor_summarized"},
              {"task", l.provenance.task_id},
              {"trial", l.provenance.trial_index}};
    }
    return {{"id", l.id},
            {"text", l.text},
            {"provenance", prov},
            {"reference_count", l.reference_count}};
  }

  static Lesson lesson_from_json(const json& doc) {
    Lesson l;
    l.id = doc.at("id").get<int>();
    l.text = doc.at("text").get<std::string>();
    l.reference_count = doc.at("reference_count").get<int>();
    const auto& prov = doc.at("provenance");
    if (prov.at("kind").get<std::string>() == "human_injected") {
      l.provenance.kind = Provenance::Kind::HumanInjected;
    } else {
      l.provenance.kind = Provenance::Kind::MentorSummarized;
      l.provenance.task_id = prov.value("task", "");
      l.provenance.trial_index = prov.value("trial", 0);
    }
    return l;
  }

 private:
  // Oldest reference-count-0 lesson goes first; failing that, oldest overall.
  int evict() {
    auto victim = lessons_.end();
    for (auto it = lessons_.begin(); it != lessons_.end(); ++it) {
      if (it->reference_count == 0) {
        victim = it;
        break;
      }
    }
    if (victim == lessons_.end()) victim = lessons_.begin();
    int id = victim->id;
    lessons_.erase(victim);
    return id;
  }

  int capacity_;
  int next_id_ = 1;
  std::vector<Lesson> lessons_;
};

struct ConstructedPlan {
  std::vector<std::string> actions;  // canonical grammar strings
  std::string rationale;
};

struct ReflectionRecord {
  std::string task_id;
  int trial_index = 0;
  scheduler::Intensity intensity = scheduler::Intensity::Simple;
  Experience experience;
  std::optional<Lesson> lesson;
  ConstructedPlan plan;
  std::string full_text;
  int word_count = 0;
};

class ConstructionError : public std::runtime_error {
 public:
  ConstructionError(const std::string& what, ReflectionRecord partial_record)
      : std::runtime_error(what), partial(std::move(partial_record)) {}
  ReflectionRecord partial;  // experience/lesson/full_text without a plan
};

namespace detail {

// First fenced block in the summary; lines inside are candidate actions.
inline std::vector<std::string> parse_fenced_actions(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string raw;
  bool inside = false;
  while (std::getline(in, raw)) {
    std::string line = actor::detail::trim(raw);
    if (line.rfind("```", 0) == 0) {
      if (inside) break;
      inside = true;
      continue;
    }
    if (inside && !line.empty()) lines.push_back(line);
  }
  return lines;
}

inline std::optional<int> single_integer(const std::string& text) {
  std::vector<int> found;
  for (std::size_t i = 0; i < text.size();) {
    if (std::isdigit(static_cast<unsigned char>(text[i]))) {
      std::size_t j = i;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      found.push_back(std::stoi(text.substr(i, j - i)));
      i = j;
    } else {
      ++i;
    }
  }
  if (found.size() != 1) return std::nullopt;
  return found.front();
}

}  // namespace detail

// Summarizes the effective part of a failed trajectory. Retained actions are
// validated against the trajectory; anything else is dropped with a warning.
inline Experience summarize_experience(const std::string& goal, const Trajectory& traj,
                                       Backend& backend) {
  auto messages = prompts::render_prompt(
      "experience_summary",
      {{"goal", goal}, {"trajectory", actor::render_trajectory(traj)}});
  Experience exp;
  exp.summary = backend.complete({traj.task_id, CallPurpose::ExperienceSummary},
                                 messages);
  auto present = traj.action_strings();
  std::set<std::string> known(present.begin(), present.end());
  for (const auto& line : detail::parse_fenced_actions(exp.summary)) {
    if (known.count(line)) {
      exp.retained_actions.push_back(line);
    } else {
      std::cerr << "warning: task " << traj.task_id << " trial " << traj.trial_index
                << ": retained action not in trajectory, dropped: " << line << "\n";
    }
  }
  return exp;
}

struct PoolUpdate {
  std::string task_id;
  int trial_index = 0;
  bool added = false;
  int lesson_id = 0;
  std::string text;
  std::optional<int> evicted;
};

// The one-sentence scenario-universal lesson for a corrected pair.
// Best-effort: a backend failure yields nullopt with a warning.
inline std::optional<std::string> summarize_correction_lesson(
    const Trajectory& failed, const Trajectory& succeeded, Backend& backend) {
  try {
    auto messages = prompts::render_prompt(
        "lesson_pool_maintenance",
        {{"failed", actor::render_trajectory(failed)},
         {"succeeded", actor::render_trajectory(succeeded)}});
    return actor::detail::trim(
        backend.complete({succeeded.task_id, CallPurpose::PoolMaintenance}, messages));
  } catch (const backend::BackendError& e) {
    std::cerr << "warning: lesson pool maintenance skipped for task "
              << succeeded.task_id << ": " << e.what() << "\n";
    return std::nullopt;
  }
}

// One lesson per corrected (failed, succeeded) pair, appended after dedup.
inline std::vector<PoolUpdate> maintain_lesson_pool(
    const std::vector<std::pair<Trajectory, Trajectory>>& corrected, LessonPool& pool,
    Backend& backend) {
  std::vector<PoolUpdate> updates;
  for (const auto& [failed, succeeded] : corrected) {
    auto text = summarize_correction_lesson(failed, succeeded, backend);
    if (!text) continue;
    Provenance prov;
    prov.kind = Provenance::Kind::MentorSummarized;
    prov.task_id = succeeded.task_id;
    prov.trial_index = succeeded.trial_index;
    auto result = pool.add(*text, prov);
    updates.push_back({succeeded.task_id, succeeded.trial_index, result.added,
                       result.lesson_id, *text, result.evicted});
  }
  return updates;
}

// Picks the single pool lesson that best fits the failure. The response must
// name exactly one in-range index; one re-prompt is allowed, then none.
inline std::optional<Lesson> extract_lesson(const std::string& goal,
                                            const Trajectory& traj, LessonPool& pool,
                                            Backend& backend) {
  if (pool.empty()) return std::nullopt;
  auto messages = prompts::render_prompt("lesson_extraction",
                                         {{"goal", goal},
                                          {"trajectory", actor::render_trajectory(traj)},
                                          {"pool", pool.numbered_text()}});
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string text =
        backend.complete({traj.task_id, CallPurpose::LessonExtraction}, messages);
    auto index = detail::single_integer(text);
    if (index && *index >= 1 && *index <= pool.size()) {
      Lesson& chosen = pool.at(*index - 1);
      ++chosen.reference_count;
      return chosen;
    }
    messages.push_back({"assistant", text});
    messages.push_back({"user", "Answer with a single number between 1 and " +
                                    std::to_string(pool.size()) + "."});
  }
  return std::nullopt;
}

// Merges experience and lesson into an executable plan. Grammar lines become
// the action sequence; everything else is kept as rationale.
inline ConstructedPlan construct_plan_from_text(const std::string& text) {
  ConstructedPlan plan;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    std::string line = actor::detail::trim(raw);
    if (line.empty()) continue;
    auto parsed = actor::parse_action_lines(line);
    if (parsed.size() == 1)
      plan.actions.push_back(textworld::render_action(parsed.front()));
    else
      plan.rationale += line + "\n";
  }
  return plan;
}

inline std::string construct_plan_response(const std::string& goal,
                                           const Trajectory& traj,
                                           const Experience& experience,
                                           const std::optional<Lesson>& lesson,
                                           Backend& backend) {
  std::string lesson_block;
  if (lesson) lesson_block = "Relevant lesson:\n" + lesson->text + "\n\n";
  auto messages = prompts::render_prompt(
      "plan_construction",
      {{"goal", goal},
       {"trajectory", actor::render_trajectory(traj)},
       {"experience", experience.summary.empty() ? "(none)" : experience.summary},
       {"lesson", lesson_block}});
  return backend.complete({traj.task_id, CallPurpose::PlanConstruction}, messages);
}

// Errors when no line of the response parses as an action; the caller falls
// back to reflection-text-only injection.
inline ConstructedPlan construct_plan(const std::string& goal, const Trajectory& traj,
                                      const Experience& experience,
                                      const std::optional<Lesson>& lesson,
                                      Backend& backend) {
  std::string response = construct_plan_response(goal, traj, experience, lesson, backend);
  ConstructedPlan plan = construct_plan_from_text(response);
  if (plan.actions.empty()) {
    ReflectionRecord partial;
    partial.task_id = traj.task_id;
    partial.trial_index = traj.trial_index;
    partial.experience = experience;
    partial.lesson = lesson;
    partial.plan.rationale = plan.rationale;
    partial.full_text = response;
    partial.word_count = word_count(response);
    throw ConstructionError("plan construction produced no parseable action for task " +
                                traj.task_id + " trial " +
                                std::to_string(traj.trial_index),
                            partial);
  }
  return plan;
}

struct ReflectOptions {
  bool use_experience = true;  // off for the w/o-Experience ablation
  bool use_lesson = true;      // off for the w/o-Lesson ablation
};

// Full reflection for one failed trial. Simple: experience + construction.
// InDepth: experience + lesson extraction + construction. A construction
// response with no parseable action raises ConstructionError carrying the
// partial record, so callers can fall back to text-only injection.
inline ReflectionRecord reflect(scheduler::Intensity intensity, const std::string& goal,
                                const Trajectory& traj, LessonPool& pool,
                                Backend& backend, ReflectOptions options = {}) {
  ReflectionRecord record;
  record.task_id = traj.task_id;
  record.trial_index = traj.trial_index;
  record.intensity = intensity;

  if (options.use_experience)
    record.experience = summarize_experience(goal, traj, backend);
  if (intensity == scheduler::Intensity::InDepth && options.use_lesson)
    record.lesson = extract_lesson(goal, traj, pool, backend);

  std::string response =
      construct_plan_response(goal, traj, record.experience, record.lesson, backend);
  record.plan = construct_plan_from_text(response);

  std::string full = record.experience.summary;
  if (record.lesson) {
    if (!full.empty()) full += "\n\n";
    full += record.lesson->text;
  }
  if (!full.empty()) full += "\n\n";
  full += response;
  record.full_text = std::move(full);
  record.word_count = word_count(record.full_text);

  if (record.plan.actions.empty()) {
    ConstructedPlan empty;
    empty.rationale = record.plan.rationale;
    record.plan = std::move(empty);
    throw ConstructionError("plan construction produced no parseable action for task " +
                                traj.task_id + " trial " +
                                std::to_string(traj.trial_index),
                            record);
  }
  return record;
}

}  // namespace mentoract::mentor
