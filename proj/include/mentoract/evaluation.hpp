#pragma once

// Run metrics: success rate, reflection-length flexibility, experience
// recall, and correction precision. Correct/erroneous labels come from a
// longest-common-subsequence alignment against the reference solution.

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mentoract/memory.hpp"

namespace mentoract::evaluation {

using json = nlohmann::json;

enum class ActionLabel { Correct, Erroneous };

struct ActionAlignment {
  std::vector<ActionLabel> labels;  // one per action of the failed trajectory

  int correct() const {
    int n = 0;
    for (auto l : labels)
      if (l == ActionLabel::Correct) ++n;
    return n;
  }
  int erroneous() const { return static_cast<int>(labels.size()) - correct(); }
};

namespace detail {

inline std::vector<std::vector<int>> lcs_table(const std::vector<std::string>& a,
                                               const std::vector<std::string>& b) {
  // suffix lengths: t[i][j] = LCS of a[i:], b[j:]
  std::vector<std::vector<int>> t(a.size() + 1, std::vector<int>(b.size() + 1, 0));
  for (int i = static_cast<int>(a.size()) - 1; i >= 0; --i)
    for (int j = static_cast<int>(b.size()) - 1; j >= 0; --j)
      t[i][j] = a[i] == b[j] ? t[i + 1][j + 1] + 1
                             : std::max(t[i + 1][j], t[i][j + 1]);
  return t;
}

}  // namespace detail

inline int lcs_length(const std::vector<std::string>& a,
                      const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  return detail::lcs_table(a, b)[0][0];
}

// LCS members (exact string equality) are Correct, the rest Erroneous. Ties
// resolve toward the earliest reference match, so labeling is deterministic.
inline ActionAlignment classify_actions(const std::vector<std::string>& failed,
                                        const std::vector<std::string>& reference) {
  if (reference.empty())
    throw std::invalid_argument("classify_actions: empty reference solution");
  ActionAlignment out;
  out.labels.assign(failed.size(), ActionLabel::Erroneous);
  if (failed.empty()) return out;
  auto table = detail::lcs_table(failed, reference);
  std::size_t i = 0, j = 0;
  while (i < failed.size() && j < reference.size()) {
    if (failed[i] == reference[j] && table[i][j] == table[i + 1][j + 1] + 1) {
      out.labels[i] = ActionLabel::Correct;
      ++i;
      ++j;
    } else if (table[i + 1][j] >= table[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

// Fraction of the failed trial's correct actions that reappear, in order, in
// the constructed plan. Undefined (nullopt) when no action was correct.
inline std::optional<double> experience_recall(const std::vector<std::string>& plan,
                                               const ActionAlignment& alignment,
                                               const std::vector<std::string>& failed) {
  std::vector<std::string> correct_seq;
  for (std::size_t i = 0; i < failed.size(); ++i)
    if (alignment.labels[i] == ActionLabel::Correct) correct_seq.push_back(failed[i]);
  if (correct_seq.empty()) return std::nullopt;
  int retained = lcs_length(correct_seq, plan);
  return static_cast<double>(retained) / static_cast<double>(correct_seq.size());
}

// Fraction of the failed trial's erroneous actions that the plan drops
// entirely. Undefined when nothing was erroneous.
inline std::optional<double> correction_precision(
    const std::vector<std::string>& plan, const ActionAlignment& alignment,
    const std::vector<std::string>& failed) {
  std::set<std::string> in_plan(plan.begin(), plan.end());
  int total = 0, corrected = 0;
  for (std::size_t i = 0; i < failed.size(); ++i) {
    if (alignment.labels[i] != ActionLabel::Erroneous) continue;
    ++total;
    if (!in_plan.count(failed[i])) ++corrected;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(corrected) / static_cast<double>(total);
}

// Mean and population standard deviation of reflection word counts.
inline std::pair<double, double> flexibility_stats(const std::vector<int>& word_counts) {
  if (word_counts.empty())
    throw std::invalid_argument("flexibility_stats: empty word-count list");
  double mean = 0.0;
  for (int w : word_counts) mean += w;
  mean /= static_cast<double>(word_counts.size());
  double var = 0.0;
  for (int w : word_counts) var += (w - mean) * (w - mean);
  var /= static_cast<double>(word_counts.size());
  return {mean, std::sqrt(var)};
}

struct TypeRate {
  int successes = 0;
  int total = 0;
  double rate() const { return total == 0 ? 0.0 : static_cast<double>(successes) / total; }
};

struct TaskRow {
  std::string task_id;
  std::string type_label;
  int episodes_used = 0;
  bool success = false;
  std::optional<double> recall;
  std::optional<double> precision;
  std::vector<int> reflection_words;
};

struct MetricsReport {
  std::map<std::string, TypeRate> per_type;  // keyed by report column label
  TypeRate overall;
  std::optional<double> flexibility_ave;
  std::optional<double> flexibility_std;
  std::optional<double> recall_exp;
  std::optional<double> precision_corr;
  std::vector<int> episode_curve;  // cumulative successes by trial index
  int reflection_count = 0;
  std::vector<TaskRow> rows;       // per-task detail, suite order

  json to_json() const {
    json per;
    for (const auto& [label, rate] : per_type)
      per[label] = {{"successes", rate.successes},
                    {"total", rate.total},
                    {"rate", rate.rate()}};
    auto opt = [](const std::optional<double>& v) {
      return v ? json(*v) : json(nullptr);
    };
    return json{{"overall",
                 {{"successes", overall.successes},
                  {"total", overall.total},
                  {"rate", overall.rate()}}},
                {"per_type", per},
                {"flexibility_ave", opt(flexibility_ave)},
                {"flexibility_std", opt(flexibility_std)},
                {"recall_exp", opt(recall_exp)},
                {"precision_corr", opt(precision_corr)},
                {"episode_curve", episode_curve},
                {"reflection_count", reflection_count}};
  }
};

// Aggregates one completed run trace. Recall/precision average over the
// (failed trial, constructed plan) pairs where each metric is defined; runs
// whose reflections carry no plan (the fixed-template baseline) report them
// as absent.
inline MetricsReport compute_metrics(const memory::RunLog& run) {
  struct TaskData {
    std::string type_label;
    std::vector<std::string> reference;
    std::map<int, std::vector<std::string>> trial_actions;
    std::map<int, bool> trial_success;
    std::map<int, std::vector<std::string>> plans;  // reflections with actions
    std::vector<int> reflection_words;
    int order = 0;
  };
  std::map<std::string, TaskData> tasks;
  int order = 0;

  for (const auto& e : run.events) {
    const std::string kind = e.value("kind", "");
    if (kind.empty()) continue;
    const std::string task = e.value("task", "");
    if (kind == "task-begin") {
      auto& t = tasks[task];
      t.order = order++;
      auto type = textworld::task_type_from_name(e.value("task_type", ""));
      t.type_label = type ? textworld::task_type_label(*type) : "?";
      t.reference = e.value("reference", std::vector<std::string>{});
    } else if (kind == "trajectory-step") {
      if (e.value("step", "") == "action")
        tasks[task].trial_actions[e.value("trial", 0)].push_back(e.value("text", ""));
    } else if (kind == "trajectory-commit") {
      tasks[task].trial_success[e.value("trial", 0)] =
          e.value("terminal", "") == "success";
    } else if (kind == "reflection") {
      auto& t = tasks[task];
      t.reflection_words.push_back(e.value("word_count", 0));
      std::vector<std::string> plan_actions;
      if (e.contains("plan"))
        plan_actions = e["plan"].value("actions", std::vector<std::string>{});
      if (!plan_actions.empty())
        t.plans[e.value("trial", 0)] = std::move(plan_actions);
    }
  }

  MetricsReport report;
  int ep_total = 0;
  if (run.header.contains("config"))
    ep_total = run.header["config"].value("episodes", 0);

  std::vector<int> all_words;
  std::vector<double> recalls, precisions;
  std::vector<const TaskData*> ordered;
  std::vector<std::string> ids;
  for (const auto& [id, t] : tasks) {
    ordered.push_back(&t);
    ids.push_back(id);
  }
  // suite order, as traced
  std::vector<std::size_t> idx(ordered.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return ordered[a]->order < ordered[b]->order; });

  int max_trials = 0;
  for (auto i : idx) {
    const TaskData& t = *ordered[i];
    TaskRow row;
    row.task_id = ids[i];
    row.type_label = t.type_label;
    row.episodes_used = static_cast<int>(t.trial_success.size());
    max_trials = std::max(max_trials, row.episodes_used);
    for (const auto& [trial, ok] : t.trial_success) row.success = row.success || ok;
    row.reflection_words = t.reflection_words;

    std::vector<double> task_recalls, task_precisions;
    if (!t.reference.empty()) {
      for (const auto& [trial, plan] : t.plans) {
        auto actions_it = t.trial_actions.find(trial);
        std::vector<std::string> failed = actions_it == t.trial_actions.end()
                                              ? std::vector<std::string>{}
                                              : actions_it->second;
        auto alignment = classify_actions(failed, t.reference);
        if (auto r = experience_recall(plan, alignment, failed)) {
          task_recalls.push_back(*r);
          recalls.push_back(*r);
        }
        if (auto p = correction_precision(plan, alignment, failed)) {
          task_precisions.push_back(*p);
          precisions.push_back(*p);
        }
      }
    }
    auto mean = [](const std::vector<double>& v) -> std::optional<double> {
      if (v.empty()) return std::nullopt;
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    row.recall = mean(task_recalls);
    row.precision = mean(task_precisions);

    auto& type_rate = report.per_type[t.type_label];
    ++type_rate.total;
    ++report.overall.total;
    if (row.success) {
      ++type_rate.successes;
      ++report.overall.successes;
    }
    for (int w : t.reflection_words) all_words.push_back(w);
    report.rows.push_back(std::move(row));
  }

  if (ep_total <= 0) ep_total = max_trials;
  report.episode_curve.assign(std::max(ep_total, 0), 0);
  for (auto i : idx) {
    const TaskData& t = *ordered[i];
    for (const auto& [trial, ok] : t.trial_success) {
      if (!ok) continue;
      for (int e = trial; e <= static_cast<int>(report.episode_curve.size()); ++e)
        ++report.episode_curve[e - 1];
      break;
    }
  }

  report.reflection_count = static_cast<int>(all_words.size());
  if (!all_words.empty()) {
    auto [ave, sd] = flexibility_stats(all_words);
    report.flexibility_ave = ave;
    report.flexibility_std = sd;
  }
  auto aggregate = [](const std::vector<double>& v) -> std::optional<double> {
    if (v.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  report.recall_exp = aggregate(recalls);
  report.precision_corr = aggregate(precisions);
  return report;
}

}  // namespace mentoract::evaluation
