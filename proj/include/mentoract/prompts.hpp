#pragma once

// Prompt templates and deterministic slot substitution. Every placeholder
// named in a template is a required slot; rendering is a pure function of
// (template id, slot values).

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mentoract/backend.hpp"

namespace mentoract::prompts {

using backend::ChatMessage;

class TemplateError : public std::runtime_error {
 public:
  explicit TemplateError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

struct Template {
  std::vector<ChatMessage> messages;  // content may contain {slot} placeholders
};

inline const char* kActorSystem =
    "You are a household agent working on one task. Reply with exactly one line "
    "each turn: either 'think: <your reasoning>', a single command, or 'give up'. "
    "Commands: go to <receptacle> | open <receptacle> | close <receptacle> | "
    "take <object> from <receptacle> | put <object> in/on <receptacle> | "
    "clean <object> with <receptacle> | heat <object> with <receptacle> | "
    "cool <object> with <receptacle> | use <receptacle> | examine <object>.";

inline const char* kMentorSystem =
    "You are a mentor reviewing a household agent's failed attempt and helping "
    "it do better on the next try.";

inline const std::map<std::string, Template>& registry() {
  static const std::map<std::string, Template> kTemplates = {
      {"actor_react",
       {{{"system", kActorSystem},
         {"user",
          "Task: {goal}\n{reflections}{suggested_plan}Interaction so far:\n"
          "{transcript}\nYour next line:"}}}},
      {"actor_oneshot",
       {{{"system", kActorSystem},
         {"user",
          "Task: {goal}\n{reflections}{suggested_plan}Initial observation: "
          "{observation}\nWrite the complete action sequence for this task, one "
          "command per line, with no commentary."}}}},
      {"experience_summary",
       {{{"system", kMentorSystem},
         {"user",
          "Task: {goal}\nFailed attempt:\n{trajectory}\nSummarize which parts of "
          "this attempt were genuinely useful progress toward the task. Then list "
          "the actions worth keeping, in order, inside a fenced block that starts "
          "with ```actions and ends with ```. Only list actions that appear in the "
          "attempt."}}}},
      {"lesson_pool_maintenance",
       {{{"system", kMentorSystem},
         {"user",
          "A task was first failed and then completed after reflection.\n"
          "Failed attempt:\n{failed}\nSuccessful attempt:\n{succeeded}\n"
          "State, in one imperative sentence, the single scenario-independent "
          "lesson that explains what the correction fixed."}}}},
      {"lesson_extraction",
       {{{"system", kMentorSystem},
         {"user",
          "Task: {goal}\nFailed attempt:\n{trajectory}\nKnown lessons:\n{pool}\n"
          "Answer with the number of the one lesson that best explains this "
          "failure."}}}},
      {"plan_construction",
       {{{"system", kMentorSystem},
         {"user",
          "Task: {goal}\nFailed attempt:\n{trajectory}\nValuable experience worth "
          "keeping:\n{experience}\n{lesson}Write an improved plan for the next "
          "attempt: briefly explain the fix, then give the full action sequence, "
          "one command per line."}}}},
      {"baseline_reflection",
       {{{"system", kMentorSystem},
         {"user",
          "Task: {goal}\nFailed attempt:\n{trajectory}\nWrite a reflection: "
          "diagnose why the attempt failed and describe how the next attempt "
          "should differ."}}}},
  };
  return kTemplates;
}

}  // namespace detail

// Substitutes {name} placeholders. A placeholder with no supplied slot is an
// error naming the slot; extra slots are ignored.
inline std::vector<ChatMessage> render_prompt(
    const std::string& template_id, const std::map<std::string, std::string>& slots) {
  const auto& reg = detail::registry();
  auto it = reg.find(template_id);
  if (it == reg.end()) throw TemplateError("unknown template '" + template_id + "'");

  std::vector<ChatMessage> out;
  for (const auto& msg : it->second.messages) {
    std::string content;
    const std::string& text = msg.content;
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto open = text.find('{', pos);
      if (open == std::string::npos) {
        content.append(text, pos, std::string::npos);
        break;
      }
      auto close = text.find('}', open + 1);
      if (close == std::string::npos) {
        content.append(text, pos, std::string::npos);
        break;
      }
      content.append(text, pos, open - pos);
      std::string name = text.substr(open + 1, close - open - 1);
      auto slot = slots.find(name);
      if (slot == slots.end())
        throw TemplateError("template '" + template_id + "': missing slot '" + name +
                            "'");
      content += slot->second;
      pos = close + 1;
    }
    out.push_back({msg.role, std::move(content)});
  }
  return out;
}

}  // namespace mentoract::prompts
