#pragma once

// Deterministic household text world: scenarios, state transitions, an
// action grammar, and a breadth-first reference-solution solver.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

namespace mentoract::textworld {

using json = nlohmann::json;

class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

enum class TaskType {
  PickPlace,
  ExamineInLight,
  CleanPlace,
  HeatPlace,
  CoolPlace,
  PickTwoPlace,
};

enum class Appliance { None, Clean, Heat, Cool, Light };

// Object property flags, kept as a bitmask so states stay cheap to encode.
enum Prop : std::uint8_t {
  kClean = 1u << 0,
  kHeated = 1u << 1,
  kCooled = 1u << 2,
  kExaminedUnderLight = 1u << 3,
};

struct Receptacle {
  std::string name;
  bool openable = false;
  Appliance appliance = Appliance::None;
};

struct ObjectSpec {
  std::string name;
  std::string location;
  std::uint8_t props = 0;
};

struct GoalSpec {
  std::vector<std::string> targets;
  std::string receptacle;  // goal receptacle, or the lamp for examine tasks
};

struct Scenario {
  std::string id;
  TaskType task_type = TaskType::PickPlace;
  std::vector<Receptacle> receptacles;
  std::vector<ObjectSpec> objects;
  GoalSpec goal;
  int num_obj = 0;
  int num_inter = 0;

  const Receptacle* find_receptacle(const std::string& name) const {
    for (const auto& r : receptacles)
      if (r.name == name) return &r;
    return nullptr;
  }
};

inline const char* task_type_name(TaskType t) {
  switch (t) {
    case TaskType::PickPlace: return "pick_place";
    case TaskType::ExamineInLight: return "examine_in_light";
    case TaskType::CleanPlace: return "clean_place";
    case TaskType::HeatPlace: return "heat_place";
    case TaskType::CoolPlace: return "cool_place";
    case TaskType::PickTwoPlace: return "pick_two_place";
  }
  return "unknown";
}

// Column label used by the report tables.
inline const char* task_type_label(TaskType t) {
  switch (t) {
    case TaskType::PickPlace: return "Put";
    case TaskType::ExamineInLight: return "Examine";
    case TaskType::CleanPlace: return "Clean";
    case TaskType::HeatPlace: return "Heat";
    case TaskType::CoolPlace: return "Cool";
    case TaskType::PickTwoPlace: return "Put two";
  }
  return "?";
}

inline std::optional<TaskType> task_type_from_name(const std::string& s) {
  static const std::map<std::string, TaskType> kNames = {
      {"pick_place", TaskType::PickPlace},
      {"examine_in_light", TaskType::ExamineInLight},
      {"clean_place", TaskType::CleanPlace},
      {"heat_place", TaskType::HeatPlace},
      {"cool_place", TaskType::CoolPlace},
      {"pick_two_place", TaskType::PickTwoPlace},
  };
  auto it = kNames.find(s);
  if (it == kNames.end()) return std::nullopt;
  return it->second;
}

enum class Verb { Go, Open, Close, Take, Put, Clean, Heat, Cool, Use, Examine };

struct Action {
  Verb verb = Verb::Go;
  std::string arg1;
  std::string arg2;  // empty for single-argument verbs

  bool operator==(const Action& other) const = default;
};

// Canonical lowercase grammar, one line per action.
inline std::string render_action(const Action& a) {
  switch (a.verb) {
    case Verb::Go: return "go to " + a.arg1;
    case Verb::Open: return "open " + a.arg1;
    case Verb::Close: return "close " + a.arg1;
    case Verb::Take: return "take " + a.arg1 + " from " + a.arg2;
    case Verb::Put: return "put " + a.arg1 + " in/on " + a.arg2;
    case Verb::Clean: return "clean " + a.arg1 + " with " + a.arg2;
    case Verb::Heat: return "heat " + a.arg1 + " with " + a.arg2;
    case Verb::Cool: return "cool " + a.arg1 + " with " + a.arg2;
    case Verb::Use: return "use " + a.arg1;
    case Verb::Examine: return "examine " + a.arg1;
  }
  return "";
}

namespace detail {

inline bool split_once(const std::string& text, const std::string& sep,
                       std::string* left, std::string* right) {
  auto pos = text.find(sep);
  if (pos == std::string::npos) return false;
  *left = text.substr(0, pos);
  *right = text.substr(pos + sep.size());
  return !left->empty() && !right->empty();
}

}  // namespace detail

// Parses one canonical grammar line. Returns nullopt for anything else.
inline std::optional<Action> parse_action(const std::string& line) {
  auto starts = [&](const char* prefix) {
    return line.rfind(prefix, 0) == 0 && line.size() > std::strlen(prefix);
  };
  std::string a, b;
  if (starts("go to ")) return Action{Verb::Go, line.substr(6), ""};
  if (starts("open ")) return Action{Verb::Open, line.substr(5), ""};
  if (starts("close ")) return Action{Verb::Close, line.substr(6), ""};
  if (starts("take ") && detail::split_once(line.substr(5), " from ", &a, &b))
    return Action{Verb::Take, a, b};
  if (starts("put ") && detail::split_once(line.substr(4), " in/on ", &a, &b))
    return Action{Verb::Put, a, b};
  if (starts("clean ") && detail::split_once(line.substr(6), " with ", &a, &b))
    return Action{Verb::Clean, a, b};
  if (starts("heat ") && detail::split_once(line.substr(5), " with ", &a, &b))
    return Action{Verb::Heat, a, b};
  if (starts("cool ") && detail::split_once(line.substr(5), " with ", &a, &b))
    return Action{Verb::Cool, a, b};
  if (starts("use ")) return Action{Verb::Use, line.substr(4), ""};
  if (starts("examine ")) return Action{Verb::Examine, line.substr(8), ""};
  return std::nullopt;
}

constexpr const char* kInventory = "inventory";
constexpr const char* kStart = "start";
constexpr const char* kNothingHappens = "Nothing happens.";

struct WorldState {
  std::map<std::string, std::string> object_location;  // object -> receptacle or "inventory"
  std::map<std::string, bool> receptacle_open;         // openable receptacles only
  std::map<std::string, std::uint8_t> object_props;
  std::string agent_at = kStart;
  int steps_taken = 0;

  bool operator==(const WorldState& other) const {
    return object_location == other.object_location &&
           receptacle_open == other.receptacle_open &&
           object_props == other.object_props && agent_at == other.agent_at;
  }

  std::optional<std::string> held_object() const {
    for (const auto& [obj, loc] : object_location)
      if (loc == kInventory) return obj;
    return std::nullopt;
  }
};

struct StepOutcome {
  std::string observation;
  bool state_changed = false;
  bool done = false;
  bool success = false;
};

inline std::string goal_text(const Scenario& sc) {
  const auto& g = sc.goal;
  auto adjective = [&]() -> std::string {
    switch (sc.task_type) {
      case TaskType::CleanPlace: return "clean ";
      case TaskType::HeatPlace: return "hot ";
      case TaskType::CoolPlace: return "cool ";
      default: return "";
    }
  }();
  if (sc.task_type == TaskType::ExamineInLight)
    return "examine the " + g.targets.front() + " under the " + g.receptacle;
  std::string text = "put a " + adjective + g.targets.front();
  for (std::size_t i = 1; i < g.targets.size(); ++i)
    text += " and a " + adjective + g.targets[i];
  return text + " in/on " + g.receptacle;
}

inline bool goal_satisfied(const WorldState& s, const Scenario& sc) {
  for (const auto& target : sc.goal.targets) {
    auto props = s.object_props.at(target);
    switch (sc.task_type) {
      case TaskType::ExamineInLight:
        if (!(props & kExaminedUnderLight)) return false;
        continue;
      case TaskType::CleanPlace:
        if (!(props & kClean)) return false;
        break;
      case TaskType::HeatPlace:
        if (!(props & kHeated)) return false;
        break;
      case TaskType::CoolPlace:
        if (!(props & kCooled)) return false;
        break;
      default:
        break;
    }
    if (s.object_location.at(target) != sc.goal.receptacle) return false;
  }
  return true;
}

namespace detail {

inline std::string list_visible_objects(const WorldState& s, const Scenario& sc,
                                        const std::string& recep) {
  std::vector<std::string> here;
  for (const auto& o : sc.objects)
    if (s.object_location.at(o.name) == recep) here.push_back(o.name);
  if (here.empty()) return "nothing";
  std::string out;
  for (std::size_t i = 0; i < here.size(); ++i) {
    if (i > 0) out += ", ";
    out += "a " + here[i];
  }
  return out;
}

inline bool receptacle_accessible(const WorldState& s, const Receptacle& r) {
  return !r.openable || s.receptacle_open.at(r.name);
}

}  // namespace detail

inline std::pair<WorldState, std::string> reset(const Scenario& sc) {
  WorldState s;
  for (const auto& r : sc.receptacles)
    if (r.openable) s.receptacle_open[r.name] = false;
  for (const auto& o : sc.objects) {
    s.object_location[o.name] = o.location;
    s.object_props[o.name] = o.props;
  }
  std::string obs = "You are in the middle of a room. Looking around you, you see";
  for (std::size_t i = 0; i < sc.receptacles.size(); ++i) {
    obs += (i == 0 ? " a " : ", a ") + sc.receptacles[i].name;
  }
  obs += ". Your task is to: " + goal_text(sc) + ".";
  return {std::move(s), std::move(obs)};
}

// Applies one action. Pure: identical inputs yield identical outputs.
// Inapplicable actions leave the world unchanged and observe the sentinel.
// steps_taken counts attempted steps and is excluded from state identity.
inline std::pair<WorldState, StepOutcome> step(const WorldState& state,
                                               const Scenario& sc,
                                               const Action& action) {
  WorldState next = state;
  next.steps_taken = state.steps_taken + 1;
  StepOutcome out;
  out.observation = kNothingHappens;

  auto nothing = [&]() { return std::make_pair(std::move(next), std::move(out)); };
  auto changed = [&](std::string observation) {
    out.state_changed = true;
    out.observation = std::move(observation);
    out.success = goal_satisfied(next, sc);
    out.done = out.success;
    return std::make_pair(std::move(next), std::move(out));
  };

  switch (action.verb) {
    case Verb::Go: {
      const auto* r = sc.find_receptacle(action.arg1);
      if (!r || state.agent_at == r->name) return nothing();
      next.agent_at = r->name;
      std::string obs = "You arrive at the " + r->name + ". ";
      if (r->openable && !state.receptacle_open.at(r->name))
        obs += "The " + r->name + " is closed.";
      else
        obs += "On the " + r->name + ", you see " +
               detail::list_visible_objects(state, sc, r->name) + ".";
      return changed(obs);
    }
    case Verb::Open: {
      const auto* r = sc.find_receptacle(action.arg1);
      if (!r || !r->openable || state.agent_at != r->name ||
          state.receptacle_open.at(r->name))
        return nothing();
      next.receptacle_open[r->name] = true;
      return changed("You open the " + r->name + ". In the " + r->name +
                     ", you see " + detail::list_visible_objects(state, sc, r->name) +
                     ".");
    }
    case Verb::Close: {
      const auto* r = sc.find_receptacle(action.arg1);
      if (!r || !r->openable || state.agent_at != r->name ||
          !state.receptacle_open.at(r->name))
        return nothing();
      next.receptacle_open[r->name] = false;
      return changed("You close the " + r->name + ".");
    }
    case Verb::Take: {
      const auto* r = sc.find_receptacle(action.arg2);
      auto loc = state.object_location.find(action.arg1);
      if (!r || loc == state.object_location.end()) return nothing();
      if (state.agent_at != r->name || loc->second != r->name) return nothing();
      if (!detail::receptacle_accessible(state, *r)) return nothing();
      if (state.held_object()) return nothing();  // carry capacity is 1
      next.object_location[action.arg1] = kInventory;
      return changed("You pick up the " + action.arg1 + " from the " + r->name + ".");
    }
    case Verb::Put: {
      const auto* r = sc.find_receptacle(action.arg2);
      auto loc = state.object_location.find(action.arg1);
      if (!r || loc == state.object_location.end()) return nothing();
      if (state.agent_at != r->name || loc->second != kInventory) return nothing();
      if (!detail::receptacle_accessible(state, *r)) return nothing();
      next.object_location[action.arg1] = r->name;
      return changed("You put the " + action.arg1 + " in/on the " + r->name + ".");
    }
    case Verb::Clean:
    case Verb::Heat:
    case Verb::Cool: {
      const auto* r = sc.find_receptacle(action.arg2);
      auto loc = state.object_location.find(action.arg1);
      if (!r || loc == state.object_location.end()) return nothing();
      if (state.agent_at != r->name || loc->second != kInventory) return nothing();
      Appliance need = action.verb == Verb::Clean  ? Appliance::Clean
                       : action.verb == Verb::Heat ? Appliance::Heat
                                                   : Appliance::Cool;
      std::uint8_t flag = action.verb == Verb::Clean  ? kClean
                          : action.verb == Verb::Heat ? kHeated
                                                      : kCooled;
      if (r->appliance != need) return nothing();
      if (state.object_props.at(action.arg1) & flag) return nothing();
      next.object_props[action.arg1] |= flag;
      const char* did = action.verb == Verb::Clean  ? "clean"
                        : action.verb == Verb::Heat ? "heat"
                                                    : "cool";
      return changed("You " + std::string(did) + " the " + action.arg1 +
                     " using the " + r->name + ".");
    }
    case Verb::Use: {
      const auto* r = sc.find_receptacle(action.arg1);
      if (!r || r->appliance != Appliance::Light || state.agent_at != r->name)
        return nothing();
      auto held = state.held_object();
      if (!held) return nothing();
      if (state.object_props.at(*held) & kExaminedUnderLight) return nothing();
      next.object_props[*held] |= kExaminedUnderLight;
      return changed("You turn on the " + r->name + " and examine the " + *held +
                     " under its light.");
    }
    case Verb::Examine:
      // Informational only: never a state change.
      return nothing();
  }
  return nothing();
}

// Exactly the actions whose transition changes the world.
inline std::vector<Action> admissible_actions(const WorldState& s, const Scenario& sc) {
  std::vector<Action> out;
  auto held = s.held_object();
  for (const auto& r : sc.receptacles) {
    if (r.name != s.agent_at) out.push_back({Verb::Go, r.name, ""});
  }
  const auto* here = sc.find_receptacle(s.agent_at);
  if (!here) return out;

  if (here->openable) {
    if (s.receptacle_open.at(here->name))
      out.push_back({Verb::Close, here->name, ""});
    else
      out.push_back({Verb::Open, here->name, ""});
  }
  bool accessible = detail::receptacle_accessible(s, *here);
  if (accessible && !held) {
    for (const auto& o : sc.objects)
      if (s.object_location.at(o.name) == here->name)
        out.push_back({Verb::Take, o.name, here->name});
  }
  if (accessible && held) out.push_back({Verb::Put, *held, here->name});
  if (held) {
    auto props = s.object_props.at(*held);
    if (here->appliance == Appliance::Clean && !(props & kClean))
      out.push_back({Verb::Clean, *held, here->name});
    if (here->appliance == Appliance::Heat && !(props & kHeated))
      out.push_back({Verb::Heat, *held, here->name});
    if (here->appliance == Appliance::Cool && !(props & kCooled))
      out.push_back({Verb::Cool, *held, here->name});
    if (here->appliance == Appliance::Light && !(props & kExaminedUnderLight))
      out.push_back({Verb::Use, here->name, ""});
  }
  return out;
}

namespace detail {

// Canonical dedup key: sorted object tuples plus agent location and open flags.
inline std::string encode_state(const WorldState& s) {
  std::string key = s.agent_at;
  key += '|';
  for (const auto& [name, open] : s.receptacle_open) key += open ? '1' : '0';
  for (const auto& [obj, loc] : s.object_location) {
    key += '|';
    key += obj;
    key += '@';
    key += loc;
    key += static_cast<char>('a' + s.object_props.at(obj));
  }
  return key;
}

}  // namespace detail

// Shortest solution by breadth-first search over world states. Successors are
// expanded in grammar-string lexicographic order, so ties break the same way
// on every run.
inline std::vector<Action> solve_reference(const Scenario& sc) {
  auto [initial, obs] = reset(sc);
  if (goal_satisfied(initial, sc)) return {};

  struct Node {
    WorldState state;
    int parent;  // index into nodes, -1 for root
    Action via;
  };
  std::vector<Node> nodes;
  nodes.push_back({initial, -1, Action{}});
  std::unordered_set<std::string> seen{detail::encode_state(initial)};
  std::deque<int> frontier{0};

  auto build_path = [&](int leaf) {
    std::vector<Action> path;
    for (int i = leaf; nodes[i].parent >= 0; i = nodes[i].parent)
      path.push_back(nodes[i].via);
    std::reverse(path.begin(), path.end());
    return path;
  };

  while (!frontier.empty()) {
    int idx = frontier.front();
    frontier.pop_front();
    auto actions = admissible_actions(nodes[idx].state, sc);
    std::sort(actions.begin(), actions.end(), [](const Action& a, const Action& b) {
      return render_action(a) < render_action(b);
    });
    for (const auto& a : actions) {
      auto [next, out] = step(nodes[idx].state, sc, a);
      auto key = detail::encode_state(next);
      if (!seen.insert(key).second) continue;
      nodes.push_back({std::move(next), idx, a});
      if (out.success) return build_path(static_cast<int>(nodes.size()) - 1);
      frontier.push_back(static_cast<int>(nodes.size()) - 1);
    }
  }
  throw ScenarioError("scenario '" + sc.id + "': no solution exists");
}

inline int count_interactions(const std::vector<Action>& solution) {
  int n = 0;
  for (const auto& a : solution)
    if (a.verb != Verb::Go) ++n;
  return n;
}

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ScenarioError(message);
}

}  // namespace detail

inline Scenario scenario_from_json(const json& doc) {
  using detail::require;
  require(doc.is_object(), "scenario: top level must be an object");
  for (const char* key : {"id", "task_type", "receptacles", "objects", "goal"})
    require(doc.contains(key), std::string("scenario: missing key '") + key + "'");

  Scenario sc;
  sc.id = doc.at("id").get<std::string>();
  require(!sc.id.empty(), "scenario: key 'id' must be non-empty");
  auto type = task_type_from_name(doc.at("task_type").get<std::string>());
  require(type.has_value(), "scenario '" + sc.id + "': unknown 'task_type' value");
  sc.task_type = *type;

  std::set<std::string> recep_names;
  for (const auto& r : doc.at("receptacles")) {
    Receptacle rec;
    rec.name = r.at("name").get<std::string>();
    require(rec.name != kInventory && rec.name != kStart,
            "scenario '" + sc.id + "': reserved receptacle name '" + rec.name + "'");
    require(recep_names.insert(rec.name).second,
            "scenario '" + sc.id + "': duplicate receptacle '" + rec.name + "'");
    rec.openable = r.value("openable", false);
    std::string appliance = r.value("appliance", "none");
    if (appliance == "none") rec.appliance = Appliance::None;
    else if (appliance == "clean") rec.appliance = Appliance::Clean;
    else if (appliance == "heat") rec.appliance = Appliance::Heat;
    else if (appliance == "cool") rec.appliance = Appliance::Cool;
    else if (appliance == "light") rec.appliance = Appliance::Light;
    else
      throw ScenarioError("scenario '" + sc.id + "': receptacle '" + rec.name +
                          "': unknown 'appliance' value '" + appliance + "'");
    sc.receptacles.push_back(std::move(rec));
  }
  require(!sc.receptacles.empty(), "scenario '" + sc.id + "': 'receptacles' is empty");

  std::set<std::string> object_names;
  for (const auto& o : doc.at("objects")) {
    ObjectSpec obj;
    obj.name = o.at("name").get<std::string>();
    require(object_names.insert(obj.name).second,
            "scenario '" + sc.id + "': duplicate object '" + obj.name + "'");
    obj.location = o.at("location").get<std::string>();
    require(recep_names.count(obj.location) > 0,
            "scenario '" + sc.id + "': object '" + obj.name +
                "' placed in unknown receptacle '" + obj.location + "'");
    for (const auto& p : o.value("props", json::array())) {
      std::string prop = p.get<std::string>();
      if (prop == "clean") obj.props |= kClean;
      else if (prop == "heated") obj.props |= kHeated;
      else if (prop == "cooled") obj.props |= kCooled;
      else if (prop == "examined_under_light") obj.props |= kExaminedUnderLight;
      else
        throw ScenarioError("scenario '" + sc.id + "': object '" + obj.name +
                            "': unknown 'props' value '" + prop + "'");
    }
    sc.objects.push_back(std::move(obj));
  }

  const auto& goal = doc.at("goal");
  require(goal.contains("targets"), "scenario '" + sc.id + "': goal missing 'targets'");
  require(goal.contains("receptacle"),
          "scenario '" + sc.id + "': goal missing 'receptacle'");
  for (const auto& t : goal.at("targets")) {
    std::string name = t.get<std::string>();
    require(object_names.count(name) > 0,
            "scenario '" + sc.id + "': goal target '" + name + "' is not an object");
    sc.goal.targets.push_back(name);
  }
  sc.goal.receptacle = goal.at("receptacle").get<std::string>();
  require(recep_names.count(sc.goal.receptacle) > 0,
          "scenario '" + sc.id + "': goal 'receptacle' '" + sc.goal.receptacle +
              "' does not exist");
  require(!sc.goal.targets.empty() && sc.goal.targets.size() <= 2,
          "scenario '" + sc.id + "': goal 'targets' must hold 1 or 2 objects");
  if (sc.task_type == TaskType::PickTwoPlace)
    require(sc.goal.targets.size() == 2,
            "scenario '" + sc.id + "': pick_two_place goal needs 2 'targets'");
  if (sc.task_type == TaskType::ExamineInLight) {
    const auto* lamp = sc.find_receptacle(sc.goal.receptacle);
    require(lamp->appliance == Appliance::Light,
            "scenario '" + sc.id + "': goal 'receptacle' must be a light appliance");
  }

  sc.num_obj = doc.value("num_obj", static_cast<int>(sc.goal.targets.size()));
  require(sc.num_obj == static_cast<int>(sc.goal.targets.size()),
          "scenario '" + sc.id + "': 'num_obj' disagrees with goal targets");
  sc.num_inter = doc.value("num_inter", 0);
  if (sc.num_inter == 0) sc.num_inter = count_interactions(solve_reference(sc));
  require(sc.num_inter >= 1, "scenario '" + sc.id + "': 'num_inter' must be >= 1");
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ScenarioError("scenario file " + path + ": " + e.what());
  }
  try {
    return scenario_from_json(doc);
  } catch (const json::exception& e) {
    throw ScenarioError("scenario file " + path + ": " + e.what());
  }
}

}  // namespace mentoract::textworld
