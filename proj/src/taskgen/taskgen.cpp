#include "manualkit/taskgen/taskgen.hpp"

#include "manualkit/core/error.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

namespace manualkit {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool has_state(const ApplianceInstance& instance, const std::string& part_id, const StateLabel& label) {
  auto it = instance.state_annotation.find(part_id);
  if (it == instance.state_annotation.end()) return false;
  const std::string canonical = format_state(label);
  return std::any_of(it->second.begin(), it->second.end(), [&](const StateEntry& e) { return e.label == canonical; });
}

json task_context(const ApplianceModel& model, const ApplianceInstance& instance,
                  const std::vector<ManipulationTask>& existing, Horizon horizon) {
  json parts = json::array();
  for (const auto& part : model.parts) {
    auto name = instance.function_annotation.find(part.part_id);
    if (name == instance.function_annotation.end()) continue;
    json states = json::array();
    auto st = instance.state_annotation.find(part.part_id);
    if (st != instance.state_annotation.end()) {
      for (const auto& e : st->second) states.push_back({{"label", e.label}, {"description", e.description}});
    }
    parts.push_back({{"part_id", part.part_id},
                     {"function_name", name->second},
                     {"part_type", to_string(part.part_type)},
                     {"openable", is_openable(part.part_type)},
                     {"prismatic", model.joint_of(part).kind == JointKind::prismatic},
                     {"states", states}});
  }
  json instructions = json::array();
  for (const auto& t : existing) instructions.push_back(t.instruction);
  return {{"category", to_string(model.category)},
          {"parts", parts},
          {"existing_instructions", instructions},
          {"horizon", horizon == Horizon::long_horizon ? "long" : "short"},
          {"max_steps", kMaxTaskSteps}};
}

std::string task_prompt(const json& ctx) {
  std::ostringstream os;
  os << "Appliance category: " << ctx.at("category").get<std::string>() << "\nParts and their states:\n";
  for (const auto& p : ctx.at("parts")) {
    for (const auto& s : p.at("states")) {
      os << "- " << p.at("function_name").get<std::string>() << ", " << s.at("label").get<std::string>() << ": "
         << s.at("description").get<std::string>() << "\n";
    }
  }
  os << "Tasks already designed (do not repeat):\n";
  for (const auto& t : ctx.at("existing_instructions")) os << "- " << t.get<std::string>() << "\n";
  os << "Design one new " << ctx.at("horizon").get<std::string>() << "-horizon task of at most " << kMaxTaskSteps
     << " steps. Answer as `Task: <instruction>` followed by lines `<n>. <Part Name>, <State>`.";
  return os.str();
}

}  // namespace

json to_json(const TaskStep& step) {
  return {{"index", step.index}, {"function_name", step.function_name}, {"state", format_state(step.target_state)}};
}

json to_json(const ManipulationTask& task) {
  json steps = json::array();
  for (const auto& s : task.steps) steps.push_back(to_json(s));
  return {{"task_id", task.task_id},         {"instance_id", task.instance_id},
          {"instruction", task.instruction}, {"steps", steps},
          {"in_manual", task.in_manual},     {"review_status", to_string(task.review_status)},
          {"regen_count", task.regen_count}};
}

ManipulationTask task_from_json(const json& j) {
  try {
    ManipulationTask t;
    t.task_id = j.at("task_id").get<std::string>();
    t.instance_id = j.at("instance_id").get<std::string>();
    t.instruction = j.at("instruction").get<std::string>();
    for (const auto& s : j.at("steps")) {
      auto label = parse_state(s.at("state").get<std::string>());
      if (!label) throw Error(Errc::malformed_document, "task " + t.task_id + ": bad state " + s.at("state").dump());
      t.steps.push_back({s.at("index").get<int>(), s.at("function_name").get<std::string>(), *label});
    }
    t.in_manual = j.value("in_manual", false);
    t.review_status = review_status_from_string(j.value("review_status", "pending"));
    t.regen_count = j.value("regen_count", 0);
    return t;
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_document, std::string("task manifest: ") + e.what());
  }
}

std::string format_task_steps(const std::vector<TaskStep>& steps) {
  std::ostringstream os;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) os << "\n";
    os << steps[i].index << ". " << steps[i].function_name << ", " << format_state(steps[i].target_state);
  }
  return os.str();
}

std::string format_task(const ManipulationTask& task) {
  return "Task: " + task.instruction + "\n" + format_task_steps(task.steps);
}

std::vector<TaskStep> parse_task_steps(const std::string& text) {
  static const std::regex line_re(R"(^\s*(\d+)\.\s*(.+?),\s*(.+?)\s*$)");
  std::vector<TaskStep> steps;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    auto label = parse_state(m[3].str());
    if (!label) throw Error(Errc::unresolvable_format, "unrecognised state '" + m[3].str() + "' in: " + trim(line));
    steps.push_back({std::stoi(m[1].str()), trim(m[2].str()), *label});
  }
  if (steps.empty()) throw Error(Errc::unresolvable_format, "no '<n>. <name>, <state>' line found");
  std::stable_sort(steps.begin(), steps.end(), [](const TaskStep& a, const TaskStep& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].index != static_cast<int>(i) + 1) {
      throw Error(Errc::non_contiguous_indices, "expected step " + std::to_string(i + 1) + ", found " +
                                                    std::to_string(steps[i].index));
    }
  }
  return steps;
}

ParsedTask parse_task_text(const std::string& text) {
  static const std::regex task_re(R"(^\s*(?:\*\*)?Task(?:\*\*)?\s*:\s*(.+?)\s*$)", std::regex::icase);
  ParsedTask out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    std::smatch m;
    if (std::regex_match(line, m, task_re)) {
      out.instruction = m[1].str();
      break;
    }
  }
  if (out.instruction.empty()) throw Error(Errc::unresolvable_format, "no 'Task:' line found");
  out.steps = parse_task_steps(text);
  return out;
}

std::optional<std::string> resolve_step_part(const ApplianceInstance& instance, const TaskStep& step) {
  std::string part = instance.part_for_name(step.function_name);
  if (part.empty()) return std::nullopt;
  return part;
}

std::vector<Violation> validate_task(const ManipulationTask& task, const ApplianceInstance& instance) {
  std::vector<Violation> out;
  if (task.steps.empty()) out.push_back({0, "task has no steps"});
  if (static_cast<int>(task.steps.size()) > kMaxTaskSteps) {
    out.push_back({0, "task has " + std::to_string(task.steps.size()) + " steps, limit is " + std::to_string(kMaxTaskSteps)});
  }
  if (trim(task.instruction).empty()) out.push_back({0, "empty instruction"});
  for (std::size_t i = 0; i < task.steps.size(); ++i) {
    const TaskStep& s = task.steps[i];
    if (s.index != static_cast<int>(i) + 1) {
      out.push_back({s.index, "index out of sequence, expected " + std::to_string(i + 1)});
    }
    const auto part = resolve_step_part(instance, s);
    if (!part) {
      out.push_back({s.index, "unknown part '" + s.function_name + "'"});
    } else if (!has_state(instance, *part, s.target_state)) {
      out.push_back({s.index, "'" + format_state(s.target_state) + "' is not a state of " + s.function_name});
    }
    if (i > 0 && s.function_name == task.steps[i - 1].function_name && s.target_state == task.steps[i - 1].target_state) {
      out.push_back({s.index, "consecutive duplicate of step " + std::to_string(task.steps[i - 1].index)});
    }
  }
  return out;
}

ManipulationTask propose_task(const ApplianceModel& model, const ApplianceInstance& instance,
                              const std::vector<ManipulationTask>& existing, BackendDispatcher& backend, Horizon horizon,
                              std::uint64_t seed, const TaskGenConfig& config) {
  if (!instance.approved()) throw Error(Errc::precondition_violated, "instance " + instance.instance_id + " is not approved");
  BackendRequest req;
  req.capability = Capability::task_from_text;
  req.role_prompt = "You design realistic household tasks that a user performs on an appliance.";
  req.context = task_context(model, instance, existing, horizon);
  req.text = task_prompt(req.context);
  req.seed = seed;

  std::set<std::string> seen;
  for (const auto& t : existing) seen.insert(lower(trim(t.instruction)));

  auto result = call_with_regeneration<ManipulationTask>(
      backend, req, config.max_regen, [&](const std::string& out, std::string& why) -> std::optional<ManipulationTask> {
        ManipulationTask task;
        try {
          auto parsed = parse_task_text(out);
          task.instruction = std::move(parsed.instruction);
          task.steps = std::move(parsed.steps);
        } catch (const Error& e) {
          why = e.what();
          return std::nullopt;
        }
        if (seen.count(lower(trim(task.instruction)))) {
          why = "instruction repeats an existing task";
          return std::nullopt;
        }
        task.instance_id = instance.instance_id;
        const auto violations = validate_task(task, instance);
        if (!violations.empty()) {
          why = "step " + std::to_string(violations.front().step_index) + ": " + violations.front().reason;
          return std::nullopt;
        }
        return task;
      });
  result.value.regen_count = result.regen_count;
  return std::move(result.value);
}

std::vector<ManipulationTask> generate_tasks(const ApplianceModel& model, const ApplianceInstance& instance, int count,
                                             BackendDispatcher& backend, std::uint64_t seed,
                                             const TaskGenConfig& config) {
  std::vector<ManipulationTask> out;
  for (int k = 0; k < count; ++k) {
    const Horizon h = k % 2 == 0 ? Horizon::short_horizon : Horizon::long_horizon;
    auto task = propose_task(model, instance, out, backend, h, mix_seed(seed, static_cast<std::uint64_t>(k) + 1), config);
    task.task_id = instance.instance_id + "_task" + std::to_string(k + 1);
    out.push_back(std::move(task));
  }
  return out;
}

}  // namespace manualkit
