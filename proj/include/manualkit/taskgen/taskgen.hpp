#pragma once

#include "manualkit/annotation/annotation.hpp"

#include <optional>
#include <string>
#include <vector>

namespace manualkit {

inline constexpr int kMaxTaskSteps = 18;

struct TaskStep {
  int index = 1;  // 1-based
  std::string function_name;
  StateLabel target_state;
  bool operator==(const TaskStep&) const = default;
};

struct ManipulationTask {
  std::string task_id;
  std::string instance_id;
  std::string instruction;
  std::vector<TaskStep> steps;
  bool in_manual = false;
  ReviewStatus review_status = ReviewStatus::pending;
  int regen_count = 0;
};

json to_json(const TaskStep& step);
json to_json(const ManipulationTask& task);
ManipulationTask task_from_json(const json& j);

/// "1. Front Door, Open" lines joined by newlines.
std::string format_task_steps(const std::vector<TaskStep>& steps);
/// "Task: <instruction>" followed by the step lines.
std::string format_task(const ManipulationTask& task);

/// Lines of the form `<int>. <name>, <state>`; other lines are ignored.
/// Steps come back sorted by index. Throws UnresolvableFormat when no line
/// matches or a matched state does not parse, NonContiguousIndices when the
/// indices are not exactly 1..n.
std::vector<TaskStep> parse_task_steps(const std::string& text);

struct ParsedTask {
  std::string instruction;
  std::vector<TaskStep> steps;
};

/// Instruction from a "Task:" line, plus parse_task_steps on the rest.
ParsedTask parse_task_text(const std::string& text);

struct Violation {
  int step_index = 0;  // 0 for task-level problems
  std::string reason;
};

std::vector<Violation> validate_task(const ManipulationTask& task, const ApplianceInstance& instance);

enum class Horizon { short_horizon, long_horizon };

struct TaskGenConfig {
  int max_regen = 5;
};

/// One new task for an approved instance. Rejected proposals (bad format,
/// repeated instruction, validation violations) are regenerated.
ManipulationTask propose_task(const ApplianceModel& model, const ApplianceInstance& instance,
                              const std::vector<ManipulationTask>& existing, BackendDispatcher& backend, Horizon horizon,
                              std::uint64_t seed, const TaskGenConfig& config = {});

/// `count` tasks proposed one at a time, each seeing the earlier ones.
/// Horizons alternate short/long; ids are `<instance_id>_task<k>`.
std::vector<ManipulationTask> generate_tasks(const ApplianceModel& model, const ApplianceInstance& instance, int count,
                                             BackendDispatcher& backend, std::uint64_t seed,
                                             const TaskGenConfig& config = {});

/// Part id a step refers to, through the instance's names.
std::optional<std::string> resolve_step_part(const ApplianceInstance& instance, const TaskStep& step);

}  // namespace manualkit
