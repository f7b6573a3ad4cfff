#pragma once

#include "manualkit/core/appliance.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>

namespace manualkit {

/// A discrete function state of a part, e.g. "Rotate 120 degrees".
struct StateLabel {
  enum class Kind { push, rotate, open, close, slide_forward, slide_backward };
  Kind kind = Kind::open;
  int count = 0;         // push
  double degrees = 0.0;  // rotate, relative to the joint's rest value

  static StateLabel push(int times) { return {Kind::push, times, 0.0}; }
  static StateLabel rotate(double deg) { return {Kind::rotate, 0, deg}; }
  static StateLabel open() { return {Kind::open, 0, 0.0}; }
  static StateLabel close() { return {Kind::close, 0, 0.0}; }

  bool operator==(const StateLabel&) const = default;
};

/// Canonical text: "Push 1 time", "Push 2 times", "Rotate 60 degrees", "Open",
/// "Close", "Slide forward", "Slide backward".
std::string format_state(const StateLabel& label);
/// Case-insensitive and tolerant of "°", "deg", "time"/"times" variants.
std::optional<StateLabel> parse_state(std::string_view text);

struct Push { int times = 1; };
struct Rotate { double degrees = 0.0; };
struct SetOpen {};
struct SetClose {};
struct Translate { double fraction_of_range = 0.0; };

using Action = std::variant<Push, Rotate, SetOpen, SetClose, Translate>;

struct ActionCommand {
  std::string part_id;
  Action action;
};

/// Checks the ActionCommand invariants against the part; throws
/// IllegalActionForPart on violation.
void type_check(const ApplianceModel& model, const ActionCommand& cmd);

/// True iff the label's implied action type-checks for this part.
bool state_valid_for_part(const ApplianceModel& model, const PartSpec& part, const StateLabel& label);

/// Joint value the label asks for on a revolute part (radians).
double target_joint_value(const JointSpec& joint, const StateLabel& label);

/// Command that drives `part` from its current value in `state` to the label.
ActionCommand command_for_state(const ApplianceModel& model, const ApplianceState& state,
                                const PartSpec& part, const StateLabel& label);

struct ExecutionStep {
  std::string part_id;
  ApplianceState state_before;
  ApplianceState state_after;
  double md_part = 0.0;
  double md_appliance = 0.0;
  Vec3 part_displacement = Vec3::Zero();       // contact point, model frame
  Vec3 appliance_displacement = Vec3::Zero();  // base
  bool executor_failed = false;
};

/// Optional perturbation of the kinematic executor. Pose noise jitters the
/// commanded joint motion and slides the appliance base; executor failures
/// drop a step entirely with the given probability.
struct ExecutorNoise {
  bool pose_noise = false;
  double executor_failure_rate = 0.0;
  std::uint64_t seed = 0;
  double angle_sigma_deg = 5.0;
  double translate_sigma_fraction = 0.05;
  double base_sigma_m = 0.002;
};

class NoiseSampler {
 public:
  explicit NoiseSampler(const ExecutorNoise& profile) : profile_(profile), rng_(profile.seed) {}

  const ExecutorNoise& profile() const { return profile_; }
  bool draw_failure();
  double draw_normal(double sigma);

 private:
  ExecutorNoise profile_;
  std::mt19937_64 rng_;
};

struct ActionOutcome {
  ApplianceState state;
  ExecutionStep step;
};

ActionOutcome apply_action(const ApplianceModel& model, const ApplianceState& state, const ActionCommand& cmd,
                           NoiseSampler* noise = nullptr);

/// Thresholds for single-step success.
inline constexpr double kRevoluteToleranceDeg = 30.0;
inline constexpr double kPrismaticTravelFraction = 0.25;
inline constexpr double kMotionRatioThreshold = 0.5;

bool check_step_success(const ApplianceModel& model, const ExecutionStep& step, const PartSpec& target_part,
                        const StateLabel& target_state);

/// Perpendicular distance from the contact point to the joint axis line.
double lever_arm(const PartSpec& part, const JointSpec& joint);

}  // namespace manualkit
