#include "manualkit/core/action.hpp"

#include "manualkit/core/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <sstream>

namespace manualkit {

namespace {

// Absorbs the rounding of deg<->rad conversions at the 30 degree boundary.
constexpr double kAngleEpsDeg = 1e-9;
// Relative slack on the travel threshold, keeps "exactly 25% of L" a failure
// after subtraction noise.
constexpr double kTravelRelEps = 1e-12;

std::string lower_trim(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  std::string out;
  out.reserve(e - b);
  for (std::size_t i = b; i < e; ++i) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
  return out;
}

std::string format_number(double v) {
  if (std::abs(v - std::round(v)) < 1e-9) return std::to_string(static_cast<long long>(std::llround(v)));
  std::ostringstream os;
  os << v;
  return os.str();
}

bool is_button(const PartSpec& part) { return part.part_type == PartType::button; }

[[noreturn]] void illegal(const ActionCommand& cmd, const PartSpec& part, const char* why) {
  throw Error(Errc::illegal_action_for_part,
              std::string(why) + " (part " + cmd.part_id + ", type " + std::string(to_string(part.part_type)) + ")");
}

}  // namespace

std::string format_state(const StateLabel& label) {
  switch (label.kind) {
    case StateLabel::Kind::push:
      return "Push " + std::to_string(label.count) + (label.count == 1 ? " time" : " times");
    case StateLabel::Kind::rotate: return "Rotate " + format_number(label.degrees) + " degrees";
    case StateLabel::Kind::open: return "Open";
    case StateLabel::Kind::close: return "Close";
    case StateLabel::Kind::slide_forward: return "Slide forward";
    case StateLabel::Kind::slide_backward: return "Slide backward";
  }
  return {};
}

std::optional<StateLabel> parse_state(std::string_view text) {
  const std::string s = lower_trim(text);
  if (s == "open") return StateLabel::open();
  if (s == "close" || s == "closed") return StateLabel::close();
  if (s == "slide forward") return StateLabel{StateLabel::Kind::slide_forward, 0, 0.0};
  if (s == "slide backward" || s == "slide back") return StateLabel{StateLabel::Kind::slide_backward, 0, 0.0};

  static const std::regex push_re(R"(^push\s+(\d+)\s*(times?|x)?$)");
  static const std::regex rotate_re(R"(^rotate\s+([+-]?\d+(?:\.\d+)?)\s*(degrees?|deg|°)?$)");
  std::smatch m;
  if (std::regex_match(s, m, push_re)) {
    const int n = std::stoi(m[1].str());
    if (n <= 0) return std::nullopt;
    return StateLabel::push(n);
  }
  if (std::regex_match(s, m, rotate_re)) return StateLabel::rotate(std::stod(m[1].str()));
  return std::nullopt;
}

void type_check(const ApplianceModel& model, const ActionCommand& cmd) {
  const PartSpec& part = model.part(cmd.part_id);
  const JointSpec& joint = model.joint_of(part);
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Push>) {
          if (!is_button(part)) illegal(cmd, part, "Push is only legal on buttons");
          if (a.times <= 0) illegal(cmd, part, "Push needs a positive count");
        } else if constexpr (std::is_same_v<T, Rotate>) {
          if (joint.kind != JointKind::revolute) illegal(cmd, part, "Rotate needs a revolute joint");
        } else if constexpr (std::is_same_v<T, SetOpen> || std::is_same_v<T, SetClose>) {
          if (!is_openable(part.part_type)) illegal(cmd, part, "Open/Close is only legal on doors, lids, containers, drawers");
        } else if constexpr (std::is_same_v<T, Translate>) {
          if (joint.kind != JointKind::prismatic) illegal(cmd, part, "Translate needs a prismatic joint");
          if (a.fraction_of_range < -1.0 || a.fraction_of_range > 1.0) illegal(cmd, part, "Translate fraction outside [-1, 1]");
        }
      },
      cmd.action);
}

bool state_valid_for_part(const ApplianceModel& model, const PartSpec& part, const StateLabel& label) {
  const JointSpec* joint = model.find_joint(part.joint_id);
  if (!joint) return false;
  switch (label.kind) {
    case StateLabel::Kind::push: return is_button(part) && label.count > 0;
    case StateLabel::Kind::rotate: {
      if (joint->kind != JointKind::revolute || is_button(part) || is_openable(part.part_type)) return false;
      const double target = joint->rest_value() + deg2rad(label.degrees);
      return label.degrees > 0.0 && target <= joint->limit_hi + 1e-6;
    }
    case StateLabel::Kind::open:
    case StateLabel::Kind::close: return is_openable(part.part_type);
    case StateLabel::Kind::slide_forward:
    case StateLabel::Kind::slide_backward:
      return joint->kind == JointKind::prismatic && !is_button(part) && !is_openable(part.part_type);
  }
  return false;
}

double target_joint_value(const JointSpec& joint, const StateLabel& label) {
  switch (label.kind) {
    case StateLabel::Kind::rotate:
      return std::clamp(joint.rest_value() + deg2rad(label.degrees), joint.limit_lo, joint.limit_hi);
    case StateLabel::Kind::open:
    case StateLabel::Kind::slide_forward: return joint.limit_hi;
    case StateLabel::Kind::close:
    case StateLabel::Kind::slide_backward:
    case StateLabel::Kind::push: return joint.limit_lo;
  }
  return joint.limit_lo;
}

ActionCommand command_for_state(const ApplianceModel& model, const ApplianceState& state, const PartSpec& part,
                                const StateLabel& label) {
  if (!state_valid_for_part(model, part, label)) {
    throw Error(Errc::illegal_action_for_part,
                "state '" + format_state(label) + "' does not apply to part " + part.part_id);
  }
  const JointSpec& joint = model.joint_of(part);
  ActionCommand cmd{part.part_id, SetOpen{}};
  switch (label.kind) {
    case StateLabel::Kind::push: cmd.action = Push{label.count}; break;
    case StateLabel::Kind::rotate:
      cmd.action = Rotate{rad2deg(target_joint_value(joint, label) - state.value(joint.joint_id))};
      break;
    case StateLabel::Kind::open: cmd.action = SetOpen{}; break;
    case StateLabel::Kind::close: cmd.action = SetClose{}; break;
    case StateLabel::Kind::slide_forward: cmd.action = Translate{1.0}; break;
    case StateLabel::Kind::slide_backward: cmd.action = Translate{-1.0}; break;
  }
  return cmd;
}

bool NoiseSampler::draw_failure() {
  if (profile_.executor_failure_rate <= 0.0) return false;
  if (profile_.executor_failure_rate >= 1.0) return true;
  return std::bernoulli_distribution(profile_.executor_failure_rate)(rng_);
}

double NoiseSampler::draw_normal(double sigma) {
  if (sigma <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng_);
}

double lever_arm(const PartSpec& part, const JointSpec& joint) {
  const Vec3 rel = part.contact_point - joint.origin;
  return (rel - rel.dot(joint.axis) * joint.axis).norm();
}

ActionOutcome apply_action(const ApplianceModel& model, const ApplianceState& state, const ActionCommand& cmd,
                           NoiseSampler* noise) {
  type_check(model, cmd);
  const PartSpec& part = model.part(cmd.part_id);
  const JointSpec& joint = model.joint_of(part);
  const double range = limit_range(joint);
  const double before = state.value(joint.joint_id);

  ActionOutcome out{state, {}};
  out.step.part_id = cmd.part_id;
  out.step.state_before = state;

  if (noise && noise->draw_failure()) {
    out.step.executor_failed = true;
    out.step.state_after = state;
    return out;
  }

  const bool jitter = noise && noise->profile().pose_noise;
  double after = before;
  double stroke_path = 0.0;  // extra travel for Push, which returns to rest
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Push>) {
          after = joint.limit_lo;
          stroke_path = a.times * range;
        } else if constexpr (std::is_same_v<T, Rotate>) {
          double deg = a.degrees;
          if (jitter) deg += noise->draw_normal(noise->profile().angle_sigma_deg);
          after = before + deg2rad(deg);
        } else if constexpr (std::is_same_v<T, SetOpen>) {
          after = joint.limit_hi;
        } else if constexpr (std::is_same_v<T, SetClose>) {
          after = joint.limit_lo;
        } else if constexpr (std::is_same_v<T, Translate>) {
          double frac = a.fraction_of_range;
          if (jitter) frac += noise->draw_normal(noise->profile().translate_sigma_fraction);
          after = before + frac * range;
        }
        if constexpr (std::is_same_v<T, SetOpen> || std::is_same_v<T, SetClose>) {
          if (jitter) {
            const double sigma = joint.kind == JointKind::revolute ? deg2rad(noise->profile().angle_sigma_deg)
                                                                   : noise->profile().translate_sigma_fraction * range;
            after += noise->draw_normal(sigma);
          }
        }
      },
      cmd.action);
  after = std::clamp(after, joint.limit_lo, joint.limit_hi);
  out.state.joint_values[joint.joint_id] = after;
  out.step.state_after = out.state;

  const double arm = joint.kind == JointKind::revolute ? lever_arm(part, joint) : 1.0;
  if (stroke_path > 0.0) {
    out.step.md_part = stroke_path * arm;
    out.step.part_displacement = joint.axis * range * arm;
  } else {
    out.step.md_part = std::abs(after - before) * arm;
    out.step.part_displacement =
        joint_transform(joint, after) * part.contact_point - joint_transform(joint, before) * part.contact_point;
  }
  if (jitter) {
    const double s = noise->profile().base_sigma_m;
    out.step.appliance_displacement = Vec3(noise->draw_normal(s), noise->draw_normal(s), noise->draw_normal(s));
    out.step.md_appliance = out.step.appliance_displacement.norm();
  }
  return out;
}

bool check_step_success(const ApplianceModel& model, const ExecutionStep& step, const PartSpec& target_part,
                        const StateLabel& target_state) {
  if (!state_valid_for_part(model, target_part, target_state)) {
    throw Error(Errc::unknown_target_state,
                "'" + format_state(target_state) + "' is not a state of part " + target_part.part_id);
  }
  const JointSpec& joint = model.joint_of(target_part);
  // A step that manipulated some other part leaves the target untouched.
  const bool acted_on_target = step.part_id == target_part.part_id && !step.executor_failed;

  if (joint.kind == JointKind::revolute && target_state.kind != StateLabel::Kind::push) {
    const double achieved = step.state_after.value(joint.joint_id);
    const double err_deg = std::abs(rad2deg(achieved - target_joint_value(joint, target_state)));
    return err_deg <= kRevoluteToleranceDeg + kAngleEpsDeg;
  }

  if (!acted_on_target) return false;
  const double path_range = limit_range(joint) * (joint.kind == JointKind::revolute ? lever_arm(target_part, joint) : 1.0);
  if (step.md_part > kPrismaticTravelFraction * path_range * (1.0 + kTravelRelEps)) return true;
  if (step.md_appliance > 0.0) {
    const double part_along = step.part_displacement.dot(joint.axis);
    const double base_along = step.appliance_displacement.dot(joint.axis);
    const bool same_direction = part_along * base_along > 0.0;
    if (same_direction && step.md_part / step.md_appliance > kMotionRatioThreshold) return true;
  }
  return false;
}

}  // namespace manualkit
