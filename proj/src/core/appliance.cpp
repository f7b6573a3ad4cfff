#include "manualkit/core/appliance.hpp"

#include "manualkit/core/error.hpp"

#include <algorithm>
#include <cctype>

namespace manualkit {

namespace {

std::string normalize_label(std::string_view label) {
  std::string out;
  for (char c : label) {
    if (c == ' ' || c == '-') c = '_';
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace

std::array<Vec3, 8> Aabb::corners() const {
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    out[i] = Vec3((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  }
  return out;
}

std::string_view to_string(JointKind kind) { return kind == JointKind::revolute ? "revolute" : "prismatic"; }

std::string_view to_string(PartType type) {
  switch (type) {
    case PartType::button: return "button";
    case PartType::knob: return "knob";
    case PartType::lever: return "lever";
    case PartType::slider: return "slider";
    case PartType::door: return "door";
    case PartType::lid: return "lid";
    case PartType::container: return "container";
    case PartType::drawer: return "drawer";
    case PartType::screen: return "screen";
    case PartType::handle: return "handle";
    case PartType::switch_: return "switch";
    case PartType::tray: return "tray";
  }
  return "button";
}

std::string_view to_string(Category category) {
  switch (category) {
    case Category::microwave: return "microwave";
    case Category::oven: return "oven";
    case Category::dishwasher: return "dishwasher";
    case Category::refrigerator: return "refrigerator";
    case Category::washing_machine: return "washing_machine";
    case Category::coffee_machine: return "coffee_machine";
    case Category::blender: return "blender";
    case Category::toaster: return "toaster";
    case Category::kettle: return "kettle";
    case Category::dispenser: return "dispenser";
    case Category::printer: return "printer";
  }
  return "microwave";
}

std::optional<PartType> part_type_from_string(std::string_view label) {
  const std::string key = normalize_label(label);
  for (PartType t : kAllPartTypes) {
    if (to_string(t) == key) return t;
  }
  return std::nullopt;
}

std::optional<Category> category_from_string(std::string_view label) {
  std::string key = normalize_label(label);
  // PartNet-style camel case names ("WashingMachine", "CoffeeMachine").
  if (key == "washingmachine") key = "washing_machine";
  if (key == "coffeemachine") key = "coffee_machine";
  for (Category c : kAllCategories) {
    if (to_string(c) == key) return c;
  }
  return std::nullopt;
}

bool is_openable(PartType type) {
  return type == PartType::door || type == PartType::lid || type == PartType::container || type == PartType::drawer;
}

double JointSpec::rest_value() const { return std::clamp(0.0, limit_lo, limit_hi); }

double limit_range(const JointSpec& joint) { return joint.limit_hi - joint.limit_lo; }

Eigen::Isometry3d joint_transform(const JointSpec& joint, double value) {
  const double delta = value - joint.rest_value();
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  if (joint.kind == JointKind::prismatic) {
    t.translate(joint.axis * delta);
  } else {
    t.translate(joint.origin);
    t.rotate(Eigen::AngleAxisd(delta, joint.axis));
    t.translate(-joint.origin);
  }
  return t;
}

const PartSpec* ApplianceModel::find_part(std::string_view part_id) const {
  for (const auto& p : parts) {
    if (p.part_id == part_id) return &p;
  }
  return nullptr;
}

const JointSpec* ApplianceModel::find_joint(std::string_view joint_id) const {
  for (const auto& j : joints) {
    if (j.joint_id == joint_id) return &j;
  }
  return nullptr;
}

const PartSpec& ApplianceModel::part(std::string_view part_id) const {
  if (const auto* p = find_part(part_id)) return *p;
  throw Error(Errc::not_found, "no part '" + std::string(part_id) + "' in model " + model_id);
}

const JointSpec& ApplianceModel::joint(std::string_view joint_id) const {
  if (const auto* j = find_joint(joint_id)) return *j;
  throw Error(Errc::dangling_joint_ref, "no joint '" + std::string(joint_id) + "' in model " + model_id);
}

std::optional<std::size_t> ApplianceModel::part_index(std::string_view part_id) const {
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].part_id == part_id) return i;
  }
  return std::nullopt;
}

Aabb ApplianceModel::bounds() const {
  Aabb out;
  for (const auto& b : body_boxes) out.extend(b);
  for (const auto& p : parts) {
    out.extend(p.bounds);
    out.extend(p.contact_point);
  }
  return out;
}

ApplianceState ApplianceState::at_rest(const ApplianceModel& model) {
  ApplianceState s;
  for (const auto& j : model.joints) s.joint_values[j.joint_id] = j.rest_value();
  return s;
}

double ApplianceState::value(std::string_view joint_id) const {
  auto it = joint_values.find(std::string(joint_id));
  if (it == joint_values.end()) throw Error(Errc::not_found, "state has no joint '" + std::string(joint_id) + "'");
  return it->second;
}

}  // namespace manualkit
