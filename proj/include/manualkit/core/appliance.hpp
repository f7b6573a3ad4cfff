#pragma once

#include <Eigen/Geometry>

#include <array>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace manualkit {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  bool empty() const { return (hi.array() < lo.array()).any(); }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 extent() const { return hi - lo; }
  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Aabb& other) {
    if (other.empty()) return;
    extend(other.lo);
    extend(other.hi);
  }
  /// Grows each side by `fraction` of the box extent along that axis.
  Aabb expanded(double fraction) const {
    Aabb out = *this;
    const Vec3 pad = extent() * fraction;
    out.lo -= pad;
    out.hi += pad;
    return out;
  }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  std::array<Vec3, 8> corners() const;
};

enum class JointKind { revolute, prismatic };

// The twelve part types of the appliance dataset semantics vocabulary.
enum class PartType { button, knob, lever, slider, door, lid, container, drawer, screen, handle, switch_, tray };

inline constexpr std::array<PartType, 12> kAllPartTypes = {
    PartType::button, PartType::knob,   PartType::lever,  PartType::slider,
    PartType::door,   PartType::lid,    PartType::container, PartType::drawer,
    PartType::screen, PartType::handle, PartType::switch_, PartType::tray};

enum class Category {
  microwave,
  oven,
  dishwasher,
  refrigerator,
  washing_machine,
  coffee_machine,
  blender,
  toaster,
  kettle,
  dispenser,
  printer,
};

inline constexpr std::array<Category, 11> kAllCategories = {
    Category::microwave,      Category::oven,    Category::dishwasher, Category::refrigerator,
    Category::washing_machine, Category::coffee_machine, Category::blender, Category::toaster,
    Category::kettle,         Category::dispenser, Category::printer};

std::string_view to_string(JointKind kind);
std::string_view to_string(PartType type);
std::string_view to_string(Category category);
std::optional<PartType> part_type_from_string(std::string_view label);
std::optional<Category> category_from_string(std::string_view label);

/// Open/Close parts: the only parts SetOpen and SetClose are legal on.
bool is_openable(PartType type);

struct JointSpec {
  std::string joint_id;
  JointKind kind = JointKind::revolute;
  Vec3 axis = Vec3::UnitZ();    // unit, model frame
  Vec3 origin = Vec3::Zero();   // meters, model frame
  double limit_lo = 0.0;        // radians or meters
  double limit_hi = 0.0;

  /// Joint value the part rests at before any manipulation.
  double rest_value() const;
};

/// Full motion range L of a joint.
double limit_range(const JointSpec& joint);

/// Rigid motion of a link when its joint moves from rest to `value`.
Eigen::Isometry3d joint_transform(const JointSpec& joint, double value);

struct PartSpec {
  std::string part_id;
  PartType part_type = PartType::button;
  std::string joint_id;
  Vec3 contact_point = Vec3::Zero();
  std::string geometry_ref;
  Aabb bounds;  // model frame at rest; empty when the link has no primitive visuals
};

struct ApplianceModel {
  std::string model_id;
  Category category = Category::microwave;
  std::vector<PartSpec> parts;
  std::vector<JointSpec> joints;
  Eigen::Isometry3d base_pose = Eigen::Isometry3d::Identity();
  std::vector<Aabb> body_boxes;  // static geometry, model frame

  const PartSpec& part(std::string_view part_id) const;
  const JointSpec& joint(std::string_view joint_id) const;
  const JointSpec& joint_of(const PartSpec& part) const { return joint(part.joint_id); }
  const PartSpec* find_part(std::string_view part_id) const;
  const JointSpec* find_joint(std::string_view joint_id) const;
  std::optional<std::size_t> part_index(std::string_view part_id) const;
  Aabb bounds() const;
};

struct ApplianceState {
  std::map<std::string, double> joint_values;

  static ApplianceState at_rest(const ApplianceModel& model);
  double value(std::string_view joint_id) const;
  bool operator==(const ApplianceState&) const = default;
};

}  // namespace manualkit
