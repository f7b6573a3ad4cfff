#include "manualkit/figures/camera.hpp"

#include "manualkit/core/error.hpp"

#include <cmath>

namespace manualkit {

void CameraPose::validate() const {
  const Vec3 f = look_at - position;
  if (f.norm() < 1e-12) throw Error(Errc::precondition_violated, "camera position equals look_at");
  if (up.norm() < 1e-12 || f.normalized().cross(up.normalized()).norm() < 1e-9) {
    throw Error(Errc::precondition_violated, "camera up vector is parallel to the view direction");
  }
  if (!(fov_deg > 0.0 && fov_deg < 179.0)) throw Error(Errc::precondition_violated, "camera fov out of range");
}

Projector::Projector(const CameraPose& pose, cv::Size size) : pose_(pose), size_(size) {
  pose.validate();
  fwd_ = pose.forward();
  right_ = fwd_.cross(pose.up).normalized();
  up_ = right_.cross(fwd_);
  focal_ = 0.5 * size.height / std::tan(deg2rad(pose.fov_deg) / 2.0);
}

Vec3 Projector::to_camera(const Vec3& p) const {
  const Vec3 d = p - pose_.position;
  return {d.dot(right_), d.dot(up_), d.dot(fwd_)};
}

Vec3 Projector::rotate_to_camera(const Vec3& d) const { return {d.dot(right_), d.dot(up_), d.dot(fwd_)}; }

Vec2 Projector::project(const Vec3& p) const {
  const Vec3 c = to_camera(p);
  return {(size_.width - 1) / 2.0 + focal_ * c.x() / c.z(), (size_.height - 1) / 2.0 - focal_ * c.y() / c.z()};
}

std::vector<CameraPose> candidate_poses(const ApplianceModel& model) {
  const Aabb box = model.bounds();
  const Vec3 center = box.empty() ? Vec3::Zero() : box.center();
  const double radius = box.empty() ? 0.5 : std::max(0.05, 0.5 * box.extent().norm());
  const double r = 2.5 * radius;
  std::vector<CameraPose> out;
  for (double elev_deg : {0.0, 30.0, -30.0}) {
    for (int k = 0; k < 8; ++k) {
      // Azimuth 0 is the front (-y); increasing azimuth turns towards +x.
      const double az = deg2rad(45.0 * k);
      const double el = deg2rad(elev_deg);
      const Vec3 dir(std::sin(az) * std::cos(el), -std::cos(az) * std::cos(el), std::sin(el));
      out.push_back({center + r * dir, center, Vec3::UnitZ(), 50.0});
    }
  }
  out.push_back({center + r * Vec3::UnitZ(), center, Vec3::UnitY(), 50.0});
  out.push_back({center - r * Vec3::UnitZ(), center, Vec3::UnitY(), 50.0});
  return out;
}

}  // namespace manualkit
