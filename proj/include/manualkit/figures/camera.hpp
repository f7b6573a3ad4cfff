#pragma once

#include "manualkit/core/appliance.hpp"

#include <opencv2/core.hpp>

#include <vector>

namespace manualkit {

struct CameraPose {
  Vec3 position = Vec3(0, -2, 0);
  Vec3 look_at = Vec3::Zero();
  Vec3 up = Vec3::UnitZ();
  double fov_deg = 40.0;  // vertical

  /// Throws PreconditionViolated when up is parallel to the view direction
  /// or the pose is degenerate.
  void validate() const;
  Vec3 forward() const { return (look_at - position).normalized(); }
};

/// Pinhole projection for a pose and image size. Pixel (i, j) has its
/// center at continuous coordinate (i, j).
class Projector {
 public:
  Projector(const CameraPose& pose, cv::Size size);

  /// Camera-frame coordinates: x right, y up, z along the view direction.
  Vec3 to_camera(const Vec3& p) const;
  /// Image coordinates; only meaningful for points with positive depth.
  Vec2 project(const Vec3& p) const;
  double depth(const Vec3& p) const { return to_camera(p).z(); }
  /// World direction expressed in camera axes.
  Vec3 rotate_to_camera(const Vec3& d) const;
  double focal() const { return focal_; }
  cv::Size size() const { return size_; }
  const CameraPose& pose() const { return pose_; }

 private:
  CameraPose pose_;
  cv::Size size_;
  Vec3 right_, up_, fwd_;
  double focal_;
};

/// The 26 default candidates: 8 azimuths x 3 elevations plus the two
/// poles, on a sphere of 2.5x the bounding radius around the model center.
/// The first candidate looks at the front face (-y).
std::vector<CameraPose> candidate_poses(const ApplianceModel& model);

}  // namespace manualkit
