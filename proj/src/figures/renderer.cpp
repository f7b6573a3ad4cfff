#include "manualkit/figures/renderer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace manualkit {

namespace {

// Corner indices of the six faces, counter-clockwise seen from outside.
// Corner k has x from bit 0, y from bit 1, z from bit 2 (see Aabb::corners).
constexpr int kFaces[6][4] = {
    {0, 2, 6, 4},  // -x
    {1, 5, 7, 3},  // +x
    {0, 4, 5, 1},  // -y
    {2, 3, 7, 6},  // +y
    {0, 1, 3, 2},  // -z
    {4, 6, 7, 5},  // +z
};

cv::Vec3b part_color(PartType type) {
  switch (type) {
    case PartType::door:
    case PartType::lid: return {200, 200, 190};
    case PartType::button:
    case PartType::switch_: return {70, 70, 200};
    case PartType::knob:
    case PartType::lever: return {60, 150, 60};
    case PartType::drawer:
    case PartType::container:
    case PartType::tray: return {170, 130, 80};
    default: return {150, 110, 160};
  }
}

struct Target {
  cv::Mat& rgb;
  cv::Mat& normal;
  cv::Mat& labels;
  cv::Mat& depth;
};

void raster_triangle(const Projector& proj, const std::array<Vec3, 3>& tri, const Vec3& n_world, int label,
                     cv::Vec3b color, Target& t) {
  std::array<Vec3, 3> cam;
  for (int i = 0; i < 3; ++i) {
    cam[i] = proj.to_camera(tri[i]);
    if (cam[i].z() <= 1e-4) return;  // behind or at the camera; poses keep the model in front
  }
  std::array<Vec2, 3> s;
  for (int i = 0; i < 3; ++i) s[i] = proj.project(tri[i]);
  const double area = (s[1] - s[0]).x() * (s[2] - s[0]).y() - (s[1] - s[0]).y() * (s[2] - s[0]).x();
  if (std::abs(area) < 1e-12) return;

  const Vec3 n_cam = proj.rotate_to_camera(n_world);
  // Camera-facing normals have negative z in camera coordinates; encode with z towards the viewer.
  const Vec3 n_enc(n_cam.x(), n_cam.y(), -n_cam.z());
  const cv::Vec3b ncol(cv::saturate_cast<uchar>((n_enc.z() * 0.5 + 0.5) * 255.0),
                       cv::saturate_cast<uchar>((n_enc.y() * 0.5 + 0.5) * 255.0),
                       cv::saturate_cast<uchar>((n_enc.x() * 0.5 + 0.5) * 255.0));
  const Vec3 light = Vec3(-0.3, 0.5, 0.8).normalized();
  const double shade = 0.4 + 0.6 * std::max(0.0, n_enc.dot(light));
  const cv::Vec3b shaded(cv::saturate_cast<uchar>(color[0] * shade), cv::saturate_cast<uchar>(color[1] * shade),
                         cv::saturate_cast<uchar>(color[2] * shade));

  const int w = t.rgb.cols, h = t.rgb.rows;
  const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({s[0].x(), s[1].x(), s[2].x()}))));
  const int x1 = std::min(w - 1, static_cast<int>(std::floor(std::max({s[0].x(), s[1].x(), s[2].x()}))));
  const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({s[0].y(), s[1].y(), s[2].y()}))));
  const int y1 = std::min(h - 1, static_cast<int>(std::floor(std::max({s[0].y(), s[1].y(), s[2].y()}))));
  const double inv_z[3] = {1.0 / cam[0].z(), 1.0 / cam[1].z(), 1.0 / cam[2].z()};
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p(x, y);
      double b[3];
      for (int i = 0; i < 3; ++i) {
        const Vec2& a = s[(i + 1) % 3];
        const Vec2& c = s[(i + 2) % 3];
        b[i] = ((c - a).x() * (p - a).y() - (c - a).y() * (p - a).x()) / area;
      }
      // Half-open edge rule keeps shared edges from being drawn twice.
      if (b[0] < 0 || b[1] < 0 || b[2] < 0) continue;
      const double z = 1.0 / (b[0] * inv_z[0] + b[1] * inv_z[1] + b[2] * inv_z[2]);
      float& d = t.depth.at<float>(y, x);
      if (z >= d - 1e-6) continue;
      d = static_cast<float>(z);
      t.labels.at<int>(y, x) = label;
      t.rgb.at<cv::Vec3b>(y, x) = shaded;
      t.normal.at<cv::Vec3b>(y, x) = ncol;
    }
  }
}

void raster_box(const Projector& proj, const std::array<Vec3, 8>& c, int label, cv::Vec3b color, Target& t) {
  const Vec3 center = [&] {
    Vec3 s = Vec3::Zero();
    for (const auto& p : c) s += p;
    return Vec3(s / 8.0);
  }();
  for (const auto& f : kFaces) {
    const Vec3 a = c[f[0]], b = c[f[1]], cc = c[f[2]], d = c[f[3]];
    Vec3 n = (b - a).cross(d - a);
    if (n.norm() < 1e-15) n = (cc - b).cross(a - b);
    if (n.norm() < 1e-15) continue;
    n.normalize();
    if (n.dot(0.25 * (a + b + cc + d) - center) < 0) n = -n;  // outward
    if (n.dot(proj.pose().position - a) <= 0) continue;        // back face
    raster_triangle(proj, {a, b, cc}, n, label, color, t);
    raster_triangle(proj, {a, cc, d}, n, label, color, t);
  }
}

}  // namespace

cv::Mat RenderOutput::silhouette() const {
  cv::Mat out(labels.size(), CV_8U);
  for (int y = 0; y < labels.rows; ++y) {
    for (int x = 0; x < labels.cols; ++x) out.at<uchar>(y, x) = labels.at<int>(y, x) != kLabelBackground ? 255 : 0;
  }
  return out;
}

int RenderOutput::part_label(const std::string& part_id) const {
  auto it = std::find(part_ids.begin(), part_ids.end(), part_id);
  return it == part_ids.end() ? std::numeric_limits<int>::min() : static_cast<int>(it - part_ids.begin());
}

cv::Mat RenderOutput::part_mask(const std::string& part_id) const {
  cv::Mat out = cv::Mat::zeros(labels.size(), CV_8U);
  const int l = part_label(part_id);
  if (l < 0) return out;
  for (int y = 0; y < labels.rows; ++y) {
    for (int x = 0; x < labels.cols; ++x) {
      if (labels.at<int>(y, x) == l) out.at<uchar>(y, x) = 255;
    }
  }
  return out;
}

std::vector<std::array<Vec3, 8>> part_geometry(const ApplianceModel& model, const PartSpec& part, double joint_value) {
  Aabb box = part.bounds;
  if (box.empty()) {
    box.extend(part.contact_point - Vec3::Constant(0.01));
    box.extend(part.contact_point + Vec3::Constant(0.01));
  }
  const auto tf = joint_transform(model.joint_of(part), joint_value);
  std::array<Vec3, 8> corners = box.corners();
  for (auto& c : corners) c = tf * c;
  return {corners};
}

RenderOutput SchematicRenderer::render(const ApplianceModel& model, const ApplianceState& state, const CameraPose& pose,
                                       cv::Size size) {
  const Projector proj(pose, size);
  RenderOutput out;
  out.rgb = cv::Mat(size, CV_8UC3, cv::Scalar(255, 255, 255));
  out.normal = cv::Mat(size, CV_8UC3, cv::Scalar(128, 128, 128));
  out.labels = cv::Mat(size, CV_32S, cv::Scalar(kLabelBackground));
  out.depth = cv::Mat(size, CV_32F, cv::Scalar(std::numeric_limits<float>::infinity()));
  Target t{out.rgb, out.normal, out.labels, out.depth};

  for (const auto& box : model.body_boxes) {
    std::array<Vec3, 8> c = box.corners();
    for (auto& p : c) p = model.base_pose * p;
    raster_box(proj, c, kLabelBody, {225, 225, 225}, t);
  }
  for (std::size_t i = 0; i < model.parts.size(); ++i) {
    const PartSpec& part = model.parts[i];
    out.part_ids.push_back(part.part_id);
    for (auto c : part_geometry(model, part, state.value(part.joint_id))) {
      for (auto& p : c) p = model.base_pose * p;
      raster_box(proj, c, static_cast<int>(i), part_color(part.part_type), t);
    }
  }
  return out;
}

}  // namespace manualkit
