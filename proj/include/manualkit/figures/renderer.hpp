#pragma once

#include "manualkit/figures/camera.hpp"

#include <opencv2/core.hpp>

#include <functional>
#include <string>
#include <vector>

namespace manualkit {

inline constexpr int kLabelBackground = -1;
inline constexpr int kLabelBody = -2;

/// What a renderer produces for one view. `labels` holds the index into
/// `part_ids` for part pixels, kLabelBody for static geometry and
/// kLabelBackground elsewhere.
struct RenderOutput {
  cv::Mat rgb;     // CV_8UC3, BGR order
  cv::Mat normal;  // CV_8UC3, camera-frame normal encoded as (n + 1) / 2
  cv::Mat labels;  // CV_32S
  cv::Mat depth;   // CV_32F meters along the view axis, +inf on background
  std::vector<std::string> part_ids;

  /// Pixels that belong to the appliance (body or part).
  cv::Mat silhouette() const;
  /// Binary mask of one part; empty mask when the part is not listed.
  cv::Mat part_mask(const std::string& part_id) const;
  int part_label(const std::string& part_id) const;
};

class Renderer {
 public:
  virtual ~Renderer() = default;
  virtual RenderOutput render(const ApplianceModel& model, const ApplianceState& state, const CameraPose& pose,
                              cv::Size size) = 0;
  virtual int max_concurrency() const { return 1; }
};

/// Z-buffered rasteriser for the box geometry of a model: parts follow their
/// joint values, the body stays put, shading is Lambertian.
class SchematicRenderer : public Renderer {
 public:
  RenderOutput render(const ApplianceModel& model, const ApplianceState& state, const CameraPose& pose,
                      cv::Size size) override;
  int max_concurrency() const override { return 64; }
};

/// Test double returning scripted outputs chosen by a callback.
class FixtureRenderer : public Renderer {
 public:
  using Script = std::function<RenderOutput(const ApplianceModel&, const ApplianceState&, const CameraPose&, cv::Size)>;
  explicit FixtureRenderer(Script script) : script_(std::move(script)) {}
  RenderOutput render(const ApplianceModel& model, const ApplianceState& state, const CameraPose& pose,
                      cv::Size size) override {
    ++calls_;
    return script_(model, state, pose, size);
  }
  int calls() const { return calls_; }

 private:
  Script script_;
  int calls_ = 0;
};

/// Boxes a part occupies at a joint value, in the model frame.
std::vector<std::array<Vec3, 8>> part_geometry(const ApplianceModel& model, const PartSpec& part, double joint_value);

}  // namespace manualkit
