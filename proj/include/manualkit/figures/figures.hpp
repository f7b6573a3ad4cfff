#pragma once

#include "manualkit/annotation/annotation.hpp"
#include "manualkit/figures/camera.hpp"
#include "manualkit/figures/renderer.hpp"
#include "manualkit/kernels/kernels.hpp"

#include <opencv2/core.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace manualkit {

enum class FigureKind { cover, overview_diagram, control_panel, guidance };
enum class FigureStyle { rgb, sketch };
enum class GuidanceStrategy { text_only, closeup_states, motion_decomposition, contact_trajectory };

inline constexpr std::array<GuidanceStrategy, 4> kAllStrategies = {
    GuidanceStrategy::text_only, GuidanceStrategy::closeup_states, GuidanceStrategy::motion_decomposition,
    GuidanceStrategy::contact_trajectory};

std::string_view to_string(FigureKind kind);
std::string_view to_string(FigureStyle style);
std::string_view to_string(GuidanceStrategy strategy);
FigureKind figure_kind_from_string(std::string_view s);
FigureStyle figure_style_from_string(std::string_view s);
GuidanceStrategy guidance_strategy_from_string(std::string_view s);

struct PointLineAnnotation {
  std::string part_id;
  Vec2 anchor_px = Vec2::Zero();
  Vec2 label_px = Vec2::Zero();  // label box center
  std::string label_text;
  cv::Rect label_box;
};

struct FigureAsset {
  std::string asset_id;
  FigureKind kind = FigureKind::overview_diagram;
  FigureStyle style = FigureStyle::rgb;
  std::string image_ref;  // file name inside the figure directory; empty for text-only guidance
  std::string svg_ref;
  int width = 0;
  int height = 0;
  std::vector<PointLineAnnotation> annotations;
  std::optional<GuidanceStrategy> guidance_strategy;
  std::string part_id;  // guidance target
  std::string caption;
  std::string view;  // "main" or "panel<k>" for overview/panel figures
  ReviewStatus review_status = ReviewStatus::pending;

  /// Throws ValidationError when the kind's invariants do not hold.
  void validate() const;
};

json to_json(const FigureAsset& asset);
FigureAsset figure_from_json(const json& j);

// ---- view selection -------------------------------------------------------

struct RankedView {
  CameraPose pose;
  std::size_t candidate_index = 0;
  std::int64_t visible_pixels = 0;  // manipulable-part pixels
  int distinct_parts = 0;
};

/// Candidates sorted by visible part pixels, then distinct visible parts,
/// then candidate order. Throws NoVisiblePart when the best view shows none.
std::vector<RankedView> select_views(const ApplianceModel& model, const ApplianceState& state,
                                     const std::vector<CameraPose>& candidates, Renderer& renderer, cv::Size size);

// ---- control panel --------------------------------------------------------

struct PanelCluster {
  std::vector<std::string> member_part_ids;
  cv::Rect bbox_px;
};

double default_panel_eps(cv::Size size, double fraction = 0.06);

/// Density clustering of the projected centers of visible buttons and
/// knobs. Clusters with fewer than two members are dropped; each bbox is the
/// union of member mask boxes grown by a 10% margin, clipped to the image.
std::vector<PanelCluster> cluster_control_panel(const ApplianceModel& model, const RenderOutput& view,
                                                const Projector& projector, double eps_px, int min_pts);

// ---- point-line annotation ------------------------------------------------

struct AnnotatedImage {
  cv::Mat image;
  std::vector<PointLineAnnotation> annotations;
};

inline constexpr int kMaxLabelAttempts = 100;

/// Dot at each anchor, leader line to a label placed outside the silhouette,
/// greedy non-overlapping placement in part id order. Throws
/// PreconditionViolated for no parts or anchors outside the image and
/// LabelPlacementFailed after kMaxLabelAttempts tries for one label.
AnnotatedImage draw_point_line_annotation(const cv::Mat& image, const cv::Mat& silhouette,
                                          const std::map<std::string, Vec2>& anchors,
                                          const std::map<std::string, std::string>& labels);

/// Most interior pixel of a binary mask (distance-transform maximum).
std::optional<cv::Point> interior_anchor(const cv::Mat& mask);

/// Vector sidecar of an annotated image: the raster as <image>, then one
/// circle, line and text element per annotation.
std::string annotation_svg(const std::vector<PointLineAnnotation>& annotations, cv::Size size,
                           const std::string& image_href);

// ---- sketch ---------------------------------------------------------------

/// Black-on-white line drawing from Sobel edges of a normal map.
cv::Mat render_sketch(const cv::Mat& normal_map, double threshold = 80.0,
                      kernels::Exec exec = kernels::Exec::parallel);

// ---- guidance -------------------------------------------------------------

bool strategy_supported(const ApplianceModel& model, const PartSpec& part, GuidanceStrategy strategy);
std::vector<GuidanceStrategy> valid_strategies(const ApplianceModel& model, const PartSpec& part);

/// Camera along the joint axis for buttons, knobs, levers and drawers;
/// otherwise the perpendicular direction showing the most part pixels.
CameraPose guidance_camera(const ApplianceModel& model, const PartSpec& part, Renderer& renderer, cv::Size size);

struct GuidanceFigure {
  GuidanceStrategy strategy = GuidanceStrategy::text_only;
  cv::Mat image;  // empty for text_only
  std::string caption;
  CameraPose pose;
  std::vector<double> frame_values;     // joint value per tiled frame
  std::vector<Vec2> trajectory_px;      // contact path for contact_trajectory
};

/// `end_value` bounds the demonstrated motion (defaults to limit_hi), e.g.
/// the largest sampled rotation of a knob.
GuidanceFigure render_guidance(const ApplianceModel& model, const PartSpec& part, GuidanceStrategy strategy,
                               Renderer& renderer, cv::Size size, const std::string& function_name,
                               std::optional<double> end_value = std::nullopt);

/// Joint values the contact trajectory is sampled at: 10 degree steps for
/// revolute joints, ten equal steps for prismatic ones, end included.
std::vector<double> trajectory_samples(const JointSpec& joint, double end_value);

// ---- cover ----------------------------------------------------------------

std::string room_for_category(Category category);
std::string cover_prompt(Category category);

class BackgroundBackend {
 public:
  virtual ~BackgroundBackend() = default;
  virtual cv::Mat generate(const std::string& prompt, cv::Size size, std::uint64_t seed) = 0;
};

/// Mock text-to-image: a flat color picked from the room named in the prompt.
class FlatBackgroundBackend : public BackgroundBackend {
 public:
  cv::Mat generate(const std::string& prompt, cv::Size size, std::uint64_t seed) override;
};

struct CoverImage {
  cv::Mat image;
  std::string prompt;
};

CoverImage compose_cover(const cv::Mat& overview, const cv::Mat& silhouette, Category category,
                         BackgroundBackend& background, std::uint64_t seed);

// ---- per-instance figure set ----------------------------------------------

struct FigureConfig {
  cv::Size view_size{800, 600};
  cv::Size guidance_size{320, 240};
  double eps_fraction = 0.06;
  int min_pts = 2;
};

/// The overview used during annotation: best view with numeric ID labels
/// ("1".."n" in part order) drawn next to each visible part.
struct OverviewRender {
  RenderOutput view;
  RankedView ranked;
  AnnotatedImage annotated;
};

OverviewRender render_overview(const ApplianceModel& model, Renderer& renderer,
                               const std::map<std::string, std::string>& labels, const FigureConfig& config = {});

/// Every figure a manual for this instance may use, written under `dir`
/// as content-addressed PNG and SVG files. Guidance figures cover every
/// valid strategy of every part; styles pick among them later.
std::vector<FigureAsset> build_instance_figures(const ApplianceModel& model, const ApplianceInstance& instance,
                                                Renderer& renderer, BackgroundBackend& background,
                                                const std::filesystem::path& dir, std::uint64_t seed,
                                                const FigureConfig& config = {});

}  // namespace manualkit
