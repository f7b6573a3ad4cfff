#include "manualkit/figures/figures.hpp"

#include "manualkit/core/error.hpp"
#include "manualkit/image/io.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace manualkit {

namespace {

constexpr int kFont = cv::FONT_HERSHEY_SIMPLEX;
constexpr double kFontScale = 0.45;
constexpr int kLabelPad = 3;

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

cv::Size label_size(const std::string& text) {
  int baseline = 0;
  const cv::Size t = cv::getTextSize(text, kFont, kFontScale, 1, &baseline);
  return {t.width + 2 * kLabelPad, t.height + baseline + 2 * kLabelPad};
}

cv::Point2d closest_on_rect(const cv::Rect& r, const Vec2& p) {
  return {std::clamp(p.x(), static_cast<double>(r.x), static_cast<double>(r.x + r.width - 1)),
          std::clamp(p.y(), static_cast<double>(r.y), static_cast<double>(r.y + r.height - 1))};
}

void draw_annotation(cv::Mat& img, const PointLineAnnotation& a) {
  const cv::Point anchor(static_cast<int>(std::lround(a.anchor_px.x())), static_cast<int>(std::lround(a.anchor_px.y())));
  const cv::Point2d end = closest_on_rect(a.label_box, a.anchor_px);
  cv::line(img, anchor, cv::Point(static_cast<int>(std::lround(end.x)), static_cast<int>(std::lround(end.y))),
           cv::Scalar(40, 40, 40), 1, cv::LINE_8);
  cv::circle(img, anchor, 3, cv::Scalar(0, 0, 220), cv::FILLED, cv::LINE_8);
  cv::rectangle(img, a.label_box, cv::Scalar(255, 255, 255), cv::FILLED);
  cv::rectangle(img, a.label_box, cv::Scalar(40, 40, 40), 1);
  int baseline = 0;
  cv::getTextSize(a.label_text, kFont, kFontScale, 1, &baseline);
  cv::putText(img, a.label_text, cv::Point(a.label_box.x + kLabelPad, a.label_box.y + a.label_box.height - kLabelPad - baseline),
              kFont, kFontScale, cv::Scalar(0, 0, 0), 1, cv::LINE_8);
}

bool rect_inside(const cv::Rect& r, cv::Size size) {
  return r.x >= 0 && r.y >= 0 && r.x + r.width <= size.width && r.y + r.height <= size.height;
}

cv::Mat to_bgr(const cv::Mat& img) {
  if (img.channels() == 3) return img.clone();
  cv::Mat out;
  cv::cvtColor(img, out, cv::COLOR_GRAY2BGR);
  return out;
}

cv::Mat tile_horizontal(const std::vector<cv::Mat>& frames) {
  cv::Mat out;
  cv::hconcat(frames, out);
  return out;
}

Aabb swept_bounds(const ApplianceModel& model, const PartSpec& part) {
  const JointSpec& j = model.joint_of(part);
  Aabb box;
  for (double v : {j.limit_lo, j.rest_value(), j.limit_hi, 0.5 * (j.limit_lo + j.limit_hi)}) {
    for (const auto& corners : part_geometry(model, part, v)) {
      for (const auto& c : corners) box.extend(model.base_pose * c);
    }
  }
  return box;
}

Vec3 any_perpendicular(const Vec3& axis) {
  const Vec3 trial = std::abs(axis.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  return axis.cross(trial).normalized();
}

std::string guidance_caption(const PartSpec& part, const std::string& name, GuidanceStrategy strategy) {
  std::string how;
  switch (part.part_type) {
    case PartType::button: how = "Press the " + name + " briefly to select its function."; break;
    case PartType::knob: how = "Turn the " + name + " until the marker points at the required setting."; break;
    case PartType::door:
    case PartType::lid: how = "Pull the " + name + " open by its edge and push it firmly to close."; break;
    case PartType::drawer:
    case PartType::tray:
    case PartType::container:
    case PartType::slider: how = "Slide the " + name + " out and push it back in until it stops."; break;
    case PartType::lever:
    case PartType::switch_: how = "Move the " + name + " to the required position."; break;
    default: how = "Operate the " + name + " by hand."; break;
  }
  switch (strategy) {
    case GuidanceStrategy::closeup_states: return how + " The images show its rest and end positions.";
    case GuidanceStrategy::motion_decomposition: return how + " The sequence shows the motion step by step.";
    case GuidanceStrategy::contact_trajectory: return how + " The arrow traces the path of your hand.";
    default: return how;
  }
}

}  // namespace

std::string_view to_string(FigureKind kind) {
  switch (kind) {
    case FigureKind::cover: return "cover";
    case FigureKind::overview_diagram: return "overview_diagram";
    case FigureKind::control_panel: return "control_panel";
    case FigureKind::guidance: return "guidance";
  }
  return "cover";
}

std::string_view to_string(FigureStyle style) { return style == FigureStyle::rgb ? "rgb" : "sketch"; }

std::string_view to_string(GuidanceStrategy strategy) {
  switch (strategy) {
    case GuidanceStrategy::text_only: return "text_only";
    case GuidanceStrategy::closeup_states: return "closeup_states";
    case GuidanceStrategy::motion_decomposition: return "motion_decomposition";
    case GuidanceStrategy::contact_trajectory: return "contact_trajectory";
  }
  return "text_only";
}

FigureKind figure_kind_from_string(std::string_view s) {
  for (auto k : {FigureKind::cover, FigureKind::overview_diagram, FigureKind::control_panel, FigureKind::guidance}) {
    if (to_string(k) == s) return k;
  }
  throw Error(Errc::malformed_document, "unknown figure kind '" + std::string(s) + "'");
}

FigureStyle figure_style_from_string(std::string_view s) {
  if (s == "rgb") return FigureStyle::rgb;
  if (s == "sketch") return FigureStyle::sketch;
  throw Error(Errc::malformed_document, "unknown figure style '" + std::string(s) + "'");
}

GuidanceStrategy guidance_strategy_from_string(std::string_view s) {
  for (auto g : kAllStrategies) {
    if (to_string(g) == s) return g;
  }
  throw Error(Errc::malformed_document, "unknown guidance strategy '" + std::string(s) + "'");
}

void FigureAsset::validate() const {
  if (kind == FigureKind::guidance) {
    if (!guidance_strategy) throw Error(Errc::validation_error, asset_id + ": guidance figure without a strategy");
    if (*guidance_strategy != GuidanceStrategy::text_only && image_ref.empty()) {
      throw Error(Errc::validation_error, asset_id + ": guidance figure without an image");
    }
  } else {
    if (guidance_strategy) throw Error(Errc::validation_error, asset_id + ": only guidance figures carry a strategy");
    if (image_ref.empty()) throw Error(Errc::validation_error, asset_id + ": figure without an image");
  }
  if ((kind == FigureKind::overview_diagram || kind == FigureKind::control_panel) && annotations.empty()) {
    throw Error(Errc::validation_error, asset_id + ": diagram annotates no part");
  }
}

json to_json(const FigureAsset& a) {
  json anns = json::array();
  for (const auto& p : a.annotations) {
    anns.push_back({{"part_id", p.part_id},
                    {"anchor_px", {p.anchor_px.x(), p.anchor_px.y()}},
                    {"label_px", {p.label_px.x(), p.label_px.y()}},
                    {"label_text", p.label_text},
                    {"label_box", {p.label_box.x, p.label_box.y, p.label_box.width, p.label_box.height}}});
  }
  json j = {{"asset_id", a.asset_id},
            {"kind", to_string(a.kind)},
            {"style", to_string(a.style)},
            {"image_ref", a.image_ref},
            {"svg_ref", a.svg_ref},
            {"width", a.width},
            {"height", a.height},
            {"annotations", anns},
            {"guidance_strategy", a.guidance_strategy ? json(to_string(*a.guidance_strategy)) : json(nullptr)},
            {"part_id", a.part_id},
            {"caption", a.caption},
            {"view", a.view},
            {"review_status", to_string(a.review_status)}};
  return j;
}

FigureAsset figure_from_json(const json& j) {
  try {
    FigureAsset a;
    a.asset_id = j.at("asset_id").get<std::string>();
    a.kind = figure_kind_from_string(j.at("kind").get<std::string>());
    a.style = figure_style_from_string(j.at("style").get<std::string>());
    a.image_ref = j.value("image_ref", "");
    a.svg_ref = j.value("svg_ref", "");
    a.width = j.value("width", 0);
    a.height = j.value("height", 0);
    for (const auto& p : j.at("annotations")) {
      PointLineAnnotation ann;
      ann.part_id = p.at("part_id").get<std::string>();
      ann.anchor_px = Vec2(p.at("anchor_px")[0].get<double>(), p.at("anchor_px")[1].get<double>());
      ann.label_px = Vec2(p.at("label_px")[0].get<double>(), p.at("label_px")[1].get<double>());
      ann.label_text = p.at("label_text").get<std::string>();
      const auto& b = p.at("label_box");
      ann.label_box = cv::Rect(b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>());
      a.annotations.push_back(std::move(ann));
    }
    if (j.contains("guidance_strategy") && j.at("guidance_strategy").is_string()) {
      a.guidance_strategy = guidance_strategy_from_string(j.at("guidance_strategy").get<std::string>());
    }
    a.part_id = j.value("part_id", "");
    a.caption = j.value("caption", "");
    a.view = j.value("view", "");
    a.review_status = review_status_from_string(j.value("review_status", "pending"));
    return a;
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_document, std::string("figure manifest: ") + e.what());
  }
}

std::vector<RankedView> select_views(const ApplianceModel& model, const ApplianceState& state,
                                     const std::vector<CameraPose>& candidates, Renderer& renderer, cv::Size size) {
  if (candidates.empty()) throw Error(Errc::precondition_violated, "no candidate camera poses");
  std::vector<RankedView> ranked(candidates.size());
  auto score = [&](std::size_t i) {
    const RenderOutput r = renderer.render(model, state, candidates[i], size);
    const auto stats = kernels::label_stats(r.labels, static_cast<int>(r.part_ids.size()), kernels::Exec::serial);
    RankedView v{candidates[i], i, 0, 0};
    for (const auto& s : stats) {
      v.visible_pixels += s.count;
      v.distinct_parts += s.count > 0;
    }
    ranked[i] = v;
  };
  const int n = static_cast<int>(candidates.size());
  if (renderer.max_concurrency() > 1) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) score(static_cast<std::size_t>(i));
  } else {
    for (int i = 0; i < n; ++i) score(static_cast<std::size_t>(i));
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedView& a, const RankedView& b) {
    if (a.visible_pixels != b.visible_pixels) return a.visible_pixels > b.visible_pixels;
    if (a.distinct_parts != b.distinct_parts) return a.distinct_parts > b.distinct_parts;
    return a.candidate_index < b.candidate_index;
  });
  if (ranked.front().visible_pixels == 0) throw Error(Errc::no_visible_part, "no candidate view shows a manipulable part");
  return ranked;
}

double default_panel_eps(cv::Size size, double fraction) {
  return fraction * std::hypot(static_cast<double>(size.width), static_cast<double>(size.height));
}

std::vector<PanelCluster> cluster_control_panel(const ApplianceModel& model, const RenderOutput& view,
                                                const Projector& projector, double eps_px, int min_pts) {
  const auto stats = kernels::label_stats(view.labels, static_cast<int>(view.part_ids.size()));
  std::vector<cv::Point2d> points;
  std::vector<std::size_t> member_index;  // into view.part_ids
  for (std::size_t i = 0; i < view.part_ids.size(); ++i) {
    const PartSpec* part = model.find_part(view.part_ids[i]);
    if (!part || (part->part_type != PartType::button && part->part_type != PartType::knob)) continue;
    if (stats[i].count == 0) continue;
    const Vec3 center = model.base_pose * (part->bounds.empty() ? part->contact_point : part->bounds.center());
    const Vec2 p = projector.project(center);
    points.emplace_back(p.x(), p.y());
    member_index.push_back(i);
  }
  const auto labels = kernels::dbscan(points, eps_px, min_pts);
  const int num = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<PanelCluster> out;
  for (int c = 0; c < num; ++c) {
    PanelCluster cluster;
    cv::Rect box;
    for (std::size_t k = 0; k < labels.size(); ++k) {
      if (labels[k] != c) continue;
      cluster.member_part_ids.push_back(view.part_ids[member_index[k]]);
      const cv::Rect b = stats[member_index[k]].bbox();
      box = box.area() == 0 ? b : (box | b);
    }
    if (cluster.member_part_ids.size() < 2) continue;
    const int mx = static_cast<int>(std::ceil(0.1 * box.width)), my = static_cast<int>(std::ceil(0.1 * box.height));
    cluster.bbox_px = cv::Rect(box.x - mx, box.y - my, box.width + 2 * mx, box.height + 2 * my) &
                      cv::Rect(0, 0, view.labels.cols, view.labels.rows);
    out.push_back(std::move(cluster));
  }
  return out;
}

std::optional<cv::Point> interior_anchor(const cv::Mat& mask) {
  if (mask.empty() || cv::countNonZero(mask) == 0) return std::nullopt;
  cv::Mat padded;
  cv::copyMakeBorder(mask, padded, 1, 1, 1, 1, cv::BORDER_CONSTANT, cv::Scalar(0));
  cv::Mat dist;
  cv::distanceTransform(padded, dist, cv::DIST_L2, cv::DIST_MASK_PRECISE);
  double max_v = 0;
  cv::minMaxLoc(dist, nullptr, &max_v);
  // The maximum is often a ridge; take the ridge pixel nearest its mean.
  std::vector<cv::Point> ridge;
  cv::findNonZero(dist >= static_cast<float>(max_v) - 1e-4f, ridge);
  cv::Point2d mean(0, 0);
  for (const auto& p : ridge) mean += cv::Point2d(p.x, p.y);
  mean *= 1.0 / static_cast<double>(ridge.size());
  cv::Point best = ridge.front();
  double best_d = 1e300;
  for (const auto& p : ridge) {
    const double d = std::hypot(p.x - mean.x, p.y - mean.y);
    if (d < best_d) best_d = d, best = p;
  }
  return cv::Point(best.x - 1, best.y - 1);
}

AnnotatedImage draw_point_line_annotation(const cv::Mat& image, const cv::Mat& silhouette,
                                          const std::map<std::string, Vec2>& anchors,
                                          const std::map<std::string, std::string>& labels) {
  if (anchors.empty()) throw Error(Errc::precondition_violated, "a point-line figure needs at least one part");
  const cv::Size size = image.size();
  for (const auto& [part, a] : anchors) {
    if (a.x() < 0 || a.y() < 0 || a.x() > size.width - 1 || a.y() > size.height - 1) {
      throw Error(Errc::precondition_violated, "anchor of " + part + " lies outside the image");
    }
    if (!labels.count(part)) throw Error(Errc::precondition_violated, "no label text for " + part);
  }
  cv::Mat sil = silhouette.empty() ? cv::Mat::zeros(size, CV_8U) : silhouette;
  // Outward direction is measured from the silhouette centroid.
  Vec2 center((size.width - 1) / 2.0, (size.height - 1) / 2.0);
  const cv::Moments mom = cv::moments(sil, true);
  if (mom.m00 > 0) center = Vec2(mom.m10 / mom.m00, mom.m01 / mom.m00);

  AnnotatedImage out{to_bgr(image), {}};
  std::vector<cv::Rect> placed;
  for (const auto& [part, anchor] : anchors) {
    const std::string& text = labels.at(part);
    const cv::Size box = label_size(text);
    Vec2 dir = anchor - center;
    const double theta = dir.norm() < 1e-9 ? -kPi / 2 : std::atan2(dir.y(), dir.x());
    static const double kOffsets[] = {0.0, kPi / 6, -kPi / 6, kPi / 3, -kPi / 3, kPi / 2, -kPi / 2};
    bool done = false;
    int attempts = 0;
    for (int ring = 0; !done && attempts < kMaxLabelAttempts; ++ring) {
      const double dist = 50.0 + 45.0 * ring;
      for (double off : kOffsets) {
        for (double flip : {0.0, kPi}) {
          if (done || attempts >= kMaxLabelAttempts) break;
          ++attempts;
          const double a = theta + flip + off;
          const Vec2 c = anchor + dist * Vec2(std::cos(a), std::sin(a));
          const cv::Rect r(static_cast<int>(std::lround(c.x() - box.width / 2.0)),
                           static_cast<int>(std::lround(c.y() - box.height / 2.0)), box.width, box.height);
          if (!rect_inside(r, size)) continue;
          if (std::any_of(placed.begin(), placed.end(), [&](const cv::Rect& o) { return (o & r).area() > 0; })) continue;
          if (cv::countNonZero(sil(r)) > 0) continue;
          placed.push_back(r);
          out.annotations.push_back({part, anchor, Vec2(r.x + r.width / 2.0, r.y + r.height / 2.0), text, r});
          done = true;
        }
      }
    }
    if (!done) {
      throw Error(Errc::label_placement_failed,
                  "no free spot for the label of " + part + " after " + std::to_string(kMaxLabelAttempts) + " attempts");
    }
  }
  for (const auto& a : out.annotations) draw_annotation(out.image, a);
  return out;
}

std::string annotation_svg(const std::vector<PointLineAnnotation>& annotations, cv::Size size,
                           const std::string& image_href) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\"" << size.width
     << "\" height=\"" << size.height << "\" viewBox=\"0 0 " << size.width << " " << size.height << "\">\n";
  if (!image_href.empty()) {
    os << "  <image xlink:href=\"" << xml_escape(image_href) << "\" x=\"0\" y=\"0\" width=\"" << size.width
       << "\" height=\"" << size.height << "\"/>\n";
  }
  for (const auto& a : annotations) {
    const cv::Point2d end = closest_on_rect(a.label_box, a.anchor_px);
    os << "  <g data-part=\"" << xml_escape(a.part_id) << "\">\n";
    os << "    <line x1=\"" << a.anchor_px.x() << "\" y1=\"" << a.anchor_px.y() << "\" x2=\"" << end.x << "\" y2=\""
       << end.y << "\" stroke=\"#282828\"/>\n";
    os << "    <circle cx=\"" << a.anchor_px.x() << "\" cy=\"" << a.anchor_px.y() << "\" r=\"3\" fill=\"#dc0000\"/>\n";
    os << "    <rect x=\"" << a.label_box.x << "\" y=\"" << a.label_box.y << "\" width=\"" << a.label_box.width
       << "\" height=\"" << a.label_box.height << "\" fill=\"white\" stroke=\"#282828\"/>\n";
    os << "    <text x=\"" << a.label_box.x + kLabelPad << "\" y=\"" << a.label_box.y + a.label_box.height - kLabelPad - 2
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(a.label_text) << "</text>\n";
    os << "  </g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

cv::Mat render_sketch(const cv::Mat& normal_map, double threshold, kernels::Exec exec) {
  const cv::Mat mag = kernels::sobel_magnitude(normal_map, exec);
  cv::Mat out(normal_map.size(), CV_8U);
  for (int y = 0; y < mag.rows; ++y) {
    const float* m = mag.ptr<float>(y);
    uchar* o = out.ptr<uchar>(y);
    for (int x = 0; x < mag.cols; ++x) o[x] = m[x] > threshold ? 0 : 255;
  }
  return out;
}

bool strategy_supported(const ApplianceModel& model, const PartSpec& part, GuidanceStrategy strategy) {
  const JointSpec* joint = model.find_joint(part.joint_id);
  if (!joint) return false;
  const bool movable = limit_range(*joint) > 1e-9;
  switch (strategy) {
    case GuidanceStrategy::text_only: return true;
    case GuidanceStrategy::closeup_states:
    case GuidanceStrategy::motion_decomposition: return movable;
    case GuidanceStrategy::contact_trajectory: return movable && part.contact_point.allFinite();
  }
  return false;
}

std::vector<GuidanceStrategy> valid_strategies(const ApplianceModel& model, const PartSpec& part) {
  std::vector<GuidanceStrategy> out;
  for (auto s : kAllStrategies) {
    if (strategy_supported(model, part, s)) out.push_back(s);
  }
  return out;
}

CameraPose guidance_camera(const ApplianceModel& model, const PartSpec& part, Renderer& renderer, cv::Size size) {
  const JointSpec& joint = model.joint_of(part);
  const Aabb swept = swept_bounds(model, part);
  const Vec3 target = swept.center();
  const double radius = std::max(0.03, 0.5 * swept.extent().norm());
  const double fov = 40.0;
  const double dist = 1.4 * radius / std::tan(deg2rad(fov) / 2.0);
  const Aabb all = model.bounds();
  const Vec3 model_center = all.empty() ? target : Vec3(model.base_pose * all.center());
  const Vec3 axis = (model.base_pose.linear() * joint.axis).normalized();

  const bool along_axis = part.part_type == PartType::button || part.part_type == PartType::knob ||
                          part.part_type == PartType::lever || part.part_type == PartType::drawer;
  auto make_pose = [&](const Vec3& dir) {
    const Vec3 up = std::abs(dir.normalized().dot(Vec3::UnitZ())) > 0.99 ? Vec3::UnitY() : Vec3::UnitZ();
    return CameraPose{target + dist * dir.normalized(), target, up, fov};
  };
  if (along_axis) {
    // Look from the side of the axis that faces away from the appliance body.
    const double side = (target - model_center).dot(axis);
    return make_pose(side >= 0 ? axis : Vec3(-axis));
  }
  const Vec3 e1 = any_perpendicular(axis);
  const Vec3 e2 = axis.cross(e1).normalized();
  ApplianceState rest = ApplianceState::at_rest(model);
  CameraPose best = make_pose(e1);
  std::int64_t best_px = -1;
  for (int k = 0; k < 8; ++k) {
    const double a = deg2rad(45.0 * k);
    const CameraPose pose = make_pose(std::cos(a) * e1 + std::sin(a) * e2);
    const RenderOutput r = renderer.render(model, rest, pose, size);
    const int label = r.part_label(part.part_id);
    std::int64_t px = 0;
    if (label >= 0) px = cv::countNonZero(r.labels == label);
    if (px > best_px) {
      best_px = px;
      best = pose;
    }
  }
  return best;
}

std::vector<double> trajectory_samples(const JointSpec& joint, double end_value) {
  const double start = joint.rest_value();
  std::vector<double> out;
  if (joint.kind == JointKind::revolute) {
    const double step = deg2rad(10.0);
    const int n = static_cast<int>(std::floor(std::abs(end_value - start) / step + 1e-9));
    const double sign = end_value >= start ? 1.0 : -1.0;
    for (int i = 0; i <= n; ++i) out.push_back(start + sign * i * step);
  } else {
    for (int i = 0; i < 10; ++i) out.push_back(start + (end_value - start) * i / 10.0);
  }
  if (out.empty() || std::abs(out.back() - end_value) > 1e-12) out.push_back(end_value);
  return out;
}

GuidanceFigure render_guidance(const ApplianceModel& model, const PartSpec& part, GuidanceStrategy strategy,
                               Renderer& renderer, cv::Size size, const std::string& function_name,
                               std::optional<double> end_value) {
  if (!strategy_supported(model, part, strategy)) {
    throw Error(Errc::strategy_unsupported_for_part,
                std::string(to_string(strategy)) + " cannot show part " + part.part_id);
  }
  GuidanceFigure fig;
  fig.strategy = strategy;
  fig.caption = guidance_caption(part, function_name, strategy);
  if (strategy == GuidanceStrategy::text_only) return fig;

  const JointSpec& joint = model.joint_of(part);
  fig.pose = guidance_camera(model, part, renderer, size);
  ApplianceState state = ApplianceState::at_rest(model);
  auto frame_at = [&](double v) {
    ApplianceState s = state;
    s.joint_values[joint.joint_id] = v;
    return renderer.render(model, s, fig.pose, size).rgb;
  };

  if (strategy == GuidanceStrategy::closeup_states) {
    fig.frame_values = {joint.limit_lo, joint.limit_hi};
  } else if (strategy == GuidanceStrategy::motion_decomposition) {
    for (double f : {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0}) fig.frame_values.push_back(joint.limit_lo + f * limit_range(joint));
  }
  if (!fig.frame_values.empty()) {
    std::vector<cv::Mat> frames;
    for (double v : fig.frame_values) frames.push_back(frame_at(v));
    for (std::size_t i = 1; i < frames.size(); ++i) {
      cv::line(frames[i], cv::Point(0, 0), cv::Point(0, size.height - 1), cv::Scalar(0, 0, 0), 1);
    }
    fig.image = tile_horizontal(frames);
    return fig;
  }

  // contact_trajectory
  const double end = std::clamp(end_value.value_or(joint.limit_hi), joint.limit_lo, joint.limit_hi);
  const Projector proj(fig.pose, size);
  for (double v : trajectory_samples(joint, end)) {
    const Vec3 p = model.base_pose * (joint_transform(joint, v) * part.contact_point);
    fig.trajectory_px.push_back(proj.project(p));
  }
  fig.frame_values = {joint.rest_value()};
  fig.image = frame_at(joint.rest_value());
  std::vector<cv::Point> poly;
  for (const auto& p : fig.trajectory_px) poly.emplace_back(static_cast<int>(std::lround(p.x())), static_cast<int>(std::lround(p.y())));
  cv::polylines(fig.image, poly, false, cv::Scalar(0, 0, 230), 2, cv::LINE_8);
  if (poly.size() >= 2) {
    cv::arrowedLine(fig.image, poly[poly.size() - 2], poly.back(), cv::Scalar(0, 0, 230), 2, cv::LINE_8, 0, 0.9);
  }
  cv::circle(fig.image, poly.front(), 4, cv::Scalar(0, 0, 230), cv::FILLED);
  return fig;
}

std::string room_for_category(Category category) {
  switch (category) {
    case Category::microwave:
    case Category::oven:
    case Category::dishwasher:
    case Category::refrigerator:
    case Category::coffee_machine:
    case Category::blender:
    case Category::toaster:
    case Category::kettle: return "kitchen";
    case Category::washing_machine: return "laundry room";
    case Category::dispenser: return "office pantry";
    case Category::printer: return "home office";
  }
  return "living room";
}

std::string cover_prompt(Category category) {
  return "A bright, tidy " + room_for_category(category) + " interior, photographed at eye level, with free space for a " +
         std::string(to_string(category)) + " in the center";
}

cv::Mat FlatBackgroundBackend::generate(const std::string& prompt, cv::Size size, std::uint64_t) {
  cv::Scalar color(215, 225, 235);
  if (prompt.find("kitchen") != std::string::npos) color = cv::Scalar(190, 215, 235);
  else if (prompt.find("laundry") != std::string::npos) color = cv::Scalar(235, 220, 200);
  else if (prompt.find("office") != std::string::npos) color = cv::Scalar(210, 230, 210);
  return cv::Mat(size, CV_8UC3, color);
}

CoverImage compose_cover(const cv::Mat& overview, const cv::Mat& silhouette, Category category,
                         BackgroundBackend& background, std::uint64_t seed) {
  CoverImage out;
  out.prompt = cover_prompt(category);
  cv::Mat bg = background.generate(out.prompt, overview.size(), seed);
  if (bg.size() != overview.size() || bg.type() != CV_8UC3) {
    throw Error(Errc::backend_unavailable, "background backend returned an image of the wrong shape");
  }
  out.image = bg.clone();
  to_bgr(overview).copyTo(out.image, silhouette);
  return out;
}

OverviewRender render_overview(const ApplianceModel& model, Renderer& renderer,
                               const std::map<std::string, std::string>& labels, const FigureConfig& config) {
  const ApplianceState rest = ApplianceState::at_rest(model);
  const cv::Size select_size(config.view_size.width / 2, config.view_size.height / 2);
  const auto ranked = select_views(model, rest, candidate_poses(model), renderer, select_size);
  OverviewRender out{renderer.render(model, rest, ranked.front().pose, config.view_size), ranked.front(), {}};
  std::map<std::string, Vec2> anchors;
  std::map<std::string, std::string> texts;
  for (const auto& part : model.parts) {
    auto label = labels.find(part.part_id);
    if (label == labels.end()) continue;
    if (auto a = interior_anchor(out.view.part_mask(part.part_id))) {
      anchors[part.part_id] = Vec2(a->x, a->y);
      texts[part.part_id] = label->second;
    }
  }
  out.annotated = draw_point_line_annotation(out.view.rgb, out.view.silhouette(), anchors, texts);
  return out;
}

std::vector<FigureAsset> build_instance_figures(const ApplianceModel& model, const ApplianceInstance& instance,
                                                Renderer& renderer, BackgroundBackend& background,
                                                const std::filesystem::path& dir, std::uint64_t seed,
                                                const FigureConfig& config) {
  std::vector<FigureAsset> assets;
  const std::string prefix = instance.instance_id + "_";
  auto save = [&](FigureAsset a, const cv::Mat& image) {
    a.image_ref = write_png_asset(dir, image);
    a.width = image.cols;
    a.height = image.rows;
    if (!a.annotations.empty()) {
      a.svg_ref = write_content_addressed(dir, annotation_svg(a.annotations, image.size(), a.image_ref), ".svg");
    }
    a.validate();
    assets.push_back(std::move(a));
  };
  auto sketch_bgr = [](const cv::Mat& normal) { return to_bgr(render_sketch(normal)); };

  // Overview diagrams.
  const OverviewRender ov = render_overview(model, renderer, instance.function_annotation, config);
  const cv::Mat silhouette = ov.view.silhouette();
  FigureAsset overview;
  overview.asset_id = prefix + "overview_rgb";
  overview.kind = FigureKind::overview_diagram;
  overview.view = "main";
  overview.annotations = ov.annotated.annotations;
  overview.caption = "Overview of the " + std::string(to_string(model.category)) + " and its controls";
  save(overview, ov.annotated.image);

  std::map<std::string, Vec2> anchors;
  std::map<std::string, std::string> texts;
  for (const auto& a : ov.annotated.annotations) {
    anchors[a.part_id] = a.anchor_px;
    texts[a.part_id] = a.label_text;
  }
  const cv::Mat ov_sketch = sketch_bgr(ov.view.normal);
  overview.asset_id = prefix + "overview_sketch";
  overview.style = FigureStyle::sketch;
  const auto sketch_annotated = draw_point_line_annotation(ov_sketch, silhouette, anchors, texts);
  overview.annotations = sketch_annotated.annotations;
  save(overview, sketch_annotated.image);

  // Covers.
  for (FigureStyle style : {FigureStyle::rgb, FigureStyle::sketch}) {
    FigureAsset cover;
    cover.asset_id = prefix + "cover_" + std::string(to_string(style));
    cover.kind = FigureKind::cover;
    cover.style = style;
    const auto img = compose_cover(style == FigureStyle::rgb ? ov.view.rgb : ov_sketch, silhouette, model.category,
                                   background, seed);
    cover.caption = img.prompt;
    cover.view = "main";
    save(cover, img.image);
  }

  // Control panel close-ups.
  const Projector projector(ov.ranked.pose, config.view_size);
  const auto clusters = cluster_control_panel(model, ov.view, projector,
                                              default_panel_eps(config.view_size, config.eps_fraction), config.min_pts);
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const cv::Rect box = clusters[k].bbox_px;
    const int scale = std::max(1, std::min({4, 480 / std::max(1, box.width), 360 / std::max(1, box.height)}));
    const int margin = 160;
    auto crop = [&](const cv::Mat& src, int border_value, int interp) {
      cv::Mat c;
      cv::resize(src(box), c, cv::Size(), scale, scale, interp);
      cv::Mat padded;
      cv::copyMakeBorder(c, padded, margin / 2, margin / 2, margin, margin, cv::BORDER_CONSTANT,
                         cv::Scalar::all(border_value));
      return padded;
    };
    const cv::Mat labels = crop(ov.view.labels, kLabelBackground, cv::INTER_NEAREST);
    const cv::Mat rgb = crop(ov.view.rgb, 255, cv::INTER_NEAREST);
    const cv::Mat normal = crop(ov.view.normal, 128, cv::INTER_NEAREST);
    cv::Mat sil = labels != kLabelBackground;
    std::map<std::string, Vec2> panel_anchors;
    std::map<std::string, std::string> panel_texts;
    for (const auto& id : clusters[k].member_part_ids) {
      const int l = ov.view.part_label(id);
      cv::Mat mask = labels == l;
      if (auto a = interior_anchor(mask)) {
        panel_anchors[id] = Vec2(a->x, a->y);
        panel_texts[id] = instance.function_annotation.count(id) ? instance.function_annotation.at(id) : id;
      }
    }
    for (FigureStyle style : {FigureStyle::rgb, FigureStyle::sketch}) {
      const auto annotated =
          draw_point_line_annotation(style == FigureStyle::rgb ? rgb : sketch_bgr(normal), sil, panel_anchors, panel_texts);
      FigureAsset panel;
      panel.asset_id = prefix + "panel" + std::to_string(k + 1) + "_" + std::string(to_string(style));
      panel.kind = FigureKind::control_panel;
      panel.style = style;
      panel.view = "panel" + std::to_string(k + 1);
      panel.annotations = annotated.annotations;
      panel.caption = "Control panel";
      save(panel, annotated.image);
    }
  }

  // Guidance for every part and strategy.
  for (const auto& part : model.parts) {
    const std::string name =
        instance.function_annotation.count(part.part_id) ? instance.function_annotation.at(part.part_id) : part.part_id;
    std::optional<double> end_value;
    auto st = instance.state_annotation.find(part.part_id);
    if (st != instance.state_annotation.end()) {
      const JointSpec& joint = model.joint_of(part);
      for (const auto& e : st->second) {
        auto label = parse_state(e.label);
        if (label && label->kind == StateLabel::Kind::rotate) {
          const double v = target_joint_value(joint, *label);
          end_value = end_value ? std::max(*end_value, v) : v;
        }
      }
    }
    for (auto strategy : valid_strategies(model, part)) {
      const auto g = render_guidance(model, part, strategy, renderer, config.guidance_size, name, end_value);
      FigureAsset a;
      a.asset_id = prefix + "guidance_" + part.part_id + "_" + std::string(to_string(strategy));
      a.kind = FigureKind::guidance;
      a.guidance_strategy = strategy;
      a.part_id = part.part_id;
      a.caption = g.caption;
      if (g.image.empty()) {
        a.validate();
        assets.push_back(std::move(a));
      } else {
        save(a, g.image);
      }
    }
  }
  return assets;
}

}  // namespace manualkit
