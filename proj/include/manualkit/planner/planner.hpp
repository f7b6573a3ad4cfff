#pragma once

#include "manualkit/backend/backend.hpp"
#include "manualkit/core/appliance.hpp"
#include "manualkit/figures/renderer.hpp"

#include <opencv2/core.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace manualkit {

/// Lowercase with runs of whitespace collapsed to one space and trimmed.
std::string normalize_name(std::string_view name);

// ---- manual resolution ------------------------------------------------------

/// Raster resolution pages are resolved at; element boxes are in pixels of
/// this raster.
inline constexpr double kResolveDpi = 150.0;

struct ManualElement {
  enum class Kind { figure, table };
  Kind kind = Kind::figure;
  cv::Rect2d bbox_px;
  std::string caption;
  std::string image_ref;  // figures only, as referenced by the manual source
};

std::string_view to_string(ManualElement::Kind kind);

struct ResolvedPage {
  int page_index = 0;  // 1-based
  std::string text;
  std::vector<ManualElement> elements;
};

struct ResolvedManual {
  std::vector<ResolvedPage> pages;

  bool empty() const { return pages.empty(); }
  std::string full_text() const;
  /// Throws validation_error unless page indices run 1..n.
  void validate() const;
  /// Case-insensitive, whitespace-normalized substring test over all pages.
  bool mentions(const std::string& phrase) const;
};

json to_json(const ResolvedManual& manual);
ResolvedManual resolved_manual_from_json(const json& j);

/// Page-level text recognition.
class OcrBackend {
 public:
  virtual ~OcrBackend() = default;
  virtual std::string page_text(const std::filesystem::path& pdf, int page_index) = 0;
};

/// Page-level figure and table detection.
class ElementBackend {
 public:
  virtual ~ElementBackend() = default;
  virtual std::vector<ManualElement> page_elements(const std::filesystem::path& pdf, int page_index) = 0;
};

/// Ground-truth OCR: reads the `<stem>.layout.json` sidecar next to the PDF
/// (falls back to the manifest's layout entry) and joins each page's lines.
class LayoutOcrBackend : public OcrBackend {
 public:
  std::string page_text(const std::filesystem::path& pdf, int page_index) override;
};

/// Ground-truth element detection from the same sidecar: image boxes become
/// figures (caption = the following "Figure N:" line), table boxes become
/// tables.
class LayoutElementBackend : public ElementBackend {
 public:
  std::vector<ManualElement> page_elements(const std::filesystem::path& pdf, int page_index) override;
};

/// One entry per PDF page. Throws Error(unreadable_pdf) when the file is
/// missing or not a PDF.
ResolvedManual resolve_manual(const std::filesystem::path& pdf, OcrBackend& ocr, ElementBackend& elements);

// ---- planning ---------------------------------------------------------------

struct PlanStep {
  std::string function_name;
  std::string action_phrase;
  bool operator==(const PlanStep&) const = default;
};

struct Plan {
  std::vector<PlanStep> steps;
  bool operator==(const Plan&) const = default;
};

/// Dictionary form, e.g. {'Brew Strength Lever': 'Rotate 60 degrees'}.
/// Keys keep plan order and may repeat. Strings containing a single quote
/// are double-quoted.
std::string format_plan(const Plan& plan);

/// Accepts one dictionary or a list of one-entry dictionaries, with single
/// or double quotes, surrounded by arbitrary prose. Returns nullopt and
/// fills `why` when no dictionary parses or it is empty.
std::optional<Plan> parse_plan(const std::string& text, std::string& why);

struct PlanConfig {
  int max_regen = 3;
};

struct PlanResult {
  Plan plan;
  int regen_count = 0;
};

/// Asks the backend for a plan and regenerates unresolvable ones: a plan
/// that fails the grammar, uses a name the manual never mentions, or an
/// action phrase outside the state vocabulary. With an empty manual only
/// the grammar and vocabulary checks apply.
PlanResult plan_manipulation(const std::string& instruction, const ResolvedManual& manual, BackendDispatcher& backend,
                             std::uint64_t seed, const PlanConfig& config = {});

// ---- set-of-mark alignment --------------------------------------------------

struct Observation {
  cv::Mat rgb;    // CV_8UC3
  cv::Mat depth;  // CV_32F meters
  double fx = 0, fy = 0, cx = 0, cy = 0;

  /// Throws precondition_violated when the images disagree in size.
  void validate() const;
};

/// Observation from a render: pinhole intrinsics of the camera pose.
Observation observation_from_render(const RenderOutput& render, const CameraPose& pose);

struct PartMask {
  int mask_id = 0;
  cv::Mat mask;  // CV_8U, nonzero inside
  cv::Rect bbox;
  std::string gt_part_id;  // filled by ground-truth segmenters only
};

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual std::vector<cv::Rect> detect(const Observation& obs) = 0;
};

class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  /// One mask per box, same order.
  virtual std::vector<PartMask> segment(const Observation& obs, const std::vector<cv::Rect>& boxes) = 0;
};

/// Boxes of the visible parts of a known render.
class GroundTruthDetector : public DetectorBackend {
 public:
  explicit GroundTruthDetector(RenderOutput render) : render_(std::move(render)) {}
  std::vector<cv::Rect> detect(const Observation& obs) override;

 private:
  RenderOutput render_;
};

/// The dominant part label inside each box, clipped to the box.
class GroundTruthSegmenter : public SegmenterBackend {
 public:
  explicit GroundTruthSegmenter(RenderOutput render) : render_(std::move(render)) {}
  std::vector<PartMask> segment(const Observation& obs, const std::vector<cv::Rect>& boxes) override;

 private:
  RenderOutput render_;
};

inline constexpr double kSomAlpha = 0.45;
/// The 20 fixed mark colors (BGR), cycled by mask order.
const std::vector<cv::Vec3b>& som_palette();

struct SomMark {
  int mask_id = 0;
  cv::Point2d centroid;
  cv::Vec3b color;
};

struct SomImage {
  cv::Mat image;
  std::vector<SomMark> marks;  // ascending mask_id
};

/// Tints each mask with its palette color and writes its id at the pixel
/// centroid. Throws Error(overlapping_masks) when two masks share a pixel.
SomImage som_overlay(const cv::Mat& image, const std::vector<PartMask>& masks);

/// mask id -> function name.
using MaskAlignment = std::map<int, std::string>;

/// Parses "mask <id> -> <name>" lines. Nullopt with `why` on unknown or
/// repeated ids and on names assigned twice (compared normalized).
std::optional<MaskAlignment> parse_mask_alignment(const std::string& text, const std::vector<int>& mask_ids,
                                                  std::string& why);

struct AlignConfig {
  int max_regen = 1;
  std::filesystem::path scratch_dir;  // marked images are written here when set
};

struct AlignmentResult {
  MaskAlignment names;
  std::vector<PartMask> masks;
  int regen_count = 0;
};

/// Detector boxes -> segmenter masks -> set-of-mark image -> model answer.
/// Answers naming something the manual never mentions are regenerated
/// (skipped for an empty manual); `diagram_refs` are the manual diagrams
/// shown alongside. Throws Error(no_parts_detected) for an
/// empty detection and RegenerationExhausted after the retry budget.
AlignmentResult align_parts(const Observation& obs, DetectorBackend& detector, SegmenterBackend& segmenter,
                            const ResolvedManual& manual, const std::vector<std::string>& diagram_refs,
                            BackendDispatcher& backend, std::uint64_t seed, const AlignConfig& config = {});

/// part_id -> function name.
using PartAlignment = std::map<std::string, std::string>;

/// Alignment on rendered CAD views: every visible part is marked from the
/// ground-truth visibility masks with a view-independent id (part order + 1).
/// Parts hidden in all views stay unmapped.
PartAlignment align_cad_parts(const ApplianceModel& model, const std::vector<RenderOutput>& views,
                              const ResolvedManual& manual, const std::vector<std::string>& diagram_refs,
                              BackendDispatcher& backend, std::uint64_t seed, const AlignConfig& config = {});

/// part_id of each mask: the part label covering most of its pixels.
std::map<int, std::string> mask_part_ids(const std::vector<PartMask>& masks, const RenderOutput& render);

}  // namespace manualkit
