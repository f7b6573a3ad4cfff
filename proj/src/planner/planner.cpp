#include "manualkit/planner/planner.hpp"

#include "manualkit/core/action.hpp"
#include "manualkit/core/error.hpp"
#include "manualkit/figures/camera.hpp"
#include "manualkit/image/io.hpp"
#include "manualkit/kernels/kernels.hpp"
#include "manualkit/texlite/texlite.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>

namespace manualkit {

namespace fs = std::filesystem;

namespace {

constexpr double kPtToPx = kResolveDpi / 72.0;

texlite::Layout load_layout(const fs::path& pdf) {
  static std::mutex mutex;
  static std::map<fs::path, texlite::Layout> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(pdf); it != cache.end()) return it->second;
  fs::path sidecar = pdf;
  sidecar.replace_extension(".layout.json");
  if (!fs::exists(sidecar)) {
    const fs::path manifest = pdf.parent_path() / "manifest.json";
    if (fs::exists(manifest)) {
      const json m = json::parse(read_text_file(manifest));
      if (m.contains("layout")) sidecar = pdf.parent_path() / m.at("layout").get<std::string>();
    }
  }
  if (!fs::exists(sidecar)) throw Error(Errc::backend_unavailable, "no layout sidecar for " + pdf.string());
  auto layout = texlite::layout_from_json(json::parse(read_text_file(sidecar)));
  cache[pdf] = layout;
  return layout;
}

std::string quote(const std::string& s) {
  const bool has_single = s.find('\'') != std::string::npos;
  const char q = has_single && s.find('"') == std::string::npos ? '"' : '\'';
  std::string out(1, q);
  for (char c : s) {
    if (c == q || c == '\\') out += '\\';
    out += c;
  }
  return out + q;
}

// Recursive-descent reader for the plan dictionary grammar.
class PlanReader {
 public:
  PlanReader(const std::string& s, std::size_t pos) : s_(s), i_(pos) {}

  std::optional<Plan> read() {
    ws();
    Plan plan;
    if (peek() == '[') {
      ++i_;
      ws();
      while (peek() != ']') {
        if (!dict(plan)) return std::nullopt;
        ws();
        if (peek() == ',') {
          ++i_;
          ws();
        } else if (peek() != ']') {
          return std::nullopt;
        }
      }
      ++i_;
    } else if (!dict(plan)) {
      return std::nullopt;
    }
    return plan;
  }

 private:
  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
  void ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }

  std::optional<std::string> str() {
    const char q = peek();
    if (q != '\'' && q != '"') return std::nullopt;
    ++i_;
    std::string out;
    while (i_ < s_.size()) {
      char c = s_[i_++];
      if (c == '\\' && i_ < s_.size()) {
        out += s_[i_++];
      } else if (c == q) {
        return out;
      } else {
        out += c;
      }
    }
    return std::nullopt;
  }

  bool dict(Plan& plan) {
    if (peek() != '{') return false;
    ++i_;
    ws();
    while (peek() != '}') {
      auto key = str();
      if (!key) return false;
      ws();
      if (peek() != ':') return false;
      ++i_;
      ws();
      auto value = str();
      if (!value) return false;
      plan.steps.push_back({*key, *value});
      ws();
      if (peek() == ',') {
        ++i_;
        ws();
      } else if (peek() != '}') {
        return false;
      }
    }
    ++i_;
    return true;
  }

  const std::string& s_;
  std::size_t i_;
};

std::string strip(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  return s.substr(b);
}

const char* kPlanRole =
    "You are a robot task planner reading an appliance manual. Plan the task as a dictionary that maps each part "
    "function name to the state to set, in execution order, for example {'Brew Strength Lever': 'Rotate 60 degrees'}. "
    "Use only parts the manual mentions. States are 'Push N time(s)', 'Rotate D degrees', 'Open', 'Close', "
    "'Slide forward' or 'Slide backward'. Answer with the dictionary only.";

const char* kAlignRole =
    "The first image shows an appliance with colored, numbered part masks. The other images are diagrams from its "
    "manual. For every mask, name the part using the function names of the manual. Answer one line per mask in the "
    "form 'mask <id> -> <function name>'. Use each name at most once.";

std::string marked_ref(const SomImage& som, const AlignConfig& config) {
  if (config.scratch_dir.empty()) return {};
  return (config.scratch_dir / write_png_asset(config.scratch_dir, som.image)).string();
}

json mask_context(const PartMask& m, const SomMark& mark) {
  json j = {{"mask_id", m.mask_id},
            {"bbox", {m.bbox.x, m.bbox.y, m.bbox.width, m.bbox.height}},
            {"centroid", {mark.centroid.x, mark.centroid.y}}};
  if (!m.gt_part_id.empty()) j["gt_part_id"] = m.gt_part_id;
  return j;
}

MaskAlignment request_alignment(const std::vector<json>& mask_ctx, const std::vector<int>& ids,
                                const std::vector<std::string>& image_refs, const ResolvedManual& manual,
                                BackendDispatcher& backend, std::uint64_t seed, const AlignConfig& config,
                                int* regen_count) {
  BackendRequest req;
  req.capability = Capability::alignment_from_images;
  req.role_prompt = kAlignRole;
  std::ostringstream text;
  text << "Mask ids:";
  for (int id : ids) text << " " << id;
  text << "\n";
  if (!manual.empty()) text << "Manual text:\n" << manual.full_text();
  req.text = text.str();
  req.context = {{"masks", mask_ctx}, {"manual_available", !manual.empty()}};
  req.image_refs = image_refs;
  req.seed = seed;
  auto result = call_with_regeneration<MaskAlignment>(
      backend, req, config.max_regen, [&](const std::string& out, std::string& why) -> std::optional<MaskAlignment> {
        auto parsed = parse_mask_alignment(out, ids, why);
        if (!parsed) return std::nullopt;
        if (!manual.empty()) {
          for (const auto& [id, name] : *parsed) {
            if (!manual.mentions(name)) {
              why = "'" + name + "' is not mentioned in the manual";
              return std::nullopt;
            }
          }
        }
        return parsed;
      });
  if (regen_count) *regen_count = result.regen_count;
  return result.value;
}

}  // namespace

std::string normalize_name(std::string_view name) {
  std::string out;
  bool space = false;
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string_view to_string(ManualElement::Kind kind) { return kind == ManualElement::Kind::figure ? "figure" : "table"; }

std::string ResolvedManual::full_text() const {
  std::string out;
  for (const auto& p : pages) out += "--- Page " + std::to_string(p.page_index) + " ---\n" + p.text + "\n";
  return out;
}

void ResolvedManual::validate() const {
  for (std::size_t i = 0; i < pages.size(); ++i) {
    if (pages[i].page_index != static_cast<int>(i) + 1) {
      throw Error(Errc::validation_error, "page indices are not contiguous from 1");
    }
  }
}

bool ResolvedManual::mentions(const std::string& phrase) const {
  const std::string needle = normalize_name(phrase);
  if (needle.empty()) return false;
  for (const auto& p : pages) {
    if (normalize_name(p.text).find(needle) != std::string::npos) return true;
  }
  return false;
}

json to_json(const ResolvedManual& manual) {
  json pages = json::array();
  for (const auto& p : manual.pages) {
    json elements = json::array();
    for (const auto& e : p.elements) {
      json je = {{"kind", to_string(e.kind)},
                 {"bbox_px", {e.bbox_px.x, e.bbox_px.y, e.bbox_px.width, e.bbox_px.height}}};
      if (!e.caption.empty()) je["caption"] = e.caption;
      if (!e.image_ref.empty()) je["image_ref"] = e.image_ref;
      elements.push_back(je);
    }
    pages.push_back({{"page_index", p.page_index}, {"text", p.text}, {"elements", elements}});
  }
  return {{"pages", pages}};
}

ResolvedManual resolved_manual_from_json(const json& j) {
  try {
    ResolvedManual m;
    for (const auto& jp : j.at("pages")) {
      ResolvedPage p;
      p.page_index = jp.at("page_index").get<int>();
      p.text = jp.at("text").get<std::string>();
      for (const auto& je : jp.at("elements")) {
        ManualElement e;
        const std::string kind = je.at("kind").get<std::string>();
        if (kind != "figure" && kind != "table") throw Error(Errc::malformed_document, "element kind '" + kind + "'");
        e.kind = kind == "figure" ? ManualElement::Kind::figure : ManualElement::Kind::table;
        const auto& b = je.at("bbox_px");
        e.bbox_px = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
        e.caption = je.value("caption", "");
        e.image_ref = je.value("image_ref", "");
        p.elements.push_back(e);
      }
      m.pages.push_back(std::move(p));
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_document, std::string("resolved manual: ") + e.what());
  }
}

std::string LayoutOcrBackend::page_text(const fs::path& pdf, int page_index) {
  const auto layout = load_layout(pdf);
  std::string out;
  for (const auto& l : layout.lines) {
    if (l.page == page_index) out += l.text + "\n";
  }
  return out;
}

std::vector<ManualElement> LayoutElementBackend::page_elements(const fs::path& pdf, int page_index) {
  const auto layout = load_layout(pdf);
  std::vector<ManualElement> out;
  for (const auto& im : layout.images) {
    if (im.page != page_index) continue;
    ManualElement e;
    e.kind = ManualElement::Kind::figure;
    e.bbox_px = {im.x * kPtToPx, im.y * kPtToPx, im.width * kPtToPx, im.height * kPtToPx};
    e.image_ref = im.path;
    // Caption: the nearest "Figure N:" line starting below the image.
    double best = 1e9;
    for (const auto& l : layout.lines) {
      if (l.page != page_index || l.text.rfind("Figure ", 0) != 0) continue;
      const double gap = l.y - (im.y + im.height);
      if (gap >= -1e-6 && gap < 40.0 && gap < best) {
        best = gap;
        const auto colon = l.text.find(": ");
        e.caption = colon == std::string::npos ? l.text : l.text.substr(colon + 2);
      }
    }
    out.push_back(e);
  }
  for (const auto& t : layout.tables) {
    if (t.page != page_index) continue;
    out.push_back({ManualElement::Kind::table, {t.x * kPtToPx, t.y * kPtToPx, t.width * kPtToPx, t.height * kPtToPx}, {}, {}});
  }
  return out;
}

ResolvedManual resolve_manual(const fs::path& pdf, OcrBackend& ocr, ElementBackend& elements) {
  if (!fs::exists(pdf)) throw Error(Errc::unreadable_pdf, "no such file " + pdf.string());
  const int pages = texlite::count_pdf_pages(read_text_file(pdf));
  if (pages <= 0) throw Error(Errc::unreadable_pdf, pdf.string() + " has no pages");
  ResolvedManual out;
  for (int p = 1; p <= pages; ++p) out.pages.push_back({p, ocr.page_text(pdf, p), elements.page_elements(pdf, p)});
  return out;
}

std::string format_plan(const Plan& plan) {
  std::string out = "{";
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    if (i) out += ", ";
    out += quote(plan.steps[i].function_name) + ": " + quote(plan.steps[i].action_phrase);
  }
  return out + "}";
}

std::optional<Plan> parse_plan(const std::string& text, std::string& why) {
  for (std::size_t pos = text.find_first_of("{["); pos != std::string::npos; pos = text.find_first_of("{[", pos + 1)) {
    PlanReader reader(text, pos);
    auto plan = reader.read();
    if (!plan) continue;
    if (plan->steps.empty()) {
      why = "empty plan";
      return std::nullopt;
    }
    for (auto& s : plan->steps) {
      s.function_name = strip(s.function_name);
      s.action_phrase = strip(s.action_phrase);
      if (s.function_name.empty() || s.action_phrase.empty()) {
        why = "empty part name or action";
        return std::nullopt;
      }
    }
    return plan;
  }
  why = "no plan dictionary found";
  return std::nullopt;
}

PlanResult plan_manipulation(const std::string& instruction, const ResolvedManual& manual, BackendDispatcher& backend,
                             std::uint64_t seed, const PlanConfig& config) {
  manual.validate();
  BackendRequest req;
  req.capability = Capability::plan_from_manual;
  req.role_prompt = kPlanRole;
  req.text = "Task: " + instruction + "\n" + (manual.empty() ? "No manual is available.\n" : "Manual:\n" + manual.full_text());
  req.context = {{"instruction", instruction}, {"manual_available", !manual.empty()}};
  if (!manual.empty()) req.context["manual_text"] = manual.full_text();
  req.seed = seed;
  auto result = call_with_regeneration<Plan>(
      backend, req, config.max_regen, [&](const std::string& out, std::string& why) -> std::optional<Plan> {
        auto plan = parse_plan(out, why);
        if (!plan) return std::nullopt;
        for (const auto& s : plan->steps) {
          if (!parse_state(s.action_phrase)) {
            why = "unresolvable action '" + s.action_phrase + "'";
            return std::nullopt;
          }
          if (!manual.empty() && !manual.mentions(s.function_name)) {
            why = "'" + s.function_name + "' is not mentioned in the manual";
            return std::nullopt;
          }
        }
        return plan;
      });
  return {result.value, result.regen_count};
}

void Observation::validate() const {
  if (rgb.empty() || rgb.type() != CV_8UC3) throw Error(Errc::precondition_violated, "observation needs an 8-bit RGB image");
  if (!depth.empty() && depth.size() != rgb.size()) {
    throw Error(Errc::precondition_violated, "rgb and depth differ in resolution");
  }
}

Observation observation_from_render(const RenderOutput& render, const CameraPose& pose) {
  const Projector projector(pose, render.rgb.size());
  Observation obs;
  obs.rgb = render.rgb.clone();
  obs.depth = render.depth.clone();
  obs.fx = obs.fy = projector.focal();
  obs.cx = (render.rgb.cols - 1) / 2.0;
  obs.cy = (render.rgb.rows - 1) / 2.0;
  return obs;
}

std::vector<cv::Rect> GroundTruthDetector::detect(const Observation& obs) {
  obs.validate();
  const auto stats = kernels::label_stats(render_.labels, static_cast<int>(render_.part_ids.size()));
  std::vector<cv::Rect> boxes;
  for (const auto& s : stats) {
    if (s.count > 0) boxes.push_back(s.bbox());
  }
  return boxes;
}

std::vector<PartMask> GroundTruthSegmenter::segment(const Observation& obs, const std::vector<cv::Rect>& boxes) {
  obs.validate();
  const int n = static_cast<int>(render_.part_ids.size());
  std::vector<PartMask> out;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const cv::Rect box = boxes[b] & cv::Rect(0, 0, render_.labels.cols, render_.labels.rows);
    std::vector<int> counts(static_cast<std::size_t>(n), 0);
    for (int y = box.y; y < box.y + box.height; ++y) {
      for (int x = box.x; x < box.x + box.width; ++x) {
        const int l = render_.labels.at<int>(y, x);
        if (l >= 0 && l < n) ++counts[static_cast<std::size_t>(l)];
      }
    }
    PartMask m;
    m.mask_id = static_cast<int>(b) + 1;
    m.mask = cv::Mat::zeros(render_.labels.size(), CV_8U);
    const auto best = std::max_element(counts.begin(), counts.end());
    if (best != counts.end() && *best > 0) {
      const int label = static_cast<int>(best - counts.begin());
      m.gt_part_id = render_.part_ids[static_cast<std::size_t>(label)];
      for (int y = box.y; y < box.y + box.height; ++y) {
        for (int x = box.x; x < box.x + box.width; ++x) {
          if (render_.labels.at<int>(y, x) == label) m.mask.at<std::uint8_t>(y, x) = 255;
        }
      }
      m.bbox = cv::boundingRect(m.mask);
    }
    out.push_back(std::move(m));
  }
  return out;
}

const std::vector<cv::Vec3b>& som_palette() {
  // BGR
  static const std::vector<cv::Vec3b> palette = {
      {75, 25, 230},  {75, 180, 60},   {25, 225, 255},  {200, 130, 0},  {48, 130, 245},
      {180, 30, 145}, {240, 240, 70},  {230, 50, 240},  {60, 245, 210}, {212, 190, 250},
      {128, 128, 0},  {255, 190, 220}, {40, 110, 170},  {200, 250, 255}, {0, 0, 128},
      {195, 255, 170}, {0, 128, 128},  {180, 215, 255}, {128, 0, 0},    {128, 128, 128}};
  return palette;
}

SomImage som_overlay(const cv::Mat& image, const std::vector<PartMask>& masks) {
  if (image.empty() || image.type() != CV_8UC3) throw Error(Errc::precondition_violated, "set-of-mark needs a BGR image");
  std::vector<const PartMask*> order;
  for (const auto& m : masks) order.push_back(&m);
  std::sort(order.begin(), order.end(), [](const PartMask* a, const PartMask* b) { return a->mask_id < b->mask_id; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->mask_id == order[i - 1]->mask_id) {
      throw Error(Errc::precondition_violated, "duplicate mask id " + std::to_string(order[i]->mask_id));
    }
  }
  cv::Mat labels(image.size(), CV_32S, cv::Scalar(-1));
  for (std::size_t k = 0; k < order.size(); ++k) {
    const cv::Mat& m = order[k]->mask;
    if (m.size() != image.size() || m.type() != CV_8U) {
      throw Error(Errc::precondition_violated, "mask " + std::to_string(order[k]->mask_id) + " has the wrong format");
    }
    for (int y = 0; y < m.rows; ++y) {
      const auto* mp = m.ptr<std::uint8_t>(y);
      auto* lp = labels.ptr<int>(y);
      for (int x = 0; x < m.cols; ++x) {
        if (!mp[x]) continue;
        if (lp[x] >= 0) {
          throw Error(Errc::overlapping_masks, "masks " + std::to_string(order[static_cast<std::size_t>(lp[x])]->mask_id) +
                                                   " and " + std::to_string(order[k]->mask_id) + " overlap");
        }
        lp[x] = static_cast<int>(k);
      }
    }
  }
  const auto stats = kernels::label_stats(labels, static_cast<int>(order.size()));
  std::vector<cv::Vec3b> colors;
  for (std::size_t k = 0; k < order.size(); ++k) colors.push_back(som_palette()[k % som_palette().size()]);

  SomImage out;
  out.image = image.clone();
  kernels::tint(out.image, labels, colors, kSomAlpha);
  const double scale = std::max(0.4, image.rows / 600.0);
  const int thick = std::max(1, static_cast<int>(std::lround(2 * scale)));
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (stats[k].count == 0) throw Error(Errc::precondition_violated, "mask " + std::to_string(order[k]->mask_id) + " is empty");
    const cv::Point2d c = stats[k].centroid();
    out.marks.push_back({order[k]->mask_id, c, colors[k]});
    const std::string id = std::to_string(order[k]->mask_id);
    int base = 0;
    const cv::Size ts = cv::getTextSize(id, cv::FONT_HERSHEY_SIMPLEX, scale, thick, &base);
    const cv::Point org(static_cast<int>(std::lround(c.x - ts.width / 2.0)), static_cast<int>(std::lround(c.y + ts.height / 2.0)));
    cv::putText(out.image, id, org, cv::FONT_HERSHEY_SIMPLEX, scale, cv::Scalar(0, 0, 0), thick + 2, cv::LINE_AA);
    cv::putText(out.image, id, org, cv::FONT_HERSHEY_SIMPLEX, scale, cv::Scalar(255, 255, 255), thick, cv::LINE_AA);
  }
  return out;
}

std::optional<MaskAlignment> parse_mask_alignment(const std::string& text, const std::vector<int>& mask_ids,
                                                  std::string& why) {
  static const std::regex line_re(R"(^\s*(?:[-*]\s*)?(?:mask\s*)?#?(\d+)\s*(?:->|=>|:|=)\s*(.*?)\s*$)", std::regex::icase);
  const std::set<int> valid(mask_ids.begin(), mask_ids.end());
  MaskAlignment out;
  std::map<std::string, int> by_name;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    const int id = std::stoi(m[1].str());
    std::string name = m[2].str();
    if (name.size() >= 2 && (name.front() == '\'' || name.front() == '"') && name.back() == name.front()) {
      name = name.substr(1, name.size() - 2);
    }
    name = strip(name);
    if (!valid.count(id)) {
      why = "unknown mask id " + std::to_string(id);
      return std::nullopt;
    }
    if (out.count(id)) {
      why = "mask " + std::to_string(id) + " named twice";
      return std::nullopt;
    }
    if (name.empty()) {
      why = "mask " + std::to_string(id) + " has no name";
      return std::nullopt;
    }
    const std::string key = normalize_name(name);
    if (auto it = by_name.find(key); it != by_name.end()) {
      why = "duplicate name '" + name + "' for masks " + std::to_string(it->second) + " and " + std::to_string(id);
      return std::nullopt;
    }
    by_name[key] = id;
    out[id] = name;
  }
  if (out.empty()) {
    why = "no 'mask <id> -> <name>' lines";
    return std::nullopt;
  }
  return out;
}

AlignmentResult align_parts(const Observation& obs, DetectorBackend& detector, SegmenterBackend& segmenter,
                            const ResolvedManual& manual, const std::vector<std::string>& diagram_refs,
                            BackendDispatcher& backend, std::uint64_t seed, const AlignConfig& config) {
  obs.validate();
  const auto boxes = detector.detect(obs);
  if (boxes.empty()) throw Error(Errc::no_parts_detected, "detector found no movable parts");
  AlignmentResult out;
  for (auto& m : segmenter.segment(obs, boxes)) {
    if (cv::countNonZero(m.mask) > 0) out.masks.push_back(std::move(m));
  }
  if (out.masks.empty()) throw Error(Errc::no_parts_detected, "segmenter produced only empty masks");
  const SomImage som = som_overlay(obs.rgb, out.masks);
  std::vector<json> ctx;
  std::vector<int> ids;
  for (std::size_t k = 0; k < som.marks.size(); ++k) {
    const auto& mark = som.marks[k];
    const auto it = std::find_if(out.masks.begin(), out.masks.end(), [&](const PartMask& m) { return m.mask_id == mark.mask_id; });
    ctx.push_back(mask_context(*it, mark));
    ids.push_back(mark.mask_id);
  }
  std::vector<std::string> refs;
  if (auto r = marked_ref(som, config); !r.empty()) refs.push_back(r);
  refs.insert(refs.end(), diagram_refs.begin(), diagram_refs.end());
  out.names = request_alignment(ctx, ids, refs, manual, backend, seed, config, &out.regen_count);
  return out;
}

PartAlignment align_cad_parts(const ApplianceModel& model, const std::vector<RenderOutput>& views,
                              const ResolvedManual& manual, const std::vector<std::string>& diagram_refs,
                              BackendDispatcher& backend, std::uint64_t seed, const AlignConfig& config) {
  std::map<int, json> ctx_by_id;
  std::vector<std::string> refs;
  std::map<int, std::string> part_of_id;
  for (const auto& view : views) {
    std::vector<PartMask> masks;
    for (std::size_t i = 0; i < model.parts.size(); ++i) {
      const std::string& pid = model.parts[i].part_id;
      cv::Mat mask = view.part_mask(pid);
      if (mask.empty() || cv::countNonZero(mask) == 0) continue;
      masks.push_back({static_cast<int>(i) + 1, mask, cv::boundingRect(mask), pid});
      part_of_id[static_cast<int>(i) + 1] = pid;
    }
    if (masks.empty()) continue;
    const SomImage som = som_overlay(view.rgb, masks);
    for (const auto& mark : som.marks) {
      const auto it = std::find_if(masks.begin(), masks.end(), [&](const PartMask& m) { return m.mask_id == mark.mask_id; });
      ctx_by_id.emplace(mark.mask_id, mask_context(*it, mark));
    }
    if (auto r = marked_ref(som, config); !r.empty()) refs.push_back(r);
  }
  if (ctx_by_id.empty()) throw Error(Errc::no_parts_detected, "no part is visible in any CAD view");
  refs.insert(refs.end(), diagram_refs.begin(), diagram_refs.end());
  std::vector<json> ctx;
  std::vector<int> ids;
  for (const auto& [id, j] : ctx_by_id) {
    ctx.push_back(j);
    ids.push_back(id);
  }
  const MaskAlignment names = request_alignment(ctx, ids, refs, manual, backend, seed, config, nullptr);
  PartAlignment out;
  for (const auto& [id, name] : names) out[part_of_id.at(id)] = name;
  return out;
}

std::map<int, std::string> mask_part_ids(const std::vector<PartMask>& masks, const RenderOutput& render) {
  const int n = static_cast<int>(render.part_ids.size());
  std::map<int, std::string> out;
  for (const auto& m : masks) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(n), 0);
    for (int y = 0; y < m.mask.rows; ++y) {
      for (int x = 0; x < m.mask.cols; ++x) {
        if (!m.mask.at<std::uint8_t>(y, x)) continue;
        const int l = render.labels.at<int>(y, x);
        if (l >= 0 && l < n) ++counts[static_cast<std::size_t>(l)];
      }
    }
    const auto best = std::max_element(counts.begin(), counts.end());
    if (best != counts.end() && *best > 0) out[m.mask_id] = render.part_ids[static_cast<std::size_t>(best - counts.begin())];
  }
  return out;
}

}  // namespace manualkit
