#include "manualkit/manualgen/manualgen.hpp"

#include "manualkit/core/error.hpp"
#include "manualkit/image/io.hpp"
#include "manualkit/manualgen/templates.hpp"
#include "manualkit/texlite/texlite.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <sstream>

namespace manualkit {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormatNames[] = {"prose", "bullet_list", "ordered_list", "table_1col", "table_multicol"};

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

bool needs_content(const std::string& section) {
  return section == "parts_overview" || section == "control_panel" || section == "guidance" || section == "tasks";
}

bool context_empty(const json& ctx) {
  const std::string s = ctx.at("section").get<std::string>();
  if (s == "tasks") return ctx.value("tasks", json::array()).empty();
  if (needs_content(s)) return ctx.value("parts", json::array()).empty();
  return false;
}

std::string tail(const std::string& log, std::size_t n = 1200) { return log.size() <= n ? log : log.substr(log.size() - n); }

BackendRequest section_request(const json& context, const std::vector<std::string>& prior, std::uint64_t seed) {
  const std::string section = context.at("section").get<std::string>();
  BackendRequest req;
  req.capability = Capability::latex_from_context;
  req.role_prompt = section_role_prompt(section);
  std::ostringstream text;
  text << "Section: " << section << "\nContext (JSON):\n" << context.dump(2) << "\n\nDocument so far:\n";
  for (const auto& s : prior) text << s;
  req.text = text.str();
  req.context = context;
  req.seed = seed;
  return req;
}

std::string pretty_category(Category c) {
  std::string s(to_string(c));
  bool start = true;
  for (char& ch : s) {
    if (ch == '_') {
      ch = ' ';
      start = true;
    } else if (start) {
      ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      start = false;
    }
  }
  return s;
}

json states_json(const ApplianceInstance& inst, const std::string& part_id) {
  json out = json::array();
  auto it = inst.state_annotation.find(part_id);
  if (it == inst.state_annotation.end()) return out;
  for (const auto& s : it->second) out.push_back({{"label", s.label}, {"description", s.description}});
  return out;
}

json part_json(const ApplianceInstance& inst, const std::string& part_id) {
  return {{"part_id", part_id}, {"function_name", inst.function_annotation.at(part_id)},
          {"states", states_json(inst, part_id)}};
}

void draw_icon(cv::Mat& img, const std::string& id) {
  const int s = img.cols;
  const cv::Scalar ink(30, 30, 30), red(40, 40, 210), amber(0, 190, 250), green(60, 160, 60), blue(200, 120, 30);
  const cv::Point c(s / 2, s / 2);
  auto triangle = [&](const cv::Scalar& fill) {
    std::vector<cv::Point> tri = {{s / 2, s / 10}, {s - s / 10, s - s / 8}, {s / 10, s - s / 8}};
    cv::fillConvexPoly(img, tri, fill, cv::LINE_AA);
    cv::polylines(img, tri, true, ink, std::max(2, s / 24), cv::LINE_AA);
  };
  if (id == "general_warning") {
    triangle(amber);
    cv::line(img, {s / 2, s * 4 / 10}, {s / 2, s * 65 / 100}, ink, std::max(3, s / 14), cv::LINE_AA);
    cv::circle(img, {s / 2, s * 76 / 100}, std::max(2, s / 24), ink, cv::FILLED, cv::LINE_AA);
  } else if (id == "hot_surface") {
    triangle(amber);
    for (int k = -1; k <= 1; ++k) {
      std::vector<cv::Point> wave;
      for (int y = s * 45 / 100; y <= s * 75 / 100; y += 2) {
        wave.emplace_back(s / 2 + k * s / 8 + static_cast<int>(s / 30.0 * std::sin(y * 0.35)), y);
      }
      cv::polylines(img, wave, false, ink, std::max(2, s / 32), cv::LINE_AA);
    }
  } else if (id == "electric_shock") {
    triangle(amber);
    std::vector<cv::Point> bolt = {{s * 55 / 100, s * 35 / 100}, {s * 42 / 100, s * 58 / 100}, {s * 54 / 100, s * 58 / 100},
                                   {s * 45 / 100, s * 80 / 100}, {s * 62 / 100, s * 52 / 100}, {s * 50 / 100, s * 52 / 100}};
    cv::fillPoly(img, std::vector<std::vector<cv::Point>>{bolt}, ink, cv::LINE_AA);
  } else if (id == "fragile") {
    cv::rectangle(img, {s / 10, s / 10}, {s - s / 10, s - s / 10}, ink, std::max(2, s / 24));
    std::vector<cv::Point> glass = {{s * 35 / 100, s / 4}, {s * 65 / 100, s / 4}, {s * 60 / 100, s / 2}, {s * 40 / 100, s / 2}};
    cv::fillConvexPoly(img, glass, red, cv::LINE_AA);
    cv::line(img, {s / 2, s / 2}, {s / 2, s * 72 / 100}, red, std::max(2, s / 20), cv::LINE_AA);
    cv::line(img, {s * 38 / 100, s * 74 / 100}, {s * 62 / 100, s * 74 / 100}, red, std::max(2, s / 20), cv::LINE_AA);
  } else if (id == "environment") {
    cv::circle(img, c, s * 38 / 100, green, std::max(3, s / 14), cv::LINE_AA);
    for (int k = 0; k < 3; ++k) {
      const double a = k * 2 * M_PI / 3;
      const cv::Point p(c.x + static_cast<int>(s * 0.38 * std::cos(a)), c.y + static_cast<int>(s * 0.38 * std::sin(a)));
      const cv::Point q(c.x + static_cast<int>(s * 0.22 * std::cos(a + 0.6)), c.y + static_cast<int>(s * 0.22 * std::sin(a + 0.6)));
      cv::arrowedLine(img, q, p, green, std::max(2, s / 24), cv::LINE_AA, 0, 0.4);
    }
  } else if (id == "child_safety") {
    cv::circle(img, {s / 2, s * 35 / 100}, s / 9, ink, cv::FILLED, cv::LINE_AA);
    cv::ellipse(img, {s / 2, s * 68 / 100}, {s / 7, s / 5}, 0, 0, 360, ink, cv::FILLED, cv::LINE_AA);
    cv::circle(img, c, s * 42 / 100, red, std::max(3, s / 14), cv::LINE_AA);
    cv::line(img, {s / 5, s / 5}, {s * 4 / 5, s * 4 / 5}, red, std::max(3, s / 14), cv::LINE_AA);
  } else if (id == "water") {
    cv::circle(img, {s / 2, s * 6 / 10}, s / 5, blue, cv::FILLED, cv::LINE_AA);
    std::vector<cv::Point> tip = {{s / 2, s / 6}, {s * 31 / 100, s * 55 / 100}, {s * 69 / 100, s * 55 / 100}};
    cv::fillConvexPoly(img, tip, blue, cv::LINE_AA);
    cv::circle(img, c, s * 44 / 100, red, std::max(3, s / 16), cv::LINE_AA);
    cv::line(img, {s / 5, s / 5}, {s * 4 / 5, s * 4 / 5}, red, std::max(3, s / 16), cv::LINE_AA);
  } else if (id == "ventilation") {
    cv::rectangle(img, {s / 8, s / 8}, {s - s / 8, s - s / 8}, ink, std::max(2, s / 24));
    for (int k = 1; k <= 4; ++k) {
      const int y = s / 8 + k * (s * 3 / 4) / 5;
      cv::line(img, {s / 4, y}, {s * 3 / 4, y}, ink, std::max(2, s / 24), cv::LINE_AA);
    }
  } else {
    throw Error(Errc::precondition_violated, "unknown icon '" + id + "'");
  }
}

}  // namespace

std::string_view to_string(TaskTextFormat f) { return kFormatNames[static_cast<int>(f)]; }

TaskTextFormat task_text_format_from_string(std::string_view s) {
  for (auto f : kAllTaskTextFormats) {
    if (to_string(f) == s) return f;
  }
  throw Error(Errc::malformed_document, "unknown task text format '" + std::string(s) + "'");
}

json to_json(const ManualStyle& s) {
  json g = json::object();
  for (const auto& [part, strat] : s.guidance_strategy_per_part) g[part] = to_string(strat);
  return {{"cover_style", to_string(s.cover_style)},
          {"diagram_style", to_string(s.diagram_style)},
          {"guidance_strategy_per_part", g},
          {"task_text_format", to_string(s.task_text_format)},
          {"icon_set", s.icon_set},
          {"seed", s.seed}};
}

ManualStyle manual_style_from_json(const json& j) {
  try {
    ManualStyle s;
    s.cover_style = figure_style_from_string(j.at("cover_style").get<std::string>());
    s.diagram_style = figure_style_from_string(j.at("diagram_style").get<std::string>());
    for (const auto& [part, strat] : j.at("guidance_strategy_per_part").items()) {
      s.guidance_strategy_per_part[part] = guidance_strategy_from_string(strat.get<std::string>());
    }
    s.task_text_format = task_text_format_from_string(j.at("task_text_format").get<std::string>());
    s.icon_set = j.at("icon_set").get<std::vector<std::string>>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_document, std::string("manual style: ") + e.what());
  }
}

ManualStyle sample_manual_style(const ApplianceModel& model, const ApplianceInstance& instance, std::uint64_t seed) {
  if (!instance.approved()) throw Error(Errc::precondition_violated, instance.instance_id + " is not approved");
  std::mt19937_64 rng(mix_seed(seed, instance.instance_id));
  ManualStyle s;
  s.seed = seed;
  s.cover_style = std::bernoulli_distribution(0.5)(rng) ? FigureStyle::sketch : FigureStyle::rgb;
  s.diagram_style = std::bernoulli_distribution(0.5)(rng) ? FigureStyle::sketch : FigureStyle::rgb;
  s.task_text_format = kAllTaskTextFormats[std::uniform_int_distribution<std::size_t>(0, 4)(rng)];
  for (const auto& part : model.parts) {
    const auto valid = valid_strategies(model, part);
    s.guidance_strategy_per_part[part.part_id] = pick(valid, rng);
  }
  std::vector<std::string> ids;
  for (const auto& icon : icon_catalog()) ids.push_back(icon.id);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(std::uniform_int_distribution<std::size_t>(3, 5)(rng));
  for (const auto& icon : icon_catalog()) {
    if (std::find(ids.begin(), ids.end(), icon.id) != ids.end()) s.icon_set.push_back(icon.id);
  }
  return s;
}

const std::vector<IconSpec>& icon_catalog() {
  static const std::vector<IconSpec> catalog = {
      {"general_warning", "Warning", "Read all instructions before using the appliance."},
      {"hot_surface", "Hot surface", "Surfaces become hot during use. Do not touch them."},
      {"electric_shock", "Electric shock", "Unplug the appliance before cleaning or maintenance."},
      {"fragile", "Fragile", "Handle glass and plastic parts with care."},
      {"environment", "Environmental protection", "Dispose of the appliance at a recycling point."},
      {"child_safety", "Child safety", "Keep children away from the appliance while it operates."},
      {"water", "Keep dry", "Do not immerse the appliance in water."},
      {"ventilation", "Ventilation", "Keep the air vents free of obstructions."}};
  return catalog;
}

const IconSpec& icon(const std::string& id) {
  for (const auto& i : icon_catalog()) {
    if (i.id == id) return i;
  }
  throw Error(Errc::precondition_violated, "unknown icon '" + id + "'");
}

cv::Mat render_icon(const std::string& id, int size) {
  if (size < 16) throw Error(Errc::precondition_violated, "icon size below 16 px");
  cv::Mat img(size, size, CV_8UC3, cv::Scalar(255, 255, 255));
  draw_icon(img, id);
  return img;
}

std::string manual_title(const ApplianceModel& model) { return pretty_category(model.category) + " User Manual"; }

std::string assemble_manual(const std::string& title, const std::vector<std::string>& sections) {
  std::string doc = manual_preamble(title);
  for (const auto& s : sections) {
    doc += s;
    if (!s.empty() && s.back() != '\n') doc += "\n";
  }
  return doc + manual_closing();
}

std::string section_role_prompt(const std::string& section) {
  std::ostringstream os;
  os << "You write one section of a household appliance user manual in LaTeX. Continue the document below with the '"
     << section << "' section only. Do not repeat the preamble and do not emit \\documentclass, \\usepackage, "
     << "\\begin{document} or \\end{document}. Use every function name exactly as given. The document loads only these "
     << "packages: ";
  for (std::size_t i = 0; i < package_whitelist().size(); ++i) os << (i ? ", " : "") << package_whitelist()[i];
  os << ". Figures are referenced by the paths given in the context. Available safety icons:\n";
  for (const auto& i : icon_catalog()) os << "- " << i.id << ": " << i.title << ". " << i.text << "\n";
  return os.str();
}

std::string generate_section(const json& context, const std::vector<std::string>& prior, BackendDispatcher& backend,
                             std::uint64_t seed, int attempt) {
  if (context_empty(context)) return {};
  BackendRequest req = section_request(context, prior, seed);
  req.attempt = attempt;
  return backend.call(req);
}

std::optional<std::string> clean_section(const std::string& raw, const json& context, std::string& why) {
  std::string text = raw;
  // Strip a surrounding ``` fence, with or without a language tag.
  const auto fence = text.find("```");
  if (fence != std::string::npos) {
    const auto body = text.find('\n', fence);
    const auto close = text.find("```", body == std::string::npos ? fence + 3 : body);
    if (body != std::string::npos && close != std::string::npos) text = text.substr(body + 1, close - body - 1);
  }
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    why = "empty section";
    return std::nullopt;
  }
  for (const char* banned : {"\\documentclass", "\\usepackage", "\\begin{document}", "\\end{document}"}) {
    if (text.find(banned) != std::string::npos) {
      why = std::string("section contains ") + banned;
      return std::nullopt;
    }
  }
  const std::string section = context.at("section").get<std::string>();
  if (section == "parts_overview" || section == "control_panel" || section == "guidance") {
    for (const auto& p : context.at("parts")) {
      const std::string name = p.at("function_name").get<std::string>();
      if (text.find(name) == std::string::npos && text.find(latex_escape(name)) == std::string::npos) {
        why = "section does not mention '" + name + "'";
        return std::nullopt;
      }
    }
  }
  if (text.back() != '\n') text += "\n";
  return text;
}

CommittedSection compile_incremental(const std::vector<CommittedSection>& committed, const json& context,
                                     const std::string& title, BackendDispatcher& backend, const fs::path& workdir,
                                     std::uint64_t seed, const CompileConfig& config) {
  const std::string section = context.at("section").get<std::string>();
  if (context_empty(context)) return {section, "", 0};
  std::vector<std::string> prior;
  for (const auto& c : committed) prior.push_back(c.latex);
  if (find_executable(config.compiler.program).empty()) {
    throw Error(Errc::compiler_missing, "LaTeX compiler '" + config.compiler.program + "' not found");
  }
  const BackendRequest req = section_request(context, prior, seed);
  auto result = call_with_regeneration<std::string>(
      backend, req, config.max_regen, [&](const std::string& out, std::string& why) -> std::optional<std::string> {
        auto latex = clean_section(out, context, why);
        if (!latex) return std::nullopt;
        std::vector<std::string> all = prior;
        all.push_back(*latex);
        const LatexOutcome o = compile_latex(config.compiler, assemble_manual(title, all), workdir);
        if (!o.ok) {
          why = "compile error: " + tail(o.log, 400);
          return std::nullopt;
        }
        return latex;
      });
  return {section, result.value, result.regen_count};
}

std::string ManualDocument::latex_source() const {
  std::vector<std::string> parts;
  for (const auto& s : sections) parts.push_back(s.latex);
  return assemble_manual(manifest.value("title", std::string("User Manual")), parts);
}

void select_manual_tasks(std::vector<ManipulationTask>& tasks, std::uint64_t seed) {
  std::vector<std::size_t> idx(tasks.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(mix_seed(seed, "manual_tasks"));
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t keep = (tasks.size() + 1) / 2;
  for (std::size_t k = 0; k < idx.size(); ++k) tasks[idx[k]].in_manual = k < keep;
}

ManualDocument build_manual(const ApplianceModel& model, const ApplianceInstance& instance,
                            const std::vector<ManipulationTask>& tasks, const std::vector<FigureAsset>& figures,
                            const ManualStyle& style, BackendDispatcher& backend, const std::string& manual_id,
                            const ManualBuildConfig& config) {
  if (!instance.approved()) throw Error(Errc::precondition_violated, instance.instance_id + " is not approved");
  for (const auto& t : tasks) {
    if (t.instance_id != instance.instance_id) {
      throw Error(Errc::precondition_violated, t.task_id + " belongs to another instance");
    }
    if (t.review_status == ReviewStatus::pending) throw Error(Errc::precondition_violated, t.task_id + " is not reviewed");
    if (const auto v = validate_task(t, instance); !v.empty()) {
      throw Error(Errc::precondition_violated, t.task_id + " is invalid: " + v.front().reason);
    }
  }

  ManualDocument doc;
  doc.manual_id = manual_id;
  doc.instance_id = instance.instance_id;
  doc.style = style;
  doc.dir = config.out_dir / manual_id;
  fs::create_directories(doc.dir);
  const std::string title = manual_title(model);

  auto rel = [&](const std::string& file) { return fs::relative(config.figure_dir / file, doc.dir).generic_string(); };
  auto find_figure = [&](FigureKind kind, FigureStyle fstyle, const std::string& part = {},
                         std::optional<GuidanceStrategy> strat = {}) -> const FigureAsset* {
    for (const auto& f : figures) {
      if (f.kind != kind) continue;
      if (kind != FigureKind::guidance && f.style != fstyle) continue;
      if (kind == FigureKind::overview_diagram && f.view != "main") continue;
      if (kind == FigureKind::guidance && (f.part_id != part || f.guidance_strategy != strat)) continue;
      if (f.review_status == ReviewStatus::pending) {
        throw Error(Errc::precondition_violated, "figure " + f.asset_id + " is not approved");
      }
      return &f;
    }
    return nullptr;
  };
  std::vector<std::string> used_figures;
  auto fig_json = [&](const FigureAsset& f) {
    used_figures.push_back(f.asset_id);
    return json{{"path", rel(f.image_ref)}, {"caption", f.caption}};
  };

  json base = {{"title", title}, {"category", to_string(model.category)},
               {"style", {{"task_text_format", to_string(style.task_text_format)},
                          {"cover_style", to_string(style.cover_style)},
                          {"diagram_style", to_string(style.diagram_style)}}}};
  std::vector<json> contexts;

  json cover = base;
  cover["section"] = "cover";
  cover["figures"] = json::array();
  if (const auto* f = find_figure(FigureKind::cover, style.cover_style)) cover["figures"].push_back(fig_json(*f));
  contexts.push_back(cover);

  json safety = base;
  safety["section"] = "safety";
  safety["icons"] = json::array();
  for (const auto& id : style.icon_set) {
    const IconSpec& spec = icon(id);
    const std::string file = write_png_asset(config.figure_dir, render_icon(id));
    safety["icons"].push_back({{"id", id}, {"path", rel(file)}, {"title", spec.title}, {"text", spec.text}});
  }
  contexts.push_back(safety);

  json overview = base;
  overview["section"] = "parts_overview";
  overview["parts"] = json::array();
  for (const auto& part : model.parts) overview["parts"].push_back(part_json(instance, part.part_id));
  overview["figures"] = json::array();
  if (const auto* f = find_figure(FigureKind::overview_diagram, style.diagram_style)) {
    overview["figures"].push_back(fig_json(*f));
  }
  contexts.push_back(overview);

  json panel = base;
  panel["section"] = "control_panel";
  panel["parts"] = json::array();
  panel["figures"] = json::array();
  int panel_figures = 0;
  std::vector<std::string> panel_parts;
  for (const auto& f : figures) {
    if (f.kind != FigureKind::control_panel || f.style != style.diagram_style) continue;
    if (f.review_status == ReviewStatus::pending) {
      throw Error(Errc::precondition_violated, "figure " + f.asset_id + " is not approved");
    }
    panel["figures"].push_back(fig_json(f));
    ++panel_figures;
    for (const auto& a : f.annotations) {
      if (std::find(panel_parts.begin(), panel_parts.end(), a.part_id) == panel_parts.end()) panel_parts.push_back(a.part_id);
    }
  }
  for (const auto& part : model.parts) {
    if (std::find(panel_parts.begin(), panel_parts.end(), part.part_id) != panel_parts.end()) {
      panel["parts"].push_back(part_json(instance, part.part_id));
    }
  }
  if (panel_figures > 0) contexts.push_back(panel);

  json guidance = base;
  guidance["section"] = "guidance";
  guidance["parts"] = json::array();
  json guidance_manifest = json::object();
  for (const auto& part : model.parts) {
    json p = part_json(instance, part.part_id);
    auto it = style.guidance_strategy_per_part.find(part.part_id);
    const GuidanceStrategy strat = it == style.guidance_strategy_per_part.end() ? GuidanceStrategy::text_only : it->second;
    guidance_manifest[part.part_id] = to_string(strat);
    const FigureAsset* f = find_figure(FigureKind::guidance, style.diagram_style, part.part_id, strat);
    p["guidance_text"] = f ? f->caption : "";
    p["strategy"] = to_string(strat);
    p["figure"] = f && !f->image_ref.empty() ? fig_json(*f) : json(nullptr);
    guidance["parts"].push_back(p);
  }
  contexts.push_back(guidance);

  json task_ctx = base;
  task_ctx["section"] = "tasks";
  task_ctx["tasks"] = json::array();
  json manifest_tasks = json::array();
  for (const auto& t : tasks) {
    if (!t.in_manual) continue;
    json steps = json::array(), msteps = json::array();
    for (const auto& s : t.steps) {
      steps.push_back({{"function_name", s.function_name}, {"state", format_state(s.target_state)}});
      msteps.push_back({{"index", s.index}, {"function_name", s.function_name}, {"state", format_state(s.target_state)}});
    }
    task_ctx["tasks"].push_back({{"instruction", t.instruction}, {"steps", steps}});
    manifest_tasks.push_back({{"task_id", t.task_id}, {"instruction", t.instruction}, {"steps", msteps}});
  }
  contexts.push_back(task_ctx);

  for (const auto& ctx : contexts) {
    const std::string name = ctx.at("section").get<std::string>();
    CommittedSection c =
        compile_incremental(doc.sections, ctx, title, backend, doc.dir, mix_seed(style.seed, name), config.compile);
    if (!c.latex.empty()) doc.sections.push_back(std::move(c));
  }

  // The committed sections must compile from scratch.
  std::vector<std::string> parts;
  for (const auto& s : doc.sections) parts.push_back(s.latex);
  const std::string source = assemble_manual(title, parts);
  const LatexOutcome final_run = compile_latex(config.compile.compiler, source, doc.dir);
  if (!final_run.ok) throw Error(Errc::compile_error, "committed sections fail to recompile: " + tail(final_run.log));
  doc.page_count = final_run.pages;

  json names = json::object(), states = json::object();
  for (const auto& [part, name] : instance.function_annotation) {
    names[part] = name;
    states[part] = states_json(instance, part);
  }
  json sections = json::array();
  for (const auto& s : doc.sections) sections.push_back({{"name", s.name}, {"regen_count", s.regen_count}});
  doc.manifest = {{"schema_version", kManifestSchemaVersion},
                  {"manual_id", manual_id},
                  {"instance_id", instance.instance_id},
                  {"model_id", model.model_id},
                  {"category", to_string(model.category)},
                  {"title", title},
                  {"parts", names},
                  {"states", states},
                  {"tasks", manifest_tasks},
                  {"figures", used_figures},
                  {"panel_figures", panel_figures},
                  {"guidance", guidance_manifest},
                  {"style", to_json(style)},
                  {"sections", sections},
                  {"page_count", doc.page_count},
                  {"tex", doc.tex_ref},
                  {"pdf", doc.pdf_ref}};
  if (fs::exists(doc.dir / "manual.layout.json")) doc.manifest["layout"] = "manual.layout.json";
  write_text_file(doc.dir / "manifest.json", doc.manifest.dump(2) + "\n");
  return doc;
}

std::vector<ManualDocument> build_instance_manuals(const ApplianceModel& model, const ApplianceInstance& instance,
                                                   const std::vector<ManipulationTask>& tasks,
                                                   const std::vector<FigureAsset>& figures, int count,
                                                   BackendDispatcher& backend, std::uint64_t seed,
                                                   const ManualBuildConfig& config) {
  if (count < 0) throw Error(Errc::precondition_violated, "negative manual count");
  std::vector<ManualDocument> out(static_cast<std::size_t>(count));
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < count; ++k) {
    try {
      const ManualStyle style = sample_manual_style(model, instance, mix_seed(seed, static_cast<std::uint64_t>(k + 1)));
      out[static_cast<std::size_t>(k)] = build_manual(model, instance, tasks, figures, style, backend,
                                                      instance.instance_id + "_manual" + std::to_string(k), config);
    } catch (...) {
#pragma omp critical(manual_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace manualkit
