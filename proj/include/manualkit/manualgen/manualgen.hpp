#pragma once

#include "manualkit/figures/figures.hpp"
#include "manualkit/manualgen/latex.hpp"
#include "manualkit/taskgen/taskgen.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace manualkit {

inline constexpr int kManifestSchemaVersion = 1;

enum class TaskTextFormat { prose, bullet_list, ordered_list, table_1col, table_multicol };
inline constexpr std::array<TaskTextFormat, 5> kAllTaskTextFormats = {
    TaskTextFormat::prose, TaskTextFormat::bullet_list, TaskTextFormat::ordered_list, TaskTextFormat::table_1col,
    TaskTextFormat::table_multicol};
std::string_view to_string(TaskTextFormat format);
TaskTextFormat task_text_format_from_string(std::string_view s);

struct ManualStyle {
  FigureStyle cover_style = FigureStyle::rgb;
  FigureStyle diagram_style = FigureStyle::rgb;
  std::map<std::string, GuidanceStrategy> guidance_strategy_per_part;
  TaskTextFormat task_text_format = TaskTextFormat::ordered_list;
  std::vector<std::string> icon_set;
  std::uint64_t seed = 0;
};

json to_json(const ManualStyle& style);
ManualStyle manual_style_from_json(const json& j);

/// Seeded style for one manual: cover and diagram rendering, one valid
/// guidance strategy per part, task text format and three to five icons.
ManualStyle sample_manual_style(const ApplianceModel& model, const ApplianceInstance& instance, std::uint64_t seed);

// ---- icons ----------------------------------------------------------------

struct IconSpec {
  std::string id;
  std::string title;
  std::string text;
};

const std::vector<IconSpec>& icon_catalog();
const IconSpec& icon(const std::string& id);
/// Procedural pictogram for a catalog icon.
cv::Mat render_icon(const std::string& id, int size = 96);

// ---- sections -------------------------------------------------------------

/// Section names in manual order.
inline const std::vector<std::string> kSectionOrder = {"cover", "safety", "parts_overview", "control_panel", "guidance",
                                                        "tasks"};

std::string manual_title(const ApplianceModel& model);

/// Preamble, sections and closing as one compilable document.
std::string assemble_manual(const std::string& title, const std::vector<std::string>& sections);

/// Prompt for one section: instructions, the package whitelist and the
/// icon catalog.
std::string section_role_prompt(const std::string& section);

/// One section of LaTeX from the backend for `context` (see
/// build_section_context). An empty-content section (no parts, no tasks)
/// returns "" without calling the backend.
std::string generate_section(const json& context, const std::vector<std::string>& prior_sections,
                             BackendDispatcher& backend, std::uint64_t seed, int attempt = 0);

/// Code fences stripped; nullopt with `why` when the text is not a
/// stand-alone section (preamble commands, \usepackage, a missing part name).
std::optional<std::string> clean_section(const std::string& raw, const json& context, std::string& why);

struct CommittedSection {
  std::string name;
  std::string latex;
  int regen_count = 0;
};

struct CompileConfig {
  LatexCompiler compiler = default_latex_compiler();
  int max_regen = 3;
};

/// Generates `context.section`, appends it to the committed sections and
/// compiles the whole document. A failing section is discarded and
/// regenerated up to max_regen times. Throws RegenerationExhausted or
/// Error(compiler_missing).
CommittedSection compile_incremental(const std::vector<CommittedSection>& committed, const json& context,
                                     const std::string& title, BackendDispatcher& backend,
                                     const std::filesystem::path& workdir, std::uint64_t seed,
                                     const CompileConfig& config = {});

// ---- manuals --------------------------------------------------------------

struct ManualDocument {
  std::string manual_id;
  std::string instance_id;
  ManualStyle style;
  std::vector<CommittedSection> sections;
  std::filesystem::path dir;
  std::string tex_ref = "manual.tex";
  std::string pdf_ref = "manual.pdf";
  json manifest;
  int page_count = 0;

  std::string latex_source() const;
};

/// Marks a seeded ceil(n/2) subset of the tasks as demonstrated in the
/// manual; the rest stay evaluation-only.
void select_manual_tasks(std::vector<ManipulationTask>& tasks, std::uint64_t seed);

struct ManualBuildConfig {
  CompileConfig compile;
  std::filesystem::path figure_dir;  // where the figure assets live
  std::filesystem::path out_dir;     // manuals go to out_dir/<manual_id>
};

/// Section-by-section build with the fixed order cover, safety, parts
/// overview, control panel (when panel figures exist), guidance, tasks.
/// Writes manual.tex, manual.pdf and manifest.json under out_dir/<manual_id>.
ManualDocument build_manual(const ApplianceModel& model, const ApplianceInstance& instance,
                            const std::vector<ManipulationTask>& tasks, const std::vector<FigureAsset>& figures,
                            const ManualStyle& style, BackendDispatcher& backend, const std::string& manual_id,
                            const ManualBuildConfig& config);

/// `count` manuals with independently seeded styles, built in parallel;
/// ids are `<instance_id>_manual<k>`.
std::vector<ManualDocument> build_instance_manuals(const ApplianceModel& model, const ApplianceInstance& instance,
                                                   const std::vector<ManipulationTask>& tasks,
                                                   const std::vector<FigureAsset>& figures, int count,
                                                   BackendDispatcher& backend, std::uint64_t seed,
                                                   const ManualBuildConfig& config);

}  // namespace manualkit
