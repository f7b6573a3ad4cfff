#include "manualkit/evalharness/evalharness.hpp"

#include "manualkit/annotation/annotation.hpp"
#include "manualkit/core/error.hpp"
#include "manualkit/figures/camera.hpp"
#include "manualkit/image/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>

namespace manualkit {

namespace fs = std::filesystem;

// ---- scoring ----------------------------------------------------------------

double completion_rate(const std::vector<bool>& step_successes) {
  if (step_successes.empty()) return 0.0;
  const auto first_fail = std::find(step_successes.begin(), step_successes.end(), false);
  return static_cast<double>(first_fail - step_successes.begin()) / static_cast<double>(step_successes.size());
}

bool evaluate_alignment(const PartAlignment& predicted, const PartAlignment& ground_truth) {
  for (const auto& [part, name] : ground_truth) {
    const auto it = predicted.find(part);
    if (it == predicted.end() || normalize_name(it->second) != normalize_name(name)) return false;
  }
  return true;
}

std::string resolve_aligned_name(const PartAlignment& alignment, const std::string& name) {
  const std::string key = normalize_name(name);
  for (const auto& [part, n] : alignment) {
    if (normalize_name(n) == key) return part;
  }
  return {};
}

bool evaluate_plan(const Plan& plan, const std::vector<TaskStep>& ground_truth, const PartAlignment& gt_names,
                   const PartAlignment& alignment) {
  if (plan.steps.size() != ground_truth.size() || ground_truth.empty()) return false;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    const std::string gt_part = resolve_aligned_name(gt_names, ground_truth[i].function_name);
    const std::string part = resolve_aligned_name(alignment, plan.steps[i].function_name);
    if (gt_part.empty() || part != gt_part) return false;
    const auto state = parse_state(plan.steps[i].action_phrase);
    if (!state || !(*state == ground_truth[i].target_state)) return false;
  }
  return true;
}

// ---- episode records --------------------------------------------------------

int track_number(Track track) { return static_cast<int>(track); }

Track track_from_number(int n) {
  if (n < 1 || n > 3) throw Error(Errc::validation_error, "track must be 1, 2 or 3, got " + std::to_string(n));
  return static_cast<Track>(n);
}

std::string EpisodeConfig::episode_id() const {
  return "t" + std::to_string(track_number(track)) + "_" + task_id + "_" + (manual_id.empty() ? "none" : manual_id) +
         (with_manual ? "" : "_nomanual");
}

namespace {

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

json to_json(const EpisodeResult& r) {
  return {{"episode_id", r.episode_id},
          {"track", track_number(r.track)},
          {"with_manual", r.with_manual},
          {"instance_id", r.instance_id},
          {"manual_id", r.manual_id},
          {"task_id", r.task_id},
          {"category", r.category},
          {"alignment_success", optional_json(r.alignment_success)},
          {"planning_success", optional_json(r.planning_success)},
          {"step_successes", r.step_successes},
          {"task_success", r.task_success},
          {"completion_rate", r.completion_rate},
          {"failure_step", optional_json(r.failure_step)},
          {"backend_call_counts", r.backend_call_counts},
          {"error", r.error}};
}

EpisodeResult episode_result_from_json(const json& j) {
  EpisodeResult r;
  r.episode_id = j.at("episode_id").get<std::string>();
  r.track = track_from_number(j.at("track").get<int>());
  r.with_manual = j.at("with_manual").get<bool>();
  r.instance_id = j.at("instance_id").get<std::string>();
  r.manual_id = j.at("manual_id").get<std::string>();
  r.task_id = j.at("task_id").get<std::string>();
  r.category = j.at("category").get<std::string>();
  r.alignment_success = optional_from<bool>(j, "alignment_success");
  r.planning_success = optional_from<bool>(j, "planning_success");
  r.step_successes = j.at("step_successes").get<std::vector<bool>>();
  r.task_success = j.at("task_success").get<bool>();
  r.completion_rate = j.at("completion_rate").get<double>();
  r.failure_step = optional_from<int>(j, "failure_step");
  r.backend_call_counts = j.value("backend_call_counts", std::map<std::string, int>{});
  r.error = j.value("error", "");
  return r;
}

void write_episodes_jsonl(const fs::path& path, const std::vector<EpisodeResult>& results) {
  std::string out;
  for (const auto& r : results) out += to_json(r).dump() + "\n";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text_file(path, out);
}

std::vector<EpisodeResult> read_episodes_jsonl(const fs::path& path) {
  std::vector<EpisodeResult> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(episode_result_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(Errc::malformed_document, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// ---- oracle backend ---------------------------------------------------------

OracleBackend::OracleBackend(ApplianceModel model, ApplianceInstance instance, std::vector<ManipulationTask> tasks)
    : model_(std::move(model)), instance_(std::move(instance)), tasks_(std::move(tasks)) {}

std::string OracleBackend::complete(const BackendRequest& request) {
  switch (request.capability) {
    case Capability::plan_from_manual: return plan_answer(request);
    case Capability::alignment_from_images: return alignment_answer(request);
    default: throw Error(Errc::backend_unavailable, "oracle backend cannot answer " + std::string(to_string(request.capability)));
  }
}

std::string OracleBackend::generic_name(const std::string& part_id, bool for_plan) const {
  const PartSpec& part = model_.part(part_id);
  std::string type(to_string(part.part_type));
  type[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(type[0])));
  int same = 0, ordinal = 0;
  for (const auto& p : model_.parts) {
    if (p.part_type != part.part_type) continue;
    ++same;
    if (p.part_id == part_id) ordinal = same;
  }
  if (same == 1) return type;
  // Without the manual the planner cannot tell same-type parts apart.
  return type + " " + std::to_string(for_plan ? 1 : ordinal);
}

std::string OracleBackend::plan_answer(const BackendRequest& request) const {
  const std::string instruction = request.context.value("instruction", "");
  const bool manual = request.context.value("manual_available", false);
  const std::string manual_text = normalize_name(request.context.value("manual_text", ""));
  const auto task = std::find_if(tasks_.begin(), tasks_.end(),
                                 [&](const ManipulationTask& t) { return t.instruction == instruction; });
  if (task == tasks_.end()) return "I do not know how to perform this task.";
  Plan plan;
  for (const auto& step : task->steps) {
    const std::string part = instance_.part_for_name(step.function_name);
    const bool grounded = manual && manual_text.find(normalize_name(step.function_name)) != std::string::npos;
    PlanStep ps;
    ps.function_name = grounded || part.empty() ? step.function_name : generic_name(part, true);
    StateLabel label = step.target_state;
    if (!grounded) {
      if (label.kind == StateLabel::Kind::push) label = StateLabel::push(1);
      if (label.kind == StateLabel::Kind::rotate) label = StateLabel::rotate(60.0);
    }
    ps.action_phrase = format_state(label);
    plan.steps.push_back(ps);
  }
  return format_plan(plan);
}

std::string OracleBackend::alignment_answer(const BackendRequest& request) const {
  const bool manual = request.context.value("manual_available", false);
  std::ostringstream out;
  for (const auto& m : request.context.value("masks", json::array())) {
    const std::string part = m.value("gt_part_id", "");
    if (part.empty() || !model_.find_part(part)) continue;
    const auto it = instance_.function_annotation.find(part);
    const std::string name =
        manual && it != instance_.function_annotation.end() ? it->second : generic_name(part, false);
    out << "mask " << m.at("mask_id").get<int>() << " -> " << name << "\n";
  }
  return out.str();
}

// ---- episodes ---------------------------------------------------------------

namespace {

constexpr int kViewWidth = 320;
constexpr int kViewHeight = 240;
constexpr std::size_t kCadViews = 3;

struct EpisodeAssets {
  ApplianceModel model;
  ApplianceInstance instance;
  ManipulationTask task;
  std::vector<ManipulationTask> tasks;
  fs::path pdf;
};

EpisodeAssets load_assets(const Dataset& dataset, const EpisodeConfig& config) {
  EpisodeAssets a;
  a.instance = dataset.instance(config.instance_id);
  a.model = dataset.model(a.instance.model_id);
  a.task = dataset.task(config.task_id);
  if (a.task.instance_id != a.instance.instance_id) {
    throw Error(Errc::validation_error, "task " + config.task_id + " belongs to " + a.task.instance_id);
  }
  a.tasks = dataset.tasks_for(a.instance.instance_id);
  if (config.with_manual) {
    if (config.manual_id.empty()) throw Error(Errc::dataset_asset_missing, "episode needs a manual_id");
    const json manifest = dataset.manual_manifest(config.manual_id);
    a.pdf = dataset.manual_dir(config.manual_id) / manifest.at("pdf").get<std::string>();
    if (!fs::exists(a.pdf)) throw Error(Errc::dataset_asset_missing, "missing " + a.pdf.string());
  }
  return a;
}

std::vector<RenderOutput> cad_views(Renderer& renderer, const ApplianceModel& model) {
  auto poses = candidate_poses(model);
  if (poses.size() > kCadViews) poses.resize(kCadViews);
  std::vector<RenderOutput> views;
  const ApplianceState rest = ApplianceState::at_rest(model);
  for (const auto& pose : poses) views.push_back(renderer.render(model, rest, pose, {kViewWidth, kViewHeight}));
  return views;
}

// Runs the plan on the kinematic executor; returns one flag per ground-truth
// step, false from the first failure on.
std::vector<bool> execute_plan(const ApplianceModel& model, const ManipulationTask& task, const Plan& plan,
                               const PartAlignment& alignment, const PartAlignment& gt_names,
                               const ExecutorNoise& noise) {
  std::vector<bool> ok(task.steps.size(), false);
  NoiseSampler sampler(noise);
  const bool noisy = noise.pose_noise || noise.executor_failure_rate > 0.0;
  ApplianceState state = ApplianceState::at_rest(model);
  for (std::size_t i = 0; i < task.steps.size(); ++i) {
    if (i >= plan.steps.size()) break;
    const std::string part_id = resolve_aligned_name(alignment, plan.steps[i].function_name);
    const auto label = parse_state(plan.steps[i].action_phrase);
    const PartSpec* part = part_id.empty() ? nullptr : model.find_part(part_id);
    if (!part || !label || !state_valid_for_part(model, *part, *label)) break;
    const ActionCommand cmd = command_for_state(model, state, *part, *label);
    const ActionOutcome outcome = apply_action(model, state, cmd, noisy ? &sampler : nullptr);
    const PartSpec* target = model.find_part(resolve_aligned_name(gt_names, task.steps[i].function_name));
    if (!target || !check_step_success(model, outcome.step, *target, task.steps[i].target_state)) break;
    ok[i] = true;
    state = outcome.state;
  }
  return ok;
}

}  // namespace

EpisodeResult run_episode(const Dataset& dataset, const EpisodeConfig& config, const BackendBundle& bundle) {
  const EpisodeAssets a = load_assets(dataset, config);

  EpisodeResult r;
  r.episode_id = config.episode_id();
  r.track = config.track;
  r.with_manual = config.with_manual;
  r.instance_id = config.instance_id;
  r.manual_id = config.manual_id;
  r.task_id = config.task_id;
  r.category = std::string(to_string(a.model.category));
  r.step_successes.assign(a.task.steps.size(), false);

  std::shared_ptr<Backend> mllm = bundle.mllm;
  if (!mllm) mllm = std::make_shared<OracleBackend>(a.model, a.instance, a.tasks);
  BackendDispatcher dispatcher(mllm);
  std::shared_ptr<Renderer> renderer = bundle.renderer ? bundle.renderer : std::make_shared<SchematicRenderer>();

  const PartAlignment& gt_names = a.instance.function_annotation;
  try {
    ResolvedManual manual;
    std::vector<std::string> diagram_refs;
    if (config.with_manual) {
      LayoutOcrBackend default_ocr;
      LayoutElementBackend default_elements;
      OcrBackend& ocr = bundle.ocr ? *bundle.ocr : default_ocr;
      ElementBackend& elements = bundle.elements ? *bundle.elements : default_elements;
      manual = resolve_manual(a.pdf, ocr, elements);
      diagram_refs.push_back(a.pdf.string());
    }

    AlignConfig align_cfg;
    align_cfg.max_regen = bundle.max_align_regen;
    PartAlignment alignment;
    if (config.track == Track::manual_manipulation) {
      const CameraPose pose = candidate_poses(a.model).front();
      const RenderOutput render =
          renderer->render(a.model, ApplianceState::at_rest(a.model), pose, {kViewWidth, kViewHeight});
      const Observation obs = observation_from_render(render, pose);
      std::unique_ptr<DetectorBackend> det =
          bundle.detector ? bundle.detector(render) : std::make_unique<GroundTruthDetector>(render);
      std::unique_ptr<SegmenterBackend> seg =
          bundle.segmenter ? bundle.segmenter(render) : std::make_unique<GroundTruthSegmenter>(render);
      const AlignmentResult ar = align_parts(obs, *det, *seg, manual, diagram_refs, dispatcher,
                                             mix_seed(config.seed, "align"), align_cfg);
      const auto mask_parts = mask_part_ids(ar.masks, render);
      for (const auto& [mask_id, name] : ar.names) {
        const auto it = mask_parts.find(mask_id);
        if (it != mask_parts.end() && !it->second.empty()) alignment[it->second] = name;
      }
    } else {
      alignment = align_cad_parts(a.model, cad_views(*renderer, a.model), manual, diagram_refs, dispatcher,
                                  mix_seed(config.seed, "align"), align_cfg);
    }
    if (config.track == Track::aligned_planning && config.with_manual) {
      r.alignment_success = evaluate_alignment(alignment, gt_names);
    }

    PlanConfig plan_cfg;
    plan_cfg.max_regen = bundle.max_plan_regen;
    const PlanResult pr =
        plan_manipulation(a.task.instruction, manual, dispatcher, mix_seed(config.seed, "plan"), plan_cfg);

    if (config.track == Track::aligned_planning) {
      r.planning_success = evaluate_plan(pr.plan, a.task.steps, gt_names, alignment);
    } else {
      ExecutorNoise noise = config.noise;
      noise.seed = mix_seed(config.noise.seed, r.episode_id);
      r.step_successes = execute_plan(a.model, a.task, pr.plan, alignment, gt_names, noise);
    }
  } catch (const Error& e) {
    if (e.code() == Errc::dataset_asset_missing) throw;
    r.error = e.what();
    if (config.track == Track::aligned_planning) {
      if (config.with_manual && !r.alignment_success) r.alignment_success = false;
      if (!r.planning_success) r.planning_success = false;
    }
  }

  if (config.track == Track::aligned_planning) {
    r.task_success = r.planning_success.value_or(false);
    r.completion_rate = r.task_success ? 1.0 : 0.0;
    std::fill(r.step_successes.begin(), r.step_successes.end(), r.task_success);
  } else {
    r.completion_rate = completion_rate(r.step_successes);
    r.task_success = !r.step_successes.empty() &&
                     std::all_of(r.step_successes.begin(), r.step_successes.end(), [](bool b) { return b; });
  }
  const auto fail = std::find(r.step_successes.begin(), r.step_successes.end(), false);
  if (fail != r.step_successes.end()) r.failure_step = static_cast<int>(fail - r.step_successes.begin()) + 1;
  r.backend_call_counts = dispatcher.call_counts();
  return r;
}

std::vector<EpisodeConfig> plan_episodes(const Dataset& dataset, Track track, const ExecutorNoise& noise, bool ablation,
                                         std::uint64_t seed) {
  std::vector<EpisodeConfig> out;
  for (const auto& inst : dataset.instance_ids()) {
    const auto manuals = dataset.manuals_for(inst);
    if (manuals.empty()) continue;
    std::size_t k = 0;
    for (const auto& task : dataset.tasks_for(inst)) {
      EpisodeConfig c;
      c.track = track;
      c.instance_id = inst;
      c.manual_id = manuals[k++ % manuals.size()];
      c.task_id = task.task_id;
      c.noise = noise;
      c.seed = mix_seed(seed, task.task_id);
      out.push_back(c);
      if (ablation) {
        c.with_manual = false;
        out.push_back(c);
      }
    }
  }
  return out;
}

std::vector<EpisodeResult> run_episodes(const Dataset& dataset, const std::vector<EpisodeConfig>& configs,
                                        const BackendBundle& bundle) {
  std::vector<EpisodeResult> results(configs.size());
  std::exception_ptr failure;
  const long n = static_cast<long>(configs.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      results[static_cast<std::size_t>(i)] = run_episode(dataset, configs[static_cast<std::size_t>(i)], bundle);
    } catch (...) {
#pragma omp critical(manualkit_episodes)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

// ---- reports ----------------------------------------------------------------

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
  return buf;
}

namespace {

// Sorted before summing so the mean does not depend on episode order.
std::optional<double> mean(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

MetricCell make_cell(const std::vector<const EpisodeResult*>& episodes, Track track) {
  MetricCell cell;
  cell.episodes = static_cast<int>(episodes.size());
  std::vector<double> first, second;
  for (const auto* e : episodes) {
    if (track == Track::aligned_planning) {
      if (e->alignment_success) first.push_back(*e->alignment_success ? 1.0 : 0.0);
      if (e->planning_success) second.push_back(*e->planning_success ? 1.0 : 0.0);
    } else {
      first.push_back(e->completion_rate);
      second.push_back(e->task_success ? 1.0 : 0.0);
    }
  }
  cell.first = mean(first);
  cell.second = mean(second);
  return cell;
}

std::string cell_text(const MetricCell& c) {
  if (c.episodes == 0) return "";
  return (c.first ? format_percent(*c.first) : "--") + " / " + (c.second ? format_percent(*c.second) : "--");
}

std::string track_title(Track t) {
  switch (t) {
    case Track::aligned_planning: return "Track 1: Manual-CAD-Appliance Aligned Planning";
    case Track::cad_manipulation: return "Track 2: Manual & CAD based Manipulation";
    case Track::manual_manipulation: return "Track 3: Manual based Manipulation";
  }
  return "";
}

std::string row_label(const ReportRow& row) { return row.with_manual ? "ManualPlan" : "  w/o manual"; }

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

}  // namespace

MetricsReport aggregate(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw Error(Errc::empty_result_set, "no episode results to aggregate");
  MetricsReport report;
  for (Track t : {Track::aligned_planning, Track::cad_manipulation, Track::manual_manipulation}) {
    for (bool with : {true, false}) {
      std::vector<const EpisodeResult*> group;
      std::map<std::string, std::vector<const EpisodeResult*>> by_cat;
      for (const auto& r : results) {
        if (r.track != t || r.with_manual != with) continue;
        group.push_back(&r);
        by_cat[r.category].push_back(&r);
      }
      if (group.empty()) continue;
      ReportRow row;
      row.track = t;
      row.with_manual = with;
      for (const auto& [cat, eps] : by_cat) row.by_category[cat] = make_cell(eps, t);
      row.total = make_cell(group, t);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

std::string MetricsReport::to_text() const {
  std::vector<std::string> cols;
  for (Category c : kAllCategories) cols.emplace_back(to_string(c));
  constexpr std::size_t kLabel = 14, kCell = 17;
  std::ostringstream out;
  out << pad("Baseline", kLabel);
  for (const auto& c : cols) out << pad(c, kCell);
  out << "Total\n";
  std::optional<Track> current;
  for (const auto& row : rows) {
    if (current != row.track) {
      out << track_title(row.track) << "\n";
      current = row.track;
    }
    out << pad(row_label(row), kLabel);
    for (const auto& c : cols) {
      const auto it = row.by_category.find(c);
      out << pad(it == row.by_category.end() ? "" : cell_text(it->second), kCell);
    }
    out << cell_text(row.total) << "  (n=" << row.total.episodes << ")\n";
  }
  return out.str();
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "track,with_manual,category,episodes,metric_1,metric_2\n";
  auto line = [&](const ReportRow& row, const std::string& cat, const MetricCell& c) {
    out << track_number(row.track) << "," << (row.with_manual ? "true" : "false") << "," << cat << "," << c.episodes
        << "," << (c.first ? format_percent(*c.first) : "--") << "," << (c.second ? format_percent(*c.second) : "--")
        << "\n";
  };
  for (const auto& row : rows) {
    for (Category c : kAllCategories) {
      const auto it = row.by_category.find(std::string(to_string(c)));
      if (it != row.by_category.end()) line(row, it->first, it->second);
    }
    line(row, "total", row.total);
  }
  return out.str();
}

json MetricsReport::to_json() const {
  auto cell = [](const MetricCell& c) {
    return json{{"episodes", c.episodes},
                {"metric_1", c.first ? json(*c.first) : json(nullptr)},
                {"metric_2", c.second ? json(*c.second) : json(nullptr)}};
  };
  json out = json::array();
  for (const auto& row : rows) {
    json cats = json::object();
    for (const auto& [k, c] : row.by_category) cats[k] = cell(c);
    out.push_back({{"track", track_number(row.track)},
                   {"with_manual", row.with_manual},
                   {"categories", cats},
                   {"total", cell(row.total)}});
  }
  return out;
}

// ---- dataset statistics -----------------------------------------------------

json DatasetStats::to_json() const {
  json pc = json::object(), sl = json::object();
  for (const auto& [k, v] : part_count_histogram) pc[std::to_string(k)] = v;
  for (const auto& [k, v] : step_length_histogram) sl[std::to_string(k)] = v;
  return {{"models", models},
          {"instances", instances},
          {"manuals", manuals},
          {"parts", parts},
          {"tasks", tasks},
          {"categories", categories},
          {"parts_per_instance", parts_per_instance},
          {"part_types", part_types},
          {"category_proportions", category_proportions},
          {"part_count_histogram", pc},
          {"step_length_histogram", sl}};
}

DatasetStats dataset_stats(const json& index) {
  DatasetStats s;
  const json empty = json::object();
  const json& models = index.contains("models") ? index.at("models") : empty;
  const json& instances = index.contains("instances") ? index.at("instances") : empty;
  const json& tasks = index.contains("tasks") ? index.at("tasks") : empty;
  const json& manuals = index.contains("manuals") ? index.at("manuals") : empty;

  s.models = static_cast<int>(models.size());
  s.instances = static_cast<int>(instances.size());
  s.manuals = static_cast<int>(manuals.size());
  s.tasks = static_cast<int>(tasks.size());

  std::map<std::string, int> per_category;
  for (const auto& [id, inst] : instances.items()) {
    const int n = inst.value("parts", 0);
    s.parts += n;
    ++s.part_count_histogram[n];
    ++per_category[inst.value("category", "")];
    const auto m = models.find(inst.value("model_id", ""));
    if (m != models.end()) {
      for (const auto& t : m->value("part_types", json::array())) ++s.part_types[t.get<std::string>()];
    }
  }
  for (const auto& [id, t] : tasks.items()) ++s.step_length_histogram[t.value("steps", 0)];
  s.categories = static_cast<int>(per_category.size());
  if (s.instances > 0) {
    s.parts_per_instance = static_cast<double>(s.parts) / s.instances;
    for (const auto& [c, n] : per_category) s.category_proportions[c] = static_cast<double>(n) / s.instances;
  }
  return s;
}

}  // namespace manualkit
