#include "manualkit/service/pipeline.hpp"

#include "manualkit/backend/synthetic.hpp"
#include "manualkit/core/error.hpp"
#include "manualkit/core/loader.hpp"
#include "manualkit/figures/renderer.hpp"
#include "manualkit/image/io.hpp"

#include <algorithm>

namespace manualkit {

namespace fs = std::filesystem;

namespace {

ReviewStatus initial_status(const PipelineOptions& o) {
  return o.auto_approve ? ReviewStatus::approved : ReviewStatus::pending;
}

bool reviewed(const std::vector<ManipulationTask>& tasks) {
  return !tasks.empty() && std::all_of(tasks.begin(), tasks.end(), [](const ManipulationTask& t) {
    return t.review_status != ReviewStatus::pending;
  });
}

bool reviewed(const std::vector<FigureAsset>& figures) {
  return !figures.empty() && std::all_of(figures.begin(), figures.end(), [](const FigureAsset& f) {
    return f.review_status != ReviewStatus::pending;
  });
}

}  // namespace

std::vector<std::string> ingest_models(Dataset& dataset, const fs::path& models_dir) {
  if (!fs::is_directory(models_dir)) throw Error(Errc::validation_error, "no models: " + models_dir.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(models_dir)) {
    if (e.is_directory() && fs::exists(e.path() / "mobility.urdf")) dirs.push_back(e.path());
  }
  if (dirs.empty()) throw Error(Errc::validation_error, "no models under " + models_dir.string());
  std::sort(dirs.begin(), dirs.end());
  std::vector<std::string> ids;
  for (const auto& d : dirs) {
    const ModelSources sources = read_model_sources(d);
    const ApplianceModel model = load_appliance_model(sources);
    dataset.put_model(sources, model);
    ids.push_back(model.model_id);
  }
  return ids;
}

std::vector<std::string> annotate_dataset(Dataset& dataset, BackendDispatcher& backend, int per_model,
                                          const PipelineOptions& options) {
  const auto model_ids = dataset.model_ids();
  if (model_ids.empty()) throw Error(Errc::validation_error, "no models in the dataset");
  SchematicRenderer renderer;
  std::vector<std::string> ids;
  for (const auto& model_id : model_ids) {
    const ApplianceModel model = dataset.model(model_id);
    OverviewPrompt overview = numbered_overview(model);
    std::map<std::string, std::string> labels;
    for (const auto& [text, part] : overview.id_labels) labels[part] = text;
    const OverviewRender render = render_overview(model, renderer, labels);
    overview.image_ref = (dataset.figures_dir() / write_png_asset(dataset.figures_dir(), render.annotated.image)).string();
    auto instances = create_instances(model, per_model, overview, backend, mix_seed(options.seed, model_id));
    for (std::size_t k = 0; k < instances.size(); ++k) {
      auto& inst = instances[k];
      inst.instance_id = model_id + "_inst" + std::to_string(k + 1);
      inst.review_status = initial_status(options);
      dataset.put_instance(inst);
      ids.push_back(inst.instance_id);
    }
  }
  return ids;
}

std::vector<std::string> generate_dataset_tasks(Dataset& dataset, BackendDispatcher& backend, int per_instance,
                                                const PipelineOptions& options) {
  std::vector<std::string> ids;
  for (const auto& id : dataset.instance_ids()) {
    const ApplianceInstance inst = dataset.instance(id);
    if (!inst.approved() || !dataset.tasks_for(id).empty()) continue;
    const ApplianceModel model = dataset.model(inst.model_id);
    const std::uint64_t seed = mix_seed(options.seed, id);
    auto tasks = generate_tasks(model, inst, per_instance, backend, seed);
    select_manual_tasks(tasks, seed);
    for (auto& t : tasks) {
      t.review_status = initial_status(options);
      dataset.put_task(t);
      ids.push_back(t.task_id);
    }
  }
  return ids;
}

std::vector<std::string> build_dataset_figures(Dataset& dataset, Renderer& renderer, BackgroundBackend& background,
                                               const FigureConfig& config, const PipelineOptions& options) {
  std::vector<std::string> ids;
  for (const auto& id : dataset.instance_ids()) {
    const ApplianceInstance inst = dataset.instance(id);
    if (!inst.approved() || dataset.has_figures(id)) continue;
    const ApplianceModel model = dataset.model(inst.model_id);
    auto figures = build_instance_figures(model, inst, renderer, background, dataset.figures_dir(),
                                          mix_seed(options.seed, id), config);
    for (auto& f : figures) f.review_status = initial_status(options);
    dataset.put_figures(id, figures);
    ids.push_back(id);
  }
  return ids;
}

std::vector<std::string> build_dataset_manuals(Dataset& dataset, BackendDispatcher& backend, int per_instance,
                                               const CompileConfig& compile, const PipelineOptions& options) {
  std::vector<std::string> ids;
  const ManualBuildConfig config{compile, dataset.figures_dir(), dataset.manuals_dir()};
  for (const auto& id : dataset.instance_ids()) {
    const ApplianceInstance inst = dataset.instance(id);
    if (!inst.approved() || !dataset.has_figures(id) || !dataset.manuals_for(id).empty()) continue;
    const auto tasks = dataset.tasks_for(id);
    const auto figures = dataset.figures_for(id);
    if (!reviewed(tasks) || !reviewed(figures)) continue;
    const ApplianceModel model = dataset.model(inst.model_id);
    const auto docs = build_instance_manuals(model, inst, tasks, figures, per_instance, backend,
                                             mix_seed(options.seed, id), config);
    for (const auto& d : docs) {
      dataset.register_manual(d.manual_id);
      ids.push_back(d.manual_id);
    }
  }
  return ids;
}

void build_mock_dataset(Dataset& dataset, const MockDatasetSpec& spec) {
  BackendDispatcher backend(std::make_shared<SyntheticBackend>());
  SchematicRenderer renderer;
  FlatBackgroundBackend background;
  PipelineOptions options{spec.seed, true};
  ingest_models(dataset, spec.models_dir);
  annotate_dataset(dataset, backend, spec.instances_per_model, options);
  generate_dataset_tasks(dataset, backend, spec.tasks_per_instance, options);
  build_dataset_figures(dataset, renderer, background, spec.figures, options);
  build_dataset_manuals(dataset, backend, spec.manuals_per_instance, spec.compile, options);
}

}  // namespace manualkit
