#include "manualkit/service/dataset.hpp"

#include "manualkit/core/error.hpp"
#include "manualkit/core/json_io.hpp"
#include "manualkit/image/io.hpp"

#include <algorithm>

namespace manualkit {

namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& p) {
  if (!fs::exists(p)) throw Error(Errc::dataset_asset_missing, "missing " + p.string());
  try {
    return json::parse(read_text_file(p));
  } catch (const json::parse_error& e) {
    throw Error(Errc::malformed_document, p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  write_text_file(p, j.dump(2) + "\n");
}

std::vector<std::string> stems(const fs::path& dir, const std::string& ext) {
  std::vector<std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

json model_entry(const ApplianceModel& m) {
  json types = json::array();
  for (const auto& p : m.parts) types.push_back(to_string(p.part_type));
  return {{"category", to_string(m.category)}, {"parts", m.parts.size()}, {"part_types", types}};
}

json task_entry(const ManipulationTask& t) {
  return {{"instance_id", t.instance_id},
          {"steps", t.steps.size()},
          {"in_manual", t.in_manual},
          {"review_status", to_string(t.review_status)}};
}

json figures_entry(const std::vector<FigureAsset>& figures) {
  const auto approved = std::count_if(figures.begin(), figures.end(),
                                      [](const FigureAsset& f) { return f.review_status != ReviewStatus::pending; });
  return {{"count", figures.size()}, {"approved", approved}};
}

json manual_entry(const json& manifest) {
  return {{"instance_id", manifest.at("instance_id")}, {"page_count", manifest.at("page_count")}};
}

json empty_index() {
  return {{"schema_version", kDatasetSchemaVersion}, {"models", json::object()},  {"instances", json::object()},
          {"tasks", json::object()},                 {"figures", json::object()}, {"manuals", json::object()}};
}

}  // namespace

Dataset::Dataset(fs::path root) : root_(std::move(root)) {
  for (const auto& d : {models_dir(), instances_dir(), tasks_dir(), figures_dir(), manuals_dir(), episodes_dir(),
                        reports_dir(), review_dir()}) {
    fs::create_directories(d);
  }
  if (!fs::exists(root_ / "index.json")) write_json(root_ / "index.json", rebuild_index());
}

void Dataset::update_index(const std::function<void(json&)>& fn) {
  std::lock_guard lock(mutex_);
  json idx = fs::exists(root_ / "index.json") ? read_json(root_ / "index.json") : empty_index();
  fn(idx);
  write_json(root_ / "index.json", idx);
}

json Dataset::index() const {
  std::lock_guard lock(mutex_);
  return read_json(root_ / "index.json");
}

void Dataset::put_model(const ModelSources& sources, const ApplianceModel& model) {
  const fs::path dir = models_dir() / model.model_id;
  fs::create_directories(dir);
  write_text_file(dir / "mobility.urdf", sources.articulation_xml);
  write_text_file(dir / "semantics.txt", sources.semantics);
  write_json(dir / "meta.json", {{"model_cat", std::string(to_string(model.category))}});
  json j = to_json(model);
  j["schema_version"] = kDatasetSchemaVersion;
  write_json(dir / "model.json", j);
  update_index([&](json& idx) { idx["models"][model.model_id] = model_entry(model); });
}

std::vector<std::string> Dataset::model_ids() const {
  std::vector<std::string> out;
  if (!fs::exists(models_dir())) return out;
  for (const auto& e : fs::directory_iterator(models_dir())) {
    if (e.is_directory() && fs::exists(e.path() / "model.json")) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ApplianceModel Dataset::model(const std::string& model_id) const {
  return model_from_json(read_json(models_dir() / model_id / "model.json"));
}

json Dataset::instance_entry(const ApplianceInstance& instance) const {
  const ApplianceModel m = model(instance.model_id);
  return {{"model_id", instance.model_id},
          {"category", to_string(m.category)},
          {"parts", m.parts.size()},
          {"review_status", to_string(instance.review_status)}};
}

void Dataset::put_instance(const ApplianceInstance& instance) {
  json j = to_json(instance);
  j["schema_version"] = kDatasetSchemaVersion;
  const json entry = instance_entry(instance);
  write_json(instances_dir() / (instance.instance_id + ".json"), j);
  update_index([&](json& idx) { idx["instances"][instance.instance_id] = entry; });
}

std::vector<std::string> Dataset::instance_ids() const { return stems(instances_dir(), ".json"); }

ApplianceInstance Dataset::instance(const std::string& instance_id) const {
  return instance_from_json(read_json(instances_dir() / (instance_id + ".json")));
}

void Dataset::put_task(const ManipulationTask& task) {
  json j = to_json(task);
  j["schema_version"] = kDatasetSchemaVersion;
  write_json(tasks_dir() / (task.task_id + ".json"), j);
  update_index([&](json& idx) { idx["tasks"][task.task_id] = task_entry(task); });
}

std::vector<ManipulationTask> Dataset::tasks_for(const std::string& instance_id) const {
  std::vector<ManipulationTask> out;
  for (const auto& id : stems(tasks_dir(), ".json")) {
    auto t = task(id);
    if (t.instance_id == instance_id) out.push_back(std::move(t));
  }
  return out;
}

ManipulationTask Dataset::task(const std::string& task_id) const {
  return task_from_json(read_json(tasks_dir() / (task_id + ".json")));
}

void Dataset::put_figures(const std::string& instance_id, const std::vector<FigureAsset>& figures) {
  json assets = json::array();
  for (const auto& f : figures) assets.push_back(to_json(f));
  write_json(figures_dir() / (instance_id + ".json"),
             {{"schema_version", kDatasetSchemaVersion}, {"instance_id", instance_id}, {"assets", assets}});
  update_index([&](json& idx) { idx["figures"][instance_id] = figures_entry(figures); });
}

std::vector<FigureAsset> Dataset::figures_for(const std::string& instance_id) const {
  std::vector<FigureAsset> out;
  const json doc = read_json(figures_dir() / (instance_id + ".json"));
  for (const auto& a : doc.at("assets")) out.push_back(figure_from_json(a));
  return out;
}

bool Dataset::has_figures(const std::string& instance_id) const {
  return fs::exists(figures_dir() / (instance_id + ".json"));
}

void Dataset::register_manual(const std::string& manual_id) {
  const json manifest = manual_manifest(manual_id);
  update_index([&](json& idx) { idx["manuals"][manual_id] = manual_entry(manifest); });
}

std::vector<std::string> Dataset::manual_ids() const {
  std::vector<std::string> out;
  if (!fs::exists(manuals_dir())) return out;
  for (const auto& e : fs::directory_iterator(manuals_dir())) {
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> Dataset::manuals_for(const std::string& instance_id) const {
  std::vector<std::string> out;
  for (const auto& id : manual_ids()) {
    if (manual_manifest(id).at("instance_id") == instance_id) out.push_back(id);
  }
  return out;
}

json Dataset::manual_manifest(const std::string& manual_id) const {
  return read_json(manual_dir(manual_id) / "manifest.json");
}

json Dataset::rebuild_index() const {
  json idx = empty_index();
  for (const auto& id : model_ids()) idx["models"][id] = model_entry(model(id));
  for (const auto& id : instance_ids()) idx["instances"][id] = instance_entry(instance(id));
  for (const auto& id : stems(tasks_dir(), ".json")) idx["tasks"][id] = task_entry(task(id));
  for (const auto& id : stems(figures_dir(), ".json")) idx["figures"][id] = figures_entry(figures_for(id));
  for (const auto& id : manual_ids()) idx["manuals"][id] = manual_entry(manual_manifest(id));
  return idx;
}

std::vector<std::string> Dataset::missing_assets() const {
  std::vector<std::string> missing;
  auto need = [&](const fs::path& p) {
    if (!fs::exists(p)) missing.push_back(fs::relative(p, root_).generic_string());
  };
  for (const auto& id : model_ids()) {
    need(models_dir() / id / "mobility.urdf");
    need(models_dir() / id / "semantics.txt");
  }
  for (const auto& id : instance_ids()) need(models_dir() / instance(id).model_id / "model.json");
  for (const auto& id : stems(figures_dir(), ".json")) {
    for (const auto& f : figures_for(id)) {
      if (!f.image_ref.empty()) need(figures_dir() / f.image_ref);
      if (!f.svg_ref.empty()) need(figures_dir() / f.svg_ref);
    }
  }
  for (const auto& id : manual_ids()) {
    const json m = manual_manifest(id);
    need(manual_dir(id) / m.at("tex").get<std::string>());
    need(manual_dir(id) / m.at("pdf").get<std::string>());
    if (m.contains("layout")) need(manual_dir(id) / m.at("layout").get<std::string>());
  }
  return missing;
}

}  // namespace manualkit
