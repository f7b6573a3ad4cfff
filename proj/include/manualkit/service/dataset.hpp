#pragma once

#include "manualkit/annotation/annotation.hpp"
#include "manualkit/core/loader.hpp"
#include "manualkit/figures/figures.hpp"
#include "manualkit/taskgen/taskgen.hpp"

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

namespace manualkit {

inline constexpr int kDatasetSchemaVersion = 1;

/// On-disk dataset:
///   models/<model_id>/{model.json, mobility.urdf, semantics.txt, meta.json}
///   instances/<instance_id>.json
///   tasks/<task_id>.json
///   figures/<hash>.png, figures/<instance_id>.json (asset list)
///   manuals/<manual_id>/{manual.tex, manual.pdf, manual.layout.json, manifest.json}
///   episodes/, reports/, review/
///   index.json
/// Every write updates index.json; rebuild_index() derives the same index
/// from the files alone.
class Dataset {
 public:
  /// Creates the directory skeleton when missing.
  explicit Dataset(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path models_dir() const { return root_ / "models"; }
  std::filesystem::path instances_dir() const { return root_ / "instances"; }
  std::filesystem::path tasks_dir() const { return root_ / "tasks"; }
  std::filesystem::path figures_dir() const { return root_ / "figures"; }
  std::filesystem::path manuals_dir() const { return root_ / "manuals"; }
  std::filesystem::path episodes_dir() const { return root_ / "episodes"; }
  std::filesystem::path reports_dir() const { return root_ / "reports"; }
  std::filesystem::path review_dir() const { return root_ / "review"; }

  void put_model(const ModelSources& sources, const ApplianceModel& model);
  std::vector<std::string> model_ids() const;
  ApplianceModel model(const std::string& model_id) const;

  void put_instance(const ApplianceInstance& instance);
  std::vector<std::string> instance_ids() const;
  ApplianceInstance instance(const std::string& instance_id) const;

  void put_task(const ManipulationTask& task);
  std::vector<ManipulationTask> tasks_for(const std::string& instance_id) const;
  ManipulationTask task(const std::string& task_id) const;

  void put_figures(const std::string& instance_id, const std::vector<FigureAsset>& figures);
  std::vector<FigureAsset> figures_for(const std::string& instance_id) const;
  bool has_figures(const std::string& instance_id) const;

  /// Records a manual already written under manuals/<manual_id>/.
  void register_manual(const std::string& manual_id);
  std::vector<std::string> manual_ids() const;
  std::vector<std::string> manuals_for(const std::string& instance_id) const;
  json manual_manifest(const std::string& manual_id) const;
  std::filesystem::path manual_dir(const std::string& manual_id) const { return manuals_dir() / manual_id; }

  json index() const;
  json rebuild_index() const;
  /// Referenced asset paths that do not exist, empty when consistent.
  std::vector<std::string> missing_assets() const;

 private:
  void update_index(const std::function<void(json&)>& fn);
  json instance_entry(const ApplianceInstance& instance) const;

  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

}  // namespace manualkit
