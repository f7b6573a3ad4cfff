#pragma once

#include "manualkit/figures/figures.hpp"
#include "manualkit/manualgen/manualgen.hpp"
#include "manualkit/service/dataset.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace manualkit {

/// Stage outputs start pending human review unless `auto_approve` is set
/// (mock runs and tests).
struct PipelineOptions {
  std::uint64_t seed = 0;
  bool auto_approve = false;
};

/// Loads every model directory under `models_dir` into the dataset.
/// Throws Error(validation_error) when there are none.
std::vector<std::string> ingest_models(Dataset& dataset, const std::filesystem::path& models_dir);

/// `per_model` annotated instances for every model, ids `<model_id>_inst<k>`.
std::vector<std::string> annotate_dataset(Dataset& dataset, BackendDispatcher& backend, int per_model,
                                          const PipelineOptions& options);

/// `per_instance` tasks for every approved instance without tasks; a seeded
/// half is marked as demonstrated in the manual.
std::vector<std::string> generate_dataset_tasks(Dataset& dataset, BackendDispatcher& backend, int per_instance,
                                                const PipelineOptions& options);

/// Figure sets for every approved instance without one.
std::vector<std::string> build_dataset_figures(Dataset& dataset, Renderer& renderer, BackgroundBackend& background,
                                               const FigureConfig& config, const PipelineOptions& options);

/// `per_instance` manuals for every instance whose instance, tasks and
/// figures are reviewed and that has no manuals yet.
std::vector<std::string> build_dataset_manuals(Dataset& dataset, BackendDispatcher& backend, int per_instance,
                                               const CompileConfig& compile, const PipelineOptions& options);

/// All stages with the synthetic backend and auto-approval: the small
/// deterministic dataset used by tests and the acceptance run.
struct MockDatasetSpec {
  std::filesystem::path models_dir;
  int instances_per_model = 1;
  int tasks_per_instance = 4;
  int manuals_per_instance = 1;
  FigureConfig figures;
  CompileConfig compile;
  std::uint64_t seed = 7;
};

void build_mock_dataset(Dataset& dataset, const MockDatasetSpec& spec);

}  // namespace manualkit
