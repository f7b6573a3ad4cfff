#pragma once

#include "manualkit/core/action.hpp"
#include "manualkit/planner/planner.hpp"
#include "manualkit/service/dataset.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace manualkit {

// ---- scoring ----------------------------------------------------------------

/// Leading successes over all steps; steps after the first failure never
/// count. An empty list scores 0.
double completion_rate(const std::vector<bool>& step_successes);

/// All ground-truth parts present with names equal after normalize_name.
bool evaluate_alignment(const PartAlignment& predicted, const PartAlignment& ground_truth);

/// Same length, and step by step the planned name resolves through
/// `alignment` to the ground-truth part (ground-truth names resolve through
/// `gt_names`) and the action phrase parses to the ground-truth state.
bool evaluate_plan(const Plan& plan, const std::vector<TaskStep>& ground_truth, const PartAlignment& gt_names,
                   const PartAlignment& alignment);

/// Part id whose aligned name equals `name` (normalized), or empty.
std::string resolve_aligned_name(const PartAlignment& alignment, const std::string& name);

// ---- episodes -----------------------------------------------------------------

enum class Track { aligned_planning = 1, cad_manipulation = 2, manual_manipulation = 3 };
int track_number(Track track);
Track track_from_number(int n);

struct EpisodeConfig {
  Track track = Track::aligned_planning;
  std::string instance_id;
  std::string manual_id;
  std::string task_id;
  ExecutorNoise noise;
  bool with_manual = true;
  std::uint64_t seed = 0;

  std::string episode_id() const;
};

struct EpisodeResult {
  std::string episode_id;
  Track track = Track::aligned_planning;
  bool with_manual = true;
  std::string instance_id, manual_id, task_id, category;
  std::optional<bool> alignment_success;
  std::optional<bool> planning_success;
  std::vector<bool> step_successes;  // one per ground-truth step
  bool task_success = false;
  double completion_rate = 0.0;
  std::optional<int> failure_step;  // 1-based
  std::map<std::string, int> backend_call_counts;
  std::string error;  // backend or planner failure, recorded instead of raised
};

json to_json(const EpisodeResult& result);
EpisodeResult episode_result_from_json(const json& j);
void write_episodes_jsonl(const std::filesystem::path& path, const std::vector<EpisodeResult>& results);
std::vector<EpisodeResult> read_episodes_jsonl(const std::filesystem::path& path);

/// Ground-truth stand-in for the multimodal planner. Plans come from the
/// instance's tasks and alignment answers from the ground-truth part ids in
/// the request context. Without the manual it falls back to what common
/// sense allows: generic part names ("Door", or "Button 1", "Button 2" by
/// part order when a type repeats; plans guess the first of a type) and
/// default states (Push 1 time, the smallest rotation).
class OracleBackend : public Backend {
 public:
  OracleBackend(ApplianceModel model, ApplianceInstance instance, std::vector<ManipulationTask> tasks);
  std::string complete(const BackendRequest& request) override;
  std::string name() const override { return "oracle"; }

  std::string generic_name(const std::string& part_id, bool for_plan) const;

 private:
  std::string plan_answer(const BackendRequest& request) const;
  std::string alignment_answer(const BackendRequest& request) const;

  ApplianceModel model_;
  ApplianceInstance instance_;
  std::vector<ManipulationTask> tasks_;
};

/// Backends for one episode. Unset members get defaults: the oracle for the
/// model, layout-sidecar OCR and element detection, ground-truth detector and
/// segmenter on the observation, and the schematic renderer.
struct BackendBundle {
  std::shared_ptr<Backend> mllm;
  std::shared_ptr<OcrBackend> ocr;
  std::shared_ptr<ElementBackend> elements;
  std::function<std::unique_ptr<DetectorBackend>(const RenderOutput&)> detector;
  std::function<std::unique_ptr<SegmenterBackend>(const RenderOutput&)> segmenter;
  std::shared_ptr<Renderer> renderer;
  int max_plan_regen = 3;
  int max_align_regen = 1;
};

/// Track 1 scores alignment (CAD views) and the plan without executing;
/// Tracks 2 and 3 execute the plan on the kinematic executor until the first
/// failed step. Track 2 aligns on CAD renders, Track 3 on the RGB-D
/// observation only. Throws Error(dataset_asset_missing) when the dataset
/// lacks an asset; backend failures end the episode and are recorded.
EpisodeResult run_episode(const Dataset& dataset, const EpisodeConfig& config, const BackendBundle& bundle = {});

/// One episode per task of every instance with a built manual; manuals are
/// assigned round-robin. With `ablation` each episode is repeated without
/// the manual.
std::vector<EpisodeConfig> plan_episodes(const Dataset& dataset, Track track, const ExecutorNoise& noise, bool ablation,
                                         std::uint64_t seed);

/// Runs episodes in parallel, results in input order.
std::vector<EpisodeResult> run_episodes(const Dataset& dataset, const std::vector<EpisodeConfig>& configs,
                                        const BackendBundle& bundle = {});

// ---- reports ------------------------------------------------------------------

/// Two percentages per cell: alignment/planning SR for Track 1, completion
/// rate/task SR for Tracks 2 and 3. Unset when not applicable.
struct MetricCell {
  int episodes = 0;
  std::optional<double> first;
  std::optional<double> second;
};

struct ReportRow {
  Track track = Track::aligned_planning;
  bool with_manual = true;
  std::map<std::string, MetricCell> by_category;
  MetricCell total;  // episode-weighted
};

struct MetricsReport {
  std::vector<ReportRow> rows;  // by track, with-manual first

  std::string to_text() const;
  std::string to_csv() const;
  json to_json() const;
};

/// "50.00" for 0.5.
std::string format_percent(double fraction);

/// Throws Error(empty_result_set) for no results.
MetricsReport aggregate(const std::vector<EpisodeResult>& results);

// ---- dataset statistics -------------------------------------------------------

struct DatasetStats {
  int models = 0;
  int instances = 0;
  int manuals = 0;
  int parts = 0;
  int tasks = 0;
  int categories = 0;
  double parts_per_instance = 0.0;
  std::map<std::string, int> part_types;
  std::map<std::string, double> category_proportions;  // share of instances
  std::map<int, int> part_count_histogram;             // parts per instance
  std::map<int, int> step_length_histogram;            // steps per task

  json to_json() const;
};

/// Counts from a dataset index (see Dataset::index).
DatasetStats dataset_stats(const json& index);

}  // namespace manualkit
