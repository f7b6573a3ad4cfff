#pragma once

#include "manualkit/backend/backend.hpp"
#include "manualkit/core/action.hpp"
#include "manualkit/core/appliance.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace manualkit {

/// part_id -> function name, one entry per manipulable part.
using FunctionAnnotation = std::map<std::string, std::string>;

struct StateEntry {
  std::string label;        // canonical state text, e.g. "Rotate 60 degrees"
  std::string description;  // what the state does, e.g. "Sets the timer to 5 minutes"
  bool operator==(const StateEntry&) const = default;
};

/// part_id -> ordered states of that part.
using StateAnnotation = std::map<std::string, std::vector<StateEntry>>;

enum class ReviewStatus { pending, approved, revised };
std::string_view to_string(ReviewStatus status);
ReviewStatus review_status_from_string(std::string_view text);

struct ApplianceInstance {
  std::string instance_id;
  std::string model_id;
  FunctionAnnotation function_annotation;
  StateAnnotation state_annotation;
  ReviewStatus review_status = ReviewStatus::pending;
  std::uint64_t seed = 0;
  int name_regen_count = 0;
  int state_regen_count = 0;

  bool approved() const { return review_status != ReviewStatus::pending; }
  /// part_id for a function name (exact match), or empty.
  std::string part_for_name(std::string_view name) const;
};

json to_json(const ApplianceInstance& instance);
ApplianceInstance instance_from_json(const json& j);

struct AnnotationConfig {
  int push_min = 1;
  int push_max = 3;
  int max_regen = 5;
};

/// Seeded state vocabulary for one part: push counts for buttons, 60 degree
/// rotation steps for revolute controls, Open/Close for doors, lids,
/// containers and drawers, Slide forward/backward for other prismatic parts.
std::vector<StateLabel> sample_part_states(const ApplianceModel& model, const PartSpec& part, std::uint64_t seed,
                                           const AnnotationConfig& config = {});

/// The point-line labelled overview the annotator looks at: image plus the
/// ID text drawn next to each part.
struct OverviewPrompt {
  std::string image_ref;
  std::vector<std::pair<std::string, std::string>> id_labels;  // (label text, part_id)
};

/// Default labels "1".."n" in model part order.
OverviewPrompt numbered_overview(const ApplianceModel& model, std::string image_ref = {});

/// Parses "ID: Name" lines. Returns nullopt and fills `why` unless the
/// result covers every part exactly once with unique, comma-free names.
std::optional<FunctionAnnotation> parse_function_names(const std::string& text, const ApplianceModel& model,
                                                       const OverviewPrompt& overview, std::string& why);

struct NamesResult {
  FunctionAnnotation names;
  int regen_count = 0;
};

NamesResult annotate_function_names(const ApplianceModel& model, const OverviewPrompt& overview,
                                    BackendDispatcher& backend, std::uint64_t seed, const AnnotationConfig& config = {});

using SampledStates = std::map<std::string, std::vector<StateLabel>>;

std::optional<StateAnnotation> parse_state_descriptions(const std::string& text, const FunctionAnnotation& names,
                                                        const SampledStates& sampled, std::string& why);

struct StatesResult {
  StateAnnotation states;
  int regen_count = 0;
};

StatesResult annotate_function_states(const ApplianceModel& model, const FunctionAnnotation& names,
                                      const SampledStates& sampled, BackendDispatcher& backend, std::uint64_t seed,
                                      const AnnotationConfig& config = {});

/// One full annotation pass per instance; instances start pending review.
std::vector<ApplianceInstance> create_instances(const ApplianceModel& model, int n, const OverviewPrompt& overview,
                                                BackendDispatcher& backend, std::uint64_t seed,
                                                const AnnotationConfig& config = {});

/// Deterministic 64-bit mixing used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt);

}  // namespace manualkit
