#pragma once

#include "manualkit/core/appliance.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace manualkit {

struct ModelSources {
  std::string model_id;
  std::string articulation_xml;  // URDF-compatible subset
  std::string semantics;         // "link_name joint_kind part_type [cx cy cz]" per line
  std::optional<std::string> category;  // overrides the robot element's category attribute
};

/// Parses the articulation document and its semantics sidecar.
///
/// Joints are resolved through the kinematic tree so that axes, origins and
/// link geometry are all expressed in the model frame at rest. Semantics
/// entries with static joint kinds ("static", "fixed", "free", "heavy") only
/// contribute body geometry. Errors: MalformedDocument, UnknownPartType,
/// DanglingJointRef.
ApplianceModel load_appliance_model(const ModelSources& sources);

/// Reads `<dir>/mobility.urdf`, `<dir>/semantics.txt` and, when present,
/// `<dir>/meta.json` (`model_cat`). The directory name is the model id.
ModelSources read_model_sources(const std::filesystem::path& dir);

}  // namespace manualkit
