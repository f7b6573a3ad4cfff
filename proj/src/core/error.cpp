#include "manualkit/core/error.hpp"

namespace manualkit {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::malformed_document: return "MalformedDocument";
    case Errc::unknown_part_type: return "UnknownPartType";
    case Errc::dangling_joint_ref: return "DanglingJointRef";
    case Errc::illegal_action_for_part: return "IllegalActionForPart";
    case Errc::unknown_target_state: return "UnknownTargetState";
    case Errc::precondition_violated: return "PreconditionViolated";
    case Errc::regeneration_exhausted: return "RegenerationExhausted";
    case Errc::backend_unavailable: return "BackendUnavailable";
    case Errc::unresolvable_format: return "UnresolvableFormat";
    case Errc::non_contiguous_indices: return "NonContiguousIndices";
    case Errc::no_visible_part: return "NoVisiblePart";
    case Errc::label_placement_failed: return "LabelPlacementFailed";
    case Errc::strategy_unsupported_for_part: return "StrategyUnsupportedForPart";
    case Errc::compile_error: return "CompileError";
    case Errc::compiler_missing: return "CompilerMissing";
    case Errc::unreadable_pdf: return "UnreadablePdf";
    case Errc::overlapping_masks: return "OverlappingMasks";
    case Errc::no_parts_detected: return "NoPartsDetected";
    case Errc::dataset_asset_missing: return "DatasetAssetMissing";
    case Errc::empty_result_set: return "EmptyResultSet";
    case Errc::not_found: return "NotFound";
    case Errc::conflict: return "Conflict";
    case Errc::validation_error: return "ValidationError";
  }
  return "Unknown";
}

}  // namespace manualkit
