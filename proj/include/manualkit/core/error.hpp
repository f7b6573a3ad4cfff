#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace manualkit {

enum class Errc {
  malformed_document,
  unknown_part_type,
  dangling_joint_ref,
  illegal_action_for_part,
  unknown_target_state,
  precondition_violated,
  regeneration_exhausted,
  backend_unavailable,
  unresolvable_format,
  non_contiguous_indices,
  no_visible_part,
  label_placement_failed,
  strategy_unsupported_for_part,
  compile_error,
  compiler_missing,
  unreadable_pdf,
  overlapping_masks,
  no_parts_detected,
  dataset_asset_missing,
  empty_result_set,
  not_found,
  conflict,
  validation_error,
};

std::string_view to_string(Errc code);

/// Exception carrying a machine-checkable error kind. Every failure the
/// library raises on purpose is an Error; anything else is a bug.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Raised by the regeneration loops once the retry budget is spent.
class RegenerationExhausted : public Error {
 public:
  RegenerationExhausted(const std::string& what, int attempts, std::string last_output = {})
      : Error(Errc::regeneration_exhausted, what), attempts_(attempts), last_output_(std::move(last_output)) {}

  int attempts() const noexcept { return attempts_; }
  const std::string& last_output() const noexcept { return last_output_; }

 private:
  int attempts_;
  std::string last_output_;
};

}  // namespace manualkit
