#pragma once

#include "manualkit/core/error.hpp"

namespace manualkit {

template <class T>
RegenResult<T> call_with_regeneration(BackendDispatcher& dispatcher, BackendRequest request, int max_regen,
                                      const std::function<std::optional<T>(const std::string&, std::string&)>& parse) {
  std::string last_output;
  std::string last_reason;
  for (int attempt = 0; attempt <= max_regen; ++attempt) {
    request.attempt = attempt;
    last_output = dispatcher.call(request);
    std::string why;
    if (auto value = parse(last_output, why)) return RegenResult<T>{std::move(*value), attempt};
    last_reason = why;
  }
  throw RegenerationExhausted(std::string(to_string(request.capability)) + " failed after " +
                                  std::to_string(max_regen + 1) + " attempts: " + last_reason,
                              max_regen + 1, last_output);
}

}  // namespace manualkit
