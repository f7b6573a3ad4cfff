#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace manualkit {

/// Escapes LaTeX special characters in plain text.
std::string latex_escape(std::string_view text);

/// Packages a generated manual may load.
const std::vector<std::string>& package_whitelist();

/// Fixed document preamble and closing shared by every manual.
std::string manual_preamble(std::string_view title);
std::string manual_closing();

/// Deterministic LaTeX for one manual section, driven by the section
/// context built in manualgen. `seed` varies wording only.
std::string synthetic_section_latex(const nlohmann::json& context, std::uint64_t seed);

}  // namespace manualkit
