#pragma once

#include <opencv2/core.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace manualkit {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

std::vector<unsigned char> encode_png(const cv::Mat& image);
cv::Mat read_image(const std::filesystem::path& path);

/// Writes bytes under `dir` as `<sha256 prefix><ext>` unless already present
/// and returns the file name. Identical content always maps to one name.
std::string write_content_addressed(const std::filesystem::path& dir, std::string_view bytes, std::string_view ext);
std::string write_png_asset(const std::filesystem::path& dir, const cv::Mat& image);

/// Atomic text write (temp file + rename).
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace manualkit
