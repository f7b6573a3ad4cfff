#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace manualkit::texlite {

/// One rendered text line, in PDF points with the origin at the top-left
/// of the page (y grows downwards).
struct TextLine {
  int page = 0;  // 1-based
  double x = 0, y = 0, width = 0, height = 0;
  std::string text;  // UTF-8
  double font_size = 10;
  bool bold = false;
};

struct PlacedImage {
  int page = 0;
  double x = 0, y = 0, width = 0, height = 0;
  std::string path;  // as written in the source
};

/// Table bounding box; a table split over pages has one box per page.
struct PlacedTable {
  int page = 0;
  double x = 0, y = 0, width = 0, height = 0;
};

/// What an OCR pass over the PDF would recover: text lines and image
/// boxes per page.
struct Layout {
  int pages = 0;
  double page_width = 0, page_height = 0;
  std::vector<TextLine> lines;
  std::vector<PlacedImage> images;
  std::vector<PlacedTable> tables;
};

nlohmann::json to_json(const Layout& layout);
Layout layout_from_json(const nlohmann::json& j);

struct Result {
  bool ok = false;
  std::string log;  // TeX-style log: "! message" and "l.<n> context" on error
  std::string pdf;  // bytes, empty on error
  Layout layout;
};

/// Typesets a LaTeX document of the supported subset: article class, the
/// graphicx/xcolor/multirow/caption/geometry/amssymb packages, sections,
/// lists, tabular with \multirow, figures with PNG/JPEG images, basic font
/// switches and inline math symbols. Relative image paths resolve against
/// `base_dir`. Anything outside the subset is an error, as are unbalanced
/// groups and unescaped special characters.
Result compile(const std::string& source, const std::filesystem::path& base_dir);

/// Page count of a PDF; looks inside compressed object streams too. Throws
/// Error(unreadable_pdf) for data that is not a PDF.
int count_pdf_pages(const std::string& pdf_bytes);

}  // namespace manualkit::texlite
