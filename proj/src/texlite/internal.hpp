#pragma once

#include "manualkit/texlite/texlite.hpp"

#include <opencv2/core.hpp>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace manualkit::texlite::detail {

/// Raised for any source the compiler rejects; `line` is 1-based.
struct TexError {
  std::string message;
  int line = 0;
};

using Rgb = std::array<double, 3>;

struct Style {
  bool bold = false;
  bool italic = false;
  double size = 10.0;
  Rgb color{0, 0, 0};
};

enum class Align { left, center, right };

struct Run {
  std::string text;  // UTF-8
  Style style;
};

// Courier everywhere: every glyph is 0.6 em wide.
inline constexpr double kGlyphEm = 0.6;
std::size_t utf8_length(const std::string& s);
inline double text_width(const std::string& s, double size) { return kGlyphEm * size * static_cast<double>(utf8_length(s)); }
/// UTF-8 to WinAnsi bytes; unmapped code points become '?'.
std::string to_winansi(const std::string& utf8);

struct PageGeometry {
  double width = 595.276;
  double height = 841.89;
  double left = 72, right = 72, top = 72, bottom = 72;
  double text_width() const { return width - left - right; }
  double text_bottom() const { return height - bottom; }
};

// ---- draw operations -------------------------------------------------------

struct TextOp {
  double x, baseline;  // top-left origin
  std::string text;
  Style style;
};
struct LineOp {
  double x1, y1, x2, y2, width;
};
struct ImageOp {
  double x, y, w, h;
  int image;  // index into Document::images
};

struct Page {
  std::vector<TextOp> texts;
  std::vector<LineOp> lines;
  std::vector<ImageOp> images;
};

struct Document {
  PageGeometry geometry;
  std::vector<Page> pages;
  std::vector<cv::Mat> images;  // BGR 8-bit
  Layout layout;
};

// ---- typesetting -----------------------------------------------------------

enum class ColumnAlign { left, center, right, paragraph };

struct TableCell {
  std::vector<Run> runs;
  int span_rows = 1;  // \multirow
  int span_cols = 1;  // \multicolumn
  std::optional<ColumnAlign> align;  // \multicolumn override
};

struct TableRow {
  std::vector<TableCell> cells;
  bool rule_above = false;
  std::vector<std::pair<int, int>> partial_rules_above;  // \cline ranges, 1-based inclusive
};

struct TableSpec {
  std::vector<ColumnAlign> columns;
  std::vector<double> fixed_width;  // p{...} widths, 0 otherwise
  std::vector<bool> rule_before;    // size columns + 1
};

struct Table {
  TableSpec spec;
  std::vector<TableRow> rows;
  bool rule_below_last = false;
};

class Typesetter {
 public:
  explicit Typesetter(PageGeometry geometry);

  void add_text(const std::string& utf8, const Style& style);
  void add_space(const Style& style);
  void line_break();
  void end_paragraph(Align align);
  void vskip(double pt);
  void heading(const std::vector<Run>& runs, double space_before, double space_after);
  void image(int index, cv::Size pixels, double width_pt, double height_pt, Align align, const std::string& path);
  void table(const Table& table, Align align, int source_line);
  void new_page();
  void push_indent(double pt);
  void pop_indent();
  /// Label of the next paragraph, hung into the left indent.
  void set_item_label(std::vector<Run> label);
  bool paragraph_empty() const { return words_.empty(); }

  Document finish(std::vector<cv::Mat> images);

 private:
  struct Word {
    std::vector<Run> pieces;
    double width = 0;
    double space_after = 0;  // glue following this word, 0 if none
    bool forced_break = false;
  };
  struct Line {
    std::vector<Run> runs;
    double width = 0;
    double max_size = 0;
  };

  void ensure_page();
  void ensure_space(double height);
  double current_indent() const;
  std::vector<Line> break_lines(const std::vector<Word>& words, double width) const;
  void place_line(const Line& line, double left, double width, Align align, const std::vector<Run>* label);
  void record_text(double x, double top, double height, const std::vector<Run>& runs, double width);

  PageGeometry geo_;
  std::vector<Page> pages_;
  Layout layout_;
  double y_ = 0;  // top of the next line
  std::vector<Word> words_;
  bool pending_space_ = false;
  double pending_space_width_ = 0;
  std::vector<double> indents_;
  std::optional<std::vector<Run>> item_label_;
};

std::string write_pdf(const Document& doc);

}  // namespace manualkit::texlite::detail
