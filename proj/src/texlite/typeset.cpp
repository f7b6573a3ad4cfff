#include "internal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace manualkit::texlite::detail {

namespace {

constexpr double kLeading = 1.2;
constexpr double kParSkip = 4.0;
constexpr double kCellPadX = 4.0;
constexpr double kCellPadY = 2.0;
constexpr double kLabelGap = 4.0;

bool same_style(const Style& a, const Style& b) {
  return a.bold == b.bold && a.italic == b.italic && a.size == b.size && a.color == b.color;
}

void append_run(std::vector<Run>& runs, const std::string& text, const Style& style) {
  if (text.empty()) return;
  if (!runs.empty() && same_style(runs.back().style, style)) {
    runs.back().text += text;
  } else {
    runs.push_back({text, style});
  }
}

double runs_width(const std::vector<Run>& runs) {
  double w = 0;
  for (const auto& r : runs) w += text_width(r.text, r.style.size);
  return w;
}

double runs_max_size(const std::vector<Run>& runs, double fallback) {
  double m = 0;
  for (const auto& r : runs) m = std::max(m, r.style.size);
  return m > 0 ? m : fallback;
}

std::string runs_text(const std::vector<Run>& runs) {
  std::string s;
  for (const auto& r : runs) s += r.text;
  return s;
}

bool runs_bold(const std::vector<Run>& runs) {
  bool any = false;
  for (const auto& r : runs) {
    if (r.text.find_first_not_of(' ') == std::string::npos) continue;
    if (!r.style.bold) return false;
    any = true;
  }
  return any;
}

// Byte length of the UTF-8 sequence starting with `c`.
std::size_t utf8_seq(unsigned char c) {
  if (c < 0x80) return 1;
  if ((c >> 5) == 0x6) return 2;
  if ((c >> 4) == 0xE) return 3;
  if ((c >> 3) == 0x1E) return 4;
  return 1;
}

}  // namespace

std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); i += utf8_seq(static_cast<unsigned char>(s[i]))) ++n;
  return n;
}

std::string to_winansi(const std::string& utf8) {
  std::string out;
  for (std::size_t i = 0; i < utf8.size();) {
    const unsigned char c = static_cast<unsigned char>(utf8[i]);
    const std::size_t len = std::min(utf8_seq(c), utf8.size() - i);
    std::uint32_t cp = c;
    if (len == 2) cp = ((c & 0x1Fu) << 6) | (utf8[i + 1] & 0x3F);
    if (len == 3) cp = ((c & 0x0Fu) << 12) | ((utf8[i + 1] & 0x3F) << 6) | (utf8[i + 2] & 0x3F);
    if (len == 4) cp = 0x10000;  // outside the encoding
    i += len;
    if ((cp >= 0x20 && cp < 0x7F) || (cp >= 0xA0 && cp <= 0xFF)) {
      out.push_back(static_cast<char>(cp));
      continue;
    }
    switch (cp) {
      case 0x2022: out.push_back('\x95'); break;
      case 0x2013: out.push_back('\x96'); break;
      case 0x2014: out.push_back('\x97'); break;
      case 0x2018: out.push_back('\x91'); break;
      case 0x2019: out.push_back('\x92'); break;
      case 0x201C: out.push_back('\x93'); break;
      case 0x201D: out.push_back('\x94'); break;
      case 0x2026: out.push_back('\x85'); break;
      case 0x20AC: out.push_back('\x80'); break;
      case 0x2122: out.push_back('\x99'); break;
      default: out.push_back('?');
    }
  }
  return out;
}

Typesetter::Typesetter(PageGeometry geometry) : geo_(geometry) {
  layout_.page_width = geo_.width;
  layout_.page_height = geo_.height;
}

void Typesetter::ensure_page() {
  if (pages_.empty()) {
    pages_.emplace_back();
    y_ = geo_.top;
  }
}

void Typesetter::ensure_space(double height) {
  ensure_page();
  if (y_ + height > geo_.text_bottom() && y_ > geo_.top + 1e-9) {
    pages_.emplace_back();
    y_ = geo_.top;
  }
}

void Typesetter::new_page() {
  if (pages_.empty()) return;
  const Page& p = pages_.back();
  if (p.texts.empty() && p.lines.empty() && p.images.empty()) return;
  pages_.emplace_back();
  y_ = geo_.top;
}

double Typesetter::current_indent() const { return std::accumulate(indents_.begin(), indents_.end(), 0.0); }

void Typesetter::push_indent(double pt) { indents_.push_back(pt); }
void Typesetter::pop_indent() {
  if (!indents_.empty()) indents_.pop_back();
}

void Typesetter::set_item_label(std::vector<Run> label) { item_label_ = std::move(label); }

void Typesetter::add_text(const std::string& utf8, const Style& style) {
  if (utf8.empty()) return;
  if (words_.empty() || pending_space_ || words_.back().forced_break) {
    if (!words_.empty() && pending_space_ && !words_.back().forced_break) words_.back().space_after = pending_space_width_;
    words_.emplace_back();
  }
  pending_space_ = false;
  append_run(words_.back().pieces, utf8, style);
  words_.back().width += text_width(utf8, style.size);
}

void Typesetter::add_space(const Style& style) {
  if (words_.empty()) return;
  pending_space_ = true;
  pending_space_width_ = kGlyphEm * style.size;
}

void Typesetter::line_break() {
  if (words_.empty()) return;
  words_.back().forced_break = true;
  pending_space_ = false;
}

std::vector<Typesetter::Line> Typesetter::break_lines(const std::vector<Word>& input, double width) const {
  // Split words that cannot fit on a line at all.
  std::vector<Word> words;
  for (const auto& w : input) {
    if (w.width <= width || width <= 0) {
      words.push_back(w);
      continue;
    }
    Word cur;
    for (const auto& piece : w.pieces) {
      for (std::size_t i = 0; i < piece.text.size();) {
        const std::size_t len = utf8_seq(static_cast<unsigned char>(piece.text[i]));
        const std::string glyph = piece.text.substr(i, len);
        const double gw = text_width(glyph, piece.style.size);
        if (cur.width + gw > width && cur.width > 0) {
          words.push_back(cur);
          cur = Word{};
        }
        append_run(cur.pieces, glyph, piece.style);
        cur.width += gw;
        i += len;
      }
    }
    cur.space_after = w.space_after;
    cur.forced_break = w.forced_break;
    words.push_back(cur);
  }

  std::vector<Line> lines;
  Line cur;
  double gap = 0;
  auto flush = [&] {
    cur.max_size = runs_max_size(cur.runs, 10.0);
    lines.push_back(std::move(cur));
    cur = Line{};
    gap = 0;
  };
  for (const auto& w : words) {
    if (!cur.runs.empty() && cur.width + gap + w.width > width + 1e-9) flush();
    if (!cur.runs.empty() && gap > 0) {
      Style s = cur.runs.back().style;
      append_run(cur.runs, " ", s);
      cur.width += gap;
    }
    for (const auto& p : w.pieces) append_run(cur.runs, p.text, p.style);
    cur.width += w.width;
    gap = w.space_after;
    if (w.forced_break) flush();
  }
  if (!cur.runs.empty()) flush();
  return lines;
}

void Typesetter::record_text(double x, double top, double height, const std::vector<Run>& runs, double width) {
  const std::string text = runs_text(runs);
  if (text.find_first_not_of(' ') == std::string::npos) return;
  layout_.lines.push_back({static_cast<int>(pages_.size()), x, top, width, height, text,
                           runs_max_size(runs, 10.0), runs_bold(runs)});
}

void Typesetter::place_line(const Line& line, double left, double width, Align align, const std::vector<Run>* label) {
  double size = line.max_size;
  if (label) size = std::max(size, runs_max_size(*label, size));
  const double h = size * kLeading;
  ensure_space(h);
  double x = left;
  if (align == Align::center) x += std::max(0.0, (width - line.width) / 2);
  if (align == Align::right) x += std::max(0.0, width - line.width);
  const double baseline = y_ + size * 0.95;
  double record_x = x, record_w = line.width;
  std::vector<Run> record_runs;
  if (label) {
    const double lw = runs_width(*label);
    double lx = left - lw - kLabelGap;
    record_x = lx;
    record_w = line.width + (x - lx);
    for (const auto& r : *label) {
      pages_.back().texts.push_back({lx, baseline, r.text, r.style});
      lx += text_width(r.text, r.style.size);
    }
    record_runs = *label;
    if (!line.runs.empty()) record_runs.push_back({" ", line.runs.front().style});
  }
  for (const auto& r : line.runs) {
    pages_.back().texts.push_back({x, baseline, r.text, r.style});
    x += text_width(r.text, r.style.size);
    record_runs.push_back(r);
  }
  record_text(record_x, y_, h, record_runs, record_w);
  y_ += h;
}

void Typesetter::end_paragraph(Align align) {
  if (words_.empty() && !item_label_) return;
  const double indent = current_indent();
  const double width = geo_.text_width() - indent;
  auto lines = break_lines(words_, width);
  if (lines.empty()) lines.push_back(Line{{}, 0, 10});
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::vector<Run>* label = (i == 0 && item_label_) ? &*item_label_ : nullptr;
    place_line(lines[i], geo_.left + indent, width, align, label);
  }
  y_ += kParSkip;
  words_.clear();
  pending_space_ = false;
  item_label_.reset();
}

void Typesetter::vskip(double pt) {
  ensure_page();
  if (y_ <= geo_.top + 1e-9) return;
  y_ += pt;
  if (y_ > geo_.text_bottom()) new_page();
}

void Typesetter::heading(const std::vector<Run>& runs, double space_before, double space_after) {
  vskip(space_before);
  const double width = geo_.text_width();
  std::vector<Word> words;
  for (const auto& r : runs) {
    std::size_t start = 0;
    while (start <= r.text.size()) {
      const std::size_t sp = r.text.find(' ', start);
      const std::string part = r.text.substr(start, sp == std::string::npos ? std::string::npos : sp - start);
      if (!part.empty()) {
        Word w;
        append_run(w.pieces, part, r.style);
        w.width = text_width(part, r.style.size);
        words.push_back(w);
      }
      if (sp == std::string::npos) break;
      if (!words.empty()) words.back().space_after = kGlyphEm * r.style.size;
      start = sp + 1;
    }
  }
  const auto lines = break_lines(words, width);
  // Keep the heading together with a few lines of what follows.
  double total = 0;
  for (const auto& l : lines) total += l.max_size * kLeading;
  ensure_space(total + 3 * 10.0 * kLeading);
  for (const auto& l : lines) place_line(l, geo_.left, width, Align::left, nullptr);
  y_ += space_after;
}

void Typesetter::image(int index, cv::Size pixels, double width_pt, double height_pt, Align align,
                       const std::string& path) {
  const double indent = current_indent();
  const double avail_w = geo_.text_width() - indent;
  const double avail_h = geo_.text_bottom() - geo_.top;
  double w = width_pt, h = height_pt;
  if (w <= 0 && h <= 0) {
    w = pixels.width * 0.75;  // 96 dpi
    h = pixels.height * 0.75;
  } else if (w <= 0) {
    w = h * pixels.width / std::max(1, pixels.height);
  } else if (h <= 0) {
    h = w * pixels.height / std::max(1, pixels.width);
  }
  const double s = std::min({1.0, avail_w / w, avail_h / h});
  w *= s;
  h *= s;
  ensure_space(h);
  double x = geo_.left + indent;
  if (align == Align::center) x += (avail_w - w) / 2;
  if (align == Align::right) x += avail_w - w;
  pages_.back().images.push_back({x, y_, w, h, index});
  layout_.images.push_back({static_cast<int>(pages_.size()), x, y_, w, h, path});
  y_ += h + kParSkip;
}

void Typesetter::table(const Table& t, Align align, int source_line) {
  const std::size_t ncols = t.spec.columns.size();
  const double indent = current_indent();
  const double avail = geo_.text_width() - indent;

  // Natural widths from single-column cells.
  std::vector<double> natural(ncols, 2 * kCellPadX);
  for (const auto& row : t.rows) {
    std::size_t col = 0;
    for (const auto& cell : row.cells) {
      if (col + cell.span_cols > ncols) {
        throw TexError{"Extra alignment tab has been changed to \\cr.", source_line};
      }
      if (cell.span_cols == 1 && t.spec.fixed_width[col] <= 0) {
        natural[col] = std::max(natural[col], runs_width(cell.runs) + 2 * kCellPadX);
      }
      col += cell.span_cols;
    }
  }
  std::vector<double> widths(ncols);
  double fixed = 0, flexible = 0;
  for (std::size_t c = 0; c < ncols; ++c) {
    if (t.spec.fixed_width[c] > 0) {
      widths[c] = t.spec.fixed_width[c] + 2 * kCellPadX;
      fixed += widths[c];
    } else {
      widths[c] = natural[c];
      flexible += widths[c];
    }
  }
  if (fixed + flexible > avail && flexible > 0) {
    const double scale = std::max(0.05, (avail - fixed) / flexible);
    for (std::size_t c = 0; c < ncols; ++c) {
      if (t.spec.fixed_width[c] <= 0) widths[c] *= scale;
    }
  }
  std::vector<double> col_x(ncols + 1, 0.0);
  for (std::size_t c = 0; c < ncols; ++c) col_x[c + 1] = col_x[c] + widths[c];
  const double total_w = col_x[ncols];
  double left = geo_.left + indent;
  if (align == Align::center) left += std::max(0.0, (avail - total_w) / 2);
  if (align == Align::right) left += std::max(0.0, avail - total_w);

  struct CellLayout {
    std::size_t col;
    double width;
    std::vector<Line> lines;
    double height;
    ColumnAlign align;
    int span_rows;
  };
  std::vector<std::vector<CellLayout>> cells(t.rows.size());
  std::vector<double> row_h(t.rows.size(), 10.0 * kLeading + 2 * kCellPadY);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::size_t col = 0;
    for (const auto& cell : t.rows[r].cells) {
      const double w = col_x[col + cell.span_cols] - col_x[col];
      std::vector<Word> words;
      for (const auto& run : cell.runs) {
        std::size_t start = 0;
        while (start <= run.text.size()) {
          const std::size_t sp = run.text.find(' ', start);
          const std::string part = run.text.substr(start, sp == std::string::npos ? std::string::npos : sp - start);
          if (!part.empty()) {
            Word word;
            append_run(word.pieces, part, run.style);
            word.width = text_width(part, run.style.size);
            words.push_back(word);
          }
          if (sp == std::string::npos) break;
          if (!words.empty()) words.back().space_after = kGlyphEm * run.style.size;
          start = sp + 1;
        }
      }
      auto lines = break_lines(words, w - 2 * kCellPadX);
      double h = 2 * kCellPadY;
      for (const auto& l : lines) h += l.max_size * kLeading;
      const ColumnAlign ca = cell.align.value_or(t.spec.columns[col]);
      cells[r].push_back({col, w, std::move(lines), h, ca, cell.span_rows});
      if (cell.span_rows == 1) row_h[r] = std::max(row_h[r], h);
      col += cell.span_cols;
    }
  }

  ensure_page();
  int seg_page = 0;
  double seg_top = 0, seg_bottom = 0;
  auto close_segment = [&] {
    if (seg_page > 0 && y_ > seg_top) layout_.tables.push_back({seg_page, left, seg_top, total_w, y_ - seg_top});
  };
  auto hrule = [&](double y, double x1, double x2) { pages_.back().lines.push_back({x1, y, x2, y, 0.4}); };
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int before = static_cast<int>(pages_.size());
    ensure_space(row_h[r]);
    if (seg_page == 0 || static_cast<int>(pages_.size()) != before) {
      if (seg_page > 0) layout_.tables.push_back({seg_page, left, seg_top, total_w, seg_bottom - seg_top});
      seg_page = static_cast<int>(pages_.size());
      seg_top = y_;
    }
    const double top = y_;
    const auto& row = t.rows[r];
    if (row.rule_above) hrule(top, left, left + total_w);
    for (auto [a, b] : row.partial_rules_above) {
      if (a >= 1 && b <= static_cast<int>(ncols) && a <= b) hrule(top, left + col_x[a - 1], left + col_x[b]);
    }
    for (std::size_t c = 0; c <= ncols; ++c) {
      if (t.spec.rule_before[c]) pages_.back().lines.push_back({left + col_x[c], top, left + col_x[c], top + row_h[r], 0.4});
    }
    for (const auto& cell : cells[r]) {
      double span_h = row_h[r];
      for (int k = 1; k < cell.span_rows && r + k < t.rows.size(); ++k) span_h += row_h[r + k];
      if (top + span_h > geo_.text_bottom()) span_h = row_h[r];
      double ly = top + std::max(kCellPadY, (span_h - cell.height) / 2 + kCellPadY);
      for (const auto& line : cell.lines) {
        const double lh = line.max_size * kLeading;
        const double inner = cell.width - 2 * kCellPadX;
        double x = left + col_x[cell.col] + kCellPadX;
        if (cell.align == ColumnAlign::center) x += std::max(0.0, (inner - line.width) / 2);
        if (cell.align == ColumnAlign::right) x += std::max(0.0, inner - line.width);
        double cx = x;
        for (const auto& run : line.runs) {
          pages_.back().texts.push_back({cx, ly + line.max_size * 0.95, run.text, run.style});
          cx += text_width(run.text, run.style.size);
        }
        record_text(x, ly, lh, line.runs, line.width);
        ly += lh;
      }
    }
    y_ += row_h[r];
    seg_bottom = y_;
  }
  close_segment();
  if (t.rule_below_last) hrule(y_, left, left + total_w);
  y_ += kParSkip;
}

Document Typesetter::finish(std::vector<cv::Mat> images) {
  Document doc;
  doc.geometry = geo_;
  // Drop a trailing page left empty by a final \newpage.
  while (!pages_.empty() && pages_.back().texts.empty() && pages_.back().lines.empty() && pages_.back().images.empty()) {
    pages_.pop_back();
  }
  for (std::size_t i = 0; i < pages_.size(); ++i) {
    const std::string num = std::to_string(i + 1);
    const double x = (geo_.width - text_width(num, 10)) / 2;
    const double top = geo_.height - geo_.bottom / 2 - 10;
    pages_[i].texts.push_back({x, top + 9.5, num, Style{}});
    layout_.lines.push_back({static_cast<int>(i + 1), x, top, text_width(num, 10), 12, num, 10, false});
  }
  layout_.pages = static_cast<int>(pages_.size());
  std::stable_sort(layout_.lines.begin(), layout_.lines.end(),
                   [](const TextLine& a, const TextLine& b) { return a.page < b.page; });
  doc.pages = std::move(pages_);
  doc.images = std::move(images);
  doc.layout = std::move(layout_);
  return doc;
}

}  // namespace manualkit::texlite::detail
