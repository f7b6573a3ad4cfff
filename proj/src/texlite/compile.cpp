#include "internal.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace manualkit::texlite {

namespace {

using detail::Align;
using detail::ColumnAlign;
using detail::Rgb;
using detail::Run;
using detail::Style;
using detail::TexError;

enum class T { cmd, chr, space, par, bgroup, egroup, tab, math, param };

struct Tok {
  T type;
  std::string text;
  int line;
};

bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

std::string ligatures(std::string s) {
  auto replace_all = [&](const std::string& from, const std::string& to) {
    for (std::size_t p = 0; (p = s.find(from, p)) != std::string::npos; p += to.size()) s.replace(p, from.size(), to);
  };
  replace_all("---", "—");
  replace_all("--", "–");
  replace_all("``", "“");
  replace_all("''", "”");
  return s;
}

std::vector<Tok> tokenize(const std::string& src) {
  std::vector<Tok> out;
  int line = 1;
  std::size_t i = 0;
  const std::size_t n = src.size();
  std::string text;
  int text_line = 1;
  auto flush_text = [&] {
    if (!text.empty()) out.push_back({T::chr, ligatures(text), text_line});
    text.clear();
  };
  auto skip_line_start = [&] {
    while (i < n && (src[i] == ' ' || src[i] == '\t')) ++i;
  };
  while (i < n) {
    const char c = src[i];
    if (c == '\\') {
      flush_text();
      ++i;
      if (i >= n) {
        out.push_back({T::cmd, "", line});
        break;
      }
      if (is_letter(src[i])) {
        std::size_t b = i;
        while (i < n && is_letter(src[i])) ++i;
        out.push_back({T::cmd, src.substr(b, i - b), line});
        while (i < n && (src[i] == ' ' || src[i] == '\t')) ++i;
        if (i < n && src[i] == '\n') {
          ++line;
          ++i;
          skip_line_start();
          if (i < n && src[i] == '\n') out.push_back({T::par, "", line});
        }
      } else {
        out.push_back({T::cmd, std::string(1, src[i]), line});
        if (src[i] == '\n') ++line;
        ++i;
      }
      continue;
    }
    if (c == '%') {
      flush_text();
      while (i < n && src[i] != '\n') ++i;
      if (i < n) {
        ++i;
        ++line;
      }
      skip_line_start();
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      flush_text();
      int newlines = 0;
      const int start_line = line;
      while (i < n && (src[i] == ' ' || src[i] == '\t' || src[i] == '\n' || src[i] == '\r')) {
        if (src[i] == '\n') {
          ++newlines;
          ++line;
        }
        ++i;
      }
      out.push_back({newlines >= 2 ? T::par : T::space, "", start_line});
      continue;
    }
    T special = T::chr;
    bool single = true;
    switch (c) {
      case '{': special = T::bgroup; break;
      case '}': special = T::egroup; break;
      case '&': special = T::tab; break;
      case '$': special = T::math; break;
      case '#': special = T::param; break;
      case '[':
      case ']':
      case '*':
      case '~':
      case '^':
      case '_': special = T::chr; break;
      default: single = false;
    }
    if (!single) {
      if (text.empty()) text_line = line;
      text.push_back(c);
      ++i;
      continue;
    }
    flush_text();
    if (special == T::param) {
      ++i;
      std::string digit;
      if (i < n && src[i] >= '1' && src[i] <= '9') digit = src[i++];
      out.push_back({T::param, digit, line});
      continue;
    }
    out.push_back({special, std::string(1, c), line});
    ++i;
  }
  flush_text();
  return out;
}

std::string stringify(const std::vector<Tok>& v, std::size_t b, std::size_t e) {
  std::string s;
  for (std::size_t i = b; i < e; ++i) {
    switch (v[i].type) {
      case T::cmd: s += "\\" + v[i].text; break;
      case T::chr: s += v[i].text; break;
      case T::space:
      case T::par: s += " "; break;
      case T::bgroup: s += "{"; break;
      case T::egroup: s += "}"; break;
      case T::tab: s += "&"; break;
      case T::math: s += "$"; break;
      case T::param: s += "#" + v[i].text; break;
    }
  }
  return s;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

const std::map<std::string, Rgb>& base_colors() {
  static const std::map<std::string, Rgb> c = {
      {"black", {0, 0, 0}},        {"white", {1, 1, 1}},         {"red", {1, 0, 0}},
      {"green", {0, 1, 0}},        {"blue", {0, 0, 1}},          {"cyan", {0, 1, 1}},
      {"magenta", {1, 0, 1}},      {"yellow", {1, 1, 0}},        {"gray", {0.5, 0.5, 0.5}},
      {"darkgray", {0.25, 0.25, 0.25}}, {"lightgray", {0.75, 0.75, 0.75}}, {"brown", {0.75, 0.5, 0.25}},
      {"lime", {0.75, 1, 0}},      {"olive", {0.5, 0.5, 0}},     {"orange", {1, 0.5, 0}},
      {"pink", {1, 0.75, 0.75}},   {"purple", {0.75, 0, 0.25}},  {"teal", {0, 0.5, 0.5}},
      {"violet", {0.5, 0, 0.5}}};
  return c;
}

const std::map<std::string, double>& size_commands() {
  static const std::map<std::string, double> s = {
      {"tiny", 5},      {"scriptsize", 7}, {"footnotesize", 8}, {"small", 9},    {"normalsize", 10},
      {"large", 12},    {"Large", 14.4},   {"LARGE", 17.28},    {"huge", 20.74}, {"Huge", 24.88}};
  return s;
}

const std::map<std::string, std::string>& text_symbols() {
  static const std::map<std::string, std::string> s = {
      {"&", "&"},          {"%", "%"},           {"$", "$"},          {"#", "#"},
      {"_", "_"},          {"{", "{"},           {"}", "}"},          {"LaTeX", "LaTeX"},
      {"TeX", "TeX"},      {"ldots", "…"},  {"dots", "…"},  {"textbullet", "•"},
      {"textdegree", "°"}, {"copyright", "©"}, {"textregistered", "®"},
      {"texttrademark", "™"}, {"S", "§"}, {"P", "¶"},   {"pounds", "£"},
      {"textasciitilde", "~"}, {"textasciicircum", "^"}, {"textbackslash", "\\"}, {"textbar", "|"},
      {"textless", "<"},   {"textgreater", ">"}, {"textunderscore", "_"}, {"textendash", "–"},
      {"textemdash", "—"}, {"today", "1 January 2000"}, {"slash", "/"}};
  return s;
}

const std::map<std::string, std::string>& math_symbols() {
  static const std::map<std::string, std::string> s = {
      {"circ", "°"}, {"times", "×"}, {"pm", "±"},  {"cdot", "·"}, {"leq", "<="},
      {"le", "<="},       {"geq", ">="},       {"ge", ">="},      {"neq", "!="},      {"approx", "~"},
      {"rightarrow", "->"}, {"to", "->"},      {"leftarrow", "<-"}, {"infty", "inf"},  {"alpha", "alpha"},
      {"beta", "beta"},   {"theta", "theta"},  {"mu", "µ"},  {"%", "%"},         {"$", "$"},
      {"div", "÷"},  {"ldots", "..."},    {",", " "},        {";", " "},         {"quad", " "}};
  return s;
}

std::string accent(const std::string& mark, const std::string& base) {
  static const std::map<std::string, std::map<char, std::string>> table = {
      {"'", {{'a', "á"}, {'e', "é"}, {'i', "í"}, {'o', "ó"}, {'u', "ú"}, {'E', "É"}}},
      {"`", {{'a', "à"}, {'e', "è"}, {'i', "ì"}, {'o', "ò"}, {'u', "ù"}}},
      {"\"", {{'a', "ä"}, {'o', "ö"}, {'u', "ü"}, {'A', "Ä"}, {'O', "Ö"}, {'U', "Ü"}}},
      {"^", {{'a', "â"}, {'e', "ê"}, {'i', "î"}, {'o', "ô"}, {'u', "û"}}},
      {"~", {{'n', "ñ"}, {'a', "ã"}, {'o', "õ"}}},
      {"c", {{'c', "ç"}, {'C', "Ç"}}}};
  if (base.empty()) return {};
  auto m = table.find(mark);
  if (m != table.end()) {
    auto ch = m->second.find(base[0]);
    if (ch != m->second.end()) return ch->second + base.substr(1);
  }
  return base;
}

struct Group {
  Style style;
  Align align = Align::left;
};

struct Env {
  std::string name;
  int line = 0;
  std::size_t group_depth = 0;  // groups before the env's own group
  bool list = false;
  bool item_seen = false;
  int counter = 0;
  int depth = 0;  // list nesting level, 1-based
  detail::Table table;
  bool float_env = false;
};

struct Frame {
  const std::vector<Tok>* toks;
  std::size_t pos;
  std::size_t end;
};

struct Macro {
  int params = 0;
  std::vector<Tok> body;
};

class Interpreter {
 public:
  Interpreter(const std::string& source, std::filesystem::path base) : base_(std::move(base)) {
    std::stringstream ss(source);
    std::string l;
    while (std::getline(ss, l)) lines_.push_back(l);
    tokens_ = tokenize(source);
    groups_.push_back(Group{});
  }

  detail::Document run() {
    exec(tokens_, 0, tokens_.size());
    if (!done_) throw TexError{"Emergency stop.\n*** (job aborted, no legal \\end found)", last_line_};
    return ts_->finish(std::move(images_));
  }

  const std::vector<std::string>& source_lines() const { return lines_; }

 private:
  // ---- token access --------------------------------------------------------

  Frame& frame() { return frames_.back(); }
  bool at_end() { return frame().pos >= frame().end; }
  const Tok& peek() { return (*frame().toks)[frame().pos]; }
  const Tok& next() {
    const Tok& t = (*frame().toks)[frame().pos++];
    last_line_ = t.line;
    return t;
  }

  void exec(const std::vector<Tok>& toks, std::size_t b, std::size_t e) {
    if (frames_.size() > 200) throw TexError{"TeX capacity exceeded, sorry [input stack size=200].", last_line_};
    frames_.push_back({&toks, b, e});
    while (!at_end() && !done_) step();
    frames_.pop_back();
  }

  void skip_spaces() {
    while (!at_end() && peek().type == T::space) ++frame().pos;
  }

  struct Range {
    const std::vector<Tok>* toks;
    std::size_t b, e;
  };

  Range read_arg(const std::string& cmd) {
    skip_spaces();
    if (at_end()) throw TexError{"File ended while scanning use of \\" + cmd + ".", last_line_};
    if (peek().type == T::par) throw TexError{"Paragraph ended before \\" + cmd + " was complete.", peek().line};
    const Tok& first = next();
    const auto* toks = frame().toks;
    if (first.type != T::bgroup) {
      if (first.type == T::egroup) throw TexError{"Argument of \\" + cmd + " has an extra }.", first.line};
      return {toks, frame().pos - 1, frame().pos};
    }
    const std::size_t b = frame().pos;
    int depth = 1;
    while (!at_end()) {
      const Tok& t = next();
      if (t.type == T::bgroup) ++depth;
      if (t.type == T::egroup && --depth == 0) return {toks, b, frame().pos - 1};
    }
    throw TexError{"File ended while scanning use of \\" + cmd + ".", first.line};
  }

  std::string raw_arg(const std::string& cmd) {
    const Range r = read_arg(cmd);
    return trim(stringify(*r.toks, r.b, r.e));
  }

  std::optional<std::string> read_optional() {
    const std::size_t save = frame().pos;
    skip_spaces();
    if (at_end() || peek().type != T::chr || peek().text != "[") {
      frame().pos = save;
      return std::nullopt;
    }
    next();
    std::string out;
    int depth = 0;
    while (!at_end()) {
      const Tok& t = next();
      if (t.type == T::bgroup) ++depth;
      if (t.type == T::egroup) --depth;
      if (depth == 0 && t.type == T::chr && t.text == "]") return trim(out);
      out += stringify(*frame().toks, frame().pos - 1, frame().pos);
    }
    throw TexError{"File ended while scanning an optional argument.", last_line_};
  }

  bool read_star() {
    if (!at_end() && peek().type == T::chr && peek().text == "*") {
      next();
      return true;
    }
    return false;
  }

  // ---- state ---------------------------------------------------------------

  Style& style() { return groups_.back().style; }
  Align align() const { return groups_.back().align; }
  void push_group() { groups_.push_back(groups_.back()); }
  void pop_group() { groups_.pop_back(); }

  void exec_grouped(const Range& r, const std::function<void()>& setup = {}) {
    push_group();
    if (setup) setup();
    exec(*r.toks, r.b, r.e);
    pop_group();
  }

  std::vector<Run> capture(const Range& r, const std::function<void()>& setup = {}) {
    std::vector<Run> runs;
    captures_.push_back(&runs);
    exec_grouped(r, setup);
    captures_.pop_back();
    return runs;
  }

  Env* top_env() { return envs_.empty() ? nullptr : &envs_.back(); }
  bool in_table() {
    Env* e = top_env();
    return e && e->name == "tabular" && captures_.empty();
  }
  detail::TableCell& cell() { return top_env()->table.rows.back().cells.back(); }

  void require_package(const std::string& pkg, const std::string& cmd) {
    if (!packages_.count(pkg)) throw TexError{"Undefined control sequence. \\" + cmd, last_line_};
  }

  void require_document(const std::string& what) {
    if (!in_document_) throw TexError{"LaTeX Error: Missing \\begin{document}. (" + what + ")", last_line_};
  }

  void require_preamble(const std::string& cmd) {
    if (in_document_) throw TexError{"LaTeX Error: Can be used only in preamble. (\\" + cmd + ")", last_line_};
  }

  // ---- output --------------------------------------------------------------

  static void append(std::vector<Run>& runs, const std::string& text, const Style& s) {
    if (!runs.empty() && runs.back().style.bold == s.bold && runs.back().style.italic == s.italic &&
        runs.back().style.size == s.size && runs.back().style.color == s.color) {
      runs.back().text += text;
    } else {
      runs.push_back({text, s});
    }
  }

  void emit_text(const std::string& text) {
    if (text.empty()) return;
    if (!captures_.empty()) {
      append(*captures_.back(), text, style());
      return;
    }
    if (in_table()) {
      append(cell().runs, text, style());
      return;
    }
    require_document("text '" + text + "'");
    if (Env* e = top_env(); e && e->list && !e->item_seen) {
      throw TexError{"LaTeX Error: Something's wrong--perhaps a missing \\item.", last_line_};
    }
    ts_->add_text(text, style());
  }

  void emit_space() {
    if (!captures_.empty()) {
      if (!captures_.back()->empty()) append(*captures_.back(), " ", style());
      return;
    }
    if (in_table()) {
      if (!cell().runs.empty()) append(cell().runs, " ", style());
      return;
    }
    if (in_document_) ts_->add_space(style());
  }

  void feed_runs(const std::vector<Run>& runs) {
    for (const auto& r : runs) {
      std::size_t start = 0;
      while (start <= r.text.size()) {
        const std::size_t sp = r.text.find(' ', start);
        ts_->add_text(r.text.substr(start, sp == std::string::npos ? std::string::npos : sp - start), r.style);
        if (sp == std::string::npos) break;
        ts_->add_space(r.style);
        start = sp + 1;
      }
    }
  }

  void end_par() {
    if (in_document_ && captures_.empty() && !in_table()) ts_->end_paragraph(align());
  }

  void block_context(const std::string& cmd) {
    if (!captures_.empty() || in_table()) {
      throw TexError{"\\" + cmd + " is not allowed here (inside an argument or table cell).", last_line_};
    }
    require_document("\\" + cmd);
  }

  // ---- lengths and colors --------------------------------------------------

  double length(const std::string& spec) {
    const std::string s = trim(spec);
    std::size_t i = 0;
    double value = 1.0;
    bool has_number = false;
    if (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' || s[i] == '-')) {
      std::size_t used = 0;
      try {
        value = std::stod(s, &used);
      } catch (...) {
        throw TexError{"Missing number, treated as zero.", last_line_};
      }
      i = used;
      has_number = true;
    }
    const std::string unit = trim(s.substr(i));
    const double tw = geometry_.text_width();
    if (unit == "\\textwidth" || unit == "\\linewidth" || unit == "\\columnwidth" || unit == "\\hsize") return value * tw;
    if (unit == "\\textheight") return value * (geometry_.text_bottom() - geometry_.top);
    if (!has_number) throw TexError{"Missing number, treated as zero.", last_line_};
    if (unit == "pt") return value;
    if (unit == "bp") return value;
    if (unit == "cm") return value * 28.3465;
    if (unit == "mm") return value * 2.83465;
    if (unit == "in") return value * 72.0;
    if (unit == "em") return value * 10.0;
    if (unit == "ex") return value * 4.5;
    if (unit == "px") return value * 0.75;
    throw TexError{"Illegal unit of measure (pt inserted).", last_line_};
  }

  Rgb color(const std::string& spec) {
    // name, name!pct, name!pct!other
    const auto parts = split(spec, '!');
    auto lookup = [&](const std::string& name) {
      auto it = colors_.find(name);
      if (it == colors_.end()) throw TexError{"Package xcolor Error: Undefined color `" + name + "'.", last_line_};
      return it->second;
    };
    if (parts.empty()) throw TexError{"Package xcolor Error: Undefined color `'.", last_line_};
    Rgb c = lookup(parts[0]);
    for (std::size_t k = 1; k < parts.size(); k += 2) {
      double pct = 0;
      try {
        pct = std::stod(parts[k]) / 100.0;
      } catch (...) {
        throw TexError{"Package xcolor Error: Invalid color expression `" + spec + "'.", last_line_};
      }
      const Rgb other = k + 1 < parts.size() ? lookup(parts[k + 1]) : Rgb{1, 1, 1};
      for (int ch = 0; ch < 3; ++ch) c[ch] = pct * c[ch] + (1 - pct) * other[ch];
    }
    return c;
  }

  // ---- images --------------------------------------------------------------

  int load_image(const std::string& name) {
    std::vector<std::filesystem::path> tries;
    const std::filesystem::path p(name);
    for (const std::string suffix : {"", ".png", ".jpg", ".jpeg"}) {
      const std::filesystem::path cand = p.string() + suffix;
      tries.push_back(cand.is_absolute() ? cand : base_ / cand);
    }
    for (const auto& t : tries) {
      std::error_code ec;
      if (!std::filesystem::is_regular_file(t, ec)) continue;
      const std::string key = std::filesystem::weakly_canonical(t).string();
      if (auto it = image_index_.find(key); it != image_index_.end()) return it->second;
      cv::Mat img = cv::imread(t.string(), cv::IMREAD_UNCHANGED);
      if (img.empty()) throw TexError{"LaTeX Error: Cannot determine size of graphic in " + name + ".", last_line_};
      if (img.depth() != CV_8U) img.convertTo(img, CV_8U, img.depth() == CV_16U ? 1.0 / 257 : 1.0);
      if (img.channels() == 1) cv::cvtColor(img, img, cv::COLOR_GRAY2BGR);
      if (img.channels() == 4) {
        cv::Mat bgr(img.size(), CV_8UC3);
        for (int y = 0; y < img.rows; ++y) {
          for (int x = 0; x < img.cols; ++x) {
            const cv::Vec4b px = img.at<cv::Vec4b>(y, x);
            const double a = px[3] / 255.0;
            for (int ch = 0; ch < 3; ++ch) bgr.at<cv::Vec3b>(y, x)[ch] = cv::saturate_cast<uchar>(a * px[ch] + (1 - a) * 255);
          }
        }
        img = bgr;
      }
      images_.push_back(img);
      image_index_[key] = static_cast<int>(images_.size()) - 1;
      return image_index_[key];
    }
    throw TexError{"LaTeX Error: File `" + name + "' not found.", last_line_};
  }

  // ---- dispatch ------------------------------------------------------------

  void step() {
    const Tok& t = next();
    switch (t.type) {
      case T::chr: return text_token(t.text);
      case T::space: return emit_space();
      case T::par:
        if (in_table() || !captures_.empty()) return emit_space();
        return end_par();
      case T::bgroup: return push_group();
      case T::egroup: {
        const std::size_t floor = envs_.empty() ? 1 : envs_.back().group_depth + 1 + (in_table() ? 1 : 0);
        if (groups_.size() <= floor) {
          throw TexError{envs_.empty() ? "Too many }'s." : "Extra }, or forgotten \\end{" + envs_.back().name + "}.",
                         t.line};
        }
        return pop_group();
      }
      case T::tab:
        if (!in_table()) throw TexError{"Misplaced alignment tab character &.", t.line};
        return next_cell();
      case T::math: return math();
      case T::param: throw TexError{"You can't use `macro parameter character #' in horizontal mode.", t.line};
      case T::cmd: return command(t.text);
    }
  }

  void text_token(const std::string& text) {
    if (text == "^" || text == "_") throw TexError{"Missing $ inserted.", last_line_};
    if (text == "~") return emit_text(" ");
    emit_text(text);
  }

  void math() {
    const int start = last_line_;
    std::string out;
    bool closed = false;
    while (!at_end()) {
      const Tok& t = next();
      if (t.type == T::math) {
        closed = true;
        break;
      }
      math_token(t, out);
    }
    if (!closed) throw TexError{"Missing $ inserted.", start};
    emit_text(out);
  }

  void math_token(const Tok& t, std::string& out) {
    switch (t.type) {
      case T::chr:
        if (t.text == "^" || t.text == "_") return;
        out += t.text == "~" ? " " : t.text;
        return;
      case T::space:
      case T::bgroup:
      case T::egroup: return;
      case T::par: throw TexError{"Missing $ inserted.", t.line};
      case T::tab: throw TexError{"Misplaced alignment tab character &.", t.line};
      case T::param: throw TexError{"You can't use `macro parameter character #' in math mode.", t.line};
      case T::math: return;
      case T::cmd: {
        if (t.text == "checkmark") {
          require_package("amssymb", t.text);
          out += "v";
          return;
        }
        if (t.text == "mathrm" || t.text == "mathbf" || t.text == "mathit") {
          const Range r = read_arg(t.text);
          for (std::size_t i = r.b; i < r.e; ++i) math_token((*r.toks)[i], out);
          return;
        }
        if (t.text == "text") {
          throw TexError{"Undefined control sequence. \\text", t.line};
        }
        auto it = math_symbols().find(t.text);
        if (it == math_symbols().end()) throw TexError{"Undefined control sequence. \\" + t.text, t.line};
        out += it->second;
        return;
      }
    }
  }

  void next_cell() {
    Env& e = *top_env();
    if (groups_.size() != e.group_depth + 2) throw TexError{"Missing } inserted.", last_line_};
    auto& row = e.table.rows.back();
    int used = 0;
    for (const auto& c : row.cells) used += c.span_cols;
    if (used >= static_cast<int>(e.table.spec.columns.size())) {
      throw TexError{"Extra alignment tab has been changed to \\cr.", last_line_};
    }
    row.cells.emplace_back();
    pop_group();
    push_group();
  }

  void next_row() {
    Env& e = *top_env();
    if (groups_.size() != e.group_depth + 2) throw TexError{"Missing } inserted.", last_line_};
    read_optional();
    e.table.rows.emplace_back();
    e.table.rows.back().cells.emplace_back();
    pop_group();
    push_group();
  }

  bool row_empty(const detail::TableRow& row) {
    return row.cells.size() == 1 && row.cells[0].runs.empty() && row.cells[0].span_rows == 1 &&
           row.cells[0].span_cols == 1;
  }

  void command(const std::string& name) {
    if (auto m = macros_.find(name); m != macros_.end()) return expand(name, m->second);
    if (name.size() == 1 && !is_letter(name[0])) return control_symbol(name);
    if (auto it = text_symbols().find(name); it != text_symbols().end()) {
      emit_text(it->second);
      return;
    }
    if (auto it = size_commands().find(name); it != size_commands().end()) {
      style().size = it->second;
      return;
    }

    // preamble
    if (name == "documentclass") {
      require_preamble(name);
      if (have_class_) throw TexError{"LaTeX Error: Two \\documentclass or \\documentstyle commands.", last_line_};
      read_optional();
      const std::string cls = raw_arg(name);
      if (cls != "article" && cls != "report") throw TexError{"LaTeX Error: File `" + cls + ".cls' not found.", last_line_};
      have_class_ = true;
      return;
    }
    if (!have_class_) throw TexError{"LaTeX Error: \\" + name + " used before \\documentclass.", last_line_};
    if (name == "usepackage") {
      require_preamble(name);
      const auto opts = read_optional();
      for (const auto& pkg : split(raw_arg(name), ',')) {
        static const std::set<std::string> known = {"graphicx", "graphics", "xcolor", "color",    "multirow",
                                                    "caption",  "geometry", "amssymb", "inputenc", "fontenc",
                                                    "array",    "booktabs"};
        if (!known.count(pkg)) throw TexError{"LaTeX Error: File `" + pkg + ".sty' not found.", last_line_};
        packages_.insert(pkg);
        if (pkg == "graphics") packages_.insert("graphicx");
        if (pkg == "color") packages_.insert("xcolor");
        if (pkg == "geometry" && opts) geometry_options(*opts);
      }
      return;
    }
    if (name == "geometry") {
      require_package("geometry", name);
      require_preamble(name);
      geometry_options(raw_arg(name));
      return;
    }
    if (name == "definecolor") {
      require_package("xcolor", name);
      const std::string cname = raw_arg(name), model = raw_arg(name), spec = raw_arg(name);
      colors_[cname] = parse_color_model(model, spec);
      return;
    }
    if (name == "title" || name == "author" || name == "date") {
      const Range r = read_arg(name);
      std::vector<Run> runs = capture(r);
      std::string text;
      for (const auto& run : runs) text += run.text;
      (name == "title" ? title_ : name == "author" ? author_ : date_) = text;
      return;
    }
    if (name == "newcommand" || name == "renewcommand" || name == "providecommand") {
      read_star();
      std::string target = raw_arg(name);
      if (target.size() < 2 || target[0] != '\\') throw TexError{"LaTeX Error: Missing control sequence inserted.", last_line_};
      target = target.substr(1);
      int params = 0;
      if (auto o = read_optional()) {
        try {
          params = std::stoi(*o);
        } catch (...) {
          throw TexError{"Missing number, treated as zero.", last_line_};
        }
      }
      const Range body = read_arg(name);
      const bool exists = macros_.count(target) || text_symbols().count(target) || size_commands().count(target);
      if (name == "newcommand" && exists) throw TexError{"LaTeX Error: Command \\" + target + " already defined.", last_line_};
      if (name == "providecommand" && exists) return;
      macros_[target] = Macro{params, std::vector<Tok>(r_begin(body), r_end(body))};
      return;
    }
    static const std::set<std::string> ignored_one_arg = {"pagestyle", "thispagestyle", "label", "pagenumbering"};
    if (ignored_one_arg.count(name)) {
      raw_arg(name);
      return;
    }
    if (name == "setlength" || name == "addtolength" || name == "setcounter" || name == "addtocounter") {
      raw_arg(name);
      raw_arg(name);
      return;
    }
    if (name == "captionsetup") {
      require_package("caption", name);
      read_optional();
      raw_arg(name);
      return;
    }

    // document structure
    if (name == "begin") return begin_env(raw_arg(name));
    if (name == "end") return end_env(raw_arg(name));

    if (name == "section" || name == "subsection" || name == "subsubsection") return section(name);
    if (name == "paragraph") {
      block_context(name);
      end_par();
      read_star();
      const Range r = read_arg(name);
      feed_runs(capture(r, [&] { style().bold = true; }));
      ts_->add_space(style());
      return;
    }
    if (name == "maketitle") {
      block_context(name);
      end_par();
      if (title_.empty()) throw TexError{"LaTeX Error: No \\title given.", last_line_};
      Style s;
      s.size = 17.28;
      feed_runs({{title_, s}});
      ts_->end_paragraph(Align::center);
      s.size = 12;
      if (!author_.empty()) {
        feed_runs({{author_, s}});
        ts_->end_paragraph(Align::center);
      }
      feed_runs({{date_.empty() ? "1 January 2000" : date_, s}});
      ts_->end_paragraph(Align::center);
      ts_->vskip(12);
      return;
    }
    if (name == "tableofcontents" || name == "listoffigures") return;
    if (name == "item") return item();
    if (name == "caption") return caption();
    if (name == "includegraphics") return include_graphics();

    // font and color
    static const std::map<std::string, std::function<void(Style&)>> switches = {
        {"textbf", [](Style& s) { s.bold = true; }},     {"textit", [](Style& s) { s.italic = true; }},
        {"emph", [](Style& s) { s.italic = !s.italic; }}, {"textsl", [](Style& s) { s.italic = true; }},
        {"textup", [](Style& s) { s.italic = false; }},  {"textmd", [](Style& s) { s.bold = false; }},
        {"textnormal", [](Style& s) { s.bold = s.italic = false; }},
        {"texttt", [](Style&) {}}, {"textrm", [](Style&) {}},       {"textsf", [](Style&) {}},
        {"textsc", [](Style&) {}}, {"underline", [](Style&) {}},    {"mbox", [](Style&) {}},
        {"textsuperscript", [](Style&) {}}, {"textsubscript", [](Style&) {}}};
    if (auto it = switches.find(name); it != switches.end()) {
      const Range r = read_arg(name);
      exec_grouped(r, [&] { it->second(style()); });
      return;
    }
    if (name == "bfseries") return void(style().bold = true);
    if (name == "itshape" || name == "slshape") return void(style().italic = true);
    if (name == "mdseries") return void(style().bold = false);
    if (name == "upshape") return void(style().italic = false);
    if (name == "normalfont") return void(style().bold = style().italic = false);
    if (name == "rmfamily" || name == "sffamily" || name == "ttfamily" || name == "scshape") return;
    if (name == "textcolor") {
      require_package("xcolor", name);
      const Rgb c = color(raw_arg(name));
      const Range r = read_arg(name);
      exec_grouped(r, [&] { style().color = c; });
      return;
    }
    if (name == "color") {
      require_package("xcolor", name);
      style().color = color(raw_arg(name));
      return;
    }
    if (name == "colorbox") {
      require_package("xcolor", name);
      color(raw_arg(name));
      const Range r = read_arg(name);
      exec_grouped(r);
      return;
    }
    if (name == "centering") return void(groups_.back().align = Align::center);
    if (name == "raggedright") return void(groups_.back().align = Align::left);
    if (name == "raggedleft") return void(groups_.back().align = Align::right);

    // spacing and breaks
    if (name == "newpage" || name == "clearpage" || name == "pagebreak" || name == "cleardoublepage") {
      block_context(name);
      end_par();
      ts_->new_page();
      return;
    }
    if (name == "newline" || name == "linebreak") {
      if (in_table()) return next_row();
      if (in_document_ && captures_.empty()) ts_->line_break();
      return;
    }
    if (name == "vspace") {
      read_star();
      const double v = length(raw_arg(name));
      if (!captures_.empty() || in_table()) return;
      require_document("\\vspace");
      end_par();
      ts_->vskip(v);
      return;
    }
    if (name == "hspace") {
      read_star();
      length(raw_arg(name));
      return emit_space();
    }
    if (name == "smallskip" || name == "medskip" || name == "bigskip") {
      if (!captures_.empty() || in_table()) return;
      require_document("\\" + name);
      end_par();
      ts_->vskip(name == "smallskip" ? 3 : name == "medskip" ? 6 : 12);
      return;
    }
    if (name == "par") {
      if (in_table() || !captures_.empty()) return emit_space();
      return end_par();
    }
    if (name == "quad" || name == "qquad" || name == "hfill" || name == "enspace") return emit_space();
    if (name == "noindent" || name == "indent" || name == "protect" || name == "relax") return;
    if (name == "ref" || name == "pageref" || name == "cite") {
      raw_arg(name);
      return emit_text("??");
    }
    if (name == "footnote") {
      const Range r = read_arg(name);
      emit_text("(");
      exec_grouped(r);
      return emit_text(")");
    }
    if (name == "checkmark") {
      require_package("amssymb", name);
      return emit_text("v");
    }
    if (name == "rule") {
      read_optional();
      length(raw_arg(name));
      length(raw_arg(name));
      return;
    }

    // tables
    if (name == "hline" || name == "toprule" || name == "midrule" || name == "bottomrule") {
      if (name != "hline") require_package("booktabs", name);
      if (!in_table()) throw TexError{"Misplaced \\noalign.", last_line_};
      auto& row = top_env()->table.rows.back();
      if (!row_empty(row)) throw TexError{"Misplaced \\noalign.", last_line_};
      row.rule_above = true;
      return;
    }
    if (name == "cline") {
      const std::string spec = raw_arg(name);
      if (!in_table()) throw TexError{"Misplaced \\noalign.", last_line_};
      const auto dash = spec.find('-');
      try {
        const int a = std::stoi(spec.substr(0, dash));
        const int b = dash == std::string::npos ? a : std::stoi(spec.substr(dash + 1));
        top_env()->table.rows.back().partial_rules_above.emplace_back(a, b);
      } catch (...) {
        throw TexError{"Missing number, treated as zero.", last_line_};
      }
      return;
    }
    if (name == "multirow") {
      require_package("multirow", name);
      const std::string n = raw_arg(name);
      read_optional();
      raw_arg(name);  // width
      const Range r = read_arg(name);
      int rows = 1;
      try {
        rows = std::stoi(n);
      } catch (...) {
        throw TexError{"Missing number, treated as zero.", last_line_};
      }
      if (!in_table()) {
        exec_grouped(r);
        return;
      }
      cell().span_rows = std::max(1, rows);
      exec_grouped(r);
      return;
    }
    if (name == "multicolumn") {
      const std::string n = raw_arg(name);
      const std::string spec = raw_arg(name);
      const Range r = read_arg(name);
      if (!in_table()) throw TexError{"Misplaced \\omit.", last_line_};
      int cols = 1;
      try {
        cols = std::stoi(n);
      } catch (...) {
        throw TexError{"Missing number, treated as zero.", last_line_};
      }
      cell().span_cols = std::max(1, cols);
      if (spec.find('c') != std::string::npos) cell().align = ColumnAlign::center;
      else if (spec.find('r') != std::string::npos) cell().align = ColumnAlign::right;
      else cell().align = ColumnAlign::left;
      exec_grouped(r);
      return;
    }
    throw TexError{"Undefined control sequence. \\" + name, last_line_};
  }

  static std::vector<Tok>::const_iterator r_begin(const Range& r) { return r.toks->begin() + static_cast<long>(r.b); }
  static std::vector<Tok>::const_iterator r_end(const Range& r) { return r.toks->begin() + static_cast<long>(r.e); }

  void expand(const std::string& name, const Macro& m) {
    if (++expansions_ > 10000) throw TexError{"TeX capacity exceeded, sorry [main memory size].", last_line_};
    std::vector<Range> args;
    for (int k = 0; k < m.params; ++k) args.push_back(read_arg(name));
    auto& body = owned_.emplace_back();
    for (const auto& t : m.body) {
      if (t.type == T::param) {
        const int k = t.text.empty() ? 0 : t.text[0] - '0';
        if (k < 1 || k > m.params) throw TexError{"Illegal parameter number in definition of \\" + name + ".", t.line};
        body.insert(body.end(), r_begin(args[k - 1]), r_end(args[k - 1]));
      } else {
        body.push_back(t);
      }
    }
    exec(body, 0, body.size());
  }

  void control_symbol(const std::string& s) {
    if (s == "\\") {
      read_star();
      if (in_table()) return next_row();
      read_optional();
      if (in_document_ && captures_.empty()) ts_->line_break();
      return;
    }
    if (s == " " || s == "\n" || s == ",") return emit_space();
    if (s == "-" || s == "/" || s == "@" || s == "!" || s == ";" || s == ":") return;
    if (s == "'" || s == "`" || s == "\"" || s == "^" || s == "~") {
      std::string base;
      if (!at_end() && peek().type == T::bgroup) {
        base = raw_arg("accent");
      } else if (!at_end() && peek().type == T::chr) {
        const Tok& t = next();
        emit_text(accent(s, t.text));
        return;
      }
      emit_text(accent(s, base));
      return;
    }
    if (auto it = text_symbols().find(s); it != text_symbols().end()) return emit_text(it->second);
    throw TexError{"Undefined control sequence. \\" + s, last_line_};
  }

  void geometry_options(const std::string& opts) {
    for (const auto& kv : split(opts, ',')) {
      const auto eq = kv.find('=');
      const std::string key = trim(kv.substr(0, eq));
      if (eq == std::string::npos) {
        if (key == "a4paper") geometry_.width = 595.276, geometry_.height = 841.89;
        if (key == "letterpaper") geometry_.width = 612, geometry_.height = 792;
        continue;
      }
      const double v = length(kv.substr(eq + 1));
      if (key == "margin") geometry_.left = geometry_.right = geometry_.top = geometry_.bottom = v;
      else if (key == "hmargin") geometry_.left = geometry_.right = v;
      else if (key == "vmargin") geometry_.top = geometry_.bottom = v;
      else if (key == "left" || key == "lmargin" || key == "inner") geometry_.left = v;
      else if (key == "right" || key == "rmargin" || key == "outer") geometry_.right = v;
      else if (key == "top" || key == "tmargin") geometry_.top = v;
      else if (key == "bottom" || key == "bmargin") geometry_.bottom = v;
    }
    if (geometry_.text_width() < 72 || geometry_.text_bottom() - geometry_.top < 72) {
      throw TexError{"Package geometry Error: margins leave no room for text.", last_line_};
    }
  }

  Rgb parse_color_model(const std::string& model, const std::string& spec) {
    const auto parts = split(spec, ',');
    try {
      if (model == "rgb" && parts.size() == 3) return {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
      if (model == "RGB" && parts.size() == 3) {
        return {std::stod(parts[0]) / 255, std::stod(parts[1]) / 255, std::stod(parts[2]) / 255};
      }
      if (model == "gray" && parts.size() == 1) {
        const double g = std::stod(parts[0]);
        return {g, g, g};
      }
      if (model == "HTML" && spec.size() == 6) {
        const long v = std::stol(spec, nullptr, 16);
        return {((v >> 16) & 0xFF) / 255.0, ((v >> 8) & 0xFF) / 255.0, (v & 0xFF) / 255.0};
      }
    } catch (...) {
    }
    throw TexError{"Package xcolor Error: Undefined color model `" + model + "' or bad specification.", last_line_};
  }

  // ---- environments --------------------------------------------------------

  void begin_env(const std::string& name) {
    if (name == "document") {
      require_preamble("begin{document}");
      in_document_ = true;
      ts_.emplace(geometry_);
      Env env;
      env.name = name;
      env.line = last_line_;
      env.group_depth = groups_.size();
      envs_.push_back(env);
      push_group();
      return;
    }
    require_document("\\begin{" + name + "}");
    if (!captures_.empty() || (in_table() && name != "tabular")) {
      throw TexError{"LaTeX Error: environment " + name + " is not allowed here.", last_line_};
    }
    if (in_table()) throw TexError{"LaTeX Error: nested tabular is not supported.", last_line_};
    Env env;
    env.name = name;
    env.line = last_line_;
    env.group_depth = groups_.size();
    if (name == "center" || name == "flushleft" || name == "flushright") {
      end_par();
      envs_.push_back(env);
      push_group();
      groups_.back().align = name == "center" ? Align::center : name == "flushleft" ? Align::left : Align::right;
      return;
    }
    if (name == "itemize" || name == "enumerate" || name == "description") {
      int depth = 1;
      for (const auto& e : envs_) depth += e.list;
      if (depth > 4) throw TexError{"LaTeX Error: Too deeply nested.", last_line_};
      end_par();
      env.list = true;
      env.depth = depth;
      ts_->push_indent(name == "description" ? 12 : 20);
      envs_.push_back(env);
      push_group();
      return;
    }
    if (name == "quote" || name == "quotation") {
      end_par();
      ts_->push_indent(20);
      envs_.push_back(env);
      push_group();
      return;
    }
    if (name == "figure" || name == "table") {
      read_star();
      read_optional();
      end_par();
      ts_->vskip(6);
      env.float_env = true;
      envs_.push_back(env);
      push_group();
      return;
    }
    if (name == "tabular") {
      read_optional();
      env.table.spec = parse_colspec(raw_arg("begin{tabular}"));
      env.table.rows.emplace_back();
      env.table.rows.back().cells.emplace_back();
      end_par();
      envs_.push_back(std::move(env));
      push_group();  // env group
      push_group();  // cell group
      return;
    }
    throw TexError{"LaTeX Error: Environment " + name + " undefined.", last_line_};
  }

  detail::TableSpec parse_colspec(const std::string& spec) {
    detail::TableSpec ts;
    ts.rule_before.push_back(false);
    std::string s = spec;
    // Expand *{n}{cols}.
    for (std::size_t star; (star = s.find("*{")) != std::string::npos;) {
      const auto close = s.find('}', star);
      const auto open2 = s.find('{', close);
      int depth = 0;
      std::size_t close2 = std::string::npos;
      for (std::size_t k = open2; k < s.size(); ++k) {
        if (s[k] == '{') ++depth;
        if (s[k] == '}' && --depth == 0) {
          close2 = k;
          break;
        }
      }
      if (close == std::string::npos || open2 == std::string::npos || close2 == std::string::npos) {
        throw TexError{"LaTeX Error: Illegal character in array arg.", last_line_};
      }
      int n = 0;
      try {
        n = std::stoi(s.substr(star + 2, close - star - 2));
      } catch (...) {
        throw TexError{"Missing number, treated as zero.", last_line_};
      }
      std::string rep;
      for (int k = 0; k < n; ++k) rep += s.substr(open2 + 1, close2 - open2 - 1);
      s = s.substr(0, star) + rep + s.substr(close2 + 1);
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      const char c = s[i];
      if (c == ' ') continue;
      if (c == '|') {
        ts.rule_before.back() = true;
        continue;
      }
      auto braced = [&]() {
        if (i + 1 >= s.size() || s[i + 1] != '{') throw TexError{"LaTeX Error: Illegal character in array arg.", last_line_};
        int depth = 0;
        for (std::size_t k = i + 1; k < s.size(); ++k) {
          if (s[k] == '{') ++depth;
          if (s[k] == '}' && --depth == 0) {
            const std::string inner = s.substr(i + 2, k - i - 2);
            i = k;
            return inner;
          }
        }
        throw TexError{"LaTeX Error: Illegal character in array arg.", last_line_};
      };
      if (c == 'l' || c == 'c' || c == 'r') {
        ts.columns.push_back(c == 'l' ? ColumnAlign::left : c == 'c' ? ColumnAlign::center : ColumnAlign::right);
        ts.fixed_width.push_back(0);
        ts.rule_before.push_back(false);
      } else if (c == 'p' || c == 'm' || c == 'b') {
        const double w = length(braced());
        ts.columns.push_back(ColumnAlign::paragraph);
        ts.fixed_width.push_back(w);
        ts.rule_before.push_back(false);
      } else if (c == '@' || c == '>' || c == '<') {
        braced();
      } else {
        throw TexError{"LaTeX Error: Illegal character in array arg.", last_line_};
      }
    }
    if (ts.columns.empty()) throw TexError{"LaTeX Error: Illegal character in array arg.", last_line_};
    return ts;
  }

  void end_env(const std::string& name) {
    if (envs_.empty()) throw TexError{"LaTeX Error: \\end{" + name + "} without matching \\begin.", last_line_};
    Env& e = envs_.back();
    if (e.name != name) {
      throw TexError{"LaTeX Error: \\begin{" + e.name + "} on input line " + std::to_string(e.line) + " ended by \\end{" +
                         name + "}.",
                     last_line_};
    }
    const std::size_t expected = e.group_depth + (name == "tabular" ? 2 : 1);
    if (groups_.size() != expected) throw TexError{"Missing } inserted.", last_line_};
    if (!captures_.empty()) throw TexError{"LaTeX Error: \\end{" + name + "} inside an argument.", last_line_};

    if (name == "document") {
      ts_->end_paragraph(align());
      pop_group();
      envs_.pop_back();
      done_ = true;
      return;
    }
    if (name == "tabular") {
      detail::Table table = std::move(e.table);
      if (table.rows.size() > 0 && row_empty(table.rows.back())) {
        table.rule_below_last = table.rows.back().rule_above;
        table.rows.pop_back();
      }
      pop_group();
      pop_group();
      const int line = e.line;
      envs_.pop_back();
      if (!table.rows.empty()) ts_->table(table, align(), line);
      return;
    }
    ts_->end_paragraph(align());
    const bool list = e.list || name == "quote" || name == "quotation";
    pop_group();
    envs_.pop_back();
    if (list) ts_->pop_indent();
    if (name == "figure" || name == "table") ts_->vskip(6);
  }

  void section(const std::string& name) {
    block_context(name);
    const bool starred = read_star();
    read_optional();
    end_par();
    const Range r = read_arg(name);
    const double size = name == "section" ? 14.4 : name == "subsection" ? 12 : 10.95;
    std::string number;
    if (!starred) {
      if (name == "section") {
        ++sec_, sub_ = 0, subsub_ = 0;
        number = std::to_string(sec_);
      } else if (name == "subsection") {
        ++sub_, subsub_ = 0;
        number = std::to_string(sec_) + "." + std::to_string(sub_);
      } else {
        ++subsub_;
        number = std::to_string(sec_) + "." + std::to_string(sub_) + "." + std::to_string(subsub_);
      }
    }
    auto runs = capture(r, [&] {
      style().bold = true;
      style().size = size;
    });
    if (!number.empty()) {
      Style s;
      s.bold = true;
      s.size = size;
      runs.insert(runs.begin(), Run{number + "  ", s});
    }
    ts_->heading(runs, name == "section" ? 14 : 10, name == "section" ? 6 : 4);
  }

  void item() {
    Env* e = top_env();
    if (!e || !e->list || !captures_.empty()) {
      throw TexError{"LaTeX Error: Lonely \\item--perhaps a missing list environment.", last_line_};
    }
    const auto label_opt = read_optional();
    ts_->end_paragraph(align());
    e->item_seen = true;
    ++e->counter;
    Style s = style();
    if (e->name == "description") {
      Style b = s;
      b.bold = true;
      if (label_opt) {
        feed_runs({{*label_opt, b}});
        ts_->add_space(b);
      }
      return;
    }
    std::string label;
    if (label_opt) {
      label = *label_opt;
    } else if (e->name == "itemize") {
      static const char* bullets[] = {"•", "–", "*", "·"};
      label = bullets[e->depth - 1];
    } else {
      const int n = e->counter;
      switch (e->depth) {
        case 1: label = std::to_string(n) + "."; break;
        case 2: label = "(" + std::string(1, static_cast<char>('a' + (n - 1) % 26)) + ")"; break;
        case 3: label = std::to_string(n) + ")"; break;
        default: label = std::string(1, static_cast<char>('A' + (n - 1) % 26)) + ".";
      }
    }
    ts_->set_item_label({Run{label, s}});
  }

  void caption() {
    read_star();
    read_optional();
    const Range r = read_arg("caption");
    Env* float_env = nullptr;
    for (auto it = envs_.rbegin(); it != envs_.rend(); ++it) {
      if (it->float_env) float_env = &*it;
    }
    if (!float_env) throw TexError{"LaTeX Error: \\caption outside float.", last_line_};
    block_context("caption");
    end_par();
    const bool fig = float_env->name == "figure";
    const int n = fig ? ++figures_ : ++tables_;
    auto runs = capture(r);
    runs.insert(runs.begin(), Run{std::string(fig ? "Figure " : "Table ") + std::to_string(n) + ": ", style()});
    feed_runs(runs);
    ts_->end_paragraph(Align::center);
  }

  void include_graphics() {
    require_package("graphicx", "includegraphics");
    const auto opts = read_optional();
    const std::string file = raw_arg("includegraphics");
    block_context("includegraphics");
    double w = 0, h = 0, scale = 0;
    if (opts) {
      for (const auto& kv : split(*opts, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = trim(kv.substr(0, eq)), value = kv.substr(eq + 1);
        if (key == "width") w = length(value);
        else if (key == "height") h = length(value);
        else if (key == "scale") {
          try {
            scale = std::stod(value);
          } catch (...) {
            throw TexError{"Missing number, treated as zero.", last_line_};
          }
        }
      }
    }
    const int index = load_image(file);
    const cv::Mat& img = images_[index];
    if (scale > 0 && w <= 0 && h <= 0) {
      w = img.cols * 0.75 * scale;
      h = img.rows * 0.75 * scale;
    }
    end_par();
    ts_->image(index, img.size(), w, h, align(), file);
  }

  std::filesystem::path base_;
  std::vector<std::string> lines_;
  std::vector<Tok> tokens_;
  std::deque<std::vector<Tok>> owned_;
  std::vector<Frame> frames_;
  std::vector<Group> groups_;
  std::vector<Env> envs_;
  std::vector<std::vector<Run>*> captures_;
  std::map<std::string, Macro> macros_;
  std::set<std::string> packages_;
  std::map<std::string, Rgb> colors_ = base_colors();
  detail::PageGeometry geometry_;
  std::optional<detail::Typesetter> ts_;
  std::vector<cv::Mat> images_;
  std::map<std::string, int> image_index_;
  std::string title_, author_, date_;
  bool have_class_ = false;
  bool in_document_ = false;
  bool done_ = false;
  int last_line_ = 1;
  int sec_ = 0, sub_ = 0, subsub_ = 0;
  int figures_ = 0, tables_ = 0;
  int expansions_ = 0;
};

}  // namespace

Result compile(const std::string& source, const std::filesystem::path& base_dir) {
  Result result;
  std::ostringstream log;
  log << "This is texlite (LaTeX subset typesetter)\n";
  Interpreter interp(source, base_dir);
  try {
    detail::Document doc = interp.run();
    if (doc.pages.empty()) {
      log << "No pages of output.\n";
      result.ok = true;
      result.log = log.str();
      return result;
    }
    result.pdf = detail::write_pdf(doc);
    result.layout = std::move(doc.layout);
    result.ok = true;
    log << "Output written (" << result.layout.pages << (result.layout.pages == 1 ? " page, " : " pages, ")
        << result.pdf.size() << " bytes).\n";
  } catch (const TexError& e) {
    const auto& lines = interp.source_lines();
    log << "! " << e.message << "\n";
    log << "l." << e.line << " ";
    if (e.line >= 1 && e.line <= static_cast<int>(lines.size())) log << lines[e.line - 1];
    log << "\n";
    result.ok = false;
  } catch (const std::exception& e) {
    log << "! Internal error: " << e.what() << "\n";
    result.ok = false;
  }
  result.log = log.str();
  return result;
}

}  // namespace manualkit::texlite
