#include "manualkit/manualgen/templates.hpp"

#include "manualkit/core/error.hpp"

#include <random>
#include <sstream>

namespace manualkit {

using nlohmann::json;

namespace {

std::string str(const json& j, const char* key, std::string fallback = {}) {
  if (!j.contains(key) || !j.at(key).is_string()) return fallback;
  return j.at(key).get<std::string>();
}

void figure(std::ostringstream& os, const json& fig, const char* width) {
  os << "\\begin{figure}[h]\n\\centering\n\\includegraphics[width=" << width << "\\textwidth]{" << str(fig, "path")
     << "}\n";
  const std::string caption = str(fig, "caption");
  if (!caption.empty()) os << "\\caption{" << latex_escape(caption) << "}\n";
  os << "\\end{figure}\n\n";
}

std::string step_text(const json& step) {
  return "\\textbf{" + latex_escape(str(step, "function_name")) + "}, " + latex_escape(str(step, "state"));
}

void cover(std::ostringstream& os, const json& ctx) {
  os << "\\begin{center}\n{\\Huge \\textbf{" << latex_escape(str(ctx, "title", "User Manual")) << "}}\n\n";
  if (ctx.contains("figures")) {
    for (const auto& f : ctx.at("figures")) os << "\\includegraphics[width=0.8\\textwidth]{" << str(f, "path") << "}\n\n";
  }
  os << "{\\large Read these instructions carefully before first use.}\n\\end{center}\n\\newpage\n";
}

void safety(std::ostringstream& os, const json& ctx) {
  os << "\\section{Safety Instructions}\n";
  os << "Keep this manual for future reference. Observe the following warnings.\n\n";
  for (const auto& icon : ctx.value("icons", json::array())) {
    os << "\\begin{center}\n\\includegraphics[width=0.1\\textwidth]{" << str(icon, "path") << "}\n\\end{center}\n";
    os << "\\textbf{" << latex_escape(str(icon, "title")) << ".} " << latex_escape(str(icon, "text")) << "\n\n";
  }
}

void parts_overview(std::ostringstream& os, const json& ctx, std::mt19937_64& rng) {
  os << "\\section{Parts Overview}\n";
  for (const auto& f : ctx.value("figures", json::array())) figure(os, f, "0.7");
  const bool as_table = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  const auto& parts = ctx.at("parts");
  if (as_table) {
    os << "\\begin{tabular}{|l|l|l|}\n\\hline\n\\textbf{Part} & \\textbf{Setting} & \\textbf{Function} \\\\\n\\hline\n";
    for (const auto& p : parts) {
      const auto& states = p.at("states");
      const std::size_t n = states.size();
      for (std::size_t i = 0; i < n; ++i) {
        if (i == 0) {
          os << "\\multirow{" << n << "}{*}{" << latex_escape(str(p, "function_name")) << "}";
        }
        os << " & " << latex_escape(str(states[i], "label")) << " & " << latex_escape(str(states[i], "description"))
           << " \\\\\n";
      }
      os << "\\hline\n";
    }
    os << "\\end{tabular}\n\n";
  } else {
    os << "\\begin{enumerate}\n";
    for (const auto& p : parts) {
      os << "\\item \\textbf{" << latex_escape(str(p, "function_name")) << "}: ";
      bool first = true;
      for (const auto& s : p.at("states")) {
        os << (first ? "" : "; ") << latex_escape(str(s, "label")) << " (" << latex_escape(str(s, "description")) << ")";
        first = false;
      }
      os << "\n";
    }
    os << "\\end{enumerate}\n\n";
  }
}

void control_panel(std::ostringstream& os, const json& ctx) {
  os << "\\section{Control Panel}\n";
  for (const auto& f : ctx.value("figures", json::array())) figure(os, f, "0.6");
  os << "The control panel groups the following controls:\n\\begin{itemize}\n";
  for (const auto& p : ctx.at("parts")) os << "\\item " << latex_escape(str(p, "function_name")) << "\n";
  os << "\\end{itemize}\n\n";
}

void guidance(std::ostringstream& os, const json& ctx) {
  os << "\\section{Operating the Parts}\n";
  for (const auto& p : ctx.at("parts")) {
    os << "\\subsection{" << latex_escape(str(p, "function_name")) << "}\n";
    os << latex_escape(str(p, "guidance_text")) << "\n\n";
    os << "\\begin{itemize}\n";
    for (const auto& s : p.at("states")) {
      os << "\\item \\textcolor{blue}{" << latex_escape(str(s, "label")) << "}: " << latex_escape(str(s, "description"))
         << "\n";
    }
    os << "\\end{itemize}\n\n";
    if (p.contains("figure") && p.at("figure").is_object()) figure(os, p.at("figure"), "0.5");
  }
}

void tasks(std::ostringstream& os, const json& ctx) {
  const auto& list = ctx.at("tasks");
  const std::string format = str(ctx.at("style"), "task_text_format", "ordered_list");
  os << "\\section{Common Tasks}\n";
  for (const auto& t : list) {
    const auto& steps = t.at("steps");
    os << "\\subsection{" << latex_escape(str(t, "instruction")) << "}\n";
    if (format == "prose") {
      for (std::size_t i = 0; i < steps.size(); ++i) {
        os << (i == 0 ? "First set " : (i + 1 == steps.size() ? " Finally set " : " Then set ")) << step_text(steps[i])
           << ".";
      }
      os << "\n\n";
    } else if (format == "bullet_list" || format == "ordered_list") {
      const char* env = format == "bullet_list" ? "itemize" : "enumerate";
      os << "\\begin{" << env << "}\n";
      for (const auto& s : steps) os << "\\item " << step_text(s) << "\n";
      os << "\\end{" << env << "}\n\n";
    } else if (format == "table_1col") {
      os << "\\begin{tabular}{|l|}\n\\hline\n";
      for (const auto& s : steps) os << step_text(s) << " \\\\\n\\hline\n";
      os << "\\end{tabular}\n\n";
    } else {
      os << "\\begin{tabular}{|c|l|l|}\n\\hline\n\\textbf{Step} & \\textbf{Part} & \\textbf{Action} \\\\\n\\hline\n";
      for (std::size_t i = 0; i < steps.size(); ++i) {
        os << i + 1 << " & " << latex_escape(str(steps[i], "function_name")) << " & "
           << latex_escape(str(steps[i], "state")) << " \\\\\n\\hline\n";
      }
      os << "\\end{tabular}\n\n";
    }
  }
}

}  // namespace

std::string latex_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "\\&"; break;
      case '%': out += "\\%"; break;
      case '$': out += "\\$"; break;
      case '#': out += "\\#"; break;
      case '_': out += "\\_"; break;
      case '{': out += "\\{"; break;
      case '}': out += "\\}"; break;
      case '~': out += "\\textasciitilde{}"; break;
      case '^': out += "\\textasciicircum{}"; break;
      case '\\': out += "\\textbackslash{}"; break;
      default: out += c;
    }
  }
  return out;
}

const std::vector<std::string>& package_whitelist() {
  static const std::vector<std::string> list = {"graphicx", "xcolor", "multirow", "caption", "geometry", "amssymb"};
  return list;
}

std::string manual_preamble(std::string_view title) {
  std::ostringstream os;
  os << "\\documentclass{article}\n";
  os << "\\usepackage{graphicx}\n\\usepackage{xcolor}\n\\usepackage{multirow}\n\\usepackage{caption}\n";
  os << "\\title{" << latex_escape(title) << "}\n";
  os << "\\begin{document}\n";
  return os.str();
}

std::string manual_closing() { return "\\end{document}\n"; }

std::string synthetic_section_latex(const json& context, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::ostringstream os;
  const std::string section = context.at("section").get<std::string>();
  if (section == "cover") cover(os, context);
  else if (section == "safety") safety(os, context);
  else if (section == "parts_overview") parts_overview(os, context, rng);
  else if (section == "control_panel") control_panel(os, context);
  else if (section == "guidance") guidance(os, context);
  else if (section == "tasks") tasks(os, context);
  else throw Error(Errc::backend_unavailable, "no template for section '" + section + "'");
  return os.str();
}

}  // namespace manualkit
