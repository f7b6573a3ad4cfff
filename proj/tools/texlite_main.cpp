// pdflatex-compatible front end for the texlite typesetter:
//   manualkit-texlite [-interaction=...] [-halt-on-error] [-output-directory=DIR] [-jobname=NAME] file.tex
// Writes NAME.pdf, NAME.log and NAME.layout.json; exits 1 on any error.
#include "manualkit/image/io.hpp"
#include "manualkit/texlite/texlite.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  fs::path out_dir = ".";
  std::string jobname;
  std::string input;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a.rfind("--", 0) == 0) a = a.substr(1);
    if (a.rfind("-output-directory=", 0) == 0) {
      out_dir = a.substr(18);
    } else if (a == "-output-directory" && i + 1 < argc) {
      out_dir = argv[++i];
    } else if (a.rfind("-jobname=", 0) == 0) {
      jobname = a.substr(9);
    } else if (a == "-version" || a == "-v") {
      std::cout << "texlite 1.0 (LaTeX subset typesetter)\n";
      return 0;
    } else if (!a.empty() && a[0] == '-') {
      // -interaction=..., -halt-on-error, -file-line-error: texlite always stops at the first error.
    } else {
      input = argv[i];
    }
  }
  if (input.empty()) {
    std::cerr << "usage: manualkit-texlite [options] file.tex\n";
    return 2;
  }
  fs::path in(input);
  if (!fs::exists(in) && fs::exists(fs::path(input + ".tex"))) in = input + ".tex";
  if (jobname.empty()) jobname = in.stem().string();
  const fs::path log_path = out_dir / (jobname + ".log");

  std::ifstream f(in, std::ios::binary);
  if (!f) {
    std::cout << "! I can't find file `" << input << "'.\n";
    return 1;
  }
  std::stringstream ss;
  ss << f.rdbuf();

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const fs::path base = in.has_parent_path() ? in.parent_path() : fs::current_path();
  auto result = manualkit::texlite::compile(ss.str(), fs::current_path());
  if (!result.ok && result.log.find("not found") != std::string::npos && base != fs::current_path()) {
    // Retry image lookup relative to the source file's directory.
    auto second = manualkit::texlite::compile(ss.str(), base);
    if (second.ok) result = std::move(second);
  }
  std::cout << result.log;
  std::ostringstream log;
  log << result.log;
  if (result.ok && !result.pdf.empty()) {
    const fs::path pdf = out_dir / (jobname + ".pdf");
    manualkit::write_text_file(pdf, result.pdf);
    manualkit::write_text_file(out_dir / (jobname + ".layout.json"),
                               manualkit::texlite::to_json(result.layout).dump(1) + "\n");
    log << "Output written on " << pdf.string() << ".\n";
  }
  manualkit::write_text_file(log_path, log.str());
  return result.ok ? 0 : 1;
}
