#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace manualkit {

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string output;  // stdout and stderr interleaved
};

/// Runs argv[0] (searched on PATH) in `cwd`. Throws Error(compiler_missing)
/// when the program cannot be found.
ProcessResult run_process(const std::vector<std::string>& argv, const std::filesystem::path& cwd,
                          std::chrono::seconds timeout);

/// Absolute path of an executable, or empty when not found. Names with a
/// slash are checked as given; bare names are looked up on PATH.
std::filesystem::path find_executable(const std::string& program);

/// A LaTeX compiler invocation. In `args`, `{tex}` expands to the source
/// file name and `{outdir}` to the output directory; both are relative to
/// the working directory the compiler runs in.
struct LatexCompiler {
  std::string program = "pdflatex";
  std::vector<std::string> args = {"-interaction=nonstopmode", "-halt-on-error", "-output-directory={outdir}", "{tex}"};
  int timeout_s = 120;
};

/// $MANUALKIT_LATEX if set, else pdflatex on PATH, else the bundled
/// manualkit-texlite (PATH, then next to the running executable).
LatexCompiler default_latex_compiler();

struct LatexOutcome {
  bool ok = false;
  std::string log;
  std::filesystem::path pdf;  // set when ok
  int pages = 0;
};

/// Writes `<jobname>.tex` into `workdir` and compiles it. A nonzero exit or
/// a missing PDF is a failed outcome, with the compiler log attached.
LatexOutcome compile_latex(const LatexCompiler& compiler, const std::string& source,
                           const std::filesystem::path& workdir, const std::string& jobname = "manual");

}  // namespace manualkit
