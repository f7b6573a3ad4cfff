#include "manualkit/manualgen/latex.hpp"

#include "manualkit/core/error.hpp"
#include "manualkit/image/io.hpp"
#include "manualkit/texlite/texlite.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <cstring>

namespace manualkit {

namespace fs = std::filesystem;

fs::path find_executable(const std::string& program) {
  if (program.empty()) return {};
  if (program.find('/') != std::string::npos) {
    return ::access(program.c_str(), X_OK) == 0 ? fs::absolute(program) : fs::path{};
  }
  const char* path = std::getenv("PATH");
  if (!path) return {};
  std::string dirs = path;
  std::size_t start = 0;
  while (start <= dirs.size()) {
    const std::size_t colon = dirs.find(':', start);
    const std::string dir = dirs.substr(start, colon == std::string::npos ? std::string::npos : colon - start);
    if (!dir.empty()) {
      const fs::path cand = fs::path(dir) / program;
      if (::access(cand.c_str(), X_OK) == 0 && !fs::is_directory(cand)) return cand;
    }
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  return {};
}

ProcessResult run_process(const std::vector<std::string>& argv, const fs::path& cwd, std::chrono::seconds timeout) {
  if (argv.empty()) throw Error(Errc::precondition_violated, "empty command line");
  const fs::path exe = find_executable(argv[0]);
  if (exe.empty()) throw Error(Errc::compiler_missing, "program '" + argv[0] + "' not found");

  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(Errc::precondition_violated, std::string("pipe: ") + std::strerror(errno));
  const pid_t pid = ::fork();
  if (pid < 0) throw Error(Errc::precondition_violated, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(fds[1], STDOUT_FILENO);
    ::dup2(fds[1], STDERR_FILENO);
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    if (::chdir(cwd.c_str()) != 0) ::_exit(126);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execv(exe.c_str(), args.data());
    ::_exit(127);
  }
  ::close(fds[1]);
  ProcessResult result;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  char buf[4096];
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      ::kill(pid, SIGKILL);
      result.timed_out = true;
      break;
    }
    pollfd p{fds[0], POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) continue;
    const ssize_t n = ::read(fds[0], buf, sizeof(buf));
    if (n <= 0) break;
    result.output.append(buf, static_cast<std::size_t>(n));
  }
  ::close(fds[0]);
  int status = 0;
  ::waitpid(pid, &status, 0);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

LatexCompiler default_latex_compiler() {
  LatexCompiler c;
  if (const char* env = std::getenv("MANUALKIT_LATEX"); env && *env) {
    c.program = env;
    return c;
  }
  if (!find_executable("pdflatex").empty()) return c;
  if (auto p = find_executable("manualkit-texlite"); !p.empty()) {
    c.program = p.string();
    return c;
  }
  std::error_code ec;
  const fs::path self = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    const fs::path sibling = self.parent_path() / "manualkit-texlite";
    if (fs::exists(sibling)) c.program = sibling.string();
  }
  return c;
}

LatexOutcome compile_latex(const LatexCompiler& compiler, const std::string& source, const fs::path& workdir,
                           const std::string& jobname) {
  fs::create_directories(workdir);
  const std::string tex = jobname + ".tex";
  write_text_file(workdir / tex, source);
  const fs::path pdf = workdir / (jobname + ".pdf");
  std::error_code ec;
  fs::remove(pdf, ec);

  std::vector<std::string> argv = {compiler.program};
  for (std::string a : compiler.args) {
    for (const auto& [key, value] : {std::pair<std::string, std::string>{"{tex}", tex}, {"{outdir}", "."}}) {
      for (std::size_t p; (p = a.find(key)) != std::string::npos;) a.replace(p, key.size(), value);
    }
    argv.push_back(a);
  }
  const ProcessResult run = run_process(argv, workdir, std::chrono::seconds(compiler.timeout_s));
  LatexOutcome out;
  out.log = run.output;
  const fs::path log_file = workdir / (jobname + ".log");
  if (fs::exists(log_file)) out.log = read_text_file(log_file);
  if (run.timed_out) {
    out.log += "\n! compiler timed out\n";
    return out;
  }
  if (run.exit_code != 0 || !fs::exists(pdf)) return out;
  out.ok = true;
  out.pdf = pdf;
  out.pages = texlite::count_pdf_pages(read_text_file(pdf));
  return out;
}

}  // namespace manualkit
