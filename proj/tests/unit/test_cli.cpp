#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "manualkit/core/json_io.hpp"
#include "manualkit/image/io.hpp"
#include "manualkit/manualgen/latex.hpp"
#include "test_support.hpp"

using namespace manualkit;
using namespace manualkit::testing;
namespace fs = std::filesystem;

namespace {

ProcessResult cli(const fs::path& dataset, std::vector<std::string> args) {
  args.insert(args.begin(), cli_binary().string());
  args.push_back("--dataset");
  args.push_back(dataset.string());
  return run_process(args, dataset.parent_path(), std::chrono::seconds(300));
}

fs::path two_models(const fs::path& root) {
  const fs::path dir = root / "models";
  fs::create_directories(dir);
  for (const char* id : {"microwave_01", "oven_01"}) {
    fs::copy(fixture_model_dir(id), dir / id, fs::copy_options::recursive);
  }
  return dir;
}

}  // namespace

TEST_CASE("ingest writes one model record per model") {
  TempDir tmp;
  const fs::path ds = tmp.path() / "ds";
  const auto r = cli(ds, {"ingest", two_models(tmp.path()).string()});
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("ingested 2 models") != std::string::npos);
  CHECK(fs::exists(ds / "models" / "microwave_01" / "model.json"));
  CHECK(fs::exists(ds / "models" / "oven_01" / "model.json"));
}

TEST_CASE("annotate before ingest exits 2 naming the missing models") {
  TempDir tmp;
  const auto r = cli(tmp.path() / "empty", {"annotate", "--backend", "mock"});
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("no models") != std::string::npos);
}

TEST_CASE("ingest of an empty directory exits 2") {
  TempDir tmp;
  fs::create_directories(tmp.path() / "none");
  const auto r = cli(tmp.path() / "ds", {"ingest", (tmp.path() / "none").string()});
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("no models") != std::string::npos);
}

TEST_CASE("argument errors exit 2") {
  TempDir tmp;
  CHECK(cli(tmp.path() / "ds", {"eval", "--track", "4"}).exit_code == 2);
  CHECK(cli(tmp.path() / "ds", {"annotate", "--backend", "other"}).exit_code == 2);
}

TEST_CASE("mock pipeline end to end: Track 1 scores 100/100 and writes logs") {
  TempDir tmp;
  const fs::path ds = tmp.path() / "ds";
  REQUIRE(cli(ds, {"ingest", two_models(tmp.path()).string()}).exit_code == 0);

  const auto pending = cli(ds, {"annotate", "--seed", "3"});
  REQUIRE(pending.exit_code == 0);
  CHECK(pending.output.find("pending review") != std::string::npos);
  // Unreviewed instances get no tasks.
  CHECK(cli(ds, {"tasks"}).output.find("generated 0 tasks") != std::string::npos);

  fs::remove_all(ds);
  REQUIRE(cli(ds, {"ingest", (tmp.path() / "models").string()}).exit_code == 0);
  REQUIRE(cli(ds, {"annotate", "--auto-approve", "--instances-per-model", "1"}).exit_code == 0);
  REQUIRE(cli(ds, {"tasks", "--auto-approve", "--per-instance", "3"}).exit_code == 0);
  REQUIRE(cli(ds, {"figures", "--auto-approve"}).exit_code == 0);
  const auto built = cli(ds, {"manuals", "--per-instance", "1", "--latex", texlite_binary().string()});
  REQUIRE(built.exit_code == 0);
  CHECK(built.output.find("built 2 manuals") != std::string::npos);

  const auto eval = cli(ds, {"eval", "--track", "1", "--backend", "mock"});
  REQUIRE(eval.exit_code == 0);
  CHECK(eval.output.find("ManualPlan") != std::string::npos);
  CHECK(eval.output.find("100.00 / 100.00  (n=6)") != std::string::npos);
  CHECK(fs::exists(ds / "episodes" / "track1.jsonl"));
  CHECK(fs::exists(ds / "reports" / "track1.txt"));
  const std::string csv = read_file(ds / "reports" / "track1.csv");
  CHECK(csv.rfind("track,with_manual,category,episodes,metric_1,metric_2", 0) == 0);

  // A noise profile with certain failure drives Track 2 to zero.
  write_text_file(tmp.path() / "noise.json", R"({"executor_failure_rate": 1.0})");
  const auto noisy = cli(ds, {"eval", "--track", "2", "--noise-profile", (tmp.path() / "noise.json").string()});
  REQUIRE(noisy.exit_code == 0);
  CHECK(noisy.output.find("0.00 / 0.00  (n=6)") != std::string::npos);

  const auto report = cli(ds, {"report"});
  CHECK(report.exit_code == 0);
  CHECK(report.output.find("Track 1") != std::string::npos);
  CHECK(report.output.find("Track 2") != std::string::npos);

  const auto stats = cli(ds, {"stats", "--json"});
  REQUIRE(stats.exit_code == 0);
  const json s = json::parse(stats.output);
  CHECK(s.at("instances") == 2);
  CHECK(s.at("tasks") == 6);
  CHECK(s.at("manuals") == 2);
}

TEST_CASE("config file values apply and flags override them") {
  TempDir tmp;
  const fs::path ds = tmp.path() / "ds";
  REQUIRE(cli(ds, {"ingest", two_models(tmp.path()).string()}).exit_code == 0);
  write_text_file(tmp.path() / "run.cfg", "seed=11\n[annotate]\nauto-approve=true\ninstances-per-model=3\n");
  const auto a = cli(ds, {"annotate", "--config", (tmp.path() / "run.cfg").string(), "--instances-per-model", "2"});
  REQUIRE(a.exit_code == 0);
  CHECK(a.output.find("annotated 4 instances") != std::string::npos);
  CHECK(a.output.find("pending") == std::string::npos);

  write_text_file(tmp.path() / "bad.cfg", "no_such_key=1\n");
  CHECK(cli(ds, {"stats", "--config", (tmp.path() / "bad.cfg").string()}).exit_code == 2);
}

TEST_CASE("eval without built manuals exits 2") {
  TempDir tmp;
  const fs::path ds = tmp.path() / "ds";
  REQUIRE(cli(ds, {"ingest", two_models(tmp.path()).string()}).exit_code == 0);
  CHECK(cli(ds, {"eval", "--track", "1"}).exit_code == 2);
}
