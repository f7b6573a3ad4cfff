#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "manualkit/backend/synthetic.hpp"
#include "manualkit/core/error.hpp"
#include "manualkit/service/dataset.hpp"
#include "manualkit/service/pipeline.hpp"
#include "test_support.hpp"

using namespace manualkit;
using manualkit::testing::TempDir;
namespace fs = std::filesystem;

namespace {

Errc error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::not_found;
}

// One mock dataset shared by the read-only cases.
const fs::path& shared_root() {
  static TempDir dir("manualkit-dataset");
  static const bool built = [] {
    manualkit::testing::build_fixture_dataset(dir.path(), {"microwave_01", "oven_01"});
    return true;
  }();
  (void)built;
  return dir.path();
}

}  // namespace

TEST_CASE("a fresh dataset has the directory skeleton and an empty index") {
  TempDir dir;
  Dataset ds(dir.path() / "d");
  for (const char* sub : {"models", "instances", "tasks", "figures", "manuals", "episodes", "reports", "review"}) {
    CHECK(fs::is_directory(dir.path() / "d" / sub));
  }
  const json idx = ds.index();
  CHECK(idx.at("models").empty());
  CHECK(idx.at("instances").empty());
  CHECK(idx == ds.rebuild_index());
  CHECK(ds.missing_assets().empty());
}

TEST_CASE("ingesting an empty directory is a validation error") {
  TempDir dir;
  Dataset ds(dir.path() / "d");
  fs::create_directories(dir.path() / "empty");
  CHECK(error_of([&] { ingest_models(ds, dir.path() / "empty"); }) == Errc::validation_error);
  CHECK(error_of([&] { ingest_models(ds, dir.path() / "absent"); }) == Errc::validation_error);
}

TEST_CASE("missing entities raise dataset_asset_missing") {
  TempDir dir;
  Dataset ds(dir.path() / "d");
  CHECK(error_of([&] { ds.model("nope"); }) == Errc::dataset_asset_missing);
  CHECK(error_of([&] { ds.instance("nope"); }) == Errc::dataset_asset_missing);
  CHECK(error_of([&] { ds.task("nope"); }) == Errc::dataset_asset_missing);
  CHECK(error_of([&] { ds.manual_manifest("nope"); }) == Errc::dataset_asset_missing);
}

TEST_CASE("pipeline stages leave outputs pending without auto-approval") {
  TempDir dir;
  Dataset ds(dir.path() / "d");
  fs::create_directories(dir.path() / "m");
  fs::copy(manualkit::testing::fixture_model_dir("microwave_01"), dir.path() / "m" / "microwave_01");
  ingest_models(ds, dir.path() / "m");
  BackendDispatcher backend(std::make_shared<SyntheticBackend>());
  const auto insts = annotate_dataset(ds, backend, 2, {3, false});
  REQUIRE(insts == std::vector<std::string>{"microwave_01_inst1", "microwave_01_inst2"});
  CHECK_FALSE(ds.instance(insts[0]).approved());
  // Pending instances get no tasks.
  CHECK(generate_dataset_tasks(ds, backend, 2, {3, false}).empty());
  CHECK(ds.index().at("instances").at(insts[0]).at("review_status") == "pending");
}

TEST_CASE("the mock dataset is complete and its index is regenerable from disk") {
  Dataset ds(shared_root() / "dataset");
  CHECK(ds.model_ids() == std::vector<std::string>{"microwave_01", "oven_01"});
  CHECK(ds.instance_ids() == std::vector<std::string>{"microwave_01_inst1", "oven_01_inst1"});
  CHECK(ds.manual_ids().size() == 2);
  for (const auto& id : ds.instance_ids()) {
    CHECK(ds.tasks_for(id).size() == 4);
    CHECK(ds.has_figures(id));
    CHECK(ds.manuals_for(id).size() == 1);
  }
  CHECK(ds.index() == ds.rebuild_index());
  CHECK(ds.missing_assets().empty());
}

TEST_CASE("deleting a referenced asset is reported") {
  TempDir dir;
  fs::copy(shared_root() / "dataset", dir.path() / "d", fs::copy_options::recursive);
  Dataset ds(dir.path() / "d");
  const std::string manual = ds.manual_ids().at(0);
  fs::remove(ds.manual_dir(manual) / "manual.pdf");
  const auto missing = ds.missing_assets();
  REQUIRE(missing.size() == 1);
  CHECK(missing[0] == "manuals/" + manual + "/manual.pdf");
}

TEST_CASE("rewriting an entity updates the index entry in place") {
  TempDir dir;
  fs::copy(shared_root() / "dataset", dir.path() / "d", fs::copy_options::recursive);
  Dataset ds(dir.path() / "d");
  auto inst = ds.instance("oven_01_inst1");
  inst.review_status = ReviewStatus::revised;
  ds.put_instance(inst);
  CHECK(ds.index().at("instances").at("oven_01_inst1").at("review_status") == "revised");
  CHECK(ds.index() == ds.rebuild_index());
}

TEST_CASE("re-running stages does not duplicate outputs") {
  TempDir dir;
  fs::copy(shared_root() / "dataset", dir.path() / "d", fs::copy_options::recursive);
  Dataset ds(dir.path() / "d");
  BackendDispatcher backend(std::make_shared<SyntheticBackend>());
  CHECK(generate_dataset_tasks(ds, backend, 4, {7, true}).empty());
  CompileConfig compile;
  compile.compiler.program = manualkit::testing::texlite_binary().string();
  CHECK(build_dataset_manuals(ds, backend, 1, compile, {7, true}).empty());
  CHECK(backend.total_calls() == 0);
}
