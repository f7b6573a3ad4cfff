#include "test_support.hpp"

#include "manualkit/core/loader.hpp"
#include "manualkit/service/pipeline.hpp"

#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

namespace manualkit::testing {

std::filesystem::path fixtures_dir() { return MANUALKIT_FIXTURES_DIR; }

std::filesystem::path fixture_model_dir(const std::string& model_id) { return fixtures_dir() / "models" / model_id; }

ApplianceModel load_fixture_model(const std::string& model_id) {
  return load_appliance_model(read_model_sources(fixture_model_dir(model_id)));
}

std::filesystem::path texlite_binary() { return MANUALKIT_TEXLITE_BIN; }
std::filesystem::path cli_binary() { return MANUALKIT_CLI_BIN; }

TempDir::TempDir(const std::string& prefix) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          (prefix + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + std::to_string(rd()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void build_fixture_dataset(const std::filesystem::path& root, const std::vector<std::string>& model_ids,
                           int instances_per_model, int manuals_per_instance, int tasks_per_instance) {
  const std::filesystem::path models = root / "_sources";
  for (const auto& id : model_ids) {
    std::filesystem::create_directories(models / id);
    std::filesystem::copy(fixture_model_dir(id), models / id, std::filesystem::copy_options::recursive | std::filesystem::copy_options::overwrite_existing);
  }
  Dataset dataset(root / "dataset");
  MockDatasetSpec spec;
  spec.models_dir = models;
  spec.instances_per_model = instances_per_model;
  spec.manuals_per_instance = manuals_per_instance;
  spec.tasks_per_instance = tasks_per_instance;
  spec.compile.compiler = {texlite_binary().string(),
                           {"-interaction=nonstopmode", "-halt-on-error", "-output-directory={outdir}", "{tex}"},
                           60};
  build_mock_dataset(dataset, spec);
}

}  // namespace manualkit::testing
