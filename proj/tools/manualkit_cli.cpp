#include "manualkit/backend/synthetic.hpp"
#include "manualkit/core/error.hpp"
#include "manualkit/evalharness/evalharness.hpp"
#include "manualkit/figures/renderer.hpp"
#include "manualkit/image/io.hpp"
#include "manualkit/service/pipeline.hpp"
#include "manualkit/service/review.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

namespace fs = std::filesystem;
using namespace manualkit;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitBackend = 3;

struct Common {
  std::uint64_t seed = 0;
  std::string dataset = "dataset";
  std::string backend = "mock";
  std::string llm_model = LlmConfig{}.model;
  std::string llm_base_url = LlmConfig{}.base_url;
  bool auto_approve = false;
};

void add_common(CLI::App& app, Common& c) {
  app.add_option("--seed", c.seed, "Root seed for every random choice")->capture_default_str();
  app.add_option("--dataset", c.dataset, "Dataset root directory")->capture_default_str();
}

void add_backend(CLI::App& app, Common& c) {
  app.add_option("--backend", c.backend, "Model backend")->check(CLI::IsMember({"mock", "llm"}))->capture_default_str();
  app.add_option("--llm-model", c.llm_model, "Model name for --backend llm")->capture_default_str();
  app.add_option("--llm-base-url", c.llm_base_url, "Endpoint for --backend llm")->capture_default_str();
}

void add_approve(CLI::App& app, Common& c) {
  app.add_flag("--auto-approve", c.auto_approve, "Mark outputs reviewed instead of queueing them for review");
}

std::shared_ptr<Backend> generation_backend(const Common& c) {
  if (c.backend == "llm") {
    LlmConfig cfg;
    cfg.model = c.llm_model;
    cfg.base_url = c.llm_base_url;
    return std::make_shared<LlmBackend>(cfg);
  }
  return std::make_shared<SyntheticBackend>();
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::regeneration_exhausted:
    case Errc::backend_unavailable: return kExitBackend;
    default: return kExitValidation;
  }
}

ExecutorNoise read_noise_profile(const std::string& path) {
  ExecutorNoise n;
  if (path.empty()) return n;
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::validation_error, "noise profile " + path + ": " + e.what());
  }
  n.pose_noise = j.value("pose_noise", false);
  n.executor_failure_rate = j.value("executor_failure_rate", 0.0);
  n.seed = j.value("seed", std::uint64_t{0});
  n.angle_sigma_deg = j.value("angle_sigma_deg", n.angle_sigma_deg);
  n.translate_sigma_fraction = j.value("translate_sigma_fraction", n.translate_sigma_fraction);
  n.base_sigma_m = j.value("base_sigma_m", n.base_sigma_m);
  if (n.executor_failure_rate < 0.0 || n.executor_failure_rate > 1.0) {
    throw Error(Errc::validation_error, "executor_failure_rate must lie in [0, 1]");
  }
  return n;
}

void print_report(const MetricsReport& report, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  write_text_file(dir / (stem + ".txt"), report.to_text());
  write_text_file(dir / (stem + ".csv"), report.to_csv());
  std::cout << report.to_text();
}

ReviewServer* g_server = nullptr;
extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Appliance manual generation and manual-guided manipulation benchmark"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file; flags override it");
  app.allow_config_extras(false);
  Common c;
  add_common(app, c);
  add_backend(app, c);

  auto* ingest = app.add_subcommand("ingest", "Load model directories into the dataset");
  std::string models_dir;
  ingest->add_option("models_dir", models_dir, "Directory of model folders")->required();

  auto* annotate = app.add_subcommand("annotate", "Create annotated appliance instances");
  int per_model = 1;
  annotate->add_option("--instances-per-model", per_model)->check(CLI::PositiveNumber)->capture_default_str();
  add_approve(*annotate, c);

  auto* tasks = app.add_subcommand("tasks", "Generate manipulation tasks for reviewed instances");
  int tasks_per_instance = 4;
  tasks->add_option("--per-instance", tasks_per_instance)->check(CLI::PositiveNumber)->capture_default_str();
  add_approve(*tasks, c);

  auto* figures = app.add_subcommand("figures", "Render figure sets for reviewed instances");
  FigureConfig figure_cfg;
  figures->add_option("--view-width", figure_cfg.view_size.width)->capture_default_str();
  figures->add_option("--view-height", figure_cfg.view_size.height)->capture_default_str();
  add_approve(*figures, c);

  auto* manuals = app.add_subcommand("manuals", "Build manuals for fully reviewed instances");
  int manuals_per_instance = 3;
  std::string latex;
  int max_regen = 3;
  manuals->add_option("--per-instance", manuals_per_instance)->check(CLI::PositiveNumber)->capture_default_str();
  manuals->add_option("--latex", latex, "LaTeX compiler program (default: pdflatex, else the bundled texlite)");
  manuals->add_option("--max-regen", max_regen)->check(CLI::NonNegativeNumber)->capture_default_str();

  auto* review = app.add_subcommand("review-serve", "Serve the review API");
  int port = 8080;
  std::string host = "127.0.0.1";
  review->add_option("--port", port)->check(CLI::Range(0, 65535))->capture_default_str();
  review->add_option("--host", host)->capture_default_str();

  auto* eval = app.add_subcommand("eval", "Run a benchmark track");
  int track = 1;
  std::string noise_profile;
  bool ablation = false;
  eval->add_option("--track", track)->check(CLI::IsMember({1, 2, 3}))->required();
  eval->add_option("--noise-profile", noise_profile, "JSON {pose_noise, executor_failure_rate, seed}");
  eval->add_flag("--ablation", ablation, "Also run every episode without the manual");

  auto* stats = app.add_subcommand("stats", "Dataset statistics");
  bool stats_json = false;
  stats->add_flag("--json", stats_json);

  auto* report = app.add_subcommand("report", "Aggregate all episode logs into one report");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*ingest) {
      Dataset ds(c.dataset);
      const auto ids = ingest_models(ds, models_dir);
      std::cout << "ingested " << ids.size() << " models\n";
      return 0;
    }
    if (!fs::exists(fs::path(c.dataset) / "index.json")) {
      throw Error(Errc::validation_error, "no models: " + c.dataset + " is not a dataset (run ingest first)");
    }
    Dataset ds(c.dataset);
    const PipelineOptions opts{c.seed, c.auto_approve};

    if (*annotate) {
      BackendDispatcher backend(generation_backend(c));
      const auto ids = annotate_dataset(ds, backend, per_model, opts);
      std::cout << "annotated " << ids.size() << " instances" << (c.auto_approve ? "" : " (pending review)") << "\n";
    } else if (*tasks) {
      BackendDispatcher backend(generation_backend(c));
      const auto ids = generate_dataset_tasks(ds, backend, tasks_per_instance, opts);
      if (ids.empty() && ds.instance_ids().empty()) throw Error(Errc::validation_error, "no instances; run annotate first");
      std::cout << "generated " << ids.size() << " tasks\n";
    } else if (*figures) {
      SchematicRenderer renderer;
      FlatBackgroundBackend background;
      const auto ids = build_dataset_figures(ds, renderer, background, figure_cfg, opts);
      std::cout << "built figures for " << ids.size() << " instances\n";
    } else if (*manuals) {
      BackendDispatcher backend(generation_backend(c));
      CompileConfig compile;
      compile.max_regen = max_regen;
      if (!latex.empty()) compile.compiler.program = latex;
      const auto ids = build_dataset_manuals(ds, backend, manuals_per_instance, compile, opts);
      std::cout << "built " << ids.size() << " manuals\n";
    } else if (*review) {
      ReviewQueue queue(ds, generation_backend(c));
      const auto added = queue.populate();
      ReviewServer server(queue);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "review API on http://" << host << ":" << port << " (" << added.size() << " new items)" << std::endl;
      server.run(host, port);
      g_server = nullptr;
    } else if (*eval) {
      const ExecutorNoise noise = read_noise_profile(noise_profile);
      const auto configs = plan_episodes(ds, track_from_number(track), noise, ablation, c.seed);
      if (configs.empty()) throw Error(Errc::validation_error, "no built manuals to evaluate on; run manuals first");
      BackendBundle bundle;
      if (c.backend == "llm") bundle.mllm = generation_backend(c);
      const auto results = run_episodes(ds, configs, bundle);
      const std::string stem = "track" + std::to_string(track);
      write_episodes_jsonl(ds.episodes_dir() / (stem + ".jsonl"), results);
      print_report(aggregate(results), ds.reports_dir(), stem);
    } else if (*stats) {
      const DatasetStats s = dataset_stats(ds.index());
      if (stats_json) {
        std::cout << s.to_json().dump(2) << "\n";
      } else {
        std::cout << "models " << s.models << "\ninstances " << s.instances << "\nmanuals " << s.manuals << "\nparts "
                  << s.parts << "\ntasks " << s.tasks << "\ncategories " << s.categories << "\nparts/instance "
                  << format_percent(s.parts_per_instance / 100.0) << "\n";
      }
    } else if (*report) {
      std::vector<EpisodeResult> all;
      for (const auto& e : fs::directory_iterator(ds.episodes_dir())) {
        if (e.path().extension() != ".jsonl") continue;
        const auto rs = read_episodes_jsonl(e.path());
        all.insert(all.end(), rs.begin(), rs.end());
      }
      print_report(aggregate(all), ds.reports_dir(), "report");
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
