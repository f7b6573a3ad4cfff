#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "manualkit/core/error.hpp"
#include "manualkit/evalharness/evalharness.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <random>

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

const fs::path& shared_root() {
  static TempDir dir("manualkit-eval");
  static const bool built = [] {
    manualkit::testing::build_fixture_dataset(dir.path(), {"microwave_01", "oven_01", "washer_01"});
    return true;
  }();
  (void)built;
  return dir.path();
}

const Dataset& shared_dataset() {
  static Dataset ds(shared_root() / "dataset");
  return ds;
}

double brute_completion(const std::vector<bool>& s) {
  if (s.empty()) return 0.0;
  std::size_t n = 0;
  for (bool b : s) {
    if (!b) break;
    ++n;
  }
  return static_cast<double>(n) / static_cast<double>(s.size());
}

const PartAlignment kGt = {{"link_0", "Glass Door"}, {"link_1", "Start Button"}, {"link_2", "Stop Button"}};

std::vector<TaskStep> gt_steps() {
  return {{1, "Glass Door", StateLabel::open()},
          {2, "Start Button", StateLabel::push(2)},
          {3, "Glass Door", StateLabel::close()},
          {4, "Stop Button", StateLabel::push(1)}};
}

Plan plan_of(const std::vector<TaskStep>& steps) {
  Plan p;
  for (const auto& s : steps) p.steps.push_back({s.function_name, format_state(s.target_state)});
  return p;
}

EpisodeResult result(Track t, std::string cat, double completion, bool success, bool with_manual = true) {
  EpisodeResult r;
  r.track = t;
  r.category = std::move(cat);
  r.completion_rate = completion;
  r.task_success = success;
  r.with_manual = with_manual;
  if (t == Track::aligned_planning) {
    if (with_manual) r.alignment_success = success;
    r.planning_success = success;
  }
  return r;
}

}  // namespace

TEST_CASE("completion rate matches a brute-force scan") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    std::vector<bool> s(std::uniform_int_distribution<int>(0, 20)(rng));
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = std::bernoulli_distribution(0.8)(rng);
    REQUIRE(completion_rate(s) == brute_completion(s));
  }
  CHECK(completion_rate({true, true, false, true}) == 0.5);
  CHECK(completion_rate({true, true, true, true}) == 1.0);
  CHECK(completion_rate({false, true, true, true}) == 0.0);
}

TEST_CASE("alignment is all or nothing over the ground truth") {
  CHECK(evaluate_alignment(kGt, kGt));
  PartAlignment swapped = kGt;
  std::swap(swapped["link_1"], swapped["link_2"]);
  CHECK_FALSE(evaluate_alignment(swapped, kGt));
  PartAlignment missing = kGt;
  missing.erase("link_2");
  CHECK_FALSE(evaluate_alignment(missing, kGt));
  PartAlignment spaced = {{"link_0", "  glass   DOOR"}, {"link_1", "start button"}, {"link_2", "STOP BUTTON"}};
  CHECK(evaluate_alignment(spaced, kGt));
}

TEST_CASE("plan scoring examples") {
  const auto gt = gt_steps();
  CHECK(evaluate_plan(plan_of(gt), gt, kGt, kGt));
  Plan wrong_action = plan_of(gt);
  wrong_action.steps[1].action_phrase = "Push 1 time";
  CHECK_FALSE(evaluate_plan(wrong_action, gt, kGt, kGt));
  Plan transposed = plan_of(gt);
  std::swap(transposed.steps[1], transposed.steps[2]);
  CHECK_FALSE(evaluate_plan(transposed, gt, kGt, kGt));
  Plan shorter = plan_of(gt);
  shorter.steps.pop_back();
  CHECK_FALSE(evaluate_plan(shorter, gt, kGt, kGt));
  CHECK_FALSE(evaluate_plan(Plan{}, {}, kGt, kGt));

  // Names are judged through the alignment, not as strings.
  PartAlignment renamed = {{"link_0", "Door"}, {"link_1", "Start Button"}, {"link_2", "Stop Button"}};
  Plan via_alias = plan_of(gt);
  via_alias.steps[0].function_name = via_alias.steps[2].function_name = "Door";
  CHECK(evaluate_plan(via_alias, gt, kGt, renamed));
  CHECK_FALSE(evaluate_plan(plan_of(gt), gt, kGt, renamed));
}

TEST_CASE("corrupting any single step of a passing plan fails it") {
  const auto gt = gt_steps();
  const Plan good = plan_of(gt);
  REQUIRE(evaluate_plan(good, gt, kGt, kGt));
  const std::vector<std::string> names = {"Glass Door", "Start Button", "Stop Button"};
  const std::vector<std::string> phrases = {"Open", "Close", "Push 1 time", "Push 2 times", "Push 3 times",
                                            "Rotate 60 degrees"};
  int corruptions = 0;
  for (std::size_t i = 0; i < good.steps.size(); ++i) {
    for (const auto& n : names) {
      if (n == good.steps[i].function_name) continue;
      Plan bad = good;
      bad.steps[i].function_name = n;
      CHECK_FALSE(evaluate_plan(bad, gt, kGt, kGt));
      ++corruptions;
    }
    for (const auto& ph : phrases) {
      if (ph == good.steps[i].action_phrase) continue;
      Plan bad = good;
      bad.steps[i].action_phrase = ph;
      CHECK_FALSE(evaluate_plan(bad, gt, kGt, kGt));
      ++corruptions;
    }
  }
  CHECK(corruptions == 4 * 2 + 4 * 5);
}

TEST_CASE("aggregation means and rendering") {
  const std::vector<EpisodeResult> rs = {result(Track::cad_manipulation, "oven", 1.0, true),
                                         result(Track::cad_manipulation, "oven", 0.5, false),
                                         result(Track::cad_manipulation, "microwave", 0.0, false)};
  const MetricsReport rep = aggregate(rs);
  REQUIRE(rep.rows.size() == 1);
  CHECK(format_percent(*rep.rows[0].total.first) == "50.00");
  CHECK(format_percent(*rep.rows[0].total.second) == "33.33");
  CHECK(rep.rows[0].total.episodes == 3);
  CHECK(format_percent(*rep.rows[0].by_category.at("oven").first) == "75.00");
  CHECK(rep.rows[0].by_category.at("microwave").episodes == 1);
  CHECK(rep.to_text().find("50.00 / 33.33") != std::string::npos);
  CHECK(rep.to_csv().find("2,true,total,3,50.00,33.33") != std::string::npos);
}

TEST_CASE("a single episode reports its own values") {
  const MetricsReport rep = aggregate({result(Track::manual_manipulation, "toaster", 0.25, false)});
  REQUIRE(rep.rows.size() == 1);
  CHECK(*rep.rows[0].total.first == 0.25);
  CHECK(*rep.rows[0].total.second == 0.0);
  CHECK(*rep.rows[0].by_category.at("toaster").first == 0.25);
}

TEST_CASE("totals are episode weighted, not category means") {
  std::vector<EpisodeResult> rs(3, result(Track::cad_manipulation, "oven", 1.0, true));
  rs.push_back(result(Track::cad_manipulation, "microwave", 0.0, false));
  const MetricsReport rep = aggregate(rs);
  CHECK(*rep.rows[0].total.first == 0.75);
}

TEST_CASE("track one without the manual reports no alignment score") {
  const MetricsReport rep = aggregate({result(Track::aligned_planning, "oven", 1.0, true),
                                       result(Track::aligned_planning, "oven", 0.0, false, false)});
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].with_manual);
  CHECK_FALSE(rep.rows[1].with_manual);
  CHECK_FALSE(rep.rows[1].total.first.has_value());
  CHECK(rep.to_text().find("-- / 0.00") != std::string::npos);
}

TEST_CASE("aggregation is invariant under episode order") {
  std::mt19937_64 rng(5);
  std::vector<EpisodeResult> rs;
  const std::vector<std::string> cats = {"oven", "microwave", "toaster"};
  for (int i = 0; i < 200; ++i) {
    const Track t = track_from_number(1 + static_cast<int>(rng() % 3));
    const double c = std::uniform_real_distribution<double>(0, 1)(rng);
    rs.push_back(result(t, cats[rng() % 3], c, c > 0.7, rng() % 2 == 0));
  }
  const json reference = aggregate(rs).to_json();
  for (int k = 0; k < 20; ++k) {
    std::shuffle(rs.begin(), rs.end(), rng);
    REQUIRE(aggregate(rs).to_json() == reference);
  }
}

TEST_CASE("aggregating nothing is an error") {
  CHECK(error_of([] { aggregate({}); }) == Errc::empty_result_set);
}

TEST_CASE("episode results round-trip through JSON lines") {
  TempDir dir;
  EpisodeResult a = result(Track::aligned_planning, "oven", 1.0, true);
  a.episode_id = "e1";
  a.step_successes = {true, true};
  a.backend_call_counts = {{"plan_from_manual", 1}};
  EpisodeResult b = result(Track::manual_manipulation, "microwave", 0.5, false, false);
  b.episode_id = "e2";
  b.step_successes = {true, false};
  b.failure_step = 2;
  b.error = "boom";
  write_episodes_jsonl(dir.path() / "ep.jsonl", {a, b});
  const auto back = read_episodes_jsonl(dir.path() / "ep.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(to_json(back[0]) == to_json(a));
  CHECK(to_json(back[1]) == to_json(b));
}

TEST_CASE("dataset statistics from the published counts") {
  json idx = {{"models", json::object()}, {"instances", json::object()}, {"tasks", json::object()},
              {"manuals", json::object()}};
  // 369 appliances carrying 2211 parts: 366 with 6 parts, 3 with 5.
  for (int i = 0; i < 369; ++i) {
    idx["instances"]["i" + std::to_string(i)] = {{"model_id", "m"}, {"category", i % 2 ? "oven" : "microwave"},
                                                 {"parts", i < 366 ? 6 : 5}};
  }
  for (int i = 0; i < 1464; ++i) idx["tasks"]["t" + std::to_string(i)] = {{"steps", 1 + i % 5}};
  for (int i = 0; i < 1107; ++i) idx["manuals"]["m" + std::to_string(i)] = {{"instance_id", "i0"}};
  const DatasetStats s = dataset_stats(idx);
  CHECK(s.manuals == 1107);
  CHECK(s.instances == 369);
  CHECK(s.parts == 2211);
  CHECK(s.tasks == 1464);
  CHECK(std::abs(s.parts_per_instance - 5.99) < 0.01);
  CHECK(s.part_count_histogram.at(6) == 366);
  CHECK(s.categories == 2);
  CHECK(s.category_proportions.at("microwave") + s.category_proportions.at("oven") == doctest::Approx(1.0));
}

TEST_CASE("empty dataset statistics are all zero") {
  const DatasetStats s = dataset_stats(json::object());
  CHECK(s.manuals == 0);
  CHECK(s.instances == 0);
  CHECK(s.parts == 0);
  CHECK(s.tasks == 0);
  CHECK(s.parts_per_instance == 0.0);
  CHECK(s.part_types.empty());
}

TEST_CASE("fixture dataset statistics count by construction") {
  TempDir dir;
  manualkit::testing::build_fixture_dataset(dir.path(), {"microwave_01", "oven_01"}, 2, 3, 2);
  Dataset ds(dir.path() / "dataset");
  const DatasetStats s = dataset_stats(ds.index());
  CHECK(s.models == 2);
  CHECK(s.instances == 4);
  CHECK(s.manuals == 12);
  CHECK(s.tasks == 8);
  CHECK(s.parts == 2 * 3 + 2 * 5);
  CHECK(s.part_types.at("button") == 2 * 2 + 2 * 2);
}

TEST_CASE("the oracle names parts generically without the manual") {
  const Dataset& ds = shared_dataset();
  const auto inst = ds.instance("oven_01_inst1");
  const auto model = ds.model(inst.model_id);
  OracleBackend oracle(model, inst, ds.tasks_for(inst.instance_id));
  CHECK(oracle.generic_name(model.parts[0].part_id, false) == "Door");
  CHECK(oracle.generic_name(model.parts[2].part_id, false) == "Knob 2");
  CHECK(oracle.generic_name(model.parts[2].part_id, true) == "Knob 1");
}

TEST_CASE("ground-truth mocks score every track at 100 percent") {
  const Dataset& ds = shared_dataset();
  std::vector<EpisodeResult> all;
  for (Track t : {Track::aligned_planning, Track::cad_manipulation, Track::manual_manipulation}) {
    const auto configs = plan_episodes(ds, t, {}, false, 3);
    REQUIRE(configs.size() == 12);
    const auto rs = run_episodes(ds, configs);
    for (const auto& r : rs) {
      INFO(r.episode_id << " " << r.error);
      CHECK(r.error.empty());
      CHECK(r.task_success);
      CHECK(r.completion_rate == 1.0);
      CHECK_FALSE(r.failure_step.has_value());
      if (t == Track::aligned_planning) {
        CHECK(r.alignment_success == std::optional<bool>(true));
        CHECK(r.planning_success == std::optional<bool>(true));
      }
    }
    all.insert(all.end(), rs.begin(), rs.end());
  }
  const MetricsReport rep = aggregate(all);
  REQUIRE(rep.rows.size() == 3);
  for (const auto& row : rep.rows) {
    CHECK(format_percent(*row.total.first) == "100.00");
    CHECK(format_percent(*row.total.second) == "100.00");
    CHECK(row.by_category.size() == 3);
  }
}

TEST_CASE("withholding the manual never scores higher") {
  const Dataset& ds = shared_dataset();
  for (Track t : {Track::aligned_planning, Track::cad_manipulation, Track::manual_manipulation}) {
    const auto rs = run_episodes(ds, plan_episodes(ds, t, {}, true, 3));
    REQUIRE(rs.size() == 24);
    double with = 0, without = 0;
    for (std::size_t i = 0; i < rs.size(); i += 2) {
      REQUIRE(rs[i].with_manual);
      REQUIRE_FALSE(rs[i + 1].with_manual);
      CHECK(rs[i + 1].completion_rate <= rs[i].completion_rate);
      CHECK(rs[i + 1].task_success <= rs[i].task_success);
      with += rs[i].completion_rate;
      without += rs[i + 1].completion_rate;
    }
    CHECK(without < with);
    const MetricsReport rep = aggregate(rs);
    REQUIRE(rep.rows.size() == 2);
    for (const auto& [cat, cell] : rep.rows[1].by_category) {
      const MetricCell& w = rep.rows[0].by_category.at(cat);
      if (w.first && cell.first) CHECK(*cell.first <= *w.first);
      CHECK(*cell.second <= *w.second);
    }
  }
}

TEST_CASE("track three with certain executor failure stops at step one") {
  const Dataset& ds = shared_dataset();
  EpisodeConfig c = plan_episodes(ds, Track::manual_manipulation, {}, false, 3).at(0);
  c.noise.executor_failure_rate = 1.0;
  const EpisodeResult r = run_episode(ds, c);
  CHECK(r.completion_rate == 0.0);
  CHECK_FALSE(r.task_success);
  CHECK(r.failure_step == std::optional<int>(1));
  CHECK(std::none_of(r.step_successes.begin(), r.step_successes.end(), [](bool b) { return b; }));
}

TEST_CASE("noisy execution is seeded") {
  const Dataset& ds = shared_dataset();
  ExecutorNoise noise;
  noise.pose_noise = true;
  noise.executor_failure_rate = 0.3;
  noise.seed = 9;
  const auto configs = plan_episodes(ds, Track::cad_manipulation, noise, false, 3);
  const auto a = run_episodes(ds, configs);
  const auto b = run_episodes(ds, configs);
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(to_json(a[i]) == to_json(b[i]));
    sum += a[i].completion_rate;
  }
  CHECK(sum < static_cast<double>(a.size()));
}

TEST_CASE("backend failures are recorded, missing assets are raised") {
  const Dataset& ds = shared_dataset();
  EpisodeConfig c = plan_episodes(ds, Track::aligned_planning, {}, false, 3).at(0);
  BackendBundle bundle;
  bundle.mllm = std::make_shared<FunctionBackend>([](const BackendRequest&) { return std::string("no idea"); });
  const EpisodeResult r = run_episode(ds, c, bundle);
  INFO(r.error);
  CHECK(r.error.find("RegenerationExhausted") != std::string::npos);
  CHECK(r.alignment_success == std::optional<bool>(false));
  CHECK(r.planning_success == std::optional<bool>(false));
  CHECK_FALSE(r.task_success);
  CHECK(r.backend_call_counts.at("alignment_from_images") == 2);

  EpisodeConfig missing = c;
  missing.manual_id = "nope";
  CHECK(error_of([&] { run_episode(ds, missing); }) == Errc::dataset_asset_missing);
  missing = c;
  missing.task_id = "nope";
  CHECK(error_of([&] { run_episode(ds, missing); }) == Errc::dataset_asset_missing);
}

TEST_CASE("episode plans assign manuals round robin") {
  TempDir dir;
  manualkit::testing::build_fixture_dataset(dir.path(), {"microwave_01"}, 1, 2, 4);
  Dataset ds(dir.path() / "dataset");
  const auto configs = plan_episodes(ds, Track::manual_manipulation, {}, false, 1);
  REQUIRE(configs.size() == 4);
  CHECK(configs[0].manual_id == "microwave_01_inst1_manual0");
  CHECK(configs[1].manual_id == "microwave_01_inst1_manual1");
  CHECK(configs[2].manual_id == "microwave_01_inst1_manual0");
  CHECK(track_from_number(2) == Track::cad_manipulation);
  CHECK(error_of([] { track_from_number(4); }) == Errc::validation_error);
}
