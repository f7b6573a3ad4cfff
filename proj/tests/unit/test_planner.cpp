#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "manualkit/core/error.hpp"
#include "manualkit/figures/camera.hpp"
#include "manualkit/image/io.hpp"
#include "manualkit/manualgen/latex.hpp"
#include "manualkit/planner/planner.hpp"
#include "test_support.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <random>
#include <set>

using namespace manualkit;
using manualkit::testing::load_fixture_model;
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

std::shared_ptr<Backend> scripted(std::vector<std::string> r) {
  return std::shared_ptr<Backend>(ScriptedBackend::from_responses(std::move(r)));
}

ResolvedManual manual_with(const std::string& text) { return {{{1, text, {}}}}; }

const char* kManualText = "Parts Overview\n1. Front Door: Open; Close\n2. Start Button: Push 1 time\n3. Timer Knob\n";

const std::string kHeatPlan =
    "{'Front Door': 'Open', 'Front Door': 'Close', 'Timer Knob': 'Rotate 120 degrees', 'Start Button': 'Push 1 time'}";

RenderOutput front_render(const ApplianceModel& model, cv::Size size = {400, 300}) {
  SchematicRenderer r;
  return r.render(model, ApplianceState::at_rest(model), candidate_poses(model).front(), size);
}

// Answers alignment requests from the ground-truth part ids in the context.
std::shared_ptr<Backend> naming_oracle(std::map<std::string, std::string> names) {
  return std::make_shared<FunctionBackend>([names](const BackendRequest& req) {
    std::string out;
    for (const auto& m : req.context.at("masks")) {
      out += "mask " + std::to_string(m.at("mask_id").get<int>()) + " -> " +
             names.at(m.at("gt_part_id").get<std::string>()) + "\n";
    }
    return out;
  });
}

std::map<std::string, std::string> microwave_names() {
  return {{"link_0", "Front Door"}, {"link_1", "Start Button"}, {"link_2", "Stop Button"}};
}

}  // namespace

TEST_CASE("the literal dictionary example parses") {
  std::string why;
  const auto plan = parse_plan("{'Brew Strength Lever': 'Rotate 60 degrees'}", why);
  REQUIRE(plan);
  REQUIRE(plan->steps.size() == 1);
  CHECK(plan->steps[0] == PlanStep{"Brew Strength Lever", "Rotate 60 degrees"});
  CHECK(format_plan(*plan) == "{'Brew Strength Lever': 'Rotate 60 degrees'}");
}

TEST_CASE("plan grammar variants") {
  std::string why;
  const auto repeated = parse_plan("Here is the plan:\n" + kHeatPlan + "\nGood luck!", why);
  REQUIRE(repeated);
  CHECK(repeated->steps.size() == 4);
  CHECK(repeated->steps[1] == PlanStep{"Front Door", "Close"});

  const auto list = parse_plan(R"([{"Lid": "Open"}, {"Lid": "Close"}])", why);
  REQUIRE(list);
  CHECK(list->steps == std::vector<PlanStep>{{"Lid", "Open"}, {"Lid", "Close"}});

  const auto apostrophe = parse_plan(R"({"Child's Lock": 'Push 1 time'})", why);
  REQUIRE(apostrophe);
  CHECK(apostrophe->steps[0].function_name == "Child's Lock");
  CHECK(format_plan(*apostrophe) == R"({"Child's Lock": 'Push 1 time'})");

  CHECK_FALSE(parse_plan("First open the door, then press start.", why));
  CHECK_FALSE(parse_plan("{}", why));
  CHECK(why == "empty plan");
  CHECK_FALSE(parse_plan("{'Door': }", why));
  CHECK_FALSE(parse_plan("{'Door': 'Open'", why));
}

TEST_CASE("format and parse round-trip random plans") {
  std::mt19937_64 rng(4);
  const std::string alphabet = "abcXYZ 019'\"\\-_&";
  auto random_text = [&] {
    std::string s(1, 'A' + static_cast<char>(rng() % 26));
    const int n = static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) s += alphabet[rng() % alphabet.size()];
    s += 'z';
    return s;
  };
  for (int trial = 0; trial < 1000; ++trial) {
    Plan p;
    const int n = 1 + static_cast<int>(rng() % 18);
    for (int i = 0; i < n; ++i) p.steps.push_back({random_text(), random_text()});
    std::string why;
    const auto back = parse_plan(format_plan(p), why);
    REQUIRE_MESSAGE(back, format_plan(p));
    CHECK(*back == p);
  }
}

TEST_CASE("plan_manipulation accepts the ground-truth plan") {
  BackendDispatcher d(scripted({kHeatPlan}));
  const auto r = plan_manipulation("Heat food for 2 minutes", manual_with(kManualText), d, 1);
  CHECK(r.plan.steps.size() == 4);
  CHECK(r.regen_count == 0);
  const auto& req = dynamic_cast<ScriptedBackend&>(d.backend()).requests().at(0);
  CHECK(req.capability == Capability::plan_from_manual);
  CHECK(req.text.find("Heat food for 2 minutes") != std::string::npos);
  CHECK(req.text.find("Timer Knob") != std::string::npos);
}

TEST_CASE("plans naming parts outside the manual are regenerated") {
  BackendDispatcher d(scripted({"{'Steam Nozzle': 'Open'}", kHeatPlan}));
  const auto r = plan_manipulation("Heat food", manual_with(kManualText), d, 1);
  CHECK(r.regen_count == 1);
  // Manual mention is case- and space-insensitive.
  BackendDispatcher d2(scripted({"{'front   DOOR': 'Open'}"}));
  CHECK(plan_manipulation("Open", manual_with(kManualText), d2, 1).plan.steps.at(0).function_name == "front   DOOR");
}

TEST_CASE("unparseable or unresolvable plans exhaust the retry budget") {
  BackendDispatcher prose(scripted({"Open the door.", "Open the door.", "Open the door.", "Open the door."}));
  try {
    plan_manipulation("Heat food", manual_with(kManualText), prose, 1, {3});
    FAIL("expected exhaustion");
  } catch (const RegenerationExhausted& e) {
    CHECK(e.code() == Errc::regeneration_exhausted);
  }
  CHECK(prose.total_calls() == 4);

  BackendDispatcher bad_state(scripted({"{'Front Door': 'Wiggle'}", "{'Front Door': 'Open'}"}));
  CHECK(plan_manipulation("x", manual_with(kManualText), bad_state, 1).regen_count == 1);
}

TEST_CASE("without a manual only grammar and states are checked") {
  BackendDispatcher d(scripted({"{'Door': 'Open'}"}));
  const auto r = plan_manipulation("Open it", ResolvedManual{}, d, 1);
  CHECK(r.plan.steps.at(0).function_name == "Door");
  CHECK(dynamic_cast<ScriptedBackend&>(d.backend()).requests().at(0).context.at("manual_available") == false);
}

TEST_CASE("resolve_manual reads pages, text and elements from the sidecar") {
  TempDir dir;
  cv::imwrite((dir.path() / "a.png").string(), cv::Mat(60, 80, CV_8UC3, cv::Scalar(10, 200, 30)));
  cv::imwrite((dir.path() / "b.png").string(), cv::Mat(60, 120, CV_8UC3, cv::Scalar(200, 10, 30)));
  const std::string src =
      "\\documentclass{article}\n\\usepackage{graphicx}\n\\begin{document}\n"
      "\\section{Parts}\nFront Door, Start Button and Timer Knob.\n\\newpage\n"
      "\\begin{figure}[h]\n\\centering\n\\includegraphics[width=0.3\\textwidth]{a.png}\n\\caption{Overview}\n"
      "\\end{figure}\n"
      "\\begin{figure}[h]\n\\centering\n\\includegraphics[width=0.3\\textwidth]{b.png}\n\\caption{Panel}\n"
      "\\end{figure}\n\\newpage\n\\begin{tabular}{|l|l|}\n\\hline\nTimer Knob & Rotate 60 degrees \\\\\n\\hline\n"
      "\\end{tabular}\n\\newpage\nLast page.\n\\end{document}\n";
  const LatexCompiler texlite{manualkit::testing::texlite_binary().string(), {"-output-directory={outdir}", "{tex}"}, 60};
  const auto outcome = compile_latex(texlite, src, dir.path());
  REQUIRE(outcome.ok);
  LayoutOcrBackend ocr;
  LayoutElementBackend elements;
  const auto m = resolve_manual(outcome.pdf, ocr, elements);
  REQUIRE(m.pages.size() == 4);
  CHECK_NOTHROW(m.validate());
  for (const char* n : {"Front Door", "Start Button", "Timer Knob"}) CHECK(m.mentions(n));
  CHECK(m.pages[0].elements.empty());
  REQUIRE(m.pages[1].elements.size() == 2);
  CHECK(m.pages[1].elements[0].kind == ManualElement::Kind::figure);
  CHECK(m.pages[1].elements[0].caption == "Overview");
  CHECK(m.pages[1].elements[1].caption == "Panel");
  CHECK(m.pages[1].elements[0].image_ref == "a.png");
  // 150 dpi raster: a 0.3 textwidth figure of an A4 page with 72pt margins.
  const double textwidth_px = (595.276 - 144.0) * 150.0 / 72.0;
  CHECK(m.pages[1].elements[0].bbox_px.width == doctest::Approx(0.3 * textwidth_px).epsilon(1e-3));
  REQUIRE(m.pages[2].elements.size() == 1);
  CHECK(m.pages[2].elements[0].kind == ManualElement::Kind::table);
  CHECK(resolved_manual_from_json(to_json(m)).full_text() == m.full_text());
}

TEST_CASE("resolve_manual rejects unreadable files") {
  TempDir dir;
  LayoutOcrBackend ocr;
  LayoutElementBackend elements;
  write_text_file(dir.path() / "empty.pdf", "");
  CHECK(error_of([&] { resolve_manual(dir.path() / "empty.pdf", ocr, elements); }) == Errc::unreadable_pdf);
  CHECK(error_of([&] { resolve_manual(dir.path() / "none.pdf", ocr, elements); }) == Errc::unreadable_pdf);
  ResolvedManual gap{{{1, "a", {}}, {3, "b", {}}}};
  CHECK(error_of([&] { gap.validate(); }) == Errc::validation_error);
}

TEST_CASE("set-of-mark tints and centroids") {
  const cv::Mat base(120, 160, CV_8UC3, cv::Scalar(100, 100, 100));
  std::vector<PartMask> masks;
  const std::vector<cv::Rect> rects = {{5, 5, 30, 20}, {60, 40, 40, 50}, {110, 90, 45, 25}};
  for (std::size_t i = 0; i < rects.size(); ++i) {
    cv::Mat m = cv::Mat::zeros(base.size(), CV_8U);
    m(rects[i]).setTo(255);
    masks.push_back({static_cast<int>(i) + 1, m, rects[i], {}});
  }
  const auto som = som_overlay(base, masks);
  REQUIRE(som.marks.size() == 3);
  std::set<std::tuple<int, int, int>> colors;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& r = rects[i];
    CHECK(som.marks[i].centroid.x == doctest::Approx(r.x + (r.width - 1) / 2.0));
    CHECK(som.marks[i].centroid.y == doctest::Approx(r.y + (r.height - 1) / 2.0));
    const cv::Vec3b c = som.marks[i].color;
    colors.insert({c[0], c[1], c[2]});
    // A corner pixel is away from the id text.
    const cv::Vec3b px = som.image.at<cv::Vec3b>(r.y, r.x);
    for (int ch = 0; ch < 3; ++ch) CHECK(std::abs(px[ch] - (0.55 * 100 + 0.45 * c[ch])) <= 1.0);
  }
  CHECK(colors.size() == 3);
  CHECK(som.image.at<cv::Vec3b>(0, 159) == cv::Vec3b(100, 100, 100));
  CHECK(som_palette().size() == 20);

  // Full-image mask: id at the center.
  const auto full = som_overlay(base, {{7, cv::Mat(base.size(), CV_8U, cv::Scalar(1)), {}, {}}});
  CHECK(full.marks[0].centroid.x == doctest::Approx(79.5));
  CHECK(full.marks[0].centroid.y == doctest::Approx(59.5));

  masks[1].mask(cv::Rect(0, 0, 40, 40)).setTo(255);
  CHECK(error_of([&] { som_overlay(base, masks); }) == Errc::overlapping_masks);
}

TEST_CASE("set-of-mark centroids match the pixel mean on random masks") {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const cv::Size size(64 + static_cast<int>(rng() % 64), 48 + static_cast<int>(rng() % 64));
    cv::Mat owner(size, CV_32S, cv::Scalar(-1));
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int y = 0; y < size.height; ++y) {
      for (int x = 0; x < size.width; ++x) {
        if (rng() % 3) owner.at<int>(y, x) = static_cast<int>(rng() % static_cast<unsigned>(n));
      }
    }
    std::vector<PartMask> masks;
    for (int k = 0; k < n; ++k) {
      cv::Mat m = owner == k;
      if (cv::countNonZero(m) == 0) continue;
      masks.push_back({10 + k, m, {}, {}});
    }
    const auto som = som_overlay(cv::Mat(size, CV_8UC3, cv::Scalar(0, 0, 0)), masks);
    for (const auto& mark : som.marks) {
      const int k = mark.mask_id - 10;
      double sx = 0, sy = 0, cnt = 0;
      for (int y = 0; y < size.height; ++y) {
        for (int x = 0; x < size.width; ++x) {
          if (owner.at<int>(y, x) == k) {
            sx += x;
            sy += y;
            ++cnt;
          }
        }
      }
      CHECK(std::hypot(mark.centroid.x - sx / cnt, mark.centroid.y - sy / cnt) <= 1.0);
    }
  }
}

TEST_CASE("mask alignment answers") {
  std::string why;
  const auto a = parse_mask_alignment("mask 1 -> Front Door\nMask 2 -> 'Start Button'\nnoise line\n", {1, 2, 3}, why);
  REQUIRE(a);
  CHECK(*a == MaskAlignment{{1, "Front Door"}, {2, "Start Button"}});
  CHECK_FALSE(parse_mask_alignment("mask 9 -> Door", {1}, why));
  CHECK_FALSE(parse_mask_alignment("mask 1 -> Door\nmask 2 -> door", {1, 2}, why));
  CHECK(why.find("duplicate") != std::string::npos);
  CHECK_FALSE(parse_mask_alignment("mask 1 -> Door\nmask 1 -> Lid", {1, 2}, why));
  CHECK_FALSE(parse_mask_alignment("I see a door.", {1}, why));
}

TEST_CASE("ground-truth alignment on the three-part fixture is perfect") {
  const auto model = load_fixture_model("microwave_01");
  const auto render = front_render(model);
  const auto obs = observation_from_render(render, candidate_poses(model).front());
  CHECK(obs.fx > 0);
  GroundTruthDetector det(render);
  GroundTruthSegmenter seg(render);
  BackendDispatcher d(naming_oracle(microwave_names()));
  TempDir scratch;
  AlignConfig cfg;
  cfg.scratch_dir = scratch.path();
  const auto r = align_parts(obs, det, seg, manual_with("Front Door Start Button Stop Button"), {}, d, 1, cfg);
  REQUIRE(r.names.size() == 3);
  const auto parts = mask_part_ids(r.masks, render);
  for (const auto& [mask_id, name] : r.names) CHECK(microwave_names().at(parts.at(mask_id)) == name);
  CHECK(r.regen_count == 0);
  CHECK(d.total_calls() == 1);
  CHECK(std::distance(fs::directory_iterator(scratch.path()), fs::directory_iterator()) == 1);
}

TEST_CASE("duplicate names get one retry, then exhaustion") {
  const auto model = load_fixture_model("microwave_01");
  const auto render = front_render(model);
  const auto obs = observation_from_render(render, candidate_poses(model).front());
  GroundTruthDetector det(render);
  GroundTruthSegmenter seg(render);
  BackendDispatcher d(std::make_shared<FunctionBackend>([](const BackendRequest& req) {
    std::string out;
    for (const auto& m : req.context.at("masks")) out += "mask " + std::to_string(m.at("mask_id").get<int>()) + " -> Start Button\n";
    return out;
  }));
  try {
    align_parts(obs, det, seg, manual_with("Start Button"), {}, d, 1);
    FAIL("expected exhaustion");
  } catch (const RegenerationExhausted&) {
  }
  CHECK(d.total_calls() == 2);

  // Names outside the manual are regenerated too.
  BackendDispatcher outside(naming_oracle(microwave_names()));
  CHECK_THROWS_AS(align_parts(obs, det, seg, manual_with("Front Door only"), {}, outside, 1), RegenerationExhausted);
}

TEST_CASE("no detections means no parts") {
  struct Empty : DetectorBackend {
    std::vector<cv::Rect> detect(const Observation&) override { return {}; }
  } det;
  const auto model = load_fixture_model("microwave_01");
  const auto render = front_render(model);
  GroundTruthSegmenter seg(render);
  BackendDispatcher d(scripted({}));
  CHECK(error_of([&] {
          align_parts(observation_from_render(render, candidate_poses(model).front()), det, seg, ResolvedManual{}, {}, d, 1);
        }) == Errc::no_parts_detected);
  CHECK(d.total_calls() == 0);
  Observation bad;
  bad.rgb = cv::Mat(10, 10, CV_8UC3);
  bad.depth = cv::Mat(5, 5, CV_32F);
  CHECK(error_of([&] { bad.validate(); }) == Errc::precondition_violated);
}

TEST_CASE("CAD alignment maps every visible part and leaves hidden ones out") {
  const auto model = load_fixture_model("microwave_01");
  const auto poses = candidate_poses(model);
  SchematicRenderer renderer;
  std::vector<RenderOutput> views;
  for (int i : {0, 1, 7}) views.push_back(renderer.render(model, ApplianceState::at_rest(model), poses[static_cast<std::size_t>(i)], {200, 150}));
  const auto manual = manual_with("Front Door, Start Button, Stop Button");
  BackendDispatcher d(naming_oracle(microwave_names()));
  const auto a = align_cad_parts(model, views, manual, {}, d, 3);
  CHECK(a == microwave_names());
  CHECK(align_cad_parts(model, views, manual, {}, d, 3) == a);

  // Hide the stop button in every view.
  for (auto& v : views) {
    const int l = v.part_label("link_2");
    v.labels.setTo(kLabelBody, v.labels == l);
  }
  const auto partial = align_cad_parts(model, views, manual, {}, d, 3);
  CHECK(partial.size() == 2);
  CHECK_FALSE(partial.count("link_2"));
}
