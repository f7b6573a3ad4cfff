#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "manualkit/core/error.hpp"
#include "manualkit/figures/figures.hpp"
#include "test_support.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <random>
#include <set>

using namespace manualkit;
using manualkit::testing::load_fixture_model;

namespace {

RenderOutput blank_output(cv::Size size, std::vector<std::string> part_ids) {
  RenderOutput r;
  r.rgb = cv::Mat(size, CV_8UC3, cv::Scalar(255, 255, 255));
  r.normal = cv::Mat(size, CV_8UC3, cv::Scalar(128, 128, 128));
  r.labels = cv::Mat(size, CV_32S, cv::Scalar(kLabelBackground));
  r.depth = cv::Mat(size, CV_32F, cv::Scalar(std::numeric_limits<float>::infinity()));
  r.part_ids = std::move(part_ids);
  return r;
}

// Fills `pixels` pixels of label `label` row by row from `start_row`.
void paint(RenderOutput& r, int label, int pixels, int start_row) {
  for (int i = 0; i < pixels; ++i) {
    r.labels.at<int>(start_row + i / r.labels.cols, i % r.labels.cols) = label;
  }
}

CameraPose pose_at(double x) { return CameraPose{Vec3(x, -2, 0), Vec3(x, 0, 0), Vec3::UnitZ(), 40}; }

// Independent pinhole: camera basis from the pose, principal point at the
// image center in pixel-center coordinates.
Vec2 oracle_project(const CameraPose& pose, cv::Size size, const Vec3& p) {
  const Vec3 f = (pose.look_at - pose.position).normalized();
  const Vec3 r = f.cross(pose.up).normalized();
  const Vec3 u = r.cross(f);
  const Vec3 d = p - pose.position;
  const double x = d.dot(r), y = d.dot(u), z = d.dot(f);
  const double focal = 0.5 * size.height / std::tan(pose.fov_deg * M_PI / 360.0);
  return Vec2((size.width - 1) / 2.0 + focal * x / z, (size.height - 1) / 2.0 - focal * y / z);
}

Vec3 rodrigues(const Vec3& p, const Vec3& origin, const Vec3& axis, double angle) {
  const Vec3 k = axis.normalized();
  const Vec3 v = p - origin;
  return origin + v * std::cos(angle) + k.cross(v) * std::sin(angle) + k * k.dot(v) * (1 - std::cos(angle));
}

bool throws_code(const std::function<void()>& fn, Errc code) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

bool rects_overlap(const cv::Rect& a, const cv::Rect& b) { return (a & b).area() > 0; }

}  // namespace

TEST_CASE("projector puts the look-at point at the image center") {
  const CameraPose pose{Vec3(1, -3, 2), Vec3(0.2, 0.1, 0.4), Vec3::UnitZ(), 50};
  const Projector proj(pose, {800, 600});
  const Vec2 c = proj.project(pose.look_at);
  CHECK(c.x() == doctest::Approx(399.5));
  CHECK(c.y() == doctest::Approx(299.5));
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 100; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const Vec2 a = proj.project(p), b = oracle_project(pose, {800, 600}, p);
    CHECK((a - b).norm() < 1e-9);
  }
  CHECK_THROWS_AS(CameraPose({Vec3(0, 0, 3), Vec3::Zero(), Vec3::UnitZ(), 40}).validate(), Error);
}

TEST_CASE("candidate poses") {
  const auto model = load_fixture_model("microwave_01");
  const auto poses = candidate_poses(model);
  REQUIRE(poses.size() == 26);
  const Aabb b = model.bounds();
  const double radius = 2.5 * 0.5 * b.extent().norm();
  for (const auto& p : poses) {
    CHECK((p.position - p.look_at).norm() == doctest::Approx(radius));
    CHECK_NOTHROW(p.validate());
  }
  CHECK(poses.front().forward().y() > 0.99);  // looking at the front face
}

TEST_CASE("select_views ranks by visible part pixels") {
  const auto model = load_fixture_model("microwave_01");
  const std::vector<std::string> ids = {"link_0", "link_1", "link_2"};
  const cv::Size size(100, 100);
  std::map<double, std::function<void(RenderOutput&)>> scene;
  scene[0.0] = [](RenderOutput& r) { paint(r, 0, 200, 0); };                                   // side: 200 px
  scene[1.0] = [](RenderOutput& r) { paint(r, 0, 4800, 0), paint(r, 1, 100, 48), paint(r, 2, 100, 49); };  // front
  scene[2.0] = [](RenderOutput& r) { paint(r, 1, 400, 10); };
  FixtureRenderer renderer([&](const ApplianceModel&, const ApplianceState&, const CameraPose& pose, cv::Size s) {
    RenderOutput r = blank_output(s, ids);
    paint(r, kLabelBody, 3000, 60);
    scene.at(pose.position.x())(r);
    return r;
  });
  const auto rest = ApplianceState::at_rest(model);

  const auto ranked = select_views(model, rest, {pose_at(0), pose_at(1), pose_at(2)}, renderer, size);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].candidate_index == 1);
  CHECK(ranked[0].visible_pixels == 5000);
  CHECK(ranked[0].distinct_parts == 3);
  CHECK(ranked[1].candidate_index == 2);
  CHECK(ranked[2].candidate_index == 0);

  SUBCASE("a single candidate is returned as is") {
    const auto one = select_views(model, rest, {pose_at(2)}, renderer, size);
    REQUIRE(one.size() == 1);
    CHECK(one[0].visible_pixels == 400);
  }
  SUBCASE("ties break on distinct parts, then candidate order") {
    scene[3.0] = [](RenderOutput& r) { paint(r, 0, 300, 0), paint(r, 1, 100, 20); };  // 400 px, 2 parts
    scene[4.0] = [](RenderOutput& r) { paint(r, 2, 400, 10); };                        // 400 px, 1 part
    const auto t = select_views(model, rest, {pose_at(4), pose_at(2), pose_at(3)}, renderer, size);
    CHECK(t[0].candidate_index == 2);
    CHECK(t[1].candidate_index == 0);
    CHECK(t[2].candidate_index == 1);
  }
  SUBCASE("no part anywhere") {
    scene[5.0] = [](RenderOutput&) {};
    CHECK(throws_code([&] { (void)select_views(model, rest, {pose_at(5)}, renderer, size); }, Errc::no_visible_part));
  }
  CHECK_THROWS_AS(select_views(model, rest, {}, renderer, size), Error);
}

TEST_CASE("select_views agrees with a brute-force ranking on the fixtures") {
  SchematicRenderer renderer;
  for (const char* id : {"microwave_01", "oven_01", "washer_01"}) {
    const auto model = load_fixture_model(id);
    const auto rest = ApplianceState::at_rest(model);
    const auto poses = candidate_poses(model);
    const cv::Size size(200, 150);
    const auto ranked = select_views(model, rest, poses, renderer, size);
    struct Score { std::int64_t px; int parts; std::size_t idx; };
    std::vector<Score> brute;
    for (std::size_t i = 0; i < poses.size(); ++i) {
      const auto r = renderer.render(model, rest, poses[i], size);
      Score s{0, 0, i};
      for (std::size_t k = 0; k < r.part_ids.size(); ++k) {
        const int c = cv::countNonZero(r.labels == static_cast<int>(k));
        s.px += c;
        s.parts += c > 0;
      }
      brute.push_back(s);
    }
    std::sort(brute.begin(), brute.end(), [](const Score& a, const Score& b) {
      return std::tie(b.px, b.parts, a.idx) < std::tie(a.px, a.parts, b.idx);
    });
    REQUIRE(ranked.size() == brute.size());
    for (std::size_t i = 0; i < brute.size(); ++i) {
      CHECK(ranked[i].candidate_index == brute[i].idx);
      CHECK(ranked[i].visible_pixels == brute[i].px);
    }
  }
}

TEST_CASE("control panel clusters buttons and knobs only") {
  SchematicRenderer renderer;
  const FigureConfig cfg;
  for (const char* id : {"microwave_01", "oven_01", "washer_01"}) {
    CAPTURE(id);
    const auto model = load_fixture_model(id);
    const auto over = render_overview(model, renderer, {{"link_0", "1"}}, cfg);
    const Projector proj(over.ranked.pose, cfg.view_size);
    const double eps = default_panel_eps(cfg.view_size);
    const auto clusters = cluster_control_panel(model, over.view, proj, eps, 2);
    for (const auto& c : clusters) {
      CHECK(c.member_part_ids.size() >= 2);
      for (const auto& m : c.member_part_ids) {
        const auto t = model.part(m).part_type;
        CHECK((t == PartType::button || t == PartType::knob));
        const cv::Rect mb = cv::boundingRect(over.view.part_mask(m));
        CHECK((mb & c.bbox_px) == mb);
      }
      CHECK((c.bbox_px & cv::Rect({0, 0}, cfg.view_size)) == c.bbox_px);
    }
    // Every member has a neighbour within eps: density reachability.
    for (const auto& c : clusters) {
      for (const auto& m : c.member_part_ids) {
        const Vec2 pm = proj.project(model.base_pose * model.part(m).bounds.center());
        bool near = false;
        for (const auto& o : c.member_part_ids) {
          if (o != m && (proj.project(model.base_pose * model.part(o).bounds.center()) - pm).norm() <= eps) near = true;
        }
        CHECK(near);
      }
    }
    if (std::string(id) == "oven_01") CHECK(!clusters.empty());
  }
}

TEST_CASE("point-line labels stay apart and off the appliance") {
  const cv::Size size(800, 600);
  cv::Mat img(size, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::Mat sil = cv::Mat::zeros(size, CV_8U);
  cv::rectangle(sil, cv::Rect(250, 150, 300, 300), cv::Scalar(255), cv::FILLED);
  const std::map<std::string, Vec2> anchors = {{"a", {300, 200}}, {"b", {400, 300}}, {"c", {500, 420}}};
  const std::map<std::string, std::string> labels = {{"a", "Door"}, {"b", "Start Button"}, {"c", "Timer Knob"}};
  const auto out = draw_point_line_annotation(img, sil, anchors, labels);
  REQUIRE(out.annotations.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& a = out.annotations[i];
    CHECK((a.label_box & cv::Rect({0, 0}, size)) == a.label_box);
    CHECK(cv::countNonZero(sil(a.label_box)) == 0);
    CHECK(a.anchor_px == anchors.at(a.part_id));
    CHECK(a.label_text == labels.at(a.part_id));
    for (std::size_t j = i + 1; j < 3; ++j) CHECK_FALSE(rects_overlap(a.label_box, out.annotations[j].label_box));
  }
  // Leader dot is drawn at the anchor.
  CHECK(out.image.at<cv::Vec3b>(300, 400) != cv::Vec3b(255, 255, 255));
  const auto again = draw_point_line_annotation(img, sil, anchors, labels);
  CHECK(cv::norm(out.image, again.image, cv::NORM_INF) == 0.0);

  CHECK(throws_code([&] { (void)draw_point_line_annotation(img, sil, {}, {}); }, Errc::precondition_violated));
  CHECK(throws_code([&] { (void)draw_point_line_annotation(img, sil, {{"a", {900, 10}}}, {{"a", "x"}}); }, Errc::precondition_violated));
}

TEST_CASE("coincident anchors get labels on different sides") {
  const cv::Size size(800, 600);
  cv::Mat img(size, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::Mat sil = cv::Mat::zeros(size, CV_8U);
  cv::rectangle(sil, cv::Rect(300, 200, 200, 200), cv::Scalar(255), cv::FILLED);
  const Vec2 p(480, 300);
  const auto out = draw_point_line_annotation(img, sil, {{"a", p}, {"b", p}}, {{"a", "Knob A"}, {"b", "Knob B"}});
  REQUIRE(out.annotations.size() == 2);
  CHECK_FALSE(rects_overlap(out.annotations[0].label_box, out.annotations[1].label_box));
  CHECK(out.annotations[0].label_px != out.annotations[1].label_px);
}

TEST_CASE("label placement fails when there is no free space") {
  const cv::Size size(200, 150);
  cv::Mat img(size, CV_8UC3, cv::Scalar(255, 255, 255));
  cv::Mat sil(size, CV_8U, cv::Scalar(255));
  CHECK(throws_code([&] { (void)draw_point_line_annotation(img, sil, {{"a", {100, 75}}}, {{"a", "Door"}}); }, Errc::label_placement_failed));
}

TEST_CASE("interior anchor lies inside the mask") {
  cv::Mat mask = cv::Mat::zeros(100, 100, CV_8U);
  CHECK_FALSE(interior_anchor(mask).has_value());
  cv::rectangle(mask, cv::Rect(10, 20, 30, 11), cv::Scalar(255), cv::FILLED);
  const auto a = interior_anchor(mask);
  REQUIRE(a);
  CHECK(a->x == 24);
  CHECK(a->y == 25);
  // L shape: the anchor must not fall into the concave notch.
  mask.setTo(0);
  cv::rectangle(mask, cv::Rect(0, 0, 60, 10), cv::Scalar(255), cv::FILLED);
  cv::rectangle(mask, cv::Rect(0, 0, 10, 60), cv::Scalar(255), cv::FILLED);
  const auto l = interior_anchor(mask);
  REQUIRE(l);
  CHECK(mask.at<uchar>(*l) == 255);
}

TEST_CASE("sketch of a constant normal map is blank") {
  const cv::Mat n(120, 160, CV_8UC3, cv::Scalar(128, 128, 255));
  const cv::Mat s = render_sketch(n);
  CHECK(cv::countNonZero(s == 0) == 0);
}

TEST_CASE("sketch puts edges on the seam between two planes") {
  cv::Mat n(120, 160, CV_8UC3, cv::Scalar(128, 128, 255));
  n(cv::Rect(80, 0, 80, 120)).setTo(cv::Scalar(255, 128, 128));  // 90 degrees apart
  for (auto exec : {kernels::Exec::serial, kernels::Exec::parallel}) {
    const cv::Mat s = render_sketch(n, 80.0, exec);
    int edge = 0;
    for (int y = 0; y < s.rows; ++y) {
      for (int x = 0; x < s.cols; ++x) {
        if (s.at<uchar>(y, x) != 0) continue;
        ++edge;
        CHECK(std::abs(x - 79.5) <= 1.0);
      }
    }
    CHECK(edge == 2 * 120);
  }
}

TEST_CASE("sketch edge density on a fixture render") {
  SchematicRenderer renderer;
  const auto model = load_fixture_model("oven_01");
  const auto poses = candidate_poses(model);
  const auto r = renderer.render(model, ApplianceState::at_rest(model), poses.front(), {800, 600});
  const cv::Mat s = render_sketch(r.normal);
  const double ratio = cv::countNonZero(s == 0) / static_cast<double>(s.total());
  CHECK(ratio >= 0.005);
  CHECK(ratio <= 0.20);
  CHECK(cv::norm(s, render_sketch(r.normal, 80.0, kernels::Exec::serial), cv::NORM_INF) == 0.0);
}

TEST_CASE("strategy support follows the joint") {
  const auto model = load_fixture_model("oven_01");
  for (const auto& part : model.parts) {
    const auto v = valid_strategies(model, part);
    CHECK(v.front() == GuidanceStrategy::text_only);
    CHECK(v.size() == 4);
  }
  ApplianceModel frozen = model;
  for (auto& j : frozen.joints) {
    if (j.joint_id == frozen.part("link_3").joint_id) j.limit_hi = j.limit_lo;
  }
  const auto& button = frozen.part("link_3");
  CHECK(valid_strategies(frozen, button) == std::vector<GuidanceStrategy>{GuidanceStrategy::text_only});
  SchematicRenderer renderer;
  CHECK(throws_code([&] { (void)render_guidance(frozen, button, GuidanceStrategy::motion_decomposition, renderer, {320, 240}, "Start"); }, Errc::strategy_unsupported_for_part));
  const auto text = render_guidance(frozen, button, GuidanceStrategy::text_only, renderer, {320, 240}, "Start");
  CHECK(text.image.empty());
  CHECK_FALSE(text.caption.empty());
}

TEST_CASE("door closeup shows the closed and open states") {
  SchematicRenderer renderer;
  const auto model = load_fixture_model("oven_01");
  const auto& door = model.part("link_0");
  const auto& joint = model.joint_of(door);
  const auto g = render_guidance(model, door, GuidanceStrategy::closeup_states, renderer, {320, 240}, "Oven Door");
  REQUIRE(g.frame_values.size() == 2);
  CHECK(g.frame_values[0] == 0.0);
  CHECK(g.frame_values[1] == joint.limit_hi);
  CHECK(g.image.size() == cv::Size(640, 240));
  // The two halves differ: the door moved.
  CHECK(cv::norm(g.image(cv::Rect(0, 0, 320, 240)), g.image(cv::Rect(320, 0, 320, 240)), cv::NORM_L1) > 0);
  // Door camera is perpendicular to the hinge axis.
  CHECK(std::abs(g.pose.forward().dot(joint.axis.normalized())) < 1e-9);

  const auto m = render_guidance(model, door, GuidanceStrategy::motion_decomposition, renderer, {320, 240}, "Oven Door");
  REQUIRE(m.frame_values.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(m.frame_values[i] == doctest::Approx(joint.limit_lo + i / 3.0 * limit_range(joint)));
  CHECK(m.image.size() == cv::Size(1280, 240));
}

TEST_CASE("knob trajectory matches an analytic projection") {
  SchematicRenderer renderer;
  const auto model = load_fixture_model("oven_01");
  const auto& knob = model.part("link_1");
  const auto& joint = model.joint_of(knob);
  const cv::Size size(320, 240);
  const double end = 120.0 * M_PI / 180.0;
  const auto g = render_guidance(model, knob, GuidanceStrategy::contact_trajectory, renderer, size, "Temperature Knob", end);
  REQUIRE(g.trajectory_px.size() == 13);  // 0..120 in 10 degree steps
  CHECK(std::abs(std::abs(g.pose.forward().dot(joint.axis.normalized())) - 1.0) < 1e-9);
  for (int k = 0; k <= 12; ++k) {
    const double a = k * 10.0 * M_PI / 180.0;
    const Vec3 p = rodrigues(knob.contact_point, joint.origin, joint.axis, a);
    const Vec2 expect = oracle_project(g.pose, size, model.base_pose * p);
    CHECK((g.trajectory_px[k] - expect).norm() <= 2.0);
  }
  CHECK(g.image.size() == size);
}

TEST_CASE("trajectory samples") {
  JointSpec rev{"j", JointKind::revolute, Vec3::UnitZ(), Vec3::Zero(), 0.0, M_PI};
  const auto s = trajectory_samples(rev, 25.0 * M_PI / 180.0);
  REQUIRE(s.size() == 4);  // 0, 10, 20, 25
  CHECK(s[2] == doctest::Approx(20.0 * M_PI / 180.0));
  CHECK(s.back() == doctest::Approx(25.0 * M_PI / 180.0));
  JointSpec pri{"p", JointKind::prismatic, Vec3::UnitY(), Vec3::Zero(), 0.0, 0.2};
  const auto t = trajectory_samples(pri, 0.2);
  REQUIRE(t.size() == 11);
  CHECK(t[5] == doctest::Approx(0.1));
}

TEST_CASE("cover composites the render over a room background") {
  CHECK(cover_prompt(Category::oven).find("kitchen") != std::string::npos);
  CHECK(cover_prompt(Category::washing_machine).find("laundry") != std::string::npos);
  cv::Mat overview(60, 80, CV_8UC3, cv::Scalar(10, 20, 30));
  cv::Mat sil = cv::Mat::zeros(60, 80, CV_8U);
  cv::rectangle(sil, cv::Rect(20, 10, 30, 30), cv::Scalar(255), cv::FILLED);
  overview.at<cv::Vec3b>(15, 25) = cv::Vec3b(1, 2, 3);
  FlatBackgroundBackend bg;
  const auto cover = compose_cover(overview, sil, Category::oven, bg, 7);
  const cv::Mat flat = bg.generate(cover.prompt, overview.size(), 7);
  for (int y = 0; y < 60; ++y) {
    for (int x = 0; x < 80; ++x) {
      const auto expect = sil.at<uchar>(y, x) ? overview.at<cv::Vec3b>(y, x) : flat.at<cv::Vec3b>(y, x);
      REQUIRE(cover.image.at<cv::Vec3b>(y, x) == expect);
    }
  }
  const cv::Mat laundry = bg.generate(cover_prompt(Category::washing_machine), {4, 4}, 0);
  CHECK(laundry.at<cv::Vec3b>(0, 0) != flat.at<cv::Vec3b>(0, 0));
}

TEST_CASE("figure asset validation and JSON round trip") {
  FigureAsset a;
  a.asset_id = "x_overview_rgb";
  a.kind = FigureKind::overview_diagram;
  a.image_ref = "abc.png";
  a.width = 800;
  a.height = 600;
  CHECK(throws_code([&] { (void)a.validate(); }, Errc::validation_error));
  a.annotations.push_back({"link_0", {1, 2}, {3, 4}, "Door", cv::Rect(1, 2, 3, 4)});
  CHECK_NOTHROW(a.validate());
  const FigureAsset b = figure_from_json(to_json(a));
  CHECK(to_json(b) == to_json(a));

  FigureAsset g;
  g.asset_id = "x_g";
  g.kind = FigureKind::guidance;
  CHECK(throws_code([&] { (void)g.validate(); }, Errc::validation_error));
  g.guidance_strategy = GuidanceStrategy::text_only;
  CHECK_NOTHROW(g.validate());
  g.guidance_strategy = GuidanceStrategy::closeup_states;
  CHECK(throws_code([&] { (void)g.validate(); }, Errc::validation_error));
  CHECK(guidance_strategy_from_string("contact_trajectory") == GuidanceStrategy::contact_trajectory);
  CHECK_THROWS(figure_kind_from_string("poster"));
}

TEST_CASE("instance figures are complete, anchored and byte-deterministic") {
  SchematicRenderer renderer;
  FlatBackgroundBackend bg;
  const auto model = load_fixture_model("oven_01");
  ApplianceInstance inst;
  inst.instance_id = "oven_01_inst0";
  inst.model_id = model.model_id;
  const char* names[] = {"Oven Door", "Temperature Knob", "Timer Knob", "Light Button", "Fan Button"};
  for (std::size_t i = 0; i < model.parts.size(); ++i) inst.function_annotation[model.parts[i].part_id] = names[i];
  manualkit::testing::TempDir d1, d2;
  const auto a = build_instance_figures(model, inst, renderer, bg, d1.path(), 11);
  const auto b = build_instance_figures(model, inst, renderer, bg, d2.path(), 11);
  REQUIRE(a.size() == b.size());
  std::set<std::string> kinds;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(to_json(a[i]) == to_json(b[i]));
    CHECK_NOTHROW(a[i].validate());
    kinds.insert(std::string(to_string(a[i].kind)));
    if (!a[i].image_ref.empty()) {
      CHECK(manualkit::testing::read_file(d1.path() / a[i].image_ref) ==
            manualkit::testing::read_file(d2.path() / b[i].image_ref));
    }
  }
  CHECK(kinds == std::set<std::string>{"cover", "overview_diagram", "control_panel", "guidance"});

  // Overview anchors sit on the pixels of their own part.
  const auto over = render_overview(model, renderer, inst.function_annotation);
  for (const auto& ann : over.annotated.annotations) {
    const cv::Point p(static_cast<int>(ann.anchor_px.x()), static_cast<int>(ann.anchor_px.y()));
    CHECK(over.view.labels.at<int>(p) == over.view.part_label(ann.part_id));
  }
  // Guidance exists for every part and valid strategy.
  for (const auto& part : model.parts) {
    for (auto s : valid_strategies(model, part)) {
      const bool found = std::any_of(a.begin(), a.end(), [&](const FigureAsset& f) {
        return f.kind == FigureKind::guidance && f.part_id == part.part_id && f.guidance_strategy == s;
      });
      CHECK(found);
    }
  }
}
