#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "manualkit/core/action.hpp"
#include "manualkit/core/error.hpp"
#include "manualkit/core/json_io.hpp"
#include "manualkit/core/loader.hpp"
#include "test_support.hpp"

#include <random>

using namespace manualkit;
using manualkit::testing::fixture_model_dir;
using manualkit::testing::load_fixture_model;
using manualkit::testing::read_file;

namespace {

ModelSources microwave_sources() { return read_model_sources(fixture_model_dir("microwave_01")); }

Errc load_error(const ModelSources& src) {
  try {
    load_appliance_model(src);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected load to fail");
  return Errc::not_found;
}

ExecutionStep synthetic_step(const std::string& part_id, const ApplianceState& after, double md_part,
                             double md_appliance = 0.0) {
  ExecutionStep s;
  s.part_id = part_id;
  s.state_after = after;
  s.md_part = md_part;
  s.md_appliance = md_appliance;
  return s;
}

}  // namespace

TEST_CASE("microwave fixture loads field by field") {
  const ApplianceModel m = load_appliance_model(microwave_sources());
  CHECK(m.model_id == "microwave_01");
  CHECK(m.category == Category::microwave);
  REQUIRE(m.parts.size() == 3);
  REQUIRE(m.joints.size() == 3);

  const PartSpec& door = m.part("link_0");
  CHECK(door.part_type == PartType::door);
  CHECK(door.joint_id == "joint_0");
  CHECK(door.contact_point.isApprox(Vec3(0.10, -0.195, 0.15)));
  const JointSpec& hinge = m.joint("joint_0");
  CHECK(hinge.kind == JointKind::revolute);
  CHECK(hinge.axis.isApprox(Vec3(0, 0, -1)));
  CHECK(hinge.origin.isApprox(Vec3(-0.225, -0.185, 0.15)));
  CHECK(hinge.limit_lo == 0.0);
  CHECK(hinge.limit_hi == doctest::Approx(1.57));
  // Door visual is offset 0.175 m along x from the hinge frame.
  CHECK(door.bounds.center().isApprox(Vec3(-0.05, -0.185, 0.15)));

  for (const char* id : {"link_1", "link_2"}) {
    const PartSpec& b = m.part(id);
    CHECK(b.part_type == PartType::button);
    const JointSpec& j = m.joint_of(b);
    CHECK(j.kind == JointKind::prismatic);
    CHECK(j.axis.isApprox(Vec3(0, 1, 0)));
    CHECK(limit_range(j) == doctest::Approx(0.004));
  }
  CHECK(m.part("link_2").contact_point.isApprox(Vec3(0.17, -0.185, 0.12)));
  CHECK(m.body_boxes.size() == 1);
}

TEST_CASE("category can come from the robot element") {
  ModelSources src = microwave_sources();
  src.category.reset();
  CHECK(load_appliance_model(src).category == Category::microwave);
  src.category = "Hovercraft";
  CHECK(load_error(src) == Errc::malformed_document);
}

TEST_CASE("load errors") {
  SUBCASE("zero manipulable parts") {
    ModelSources src = microwave_sources();
    src.semantics = "base static body\n";
    CHECK(load_error(src) == Errc::malformed_document);
  }
  SUBCASE("unknown part type") {
    ModelSources src = microwave_sources();
    src.semantics = "link_0 hinge antenna 0.10 -0.195 0.15\n";
    CHECK(load_error(src) == Errc::unknown_part_type);
  }
  SUBCASE("semantic part on a link without a joint") {
    ModelSources src = microwave_sources();
    src.semantics = "base hinge door\n";
    CHECK(load_error(src) == Errc::dangling_joint_ref);
  }
  SUBCASE("semantic part on a missing link") {
    ModelSources src = microwave_sources();
    src.semantics = "link_9 slider button\n";
    CHECK(load_error(src) == Errc::dangling_joint_ref);
  }
  SUBCASE("degenerate limits are rejected") {
    ModelSources src = microwave_sources();
    const std::string from = R"(<limit lower="0" upper="1.57"/>)";
    src.articulation_xml.replace(src.articulation_xml.find(from), from.size(), R"(<limit lower="0.2" upper="0.2"/>)");
    CHECK(load_error(src) == Errc::malformed_document);
  }
  SUBCASE("contact point on the hinge axis") {
    ModelSources src = microwave_sources();
    src.semantics = "link_0 hinge door -0.225 -0.1855 0.15\n";
    CHECK(load_error(src) == Errc::malformed_document);
  }
  SUBCASE("contact point outside the part box") {
    ModelSources src = microwave_sources();
    src.semantics = "link_1 slider button 0.4 -0.185 0.2\n";
    CHECK(load_error(src) == Errc::malformed_document);
  }
  SUBCASE("joint kind mismatch") {
    ModelSources src = microwave_sources();
    src.semantics = "link_1 hinge button 0.17 -0.185 0.2\n";
    CHECK(load_error(src) == Errc::malformed_document);
  }
  SUBCASE("broken xml") {
    ModelSources src = microwave_sources();
    src.articulation_xml = "<robot><link name='a'></robot>";
    CHECK(load_error(src) == Errc::malformed_document);
  }
}

TEST_CASE("all fixtures load and satisfy model invariants") {
  for (const char* id : {"microwave_01", "oven_01", "washer_01"}) {
    const ApplianceModel m = load_fixture_model(id);
    for (const auto& j : m.joints) {
      CHECK(j.axis.norm() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(j.limit_lo < j.limit_hi);
    }
    for (const auto& p : m.parts) {
      CHECK(m.find_joint(p.joint_id) != nullptr);
      CHECK(p.bounds.expanded(0.05).contains(p.contact_point));
    }
  }
}

TEST_CASE("model json round trip") {
  const ApplianceModel m = load_fixture_model("oven_01");
  const ApplianceModel back = model_from_json(to_json(m));
  CHECK(to_json(back) == to_json(m));
}

TEST_CASE("limit_range") {
  JointSpec j;
  j.limit_lo = 0.0;
  j.limit_hi = 1.57;
  CHECK(limit_range(j) == doctest::Approx(1.57));
  j.limit_lo = -0.5;
  j.limit_hi = 0.5;
  CHECK(limit_range(j) == doctest::Approx(1.0));
}

TEST_CASE("state labels") {
  CHECK(format_state(StateLabel::push(1)) == "Push 1 time");
  CHECK(format_state(StateLabel::push(2)) == "Push 2 times");
  CHECK(format_state(StateLabel::rotate(60)) == "Rotate 60 degrees");
  CHECK(parse_state("rotate 60°") == StateLabel::rotate(60));
  CHECK(parse_state(" Push 3 times ") == StateLabel::push(3));
  CHECK(parse_state("OPEN") == StateLabel::open());
  CHECK_FALSE(parse_state("Rotate sixty degrees").has_value());
  CHECK_FALSE(parse_state("Push 0 times").has_value());
}

TEST_CASE("apply_action examples") {
  const ApplianceModel oven = load_fixture_model("oven_01");
  const ApplianceModel mw = load_fixture_model("microwave_01");

  SUBCASE("knob rotations compose additively") {
    ApplianceState s = ApplianceState::at_rest(oven);
    s = apply_action(oven, s, {"link_1", Rotate{60}}).state;
    s = apply_action(oven, s, {"link_1", Rotate{60}}).state;
    CHECK(s.value("joint_1") == doctest::Approx(2.094).epsilon(1e-3));
    CHECK(rad2deg(s.value("joint_1")) == doctest::Approx(120.0));
  }
  SUBCASE("door rotation clamps at the limit") {
    const auto out = apply_action(mw, ApplianceState::at_rest(mw), {"link_0", Rotate{120}});
    CHECK(out.state.value("joint_0") == doctest::Approx(1.57));
  }
  SUBCASE("push accumulates stroke travel") {
    const auto out = apply_action(mw, ApplianceState::at_rest(mw), {"link_1", Push{2}});
    // Oracle: sum of per-stroke travel, each stroke a full press of L.
    const double stroke = mw.joint("joint_1").limit_hi - mw.joint("joint_1").limit_lo;
    double oracle = 0.0;
    for (int i = 0; i < 2; ++i) oracle += stroke;
    CHECK(out.step.md_part == doctest::Approx(0.008));
    CHECK(out.step.md_part == doctest::Approx(oracle));
    CHECK(out.state.value("joint_1") == 0.0);
    CHECK(out.step.md_appliance == 0.0);
  }
  SUBCASE("revolute md is arc length at the contact point") {
    const auto out = apply_action(mw, ApplianceState::at_rest(mw), {"link_0", SetOpen{}});
    const double arm = lever_arm(mw.part("link_0"), mw.joint("joint_0"));
    CHECK(out.step.md_part == doctest::Approx(1.57 * arm));
  }
}

TEST_CASE("illegal actions") {
  const ApplianceModel oven = load_fixture_model("oven_01");
  const ApplianceState rest = ApplianceState::at_rest(oven);
  auto code_of = [&](const ActionCommand& cmd) {
    try {
      apply_action(oven, rest, cmd);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::not_found;
  };
  CHECK(code_of({"link_1", Push{1}}) == Errc::illegal_action_for_part);       // knob
  CHECK(code_of({"link_3", Rotate{30}}) == Errc::illegal_action_for_part);    // button
  CHECK(code_of({"link_1", SetOpen{}}) == Errc::illegal_action_for_part);     // knob
  CHECK(code_of({"link_0", Translate{0.5}}) == Errc::illegal_action_for_part);  // door
  CHECK(code_of({"link_3", Push{0}}) == Errc::illegal_action_for_part);
}

TEST_CASE("check_step_success examples") {
  const ApplianceModel oven = load_fixture_model("oven_01");
  const ApplianceModel mw = load_fixture_model("microwave_01");
  const PartSpec& knob = oven.part("link_1");
  ApplianceState s = ApplianceState::at_rest(oven);

  s.joint_values["joint_1"] = deg2rad(100);
  CHECK(check_step_success(oven, synthetic_step("link_1", s, 0.0), knob, StateLabel::rotate(90)));
  s.joint_values["joint_1"] = deg2rad(45);
  CHECK_FALSE(check_step_success(oven, synthetic_step("link_1", s, 0.0), knob, StateLabel::rotate(90)));

  // Threshold oracle: 25% of L computed independently.
  const double L = 0.004;
  const double threshold = L / 4.0;
  const PartSpec& button = mw.part("link_1");
  const ApplianceState ms = ApplianceState::at_rest(mw);
  CHECK(0.0011 > threshold);
  CHECK(check_step_success(mw, synthetic_step("link_1", ms, 0.0011), button, StateLabel::push(1)));
  CHECK_FALSE(check_step_success(mw, synthetic_step("link_1", ms, 0.0009), button, StateLabel::push(1)));

  CHECK_THROWS_AS(check_step_success(oven, synthetic_step("link_1", s, 0.0), knob, StateLabel::open()), Error);
}

TEST_CASE("step success boundaries are exact") {
  const ApplianceModel oven = load_fixture_model("oven_01");
  const ApplianceModel mw = load_fixture_model("microwave_01");
  const PartSpec& knob = oven.part("link_1");
  const PartSpec& button = mw.part("link_1");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> target_deg(30.0, 150.0);

  for (int i = 0; i < 500; ++i) {
    const double t = std::round(target_deg(rng));
    ApplianceState s = ApplianceState::at_rest(oven);
    for (double sign : {-1.0, 1.0}) {
      s.joint_values["joint_1"] = deg2rad(t + sign * 30.0);
      CHECK(check_step_success(oven, synthetic_step("link_1", s, 0.0), knob, StateLabel::rotate(t)));
      s.joint_values["joint_1"] = deg2rad(t + sign * (30.0 + 1e-6));
      CHECK_FALSE(check_step_success(oven, synthetic_step("link_1", s, 0.0), knob, StateLabel::rotate(t)));
    }
  }
  const double L = limit_range(mw.joint("joint_1"));
  const ApplianceState ms = ApplianceState::at_rest(mw);
  CHECK_FALSE(check_step_success(mw, synthetic_step("link_1", ms, 0.25 * L), button, StateLabel::push(1)));
  CHECK(check_step_success(mw, synthetic_step("link_1", ms, 0.25 * L + 1e-9), button, StateLabel::push(1)));
}

TEST_CASE("motion ratio clause needs the same direction") {
  const ApplianceModel mw = load_fixture_model("microwave_01");
  const PartSpec& button = mw.part("link_1");
  const Vec3 axis = mw.joint("joint_1").axis;
  ExecutionStep step = synthetic_step("link_1", ApplianceState::at_rest(mw), 0.0006, 0.001);
  step.part_displacement = axis * 0.0006;
  step.appliance_displacement = axis * 0.001;
  CHECK(check_step_success(mw, step, button, StateLabel::push(1)));  // 0.6 > 0.5
  step.appliance_displacement = -axis * 0.001;
  CHECK_FALSE(check_step_success(mw, step, button, StateLabel::push(1)));
  step.appliance_displacement = axis * 0.0013;
  step.md_appliance = 0.0013;
  CHECK_FALSE(check_step_success(mw, step, button, StateLabel::push(1)));  // ratio 0.46
}

TEST_CASE("property: clamping is total and execution deterministic") {
  std::mt19937_64 rng(42);
  for (const char* id : {"microwave_01", "oven_01", "washer_01"}) {
    const ApplianceModel m = load_fixture_model(id);
    for (int trial = 0; trial < 200; ++trial) {
      ApplianceState s = ApplianceState::at_rest(m);
      ExecutorNoise profile{true, 0.2, rng(), 5.0, 0.05, 0.002};
      NoiseSampler noise_a(profile), noise_b(profile);
      ApplianceState s_b = s;
      for (int k = 0; k < 10; ++k) {
        const PartSpec& p = m.parts[rng() % m.parts.size()];
        const JointSpec& j = m.joint_of(p);
        ActionCommand cmd{p.part_id, SetOpen{}};
        if (p.part_type == PartType::button) {
          cmd.action = Push{1 + static_cast<int>(rng() % 3)};
        } else if (is_openable(p.part_type)) {
          cmd.action = (rng() % 2) ? Action{SetOpen{}} : Action{SetClose{}};
          if (j.kind == JointKind::revolute && rng() % 3 == 0) cmd.action = Rotate{std::uniform_real_distribution<>(-400, 400)(rng)};
        } else if (j.kind == JointKind::revolute) {
          cmd.action = Rotate{std::uniform_real_distribution<>(-400, 400)(rng)};
        } else {
          cmd.action = Translate{std::uniform_real_distribution<>(-1, 1)(rng)};
        }
        const auto a = apply_action(m, s, cmd, &noise_a);
        const auto b = apply_action(m, s_b, cmd, &noise_b);
        CHECK(a.state == b.state);
        CHECK(a.step.md_part == b.step.md_part);
        CHECK(a.step.md_part >= 0.0);
        CHECK(a.step.md_appliance >= 0.0);
        for (const auto& jj : m.joints) {
          const double v = a.state.value(jj.joint_id);
          CHECK(v >= jj.limit_lo);
          CHECK(v <= jj.limit_hi);
        }
        s = a.state;
        s_b = b.state;
      }
    }
  }
}

TEST_CASE("property: push returns to rest and accumulates travel") {
  const ApplianceModel mw = load_fixture_model("microwave_01");
  ApplianceState s = ApplianceState::at_rest(mw);
  double total = 0.0;
  for (int k = 1; k <= 5; ++k) {
    const auto out = apply_action(mw, s, {"link_2", Push{k}});
    CHECK(out.state.value("joint_2") == mw.joint("joint_2").limit_lo);
    const double before = total;
    total += out.step.md_part;
    CHECK(total > before);
    s = out.state;
  }
}

TEST_CASE("property: revolute success ignores the approach direction") {
  const ApplianceModel oven = load_fixture_model("oven_01");
  const PartSpec& knob = oven.part("link_2");
  for (int target = 60; target <= 180; target += 60) {
    // Reach the same final angle from below and from above.
    ApplianceState low = ApplianceState::at_rest(oven);
    ApplianceState high = low;
    high.joint_values["joint_2"] = deg2rad(180);
    const auto a = apply_action(oven, low, command_for_state(oven, low, knob, StateLabel::rotate(target)));
    const auto b = apply_action(oven, high, command_for_state(oven, high, knob, StateLabel::rotate(target)));
    CHECK(a.state.value("joint_2") == doctest::Approx(b.state.value("joint_2")));
    CHECK(check_step_success(oven, a.step, knob, StateLabel::rotate(target)) ==
          check_step_success(oven, b.step, knob, StateLabel::rotate(target)));
    CHECK(check_step_success(oven, a.step, knob, StateLabel::rotate(target)));
  }
}

TEST_CASE("executor failure leaves the state untouched") {
  const ApplianceModel mw = load_fixture_model("microwave_01");
  NoiseSampler always_fail(ExecutorNoise{false, 1.0, 3});
  const auto out = apply_action(mw, ApplianceState::at_rest(mw), {"link_0", SetOpen{}}, &always_fail);
  CHECK(out.step.executor_failed);
  CHECK(out.state == ApplianceState::at_rest(mw));
  CHECK_FALSE(check_step_success(mw, out.step, mw.part("link_0"), StateLabel::open()));
}
