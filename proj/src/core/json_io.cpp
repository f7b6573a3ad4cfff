#include "manualkit/core/json_io.hpp"

#include "manualkit/core/error.hpp"

namespace manualkit {

namespace {

json aabb_to_json(const Aabb& b) {
  if (b.empty()) return nullptr;
  return {{"lo", vec_to_json(b.lo)}, {"hi", vec_to_json(b.hi)}};
}

Aabb aabb_from_json(const json& j) {
  Aabb b;
  if (j.is_null()) return b;
  b.lo = vec_from_json(j.at("lo"));
  b.hi = vec_from_json(j.at("hi"));
  return b;
}

}  // namespace

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::malformed_document, "expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json to_json(const ApplianceModel& model) {
  json parts = json::array();
  for (const auto& p : model.parts) {
    parts.push_back({{"part_id", p.part_id},
                     {"part_type", to_string(p.part_type)},
                     {"joint_id", p.joint_id},
                     {"contact_point", vec_to_json(p.contact_point)},
                     {"geometry_ref", p.geometry_ref},
                     {"bounds", aabb_to_json(p.bounds)}});
  }
  json joints = json::array();
  for (const auto& j : model.joints) {
    joints.push_back({{"joint_id", j.joint_id},
                      {"kind", to_string(j.kind)},
                      {"axis", vec_to_json(j.axis)},
                      {"origin", vec_to_json(j.origin)},
                      {"limit_lo", j.limit_lo},
                      {"limit_hi", j.limit_hi}});
  }
  json body = json::array();
  for (const auto& b : model.body_boxes) body.push_back(aabb_to_json(b));
  json pose = json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) pose.push_back(model.base_pose.matrix()(r, c));
  return {{"model_id", model.model_id},
          {"category", to_string(model.category)},
          {"parts", parts},
          {"joints", joints},
          {"body_boxes", body},
          {"base_pose", pose}};
}

ApplianceModel model_from_json(const json& j) {
  try {
    ApplianceModel m;
    m.model_id = j.at("model_id").get<std::string>();
    auto cat = category_from_string(j.at("category").get<std::string>());
    if (!cat) throw Error(Errc::malformed_document, "bad category");
    m.category = *cat;
    for (const auto& jj : j.at("joints")) {
      JointSpec js;
      js.joint_id = jj.at("joint_id").get<std::string>();
      js.kind = jj.at("kind").get<std::string>() == "prismatic" ? JointKind::prismatic : JointKind::revolute;
      js.axis = vec_from_json(jj.at("axis"));
      js.origin = vec_from_json(jj.at("origin"));
      js.limit_lo = jj.at("limit_lo").get<double>();
      js.limit_hi = jj.at("limit_hi").get<double>();
      m.joints.push_back(std::move(js));
    }
    for (const auto& jp : j.at("parts")) {
      PartSpec p;
      p.part_id = jp.at("part_id").get<std::string>();
      auto type = part_type_from_string(jp.at("part_type").get<std::string>());
      if (!type) throw Error(Errc::unknown_part_type, jp.at("part_type").get<std::string>());
      p.part_type = *type;
      p.joint_id = jp.at("joint_id").get<std::string>();
      p.contact_point = vec_from_json(jp.at("contact_point"));
      p.geometry_ref = jp.value("geometry_ref", "");
      p.bounds = aabb_from_json(jp.value("bounds", json()));
      m.parts.push_back(std::move(p));
    }
    for (const auto& b : j.value("body_boxes", json::array())) m.body_boxes.push_back(aabb_from_json(b));
    if (j.contains("base_pose")) {
      const auto& pose = j.at("base_pose");
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m.base_pose.matrix()(r, c) = pose.at(r * 4 + c).get<double>();
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_document, std::string("model manifest: ") + e.what());
  }
}

json to_json(const ApplianceState& state) {
  json out = json::object();
  for (const auto& [k, v] : state.joint_values) out[k] = v;
  return out;
}

ApplianceState state_from_json(const json& j) {
  ApplianceState s;
  for (const auto& [k, v] : j.items()) s.joint_values[k] = v.get<double>();
  return s;
}

json to_json(const ExecutionStep& step) {
  return {{"part_id", step.part_id},
          {"state_before", to_json(step.state_before)},
          {"state_after", to_json(step.state_after)},
          {"md_part", step.md_part},
          {"md_appliance", step.md_appliance},
          {"executor_failed", step.executor_failed}};
}

}  // namespace manualkit
