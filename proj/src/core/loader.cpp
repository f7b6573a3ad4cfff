#include "manualkit/core/loader.hpp"

#include "manualkit/core/action.hpp"
#include "manualkit/core/error.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace manualkit {

namespace pt = boost::property_tree;

namespace {

constexpr double kOnAxisTolerance = 1e-3;  // meters

struct UrdfVisual {
  Eigen::Isometry3d origin = Eigen::Isometry3d::Identity();
  std::optional<Vec3> box_size;
  std::string ref;
};

struct UrdfLink {
  std::string name;
  std::vector<UrdfVisual> visuals;
};

struct UrdfJoint {
  std::string name;
  std::string type;
  std::string parent;
  std::string child;
  Eigen::Isometry3d origin = Eigen::Isometry3d::Identity();
  Vec3 axis = Vec3::UnitX();
  std::optional<std::pair<double, double>> limits;
};

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::malformed_document, what); }

Vec3 parse_vec3(const std::string& text, const std::string& what) {
  std::istringstream is(text);
  Vec3 v;
  if (!(is >> v.x() >> v.y() >> v.z())) malformed("expected three numbers for " + what + ", got '" + text + "'");
  return v;
}

Eigen::Isometry3d parse_origin(const pt::ptree& node) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  auto origin = node.get_child_optional("origin");
  if (!origin) return t;
  const Vec3 xyz = parse_vec3(origin->get<std::string>("<xmlattr>.xyz", "0 0 0"), "origin xyz");
  const Vec3 rpy = parse_vec3(origin->get<std::string>("<xmlattr>.rpy", "0 0 0"), "origin rpy");
  t.translate(xyz);
  t.rotate(Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
           Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()));
  return t;
}

double parse_number(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    malformed("bad number for " + what + ": '" + text + "'");
  }
}

struct Urdf {
  std::string name;
  std::optional<std::string> category;
  std::map<std::string, UrdfLink> links;
  std::vector<UrdfJoint> joints;
};

Urdf parse_urdf(const std::string& xml) {
  pt::ptree tree;
  try {
    std::istringstream is(xml);
    pt::read_xml(is, tree);
  } catch (const pt::xml_parser_error& e) {
    malformed(std::string("articulation document: ") + e.what());
  }
  auto robot = tree.get_child_optional("robot");
  if (!robot) malformed("articulation document has no <robot> element");

  Urdf out;
  out.name = robot->get<std::string>("<xmlattr>.name", "");
  if (auto cat = robot->get_optional<std::string>("<xmlattr>.category")) out.category = *cat;

  for (const auto& [tag, node] : *robot) {
    if (tag == "link") {
      UrdfLink link;
      link.name = node.get<std::string>("<xmlattr>.name", "");
      if (link.name.empty()) malformed("link without name");
      for (const auto& [vtag, vnode] : node) {
        if (vtag != "visual") continue;
        UrdfVisual vis;
        vis.origin = parse_origin(vnode);
        if (auto box = vnode.get_optional<std::string>("geometry.box.<xmlattr>.size")) {
          vis.box_size = parse_vec3(*box, "box size");
          vis.ref = "box:" + *box;
        } else if (auto mesh = vnode.get_optional<std::string>("geometry.mesh.<xmlattr>.filename")) {
          vis.ref = "mesh:" + *mesh;
        } else if (auto cyl = vnode.get_child_optional("geometry.cylinder")) {
          const double r = parse_number(cyl->get<std::string>("<xmlattr>.radius", "0"), "cylinder radius");
          const double l = parse_number(cyl->get<std::string>("<xmlattr>.length", "0"), "cylinder length");
          vis.box_size = Vec3(2 * r, 2 * r, l);
          vis.ref = "cylinder:" + std::to_string(r) + "," + std::to_string(l);
        }
        link.visuals.push_back(std::move(vis));
      }
      if (out.links.count(link.name)) malformed("duplicate link '" + link.name + "'");
      out.links.emplace(link.name, std::move(link));
    } else if (tag == "joint") {
      UrdfJoint j;
      j.name = node.get<std::string>("<xmlattr>.name", "");
      j.type = node.get<std::string>("<xmlattr>.type", "");
      j.parent = node.get<std::string>("parent.<xmlattr>.link", "");
      j.child = node.get<std::string>("child.<xmlattr>.link", "");
      if (j.name.empty() || j.type.empty() || j.parent.empty() || j.child.empty()) {
        malformed("joint '" + j.name + "' lacks name, type, parent or child");
      }
      j.origin = parse_origin(node);
      if (auto axis = node.get_optional<std::string>("axis.<xmlattr>.xyz")) j.axis = parse_vec3(*axis, "axis");
      if (auto limit = node.get_child_optional("limit")) {
        auto lo = limit->get_optional<std::string>("<xmlattr>.lower");
        auto hi = limit->get_optional<std::string>("<xmlattr>.upper");
        if (lo && hi) j.limits = std::make_pair(parse_number(*lo, "limit lower"), parse_number(*hi, "limit upper"));
      }
      out.joints.push_back(std::move(j));
    }
  }
  if (out.links.empty()) malformed("articulation document has no links");
  return out;
}

struct SemanticsEntry {
  std::string link;
  std::string joint_kind;
  std::string label;
  std::optional<Vec3> contact;
  int line = 0;
};

std::vector<SemanticsEntry> parse_semantics(const std::string& text) {
  std::vector<SemanticsEntry> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() != 3 && tok.size() != 6) {
      malformed("semantics line " + std::to_string(lineno) + ": expected 3 or 6 fields");
    }
    SemanticsEntry e{tok[0], tok[1], tok[2], std::nullopt, lineno};
    if (tok.size() == 6) {
      e.contact = Vec3(parse_number(tok[3], "contact x"), parse_number(tok[4], "contact y"),
                       parse_number(tok[5], "contact z"));
    }
    out.push_back(std::move(e));
  }
  return out;
}

bool is_static_kind(const std::string& k) { return k == "static" || k == "fixed" || k == "free" || k == "heavy"; }

std::optional<JointKind> movable_kind(const std::string& urdf_type) {
  if (urdf_type == "revolute" || urdf_type == "continuous") return JointKind::revolute;
  if (urdf_type == "prismatic") return JointKind::prismatic;
  return std::nullopt;
}

Aabb transformed_box(const Eigen::Isometry3d& pose, const Vec3& size) {
  Aabb local;
  local.extend(Vec3(-size / 2));
  local.extend(Vec3(size / 2));
  Aabb out;
  for (const auto& c : local.corners()) out.extend(pose * c);
  return out;
}

}  // namespace

ApplianceModel load_appliance_model(const ModelSources& sources) {
  const Urdf urdf = parse_urdf(sources.articulation_xml);
  const auto semantics = parse_semantics(sources.semantics);

  ApplianceModel model;
  model.model_id = sources.model_id.empty() ? urdf.name : sources.model_id;
  if (model.model_id.empty()) malformed("model has no id");

  const std::string cat_label = sources.category.value_or(urdf.category.value_or(""));
  auto category = category_from_string(cat_label);
  if (!category) malformed("unknown or missing appliance category '" + cat_label + "'");
  model.category = *category;

  // Resolve link poses through the tree.
  std::map<std::string, const UrdfJoint*> joint_by_child;
  for (const auto& j : urdf.joints) {
    if (!urdf.links.count(j.parent) || !urdf.links.count(j.child)) {
      malformed("joint '" + j.name + "' references an unknown link");
    }
    if (!joint_by_child.emplace(j.child, &j).second) malformed("link '" + j.child + "' has two parent joints");
  }
  std::map<std::string, Eigen::Isometry3d> link_pose;
  std::function<Eigen::Isometry3d(const std::string&, int)> pose_of = [&](const std::string& link, int depth) {
    if (depth > static_cast<int>(urdf.links.size())) malformed("kinematic tree contains a cycle");
    if (auto it = link_pose.find(link); it != link_pose.end()) return it->second;
    Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
    if (auto it = joint_by_child.find(link); it != joint_by_child.end()) {
      pose = pose_of(it->second->parent, depth + 1) * it->second->origin;
    }
    link_pose[link] = pose;
    return pose;
  };
  for (const auto& [name, link] : urdf.links) pose_of(name, 0);

  auto link_bounds = [&](const UrdfLink& link, std::string& ref) {
    Aabb bounds;
    for (const auto& v : link.visuals) {
      if (!ref.empty()) ref += ";";
      ref += v.ref;
      if (v.box_size) bounds.extend(transformed_box(link_pose.at(link.name) * v.origin, *v.box_size));
    }
    return bounds;
  };

  std::set<std::string> part_links;
  for (const auto& e : semantics) {
    if (is_static_kind(e.joint_kind)) continue;
    if (e.joint_kind != "hinge" && e.joint_kind != "slider" && !movable_kind(e.joint_kind)) {
      malformed("semantics line " + std::to_string(e.line) + ": unknown joint kind '" + e.joint_kind + "'");
    }
    auto type = part_type_from_string(e.label);
    if (!type) throw Error(Errc::unknown_part_type, "semantics label '" + e.label + "' on link " + e.link);

    auto link_it = urdf.links.find(e.link);
    auto joint_it = joint_by_child.find(e.link);
    if (link_it == urdf.links.end() || joint_it == joint_by_child.end()) {
      throw Error(Errc::dangling_joint_ref, "semantic part '" + e.link + "' has no link with a joint");
    }
    const UrdfJoint& uj = *joint_it->second;
    auto kind = movable_kind(uj.type);
    if (!kind) throw Error(Errc::dangling_joint_ref, "semantic part '" + e.link + "' is attached by a " + uj.type + " joint");
    const bool want_revolute = e.joint_kind == "hinge" || e.joint_kind == "revolute" || e.joint_kind == "continuous";
    if (want_revolute != (*kind == JointKind::revolute)) {
      malformed("semantics joint kind '" + e.joint_kind + "' disagrees with joint '" + uj.name + "' (" + uj.type + ")");
    }
    if (!part_links.insert(e.link).second) malformed("duplicate semantic part '" + e.link + "'");

    JointSpec joint;
    joint.joint_id = uj.name;
    joint.kind = *kind;
    const Eigen::Isometry3d& child_pose = link_pose.at(e.link);
    const double axis_norm = uj.axis.norm();
    if (axis_norm < 1e-12) malformed("joint '" + uj.name + "' has a zero axis");
    joint.axis = (child_pose.linear() * (uj.axis / axis_norm)).normalized();
    joint.origin = child_pose.translation();
    if (uj.type == "continuous") {
      joint.limit_lo = 0.0;
      joint.limit_hi = 2.0 * kPi;
    } else {
      if (!uj.limits) malformed("joint '" + uj.name + "' has no limits");
      joint.limit_lo = uj.limits->first;
      joint.limit_hi = uj.limits->second;
    }
    if (!(joint.limit_lo < joint.limit_hi)) malformed("joint '" + uj.name + "' needs lower < upper");

    PartSpec part;
    part.part_id = e.link;
    part.part_type = *type;
    part.joint_id = joint.joint_id;
    part.bounds = link_bounds(link_it->second, part.geometry_ref);
    if (e.contact) {
      part.contact_point = *e.contact;
    } else if (!part.bounds.empty()) {
      part.contact_point = part.bounds.center();
    } else {
      malformed("part '" + part.part_id + "' has neither a contact point nor box geometry");
    }
    if (!part.bounds.empty() && !part.bounds.expanded(0.05).contains(part.contact_point)) {
      malformed("contact point of '" + part.part_id + "' lies outside its bounding box");
    }
    if (joint.kind == JointKind::revolute && lever_arm(part, joint) < kOnAxisTolerance) {
      malformed("contact point of '" + part.part_id + "' lies on its joint axis");
    }

    model.parts.push_back(std::move(part));
    if (!model.find_joint(joint.joint_id)) model.joints.push_back(std::move(joint));
  }
  if (model.parts.empty()) malformed("model '" + model.model_id + "' has no manipulable parts");

  for (const auto& [name, link] : urdf.links) {
    if (part_links.count(name)) continue;
    std::string ignored;
    Aabb b = link_bounds(link, ignored);
    if (!b.empty()) model.body_boxes.push_back(b);
  }
  return model;
}

ModelSources read_model_sources(const std::filesystem::path& dir) {
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(Errc::malformed_document, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  ModelSources src;
  src.model_id = dir.filename().string();
  src.articulation_xml = slurp(dir / "mobility.urdf");
  src.semantics = slurp(dir / "semantics.txt");
  if (std::filesystem::exists(dir / "meta.json")) {
    try {
      const auto meta = nlohmann::json::parse(slurp(dir / "meta.json"));
      if (meta.contains("model_cat")) src.category = meta.at("model_cat").get<std::string>();
      if (meta.contains("model_id")) src.model_id = meta.at("model_id").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::malformed_document, "meta.json: " + std::string(e.what()));
    }
  }
  return src;
}

}  // namespace manualkit
