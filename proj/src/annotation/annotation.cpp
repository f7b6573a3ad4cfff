#include "manualkit/annotation/annotation.hpp"

#include "manualkit/core/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <sstream>

namespace manualkit {

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

// Strips markdown emphasis and quotes LLMs like to wrap names in.
std::string clean_name(std::string s) {
  s = trim(std::move(s));
  while (!s.empty() && (s.front() == '*' || s.front() == '"' || s.front() == '\'' || s.front() == '`')) s.erase(0, 1);
  while (!s.empty() && (s.back() == '*' || s.back() == '"' || s.back() == '\'' || s.back() == '`' || s.back() == '.'))
    s.pop_back();
  return trim(s);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string names_prompt_text(const ApplianceModel& model, const OverviewPrompt& overview) {
  std::ostringstream os;
  os << "Appliance category: " << to_string(model.category) << "\n";
  os << "The attached overview figure marks every manipulable part with an ID label.\n";
  for (const auto& [label, part_id] : overview.id_labels) {
    os << "ID " << label << ": a " << to_string(model.part(part_id).part_type) << "\n";
  }
  os << "Give each ID a concise function name (no commas), one per line as `ID: Name`.";
  return os.str();
}

std::string states_prompt_text(const ApplianceModel& model, const FunctionAnnotation& names, const SampledStates& sampled) {
  std::ostringstream os;
  os << "Appliance category: " << to_string(model.category) << "\n";
  os << "For every part state below, describe the concrete function it triggers.\n";
  for (const auto& part : model.parts) {
    auto it = sampled.find(part.part_id);
    if (it == sampled.end()) continue;
    for (const auto& s : it->second) os << names.at(part.part_id) << ", " << format_state(s) << "\n";
  }
  os << "Answer one line per state as `Name, State: Description`.";
  return os.str();
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL + salt * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : salt) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return mix_seed(seed, h);
}

std::string_view to_string(ReviewStatus status) {
  switch (status) {
    case ReviewStatus::pending: return "pending";
    case ReviewStatus::approved: return "approved";
    case ReviewStatus::revised: return "revised";
  }
  return "pending";
}

ReviewStatus review_status_from_string(std::string_view text) {
  if (text == "approved") return ReviewStatus::approved;
  if (text == "revised") return ReviewStatus::revised;
  if (text == "pending") return ReviewStatus::pending;
  throw Error(Errc::malformed_document, "unknown review status '" + std::string(text) + "'");
}

std::string ApplianceInstance::part_for_name(std::string_view name) const {
  for (const auto& [part, n] : function_annotation) {
    if (n == name) return part;
  }
  return {};
}

json to_json(const ApplianceInstance& instance) {
  json states = json::object();
  for (const auto& [part, entries] : instance.state_annotation) {
    json list = json::array();
    for (const auto& e : entries) list.push_back({{"label", e.label}, {"description", e.description}});
    states[part] = list;
  }
  return {{"instance_id", instance.instance_id},
          {"model_id", instance.model_id},
          {"function_annotation", instance.function_annotation},
          {"state_annotation", states},
          {"review_status", to_string(instance.review_status)},
          {"seed", instance.seed},
          {"name_regen_count", instance.name_regen_count},
          {"state_regen_count", instance.state_regen_count}};
}

ApplianceInstance instance_from_json(const json& j) {
  try {
    ApplianceInstance inst;
    inst.instance_id = j.at("instance_id").get<std::string>();
    inst.model_id = j.at("model_id").get<std::string>();
    inst.function_annotation = j.at("function_annotation").get<FunctionAnnotation>();
    for (const auto& [part, list] : j.at("state_annotation").items()) {
      auto& entries = inst.state_annotation[part];
      for (const auto& e : list) entries.push_back({e.at("label").get<std::string>(), e.at("description").get<std::string>()});
    }
    inst.review_status = review_status_from_string(j.value("review_status", "pending"));
    inst.seed = j.value("seed", std::uint64_t{0});
    inst.name_regen_count = j.value("name_regen_count", 0);
    inst.state_regen_count = j.value("state_regen_count", 0);
    return inst;
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_document, std::string("instance manifest: ") + e.what());
  }
}

std::vector<StateLabel> sample_part_states(const ApplianceModel& model, const PartSpec& part, std::uint64_t seed,
                                           const AnnotationConfig& config) {
  const JointSpec* joint = model.find_joint(part.joint_id);
  if (!joint) throw Error(Errc::precondition_violated, "part " + part.part_id + " has no joint");
  std::mt19937_64 rng(mix_seed(seed, part.part_id));
  std::vector<StateLabel> out;

  if (part.part_type == PartType::button) {
    if (config.push_min < 1 || config.push_max < config.push_min) {
      throw Error(Errc::precondition_violated, "push range must satisfy 1 <= min <= max");
    }
    std::vector<int> counts(config.push_max - config.push_min + 1);
    std::iota(counts.begin(), counts.end(), config.push_min);
    std::shuffle(counts.begin(), counts.end(), rng);
    const auto keep = std::uniform_int_distribution<std::size_t>(1, counts.size())(rng);
    counts.resize(keep);
    std::sort(counts.begin(), counts.end());
    for (int c : counts) out.push_back(StateLabel::push(c));
  } else if (is_openable(part.part_type)) {
    out = {StateLabel::open(), StateLabel::close()};
  } else if (joint->kind == JointKind::revolute) {
    const double range_deg = rad2deg(joint->limit_hi - joint->rest_value());
    const int steps = static_cast<int>(std::floor(range_deg / 60.0 + 1e-6));
    if (steps < 1) {
      // Too little travel for a 60 degree step: one label at mid-range.
      const double mid = std::max(10.0, std::round(range_deg / 2.0 / 10.0) * 10.0);
      out.push_back(StateLabel::rotate(std::min(mid, std::floor(range_deg / 10.0) * 10.0)));
    } else {
      std::vector<int> multiples(steps);
      std::iota(multiples.begin(), multiples.end(), 1);
      const int lo = std::min(2, steps);
      const int count = std::uniform_int_distribution<int>(lo, steps)(rng);
      std::shuffle(multiples.begin(), multiples.end(), rng);
      multiples.resize(count);
      std::sort(multiples.begin(), multiples.end());
      for (int k : multiples) out.push_back(StateLabel::rotate(60.0 * k));
    }
  } else {
    out = {StateLabel{StateLabel::Kind::slide_forward, 0, 0.0}, StateLabel{StateLabel::Kind::slide_backward, 0, 0.0}};
  }
  return out;
}

OverviewPrompt numbered_overview(const ApplianceModel& model, std::string image_ref) {
  OverviewPrompt out{std::move(image_ref), {}};
  for (std::size_t i = 0; i < model.parts.size(); ++i) out.id_labels.emplace_back(std::to_string(i + 1), model.parts[i].part_id);
  return out;
}

std::optional<FunctionAnnotation> parse_function_names(const std::string& text, const ApplianceModel& model,
                                                       const OverviewPrompt& overview, std::string& why) {
  static const std::regex line_re(R"(^\s*(?:[-*]\s*)?(?:ID\s*)?([A-Za-z0-9_]+)\s*(?::|–|—|-|\.|\))\s*(.+?)\s*$)",
                                  std::regex::icase);
  std::map<std::string, std::string> by_label;
  for (const auto& [label, part] : overview.id_labels) by_label[lower(label)] = part;
  for (const auto& p : model.parts) by_label.emplace(lower(p.part_id), p.part_id);

  FunctionAnnotation out;
  std::set<std::string> seen_names;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    auto it = by_label.find(lower(m[1].str()));
    if (it == by_label.end()) {
      why = "unknown part ID '" + m[1].str() + "'";
      return std::nullopt;
    }
    const std::string name = clean_name(m[2].str());
    if (name.empty()) {
      why = "empty name for ID " + m[1].str();
      return std::nullopt;
    }
    if (name.find(',') != std::string::npos) {
      why = "name '" + name + "' contains a comma";
      return std::nullopt;
    }
    if (out.count(it->second)) {
      why = "part " + it->second + " named twice";
      return std::nullopt;
    }
    if (!seen_names.insert(lower(name)).second) {
      why = "name collision on '" + name + "'";
      return std::nullopt;
    }
    out[it->second] = name;
  }
  if (out.size() != model.parts.size()) {
    why = "annotated " + std::to_string(out.size()) + " parts, model has " + std::to_string(model.parts.size());
    return std::nullopt;
  }
  return out;
}

NamesResult annotate_function_names(const ApplianceModel& model, const OverviewPrompt& overview,
                                    BackendDispatcher& backend, std::uint64_t seed, const AnnotationConfig& config) {
  if (overview.id_labels.size() != model.parts.size()) {
    throw Error(Errc::precondition_violated, "overview must label every manipulable part");
  }
  BackendRequest req;
  req.capability = Capability::names_from_image;
  req.role_prompt = "You are an appliance designer naming the controls of a household appliance.";
  req.text = names_prompt_text(model, overview);
  req.seed = seed;
  if (!overview.image_ref.empty()) req.image_refs.push_back(overview.image_ref);
  json parts = json::array();
  for (const auto& [label, part_id] : overview.id_labels) {
    parts.push_back({{"label", label}, {"part_id", part_id}, {"part_type", to_string(model.part(part_id).part_type)}});
  }
  req.context = {{"category", to_string(model.category)}, {"parts", parts}};

  auto result = call_with_regeneration<FunctionAnnotation>(
      backend, req, config.max_regen, [&](const std::string& out, std::string& why) {
        return parse_function_names(out, model, overview, why);
      });
  return {std::move(result.value), result.regen_count};
}

std::optional<StateAnnotation> parse_state_descriptions(const std::string& text, const FunctionAnnotation& names,
                                                        const SampledStates& sampled, std::string& why) {
  static const std::regex line_re(
      R"(^\s*(?:[-*]\s*)?(?:\d+\s*(?::|–|—|-|\.|\))\s*)?([^,]+?)\s*,\s*(.+?)\s*(?::|\s–\s|\s—\s|\s-\s)\s*(.+?)\s*$)");
  std::map<std::string, std::string> part_by_name;
  for (const auto& [part, name] : names) part_by_name[lower(name)] = part;

  std::map<std::string, std::map<std::string, std::string>> found;  // part -> canonical label -> description
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    auto part_it = part_by_name.find(lower(clean_name(m[1].str())));
    if (part_it == part_by_name.end()) continue;
    auto label = parse_state(m[2].str());
    if (!label) continue;
    const std::string description = clean_name(m[3].str());
    if (description.empty()) continue;
    found[part_it->second].emplace(format_state(*label), description);
  }

  StateAnnotation out;
  for (const auto& [part, labels] : sampled) {
    auto& entries = out[part];
    for (const auto& label : labels) {
      const std::string canonical = format_state(label);
      auto pit = found.find(part);
      if (pit == found.end() || !pit->second.count(canonical)) {
        why = "missing description for " + names.at(part) + ", " + canonical;
        return std::nullopt;
      }
      entries.push_back({canonical, pit->second.at(canonical)});
    }
  }
  return out;
}

StatesResult annotate_function_states(const ApplianceModel& model, const FunctionAnnotation& names,
                                      const SampledStates& sampled, BackendDispatcher& backend, std::uint64_t seed,
                                      const AnnotationConfig& config) {
  if (sampled.empty()) throw Error(Errc::precondition_violated, "no sampled states to describe");
  for (const auto& part : model.parts) {
    if (!names.count(part.part_id)) throw Error(Errc::precondition_violated, "part " + part.part_id + " has no name");
    auto it = sampled.find(part.part_id);
    if (it == sampled.end() || it->second.empty()) {
      throw Error(Errc::precondition_violated, "part " + part.part_id + " has no sampled states");
    }
  }
  BackendRequest req;
  req.capability = Capability::states_from_text;
  req.role_prompt = "You are an appliance designer defining what each control setting does.";
  req.text = states_prompt_text(model, names, sampled);
  req.seed = seed;
  json parts = json::array();
  for (const auto& part : model.parts) {
    json states = json::array();
    for (const auto& s : sampled.at(part.part_id)) states.push_back(format_state(s));
    parts.push_back({{"part_id", part.part_id},
                     {"function_name", names.at(part.part_id)},
                     {"part_type", to_string(part.part_type)},
                     {"states", states}});
  }
  req.context = {{"category", to_string(model.category)}, {"parts", parts}};

  auto result = call_with_regeneration<StateAnnotation>(
      backend, req, config.max_regen,
      [&](const std::string& out, std::string& why) { return parse_state_descriptions(out, names, sampled, why); });
  return {std::move(result.value), result.regen_count};
}

std::vector<ApplianceInstance> create_instances(const ApplianceModel& model, int n, const OverviewPrompt& overview,
                                                BackendDispatcher& backend, std::uint64_t seed,
                                                const AnnotationConfig& config) {
  if (n < 1) throw Error(Errc::precondition_violated, "need at least one instance");
  std::vector<ApplianceInstance> out(n);
  std::exception_ptr failure;
  // Each instance is an independent annotation pass; the dispatcher bounds
  // backend concurrency.
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(i) + 1);
      ApplianceInstance inst;
      inst.instance_id = model.model_id + "_inst" + std::to_string(i + 1);
      inst.model_id = model.model_id;
      inst.seed = s;
      auto names = annotate_function_names(model, overview, backend, s, config);
      inst.function_annotation = std::move(names.names);
      inst.name_regen_count = names.regen_count;
      SampledStates sampled;
      for (const auto& part : model.parts) sampled[part.part_id] = sample_part_states(model, part, s, config);
      auto states = annotate_function_states(model, inst.function_annotation, sampled, backend, s, config);
      inst.state_annotation = std::move(states.states);
      inst.state_regen_count = states.regen_count;
      out[i] = std::move(inst);
    } catch (...) {
#pragma omp critical(manualkit_create_instances)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace manualkit
