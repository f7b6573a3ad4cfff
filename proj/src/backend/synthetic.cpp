#include "manualkit/backend/synthetic.hpp"

#include "manualkit/core/error.hpp"
#include "manualkit/manualgen/templates.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace manualkit {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

const std::map<std::string, std::vector<std::string>>& name_pool() {
  static const std::map<std::string, std::vector<std::string>> pool = {
      {"button",
       {"Start Button", "Stop Button", "Power Button", "Defrost Button", "Reheat Button", "Light Button", "Timer Button",
        "Child Lock Button", "Quick Start Button", "Pause Button", "Cancel Button", "Mode Button"}},
      {"knob", {"Timer Knob", "Temperature Knob", "Power Level Knob", "Mode Knob", "Program Knob", "Spin Speed Knob", "Fan Knob"}},
      {"lever", {"Brew Strength Lever", "Release Lever", "Lock Lever", "Steam Lever"}},
      {"slider", {"Level Slider", "Speed Slider", "Fan Slider"}},
      {"door", {"Front Door", "Main Door", "Glass Door"}},
      {"lid", {"Top Lid", "Water Tank Lid", "Bean Hopper Lid"}},
      {"container", {"Water Tank", "Storage Bin", "Filter Basket"}},
      {"drawer", {"Detergent Drawer", "Crumb Drawer", "Storage Drawer"}},
      {"screen", {"Display Screen", "Touch Screen"}},
      {"handle", {"Door Handle", "Side Handle"}},
      {"switch", {"Power Switch", "Mode Switch"}},
      {"tray", {"Paper Tray", "Drip Tray"}},
  };
  return pool;
}

std::string synth_names(const json& ctx, std::mt19937_64& rng, bool duplicate) {
  std::set<std::string> used;
  std::ostringstream os;
  for (const auto& p : ctx.at("parts")) {
    const std::string type = p.at("part_type").get<std::string>();
    std::vector<std::string> options;
    auto it = name_pool().find(type);
    if (it != name_pool().end()) options = it->second;
    std::shuffle(options.begin(), options.end(), rng);
    std::string name;
    for (const auto& o : options) {
      if (!used.count(o)) {
        name = o;
        break;
      }
    }
    if (name.empty()) {
      std::string base = type;
      base[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(base[0])));
      for (int k = 2; name.empty() || used.count(name); ++k) name = base + " " + std::to_string(k);
    }
    if (duplicate) name = "Control";
    used.insert(name);
    os << p.at("label").get<std::string>() << ": " << name << "\n";
  }
  return os.str();
}

// "Temperature Knob" -> "temperature"
std::string function_stem(const std::string& name, const std::string& part_type) {
  std::string l = lower(name);
  const std::string suffix = " " + lower(part_type);
  if (l.size() > suffix.size() && l.compare(l.size() - suffix.size(), suffix.size(), suffix) == 0) {
    l.erase(l.size() - suffix.size());
  }
  return l;
}

std::string describe(const std::string& name, const std::string& part_type, const std::string& label) {
  const std::string stem = function_stem(name, part_type);
  const std::string l = lower(label);
  if (l == "open") return "Opens the " + lower(name);
  if (l == "close") return "Closes the " + lower(name);
  if (l == "slide forward") return "Extends the " + lower(name);
  if (l == "slide backward") return "Retracts the " + lower(name);
  std::istringstream is(l);
  std::string verb;
  double amount = 0;
  is >> verb >> amount;
  if (verb == "push") {
    const int k = static_cast<int>(amount);
    if (k == 1) return "Activates the " + stem + " function";
    return "Selects " + stem + " option " + std::to_string(k);
  }
  const int level = std::max(1, static_cast<int>(amount / 60.0 + 0.5));
  return "Sets the " + stem + " to level " + std::to_string(level);
}

std::string synth_states(const json& ctx) {
  std::ostringstream os;
  for (const auto& p : ctx.at("parts")) {
    const std::string name = p.at("function_name").get<std::string>();
    const std::string type = p.at("part_type").get<std::string>();
    for (const auto& s : p.at("states")) {
      const std::string label = s.get<std::string>();
      os << name << ", " << label << ": " << describe(name, type, label) << "\n";
    }
  }
  return os.str();
}

// Imperative form of a generated description: "Opens the door" -> "open the door".
std::string imperative(const std::string& description) {
  std::string out = lower(description);
  const auto sp = out.find(' ');
  if (sp != std::string::npos && sp > 1 && out[sp - 1] == 's') out.erase(sp - 1, 1);
  return out;
}

struct TaskPart {
  std::string name;
  std::string type;
  bool openable = false;
  bool prismatic = false;
  std::vector<std::pair<std::string, std::string>> states;  // (label, description)
};

std::string synth_task(const json& ctx, std::mt19937_64& rng) {
  std::vector<TaskPart> parts;
  for (const auto& p : ctx.at("parts")) {
    TaskPart tp;
    tp.name = p.at("function_name").get<std::string>();
    tp.type = p.at("part_type").get<std::string>();
    tp.openable = p.value("openable", false);
    tp.prismatic = p.value("prismatic", false);
    for (const auto& s : p.at("states")) {
      tp.states.emplace_back(s.at("label").get<std::string>(), s.value("description", std::string{}));
    }
    if (!tp.states.empty()) parts.push_back(std::move(tp));
  }
  if (parts.empty()) return "There is nothing to operate.";
  std::set<std::string> existing;
  for (const auto& e : ctx.value("existing_instructions", json::array())) existing.insert(lower(e.get<std::string>()));
  const bool long_horizon = ctx.value("horizon", std::string("short")) == "long";
  const int max_steps = std::clamp(ctx.value("max_steps", 18), 1, 18);

  for (int draw = 0; draw < 200; ++draw) {
    const int lo = long_horizon ? 4 : 1;
    const int hi = std::min(max_steps, long_horizon ? 8 : 3);
    const int want = std::uniform_int_distribution<int>(std::min(lo, hi), hi)(rng);
    // Label-level simulation: each part's last settled label, so no step is a no-op.
    std::map<std::string, std::string> current;
    for (const auto& p : parts) {
      if (p.openable) current[p.name] = "Close";
      else if (p.prismatic && p.type != "button") current[p.name] = "Slide backward";
    }
    std::vector<std::pair<const TaskPart*, std::size_t>> steps;
    for (int i = 0; i < want; ++i) {
      std::vector<std::pair<const TaskPart*, std::size_t>> options;
      for (const auto& p : parts) {
        for (std::size_t s = 0; s < p.states.size(); ++s) {
          const std::string& label = p.states[s].first;
          if (current.count(p.name) && current[p.name] == label) continue;
          if (!steps.empty() && steps.back().first == &p && steps.back().second == s) continue;
          options.emplace_back(&p, s);
        }
      }
      if (options.empty()) break;
      auto pick = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
      steps.push_back(pick);
      if (pick.first->type != "button") current[pick.first->name] = pick.first->states[pick.second].first;
    }
    if (steps.empty()) continue;
    std::string instruction;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto& [part, s] = steps[i];
      std::string d = part->states[s].second.empty()
                          ? lower(part->states[s].first) + " the " + lower(part->name)
                          : imperative(part->states[s].second);
      if (i == 0) {
        d[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(d[0])));
        instruction = d;
      } else {
        instruction += (i + 1 == steps.size() ? ", and finally " : ", then ") + d;
      }
    }
    if (existing.count(lower(instruction))) continue;
    std::ostringstream os;
    os << "Task: " << instruction << "\n";
    for (std::size_t i = 0; i < steps.size(); ++i) {
      os << i + 1 << ". " << steps[i].first->name << ", " << steps[i].first->states[steps[i].second].first << "\n";
    }
    return os.str();
  }
  return "I could not come up with a new task.";
}

}  // namespace

std::string SyntheticBackend::complete(const BackendRequest& request) {
  std::uint64_t s = splitmix(request.seed ^ splitmix(static_cast<std::uint64_t>(request.capability) + 1));
  s = splitmix(s + static_cast<std::uint64_t>(request.attempt));
  std::mt19937_64 rng(s);
  if (faults_.malformed_rate > 0.0 && std::bernoulli_distribution(std::min(1.0, faults_.malformed_rate))(rng)) {
    if (request.capability == Capability::latex_from_context) {
      return "Sure! Here is the section:\n\\section{Overview\nThe \\textbf{appliance is easy to use.\n";
    }
    return "Sure! Here is what I came up with, described in prose rather than the requested format.";
  }
  try {
    switch (request.capability) {
      case Capability::names_from_image: return synth_names(request.context, rng, faults_.duplicate_names);
      case Capability::states_from_text: return synth_states(request.context);
      case Capability::task_from_text: return synth_task(request.context, rng);
      case Capability::latex_from_context: return synthetic_section_latex(request.context, s);
      default: break;
    }
  } catch (const json::exception& e) {
    throw Error(Errc::backend_unavailable, std::string("synthetic backend: bad request context: ") + e.what());
  }
  throw Error(Errc::backend_unavailable,
              "synthetic backend does not serve " + std::string(to_string(request.capability)));
}

std::string RoutingBackend::complete(const BackendRequest& request) {
  auto it = routes_.find(request.capability);
  if (it != routes_.end()) return it->second->complete(request);
  if (!fallback_) throw Error(Errc::backend_unavailable, "no backend routed for " + std::string(to_string(request.capability)));
  return fallback_->complete(request);
}

std::string RoutingBackend::name() const {
  std::string out = "routing(" + (fallback_ ? fallback_->name() : std::string("none"));
  for (const auto& [cap, b] : routes_) out += ", " + std::string(to_string(cap)) + "=" + b->name();
  return out + ")";
}

bool RoutingBackend::deterministic() const {
  if (fallback_ && !fallback_->deterministic()) return false;
  return std::all_of(routes_.begin(), routes_.end(), [](const auto& r) { return r.second->deterministic(); });
}

}  // namespace manualkit
