#include "manualkit/service/review.hpp"

#include "manualkit/annotation/annotation.hpp"
#include "manualkit/core/error.hpp"
#include "manualkit/image/io.hpp"
#include "manualkit/planner/planner.hpp"
#include "manualkit/taskgen/taskgen.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace manualkit {

namespace fs = std::filesystem;

std::string_view to_string(ReviewKind kind) {
  switch (kind) {
    case ReviewKind::function_annotation: return "function_annotation";
    case ReviewKind::task: return "task";
    case ReviewKind::figure: return "figure";
  }
  return "";
}

ReviewKind review_kind_from_string(std::string_view text) {
  for (ReviewKind k : {ReviewKind::function_annotation, ReviewKind::task, ReviewKind::figure}) {
    if (to_string(k) == text) return k;
  }
  throw Error(Errc::validation_error, "unknown review kind '" + std::string(text) + "'");
}

std::string_view to_string(ItemStatus status) {
  switch (status) {
    case ItemStatus::pending: return "pending";
    case ItemStatus::approved: return "approved";
    case ItemStatus::revised: return "revised";
    case ItemStatus::regenerate_requested: return "regenerate_requested";
  }
  return "";
}

namespace {

ItemStatus item_status_from_string(std::string_view text) {
  for (ItemStatus s : {ItemStatus::pending, ItemStatus::approved, ItemStatus::revised, ItemStatus::regenerate_requested}) {
    if (to_string(s) == text) return s;
  }
  throw Error(Errc::validation_error, "unknown item status '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(Decision decision) {
  switch (decision) {
    case Decision::approve: return "approve";
    case Decision::revise: return "revise";
    case Decision::regenerate: return "regenerate";
  }
  return "";
}

Decision decision_from_string(std::string_view text) {
  for (Decision d : {Decision::approve, Decision::revise, Decision::regenerate}) {
    if (to_string(d) == text) return d;
  }
  throw Error(Errc::validation_error, "unknown decision '" + std::string(text) + "'");
}

json to_json(const ReviewItem& item) {
  return {{"item_id", item.item_id},
          {"kind", to_string(item.kind)},
          {"target_id", item.target_id},
          {"instance_id", item.instance_id},
          {"payload", item.payload},
          {"status", to_string(item.status)},
          {"reviewer_note", item.reviewer_note},
          {"seed", item.seed},
          {"generation", item.generation},
          {"superseded_by", item.superseded_by}};
}

ReviewItem review_item_from_json(const json& j) {
  ReviewItem item;
  item.item_id = j.at("item_id").get<std::string>();
  item.kind = review_kind_from_string(j.at("kind").get<std::string>());
  item.target_id = j.at("target_id").get<std::string>();
  item.instance_id = j.at("instance_id").get<std::string>();
  item.payload = j.at("payload");
  item.status = item_status_from_string(j.at("status").get<std::string>());
  item.reviewer_note = j.value("reviewer_note", "");
  item.seed = j.value("seed", std::uint64_t{0});
  item.generation = j.value("generation", 1);
  item.superseded_by = j.value("superseded_by", "");
  return item;
}

// ---- queue ------------------------------------------------------------------

namespace {

std::string item_id_for(ReviewKind kind, const std::string& target, int generation) {
  std::string id = std::string(to_string(kind)) + ":" + target;
  if (generation > 1) id += "@" + std::to_string(generation);
  return id;
}

json annotation_payload(const ApplianceInstance& inst) {
  const json j = to_json(inst);
  return {{"function_annotation", j.at("function_annotation")}, {"state_annotation", j.at("state_annotation")}};
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Names must cover the model's parts with unique, comma-free text; every
// state must parse and suit its part.
void validate_annotation(const ApplianceModel& model, const ApplianceInstance& inst) {
  std::set<std::string> seen;
  for (const auto& part : model.parts) {
    const auto it = inst.function_annotation.find(part.part_id);
    if (it == inst.function_annotation.end() || normalize_name(it->second).empty()) {
      throw Error(Errc::validation_error, "no function name for " + part.part_id);
    }
    if (it->second.find(',') != std::string::npos) throw Error(Errc::validation_error, "name contains a comma: " + it->second);
    if (!seen.insert(normalize_name(it->second)).second) {
      throw Error(Errc::validation_error, "duplicate function name: " + it->second);
    }
    const auto st = inst.state_annotation.find(part.part_id);
    if (st == inst.state_annotation.end() || st->second.empty()) {
      throw Error(Errc::validation_error, "no states for " + part.part_id);
    }
    for (const auto& e : st->second) {
      const auto label = parse_state(e.label);
      if (!label || !state_valid_for_part(model, part, *label)) {
        throw Error(Errc::validation_error, "state '" + e.label + "' does not suit " + part.part_id);
      }
      if (e.description.empty()) throw Error(Errc::validation_error, "empty description for " + part.part_id);
    }
  }
  if (inst.function_annotation.size() != model.parts.size()) {
    throw Error(Errc::validation_error, "names for parts the model does not have");
  }
}

void require_valid_task(const ManipulationTask& task, const ApplianceInstance& inst) {
  const auto violations = validate_task(task, inst);
  if (!violations.empty()) {
    throw Error(Errc::validation_error, "task " + task.task_id + " step " + std::to_string(violations.front().step_index) +
                                            ": " + violations.front().reason);
  }
}

Horizon horizon_of(const std::string& task_id) {
  const auto pos = task_id.rfind("_task");
  if (pos == std::string::npos) return Horizon::short_horizon;
  try {
    return std::stoi(task_id.substr(pos + 5)) % 2 == 1 ? Horizon::short_horizon : Horizon::long_horizon;
  } catch (const std::exception&) {
    return Horizon::short_horizon;
  }
}

bool same_slot(const FigureAsset& a, const FigureAsset& b) {
  return a.kind == b.kind && a.style == b.style && a.part_id == b.part_id && a.view == b.view &&
         a.guidance_strategy == b.guidance_strategy;
}

}  // namespace

ReviewQueue::ReviewQueue(Dataset& dataset, std::shared_ptr<Backend> backend, std::shared_ptr<Renderer> renderer,
                         std::shared_ptr<BackgroundBackend> background)
    : dataset_(dataset),
      backend_(std::make_shared<BackendDispatcher>(std::move(backend))),
      renderer_(renderer ? std::move(renderer) : std::make_shared<SchematicRenderer>()),
      background_(background ? std::move(background) : std::make_shared<FlatBackgroundBackend>()) {
  load();
}

void ReviewQueue::load() {
  items_.clear();
  const fs::path p = dataset_.review_dir() / "items.json";
  if (fs::exists(p)) {
    const json j = json::parse(read_text_file(p));
    for (const auto& e : j.at("items")) items_.push_back(review_item_from_json(e));
    audit_seq_ = j.value("audit_seq", 0);
  }
}

void ReviewQueue::save() const {
  json arr = json::array();
  for (const auto& i : items_) arr.push_back(to_json(i));
  write_text_file(dataset_.review_dir() / "items.json",
                  json{{"schema_version", kDatasetSchemaVersion}, {"audit_seq", audit_seq_}, {"items", arr}}.dump(2) + "\n");
}

ReviewItem& ReviewQueue::find(const std::string& item_id) {
  const auto it = std::find_if(items_.begin(), items_.end(), [&](const ReviewItem& i) { return i.item_id == item_id; });
  if (it == items_.end()) throw Error(Errc::not_found, "no review item " + item_id);
  return *it;
}

std::string ReviewQueue::add_item(ReviewKind kind, const std::string& target_id, const std::string& instance_id,
                                  const json& payload, std::uint64_t seed, int generation) {
  ReviewItem item;
  item.item_id = item_id_for(kind, target_id, generation);
  item.kind = kind;
  item.target_id = target_id;
  item.instance_id = instance_id;
  item.payload = payload;
  item.seed = seed;
  item.generation = generation;
  items_.push_back(item);
  return item.item_id;
}

std::vector<std::string> ReviewQueue::populate() {
  std::lock_guard lock(mutex_);
  std::set<std::pair<ReviewKind, std::string>> known;
  for (const auto& i : items_) known.insert({i.kind, i.target_id});
  std::vector<std::string> added;
  for (const auto& id : dataset_.instance_ids()) {
    const ApplianceInstance inst = dataset_.instance(id);
    if (!inst.approved() && !known.count({ReviewKind::function_annotation, id})) {
      added.push_back(add_item(ReviewKind::function_annotation, id, id, annotation_payload(inst), inst.seed, 1));
    }
    for (const auto& t : dataset_.tasks_for(id)) {
      if (t.review_status == ReviewStatus::pending && !known.count({ReviewKind::task, t.task_id})) {
        added.push_back(add_item(ReviewKind::task, t.task_id, id, to_json(t), mix_seed(inst.seed, t.task_id), 1));
      }
    }
    if (!dataset_.has_figures(id)) continue;
    for (const auto& f : dataset_.figures_for(id)) {
      if (f.review_status == ReviewStatus::pending && !known.count({ReviewKind::figure, f.asset_id})) {
        added.push_back(add_item(ReviewKind::figure, f.asset_id, id, to_json(f), mix_seed(inst.seed, f.asset_id), 1));
      }
    }
  }
  if (!added.empty()) save();
  return added;
}

std::vector<ReviewItem> ReviewQueue::list(std::optional<ReviewKind> kind, std::optional<ItemStatus> status) const {
  std::lock_guard lock(mutex_);
  std::vector<ReviewItem> out;
  for (const auto& i : items_) {
    if (kind && i.kind != *kind) continue;
    if (status && i.status != *status) continue;
    out.push_back(i);
  }
  return out;
}

ReviewItem ReviewQueue::get(const std::string& item_id) const {
  std::lock_guard lock(mutex_);
  return const_cast<ReviewQueue*>(this)->find(item_id);
}

DecisionOutcome ReviewQueue::decide(const std::string& item_id, const DecisionRequest& request) {
  std::lock_guard lock(mutex_);
  return apply(item_id, request, true);
}

DecisionOutcome ReviewQueue::apply(const std::string& item_id, const DecisionRequest& request, bool audit) {
  ReviewItem& item = find(item_id);
  if (item.status != ItemStatus::pending) {
    throw Error(Errc::conflict, item_id + " was already decided (" + std::string(to_string(item.status)) + ")");
  }
  DecisionOutcome out;
  switch (request.decision) {
    case Decision::approve: apply_approval(item); break;
    case Decision::revise: apply_revision(item, request.payload); break;
    case Decision::regenerate: out.created = regenerate(item); break;
  }
  // regenerate() may grow items_, so look the item up again.
  ReviewItem& decided = find(item_id);
  decided.reviewer_note = request.note;
  out.item = decided;
  out.instance_status = refresh_instance_status(decided.instance_id);
  if (audit) {
    json entry = {{"seq", ++audit_seq_},
                  {"time", utc_now()},
                  {"item_id", item_id},
                  {"decision", to_string(request.decision)},
                  {"note", request.note}};
    if (request.decision == Decision::revise) entry["payload"] = request.payload;
    if (out.created) entry["created_item"] = out.created->item_id;
    std::ofstream log(audit_path(), std::ios::app);
    log << entry.dump() << "\n";
    if (!log) throw Error(Errc::validation_error, "cannot append to " + audit_path().string());
  }
  save();
  return out;
}

void ReviewQueue::apply_approval(ReviewItem& item) {
  switch (item.kind) {
    case ReviewKind::function_annotation: break;  // the instance follows its items
    case ReviewKind::task: {
      ManipulationTask t = dataset_.task(item.target_id);
      t.review_status = ReviewStatus::approved;
      dataset_.put_task(t);
      break;
    }
    case ReviewKind::figure: {
      auto figures = dataset_.figures_for(item.instance_id);
      for (auto& f : figures) {
        if (f.asset_id == item.target_id) f.review_status = ReviewStatus::approved;
      }
      dataset_.put_figures(item.instance_id, figures);
      break;
    }
  }
  item.status = ItemStatus::approved;
}

void ReviewQueue::apply_revision(ReviewItem& item, const json& payload) {
  if (!payload.is_object()) throw Error(Errc::validation_error, "revise needs an object payload");
  try {
    switch (item.kind) {
      case ReviewKind::function_annotation: {
        ApplianceInstance inst = dataset_.instance(item.target_id);
        json j = to_json(inst);
        j["function_annotation"] = payload.at("function_annotation");
        j["state_annotation"] = payload.at("state_annotation");
        const ApplianceInstance revised = instance_from_json(j);
        validate_annotation(dataset_.model(inst.model_id), revised);
        for (const auto& t : dataset_.tasks_for(inst.instance_id)) require_valid_task(t, revised);
        dataset_.put_instance(revised);
        item.payload = annotation_payload(revised);
        break;
      }
      case ReviewKind::task: {
        const ManipulationTask stored = dataset_.task(item.target_id);
        json j = to_json(stored);
        for (const auto& [k, v] : payload.items()) j[k] = v;
        ManipulationTask revised = task_from_json(j);
        if (revised.task_id != stored.task_id || revised.instance_id != stored.instance_id) {
          throw Error(Errc::validation_error, "task_id and instance_id cannot change");
        }
        revised.in_manual = stored.in_manual;
        revised.review_status = ReviewStatus::revised;
        require_valid_task(revised, dataset_.instance(stored.instance_id));
        dataset_.put_task(revised);
        item.payload = to_json(revised);
        break;
      }
      case ReviewKind::figure: {
        auto figures = dataset_.figures_for(item.instance_id);
        auto it = std::find_if(figures.begin(), figures.end(),
                               [&](const FigureAsset& f) { return f.asset_id == item.target_id; });
        if (it == figures.end()) throw Error(Errc::not_found, "figure " + item.target_id + " is gone");
        json j = to_json(*it);
        for (const auto& [k, v] : payload.items()) j[k] = v;
        FigureAsset revised = figure_from_json(j);
        if (revised.asset_id != it->asset_id || revised.image_ref != it->image_ref || revised.kind != it->kind) {
          throw Error(Errc::validation_error, "asset_id, image_ref and kind cannot change");
        }
        revised.review_status = ReviewStatus::revised;
        revised.validate();
        *it = revised;
        dataset_.put_figures(item.instance_id, figures);
        item.payload = to_json(revised);
        break;
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::validation_error, std::string("bad payload: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::not_found) throw;
    throw Error(Errc::validation_error, e.what());
  }
  item.status = ItemStatus::revised;
}

ReviewItem ReviewQueue::regenerate(ReviewItem& item) {
  const std::uint64_t seed = item.seed + 1;
  const int generation = item.generation + 1;
  const std::string item_id = item.item_id;
  ApplianceInstance inst = dataset_.instance(item.instance_id);
  const ApplianceModel model = dataset_.model(inst.model_id);
  json payload;
  switch (item.kind) {
    case ReviewKind::function_annotation: {
      if (!dataset_.tasks_for(inst.instance_id).empty()) {
        throw Error(Errc::conflict, "instance " + inst.instance_id + " already has tasks built on its names");
      }
      auto names = annotate_function_names(model, numbered_overview(model), *backend_, seed);
      SampledStates sampled;
      for (const auto& part : model.parts) sampled[part.part_id] = sample_part_states(model, part, seed);
      auto states = annotate_function_states(model, names.names, sampled, *backend_, seed);
      inst.function_annotation = std::move(names.names);
      inst.state_annotation = std::move(states.states);
      inst.name_regen_count = names.regen_count;
      inst.state_regen_count = states.regen_count;
      inst.seed = seed;
      inst.review_status = ReviewStatus::pending;
      dataset_.put_instance(inst);
      payload = annotation_payload(inst);
      break;
    }
    case ReviewKind::task: {
      const ManipulationTask old = dataset_.task(item.target_id);
      std::vector<ManipulationTask> others;
      for (auto& t : dataset_.tasks_for(inst.instance_id)) {
        if (t.task_id != old.task_id) others.push_back(std::move(t));
      }
      ApplianceInstance approved = inst;
      approved.review_status = ReviewStatus::approved;  // tasks exist only for reviewed instances
      ManipulationTask fresh = propose_task(model, approved, others, *backend_, horizon_of(old.task_id), seed);
      fresh.task_id = old.task_id;
      fresh.in_manual = old.in_manual;
      fresh.review_status = ReviewStatus::pending;
      dataset_.put_task(fresh);
      payload = to_json(fresh);
      break;
    }
    case ReviewKind::figure: {
      auto figures = dataset_.figures_for(inst.instance_id);
      auto it = std::find_if(figures.begin(), figures.end(),
                             [&](const FigureAsset& f) { return f.asset_id == item.target_id; });
      if (it == figures.end()) throw Error(Errc::not_found, "figure " + item.target_id + " is gone");
      FigureConfig cfg;
      cfg.view_size = {it->width > 0 && it->kind != FigureKind::guidance ? it->width : cfg.view_size.width,
                       it->height > 0 && it->kind != FigureKind::guidance ? it->height : cfg.view_size.height};
      const auto fresh_set = build_instance_figures(model, inst, *renderer_, *background_, dataset_.figures_dir(), seed, cfg);
      const auto match = std::find_if(fresh_set.begin(), fresh_set.end(), [&](const FigureAsset& f) { return same_slot(f, *it); });
      if (match == fresh_set.end()) throw Error(Errc::validation_error, "regeneration produced no matching figure");
      FigureAsset fresh = *match;
      fresh.review_status = ReviewStatus::pending;
      *it = fresh;
      dataset_.put_figures(inst.instance_id, figures);
      payload = to_json(fresh);
      break;
    }
  }
  ReviewItem& old = find(item_id);
  old.status = ItemStatus::regenerate_requested;
  const std::string target = old.kind == ReviewKind::figure ? payload.at("asset_id").get<std::string>() : old.target_id;
  const ReviewKind kind = old.kind;
  const std::string instance_id = old.instance_id;
  const std::string created = add_item(kind, target, instance_id, payload, seed, generation);
  find(item_id).superseded_by = created;
  return find(created);
}

std::string ReviewQueue::refresh_instance_status(const std::string& instance_id) {
  ApplianceInstance inst = dataset_.instance(instance_id);
  bool any = false, all_done = true, any_revised = false;
  for (const auto& i : items_) {
    if (i.instance_id != instance_id || i.status == ItemStatus::regenerate_requested) continue;
    any = true;
    if (i.status == ItemStatus::pending) all_done = false;
    if (i.status == ItemStatus::revised) any_revised = true;
  }
  if (inst.review_status == ReviewStatus::pending && any && all_done) {
    inst.review_status = any_revised ? ReviewStatus::revised : ReviewStatus::approved;
    dataset_.put_instance(inst);
  }
  return std::string(to_string(inst.review_status));
}

void ReviewQueue::replay(const fs::path& audit_log) {
  std::lock_guard lock(mutex_);
  std::istringstream in(read_text_file(audit_log));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json e = json::parse(line);
    DecisionRequest req;
    req.decision = decision_from_string(e.at("decision").get<std::string>());
    req.payload = e.value("payload", json());
    req.note = e.value("note", "");
    // Items created by regeneration before this entry exist by now.
    if (std::none_of(items_.begin(), items_.end(), [&](const ReviewItem& i) { return i.item_id == e.at("item_id"); })) {
      throw Error(Errc::not_found, "audit refers to unknown item " + e.at("item_id").get<std::string>());
    }
    apply(e.at("item_id").get<std::string>(), req, false);
    audit_seq_ = std::max(audit_seq_, e.value("seq", 0));
  }
  save();
}

// ---- HTTP -------------------------------------------------------------------

namespace {

ApiResponse json_response(int status, const json& body) { return {status, "application/json", body.dump(2)}; }

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
  return json_response(status, {{"error", code}, {"message", message}});
}

int http_status(Errc code) {
  switch (code) {
    case Errc::not_found:
    case Errc::dataset_asset_missing: return 404;
    case Errc::conflict: return 409;
    case Errc::validation_error: return 422;
    case Errc::regeneration_exhausted:
    case Errc::backend_unavailable: return 502;
    default: return 500;
  }
}

std::string url_decode(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out.push_back(static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16)));
      i += 2;
    } else if (s[i] == '+') {
      out.push_back(' ');
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::map<std::string, std::string> parse_query(const std::string& query) {
  std::map<std::string, std::string> out;
  std::istringstream in(query);
  std::string kv;
  while (std::getline(in, kv, '&')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    out[url_decode(kv.substr(0, eq))] = url_decode(kv.substr(eq + 1));
  }
  return out;
}

json summary(const ReviewItem& i) {
  return {{"item_id", i.item_id},       {"kind", to_string(i.kind)},     {"target_id", i.target_id},
          {"instance_id", i.instance_id}, {"status", to_string(i.status)}, {"generation", i.generation}};
}

json rendered_context(ReviewQueue& queue, const ReviewItem& item) {
  Dataset& ds = queue.dataset();
  switch (item.kind) {
    case ReviewKind::function_annotation: {
      const ApplianceModel model = ds.model(ds.instance(item.instance_id).model_id);
      json rows = json::array();
      for (const auto& part : model.parts) {
        rows.push_back({{"part_id", part.part_id},
                        {"part_type", to_string(part.part_type)},
                        {"function_name", item.payload.at("function_annotation").value(part.part_id, "")},
                        {"states", item.payload.at("state_annotation").value(part.part_id, json::array())}});
      }
      return {{"table", rows}};
    }
    case ReviewKind::task: {
      const ManipulationTask t = task_from_json(item.payload);
      const ApplianceInstance inst = ds.instance(item.instance_id);
      json steps = json::array();
      for (const auto& s : t.steps) {
        steps.push_back({{"index", s.index},
                         {"function_name", s.function_name},
                         {"state", format_state(s.target_state)},
                         {"part_id", inst.part_for_name(s.function_name)}});
      }
      return {{"text", format_task(t)}, {"steps", steps}};
    }
    case ReviewKind::figure: {
      json ctx = json::object();
      const std::string image = item.payload.value("image_ref", "");
      const std::string svg = item.payload.value("svg_ref", "");
      ctx["image_url"] = image.empty() ? json(nullptr) : json("/api/assets/" + image);
      ctx["svg_url"] = svg.empty() ? json(nullptr) : json("/api/assets/" + svg);
      return ctx;
    }
  }
  return json::object();
}

std::string content_type_for(const fs::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".json") return "application/json";
  return "application/octet-stream";
}

}  // namespace

ApiResponse handle_review_request(ReviewQueue& queue, const std::string& method, const std::string& path,
                                  const std::string& query, const std::string& body) {
  try {
    std::vector<std::string> seg;
    std::istringstream in(path);
    for (std::string s; std::getline(in, s, '/');) {
      if (!s.empty()) seg.push_back(url_decode(s));
    }
    if (seg.empty() || seg[0] != "api") return error_response(404, "not_found", "unknown route " + path);

    if (method == "GET" && seg.size() == 2 && seg[1] == "health") return json_response(200, {{"status", "ok"}});

    if (method == "GET" && seg.size() == 2 && seg[1] == "items") {
      const auto q = parse_query(query);
      std::optional<ReviewKind> kind;
      std::optional<ItemStatus> status;
      if (q.count("kind")) kind = review_kind_from_string(q.at("kind"));
      if (q.count("status")) status = item_status_from_string(q.at("status"));
      json arr = json::array();
      for (const auto& i : queue.list(kind, status)) arr.push_back(summary(i));
      return json_response(200, {{"items", arr}});
    }

    if (method == "GET" && seg.size() == 3 && seg[1] == "items") {
      const ReviewItem item = queue.get(seg[2]);
      json j = to_json(item);
      j["context"] = rendered_context(queue, item);
      return json_response(200, j);
    }

    if (method == "POST" && seg.size() == 4 && seg[1] == "items" && seg[3] == "decision") {
      json req;
      try {
        req = json::parse(body);
      } catch (const json::parse_error& e) {
        return error_response(400, "bad_request", std::string("body is not JSON: ") + e.what());
      }
      if (!req.is_object() || !req.contains("decision") || !req.at("decision").is_string()) {
        return error_response(400, "bad_request", "body needs a string 'decision'");
      }
      (void)queue.get(seg[2]);  // 404 before any validation of the body
      DecisionRequest d;
      d.decision = decision_from_string(req.at("decision").get<std::string>());
      d.payload = req.value("payload", json());
      d.note = req.value("note", "");
      const DecisionOutcome out = queue.decide(seg[2], d);
      json j = {{"item", to_json(out.item)}, {"instance_status", out.instance_status}};
      j["created_item"] = out.created ? to_json(*out.created) : json(nullptr);
      return json_response(200, j);
    }

    if (method == "GET" && seg.size() == 3 && seg[1] == "instances") {
      const ApplianceInstance inst = queue.dataset().instance(seg[2]);
      return json_response(200, {{"instance_id", inst.instance_id}, {"review_status", to_string(inst.review_status)}});
    }

    if (method == "GET" && seg.size() == 3 && seg[1] == "assets") {
      const std::string& name = seg[2];
      if (name.find("..") != std::string::npos || name.find('/') != std::string::npos) {
        return error_response(400, "bad_request", "bad asset name");
      }
      const fs::path p = queue.dataset().figures_dir() / name;
      if (!fs::is_regular_file(p)) return error_response(404, "not_found", "no asset " + name);
      return {200, content_type_for(p), read_text_file(p)};
    }
    return error_response(404, "not_found", "unknown route " + method + " " + path);
  } catch (const Error& e) {
    return error_response(http_status(e.code()), std::string(to_string(e.code())), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

struct ReviewServer::Impl {
  ReviewQueue& queue;
  httplib::Server server;
  explicit Impl(ReviewQueue& q) : queue(q) {}
};

ReviewServer::ReviewServer(ReviewQueue& queue) : impl_(std::make_unique<Impl>(queue)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    std::string query;
    for (const auto& [k, v] : req.params) {
      if (!query.empty()) query += "&";
      query += k + "=" + v;
    }
    const ApiResponse r = handle_review_request(impl_->queue, req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  impl_->server.Get(R"(/api/.*)", handler);
  impl_->server.Post(R"(/api/.*)", handler);
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(Errc::validation_error, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ReviewServer::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error(Errc::validation_error, "cannot listen on " + host + ":" + std::to_string(port));
}

void ReviewServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace manualkit
