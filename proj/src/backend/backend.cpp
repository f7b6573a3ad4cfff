#include "manualkit/backend/backend.hpp"

#include "manualkit/core/error.hpp"

#include <httplib.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace manualkit {

std::string_view to_string(Capability c) {
  switch (c) {
    case Capability::names_from_image: return "names_from_image";
    case Capability::states_from_text: return "states_from_text";
    case Capability::task_from_text: return "task_from_text";
    case Capability::latex_from_context: return "latex_from_context";
    case Capability::alignment_from_images: return "alignment_from_images";
    case Capability::plan_from_manual: return "plan_from_manual";
  }
  return "unknown";
}

std::string request_hash(const BackendRequest& request) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  };
  mix(to_string(request.capability));
  mix(request.role_prompt);
  mix(request.text);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ScriptedBackend::ScriptedBackend(json script) : script_(std::move(script)) {
  if (!script_.is_array() && !script_.is_object()) {
    throw Error(Errc::malformed_document, "scripted backend expects a JSON list or object");
  }
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::backend_unavailable, "cannot read script " + path.string());
  try {
    return std::make_unique<ScriptedBackend>(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_document, "script " + path.string() + ": " + e.what());
  }
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_responses(std::vector<std::string> responses) {
  return std::make_unique<ScriptedBackend>(json(std::move(responses)));
}

std::string ScriptedBackend::complete(const BackendRequest& request) {
  std::lock_guard lock(mutex_);
  requests_.push_back(request);
  if (script_.is_array()) {
    if (next_index_ >= static_cast<int>(script_.size())) {
      throw Error(Errc::backend_unavailable, "script exhausted at call " + std::to_string(next_index_));
    }
    return script_.at(next_index_++).get<std::string>();
  }
  const std::string key = request_hash(request);
  if (!script_.contains(key)) throw Error(Errc::backend_unavailable, "no scripted response for hash " + key);
  const json& entry = script_.at(key);
  if (entry.is_string()) return entry.get<std::string>();
  int& used = consumed_[key];
  if (used >= static_cast<int>(entry.size())) throw Error(Errc::backend_unavailable, "responses for hash " + key + " exhausted");
  return entry.at(used++).get<std::string>();
}

int ScriptedBackend::calls() const {
  std::lock_guard lock(mutex_);
  return static_cast<int>(requests_.size());
}

namespace {

std::string base64_encode(const std::string& in) {
  static const char* table = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  int val = 0, bits = -6;
  for (unsigned char c : in) {
    val = (val << 8) + c;
    bits += 8;
    while (bits >= 0) {
      out.push_back(table[(val >> bits) & 0x3F]);
      bits -= 6;
    }
  }
  if (bits > -6) out.push_back(table[((val << 8) >> (bits + 8)) & 0x3F]);
  while (out.size() % 4) out.push_back('=');
  return out;
}

}  // namespace

json LlmBackend::build_payload(const BackendRequest& request) const {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", request.text}});
  for (const auto& ref : request.image_refs) {
    std::ifstream in(ref, std::ios::binary);
    if (!in) throw Error(Errc::backend_unavailable, "cannot read image " + ref);
    std::ostringstream ss;
    ss << in.rdbuf();
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + base64_encode(ss.str())}}}});
  }
  return {{"model", config_.model},
          {"temperature", config_.temperature},
          {"messages", json::array({{{"role", "system"}, {"content", request.role_prompt}},
                                    {{"role", "user"}, {"content", content}}})}};
}

std::string LlmBackend::complete(const BackendRequest& request) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (!key || !*key) throw Error(Errc::backend_unavailable, "environment variable " + config_.api_key_env + " is not set");
  const json payload = build_payload(request);

  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout_s);
  client.set_read_timeout(config_.timeout_s);
  client.set_bearer_token_auth(key);
  auto res = client.Post(config_.path, payload.dump(), "application/json");
  if (!res) throw Error(Errc::backend_unavailable, "request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw Error(Errc::backend_unavailable, "endpoint returned HTTP " + std::to_string(res->status));
  }
  try {
    const json body = json::parse(res->body);
    return body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::backend_unavailable, std::string("unexpected response: ") + e.what());
  }
}

BackendDispatcher::BackendDispatcher(std::shared_ptr<Backend> backend, int max_in_flight)
    : backend_(std::move(backend)), slots_(std::max(1, std::min(max_in_flight, 1024))) {
  if (!backend_) throw Error(Errc::backend_unavailable, "no backend configured");
}

std::string BackendDispatcher::call(const BackendRequest& request) {
  slots_.acquire();
  struct Release {
    BackendDispatcher* self;
    ~Release() {
      self->in_flight_.fetch_sub(1);
      self->slots_.release();
    }
  } release{this};
  const int now = in_flight_.fetch_add(1) + 1;
  int seen = max_observed_.load();
  while (now > seen && !max_observed_.compare_exchange_weak(seen, now)) {
  }
  {
    std::lock_guard lock(mutex_);
    ++counts_[std::string(to_string(request.capability))];
  }
  return backend_->complete(request);
}

std::map<std::string, int> BackendDispatcher::call_counts() const {
  std::lock_guard lock(mutex_);
  return counts_;
}

int BackendDispatcher::total_calls() const {
  std::lock_guard lock(mutex_);
  int total = 0;
  for (const auto& [k, v] : counts_) total += v;
  return total;
}

}  // namespace manualkit
