#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

namespace manualkit {

using nlohmann::json;

enum class Capability {
  names_from_image,
  states_from_text,
  task_from_text,
  latex_from_context,
  alignment_from_images,
  plan_from_manual,
};

std::string_view to_string(Capability c);

/// One model call: a role prompt, a text context and optional images.
/// `context` carries the same content in structured form; live adapters
/// ignore it, deterministic mocks read it.
struct BackendRequest {
  Capability capability = Capability::names_from_image;
  std::string role_prompt;
  std::string text;
  json context = json::object();
  std::vector<std::string> image_refs;
  std::uint64_t seed = 0;
  int attempt = 0;
};

/// FNV-1a over capability, role prompt and text; hex encoded. Keys scripted
/// responses.
std::string request_hash(const BackendRequest& request);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const BackendRequest& request) = 0;
  virtual std::string name() const = 0;
  virtual bool deterministic() const { return true; }
};

/// Replays responses from a JSON script. A JSON array answers by call
/// index; an object answers by `request_hash`, and an array value under a
/// hash is consumed one entry per call. Running out raises
/// BackendUnavailable.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(json script);
  static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);
  static std::unique_ptr<ScriptedBackend> from_responses(std::vector<std::string> responses);

  std::string complete(const BackendRequest& request) override;
  std::string name() const override { return "scripted"; }
  int calls() const;
  const std::vector<BackendRequest>& requests() const { return requests_; }

 private:
  json script_;
  mutable std::mutex mutex_;
  int next_index_ = 0;
  std::map<std::string, int> consumed_;
  std::vector<BackendRequest> requests_;
};

/// Forwards to a callable; handy for adversarial mocks in tests.
class FunctionBackend : public Backend {
 public:
  using Fn = std::function<std::string(const BackendRequest&)>;
  explicit FunctionBackend(Fn fn, std::string name = "function") : fn_(std::move(fn)), name_(std::move(name)) {}
  std::string complete(const BackendRequest& request) override { return fn_(request); }
  std::string name() const override { return name_; }

 private:
  Fn fn_;
  std::string name_;
};

/// OpenAI-compatible chat-completions adapter. The API key is read from the
/// environment variable named in the config at call time.
struct LlmConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "MANUALKIT_LLM_API_KEY";
  int timeout_s = 120;
  double temperature = 0.7;
};

class LlmBackend : public Backend {
 public:
  explicit LlmBackend(LlmConfig config) : config_(std::move(config)) {}
  std::string complete(const BackendRequest& request) override;
  std::string name() const override { return "llm:" + config_.model; }
  bool deterministic() const override { return false; }

  /// Request body sent to the endpoint; exposed for inspection.
  json build_payload(const BackendRequest& request) const;

 private:
  LlmConfig config_;
};

/// Rate-limited access to one backend: at most `max_in_flight` concurrent
/// calls, with per-capability call counting.
class BackendDispatcher {
 public:
  explicit BackendDispatcher(std::shared_ptr<Backend> backend, int max_in_flight = 4);

  std::string call(const BackendRequest& request);
  Backend& backend() { return *backend_; }
  std::map<std::string, int> call_counts() const;
  int total_calls() const;
  int max_observed_in_flight() const { return max_observed_.load(); }

 private:
  std::shared_ptr<Backend> backend_;
  std::counting_semaphore<1024> slots_;
  mutable std::mutex mutex_;
  std::map<std::string, int> counts_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_observed_{0};
};

/// Calls the backend until `parse` accepts the output, at most
/// 1 + max_regen times. `parse` returns nullopt and fills `why` to reject.
template <class T>
struct RegenResult {
  T value;
  int regen_count = 0;
};

template <class T>
RegenResult<T> call_with_regeneration(BackendDispatcher& dispatcher, BackendRequest request, int max_regen,
                                      const std::function<std::optional<T>(const std::string&, std::string&)>& parse);

}  // namespace manualkit

#include "manualkit/backend/regeneration.ipp"
