#pragma once

#include "manualkit/backend/backend.hpp"
#include "manualkit/figures/figures.hpp"
#include "manualkit/figures/renderer.hpp"
#include "manualkit/service/dataset.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace manualkit {

enum class ReviewKind { function_annotation, task, figure };
std::string_view to_string(ReviewKind kind);
ReviewKind review_kind_from_string(std::string_view text);

enum class ItemStatus { pending, approved, revised, regenerate_requested };
std::string_view to_string(ItemStatus status);

enum class Decision { approve, revise, regenerate };
std::string_view to_string(Decision decision);
Decision decision_from_string(std::string_view text);

/// One unit of human verification. The payload is a snapshot of the entity
/// when the item was created; revised items carry the edited payload.
struct ReviewItem {
  std::string item_id;
  ReviewKind kind = ReviewKind::function_annotation;
  std::string target_id;  // instance, task or figure asset id
  std::string instance_id;
  json payload;
  ItemStatus status = ItemStatus::pending;
  std::string reviewer_note;
  std::uint64_t seed = 0;
  int generation = 1;
  std::string superseded_by;  // new item after a regeneration
};

json to_json(const ReviewItem& item);
ReviewItem review_item_from_json(const json& j);

struct DecisionRequest {
  Decision decision = Decision::approve;
  json payload;  // revise only
  std::string note;
};

struct DecisionOutcome {
  ReviewItem item;
  std::optional<ReviewItem> created;  // regenerate only
  std::string instance_status;
};

/// The review state of one dataset. Items persist in review/items.json and
/// every decision is appended to review/audit.jsonl. Decisions on one item
/// are serialized; only pending items accept one (Error(conflict)
/// otherwise). Revisions are re-validated (Error(validation_error)).
/// An instance becomes approved (revised when any of its items was revised)
/// once every item carrying its id has been approved or revised.
class ReviewQueue {
 public:
  /// `backend` and `renderer` serve regeneration requests.
  ReviewQueue(Dataset& dataset, std::shared_ptr<Backend> backend, std::shared_ptr<Renderer> renderer = nullptr,
              std::shared_ptr<BackgroundBackend> background = nullptr);

  /// Adds a pending item for every pending entity without one. Returns the
  /// new item ids.
  std::vector<std::string> populate();

  std::vector<ReviewItem> list(std::optional<ReviewKind> kind = std::nullopt,
                               std::optional<ItemStatus> status = std::nullopt) const;
  /// Throws Error(not_found).
  ReviewItem get(const std::string& item_id) const;

  DecisionOutcome decide(const std::string& item_id, const DecisionRequest& request);

  /// Re-applies every audited decision in order; on a copy of the dataset
  /// taken before the decisions this reproduces the final review states.
  void replay(const std::filesystem::path& audit_log);

  std::filesystem::path audit_path() const { return dataset_.review_dir() / "audit.jsonl"; }
  Dataset& dataset() { return dataset_; }

 private:
  void load();
  void save() const;
  ReviewItem& find(const std::string& item_id);
  std::string add_item(ReviewKind kind, const std::string& target_id, const std::string& instance_id,
                       const json& payload, std::uint64_t seed, int generation);
  DecisionOutcome apply(const std::string& item_id, const DecisionRequest& request, bool audit);
  void apply_revision(ReviewItem& item, const json& payload);
  void apply_approval(ReviewItem& item);
  ReviewItem regenerate(ReviewItem& item);
  std::string refresh_instance_status(const std::string& instance_id);

  Dataset& dataset_;
  std::shared_ptr<BackendDispatcher> backend_;
  std::shared_ptr<Renderer> renderer_;
  std::shared_ptr<BackgroundBackend> background_;
  mutable std::mutex mutex_;
  std::vector<ReviewItem> items_;
  int audit_seq_ = 0;
};

/// HTTP+JSON view of a queue:
///   GET  /api/health
///   GET  /api/items?kind=<k>&status=<s>     summaries
///   GET  /api/items/<id>                    item with rendered context
///   POST /api/items/<id>/decision           {"decision": approve|revise|regenerate, "payload", "note"}
///   GET  /api/instances/<id>                review status
///   GET  /api/assets/<file>                 figure PNG/SVG
/// Errors come back as {"error": code, "message"} with 400 (bad request),
/// 404 (unknown item), 409 (already decided) or 422 (failed validation).
struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

ApiResponse handle_review_request(ReviewQueue& queue, const std::string& method, const std::string& path,
                                  const std::string& query, const std::string& body);

class ReviewServer {
 public:
  explicit ReviewServer(ReviewQueue& queue);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds `host:port` (port 0 picks a free one) and serves on a background
  /// thread. Returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

}  // namespace manualkit
