#pragma once

#include "manualkit/backend/backend.hpp"

#include <memory>

namespace manualkit {

/// Knobs for making the synthetic generator misbehave on purpose.
struct SyntheticFaults {
  double malformed_rate = 0.0;  // probability an answer is unparseable prose
  bool duplicate_names = false;  // every name answer repeats one name
};

/// Deterministic stand-in for the generation model. Answers are a pure
/// function of (request context, seed, attempt); it reads the structured
/// `context` field and ignores the prose prompt. Covers names, states,
/// tasks and LaTeX sections.
class SyntheticBackend : public Backend {
 public:
  explicit SyntheticBackend(SyntheticFaults faults = {}) : faults_(faults) {}
  std::string complete(const BackendRequest& request) override;
  std::string name() const override { return "synthetic"; }

 private:
  SyntheticFaults faults_;
};

/// Sends each capability to its own backend; unrouted capabilities go to the
/// fallback.
class RoutingBackend : public Backend {
 public:
  explicit RoutingBackend(std::shared_ptr<Backend> fallback) : fallback_(std::move(fallback)) {}
  void route(Capability capability, std::shared_ptr<Backend> backend) { routes_[capability] = std::move(backend); }
  std::string complete(const BackendRequest& request) override;
  std::string name() const override;
  bool deterministic() const override;

 private:
  std::shared_ptr<Backend> fallback_;
  std::map<Capability, std::shared_ptr<Backend>> routes_;
};

}  // namespace manualkit
