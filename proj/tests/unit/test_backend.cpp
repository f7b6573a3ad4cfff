#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "manualkit/backend/backend.hpp"
#include "manualkit/backend/synthetic.hpp"
#include "manualkit/core/error.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

using namespace manualkit;

namespace {

BackendRequest make_request(Capability cap, std::string text) {
  BackendRequest r;
  r.capability = cap;
  r.role_prompt = "role";
  r.text = std::move(text);
  return r;
}

Errc error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::not_found;
}

}  // namespace

TEST_CASE("scripted backend answers by call index") {
  auto b = ScriptedBackend::from_responses({"a", "b"});
  auto r = make_request(Capability::names_from_image, "x");
  CHECK(b->complete(r) == "a");
  CHECK(b->complete(r) == "b");
  CHECK(error_of([&] { b->complete(r); }) == Errc::backend_unavailable);
  CHECK(b->calls() == 3);
}

TEST_CASE("scripted backend answers by request hash") {
  auto r1 = make_request(Capability::names_from_image, "one");
  auto r2 = make_request(Capability::states_from_text, "one");
  REQUIRE(request_hash(r1) != request_hash(r2));
  CHECK(request_hash(r1) == request_hash(make_request(Capability::names_from_image, "one")));
  CHECK(request_hash(r1).size() == 16);

  json script = json::object();
  script[request_hash(r1)] = "fixed";
  script[request_hash(r2)] = json::array({"first", "second"});
  ScriptedBackend b(script);
  CHECK(b.complete(r1) == "fixed");
  CHECK(b.complete(r1) == "fixed");
  CHECK(b.complete(r2) == "first");
  CHECK(b.complete(r2) == "second");
  CHECK(error_of([&] { b.complete(r2); }) == Errc::backend_unavailable);
  CHECK(error_of([&] { b.complete(make_request(Capability::task_from_text, "?")); }) == Errc::backend_unavailable);
}

TEST_CASE("scripted backend reads a script file") {
  manualkit::testing::TempDir dir;
  const auto path = dir.path() / "script.json";
  std::ofstream(path) << R"(["hello", "world"])";
  auto b = ScriptedBackend::from_file(path);
  CHECK(b->complete(make_request(Capability::names_from_image, "")) == "hello");
  CHECK(error_of([&] { ScriptedBackend::from_file(dir.path() / "missing.json"); }) == Errc::backend_unavailable);
  std::ofstream(dir.path() / "bad.json") << "{not json";
  CHECK(error_of([&] { ScriptedBackend::from_file(dir.path() / "bad.json"); }) == Errc::malformed_document);
}

TEST_CASE("dispatcher bounds concurrent calls and counts per capability") {
  auto slow = std::make_shared<FunctionBackend>([](const BackendRequest&) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    return std::string("ok");
  });
  BackendDispatcher d(slow, 2);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      d.call(make_request(i % 2 ? Capability::task_from_text : Capability::names_from_image, "t"));
    });
  }
  for (auto& t : threads) t.join();
  CHECK(d.total_calls() == 8);
  CHECK(d.max_observed_in_flight() <= 2);
  CHECK(d.max_observed_in_flight() >= 1);
  CHECK(d.call_counts().at("names_from_image") == 4);
  CHECK(d.call_counts().at("task_from_text") == 4);
}

TEST_CASE("regeneration budget: success iff failures <= max_regen") {
  for (int max_regen = 0; max_regen <= 5; ++max_regen) {
    for (int failures = 0; failures <= 7; ++failures) {
      std::vector<std::string> responses(failures, "bad");
      responses.push_back("good");
      auto backend = std::shared_ptr<Backend>(ScriptedBackend::from_responses(responses));
      BackendDispatcher d(backend);
      auto parse = [](const std::string& out, std::string& why) -> std::optional<int> {
        if (out == "good") return 1;
        why = "bad output";
        return std::nullopt;
      };
      if (failures <= max_regen) {
        auto r = call_with_regeneration<int>(d, make_request(Capability::task_from_text, ""), max_regen, parse);
        CHECK(r.regen_count == failures);
        CHECK(r.regen_count <= max_regen);
        CHECK(d.total_calls() == failures + 1);
      } else {
        try {
          call_with_regeneration<int>(d, make_request(Capability::task_from_text, ""), max_regen, parse);
          FAIL("expected exhaustion");
        } catch (const RegenerationExhausted& e) {
          CHECK(e.attempts() == max_regen + 1);
          CHECK(e.last_output() == "bad");
        }
        CHECK(d.total_calls() == max_regen + 1);
      }
    }
  }
}

TEST_CASE("regeneration passes the attempt number to the backend") {
  std::vector<int> attempts;
  auto b = std::make_shared<FunctionBackend>([&](const BackendRequest& r) {
    attempts.push_back(r.attempt);
    return std::string(r.attempt == 2 ? "ok" : "no");
  });
  BackendDispatcher d(b);
  auto r = call_with_regeneration<std::string>(d, make_request(Capability::task_from_text, ""), 5,
                                               [](const std::string& out, std::string&) -> std::optional<std::string> {
                                                 if (out == "ok") return out;
                                                 return std::nullopt;
                                               });
  CHECK(r.regen_count == 2);
  CHECK(attempts == std::vector<int>{0, 1, 2});
}

TEST_CASE("llm adapter payload and missing key") {
  LlmConfig cfg;
  cfg.api_key_env = "MANUALKIT_TEST_KEY_THAT_IS_NOT_SET";
  LlmBackend b(cfg);
  manualkit::testing::TempDir dir;
  const auto img = dir.path() / "x.png";
  std::ofstream(img, std::ios::binary) << "PNGDATA";
  auto r = make_request(Capability::names_from_image, "name the parts");
  r.image_refs.push_back(img.string());
  const json payload = b.build_payload(r);
  CHECK(payload.at("model") == cfg.model);
  const auto& msgs = payload.at("messages");
  REQUIRE(msgs.size() == 2);
  CHECK(msgs[0].at("role") == "system");
  CHECK(msgs[0].at("content") == "role");
  const std::string dumped = msgs[1].dump();
  CHECK(dumped.find("name the parts") != std::string::npos);
  CHECK(dumped.find("data:image/png;base64,") != std::string::npos);
  CHECK_FALSE(b.deterministic());
  CHECK(error_of([&] { b.complete(r); }) == Errc::backend_unavailable);
}

TEST_CASE("synthetic backend is a pure function of context, seed and attempt") {
  SyntheticBackend b;
  BackendRequest r = make_request(Capability::names_from_image, "ignored");
  r.context = {{"category", "microwave"},
               {"parts", json::array({{{"label", "1"}, {"part_type", "door"}},
                                      {{"label", "2"}, {"part_type", "button"}},
                                      {{"label", "3"}, {"part_type", "button"}}})}};
  r.seed = 42;
  const std::string first = b.complete(r);
  CHECK(first == b.complete(r));
  r.text = "different prose";
  CHECK(first == b.complete(r));
  CHECK(first.find("1: ") != std::string::npos);
  CHECK(first.find("3: ") != std::string::npos);

  bool varied = false;
  for (std::uint64_t s = 0; s < 20 && !varied; ++s) {
    r.seed = s;
    varied = b.complete(r) != first;
  }
  CHECK(varied);
  CHECK(error_of([&] { b.complete(make_request(Capability::alignment_from_images, "")); }) ==
        Errc::backend_unavailable);
}

TEST_CASE("routing backend sends capabilities to their targets") {
  auto a = std::make_shared<FunctionBackend>([](const BackendRequest&) { return std::string("A"); }, "a");
  auto c = std::make_shared<FunctionBackend>([](const BackendRequest&) { return std::string("C"); }, "c");
  RoutingBackend r(a);
  r.route(Capability::plan_from_manual, c);
  CHECK(r.complete(make_request(Capability::plan_from_manual, "")) == "C");
  CHECK(r.complete(make_request(Capability::names_from_image, "")) == "A");
  CHECK(r.name().find("plan_from_manual=c") != std::string::npos);
}
