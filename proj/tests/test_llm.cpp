#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "nexus/error.hpp"
#include "nexus/llm.hpp"
#include "support.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that clashes with Eigen parameter names.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

using namespace nexus;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

LlmRequest request(std::string user = "hello") { return LlmRequest{"b", "m", "sys", std::move(user)}; }

/// Local chat endpoint that fails the first `failures` calls with `fail_status`.
class FakeProvider {
 public:
  FakeProvider(int failures, int fail_status) : failures_(failures), fail_status_(fail_status) {
    server_.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = calls_++;
      auth_ = req.get_header_value("Authorization");
      body_ = req.body;
      if (n < failures_) {
        res.status = fail_status_;
        res.set_content("{\"error\":\"nope\"}", "application/json");
        return;
      }
      res.set_content(R"({"choices":[{"message":{"content":"pong"}}],"usage":{"prompt_tokens":7,"completion_tokens":2}})",
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeProvider() {
    server_.stop();
    thread_.join();
  }

  HttpChatConfig config() const {
    HttpChatConfig c;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat";
    c.api_key_env = "NEXUS_TEST_KEY";
    c.retry.base_delay = std::chrono::milliseconds(1);
    c.timeout = std::chrono::seconds(5);
    return c;
  }

  int calls() const { return calls_; }
  const std::string& auth() const { return auth_; }
  const std::string& body() const { return body_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int failures_;
  int fail_status_;
  std::atomic<int> calls_{0};
  std::string auth_, body_;
};

}  // namespace

TEST_CASE("request validation") {
  auto r = request();
  CHECK_NOTHROW(r.validate());
  r.temperature = 2.5;
  CHECK(kind_of([&] { r.validate(); }) == ErrorKind::BadSpec);
  r = request("");
  CHECK(kind_of([&] { r.validate(); }) == ErrorKind::BadSpec);
  r = request();
  r.max_output_tokens = 0;
  CHECK(kind_of([&] { r.validate(); }) == ErrorKind::BadSpec);
}

TEST_CASE("cache key covers every request field") {
  const auto base = cache_key(request());
  CHECK(base.size() == 64u);
  CHECK(base == cache_key(request()));
  auto r = request();
  r.model_id = "m2";
  CHECK(cache_key(r) != base);
  r = request();
  r.temperature = 0.2;
  CHECK(cache_key(r) != base);
  r = request();
  r.backend_id = "c";
  CHECK(cache_key(r) != base);
  // Length prefixes keep the system/user boundary unambiguous.
  LlmRequest a{"b", "m", "ab", "c"}, b{"b", "m", "a", "bc"};
  CHECK(cache_key(a) != cache_key(b));
}

TEST_CASE("scripted backend order, rules and responder") {
  ScriptedBackend s({"one", "two"});
  s.add_rule({"", "special", "ruled"});
  CHECK(complete(s, request()).text == "one");
  CHECK(complete(s, request("a special case")).text == "ruled");
  CHECK(complete(s, request()).text == "two");
  CHECK(kind_of([&] { complete(s, request()); }) == ErrorKind::ScriptExhausted);
  s.set_responder([](const LlmRequest& r) -> std::optional<std::string> {
    if (r.user_prompt == "echo") return "echoed";
    return std::nullopt;
  });
  CHECK(complete(s, request("echo")).text == "echoed");
  CHECK(s.calls() == 5u);

  ScriptedBackend cyclic({"x", "y"}, true);
  std::string seen;
  for (int i = 0; i < 5; ++i) seen += complete(cyclic, request()).text;
  CHECK(seen == "xyxyx");
}

TEST_CASE("scripted backend from file") {
  testing::TempDir dir("script");
  testing::spit(dir / "script.json", R"({"replies": ["a"], "rules": [{"user_contains": "q", "reply": "r"}]})");
  auto s = ScriptedBackend::from_file(dir.path());
  CHECK(s->complete(request("q")).text == "r");
  CHECK(s->complete(request()).text == "a");
  testing::spit(dir / "bad.json", R"({"fallback": "oracle"})");
  CHECK(kind_of([&] { ScriptedBackend::from_file(dir / "bad.json"); }) == ErrorKind::Config);
  CHECK(kind_of([&] { ScriptedBackend::from_file(dir / "missing.json"); }) == ErrorKind::Config);
}

TEST_CASE("replay serves cached responses without calling the fallback") {
  testing::TempDir dir("replay");
  auto inner = std::make_shared<ScriptedBackend>(std::vector<std::string>{"first", "second"});
  {
    ReplayBackend replay(dir.path(), inner);
    CHECK(replay.complete(request("q1")).text == "first");
    CHECK(replay.complete(request("q2")).text == "second");
    CHECK(replay.fallback_calls() == 2u);
  }
  ReplayBackend replay(dir.path(), inner);
  auto hit = replay.complete(request("q1"));
  CHECK(hit.text == "first");
  CHECK(hit.from_cache);
  CHECK(replay.fallback_calls() == 0u);
  CHECK(inner->calls() == 2u);

  ReplayBackend offline(dir.path(), nullptr);
  CHECK(offline.complete(request("q2")).text == "second");
  CHECK(kind_of([&] { offline.complete(request("q3")); }) == ErrorKind::ScriptExhausted);
}

TEST_CASE("http backend") {
  SUBCASE("missing key") {
    FakeProvider p(0, 200);
    ::unsetenv("NEXUS_TEST_KEY");
    HttpChatBackend b(p.config());
    CHECK(kind_of([&] { b.complete(request()); }) == ErrorKind::AuthMissing);
    CHECK(p.calls() == 0);
  }
  ::setenv("NEXUS_TEST_KEY", "secret", 1);
  SUBCASE("success") {
    FakeProvider p(0, 200);
    HttpChatBackend b(p.config());
    auto r = b.complete(request());
    CHECK(r.text == "pong");
    CHECK(r.usage.input_tokens == 7);
    CHECK(r.usage.output_tokens == 2);
    CHECK(p.auth() == "Bearer secret");
    auto body = nlohmann::json::parse(p.body());
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "hello");
    CHECK(body["model"] == "m");
  }
  SUBCASE("transient failures are retried") {
    FakeProvider p(2, 429);
    HttpChatBackend b(p.config());
    CHECK(b.complete(request()).text == "pong");
    CHECK(p.calls() == 3);
  }
  SUBCASE("retries are bounded") {
    FakeProvider p(100, 503);
    HttpChatBackend b(p.config());
    CHECK(kind_of([&] { b.complete(request()); }) == ErrorKind::TransientExhausted);
    CHECK(p.calls() == 4);
  }
  SUBCASE("client errors are not retried") {
    FakeProvider p(100, 400);
    HttpChatBackend b(p.config());
    CHECK(kind_of([&] { b.complete(request()); }) == ErrorKind::ProviderRejected);
    CHECK(p.calls() == 1);
  }
  SUBCASE("bad endpoint") {
    HttpChatConfig c;
    c.endpoint = "ftp://nowhere";
    c.api_key_env = "NEXUS_TEST_KEY";
    CHECK(kind_of([&] { HttpChatBackend(c).complete(request()); }) == ErrorKind::Config);
  }
}

TEST_CASE("simulated analyst ignores unknown prompts") {
  CHECK_FALSE(simulated_analyst_reply(request()).has_value());
  SimulatedAnalystBackend b;
  CHECK(kind_of([&] { b.complete(request()); }) == ErrorKind::ScriptExhausted);
}
