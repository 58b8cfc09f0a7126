#pragma once

#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nexus {

inline constexpr double kDefaultTemperature = 0.1;

struct LlmRequest {
  std::string backend_id;
  std::string model_id;
  std::string system_prompt;
  std::string user_prompt;
  double temperature = kDefaultTemperature;
  int max_output_tokens = 8192;

  /// Throws BadSpec on empty prompts, temperature outside [0, 2] or non-positive token limit.
  void validate() const;
};

struct TokenUsage {
  int input_tokens = 0;
  int output_tokens = 0;
};

struct LlmResponse {
  std::string text;
  TokenUsage usage;
  int latency_ms = 0;
  bool from_cache = false;
};

/// SHA-256 (hex) over backend, model, temperature and both prompts, each length-prefixed.
std::string cache_key(const LlmRequest& request);

/// Chat-completion provider. Implementations are safe to call concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual LlmResponse complete(const LlmRequest& request) = 0;
  /// True for backends that reach a hosted model.
  virtual bool is_live() const { return false; }
};

/// Validates the request, then forwards to the backend.
LlmResponse complete(Backend& backend, const LlmRequest& request);

/// Canned replies: an ordered queue, pattern rules, and an optional responder for anything unmatched.
class ScriptedBackend : public Backend {
 public:
  using Responder = std::function<std::optional<std::string>(const LlmRequest&)>;

  struct Rule {
    /// Every non-empty pattern must occur in the corresponding prompt.
    std::string system_contains;
    std::string user_contains;
    std::string reply;
  };

  ScriptedBackend() = default;
  explicit ScriptedBackend(std::vector<std::string> ordered, bool cyclic = false);

  void push_reply(std::string reply);
  void add_rule(Rule rule);
  void set_responder(Responder responder);
  void set_cyclic(bool cyclic);

  /// Loads `{"replies": [...], "cyclic": bool, "rules": [{"system_contains", "user_contains", "reply"}],
  /// "fallback": "analyst"}` from a file, or from `script.json` inside a directory.
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

  LlmResponse complete(const LlmRequest& request) override;

  std::size_t calls() const;
  std::vector<LlmRequest> requests() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> ordered_;
  std::size_t next_ = 0;
  bool cyclic_ = false;
  std::vector<Rule> rules_;
  Responder responder_;
  std::vector<LlmRequest> requests_;
};

/// Content-addressed cache in front of another backend: one JSON file per cache key.
class ReplayBackend : public Backend {
 public:
  ReplayBackend(std::filesystem::path cache_dir, std::shared_ptr<Backend> fallback);

  LlmResponse complete(const LlmRequest& request) override;
  bool is_live() const override { return fallback_ && fallback_->is_live(); }

  std::size_t fallback_calls() const;
  const std::filesystem::path& cache_dir() const { return cache_dir_; }

 private:
  std::filesystem::path cache_dir_;
  std::shared_ptr<Backend> fallback_;
  mutable std::mutex mutex_;
  std::size_t fallback_calls_ = 0;
};

struct RetryPolicy {
  /// Retries after the first attempt.
  int max_retries = 3;
  /// Delay before retry i (1-based) is base_delay * 2^(i-1).
  std::chrono::milliseconds base_delay{1000};
};

struct HttpChatConfig {
  /// Full URL, e.g. https://host/v1/chat/completions.
  std::string endpoint;
  std::string api_key_env = "NEXUS_LLM_API_KEY";
  /// JSON pointer to the reply text in the provider's response.
  std::string response_text_path = "/choices/0/message/content";
  std::string input_tokens_path = "/usage/prompt_tokens";
  std::string output_tokens_path = "/usage/completion_tokens";
  std::chrono::seconds timeout{120};
  int max_in_flight = 4;
  RetryPolicy retry;
};

/// Generic JSON-over-HTTP chat backend:
/// POST {model, messages: [{role: system, content}, {role: user, content}], temperature, max_tokens}.
class HttpChatBackend : public Backend {
 public:
  explicit HttpChatBackend(HttpChatConfig config);
  ~HttpChatBackend() override;

  LlmResponse complete(const LlmRequest& request) override;
  bool is_live() const override { return true; }

  static nlohmann::json request_body(const LlmRequest& request);

 private:
  HttpChatConfig config_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

/// Deterministic stand-in for a hosted model. Recognizes each pipeline prompt by its system text and
/// answers in the required grammar with a naive drift forecast read back from the prompt.
std::optional<std::string> simulated_analyst_reply(const LlmRequest& request);

class SimulatedAnalystBackend : public Backend {
 public:
  LlmResponse complete(const LlmRequest& request) override;
};

}  // namespace nexus
