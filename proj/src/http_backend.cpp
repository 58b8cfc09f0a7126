#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <regex>
#include <thread>

#include <fmt/format.h>

#include "nexus/error.hpp"
#include "nexus/llm.hpp"

namespace nexus {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw Error(ErrorKind::Config, "invalid endpoint URL '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

bool is_transient_status(int status) { return status == 429 || status >= 500; }

int read_int(const nlohmann::json& doc, const std::string& pointer) {
  if (pointer.empty()) return 0;
  const nlohmann::json::json_pointer ptr(pointer);
  if (!doc.contains(ptr)) return 0;
  const auto& v = doc.at(ptr);
  return v.is_number_integer() ? v.get<int>() : 0;
}

// Scopes a slot of the in-flight limit.
class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
  ~SlotGuard() { sem_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

}  // namespace

HttpChatBackend::HttpChatBackend(HttpChatConfig config) : config_(std::move(config)) {
  split_endpoint(config_.endpoint);
  if (config_.max_in_flight < 1) throw Error(ErrorKind::Config, "max_in_flight must be >= 1");
  if (config_.retry.max_retries < 0) throw Error(ErrorKind::Config, "max_retries must be >= 0");
  in_flight_ = std::make_unique<std::counting_semaphore<>>(config_.max_in_flight);
}

HttpChatBackend::~HttpChatBackend() = default;

nlohmann::json HttpChatBackend::request_body(const LlmRequest& request) {
  return nlohmann::json{{"model", request.model_id},
                        {"messages",
                         nlohmann::json::array({{{"role", "system"}, {"content", request.system_prompt}},
                                                {{"role", "user"}, {"content", request.user_prompt}}})},
                        {"temperature", request.temperature},
                        {"max_tokens", request.max_output_tokens}};
}

LlmResponse HttpChatBackend::complete(const LlmRequest& request) {
  const char* token = std::getenv(config_.api_key_env.c_str());
  if (token == nullptr || *token == '\0') {
    throw Error(ErrorKind::AuthMissing, "environment variable " + config_.api_key_env + " is not set");
  }
  const Endpoint endpoint = split_endpoint(config_.endpoint);
  const std::string body = request_body(request).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  const httplib::Headers headers{{"Authorization", std::string("Bearer ") + token}};

  std::string last_failure;
  for (int attempt = 0; attempt <= config_.retry.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.retry.base_delay * (1 << (attempt - 1)));

    const auto started = std::chrono::steady_clock::now();
    httplib::Result result{nullptr, httplib::Error::Unknown};
    {
      SlotGuard slot(*in_flight_);
      httplib::Client client(endpoint.origin);
      client.set_connection_timeout(config_.timeout);
      client.set_read_timeout(config_.timeout);
      client.set_write_timeout(config_.timeout);
      result = client.Post(endpoint.path, headers, body, "application/json");
    }
    const int latency = static_cast<int>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count());

    if (!result) {
      last_failure = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (is_transient_status(status)) {
      last_failure = fmt::format("HTTP {}", status);
      continue;
    }
    if (status < 200 || status >= 300) {
      throw Error(ErrorKind::ProviderRejected, fmt::format("HTTP {}: {}", status, result->body.substr(0, 512)));
    }

    auto doc = nlohmann::json::parse(result->body, nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorKind::ProviderRejected, "provider response is not JSON");
    const nlohmann::json::json_pointer text_ptr(config_.response_text_path);
    if (!doc.contains(text_ptr) || !doc.at(text_ptr).is_string() || doc.at(text_ptr).get<std::string>().empty()) {
      throw Error(ErrorKind::ProviderRejected, "provider response has no text at " + config_.response_text_path);
    }
    LlmResponse out;
    out.text = doc.at(text_ptr).get<std::string>();
    out.usage.input_tokens = read_int(doc, config_.input_tokens_path);
    out.usage.output_tokens = read_int(doc, config_.output_tokens_path);
    out.latency_ms = latency;
    return out;
  }
  throw Error(ErrorKind::TransientExhausted,
              fmt::format("gave up after {} attempts; last failure: {}", config_.retry.max_retries + 1, last_failure));
}

}  // namespace nexus
