#include "nexus/llm.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "nexus/error.hpp"
#include "nexus/ingest.hpp"

namespace nexus {

void LlmRequest::validate() const {
  if (system_prompt.empty() || user_prompt.empty()) throw Error(ErrorKind::BadSpec, "LLM prompts must be nonempty");
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(ErrorKind::BadSpec, fmt::format("temperature {} outside [0, 2]", temperature));
  }
  if (max_output_tokens < 1) throw Error(ErrorKind::BadSpec, "max_output_tokens must be positive");
}

std::string cache_key(const LlmRequest& request) {
  char temp[64];
  auto [end, ec] = std::to_chars(temp, temp + sizeof temp, request.temperature);
  const std::string temperature(temp, ec == std::errc{} ? end : temp);

  std::string canonical;
  auto field = [&](std::string_view name, std::string_view value) {
    canonical += fmt::format("{}:{}:", name, value.size());
    canonical += value;
    canonical += '\n';
  };
  field("backend", request.backend_id);
  field("model", request.model_id);
  field("temperature", temperature);
  field("system", request.system_prompt);
  field("user", request.user_prompt);

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::Io, "SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

LlmResponse complete(Backend& backend, const LlmRequest& request) {
  request.validate();
  return backend.complete(request);
}

// ---------------------------------------------------------------------------------------------- scripted

ScriptedBackend::ScriptedBackend(std::vector<std::string> ordered, bool cyclic)
    : ordered_(std::move(ordered)), cyclic_(cyclic) {}

void ScriptedBackend::push_reply(std::string reply) {
  std::lock_guard lock(mutex_);
  ordered_.push_back(std::move(reply));
}

void ScriptedBackend::add_rule(Rule rule) {
  std::lock_guard lock(mutex_);
  rules_.push_back(std::move(rule));
}

void ScriptedBackend::set_responder(Responder responder) {
  std::lock_guard lock(mutex_);
  responder_ = std::move(responder);
}

void ScriptedBackend::set_cyclic(bool cyclic) {
  std::lock_guard lock(mutex_);
  cyclic_ = cyclic;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::filesystem::path file = path;
  if (std::filesystem::is_directory(file)) file /= "script.json";
  if (!std::filesystem::exists(file)) throw Error(ErrorKind::Config, "script file not found: " + file.string());
  nlohmann::json doc = nlohmann::json::parse(read_text_file(file), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorKind::Config, "script is not a JSON object: " + file.string());

  auto backend = std::make_shared<ScriptedBackend>();
  try {
    for (const auto& r : doc.value("replies", nlohmann::json::array())) backend->ordered_.push_back(r.get<std::string>());
    backend->cyclic_ = doc.value("cyclic", false);
    for (const auto& r : doc.value("rules", nlohmann::json::array())) {
      backend->rules_.push_back(Rule{r.value("system_contains", ""), r.value("user_contains", ""),
                                     r.at("reply").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::Config, fmt::format("bad script {}: {}", file.string(), ex.what()));
  }
  const std::string fallback = doc.value("fallback", "");
  if (fallback == "analyst") {
    backend->responder_ = simulated_analyst_reply;
  } else if (!fallback.empty()) {
    throw Error(ErrorKind::Config, "unknown script fallback '" + fallback + "'");
  }
  return backend;
}

LlmResponse ScriptedBackend::complete(const LlmRequest& request) {
  std::string reply;
  Responder responder;
  {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    bool matched = false;
    for (const auto& rule : rules_) {
      if ((rule.system_contains.empty() || request.system_prompt.find(rule.system_contains) != std::string::npos) &&
          (rule.user_contains.empty() || request.user_prompt.find(rule.user_contains) != std::string::npos)) {
        reply = rule.reply;
        matched = true;
        break;
      }
    }
    if (!matched && next_ < ordered_.size()) {
      reply = ordered_[next_++];
      if (cyclic_ && next_ == ordered_.size()) next_ = 0;
      matched = true;
    }
    if (matched) return LlmResponse{reply, {}, 0, false};
    responder = responder_;
  }
  if (responder) {
    if (auto r = responder(request)) return LlmResponse{std::move(*r), {}, 0, false};
  }
  throw Error(ErrorKind::ScriptExhausted, "scripted backend has no reply for this request");
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

std::vector<LlmRequest> ScriptedBackend::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

LlmResponse SimulatedAnalystBackend::complete(const LlmRequest& request) {
  auto reply = simulated_analyst_reply(request);
  if (!reply) throw Error(ErrorKind::ScriptExhausted, "simulated analyst does not recognize this prompt");
  return LlmResponse{std::move(*reply), {}, 0, false};
}

// ------------------------------------------------------------------------------------------------ replay

ReplayBackend::ReplayBackend(std::filesystem::path cache_dir, std::shared_ptr<Backend> fallback)
    : cache_dir_(std::move(cache_dir)), fallback_(std::move(fallback)) {
  std::error_code ec;
  std::filesystem::create_directories(cache_dir_, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create cache directory " + cache_dir_.string() + ": " + ec.message());
}

LlmResponse ReplayBackend::complete(const LlmRequest& request) {
  const std::string key = cache_key(request);
  const auto path = cache_dir_ / (key + ".json");
  if (std::filesystem::exists(path)) {
    auto doc = nlohmann::json::parse(read_text_file(path), nullptr, false);
    if (!doc.is_discarded() && doc.contains("response")) {
      const auto& r = doc["response"];
      LlmResponse out;
      out.text = r.value("text", "");
      out.usage.input_tokens = r.value("input_tokens", 0);
      out.usage.output_tokens = r.value("output_tokens", 0);
      out.from_cache = true;
      if (!out.text.empty()) return out;
    }
  }
  if (!fallback_) throw Error(ErrorKind::ScriptExhausted, "replay cache miss and no fallback backend: " + key);

  LlmResponse response = fallback_->complete(request);
  {
    std::lock_guard lock(mutex_);
    ++fallback_calls_;
  }
  const nlohmann::json doc{
      {"key", key},
      {"request",
       {{"backend_id", request.backend_id},
        {"model_id", request.model_id},
        {"temperature", request.temperature},
        {"max_output_tokens", request.max_output_tokens},
        {"system_prompt", request.system_prompt},
        {"user_prompt", request.user_prompt}}},
      {"response",
       {{"text", response.text},
        {"input_tokens", response.usage.input_tokens},
        {"output_tokens", response.usage.output_tokens}}}};

  static std::atomic<unsigned long> counter{0};
  const auto tmp = cache_dir_ / fmt::format(".{}.{}.{}.tmp", key, std::hash<std::thread::id>{}(std::this_thread::get_id()),
                                            counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write cache entry " + tmp.string());
    out << doc.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::Io, "cannot publish cache entry " + path.string());
  }
  return response;
}

std::size_t ReplayBackend::fallback_calls() const {
  std::lock_guard lock(mutex_);
  return fallback_calls_;
}

}  // namespace nexus
