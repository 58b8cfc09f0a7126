#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nexus/agents.hpp"
#include "nexus/calibration.hpp"
#include "nexus/date.hpp"
#include "nexus/llm.hpp"
#include "nexus/types.hpp"

namespace nexus {

struct DatasetConfig {
  std::string name;
  std::vector<std::string> entities;
  /// `<series_dir>/<entity>.csv` with columns date,value.
  std::filesystem::path series_dir;
  /// `<events_dir>/<entity>.csv` with columns date,text. Empty for numeric-only data.
  std::filesystem::path events_dir;
  Date eval_start;
  Date eval_end;
  std::vector<int> horizons;
  int context_length = 1;
  std::string domain;
  std::string target_name;
};

/// Backend and sampling settings for one template (or the default for all of them).
struct AgentSettings {
  std::string backend = "mock";
  std::string model = "simulated-analyst";
  double temperature = kDefaultTemperature;
  int max_output_tokens = 8192;
};

struct RunConfig {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int workers = 1;
  std::filesystem::path cache_dir;
  std::vector<Setting> settings{Setting::Multimodal};

  int n = 6;
  double k = 0.05;
  SupportRule support = SupportRule::Majority;
  ConsolidationMode consolidation = ConsolidationMode::Auto;

  bool disable_macro = false;
  bool disable_micro = false;
  bool disable_calibration = false;

  AgentSettings llm;
  std::map<TemplateId, AgentSettings> agents;
  AgentSettings judge{"mock", "simulated-judge", kDefaultTemperature, 8192};

  /// HTTP backend details shared by every `http` agent.
  std::string http_endpoint;
  std::string api_key_env = "NEXUS_LLM_API_KEY";
  int max_in_flight = 4;
  int max_retries = 3;
  int retry_base_ms = 1000;
  int timeout_s = 120;

  std::vector<DatasetConfig> datasets;

  /// Throws Config on any violated invariant.
  void validate() const;
  AgentSettings agent(TemplateId id) const;
};

/// Reads an INI-style file (`[section]`, `key = value`, `#`/`;` comments). Quoted values are unquoted and
/// bracketed lists are accepted, so simple TOML files load too. Relative paths resolve against the file.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");

/// Builds a backend from a spec string: `mock`, `scripted:<path>` or `http[:<url>]`.
/// Wrapped in a replay cache when the config names a cache directory.
std::shared_ptr<Backend> make_backend(const std::string& spec, const RunConfig& config);

/// Backend id recorded in traces: the part of the spec before ':'.
std::string backend_id(const std::string& spec);

/// One binding per template; backends with the same spec are shared.
AgentRouter make_router(const RunConfig& config);
AgentBinding make_judge_binding(const RunConfig& config);

}  // namespace nexus
