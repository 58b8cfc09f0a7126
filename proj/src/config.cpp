#include "nexus/config.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "nexus/ingest.hpp"

namespace nexus {

namespace {

namespace pt = boost::property_tree;

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorKind::Config, message); }

std::string unquote(std::string v) {
  const auto b = v.find_first_not_of(" \t");
  const auto e = v.find_last_not_of(" \t");
  v = b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) v = v.substr(1, v.size() - 2);
  return v;
}

std::vector<std::string> split_list(std::string v) {
  v = unquote(v);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) config_error(fmt::format("{}: '{}' is not an integer", key, v));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  if (!parse_real(v, out)) config_error(fmt::format("{}: '{}' is not a number", key, v));
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  config_error(fmt::format("{}: '{}' is not a boolean", key, v));
}

Date to_date(const std::string& key, const std::string& v) {
  auto d = Date::parse(v);
  if (!d) config_error(fmt::format("{}: '{}' is not an ISO date", key, v));
  return *d;
}

std::filesystem::path to_path(const std::filesystem::path& base, const std::string& v) {
  std::filesystem::path p(v);
  return p.is_absolute() ? p : base / p;
}

// Rewrites a relative scripted path so that it resolves against the config file.
std::string resolve_backend(const std::filesystem::path& base, const std::string& spec) {
  if (spec.rfind("scripted:", 0) == 0) return "scripted:" + to_path(base, spec.substr(9)).string();
  return spec;
}

void read_agent(const std::string& section, const pt::ptree& tree, const std::filesystem::path& base, AgentSettings& a) {
  for (const auto& [key, node] : tree) {
    const std::string v = unquote(node.data());
    const std::string where = section + "." + key;
    if (key == "backend") {
      a.backend = resolve_backend(base, v);
    } else if (key == "model") {
      a.model = v;
    } else if (key == "temperature") {
      a.temperature = to_double(where, v);
    } else if (key == "max_output_tokens") {
      a.max_output_tokens = to_int(where, v);
    } else {
      config_error("unknown key " + where);
    }
  }
}

}  // namespace

void RunConfig::validate() const {
  if (workers < 1) config_error("workers must be >= 1");
  if (!(k > 0.0 && k < 1.0)) config_error(fmt::format("k must lie in (0, 1), got {}", k));
  if (!disable_calibration && n < 2) config_error(fmt::format("calibration needs n >= 2, got {}", n));
  if (disable_macro && disable_micro) config_error("macro and micro agents cannot both be disabled");
  if (settings.empty()) config_error("no setting selected");
  auto check_agent = [](const std::string& what, const AgentSettings& a) {
    if (!(a.temperature >= 0.0 && a.temperature <= 2.0)) config_error(what + ": temperature outside [0, 2]");
    if (a.max_output_tokens < 1) config_error(what + ": max_output_tokens must be positive");
  };
  check_agent("llm", llm);
  check_agent("judge", judge);
  for (const auto& [id, a] : agents) check_agent(std::string(to_string(id)), a);
  std::set<std::string> names;
  for (const auto& d : datasets) {
    if (!names.insert(d.name).second) config_error("duplicate dataset " + d.name);
    if (d.entities.empty()) config_error("dataset " + d.name + " lists no entities");
    if (d.horizons.empty()) config_error("dataset " + d.name + " lists no horizons");
    for (int h : d.horizons) {
      if (h < 1) config_error("dataset " + d.name + ": horizons must be positive");
    }
    if (d.context_length < 1) config_error("dataset " + d.name + ": context_length must be positive");
    if (d.eval_end < d.eval_start) config_error("dataset " + d.name + ": eval_end precedes eval_start");
    if (d.series_dir.empty()) config_error("dataset " + d.name + ": series_dir is required");
  }
}

AgentSettings RunConfig::agent(TemplateId id) const {
  auto it = agents.find(id);
  return it == agents.end() ? llm : it->second;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    config_error(fmt::format("config line {}: {}", e.line(), e.message()));
  }

  RunConfig cfg;
  for (const auto& [section, node] : tree) {
    if (!node.data().empty() && node.empty()) config_error("key '" + section + "' outside any section");
    auto each = [&](auto&& fn) {
      for (const auto& [key, value] : node) fn(key, unquote(value.data()), section + "." + key);
    };
    if (section == "run") {
      each([&](const std::string& key, const std::string& v, const std::string& where) {
        if (key == "out") {
          cfg.out_dir = to_path(base, v);
        } else if (key == "seed") {
          cfg.seed = static_cast<std::uint64_t>(to_int(where, v));
        } else if (key == "workers") {
          cfg.workers = to_int(where, v);
        } else if (key == "cache_dir") {
          cfg.cache_dir = to_path(base, v);
        } else if (key == "setting" || key == "settings") {
          cfg.settings.clear();
          for (const auto& s : split_list(v)) {
            auto parsed = parse_setting(s);
            if (!parsed) config_error(where + ": unknown setting '" + s + "'");
            cfg.settings.push_back(*parsed);
          }
        } else {
          config_error("unknown key " + where);
        }
      });
    } else if (section == "calibration") {
      each([&](const std::string& key, const std::string& v, const std::string& where) {
        if (key == "n") {
          cfg.n = to_int(where, v);
        } else if (key == "k") {
          cfg.k = to_double(where, v);
        } else if (key == "support") {
          if (v == "majority") cfg.support = SupportRule::Majority;
          else if (v == "all") cfg.support = SupportRule::All;
          else config_error(where + ": expected majority or all");
        } else if (key == "consolidation") {
          if (v == "auto") cfg.consolidation = ConsolidationMode::Auto;
          else if (v == "sentences") cfg.consolidation = ConsolidationMode::Sentences;
          else if (v == "llm") cfg.consolidation = ConsolidationMode::Llm;
          else config_error(where + ": expected auto, sentences or llm");
        } else if (key == "disable") {
          cfg.disable_calibration = to_bool(where, v);
        } else {
          config_error("unknown key " + where);
        }
      });
    } else if (section == "pipeline") {
      each([&](const std::string& key, const std::string& v, const std::string& where) {
        if (key == "disable_macro") cfg.disable_macro = to_bool(where, v);
        else if (key == "disable_micro") cfg.disable_micro = to_bool(where, v);
        else config_error("unknown key " + where);
      });
    } else if (section == "llm") {
      pt::ptree agent_keys;
      each([&](const std::string& key, const std::string& v, const std::string& where) {
        if (key == "endpoint") cfg.http_endpoint = v;
        else if (key == "api_key_env") cfg.api_key_env = v;
        else if (key == "max_in_flight") cfg.max_in_flight = to_int(where, v);
        else if (key == "max_retries") cfg.max_retries = to_int(where, v);
        else if (key == "retry_base_ms") cfg.retry_base_ms = to_int(where, v);
        else if (key == "timeout_s") cfg.timeout_s = to_int(where, v);
        else agent_keys.put(pt::ptree::path_type(key, '\0'), v);
      });
      read_agent(section, agent_keys, base, cfg.llm);
    } else if (section == "judge") {
      read_agent(section, node, base, cfg.judge);
    } else if (section.rfind("agent:", 0) == 0) {
      auto id = parse_template_id(section.substr(6));
      if (!id) config_error("unknown template in section [" + section + "]");
      cfg.agents[*id] = cfg.llm;  // filled after [llm] below
    } else if (section.rfind("dataset:", 0) == 0) {
      DatasetConfig d;
      d.name = section.substr(8);
      if (d.name.empty()) config_error("dataset section needs a name");
      bool have_start = false, have_end = false;
      each([&](const std::string& key, const std::string& v, const std::string& where) {
        if (key == "entities") d.entities = split_list(v);
        else if (key == "series_dir") d.series_dir = to_path(base, v);
        else if (key == "events_dir") d.events_dir = v.empty() ? std::filesystem::path() : to_path(base, v);
        else if (key == "eval_start") d.eval_start = to_date(where, v), have_start = true;
        else if (key == "eval_end") d.eval_end = to_date(where, v), have_end = true;
        else if (key == "horizons") {
          for (const auto& h : split_list(v)) d.horizons.push_back(to_int(where, h));
        } else if (key == "context_length") d.context_length = to_int(where, v);
        else if (key == "domain") d.domain = v;
        else if (key == "target_name") d.target_name = v;
        else config_error("unknown key " + where);
      });
      if (!have_start || !have_end) config_error("dataset " + d.name + " needs eval_start and eval_end");
      if (d.target_name.empty()) d.target_name = d.name;
      cfg.datasets.push_back(std::move(d));
    } else {
      config_error("unknown section [" + section + "]");
    }
  }
  // Agent overrides start from the [llm] defaults wherever that section appears in the file.
  for (auto& [id, settings] : cfg.agents) {
    settings = cfg.llm;
    read_agent("agent:" + std::string(to_string(id)), tree.get_child(pt::ptree::path_type("agent:" + std::string(to_string(id)), '\0')),
               base, settings);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) config_error("config file not found: " + path.string());
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    config_error(e.what());
  }
  return parse_config(text, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::string backend_id(const std::string& spec) { return spec.substr(0, spec.find(':')); }

std::shared_ptr<Backend> make_backend(const std::string& spec, const RunConfig& config) {
  std::shared_ptr<Backend> backend;
  const std::string kind = backend_id(spec);
  const std::string arg = spec.size() > kind.size() ? spec.substr(kind.size() + 1) : std::string();
  if (kind == "mock") {
    backend = std::make_shared<SimulatedAnalystBackend>();
  } else if (kind == "scripted") {
    if (arg.empty()) config_error("scripted backend needs a path: scripted:<path>");
    backend = ScriptedBackend::from_file(arg);
  } else if (kind == "http") {
    HttpChatConfig http;
    http.endpoint = arg.empty() ? config.http_endpoint : arg;
    if (http.endpoint.empty()) config_error("http backend needs an endpoint (http:<url> or [llm] endpoint)");
    http.api_key_env = config.api_key_env;
    http.max_in_flight = config.max_in_flight;
    http.retry.max_retries = config.max_retries;
    http.retry.base_delay = std::chrono::milliseconds(config.retry_base_ms);
    http.timeout = std::chrono::seconds(config.timeout_s);
    backend = std::make_shared<HttpChatBackend>(http);
  } else {
    config_error("unknown backend '" + spec + "' (expected mock, scripted:<path> or http[:<url>])");
  }
  if (!config.cache_dir.empty()) backend = std::make_shared<ReplayBackend>(config.cache_dir, backend);
  return backend;
}

namespace {

AgentBinding binding_for(const AgentSettings& a, const RunConfig& config,
                         std::map<std::string, std::shared_ptr<Backend>>& shared) {
  auto& backend = shared[a.backend];
  if (!backend) backend = make_backend(a.backend, config);
  return AgentBinding{backend, backend_id(a.backend), a.model, a.temperature, a.max_output_tokens};
}

}  // namespace

AgentRouter make_router(const RunConfig& config) {
  std::map<std::string, std::shared_ptr<Backend>> shared;
  AgentRouter router(binding_for(config.llm, config, shared));
  for (const auto& [id, a] : config.agents) router.set(id, binding_for(a, config, shared));
  return router;
}

AgentBinding make_judge_binding(const RunConfig& config) {
  std::map<std::string, std::shared_ptr<Backend>> shared;
  return binding_for(config.judge, config, shared);
}

}  // namespace nexus
