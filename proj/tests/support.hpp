#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "nexus/agents.hpp"
#include "nexus/calibration.hpp"
#include "nexus/ingest.hpp"
#include "nexus/llm.hpp"
#include "nexus/prompts.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return NEXUS_TEST_DATA; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("nexus_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

/// Every file below `root`, keyed by relative path.
inline std::map<std::string, std::string> tree_bytes(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).generic_string()] = slurp(e.path());
  }
  return out;
}

/// A binding served by the simulated analyst through a scripted backend.
inline nexus::AgentBinding analyst_binding(std::shared_ptr<nexus::ScriptedBackend>* out = nullptr) {
  auto backend = std::make_shared<nexus::ScriptedBackend>();
  backend->set_responder(nexus::simulated_analyst_reply);
  if (out) *out = backend;
  return nexus::AgentBinding{backend, "scripted", "simulated-analyst"};
}

/// `<hex>  <id>.<part>` lines of golden/SHA256SUMS keyed by `<id>.<part>`.
inline std::map<std::string, std::string> golden_hashes() {
  std::map<std::string, std::string> out;
  std::istringstream in(slurp(data_dir() / "golden" / "SHA256SUMS"));
  std::string hex, name;
  while (in >> hex >> name) out[name] = hex;
  return out;
}

/// Binds every placeholder of a template to `<NAME_UPPER>`.
inline nexus::Bindings upper_bindings(nexus::TemplateId id) {
  nexus::Bindings b;
  for (const auto& p : nexus::prompt_template(id).placeholders) {
    std::string up;
    for (char c : p) up += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    b[p] = "<" + up + ">";
  }
  return b;
}

/// Mismatches of the published templates against the golden hashes and renders; empty when all agree.
inline std::vector<std::string> golden_mismatches() {
  std::vector<std::string> bad;
  const auto hashes = golden_hashes();
  for (auto id : nexus::kPublishedTemplates) {
    const std::string name(nexus::to_string(id));
    const auto& t = nexus::prompt_template(id);
    auto sys = hashes.find(name + ".system");
    auto usr = hashes.find(name + ".user");
    if (sys == hashes.end() || sha256_hex(t.system_text) != sys->second) bad.push_back(name + ".system");
    if (usr == hashes.end() || sha256_hex(t.user_text) != usr->second) bad.push_back(name + ".user");
    const auto expected = slurp(data_dir() / "golden" / "rendered" / (name + ".txt"));
    if (nexus::render(id, upper_bindings(id)).user != expected) bad.push_back(name + ".render");
  }
  return bad;
}

inline nexus::MultimodalContext synthetic(std::uint64_t seed, int length = 80, double event_rate = 0.2) {
  nexus::SynthSpec spec;
  spec.length = length;
  spec.event_rate = event_rate;
  spec.entity_id = "e" + std::to_string(seed);
  return nexus::synth_context(spec, seed);
}

/// Flat history at 100 whose synthesizer answers 110 without guidelines (MAPE 0.10) and `with_value` with them.
/// Every other prompt is served by the simulated analyst.
inline nexus::CalibrationOutcome gate_fixture(double with_value, double k = 0.05, int horizon = 4) {
  using namespace nexus;
  MultimodalContext history;
  history.series.entity_id = "flat";
  history.target_name = "Flat Target";
  history.domain_label = "Test Market";
  for (int i = 0; i < 60; ++i) history.series.points.push_back({Date{2023, 1, 6}.plus_days(7 * i), 100.0});

  const auto& vp = prompt_template(TemplateId::ValuePredictor).system_text;
  auto backend = std::make_shared<ScriptedBackend>();
  backend->add_rule({vp, std::string(kGuidelinesHeading),
                     format_tagged_forecast({"guided", std::vector<double>(horizon, with_value)})});
  backend->add_rule({vp, "", format_tagged_forecast({"unguided", std::vector<double>(horizon, 110.0)})});
  backend->set_responder(simulated_analyst_reply);

  PipelineConfig pipeline;
  pipeline.router = AgentRouter(AgentBinding{backend, "scripted", "fixture"});
  CalibrationConfig cfg;
  cfg.k = k;
  cfg.horizon = horizon;
  cfg.context_length = 30;
  cfg.mode = ConsolidationMode::Sentences;
  return calibrate_entity(history, cfg, pipeline);
}

/// First broken invariant of make_splits for the arguments, empty when all hold.
inline std::string splits_violation(int length, int n, int horizon, int context) {
  const auto folds = nexus::make_splits(length, n, horizon, context);
  if (static_cast<int>(folds.size()) != n) return "fold count";
  for (int i = 0; i < n; ++i) {
    const auto& f = folds[i];
    if (f.index != i + 1) return "index";
    if (f.horizon != horizon) return "horizon";
    if ((f.role == nexus::FoldRole::HiddenValidation) != (i == n - 1)) return "role";
    if (f.origin_index + 1 < context) return "context does not fit";
    if (i > 0 && f.first_target() != folds[i - 1].last_target() + 1) return "not contiguous";
    if (i > 0 && f.origin_index <= folds[i - 1].origin_index) return "not chronological";
  }
  if (folds.back().last_target() != length - 1) return "last fold does not end the history";
  return {};
}

}  // namespace testing
