#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "nexus/error.hpp"
#include "nexus/ingest.hpp"
#include "nexus/llm.hpp"
#include "nexus/parsers.hpp"
#include "nexus/prompts.hpp"
#include "nexus/types.hpp"

namespace nexus {

/// Backend and model serving one template.
struct AgentBinding {
  std::shared_ptr<Backend> backend;
  std::string backend_id = "scripted";
  std::string model_id = "scripted";
  double temperature = kDefaultTemperature;
  int max_output_tokens = 8192;
};

/// Per-template binding table with a default.
class AgentRouter {
 public:
  AgentRouter() = default;
  explicit AgentRouter(AgentBinding fallback) : fallback_(std::move(fallback)) {}

  void set(TemplateId id, AgentBinding binding) { overrides_[id] = std::move(binding); }
  const AgentBinding& binding(TemplateId id) const;

 private:
  AgentBinding fallback_;
  std::map<TemplateId, AgentBinding> overrides_;
};

/// Why an agent reply was rejected; fed back to the model once as a repair hint.
struct AgentFailure {
  ErrorKind kind = ErrorKind::OutputParse;
  std::string message;
};

template <typename T>
using Validated = std::variant<T, AgentFailure>;

inline constexpr std::string_view kRepairSuffix =
    "\n\nYour previous output failed validation: {}. Re-emit in the exact required format.";

/// Renders nothing itself: sends `prompt`, validates the reply, re-prompts once with a repair suffix on
/// failure, and records every exchange in `trace`. A second failure throws with the failure's kind.
template <typename T>
T call_agent(const AgentBinding& binding, TemplateId id, const std::string& stage, const PromptPair& prompt,
             const std::function<Validated<T>(const std::string&)>& validate, std::vector<Exchange>& trace);

struct StructuredTimeline {
  std::vector<TimelineEntry> entries;
};

struct MacroOutlook {
  std::vector<double> values;
  std::string narrative;
};

struct MicroForecast {
  MicroOutlook outlook;
  /// Calendar date of each step, advanced from the origin at the task frequency.
  std::vector<Date> step_dates;
};

struct PipelineConfig {
  bool enable_macro = true;
  bool enable_micro = true;
  /// Accepted review guidelines; absent means the synthesizer prompt carries no guidelines block.
  std::optional<std::string> guidelines;
  AgentRouter router;

  /// Throws Config when both outlooks are disabled.
  void validate() const;
};

inline constexpr std::string_view kNotAvailable = "(not available)";
inline constexpr std::string_view kNoEventIntelligence = "(no event intelligence available)";
inline constexpr std::string_view kGuidelinesHeading = "**Review Guidelines (learned from past errors):**";

// Prompt-side serializations.
std::string history_block(const MultimodalContext& context);
std::string timeline_block(const StructuredTimeline& timeline);
std::string macro_block(const MacroOutlook& macro);
std::string micro_block(const MicroForecast& micro);
std::string guidelines_section(const std::string& guidelines);
std::string future_dates_block(const ForecastTask& task);
std::string history_values_block(const MultimodalContext& context);
std::string history_text_block(const ForecastTask& task);
/// Bracketed list at four decimals, as shown to judge and calibration prompts.
std::string format_values_4dp(const std::vector<double>& values);
/// Event texts over the forecast window (multimodal) or the realized moves described in words.
std::string describe_ground_truth(const ForecastTask& task);

StructuredTimeline contextualize(const ForecastTask& task, const AgentRouter& router, std::vector<Exchange>& trace);
MacroOutlook macro_forecast(const StructuredTimeline& timeline, const ForecastTask& task, const AgentRouter& router,
                            std::vector<Exchange>& trace);
MicroForecast micro_forecast(const StructuredTimeline& timeline, const ForecastTask& task, const AgentRouter& router,
                             std::vector<Exchange>& trace);

struct SynthesisInputs {
  const StructuredTimeline* timeline = nullptr;
  const MacroOutlook* macro = nullptr;
  const MicroForecast* micro = nullptr;
  const std::string* guidelines = nullptr;
};

/// Bindings for the value predictor; exposed so callers can inspect the exact prompt.
PromptPair synthesis_prompt(const SynthesisInputs& inputs, const ForecastTask& task);
ForecastResult synthesize(const SynthesisInputs& inputs, const ForecastTask& task, const AgentRouter& router,
                          std::vector<Exchange>& trace);

ForecastResult cot_forecast(const ForecastTask& task, const AgentRouter& router);

/// Everything a pipeline run produced, for persistence and calibration.
struct PipelineRun {
  ForecastResult result;
  StructuredTimeline timeline;
  std::optional<MacroOutlook> macro;
  std::optional<MicroForecast> micro;
  PromptPair synthesis;
};

/// contextualize -> (macro || micro) -> synthesize. Stage errors are annotated with the stage name.
PipelineRun run_pipeline(const ForecastTask& task, const PipelineConfig& config);

/// Re-runs only the synthesizer of `base` with different guidelines.
PipelineRun resynthesize(const PipelineRun& base, const ForecastTask& task, const PipelineConfig& config);

// --------------------------------------------------------------------------------------------------------

template <typename T>
T call_agent(const AgentBinding& binding, TemplateId id, const std::string& stage, const PromptPair& prompt,
             const std::function<Validated<T>(const std::string&)>& validate, std::vector<Exchange>& trace) {
  if (!binding.backend) throw Error(ErrorKind::Config, "no backend bound for template " + std::string(to_string(id)));
  LlmRequest request{binding.backend_id, binding.model_id,        prompt.system,
                     prompt.user,        binding.temperature,     binding.max_output_tokens};
  AgentFailure failure;
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) request.user_prompt = prompt.user + fmt::format(fmt::runtime(kRepairSuffix), failure.message);
    const LlmResponse response = complete(*binding.backend, request);
    trace.push_back(Exchange{stage, std::string(to_string(id)), request.backend_id, request.model_id, cache_key(request),
                             request.system_prompt, request.user_prompt, response.text, attempt == 1});
    auto checked = validate(response.text);
    if (auto* value = std::get_if<T>(&checked)) return std::move(*value);
    failure = std::get<AgentFailure>(checked);
  }
  throw Error(failure.kind, fmt::format("{} output rejected after one repair retry: {}", to_string(id), failure.message));
}

}  // namespace nexus
