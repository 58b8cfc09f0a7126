#include "nexus/calibration.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include <fmt/format.h>

#include "nexus/metrics.hpp"
#include "nexus/parallel.hpp"

namespace nexus {

std::string_view to_string(FoldRole role) {
  return role == FoldRole::Training ? "training" : "hidden_validation";
}

std::vector<Fold> make_splits(int history_length, int n, int horizon, int context_length) {
  if (n < 1 || horizon < 1 || context_length < 1) {
    throw Error(ErrorKind::BadSpec, "n, horizon and context length must be positive");
  }
  const long need = static_cast<long>(context_length) + static_cast<long>(n) * horizon;
  if (history_length < need) {
    throw Error(ErrorKind::HistoryTooShort,
                fmt::format("{} folds of horizon {} with context {} need {} points, history has {}", n, horizon,
                            context_length, need, history_length));
  }
  const int tau = history_length - 1;
  std::vector<Fold> folds;
  for (int i = 1; i <= n; ++i) {
    folds.push_back(Fold{i, tau - (n - i + 1) * horizon, horizon, i == n ? FoldRole::HiddenValidation : FoldRole::Training});
  }
  return folds;
}

GateDecision gate(double mape_without, double mape_with, double k) {
  if (!(mape_without > 0.0)) {
    throw Error(ErrorKind::NonPositiveBaseline, fmt::format("validation MAPE without guidelines is {}", mape_without));
  }
  const double improvement = (mape_without - mape_with) / mape_without;
  return {improvement, improvement >= k - 1e-12};
}

namespace {

std::string mape_4dp(const std::optional<double>& v) {
  return v ? fmt::format("{:.4f}", *v) : std::string(kNotAvailable);
}

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

std::string trim_copy(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Bindings critique_bindings(const FoldRun& run, const FoldTruth& truth) {
  return {{"value_predictor_prompt", run.prompt.user},
          {"agent_reasoning", run.reasoning},
          {"agent_values", format_values_4dp(run.values)},
          {"agent_error", fmt::format("{:.4f}", run.mape)},
          {"macro_mape", mape_4dp(run.macro_mape)},
          {"micro_mape", mape_4dp(run.micro_mape)},
          {"actual_events_summary", truth.events_summary},
          {"actual_values", format_values_4dp(truth.values)}};
}

FoldCritique critique_fold(const Fold& fold, const FoldRun& run, const FoldTruth& truth, const AgentRouter& router,
                           std::vector<Exchange>& trace) {
  if (fold.role != FoldRole::Training) {
    throw Error(ErrorKind::PreconditionViolation, "the hidden validation fold must not be critiqued");
  }
  if (truth.values.empty()) throw Error(ErrorKind::PreconditionViolation, "fold has no ground truth");
  const PromptPair prompt = render(TemplateId::CalibrationAgent, critique_bindings(run, truth));
  std::function<Validated<CalibrationCritique>(const std::string&)> validate =
      [](const std::string& reply) -> Validated<CalibrationCritique> {
    auto parsed = parse_calibration(reply);
    if (!parsed) return AgentFailure{ErrorKind::OutputParse, parsed.error().message()};
    if (trim_copy(parsed->guidelines).empty()) return AgentFailure{ErrorKind::OutputParse, "guidelines block is empty"};
    return std::move(parsed).value();
  };
  auto critique = call_agent(router.binding(TemplateId::CalibrationAgent), TemplateId::CalibrationAgent, "calibration",
                             prompt, validate, trace);
  return FoldCritique{fold.index, trim_copy(critique.diagnosis), trim_copy(critique.guidelines), run.mape};
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    const bool end = i == text.size() ||
                     (is_terminal(text[i]) && (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))));
    if (!end) continue;
    const std::size_t stop = i == text.size() ? i : i + 1;
    auto s = trim_copy(text.substr(start, stop - start));
    if (!normalize_sentence(s).empty()) out.push_back(std::move(s));
    start = stop;
  }
  return out;
}

std::string normalize_sentence(std::string_view sentence) {
  std::string out;
  bool space = false;
  for (char c : sentence) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80) {
      if (space && !out.empty()) out += ' ';
      space = false;
      out += static_cast<char>(std::tolower(u));
    } else if (std::isspace(u)) {
      space = true;
    }
  }
  return out;
}

std::string consolidate_sentences(const std::vector<std::string>& texts, SupportRule rule) {
  if (texts.empty()) throw Error(ErrorKind::EmptyInput, "no guidelines to consolidate");
  std::map<std::string, std::pair<int, std::string>> support;  // key -> (count, smallest spelling)
  for (const auto& text : texts) {
    std::set<std::string> seen;
    for (auto& s : split_sentences(text)) {
      auto key = normalize_sentence(s);
      if (!seen.insert(key).second) continue;
      auto [it, fresh] = support.try_emplace(key, 0, s);
      ++it->second.first;
      if (!fresh && s < it->second.second) it->second.second = s;
    }
  }
  const int n = static_cast<int>(texts.size());
  std::vector<std::string> kept;
  for (auto& [key, entry] : support) {
    const bool ok = rule == SupportRule::All ? entry.first == n : entry.first * 2 > n;
    if (!ok) continue;
    std::string s = entry.second;
    if (!is_terminal(s.back())) s += '.';
    kept.push_back(std::move(s));
  }
  if (kept.empty()) throw Error(ErrorKind::EmptyIntersection, "no guideline is shared by enough folds");
  return fmt::format("{}", fmt::join(kept, " "));
}

Guidelines consolidate_guidelines(const std::vector<FoldCritique>& critiques, SupportRule rule, ConsolidationMode mode,
                                  const AgentRouter& router, std::vector<Exchange>& trace) {
  if (critiques.empty()) throw Error(ErrorKind::EmptyInput, "no critiques to consolidate");
  const AgentBinding& binding = router.binding(TemplateId::GuidelineConsolidation);
  const bool llm = mode == ConsolidationMode::Llm ||
                   (mode == ConsolidationMode::Auto && binding.backend && binding.backend->is_live());
  Guidelines out;
  if (!llm) {
    std::vector<std::string> texts;
    for (const auto& c : critiques) texts.push_back(c.guidelines);
    out.text = consolidate_sentences(texts, rule);
    std::set<std::string> kept;
    for (const auto& s : split_sentences(out.text)) kept.insert(normalize_sentence(s));
    for (const auto& c : critiques) {
      for (const auto& s : split_sentences(c.guidelines)) {
        if (kept.count(normalize_sentence(s))) {
          out.supporting_folds.insert(c.fold_index);
          break;
        }
      }
    }
    return out;
  }

  const int n = static_cast<int>(critiques.size());
  std::string folds;
  for (const auto& c : critiques) {
    if (!folds.empty()) folds += '\n';
    std::string flat = c.guidelines;
    std::replace(flat.begin(), flat.end(), '\n', ' ');
    folds += fmt::format("Fold {}: {}", c.fold_index, flat);
  }
  const int min_support = rule == SupportRule::All ? n : n / 2 + 1;
  const PromptPair prompt = render(TemplateId::GuidelineConsolidation, {{"fold_count", std::to_string(n)},
                                                                        {"fold_guidelines", folds},
                                                                        {"min_support", std::to_string(min_support)}});
  std::function<Validated<std::string>(const std::string&)> validate = [](const std::string& reply) -> Validated<std::string> {
    auto parsed = parse_consolidated_guidelines(reply);
    if (!parsed) return AgentFailure{ErrorKind::OutputParse, parsed.error().message()};
    return std::move(parsed).value();
  };
  out.text = call_agent(binding, TemplateId::GuidelineConsolidation, "consolidation", prompt, validate, trace);
  if (out.text.empty()) throw Error(ErrorKind::EmptyIntersection, "consolidation kept no guideline");
  for (const auto& c : critiques) out.supporting_folds.insert(c.fold_index);
  return out;
}

void CalibrationConfig::validate() const {
  if (n < 2) throw Error(ErrorKind::Config, fmt::format("calibration needs n >= 2 folds, got {}", n));
  if (!(k > 0.0 && k < 1.0)) throw Error(ErrorKind::Config, fmt::format("k must lie in (0, 1), got {}", k));
  if (horizon < 1 || context_length < 1) throw Error(ErrorKind::Config, "horizon and context length must be positive");
}

std::optional<std::string> CalibrationOutcome::accepted_guidelines() const {
  if (guidelines.accepted && !guidelines.text.empty()) return guidelines.text;
  return std::nullopt;
}

namespace {

FoldRun fold_run(const PipelineRun& run, const ForecastTask& task) {
  const auto truth = task.truth_values();
  FoldRun out;
  out.prompt = run.synthesis;
  out.reasoning = run.result.reasoning;
  out.values = run.result.values;
  out.mape = mape(truth, out.values);
  if (run.macro) out.macro_mape = mape(truth, run.macro->values);
  if (run.micro) out.micro_mape = mape(truth, run.micro->outlook.values());
  return out;
}

}  // namespace

CalibrationOutcome calibrate_entity(const MultimodalContext& history, const CalibrationConfig& config,
                                    const PipelineConfig& pipeline) {
  config.validate();
  const auto folds = make_splits(static_cast<int>(history.series.size()), config.n, config.horizon, config.context_length);

  PipelineConfig base = pipeline;
  base.guidelines.reset();

  std::vector<ForecastTask> tasks;
  for (const auto& f : folds) {
    tasks.push_back(make_task(history, f.origin_index, f.horizon, config.context_length, config.setting));
  }

  CalibrationOutcome outcome;
  outcome.folds.resize(folds.size());
  std::vector<PipelineRun> runs(folds.size());
  parallel_for(folds.size(), config.workers, [&](std::size_t i) {
    runs[i] = run_pipeline(tasks[i], base);
    auto& rec = outcome.folds[i];
    rec.fold = folds[i];
    rec.origin_date = tasks[i].last_context_date().iso();
    rec.run = fold_run(runs[i], tasks[i]);
    rec.trace = runs[i].result.trace;
  });

  const std::size_t training = folds.size() - 1;
  std::vector<std::vector<Exchange>> critique_traces(training);
  outcome.critiques.resize(training);
  parallel_for(training, config.workers, [&](std::size_t i) {
    outcome.critiques[i] = critique_fold(folds[i], outcome.folds[i].run,
                                         FoldTruth{describe_ground_truth(tasks[i]), tasks[i].truth_values()},
                                         pipeline.router, critique_traces[i]);
  });
  for (std::size_t i = 0; i < training; ++i) {
    auto& t = outcome.folds[i].trace;
    t.insert(t.end(), critique_traces[i].begin(), critique_traces[i].end());
  }

  const std::size_t v = folds.size() - 1;
  outcome.validation_mape_without = outcome.folds[v].run.mape;
  try {
    outcome.guidelines =
        consolidate_guidelines(outcome.critiques, config.support, config.mode, pipeline.router, outcome.consolidation_trace);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::EmptyIntersection) throw;
    outcome.guidelines = Guidelines{};
    return outcome;
  }

  PipelineConfig guided = pipeline;
  guided.guidelines = outcome.guidelines.text;
  const PipelineRun rerun = resynthesize(runs[v], tasks[v], guided);
  outcome.validation_trace = rerun.result.trace;
  outcome.validation_mape_with = mape(tasks[v].truth_values(), rerun.result.values);
  const auto decision = gate(outcome.validation_mape_without, *outcome.validation_mape_with, config.k);
  outcome.guidelines.accepted = decision.accepted;
  outcome.guidelines.improvement = decision.improvement;
  return outcome;
}

nlohmann::json to_json(const Exchange& e) {
  return {{"stage", e.stage},
          {"template_id", e.template_id},
          {"backend_id", e.backend_id},
          {"model_id", e.model_id},
          {"cache_key", e.cache_key},
          {"system_prompt", e.system_prompt},
          {"user_prompt", e.user_prompt},
          {"response", e.response},
          {"repair", e.repair}};
}

namespace {

nlohmann::json trace_json(const std::vector<Exchange>& trace) {
  auto out = nlohmann::json::array();
  for (const auto& e : trace) out.push_back(to_json(e));
  return out;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

nlohmann::json to_json(const CalibrationOutcome& o) {
  auto folds = nlohmann::json::array();
  for (const auto& f : o.folds) {
    folds.push_back({{"index", f.fold.index},
                     {"role", to_string(f.fold.role)},
                     {"origin_index", f.fold.origin_index},
                     {"origin_date", f.origin_date},
                     {"horizon", f.fold.horizon},
                     {"values", f.run.values},
                     {"mape", f.run.mape},
                     {"macro_mape", optional_json(f.run.macro_mape)},
                     {"micro_mape", optional_json(f.run.micro_mape)},
                     {"trace", trace_json(f.trace)}});
  }
  auto critiques = nlohmann::json::array();
  for (const auto& c : o.critiques) {
    critiques.push_back(
        {{"fold_index", c.fold_index}, {"diagnosis", c.diagnosis}, {"guidelines", c.guidelines}, {"fold_mape", c.fold_mape}});
  }
  return {{"folds", folds},
          {"critiques", critiques},
          {"guidelines",
           {{"text", o.guidelines.text},
            {"supporting_folds", o.guidelines.supporting_folds},
            {"accepted", o.guidelines.accepted},
            {"improvement", o.guidelines.improvement}}},
          {"validation_mape_without", o.validation_mape_without},
          {"validation_mape_with", optional_json(o.validation_mape_with)},
          {"consolidation_trace", trace_json(o.consolidation_trace)},
          {"validation_trace", trace_json(o.validation_trace)}};
}

}  // namespace nexus
