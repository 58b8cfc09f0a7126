#include "nexus/agents.hpp"

#include <cmath>
#include <future>

#include <fmt/format.h>

#include "nexus/metrics.hpp"

namespace nexus {

namespace {

AgentFailure parse_failure(const ParseError& e) { return AgentFailure{ErrorKind::OutputParse, e.message()}; }

std::string indent_lines(const std::string& text, std::string_view prefix) {
  std::string out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const auto line = text.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
    if (!out.empty()) out += '\n';
    out += prefix;
    out += line;
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return out;
}

template <typename F>
auto in_stage(const std::string& stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  }
}

}  // namespace

const AgentBinding& AgentRouter::binding(TemplateId id) const {
  auto it = overrides_.find(id);
  return it == overrides_.end() ? fallback_ : it->second;
}

void PipelineConfig::validate() const {
  if (!enable_macro && !enable_micro) {
    throw Error(ErrorKind::Config, "at least one of the macro and micro agents must be enabled");
  }
}

std::string history_block(const MultimodalContext& context) {
  std::string out;
  for (const auto& p : context.series.points) {
    if (!out.empty()) out += '\n';
    out += fmt::format("Date: {} | Value: {}", p.date.iso(), format_number(p.value));
    if (context.events) {
      if (const auto* text = context.events->find(p.date); text && !text->empty()) {
        out += '\n';
        out += indent_lines("Events: " + *text, "  ");
      }
    }
  }
  return out;
}

std::string timeline_block(const StructuredTimeline& timeline) { return format_timeline(timeline.entries); }

std::string macro_block(const MacroOutlook& macro) {
  return fmt::format("{}\nForecasted Values: {}", macro.narrative, format_value_list(macro.values));
}

std::string micro_block(const MicroForecast& micro) {
  std::string out;
  for (const auto& s : micro.outlook.steps) {
    if (!out.empty()) out += '\n';
    out += fmt::format("Step {} | Date: {} | Day Info: {} | Movement: {} | Key Drivers: {} | Value: {}", s.timestamp,
                       s.date, s.day_info, to_string(s.movement), s.key_drivers, format_number(s.adjusted_forecast_value));
  }
  return out;
}

std::string guidelines_section(const std::string& guidelines) {
  return fmt::format("{}\n{}\n", kGuidelinesHeading, guidelines);
}

std::string future_dates_block(const ForecastTask& task) {
  std::vector<std::string> dates;
  for (const auto& d : task.future_dates()) dates.push_back(d.iso());
  return fmt::format("{}", fmt::join(dates, ", "));
}

std::string history_values_block(const MultimodalContext& context) {
  std::string out;
  for (const auto& p : context.series.points) {
    if (!out.empty()) out += '\n';
    out += fmt::format("{}: {}", p.date.iso(), format_number(p.value));
  }
  return out;
}

std::string history_text_block(const ForecastTask& task) {
  if (task.setting == Setting::NumericalOnly || !task.context.events || task.context.events->empty()) {
    return std::string(kNoEventIntelligence);
  }
  std::string out;
  for (const auto& e : task.context.events->entries) {
    if (!out.empty()) out += '\n';
    out += fmt::format("{}: {}", e.date.iso(), e.text);
  }
  return out;
}

std::string format_values_4dp(const std::vector<double>& values) {
  std::vector<std::string> parts;
  for (double v : values) parts.push_back(fmt::format("{:.4f}", v));
  return fmt::format("[{}]", fmt::join(parts, ", "));
}

std::string describe_ground_truth(const ForecastTask& task) {
  if (task.setting == Setting::Multimodal) {
    if (task.truth_events.empty()) return "No notable events were reported during the forecast horizon.";
    std::string out;
    for (const auto& e : task.truth_events) {
      if (!out.empty()) out += '\n';
      out += fmt::format("{}: {}", e.date.iso(), e.text);
    }
    return out;
  }
  std::string out;
  double previous = task.context.series.points.back().value;
  for (std::size_t i = 0; i < task.truth.size(); ++i) {
    const double value = task.truth[i].value;
    const double change = previous != 0.0 ? (value - previous) / std::abs(previous) * 100.0 : 0.0;
    std::string move;
    if (std::abs(change) < 0.5) {
      move = "held roughly flat";
    } else {
      move = fmt::format("{} {:.1f}%", change > 0 ? "rose" : "fell", std::abs(change));
    }
    if (!out.empty()) out += '\n';
    out += fmt::format("Step {} ({}): the value {} from the previous step.", i + 1, task.truth[i].date.iso(), move);
    previous = value;
  }
  return out;
}

StructuredTimeline contextualize(const ForecastTask& task, const AgentRouter& router, std::vector<Exchange>& trace) {
  const auto& points = task.context.series.points;
  if (points.empty()) throw Error(ErrorKind::PreconditionViolation, "task context is empty");
  const std::string features = points.size() >= 8 ? render_features(ts_features(task.context.series))
                                                  : std::string("(insufficient history for summary features)");
  const PromptPair prompt = render(TemplateId::ContextAgent, {{"target_name", task.context.target_name},
                                                              {"ts_features", features},
                                                              {"domain", task.context.domain_label},
                                                              {"history_str", history_block(task.context)}});

  std::function<Validated<StructuredTimeline>(const std::string&)> validate =
      [&](const std::string& reply) -> Validated<StructuredTimeline> {
    auto parsed = parse_timeline(reply);
    if (!parsed) return AgentFailure{ErrorKind::TimelineParse, parsed.error().message()};
    StructuredTimeline timeline{std::move(parsed).value()};
    if (timeline.entries.size() != points.size()) {
      return AgentFailure{ErrorKind::TimelineParse, fmt::format("expected {} timeline entries, got {}", points.size(),
                                                                timeline.entries.size())};
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (std::abs(timeline.entries[i].value - points[i].value) > 1e-6) {
        return AgentFailure{ErrorKind::ValueDrift,
                            fmt::format("timeline value {} for {} differs from the recorded {}",
                                        format_number(timeline.entries[i].value), points[i].date.iso(),
                                        format_number(points[i].value))};
      }
      timeline.entries[i].date = points[i].date.iso();
      timeline.entries[i].value = points[i].value;
    }
    return timeline;
  };
  return call_agent(router.binding(TemplateId::ContextAgent), TemplateId::ContextAgent, "context", prompt, validate,
                    trace);
}

MacroOutlook macro_forecast(const StructuredTimeline& timeline, const ForecastTask& task, const AgentRouter& router,
                            std::vector<Exchange>& trace) {
  if (timeline.entries.empty()) throw Error(ErrorKind::PreconditionViolation, "timeline is empty");
  const PromptPair prompt = render(TemplateId::MacroAgent, {{"horizon", std::to_string(task.horizon)},
                                                            {"target_name", task.context.target_name},
                                                            {"history_str", timeline_block(timeline)}});
  std::function<Validated<MacroOutlook>(const std::string&)> validate =
      [&](const std::string& reply) -> Validated<MacroOutlook> {
    auto parsed = parse_tagged_forecast(reply, task.horizon);
    if (!parsed) return parse_failure(parsed.error());
    return MacroOutlook{parsed->values, parsed->reasoning};
  };
  return call_agent(router.binding(TemplateId::MacroAgent), TemplateId::MacroAgent, "macro", prompt, validate, trace);
}

MicroForecast micro_forecast(const StructuredTimeline& timeline, const ForecastTask& task, const AgentRouter& router,
                             std::vector<Exchange>& trace) {
  if (timeline.entries.empty()) throw Error(ErrorKind::PreconditionViolation, "timeline is empty");
  const PromptPair prompt = render(TemplateId::MicroAgent, {{"horizon", std::to_string(task.horizon)},
                                                            {"target_name", task.context.target_name},
                                                            {"frequency", std::string(to_string(task.frequency))},
                                                            {"history_str", timeline_block(timeline)}});
  std::function<Validated<MicroForecast>(const std::string&)> validate =
      [&](const std::string& reply) -> Validated<MicroForecast> {
    auto parsed = parse_micro_json(reply, task.horizon);
    if (!parsed) {
      const auto& e = parsed.error();
      return AgentFailure{ErrorKind::OutputParse, e.message()};
    }
    return MicroForecast{std::move(parsed).value(), task.future_dates()};
  };
  return call_agent(router.binding(TemplateId::MicroAgent), TemplateId::MicroAgent, "micro", prompt, validate, trace);
}

PromptPair synthesis_prompt(const SynthesisInputs& in, const ForecastTask& task) {
  if (!in.timeline) throw Error(ErrorKind::PreconditionViolation, "synthesis needs the structured timeline");
  if (!in.macro && !in.micro) throw Error(ErrorKind::PreconditionViolation, "synthesis needs at least one outlook");
  Bindings bindings{{"target_name", task.context.target_name},
                    {"horizon", std::to_string(task.horizon)},
                    {"frequency", std::string(to_string(task.frequency))},
                    {"future_dates", future_dates_block(task)},
                    {"history_str", timeline_block(*in.timeline)},
                    {"macro_reasoning_str", in.macro ? macro_block(*in.macro) : std::string(kNotAvailable)},
                    {"micro_reasoning_str", in.micro ? micro_block(*in.micro) : std::string(kNotAvailable)}};
  if (in.guidelines && !in.guidelines->empty()) bindings["guidelines_section"] = guidelines_section(*in.guidelines);
  return render(TemplateId::ValuePredictor, bindings);
}

ForecastResult synthesize(const SynthesisInputs& inputs, const ForecastTask& task, const AgentRouter& router,
                          std::vector<Exchange>& trace) {
  const PromptPair prompt = synthesis_prompt(inputs, task);
  std::function<Validated<TaggedForecast>(const std::string&)> validate =
      [&](const std::string& reply) -> Validated<TaggedForecast> {
    auto parsed = parse_tagged_forecast(reply, task.horizon);
    if (!parsed) return parse_failure(parsed.error());
    return std::move(parsed).value();
  };
  TaggedForecast final = call_agent(router.binding(TemplateId::ValuePredictor), TemplateId::ValuePredictor, "synthesis",
                                    prompt, validate, trace);
  return ForecastResult{std::move(final.values), std::move(final.reasoning), {}};
}

ForecastResult cot_forecast(const ForecastTask& task, const AgentRouter& router) {
  const auto& points = task.context.series.points;
  if (points.empty()) throw Error(ErrorKind::PreconditionViolation, "task context is empty");
  const PromptPair prompt = render(TemplateId::CotBaseline, {{"target_name", task.context.target_name},
                                                             {"domain", task.context.domain_label},
                                                             {"last_date", points.back().date.iso()},
                                                             {"horizon", std::to_string(task.horizon)},
                                                             {"frequency", std::string(to_string(task.frequency))},
                                                             {"start_date", points.front().date.iso()},
                                                             {"history_values_str", history_values_block(task.context)},
                                                             {"history_text_str", history_text_block(task)}});
  struct Reply {
    std::vector<double> values;
    std::string reasoning;
  };
  std::function<Validated<Reply>(const std::string&)> validate = [&](const std::string& reply) -> Validated<Reply> {
    auto parsed = parse_prediction_tag(reply, task.horizon);
    if (!parsed) return parse_failure(parsed.error());
    const auto tag = std::get<TagMatch>(find_tag(reply, "prediction"));
    std::string outside = reply.substr(0, tag.span.begin) + reply.substr(tag.span.end);
    const auto first = outside.find_first_not_of(" \t\r\n");
    const auto last = outside.find_last_not_of(" \t\r\n");
    outside = first == std::string::npos ? std::string() : outside.substr(first, last - first + 1);
    return Reply{std::move(parsed).value(), std::move(outside)};
  };
  ForecastResult result;
  in_stage("cot", [&] {
    Reply r = call_agent(router.binding(TemplateId::CotBaseline), TemplateId::CotBaseline, "cot", prompt, validate,
                         result.trace);
    result.values = std::move(r.values);
    result.reasoning = std::move(r.reasoning);
  });
  return result;
}

PipelineRun run_pipeline(const ForecastTask& task, const PipelineConfig& config) {
  config.validate();
  PipelineRun run;
  std::vector<Exchange> context_trace, macro_trace, micro_trace, synth_trace;

  run.timeline = in_stage("context", [&] { return contextualize(task, config.router, context_trace); });

  std::future<MacroOutlook> macro_future;
  if (config.enable_macro && config.enable_micro) {
    macro_future = std::async(std::launch::async, [&] {
      return in_stage("macro", [&] { return macro_forecast(run.timeline, task, config.router, macro_trace); });
    });
  } else if (config.enable_macro) {
    run.macro = in_stage("macro", [&] { return macro_forecast(run.timeline, task, config.router, macro_trace); });
  }
  if (config.enable_micro) {
    try {
      run.micro = in_stage("micro", [&] { return micro_forecast(run.timeline, task, config.router, micro_trace); });
    } catch (...) {
      if (macro_future.valid()) macro_future.wait();
      throw;
    }
  }
  if (macro_future.valid()) run.macro = macro_future.get();

  const SynthesisInputs inputs{&run.timeline, run.macro ? &*run.macro : nullptr, run.micro ? &*run.micro : nullptr,
                               config.guidelines ? &*config.guidelines : nullptr};
  run.synthesis = in_stage("synthesis", [&] { return synthesis_prompt(inputs, task); });
  run.result = in_stage("synthesis", [&] { return synthesize(inputs, task, config.router, synth_trace); });

  for (auto* part : {&context_trace, &macro_trace, &micro_trace, &synth_trace}) {
    run.result.trace.insert(run.result.trace.end(), part->begin(), part->end());
  }
  return run;
}

PipelineRun resynthesize(const PipelineRun& base, const ForecastTask& task, const PipelineConfig& config) {
  PipelineRun run = base;
  std::vector<Exchange> trace;
  const SynthesisInputs inputs{&run.timeline, run.macro ? &*run.macro : nullptr, run.micro ? &*run.micro : nullptr,
                               config.guidelines ? &*config.guidelines : nullptr};
  run.synthesis = in_stage("synthesis", [&] { return synthesis_prompt(inputs, task); });
  run.result = in_stage("synthesis", [&] { return synthesize(inputs, task, config.router, trace); });
  run.result.trace = std::move(trace);
  return run;
}

}  // namespace nexus
