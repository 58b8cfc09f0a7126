// Deterministic replies for every pipeline template, computed from the numbers in the prompt.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>

#include <fmt/format.h>

#include "nexus/agents.hpp"
#include "nexus/calibration.hpp"
#include "nexus/date.hpp"
#include "nexus/llm.hpp"
#include "nexus/parsers.hpp"
#include "nexus/prompts.hpp"

namespace nexus {

namespace {

std::string_view between(std::string_view text, std::string_view open, std::string_view close) {
  auto b = text.find(open);
  if (b == std::string_view::npos) return {};
  b += open.size();
  auto e = close.empty() ? std::string_view::npos : text.find(close, b);
  return text.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b);
}

int read_int(std::string_view text, const std::regex& re) {
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, re)) return 0;
  return std::stoi(m[1].str());
}

std::vector<double> read_list(std::string_view text) {
  std::vector<double> out;
  const auto open = text.find('[');
  const auto close = text.find(']', open);
  if (open == std::string_view::npos || close == std::string_view::npos) return out;
  std::string_view body = text.substr(open + 1, close - open - 1);
  while (!body.empty()) {
    const auto comma = body.find(',');
    std::string token(body.substr(0, comma));
    token.erase(std::remove_if(token.begin(), token.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
                token.end());
    double v = 0;
    if (!token.empty() && parse_real(token, v)) out.push_back(v);
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
  }
  return out;
}

double mean_drift(const std::vector<double>& values, std::size_t window) {
  if (values.size() < 2) return 0.0;
  const std::size_t n = std::min(window, values.size() - 1);
  return (values.back() - values[values.size() - 1 - n]) / static_cast<double>(n);
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

std::vector<double> timeline_values(std::string_view block) {
  std::vector<double> out;
  auto parsed = parse_timeline(block);
  if (!parsed) return out;
  for (const auto& e : *parsed) out.push_back(e.value);
  return out;
}

std::string describe_step(double from, double to) {
  if (from == 0.0 || std::abs(to - from) / std::abs(from) < 0.001) return "held steady";
  return fmt::format("{} {:.2f}%", to > from ? "rose" : "fell", std::abs(to - from) / std::abs(from) * 100.0);
}

std::string context_reply(std::string_view user) {
  static const std::regex kLine(R"(^Date: (\S+) \| Value: (\S+)$)");
  const std::string_view block = between(user, "**Historical Data (Text & Values):**\n", "\n\n**Output:**");
  std::vector<TimelineEntry> entries;
  std::size_t pos = 0;
  while (pos < block.size()) {
    auto nl = block.find('\n', pos);
    const std::string line(block.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? block.size() : nl + 1;
    std::smatch m;
    if (std::regex_match(line, m, kLine)) {
      double v = 0;
      parse_real(m[2].str(), v);
      entries.push_back({m[1].str(), v, {}});
    } else if (!entries.empty() && line.rfind("  ", 0) == 0) {
      std::string text = line.substr(2);
      if (text.rfind("Events: ", 0) == 0) text = text.substr(8);
      auto& c = entries.back().content;
      c += c.empty() ? text : "; " + text;
    }
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    std::string movement = i == 0 ? "First observation in the window."
                                   : fmt::format("The value {} from the previous step.",
                                                 describe_step(entries[i - 1].value, entries[i].value));
    auto& c = entries[i].content;
    c = c.empty() ? movement : c + ". " + movement;
  }
  return format_timeline(entries);
}

std::string macro_reply(std::string_view user) {
  static const std::regex kHorizon(R"(Predict the next (\d+) values)");
  const int horizon = read_int(user, kHorizon);
  const auto history = timeline_values(between(user, "**Historical Context:**\n", "\n\n**Instructions:**"));
  if (history.empty() || horizon <= 0) return "<reasoning>No usable history.</reasoning>";
  const double drift = mean_drift(history, 12);
  TaggedForecast out;
  out.reasoning = fmt::format(
      "The series last printed {} and has moved {} per step on average over the recent window. "
      "The trend is carried forward at that pace across all {} steps.",
      format_number(history.back()), format_number(round4(drift)), horizon);
  for (int t = 1; t <= horizon; ++t) out.values.push_back(round4(history.back() + drift * t));
  return format_tagged_forecast(out);
}

std::string micro_reply(std::string_view user) {
  static const std::regex kHorizon(R"(Predict the next (\d+) values and events)");
  const int horizon = read_int(user, kHorizon);
  const std::string_view block = between(user, "**Historical Data:**\n", "\n\n**Required Output Format:**");
  auto parsed = parse_timeline(block);
  if (!parsed || parsed->empty() || horizon <= 0) return "{}";
  std::vector<double> history;
  for (const auto& e : *parsed) history.push_back(e.value);
  const double drift = mean_drift(history, 4);
  const auto parsed_last = Date::parse(parsed->back().date);
  if (!parsed_last) return "{}";
  const Date last = *parsed_last;
  MicroOutlook out;
  double previous = history.back();
  for (int t = 1; t <= horizon; ++t) {
    const Date d = last.plus_days(7 * t);
    const double v = round4(history.back() + drift * t);
    MicroStep s;
    s.timestamp = t;
    s.date = fmt::format("{} ({})", d.iso(), d.weekday_name());
    s.day_info = "Regular trading week with no scheduled catalyst.";
    s.movement = v > previous ? Movement::Up : (v < previous ? Movement::Down : Movement::Stable);
    s.key_drivers = "Short-term momentum from the last four observations.";
    s.adjusted_forecast_value = v;
    out.steps.push_back(s);
    previous = v;
  }
  return format_micro_json(out);
}

std::string value_reply(std::string_view user) {
  static const std::regex kHorizon(R"(for the next (\d+) steps)");
  static const std::regex kMicroValue(R"(\| Value: (\S+))");
  const int horizon = read_int(user, kHorizon);
  const auto history = timeline_values(between(user, "1. Historical Data:\n", "2. Macro-Reasoning Outlook"));
  const std::string_view macro_part = between(user, "2. Macro-Reasoning Outlook (Overarching Logic & Values):\n",
                                              "3. Micro-Reasoning Breakdown");
  const std::string_view micro_part = between(user, "3. Micro-Reasoning Breakdown (Step-by-Step Events & Values):\n",
                                              "**Instructions:**");
  if (history.empty() || horizon <= 0) return "<reasoning>No usable history.</reasoning>";

  std::vector<double> macro = read_list(between(macro_part, "Forecasted Values: ", "\n"));
  std::vector<double> micro;
  {
    const std::string m(micro_part);
    for (std::sregex_iterator it(m.begin(), m.end(), kMicroValue), end; it != end; ++it) {
      double v = 0;
      if (parse_real((*it)[1].str(), v)) micro.push_back(v);
    }
  }
  const bool guided = user.find(kGuidelinesHeading) != std::string_view::npos;
  const double last = history.back();
  TaggedForecast out;
  std::string steps;
  for (int t = 0; t < horizon; ++t) {
    std::vector<double> views;
    if (static_cast<int>(macro.size()) == horizon) views.push_back(macro[t]);
    if (static_cast<int>(micro.size()) == horizon) views.push_back(micro[t]);
    double v = views.empty() ? last : std::accumulate(views.begin(), views.end(), 0.0) / views.size();
    if (guided) v = last + 0.5 * (v - last);
    v = round4(v);
    out.values.push_back(v);
    steps += fmt::format("\nStep {}: blended {} outlook(s) into {}.", t + 1, views.size(), format_number(v));
  }
  out.reasoning = fmt::format("Last observed value {}.{}{}", format_number(last),
                              guided ? " Following the review guidelines, the move away from the last value is halved."
                                     : "",
                              steps);
  return format_tagged_forecast(out);
}

std::string cot_reply(std::string_view user) {
  static const std::regex kHorizon(R"(Next (\d+) steps)");
  static const std::regex kLine(R"(^\S+: (\S+)$)");
  const int horizon = read_int(user, kHorizon);
  const std::string block(between(between(user, "**A. Historical Records", ""), "\n", "\n\n**B. Event Intelligence**"));
  std::vector<double> history;
  std::size_t pos = 0;
  while (pos < block.size()) {
    auto nl = block.find('\n', pos);
    const std::string line = block.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? block.size() : nl + 1;
    std::smatch m;
    double v = 0;
    if (std::regex_match(line, m, kLine) && parse_real(m[1].str(), v)) history.push_back(v);
  }
  if (history.empty() || horizon <= 0) return "No usable history.";
  const double drift = mean_drift(history, 26);
  std::vector<double> values;
  for (int t = 1; t <= horizon; ++t) values.push_back(round4(history.back() + drift * t));
  return format_prediction(fmt::format("The series ends at {} with an average drift of {} per step; "
                                       "I extend that drift.",
                                       format_number(history.back()), format_number(round4(drift))),
                           values);
}

std::string calibration_reply(std::string_view user) {
  const auto predicted = read_list(between(between(user, "**2. Agent's Output:**", ""), "Predicted Values: ", "\n"));
  const auto actual = read_list(between(between(user, "**4. Ground Truth:**", ""), "\nValues: ", "\n"));
  double bias = 0.0;
  const std::size_t n = std::min(predicted.size(), actual.size());
  for (std::size_t i = 0; i < n; ++i) bias += predicted[i] - actual[i];
  if (n) bias /= static_cast<double>(n);
  CalibrationCritique out;
  std::string advice = "Anchor the first step close to the last observed value.";
  if (bias > 0) {
    out.diagnosis = fmt::format("The forecast overshot the realized path by {} on average.", format_number(round4(bias)));
    advice += " Avoid extrapolating recent momentum too aggressively.";
  } else if (bias < 0) {
    out.diagnosis = fmt::format("The forecast undershot the realized path by {} on average.", format_number(round4(-bias)));
    advice += " Do not underestimate the persistence of the prevailing trend.";
  } else {
    out.diagnosis = "The forecast tracked the realized path without systematic bias.";
  }
  out.guidelines = advice;
  return format_calibration(out);
}

std::string judge_reply(std::string_view user) {
  const auto a = between(user, "--- MODEL A REASONING ---\n", "\n\n--- MODEL A PREDICTED VALUES ---");
  const auto b = between(user, "--- MODEL B REASONING ---\n", "\n\n--- MODEL B PREDICTED VALUES ---");
  JudgeVerdict v;
  const Winner w = a.size() > b.size() ? Winner::ModelA : (b.size() > a.size() ? Winner::ModelB : Winner::Tie);
  for (Criterion c : kCriteria) v.winner(c) = w;
  v.justification = w == Winner::Tie ? "Both models give reasoning of comparable depth."
                                     : "The preferred model gives the more detailed step-by-step reasoning.";
  return format_judge(v);
}

std::string consolidation_reply(std::string_view user) {
  static const std::regex kFold(R"(^Fold \d+: (.*)$)");
  const std::string block(between(user, "**Fold Guidelines:**\n", "\n\n**Output Format:**"));
  std::vector<std::string> texts;
  std::size_t pos = 0;
  while (pos < block.size()) {
    auto nl = block.find('\n', pos);
    const std::string line = block.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? block.size() : nl + 1;
    std::smatch m;
    if (std::regex_match(line, m, kFold)) texts.push_back(m[1].str());
  }
  if (texts.empty()) return "<guidelines>NONE</guidelines>";
  try {
    return fmt::format("<guidelines>{}</guidelines>", consolidate_sentences(texts, SupportRule::Majority));
  } catch (const Error&) {
    return "<guidelines>NONE</guidelines>";
  }
}

}  // namespace

std::optional<std::string> simulated_analyst_reply(const LlmRequest& request) {
  auto is = [&](TemplateId id) { return request.system_prompt == prompt_template(id).system_text; };
  const std::string_view user = request.user_prompt;
  if (is(TemplateId::ContextAgent)) return context_reply(user);
  if (is(TemplateId::MacroAgent)) return macro_reply(user);
  if (is(TemplateId::MicroAgent)) return micro_reply(user);
  if (is(TemplateId::ValuePredictor)) return value_reply(user);
  if (is(TemplateId::CotBaseline)) return cot_reply(user);
  if (is(TemplateId::CalibrationAgent)) return calibration_reply(user);
  if (is(TemplateId::Judge)) return judge_reply(user);
  if (is(TemplateId::GuidelineConsolidation)) return consolidation_reply(user);
  return std::nullopt;
}

}  // namespace nexus
