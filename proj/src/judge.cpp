#include "nexus/judge.hpp"

#include <random>

#include <fmt/format.h>

namespace nexus {

JudgePair assign_positions(const JudgeCandidate& first, const JudgeCandidate& second, std::string ground_truth_events,
                           std::uint64_t seed) {
  if (first.method_id == second.method_id) {
    throw Error(ErrorKind::DuplicateMethod, "cannot judge method '" + first.method_id + "' against itself");
  }
  std::mt19937_64 rng(seed);
  const bool swap = (rng() & 1u) != 0;
  return JudgePair{std::move(ground_truth_events), swap ? second : first, swap ? first : second, seed};
}

MethodVerdict map_verdict(const JudgePair& pair, const JudgeVerdict& positional) {
  MethodVerdict out{pair.model_a.method_id, pair.model_b.method_id, positional, {}};
  for (Criterion c : kCriteria) {
    switch (positional.winner(c)) {
      case Winner::ModelA: out.winners[c] = pair.model_a.method_id; break;
      case Winner::ModelB: out.winners[c] = pair.model_b.method_id; break;
      case Winner::Tie: out.winners[c] = ""; break;
    }
  }
  return out;
}

PromptPair judge_prompt(const JudgePair& pair) {
  return render(TemplateId::Judge, {{"ground_truth_events", pair.ground_truth_events},
                                    {"model_a_reasoning", pair.model_a.reasoning},
                                    {"model_a_predicted_values", format_values_4dp(pair.model_a.values)},
                                    {"model_b_reasoning", pair.model_b.reasoning},
                                    {"model_b_predicted_values", format_values_4dp(pair.model_b.values)}});
}

MethodVerdict judge_pair(const JudgePair& pair, const AgentBinding& judge, std::vector<Exchange>& trace) {
  for (const auto* c : {&pair.model_a, &pair.model_b}) {
    if (!c->model_id.empty() && c->model_id == judge.model_id) {
      throw Error(ErrorKind::SelfJudgeViolation,
                  fmt::format("judge model '{}' also generated the '{}' outputs", judge.model_id, c->method_id));
    }
  }
  std::function<Validated<JudgeVerdict>(const std::string&)> validate = [](const std::string& reply) -> Validated<JudgeVerdict> {
    auto parsed = parse_judge(reply);
    if (!parsed) return AgentFailure{ErrorKind::OutputParse, parsed.error().message()};
    return std::move(parsed).value();
  };
  const JudgeVerdict positional = call_agent(judge, TemplateId::Judge, "judge", judge_prompt(pair), validate, trace);
  return map_verdict(pair, positional);
}

namespace {
double pct(int part, int total) { return total ? 100.0 * part / total : 0.0; }
}  // namespace

double TallyCounts::treatment_pct() const { return pct(treatment_wins, total()); }
double TallyCounts::baseline_pct() const { return pct(baseline_wins, total()); }
double TallyCounts::tie_pct() const { return pct(ties, total()); }

TallyTable tally(const std::vector<TalliedVerdict>& verdicts, const std::string& treatment, const std::string& baseline) {
  if (verdicts.empty()) throw Error(ErrorKind::EmptyInput, "no verdicts to tally");
  TallyTable table{treatment, baseline, {}, {}};
  for (const auto& v : verdicts) {
    if (std::find(table.columns.begin(), table.columns.end(), v.column) == table.columns.end()) {
      table.columns.push_back(v.column);
    }
    for (Criterion c : kCriteria) {
      auto& cell = table.cells[{c, v.column}];
      const auto& w = v.verdict.winner(c);
      if (w.empty()) {
        ++cell.ties;
      } else if (w == treatment) {
        ++cell.treatment_wins;
      } else if (w == baseline) {
        ++cell.baseline_wins;
      } else {
        throw Error(ErrorKind::PreconditionViolation, "verdict names unknown method '" + w + "'");
      }
    }
  }
  return table;
}

std::string to_markdown(const TallyTable& table, const std::string& treatment_label, const std::string& baseline_label) {
  std::string out = "| Criterion | Outcome |";
  for (const auto& c : table.columns) out += " " + c + " |";
  out += "\n|---|---|";
  for (std::size_t i = 0; i < table.columns.size(); ++i) out += "---:|";
  out += '\n';
  for (Criterion c : kCriteria) {
    const std::string rows[3] = {treatment_label + " Win", baseline_label + " Win", "Tie"};
    for (int r = 0; r < 3; ++r) {
      out += fmt::format("| {} | {} |", r == 0 ? std::string(display_name(c)) : std::string(), rows[r]);
      for (const auto& col : table.columns) {
        const auto& cell = table.at(c, col);
        const double v = r == 0 ? cell.treatment_pct() : r == 1 ? cell.baseline_pct() : cell.tie_pct();
        out += fmt::format(" {:.1f}% |", v);
      }
      out += '\n';
    }
  }
  return out;
}

nlohmann::json to_json(const TallyTable& table) {
  auto cells = nlohmann::json::array();
  for (Criterion c : kCriteria) {
    for (const auto& col : table.columns) {
      const auto& cell = table.at(c, col);
      cells.push_back({{"criterion", schema_key(c)},
                       {"column", col},
                       {"treatment_wins", cell.treatment_wins},
                       {"baseline_wins", cell.baseline_wins},
                       {"ties", cell.ties},
                       {"treatment_pct", cell.treatment_pct()},
                       {"baseline_pct", cell.baseline_pct()},
                       {"tie_pct", cell.tie_pct()}});
    }
  }
  return {{"treatment", table.treatment}, {"baseline", table.baseline}, {"columns", table.columns}, {"cells", cells}};
}

nlohmann::json to_json(const MethodVerdict& v) {
  nlohmann::json winners = nlohmann::json::object();
  nlohmann::json positional = nlohmann::json::object();
  for (Criterion c : kCriteria) {
    winners[std::string(schema_key(c))] = v.winner(c).empty() ? nlohmann::json() : nlohmann::json(v.winner(c));
    positional[std::string(schema_key(c))] = to_string(v.positional.winner(c));
  }
  return {{"model_a", v.method_a},
          {"model_b", v.method_b},
          {"winners", winners},
          {"positional", positional},
          {"justification", v.positional.justification}};
}

}  // namespace nexus
