#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nexus/agents.hpp"
#include "nexus/parsers.hpp"

namespace nexus {

/// One method's output on a task, as shown to the judge.
struct JudgeCandidate {
  std::string method_id;
  /// Generator model, checked against the judge model.
  std::string model_id;
  std::string reasoning;
  std::vector<double> values;
};

struct JudgePair {
  std::string ground_truth_events;
  JudgeCandidate model_a;
  JudgeCandidate model_b;
  std::uint64_t seed = 0;
};

/// Places `first` in position A when the seed's first draw is even, otherwise swaps.
/// Throws DuplicateMethod when both candidates share a method id.
JudgePair assign_positions(const JudgeCandidate& first, const JudgeCandidate& second, std::string ground_truth_events,
                           std::uint64_t seed);

/// Judge outcome in terms of methods. An empty winner string is a tie.
struct MethodVerdict {
  std::string method_a;
  std::string method_b;
  JudgeVerdict positional;
  std::map<Criterion, std::string> winners;

  const std::string& winner(Criterion c) const { return winners.at(c); }
};

MethodVerdict map_verdict(const JudgePair& pair, const JudgeVerdict& positional);

PromptPair judge_prompt(const JudgePair& pair);

/// Throws SelfJudgeViolation when the judge model matches either generator model.
MethodVerdict judge_pair(const JudgePair& pair, const AgentBinding& judge, std::vector<Exchange>& trace);

struct TallyCounts {
  int treatment_wins = 0;
  int baseline_wins = 0;
  int ties = 0;

  int total() const { return treatment_wins + baseline_wins + ties; }
  double treatment_pct() const;
  double baseline_pct() const;
  double tie_pct() const;
};

/// A verdict tagged with the table column it counts toward (e.g. "gemini / zillow").
struct TalliedVerdict {
  std::string column;
  MethodVerdict verdict;
};

struct TallyTable {
  std::string treatment;
  std::string baseline;
  std::vector<std::string> columns;
  std::map<std::pair<Criterion, std::string>, TallyCounts> cells;

  const TallyCounts& at(Criterion c, const std::string& column) const { return cells.at({c, column}); }
};

/// Counts wins per criterion and column. Throws EmptyInput for no verdicts.
TallyTable tally(const std::vector<TalliedVerdict>& verdicts, const std::string& treatment, const std::string& baseline);

/// One block per criterion with rows "<treatment> Win", "<baseline> Win", "Tie" and one column per column label.
std::string to_markdown(const TallyTable& table, const std::string& treatment_label = "NEXUS",
                        const std::string& baseline_label = "CoT Baseline");
nlohmann::json to_json(const TallyTable& table);
nlohmann::json to_json(const MethodVerdict& verdict);

}  // namespace nexus
