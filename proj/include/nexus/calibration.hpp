#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nexus/agents.hpp"
#include "nexus/ingest.hpp"

namespace nexus {

enum class FoldRole { Training, HiddenValidation };

std::string_view to_string(FoldRole role);

struct Fold {
  int index = 1;  // 1..n
  int origin_index = 0;
  int horizon = 1;
  FoldRole role = FoldRole::Training;

  /// First and last history index the fold forecasts.
  int first_target() const { return origin_index + 1; }
  int last_target() const { return origin_index + horizon; }
};

/// The last n disjoint horizon-blocks of the history, oldest first; fold n is the hidden validation fold.
/// Fold i has origin (L - 1) - (n - i + 1) * horizon. Throws HistoryTooShort when L < context + n * horizon.
std::vector<Fold> make_splits(int history_length, int n, int horizon, int context_length);

struct GateDecision {
  double improvement = 0.0;
  bool accepted = false;
};

/// improvement = (without - with) / without; accepted iff improvement >= k. A 1e-12 tolerance absorbs
/// rounding so that an improvement of exactly k is accepted. Throws NonPositiveBaseline when without <= 0.
GateDecision gate(double mape_without, double mape_with, double k);

/// What the synthesizer produced on one fold.
struct FoldRun {
  PromptPair prompt;
  std::string reasoning;
  std::vector<double> values;
  double mape = 0.0;
  std::optional<double> macro_mape;
  std::optional<double> micro_mape;
};

struct FoldTruth {
  std::string events_summary;
  std::vector<double> values;
};

struct FoldCritique {
  int fold_index = 0;
  std::string diagnosis;
  std::string guidelines;
  double fold_mape = 0.0;
};

/// Calibration agent bindings for one training fold; the error is the fold MAPE at four decimals.
Bindings critique_bindings(const FoldRun& run, const FoldTruth& truth);

/// Throws PreconditionViolation for the hidden validation fold.
FoldCritique critique_fold(const Fold& fold, const FoldRun& run, const FoldTruth& truth, const AgentRouter& router,
                           std::vector<Exchange>& trace);

enum class SupportRule {
  /// Kept when more than half of the folds state it.
  Majority,
  /// Kept only when every fold states it.
  All,
};

enum class ConsolidationMode {
  /// Language-model merge for live backends, sentence intersection otherwise.
  Auto,
  Sentences,
  Llm,
};

/// Lowercase, punctuation removed, whitespace collapsed.
std::string normalize_sentence(std::string_view sentence);
std::vector<std::string> split_sentences(std::string_view text);

/// Sentences supported by enough texts, in normalized order; each is shown in its smallest original spelling.
/// Independent of input order. Throws EmptyIntersection when nothing survives.
std::string consolidate_sentences(const std::vector<std::string>& texts, SupportRule rule);

struct Guidelines {
  std::string text;
  std::set<int> supporting_folds;
  bool accepted = false;
  double improvement = 0.0;
};

Guidelines consolidate_guidelines(const std::vector<FoldCritique>& critiques, SupportRule rule, ConsolidationMode mode,
                                  const AgentRouter& router, std::vector<Exchange>& trace);

struct CalibrationConfig {
  int n = 6;
  double k = 0.05;
  int horizon = 4;
  int context_length = 30;
  Setting setting = Setting::Multimodal;
  SupportRule support = SupportRule::Majority;
  ConsolidationMode mode = ConsolidationMode::Auto;
  int workers = 1;

  void validate() const;
};

struct FoldRecord {
  Fold fold;
  std::string origin_date;
  FoldRun run;
  std::vector<Exchange> trace;
};

struct CalibrationOutcome {
  std::vector<FoldRecord> folds;
  std::vector<FoldCritique> critiques;
  Guidelines guidelines;
  double validation_mape_without = 0.0;
  /// Absent when consolidation left nothing to validate.
  std::optional<double> validation_mape_with;
  std::vector<Exchange> consolidation_trace;
  std::vector<Exchange> validation_trace;

  /// Guidelines to use for test forecasts: the text when accepted, otherwise nothing.
  std::optional<std::string> accepted_guidelines() const;
};

/// Backtests the pipeline on the last n folds of `history`, critiques the training folds, consolidates their
/// guidelines and keeps them only if they pass the gate on the hidden validation fold.
CalibrationOutcome calibrate_entity(const MultimodalContext& history, const CalibrationConfig& config,
                                    const PipelineConfig& pipeline);

nlohmann::json to_json(const Exchange& exchange);
nlohmann::json to_json(const CalibrationOutcome& outcome);

}  // namespace nexus
