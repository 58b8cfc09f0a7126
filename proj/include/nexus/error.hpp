#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nexus {

enum class ErrorKind {
  // metrics
  LengthMismatch,
  NearZeroActual,
  NonPositiveBaseline,
  EmptyInput,
  // ingest
  MalformedCsv,
  DuplicateDate,
  NonFiniteValue,
  WindowTooShort,
  SeriesTooShort,
  BadSpec,
  // llm gateway
  AuthMissing,
  TransientExhausted,
  ProviderRejected,
  ScriptExhausted,
  // prompts
  MissingBinding,
  UnknownPlaceholder,
  UnknownTemplate,
  // agents / parsers
  OutputParse,
  TimelineParse,
  ValueDrift,
  // calibration
  HistoryTooShort,
  EmptyIntersection,
  PreconditionViolation,
  // judge
  DuplicateMethod,
  SelfJudgeViolation,
  // cli
  TaskSetMismatch,
  MissingRuns,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Process exit code category for an error kind: 1 config, 2 data, 3 backend, 4 parse.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Pipeline stage that raised the error, empty when not raised inside a stage.
  const std::string& stage() const noexcept { return stage_; }

  Error with_stage(std::string stage) const {
    Error copy(kind_, stage + ": " + what());
    copy.stage_ = std::move(stage);
    return copy;
  }

 private:
  ErrorKind kind_;
  std::string stage_;
};

}  // namespace nexus
