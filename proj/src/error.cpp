#include "nexus/error.hpp"

namespace nexus {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NearZeroActual: return "NearZeroActual";
    case ErrorKind::NonPositiveBaseline: return "NonPositiveBaseline";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::MalformedCsv: return "MalformedCsv";
    case ErrorKind::DuplicateDate: return "DuplicateDate";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::WindowTooShort: return "WindowTooShort";
    case ErrorKind::SeriesTooShort: return "SeriesTooShort";
    case ErrorKind::BadSpec: return "BadSpec";
    case ErrorKind::AuthMissing: return "AuthMissing";
    case ErrorKind::TransientExhausted: return "TransientExhausted";
    case ErrorKind::ProviderRejected: return "ProviderRejected";
    case ErrorKind::ScriptExhausted: return "ScriptExhausted";
    case ErrorKind::MissingBinding: return "MissingBinding";
    case ErrorKind::UnknownPlaceholder: return "UnknownPlaceholder";
    case ErrorKind::UnknownTemplate: return "UnknownTemplate";
    case ErrorKind::OutputParse: return "OutputParse";
    case ErrorKind::TimelineParse: return "TimelineParse";
    case ErrorKind::ValueDrift: return "ValueDrift";
    case ErrorKind::HistoryTooShort: return "HistoryTooShort";
    case ErrorKind::EmptyIntersection: return "EmptyIntersection";
    case ErrorKind::PreconditionViolation: return "PreconditionViolation";
    case ErrorKind::DuplicateMethod: return "DuplicateMethod";
    case ErrorKind::SelfJudgeViolation: return "SelfJudgeViolation";
    case ErrorKind::TaskSetMismatch: return "TaskSetMismatch";
    case ErrorKind::MissingRuns: return "MissingRuns";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::BadSpec:
    case ErrorKind::MissingBinding:
    case ErrorKind::UnknownPlaceholder:
    case ErrorKind::UnknownTemplate:
    case ErrorKind::SelfJudgeViolation:
    case ErrorKind::DuplicateMethod:
    case ErrorKind::PreconditionViolation:
      return 1;
    case ErrorKind::AuthMissing:
    case ErrorKind::TransientExhausted:
    case ErrorKind::ProviderRejected:
    case ErrorKind::ScriptExhausted:
      return 3;
    case ErrorKind::OutputParse:
    case ErrorKind::TimelineParse:
    case ErrorKind::ValueDrift:
      return 4;
    default:
      return 2;
  }
}

}  // namespace nexus
