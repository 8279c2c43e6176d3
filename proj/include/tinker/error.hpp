#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tinker {

enum class ErrorCode {
  // story-domain
  WrongKind,
  DuplicateCharacter,
  AlreadyBound,
  OutOfOrderStage,
  StageAlreadyDrafted,
  NotDrafted,
  AlreadyUpdated,
  IncompleteStory,
  UnknownElement,
  // token-protocol
  Malformed,
  UnknownKind,
  UnknownValue,
  // dialogue-graph
  SyntaxError,
  DanglingTransition,
  DuplicateNodeId,
  UnboundedLoop,
  MarkerBeforeCompletion,
  WrongMarker,
  InputAfterComplete,
  // scaffolding
  IncompleteLog,
  BadConditionFile,
  // narrator
  ProviderUnavailable,
  EmptyResponse,
  MarkerStuck,
  // session
  ScriptSetIncomplete,
  SessionClosed,
  IncompleteSession,
  // persistence
  OutOfOrderRecord,
  StorageFailure,
  UnknownProfile,
  UnknownSession,
  SummaryUnavailable,
  BadRecord,
  // analysis
  EmptyCorpus,
  MissingMetadata,
  // simulator
  BadPersona,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the engine carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tinker
