#include "tinker/error.hpp"

namespace tinker {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::WrongKind: return "WrongKind";
    case ErrorCode::DuplicateCharacter: return "DuplicateCharacter";
    case ErrorCode::AlreadyBound: return "AlreadyBound";
    case ErrorCode::OutOfOrderStage: return "OutOfOrderStage";
    case ErrorCode::StageAlreadyDrafted: return "StageAlreadyDrafted";
    case ErrorCode::NotDrafted: return "NotDrafted";
    case ErrorCode::AlreadyUpdated: return "AlreadyUpdated";
    case ErrorCode::IncompleteStory: return "IncompleteStory";
    case ErrorCode::UnknownElement: return "UnknownElement";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::UnknownValue: return "UnknownValue";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::DanglingTransition: return "DanglingTransition";
    case ErrorCode::DuplicateNodeId: return "DuplicateNodeId";
    case ErrorCode::UnboundedLoop: return "UnboundedLoop";
    case ErrorCode::MarkerBeforeCompletion: return "MarkerBeforeCompletion";
    case ErrorCode::WrongMarker: return "WrongMarker";
    case ErrorCode::InputAfterComplete: return "InputAfterComplete";
    case ErrorCode::IncompleteLog: return "IncompleteLog";
    case ErrorCode::BadConditionFile: return "BadConditionFile";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::EmptyResponse: return "EmptyResponse";
    case ErrorCode::MarkerStuck: return "MarkerStuck";
    case ErrorCode::ScriptSetIncomplete: return "ScriptSetIncomplete";
    case ErrorCode::SessionClosed: return "SessionClosed";
    case ErrorCode::IncompleteSession: return "IncompleteSession";
    case ErrorCode::OutOfOrderRecord: return "OutOfOrderRecord";
    case ErrorCode::StorageFailure: return "StorageFailure";
    case ErrorCode::UnknownProfile: return "UnknownProfile";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::SummaryUnavailable: return "SummaryUnavailable";
    case ErrorCode::BadRecord: return "BadRecord";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::MissingMetadata: return "MissingMetadata";
    case ErrorCode::BadPersona: return "BadPersona";
  }
  return "Unknown";
}

}  // namespace tinker
