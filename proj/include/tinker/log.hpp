#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tinker/dialogue.hpp"
#include "tinker/scaffolding.hpp"
#include "tinker/story.hpp"

namespace tinker {

using Json = nlohmann::json;

enum class Speaker { Child, Agent };

enum class TurnKind {
  // child
  Speech,
  Scan,
  RejectedScan,
  Rescan,
  // agent
  Prompt,
  Draft,
  Question,
  Update,
  React,
  Redirect,
  Clarify,
  FollowUp,
  OffScript,
  Correction,
};

std::string_view to_string(Speaker s);
std::string_view to_string(TurnKind k);
bool is_scan(TurnKind k);

struct Turn {
  std::size_t index = 0;
  Speaker speaker = Speaker::Child;
  TurnKind kind = TurnKind::Speech;
  std::string text;
  std::int64_t at = 0;  ///< ms; for child speech, when the first fragment arrived
  Phase phase = Phase::Opening;
  std::string node;
  std::optional<ScaffoldType> scaffold;  ///< question asked, or question answered
  bool off_script = false;
  bool repair = false;

  bool operator==(const Turn&) const = default;
};

Json to_json(const Turn& t);
Turn turn_from_json(const Json& j);

inline constexpr std::string_view kLogFormat = "tinker-session-log";
inline constexpr int kLogVersion = 1;

/// A session's append-only record stream. The header names the session,
/// its condition schedule and the configuration needed for replay.
///
/// Record types: event, turn, phase, question, answer, story, narration,
/// fault, suppressed, closed. Every record carries "seq" and "t".
struct SessionLog {
  Json header = Json::object();
  std::vector<Json> records;

  std::string session_id() const { return header.value("sessionId", ""); }
  std::string profile_id() const { return header.value("profileId", ""); }
  std::string condition() const { return header.value("condition", ""); }
  std::int64_t started_at() const { return header.value("startedAt", std::int64_t{0}); }
  std::int64_t last_time() const;
};

Json make_header(const std::string& session_id, const std::string& profile_id, const ConditionSchedule& schedule,
                 std::int64_t started_at, Json config);

/// Assigns "seq"; throws OutOfOrderRecord when "t" is earlier than the last record.
void append_record(SessionLog& log, Json record);

std::string to_jsonl(const SessionLog& log);
std::string to_jsonl_line(const Json& j);
/// Throws BadRecord on malformed lines or an unknown format/version.
SessionLog parse_jsonl(std::string_view source);

// Typed views over the record stream.
std::vector<Turn> turns_of(const SessionLog& log);
std::optional<std::string> closed_status(const SessionLog& log);  ///< "completed" / "abandoned"
bool is_completed(const SessionLog& log);
std::vector<AskedQuestion> questions_of(const SessionLog& log);

struct AnswerRecord {
  Phase phase = Phase::Start;
  std::string node;
  ScaffoldType scaffold = ScaffoldType::OpenInvitation;
  std::string text;
  std::size_t turn = 0;
  std::string intent;  ///< classified intent, e.g. "contribute", "decline"
};
std::vector<AnswerRecord> answers_of(const SessionLog& log);

/// The last story snapshot written to the log.
std::optional<StoryDocument> last_story(const SessionLog& log);

}  // namespace tinker
