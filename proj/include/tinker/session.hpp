#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tinker/dialogue.hpp"
#include "tinker/log.hpp"
#include "tinker/narrator.hpp"
#include "tinker/scaffolding.hpp"
#include "tinker/story.hpp"

namespace tinker {

// ---------------------------------------------------------------------------
// Time

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() = 0;
};

/// Wall-clock milliseconds since the epoch, never going backwards.
class SystemClock final : public Clock {
 public:
  std::int64_t now_ms() override;

 private:
  std::int64_t last_ = 0;
};

class ManualClock final : public Clock {
 public:
  explicit ManualClock(std::int64_t start = 0) : now_(start) {}
  std::int64_t now_ms() override { return now_; }
  void set(std::int64_t t) { now_ = t; }
  void advance(std::int64_t ms) { now_ += ms; }

 private:
  std::int64_t now_;
};

// ---------------------------------------------------------------------------
// Scripts

/// The scripts a session draws from, keyed by phase and variant.
class ScriptLibrary {
 public:
  void add(PhaseScript script);
  /// Loads every *.tts file in the directory.
  static ScriptLibrary load_dir(const std::filesystem::path& dir);
  static ScriptLibrary load_default();

  /// Script for a phase: the one matching the variant, else the shared one.
  const PhaseScript* find(Phase phase, const std::string& variant) const;
  /// The eight session scripts in order. Throws ScriptSetIncomplete.
  std::vector<const PhaseScript*> session_set(const std::string& variant) const;
  const std::vector<PhaseScript>& all() const { return scripts_; }

 private:
  std::vector<PhaseScript> scripts_;
};

/// Default data directory (scripts/, conditions/, personas/, vocabulary.txt);
/// TINKER_DATA environment variable overrides the compiled-in path.
std::filesystem::path data_dir();

// ---------------------------------------------------------------------------
// Events and effects

struct SessionEvent {
  enum class Kind { Utterance, Scan, EndOfSpeech, AgentSpeechEnded };
  std::int64_t at = 0;
  Kind kind = Kind::Utterance;
  std::string text;  ///< utterance fragment or raw scan payload

  static SessionEvent utterance(std::int64_t at, std::string text) { return {at, Kind::Utterance, std::move(text)}; }
  static SessionEvent scan(std::int64_t at, std::string payload) { return {at, Kind::Scan, std::move(payload)}; }
  static SessionEvent end_of_speech(std::int64_t at) { return {at, Kind::EndOfSpeech, {}}; }
  static SessionEvent speech_ended(std::int64_t at) { return {at, Kind::AgentSpeechEnded, {}}; }
  bool operator==(const SessionEvent&) const = default;
};

std::string_view to_string(SessionEvent::Kind k);
Json to_json(const SessionEvent& e);
SessionEvent event_from_json(const Json& j);  // throws BadRecord

enum class EffectType {
  AgentTurn,
  InputSuppressed,
  MalformedPayload,
  PhaseChanged,
  StoryChanged,
  SessionFinished,
  SessionTimedOut,
  Ignored,
};
std::string_view to_string(EffectType t);

struct SessionEffect {
  EffectType type = EffectType::AgentTurn;
  std::string text;
  std::optional<std::size_t> turn;  ///< transcript index for AgentTurn
  Phase phase = Phase::Opening;
};
Json to_json(const SessionEffect& e);

// ---------------------------------------------------------------------------
// Turn assembly

struct Fragment {
  std::int64_t at = 0;
  std::string text;
  bool operator==(const Fragment&) const = default;
};

struct AssembledTurn {
  std::int64_t started_at = 0;
  std::string text;
};

/// Buffers utterance fragments; a turn closes once input has paused for pause_ms.
class TurnAssembler {
 public:
  explicit TurnAssembler(std::int64_t pause_ms = 4000) : pause_ms_(pause_ms) {}
  void add(std::int64_t at, std::string text);
  bool ready(std::int64_t now) const;
  /// The closed turn when ready(now); otherwise nothing and the buffer is kept.
  std::optional<AssembledTurn> take(std::int64_t now);
  /// Closes the turn regardless of the pause (e.g. a scan interrupts speech).
  std::optional<AssembledTurn> flush();
  bool empty() const { return pending_.empty(); }
  const std::vector<Fragment>& pending() const { return pending_; }
  void restore(std::vector<Fragment> pending) { pending_ = std::move(pending); }

 private:
  std::int64_t pause_ms_;
  std::vector<Fragment> pending_;
};

// ---------------------------------------------------------------------------
// Utterance classification

enum class TurnClass { Answer, Garbled, Truncated, SideTalk, ChangeRequest, Correction };
std::string_view to_string(TurnClass c);

struct Classified {
  TurnClass type = TurnClass::Answer;
  Intent intent = Intent::Neutral;
  std::optional<ElementKind> kind;  ///< token kind a change request refers to
  std::string from;                 ///< corrected phrase
  std::string to;                   ///< replacement phrase
};

Intent classify_intent(std::string_view text);
Classified classify_utterance(std::string_view text);

// ---------------------------------------------------------------------------
// Session

struct SessionConfig {
  std::string session_id = "session";
  std::string profile_id = "child";
  ConditionSchedule schedule = ConditionSchedule::standard(Condition::Structured);
  std::int64_t pause_ms = 4000;
  std::int64_t idle_timeout_ms = 5 * 60 * 1000;
  std::int64_t max_duration_ms = 60 * 60 * 1000;
  int max_reprompts = 2;
  BindPolicy bind;
  std::size_t transcript_window = 16;
  std::string preamble;
  Vocabulary vocabulary = Vocabulary::standard();
};

Json config_to_json(const SessionConfig& cfg);
/// Rebuilds the configuration recorded in a log header.
SessionConfig config_from_header(const Json& header);

enum class SessionStatus { Active, Finished, Closed, Abandoned };
std::string_view to_string(SessionStatus s);

struct SessionState {
  std::string session_id;
  std::string profile_id;
  std::string condition;
  SessionStatus status = SessionStatus::Active;
  std::size_t phase_index = 0;  ///< 0-based index into kSessionPhases
  GraphCursor cursor;
  StoryDocument story;
  std::vector<StoryElement> chosen_characters;
  StageSelection selection;
  std::vector<Turn> transcript;
  bool speak_lock = false;
  std::vector<Fragment> pending;
  std::vector<ScaffoldType> question_queue;
  std::size_t question_ordinal = 0;
  std::optional<ScaffoldType> open_question;
  std::vector<std::string> stage_answers;
  std::string truncated_prefix;
  std::optional<ElementKind> rescan_kind;
  std::int64_t started_at = 0;
  std::int64_t last_event_at = 0;
  std::size_t suppressed_inputs = 0;
  std::size_t reprompts = 0;

  Phase phase() const { return kSessionPhases[std::min<std::size_t>(phase_index, kSessionPhases.size() - 1)]; }
  bool operator==(const SessionState&) const = default;
};

Json to_json(const SessionState& s);

struct StageSummary {
  NarrativeStage stage{};
  StoryElement place;
  StoryElement item;
  StoryElement emotion;
  std::string text;
  bool operator==(const StageSummary&) const = default;
};

struct StoryRecord {
  std::string story_id;
  std::string session_id;
  std::string profile_id;
  std::string condition;
  std::int64_t created_at = 0;
  std::vector<StoryElement> characters;
  std::vector<StageSummary> stages;
  std::string compiled;
  bool operator==(const StoryRecord&) const = default;
};

Json to_json(const StoryRecord& r);
StoryRecord story_record_from_json(const Json& j);

/// Receives the header once, then each record as it is committed.
class LogSink {
 public:
  virtual ~LogSink() = default;
  virtual void header(const Json& header) = 0;
  virtual void record(const Json& record) = 0;
};

/// One play session. Every public operation is all-or-nothing: if it throws,
/// state and log are as they were before the call.
class Session {
 public:
  /// Throws ScriptSetIncomplete when a phase script is missing or its question
  /// nodes do not match the schedule.
  Session(SessionConfig cfg, const ScriptLibrary& scripts, Narrator& narrator, LogSink* sink = nullptr);

  /// Opening phase, first agent utterance; speak-lock engaged.
  std::vector<SessionEffect> start(std::int64_t now);
  /// Throws SessionClosed, OutOfOrderRecord, ProviderUnavailable, MarkerStuck.
  std::vector<SessionEffect> ingest(const SessionEvent& e);
  /// Closes the pending child turn if input has paused long enough; no-op otherwise.
  std::vector<SessionEffect> finalize_turn(std::int64_t now);
  /// Finalization and timeouts for service mode; no-op when nothing is due.
  std::vector<SessionEffect> tick(std::int64_t now);
  /// Requires all eight phases done (IncompleteSession otherwise).
  StoryRecord complete(std::int64_t now);
  void abandon(std::int64_t now, const std::string& reason);

  const SessionState& state() const { return st_; }
  const SessionLog& log() const { return log_; }
  const SessionConfig& config() const { return cfg_; }
  const PhaseScript& script() const { return *set_.at(std::min(st_.phase_index, set_.size() - 1)); }

 private:
  class Txn;

  void record(Json r);
  std::size_t add_turn(Turn t);
  void agent_say(TurnKind kind, const std::string& text, bool repair = false, bool off_script = false,
                 std::optional<ScaffoldType> scaffold = std::nullopt);
  NarratorContext context(Purpose p) const;
  AgentOutput narrate(NarratorContext ctx);
  void perform_current();
  void react();
  void close_phase(const AgentOutput& out);
  void enter_phase(std::size_t index);
  void process(const SessionEvent& e);
  void try_finalize(std::int64_t now);
  void handle_child_text(const std::string& text, std::int64_t started_at);
  void handle_scan(const std::string& raw);
  void snapshot_story(const std::string& reason);
  std::optional<ScaffoldQuestionSpec> open_spec() const;
  void flush_sink();

  SessionConfig cfg_;
  Narrator& narrator_;
  std::vector<const PhaseScript*> set_;
  SessionState st_;
  SessionLog log_;
  LogSink* sink_ = nullptr;
  std::size_t flushed_ = 0;
  std::vector<SessionEffect> fx_;
  std::int64_t now_ = 0;
};

struct ReplayResult {
  SessionState state;
  SessionLog log;
  std::optional<StoryRecord> story;
};

/// Feeds the logged events back through a fresh session with the logged
/// narrator replies. Throws BadRecord when the log cannot be replayed.
ReplayResult replay_session(const SessionLog& log, const ScriptLibrary& scripts);

}  // namespace tinker
