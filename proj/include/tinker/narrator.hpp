#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tinker/dialogue.hpp"
#include "tinker/error.hpp"
#include "tinker/log.hpp"
#include "tinker/scaffolding.hpp"
#include "tinker/story.hpp"

namespace tinker {

/// Why the orchestrator is asking the narrator to speak.
enum class Purpose {
  Perform,     ///< carry out the current node (prompt, draft, question, update)
  React,       ///< acknowledge an answer that completed the phase, then close it
  Stay,        ///< the answer did not satisfy the node; ask again
  Clarify,     ///< unintelligible answer
  FollowUp,    ///< answer cut off mid-sentence
  OffScript,   ///< child asked something outside the script
  Correction,  ///< child corrected something already told
  Rescan,      ///< child asked to swap a token before the draft
};
std::string_view to_string(Purpose p);

struct NarratorContext {
  std::string preamble;
  const PhaseScript* script = nullptr;
  std::string node;
  Purpose purpose = Purpose::Perform;
  /// The reply must close the phase with the script's marker.
  bool awaiting_marker = false;
  std::vector<Turn> transcript;  ///< recent turns, oldest first
  StoryDocument story;
  StageSelection selection;
  std::optional<NarrativeStage> stage;
  std::optional<ScaffoldQuestionSpec> pending_question;
  std::size_t question_ordinal = 0;  ///< index of the pending question within its phase
  std::vector<std::string> answers;  ///< contributions since the draft; drives the update
  std::string child_text;            ///< latest child turn
  std::string last_question;         ///< last agent question at this node
  std::string correction_from;
  std::string correction_to;
  std::optional<ElementKind> rescan_kind;
  std::string reprompt;  ///< why the previous attempt was rejected; empty on first attempt
};

struct AgentOutput {
  std::string utterance;             ///< child-facing, marker-free
  std::vector<std::string> markers;  ///< exact markers found, in order
  bool off_script = false;
  bool near_miss = false;  ///< marker-like text that is not an exact marker ("## next ##")
  std::optional<std::string> story_text;
  std::string raw;
};

/// Removes every exact marker and near-miss from the text, collapsing the
/// whitespace left at each removal site.
AgentOutput strip_markers(std::string_view raw);

/// strip_markers plus <story>...</story> extraction. Untagged draft/update
/// replies use the whole utterance as story text.
AgentOutput parse_output(std::string_view raw, bool wants_story);

class Narrator {
 public:
  virtual ~Narrator() = default;
  /// One provider call; returns raw text including any markers.
  virtual std::string complete(const NarratorContext& ctx) = 0;
  virtual std::string name() const = 0;
};

/// Calls the provider and parses the reply. Throws EmptyResponse on blank output.
AgentOutput generate(Narrator& narrator, const NarratorContext& ctx);

/// Sentence target for a story-bearing reply (7 for drafts, 10 for updates), 0 otherwise.
std::size_t sentence_target(const NarratorContext& ctx);

/// Deterministic template narrator. Drafts are exactly 7 sentences and name every
/// character and the stage's place, item and emotion; updates are the draft plus
/// three sentences built from the child's answers.
class StubNarrator final : public Narrator {
 public:
  std::string complete(const NarratorContext& ctx) override;
  std::string name() const override { return "stub"; }
};

std::string fill_placeholders(std::string_view tmpl, const NarratorContext& ctx);
std::string stub_draft(NarrativeStage stage, const std::vector<StoryElement>& characters, const StoryElement& place,
                       const StoryElement& item, const StoryElement& emotion);
std::string stub_update(const std::string& draft, const std::vector<std::string>& answers);
std::string stub_question(const ScaffoldQuestionSpec& spec, const NarratorContext& ctx);

/// Plays back the raw replies recorded in a session log, in order.
class RecordedNarrator final : public Narrator {
 public:
  explicit RecordedNarrator(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  static RecordedNarrator from_log(const SessionLog& log);
  std::string complete(const NarratorContext& ctx) override;
  std::string name() const override { return "recorded"; }
  std::size_t remaining() const { return replies_.size() - next_; }

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

enum class ProviderCause { Timeout, AuthFailure, RateLimited, Network, BadResponse };
std::string_view to_string(ProviderCause c);

/// ProviderUnavailable with the underlying cause.
class ProviderError : public Error {
 public:
  ProviderError(ProviderCause cause, const std::string& detail)
      : Error(ErrorCode::ProviderUnavailable, std::string(to_string(cause)) + ": " + detail), cause_(cause) {}
  ProviderCause cause() const { return cause_; }

 private:
  ProviderCause cause_;
};

struct RemoteConfig {
  std::string url;  ///< e.g. http://127.0.0.1:8080/v1/messages
  std::string model;
  std::string api_key;
  int max_tokens = 1024;
  std::chrono::milliseconds timeout{30000};
  /// Receives one line per request and response; the API key is never included.
  std::function<void(std::string_view)> trace;
};

/// Chat-style request body: system prompt (preamble + active script + story
/// state + step instruction) and the transcript window as messages.
Json build_request(const NarratorContext& ctx, const RemoteConfig& cfg);
std::string render_script(const PhaseScript& script);
/// Accepts {"content":[{"text":...}]} and {"choices":[{"message":{"content":...}}]} shapes.
std::string response_text(const Json& body);

class RemoteNarrator final : public Narrator {
 public:
  explicit RemoteNarrator(RemoteConfig cfg) : cfg_(std::move(cfg)) {}
  /// Throws ProviderError (Timeout, AuthFailure, RateLimited, Network, BadResponse).
  std::string complete(const NarratorContext& ctx) override;
  std::string name() const override { return "remote"; }

 private:
  RemoteConfig cfg_;
};

}  // namespace tinker
