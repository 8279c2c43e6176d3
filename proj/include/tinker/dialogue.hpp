#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tinker/story.hpp"

namespace tinker {

enum class Phase { Practice, Opening, Characters, Start, Journey, Climax, End, PostStory, Closing };

/// The eight phases of a play session, in order. Practice is a standalone script.
inline constexpr std::array<Phase, 8> kSessionPhases{Phase::Opening, Phase::Characters, Phase::Start,
                                                     Phase::Journey, Phase::Climax, Phase::End,
                                                     Phase::PostStory, Phase::Closing};

std::string_view to_string(Phase phase);
std::optional<Phase> phase_from_string(std::string_view name);
std::optional<NarrativeStage> stage_of(Phase phase);
Phase phase_of(NarrativeStage stage);

inline constexpr std::string_view kNextMarker = "##NEXT##";
inline constexpr std::string_view kDoneMarker = "##Done##";

enum class Expect { Utterance, Scan, None };
enum class Guard { Always, Yes, No, Adds, Declines };

/// What the narrator produces when it performs a node.
enum class NodeAct { Speak, Draft, Update, Question };

std::string_view to_string(Guard g);
std::string_view to_string(NodeAct a);

struct Transition {
  Guard guard = Guard::Always;
  /// Empty target means the phase is complete once this transition is taken.
  std::optional<std::string> target;

  bool completes() const { return !target.has_value(); }
  bool operator==(const Transition&) const = default;
};

struct DialogueNode {
  std::string id;
  std::string say;                 ///< narrator instruction
  std::vector<std::string> rules;  ///< follow-up instructions, kept verbatim
  Expect expects = Expect::Utterance;
  std::optional<ElementKind> scan_kind;
  std::string mismatch;  ///< redirect spoken on wrong input at scan nodes
  std::vector<Transition> transitions;
  NodeAct act = NodeAct::Speak;
  std::string capture;  ///< where the child's answer is stored: premise, note1..note3
  std::string stub;     ///< canned text for the template narrator
  std::string after;    ///< canned reaction when the answer completes the phase

  /// Has at least one transition that completes the phase.
  bool terminal() const;
  bool operator==(const DialogueNode&) const = default;
};

struct PhaseScript {
  Phase phase = Phase::Opening;
  std::string variant;  ///< e.g. "structured", "generic"; empty when shared
  std::string title;
  std::string intro;
  std::string marker;
  std::vector<DialogueNode> nodes;
  std::string entry;
  /// Node-id sequences listed in the script footer, completion marker omitted.
  std::vector<std::vector<std::string>> declared_paths;

  const DialogueNode* find(std::string_view id) const;
  const DialogueNode& node(std::string_view id) const;
  bool operator==(const PhaseScript&) const = default;
};

/// Parses the line-oriented script grammar (see data/scripts/README.md).
/// Throws SyntaxError (message carries the line), DanglingTransition, DuplicateNodeId.
PhaseScript parse_script(std::string_view source);
PhaseScript load_script(const std::filesystem::path& path);

enum class DiagnosticKind { Unreachable, PathMismatch, MissingRedirect, DeadEnd, BadAgentNode, UnboundedLoop };
std::string_view to_string(DiagnosticKind k);

struct Diagnostic {
  DiagnosticKind kind;
  std::string node;
  std::string message;
};

std::vector<Diagnostic> validate_script(const PhaseScript& script);

using NodePath = std::vector<std::string>;

/// All entry-to-completion paths. A node may repeat only as often as it
/// repeats in some declared path; cycles without such a declaration throw UnboundedLoop.
std::vector<NodePath> enumerate_paths(const PhaseScript& script);

struct GraphCursor {
  Phase phase = Phase::Opening;
  std::string current;
  std::vector<std::string> visited;
  /// The current node's requirement is met and the selected transition completes the phase.
  bool awaiting_marker = false;
  bool complete = false;

  bool operator==(const GraphCursor&) const = default;
};

GraphCursor start_cursor(const PhaseScript& script);

/// How a child utterance reads against guarded transitions.
enum class Intent { Neutral, Affirm, Deny, Decline, Contribute };
std::string_view to_string(Intent i);

namespace input {
struct Utterance {
  std::string text;
  Intent intent = Intent::Neutral;
};
struct Scan {
  StoryElement element;
};
/// The narrator finished performing an agent-only node.
struct Continue {};
struct Marker {
  std::string text;
};
}  // namespace input

using GraphInput = std::variant<input::Utterance, input::Scan, input::Continue, input::Marker>;

enum class EffectKind {
  Advanced,         ///< moved to a new node
  AwaitingMarker,   ///< requirement met; the narrator should now close the phase
  Redirect,         ///< wrong input at a scan node; text is the node's redirect
  Stay,             ///< input did not satisfy any transition
  Ignored,          ///< input type not expected here (e.g. a scan at a talk node)
  Completed,
};
std::string_view to_string(EffectKind k);

struct GraphEffect {
  EffectKind kind = EffectKind::Stay;
  std::string text;
};

struct GraphStep {
  GraphCursor cursor;
  GraphEffect effect;
};

/// Loops are followed at most as often as the declared paths unroll them.
/// Throws InputAfterComplete, MarkerBeforeCompletion, WrongMarker.
GraphStep advance(GraphCursor cursor, const PhaseScript& script, const GraphInput& in);

}  // namespace tinker
