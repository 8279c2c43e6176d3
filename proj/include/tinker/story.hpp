#pragma once

#include <array>
#include <compare>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace tinker {

enum class ElementKind { Character, Place, Item, Emotion };

inline constexpr std::array<ElementKind, 4> kElementKinds{ElementKind::Character, ElementKind::Place,
                                                          ElementKind::Item, ElementKind::Emotion};

std::string_view to_string(ElementKind kind);
/// Case-sensitive: "Place" parses, "place" does not.
std::optional<ElementKind> kind_from_string(std::string_view name);

/// Closed per-kind token vocabulary. The committed default is the toy set
/// shipped with the board; deployments can load an extended file.
///
/// File format: one `[Kind]` header per section followed by one value per
/// line. Blank lines and lines starting with '#' are ignored.
class Vocabulary {
 public:
  static const Vocabulary& standard();
  static Vocabulary parse(std::string_view source);
  static Vocabulary load(const std::filesystem::path& path);

  bool contains(ElementKind kind, std::string_view value) const;
  const std::vector<std::string>& values(ElementKind kind) const;
  std::size_t size() const;

  bool operator==(const Vocabulary&) const = default;

 private:
  std::array<std::vector<std::string>, 4> values_;
};

struct StoryElement {
  ElementKind kind{};
  std::string value;

  auto operator<=>(const StoryElement&) const = default;
};

/// Builds an element, rejecting values outside the vocabulary (UnknownValue).
StoryElement make_element(ElementKind kind, std::string_view value,
                          const Vocabulary& vocab = Vocabulary::standard());

enum class NarrativeStage { Start, Journey, Climax, End };

inline constexpr std::array<NarrativeStage, 4> kStages{NarrativeStage::Start, NarrativeStage::Journey,
                                                       NarrativeStage::Climax, NarrativeStage::End};

std::string_view to_string(NarrativeStage stage);
std::optional<NarrativeStage> stage_from_string(std::string_view name);
inline std::size_t stage_index(NarrativeStage s) { return static_cast<std::size_t>(s); }

/// Tokens chosen for a stage before its draft exists. Scanning a second token
/// of the same kind replaces the first.
struct StageSelection {
  std::optional<StoryElement> place;
  std::optional<StoryElement> item;
  std::optional<StoryElement> emotion;

  /// Returns the element that was replaced, if any. Characters are rejected (WrongKind).
  std::optional<StoryElement> select(const StoryElement& e);
  bool complete() const { return place && item && emotion; }
  bool operator==(const StageSelection&) const = default;
};

struct StageRecord {
  NarrativeStage stage{};
  StoryElement place;
  StoryElement item;
  StoryElement emotion;
  std::string draft;
  std::optional<std::string> update;
  /// Latest correction applied after the stage closed (child repairs).
  std::optional<std::string> amendment;

  const std::string& final_text() const;
  bool operator==(const StageRecord&) const = default;
};

struct StoryDocument {
  std::vector<StoryElement> characters;
  /// Child's verbatim description, parallel to `characters`.
  std::vector<std::string> character_notes;
  /// Always a prefix of Start, Journey, Climax, End.
  std::vector<StageRecord> stages;
  std::optional<std::string> premise;

  const StageRecord* find(NarrativeStage stage) const;
  bool operator==(const StoryDocument&) const = default;
};

struct BindPolicy {
  bool allow_duplicates = false;
};

StoryDocument bind_characters(StoryDocument doc, std::span<const StoryElement> chars,
                              BindPolicy policy = {});
StoryDocument set_character_note(StoryDocument doc, std::size_t index, std::string note);
StoryDocument set_premise(StoryDocument doc, std::string premise);
StoryDocument record_stage(StoryDocument doc, NarrativeStage stage, const StoryElement& place,
                           const StoryElement& item, const StoryElement& emotion, std::string draft);
StoryDocument apply_update(StoryDocument doc, NarrativeStage stage, std::string update);
StoryDocument amend_stage(StoryDocument doc, NarrativeStage stage, std::string text);

/// Final text of every stage in order, separated by a blank line.
std::string compile_story(const StoryDocument& doc);

nlohmann::json to_json(const StoryElement& e);
nlohmann::json to_json(const StoryDocument& doc);
StoryDocument story_from_json(const nlohmann::json& j);

}  // namespace tinker
