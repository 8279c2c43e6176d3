#include "tinker/story.hpp"

#include <algorithm>

#include "tinker/error.hpp"
#include "tinker/text.hpp"

namespace tinker {

std::string_view to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::Character: return "Character";
    case ElementKind::Place: return "Place";
    case ElementKind::Item: return "Item";
    case ElementKind::Emotion: return "Emotion";
  }
  return "?";
}

std::optional<ElementKind> kind_from_string(std::string_view name) {
  for (auto k : kElementKinds)
    if (to_string(k) == name) return k;
  return std::nullopt;
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab = parse(R"(
[Character]
Rabbit
Bear
Bird
Frog
Lion
[Place]
Playground
River
Island
Forest
School
Cave
Hut
[Item]
Boat
Bag
Map
Hat
Honey
Key
Lantern
[Emotion]
Scared
Proud
Excited
Sad
Happy
Curious
Angry
)");
  return vocab;
}

Vocabulary Vocabulary::parse(std::string_view source) {
  Vocabulary v;
  std::optional<ElementKind> section;
  std::size_t lineno = 0;
  for (const auto& raw : text::split(source, '\n')) {
    ++lineno;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw Error(ErrorCode::SyntaxError, "vocabulary line " + std::to_string(lineno));
      section = kind_from_string(line.substr(1, line.size() - 2));
      if (!section)
        throw Error(ErrorCode::UnknownKind, "vocabulary section '" + std::string(line) + "'");
      continue;
    }
    if (!section)
      throw Error(ErrorCode::SyntaxError,
                  "vocabulary value before any section, line " + std::to_string(lineno));
    if (line.find(':') != std::string_view::npos)
      throw Error(ErrorCode::SyntaxError, "vocabulary value contains ':', line " + std::to_string(lineno));
    auto& bucket = v.values_[static_cast<std::size_t>(*section)];
    if (std::find(bucket.begin(), bucket.end(), line) == bucket.end()) bucket.emplace_back(line);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return parse(text::read_file(path)); }

bool Vocabulary::contains(ElementKind kind, std::string_view value) const {
  const auto& bucket = values(kind);
  return std::find(bucket.begin(), bucket.end(), value) != bucket.end();
}

const std::vector<std::string>& Vocabulary::values(ElementKind kind) const {
  return values_[static_cast<std::size_t>(kind)];
}

std::size_t Vocabulary::size() const {
  std::size_t n = 0;
  for (const auto& b : values_) n += b.size();
  return n;
}

StoryElement make_element(ElementKind kind, std::string_view value, const Vocabulary& vocab) {
  if (!vocab.contains(kind, value))
    throw Error(ErrorCode::UnknownValue,
                std::string(value) + " is not a " + std::string(to_string(kind)) + " token");
  return StoryElement{kind, std::string(value)};
}

std::string_view to_string(NarrativeStage stage) {
  switch (stage) {
    case NarrativeStage::Start: return "Start";
    case NarrativeStage::Journey: return "Journey";
    case NarrativeStage::Climax: return "Climax";
    case NarrativeStage::End: return "End";
  }
  return "?";
}

std::optional<NarrativeStage> stage_from_string(std::string_view name) {
  for (auto s : kStages)
    if (to_string(s) == name || text::lower(to_string(s)) == name) return s;
  return std::nullopt;
}

std::optional<StoryElement> StageSelection::select(const StoryElement& e) {
  std::optional<StoryElement>* slot = nullptr;
  switch (e.kind) {
    case ElementKind::Place: slot = &place; break;
    case ElementKind::Item: slot = &item; break;
    case ElementKind::Emotion: slot = &emotion; break;
    case ElementKind::Character:
      throw Error(ErrorCode::WrongKind, "characters are not stage tokens");
  }
  auto previous = *slot;
  *slot = e;
  return previous;
}

const std::string& StageRecord::final_text() const {
  if (amendment) return *amendment;
  if (update) return *update;
  return draft;
}

const StageRecord* StoryDocument::find(NarrativeStage stage) const {
  for (const auto& r : stages)
    if (r.stage == stage) return &r;
  return nullptr;
}

namespace {

StageRecord& find_mut(StoryDocument& doc, NarrativeStage stage) {
  for (auto& r : doc.stages)
    if (r.stage == stage) return r;
  throw Error(ErrorCode::NotDrafted, std::string(to_string(stage)) + " has no draft");
}

void expect_kind_of(const StoryElement& e, ElementKind want, std::string_view slot) {
  if (e.kind != want)
    throw Error(ErrorCode::WrongKind, std::string(slot) + " slot needs a " + std::string(to_string(want)) +
                                          " token, got " + std::string(to_string(e.kind)) + ":" + e.value);
}

}  // namespace

StoryDocument bind_characters(StoryDocument doc, std::span<const StoryElement> chars, BindPolicy policy) {
  if (!doc.characters.empty()) throw Error(ErrorCode::AlreadyBound, "characters already chosen");
  if (chars.size() != 3)
    throw Error(ErrorCode::WrongKind, "exactly three characters are needed, got " + std::to_string(chars.size()));
  for (const auto& c : chars) expect_kind_of(c, ElementKind::Character, "character");
  if (!policy.allow_duplicates) {
    for (std::size_t i = 0; i < chars.size(); ++i)
      for (std::size_t j = i + 1; j < chars.size(); ++j)
        if (chars[i] == chars[j]) throw Error(ErrorCode::DuplicateCharacter, chars[i].value + " chosen twice");
  }
  doc.characters.assign(chars.begin(), chars.end());
  doc.character_notes.assign(chars.size(), std::string{});
  return doc;
}

StoryDocument set_character_note(StoryDocument doc, std::size_t index, std::string note) {
  if (index >= doc.characters.size())
    throw Error(ErrorCode::NotDrafted, "no character at position " + std::to_string(index + 1));
  doc.character_notes[index] = std::move(note);
  return doc;
}

StoryDocument set_premise(StoryDocument doc, std::string premise) {
  if (doc.premise && !doc.premise->empty()) {
    *doc.premise += " " + premise;
  } else {
    doc.premise = std::move(premise);
  }
  return doc;
}

StoryDocument record_stage(StoryDocument doc, NarrativeStage stage, const StoryElement& place,
                           const StoryElement& item, const StoryElement& emotion, std::string draft) {
  if (doc.find(stage)) throw Error(ErrorCode::StageAlreadyDrafted, std::string(to_string(stage)));
  if (stage_index(stage) != doc.stages.size())
    throw Error(ErrorCode::OutOfOrderStage, std::string(to_string(stage)) + " before " +
                                                std::string(to_string(kStages[doc.stages.size()])));
  expect_kind_of(place, ElementKind::Place, "place");
  expect_kind_of(item, ElementKind::Item, "item");
  expect_kind_of(emotion, ElementKind::Emotion, "emotion");
  if (text::trim(draft).empty()) throw Error(ErrorCode::NotDrafted, "empty draft");
  doc.stages.push_back(StageRecord{stage, place, item, emotion, std::move(draft), std::nullopt, std::nullopt});
  return doc;
}

StoryDocument apply_update(StoryDocument doc, NarrativeStage stage, std::string update) {
  auto& rec = find_mut(doc, stage);
  if (rec.update) throw Error(ErrorCode::AlreadyUpdated, std::string(to_string(stage)));
  rec.update = std::move(update);
  return doc;
}

StoryDocument amend_stage(StoryDocument doc, NarrativeStage stage, std::string text) {
  find_mut(doc, stage).amendment = std::move(text);
  return doc;
}

std::string compile_story(const StoryDocument& doc) {
  if (doc.stages.size() != kStages.size())
    throw Error(ErrorCode::IncompleteStory, std::to_string(doc.stages.size()) + " of 4 stages drafted");
  std::string out;
  for (const auto& rec : doc.stages) {
    if (!out.empty()) out += "\n\n";
    out += rec.final_text();
  }
  return out;
}

nlohmann::json to_json(const StoryElement& e) {
  return nlohmann::json{{"kind", to_string(e.kind)}, {"value", e.value}};
}

namespace {

nlohmann::json opt(const std::optional<std::string>& s) { return s ? nlohmann::json(*s) : nlohmann::json(nullptr); }

std::optional<std::string> opt_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

StoryElement element_of(ElementKind kind, const nlohmann::json& j) {
  return StoryElement{kind, j.get<std::string>()};
}

}  // namespace

nlohmann::json to_json(const StoryDocument& doc) {
  nlohmann::json chars = nlohmann::json::array();
  for (std::size_t i = 0; i < doc.characters.size(); ++i) {
    chars.push_back({{"value", doc.characters[i].value},
                     {"note", i < doc.character_notes.size() ? doc.character_notes[i] : std::string{}}});
  }
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& r : doc.stages) {
    stages.push_back({{"stage", to_string(r.stage)},
                      {"place", r.place.value},
                      {"item", r.item.value},
                      {"emotion", r.emotion.value},
                      {"draft", r.draft},
                      {"update", opt(r.update)},
                      {"amendment", opt(r.amendment)}});
  }
  nlohmann::json order = nlohmann::json::array();
  for (auto s : kStages) order.push_back(to_string(s));
  return nlohmann::json{{"characters", chars},
                        {"premise", opt(doc.premise)},
                        {"stageOrder", order},
                        {"stages", stages}};
}

StoryDocument story_from_json(const nlohmann::json& j) {
  StoryDocument doc;
  for (const auto& c : j.at("characters")) {
    doc.characters.push_back(element_of(ElementKind::Character, c.at("value")));
    doc.character_notes.push_back(c.value("note", std::string{}));
  }
  doc.premise = opt_string(j, "premise");
  for (const auto& s : j.at("stages")) {
    auto stage = stage_from_string(s.at("stage").get<std::string>());
    if (!stage) throw Error(ErrorCode::BadRecord, "unknown stage " + s.at("stage").dump());
    doc.stages.push_back(StageRecord{*stage, element_of(ElementKind::Place, s.at("place")),
                                     element_of(ElementKind::Item, s.at("item")),
                                     element_of(ElementKind::Emotion, s.at("emotion")),
                                     s.at("draft").get<std::string>(), opt_string(s, "update"),
                                     opt_string(s, "amendment")});
  }
  return doc;
}

}  // namespace tinker
