#include <random>

#include "support.hpp"
#include "tinker/story.hpp"
#include "tinker/text.hpp"
#include "tinker/token.hpp"

using namespace tinker;

namespace {

StoryElement ch(std::string_view v) { return make_element(ElementKind::Character, v); }
StoryElement pl(std::string_view v) { return make_element(ElementKind::Place, v); }
StoryElement it(std::string_view v) { return make_element(ElementKind::Item, v); }
StoryElement em(std::string_view v) { return make_element(ElementKind::Emotion, v); }

StoryDocument bound() {
  std::vector<StoryElement> chars{ch("Rabbit"), ch("Bear"), ch("Lion")};
  return bind_characters({}, chars);
}

StoryDocument drafted(int n) {
  auto doc = bound();
  for (int i = 0; i < n; ++i) {
    auto s = kStages[i];
    doc = record_stage(doc, s, pl("Cave"), it("Bag"), em("Scared"), "Draft " + std::string(to_string(s)) + ".");
  }
  return doc;
}

}  // namespace

TEST(Vocabulary, StandardHas26Values) {
  const auto& v = Vocabulary::standard();
  EXPECT_EQ(v.size(), 26u);
  EXPECT_TRUE(v.contains(ElementKind::Item, "Lantern"));
  EXPECT_FALSE(v.contains(ElementKind::Place, "Desert"));
}

TEST(Vocabulary, DataFileMatchesBuiltIn) {
  auto file = Vocabulary::load(tinker::testing::data_dir() / "vocabulary.txt");
  for (auto k : kElementKinds) EXPECT_EQ(file.values(k), Vocabulary::standard().values(k)) << to_string(k);
}

TEST(BindCharacters, BindsInOrder) {
  std::vector<StoryElement> chars{ch("Frog"), ch("Bird"), ch("Bear")};
  auto doc = bind_characters({}, chars);
  ASSERT_EQ(doc.characters.size(), 3u);
  EXPECT_EQ(doc.characters[0].value, "Frog");
  EXPECT_EQ(doc.characters[1].value, "Bird");
  EXPECT_EQ(doc.characters[2].value, "Bear");
  EXPECT_EQ(bound().characters[2].value, "Lion");
}

TEST(BindCharacters, Errors) {
  std::vector<StoryElement> dup{ch("Bear"), ch("Bear"), ch("Lion")};
  EXPECT_TINKER_ERROR(bind_characters({}, dup), ErrorCode::DuplicateCharacter);
  EXPECT_NO_THROW(bind_characters({}, dup, BindPolicy{true}));
  std::vector<StoryElement> two{ch("Bear"), ch("Lion")};
  EXPECT_TINKER_ERROR(bind_characters({}, two), ErrorCode::WrongKind);
  std::vector<StoryElement> kinds{ch("Bear"), pl("River"), ch("Lion")};
  EXPECT_TINKER_ERROR(bind_characters({}, kinds), ErrorCode::WrongKind);
  std::vector<StoryElement> ok{ch("Frog"), ch("Bird"), ch("Bear")};
  EXPECT_TINKER_ERROR(bind_characters(bound(), ok), ErrorCode::AlreadyBound);
}

TEST(RecordStage, StartRecord) {
  auto doc = record_stage(bound(), NarrativeStage::Start, pl("Cave"), it("Bag"), em("Scared"), "Once upon a time.");
  const auto* r = doc.find(NarrativeStage::Start);
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->place.value, "Cave");
  EXPECT_EQ(r->item.value, "Bag");
  EXPECT_EQ(r->emotion.value, "Scared");
  EXPECT_FALSE(r->update);
}

TEST(RecordStage, Errors) {
  EXPECT_TINKER_ERROR(record_stage(drafted(1), NarrativeStage::Climax, pl("Cave"), it("Bag"), em("Sad"), "x"),
                      ErrorCode::OutOfOrderStage);
  EXPECT_TINKER_ERROR(record_stage(bound(), NarrativeStage::Start, it("Boat"), it("Bag"), em("Sad"), "x"),
                      ErrorCode::WrongKind);
  EXPECT_TINKER_ERROR(record_stage(drafted(1), NarrativeStage::Start, pl("Cave"), it("Bag"), em("Sad"), "x"),
                      ErrorCode::StageAlreadyDrafted);
}

TEST(ApplyUpdate, AtMostOnce) {
  auto doc = apply_update(drafted(1), NarrativeStage::Start, "Rabbit was curious and wanted to explore.");
  EXPECT_EQ(*doc.find(NarrativeStage::Start)->update, "Rabbit was curious and wanted to explore.");
  EXPECT_TINKER_ERROR(apply_update(doc, NarrativeStage::Start, "again"), ErrorCode::AlreadyUpdated);
  EXPECT_TINKER_ERROR(apply_update(doc, NarrativeStage::Journey, "x"), ErrorCode::NotDrafted);
}

TEST(CompileStory, Concatenation) {
  auto doc = drafted(4);
  EXPECT_EQ(compile_story(doc), "Draft Start.\n\nDraft Journey.\n\nDraft Climax.\n\nDraft End.");
  doc = apply_update(doc, NarrativeStage::Start, "Updated Start.");
  // oracle: hand-built concatenation with the Start draft replaced
  std::string want = "Updated Start.";
  for (auto s : {"Journey", "Climax", "End"}) want += std::string("\n\nDraft ") + s + ".";
  EXPECT_EQ(compile_story(doc), want);
  doc = amend_stage(doc, NarrativeStage::End, "Amended End.");
  EXPECT_EQ(compile_story(doc).substr(compile_story(doc).size() - 12), "Amended End.");
  EXPECT_TINKER_ERROR(compile_story(drafted(3)), ErrorCode::IncompleteStory);
}

TEST(StoryDocument, PureOperations) {
  EXPECT_EQ(drafted(2), drafted(2));
  auto a = bound();
  auto b = set_premise(a, "A trip.");
  EXPECT_FALSE(a.premise);
  EXPECT_EQ(*b.premise, "A trip.");
}

TEST(StoryDocument, JsonRoundTrip) {
  auto doc = apply_update(drafted(4), NarrativeStage::Journey, "u");
  doc = set_character_note(doc, 1, "Bear is brave.");
  doc = set_premise(doc, "Friends go on a trip.");
  EXPECT_EQ(story_from_json(to_json(doc)), doc);
}

TEST(StageSelection, ReplacesSameKind) {
  StageSelection s;
  EXPECT_FALSE(s.select(pl("River")));
  auto prev = s.select(pl("Cave"));
  ASSERT_TRUE(prev);
  EXPECT_EQ(prev->value, "River");
  EXPECT_EQ(s.place->value, "Cave");
  EXPECT_TINKER_ERROR(s.select(ch("Bear")), ErrorCode::WrongKind);
}

// ---------------------------------------------------------------------------

TEST(Token, ParseExamples) {
  EXPECT_EQ(parse_token("Character:Bear"), ch("Bear"));
  EXPECT_EQ(parse_token("Emotion:Happy"), em("Happy"));
  EXPECT_TINKER_ERROR(parse_token("  Place:River\n"), ErrorCode::UnknownKind);
  EXPECT_TINKER_ERROR(parse_token("Bear"), ErrorCode::Malformed);
  EXPECT_TINKER_ERROR(parse_token("Place:Desert"), ErrorCode::UnknownValue);
  EXPECT_TINKER_ERROR(parse_token("Animal:Bear"), ErrorCode::UnknownKind);
  EXPECT_TINKER_ERROR(parse_token("Place:River:Cave"), ErrorCode::Malformed);
  EXPECT_TINKER_ERROR(parse_token("place:River"), ErrorCode::UnknownKind);
}

TEST(Token, Encode) {
  EXPECT_EQ(encode_token(pl("Forest")), "Place:Forest");
  EXPECT_EQ(encode_token(it("Lantern")), "Item:Lantern");
}

TEST(Token, RoundTripWholeVocabulary) {
  std::size_t n = 0;
  for (auto k : kElementKinds)
    for (const auto& v : Vocabulary::standard().values(k)) {
      StoryElement e{k, v};
      EXPECT_EQ(parse_token(encode_token(e)), e);
      ++n;
    }
  EXPECT_EQ(n, 26u);
}

TEST(Token, RandomStringsOnlyParseWhenValid) {
  std::set<std::string> valid;
  for (auto k : kElementKinds)
    for (const auto& v : Vocabulary::standard().values(k)) valid.insert(encode_token({k, v}));
  std::mt19937_64 rng(42);
  const std::string alphabet = "PlaceItmoEnCharctrRbBvsdfg:: \t";
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    auto len = rng() % 20;
    for (std::size_t j = 0; j < len; ++j) s += alphabet[rng() % alphabet.size()];
    // every tenth case is a near-valid mutation of a real payload
    if (i % 10 == 0) {
      auto base = *std::next(valid.begin(), static_cast<long>(rng() % valid.size()));
      base[rng() % base.size()] = alphabet[rng() % alphabet.size()];
      s = base;
    }
    bool parsed = true;
    try {
      parse_token(s);
    } catch (const Error&) {
      parsed = false;
    }
    EXPECT_EQ(parsed, valid.count(s) == 1) << '"' << s << '"';
  }
}

TEST(Token, ExpectKind) {
  auto bad = expect_kind(it("Boat"), ElementKind::Place);
  ASSERT_FALSE(is_ok(bad));
  EXPECT_EQ(std::get<KindMismatch>(bad).redirect, "You need to scan the correct NFC toy to choose.");
  EXPECT_TRUE(is_ok(expect_kind(pl("River"), ElementKind::Place)));
  EXPECT_TRUE(is_ok(expect_kind(em("Curious"), ElementKind::Emotion)));
}

// ---------------------------------------------------------------------------

TEST(Text, Words) {
  EXPECT_EQ(text::words("  To find   treasure. ").size(), 3u);
  EXPECT_TRUE(text::words("").empty());
}

TEST(Text, Stem) {
  EXPECT_EQ(text::stem("screams"), text::stem("scream"));
  EXPECT_EQ(text::stem("screamed"), text::stem("scream"));
  EXPECT_EQ(text::stem("frightened"), text::stem("frighten"));
  EXPECT_EQ(text::stem("wants"), text::stem("want"));
  EXPECT_EQ(text::stem("stories"), text::stem("story"));
  EXPECT_EQ(text::stem("running"), text::stem("run"));
  EXPECT_EQ(text::stem("bats"), text::stem("bat"));
  EXPECT_NE(text::stem("saw"), text::stem("see"));
  EXPECT_EQ(text::stem("rabbit's"), text::stem("rabbit"));
}

TEST(Text, SentencesAndClause) {
  EXPECT_EQ(text::count_sentences("One. Two! Three?"), 3u);
  EXPECT_EQ(text::count_sentences("Wait... what"), 2u);
  EXPECT_EQ(text::as_clause("They saw a bat. It flew!"), "They saw a bat, It flew");
  EXPECT_EQ(text::count_sentences(text::as_clause("a. b? c!") + "."), 1u);
}
