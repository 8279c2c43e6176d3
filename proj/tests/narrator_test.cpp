#include <httplib.h>

#include <atomic>
#include <random>
#include <thread>

#include "support.hpp"
#include "tinker/narrator.hpp"
#include "tinker/session.hpp"
#include "tinker/text.hpp"

using namespace tinker;

namespace {

PhaseScript script(const std::string& name) { return load_script(data_dir() / "scripts" / (name + ".tts")); }

std::vector<StoryElement> trio() {
  return {make_element(ElementKind::Character, "Rabbit"), make_element(ElementKind::Character, "Bear"),
          make_element(ElementKind::Character, "Bird")};
}

NarratorContext stage_ctx(const PhaseScript& s, const std::string& node, const std::string& place = "Cave",
                          const std::string& item = "Lantern", const std::string& emotion = "Scared") {
  NarratorContext ctx;
  ctx.script = &s;
  ctx.node = node;
  ctx.stage = NarrativeStage::Start;
  ctx.story = bind_characters({}, trio());
  ctx.selection.select(make_element(ElementKind::Place, place));
  ctx.selection.select(make_element(ElementKind::Item, item));
  ctx.selection.select(make_element(ElementKind::Emotion, emotion));
  return ctx;
}

}  // namespace

TEST(StripMarkers, Examples) {
  auto a = strip_markers("Great job! ##NEXT##");
  EXPECT_EQ(a.utterance, "Great job!");
  EXPECT_EQ(a.markers, std::vector<std::string>{"##NEXT##"});
  auto b = strip_markers("##Done##");
  EXPECT_EQ(b.utterance, "");
  EXPECT_EQ(b.markers, std::vector<std::string>{"##Done##"});
  auto c = strip_markers("Hello there");
  EXPECT_EQ(c.utterance, "Hello there");
  EXPECT_TRUE(c.markers.empty());
  EXPECT_FALSE(c.near_miss);
}

TEST(StripMarkers, MidTextAndNearMiss) {
  auto a = strip_markers("Well done ##NEXT## and more");
  EXPECT_EQ(a.utterance, "Well done and more");
  EXPECT_EQ(a.markers.size(), 1u);
  auto b = strip_markers("Okay! ## NEXT ##");
  EXPECT_EQ(b.utterance, "Okay!");
  EXPECT_TRUE(b.markers.empty());
  EXPECT_TRUE(b.near_miss);
  auto c = strip_markers("Bye ##done##");
  EXPECT_TRUE(c.markers.empty());
  EXPECT_TRUE(c.near_miss);
  auto d = strip_markers("A ##NEXT## B ##Done##");
  EXPECT_EQ(d.utterance, "A B");
  EXPECT_EQ(d.markers, (std::vector<std::string>{"##NEXT##", "##Done##"}));
}

TEST(StripMarkers, IdempotentOnRandomText) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> pieces{"##NEXT##", "##Done##", "## NEXT ##", "#", "##", "NEXT", "Done",
                                        " ",        "hello",    "!",          ".", "\n", "#NEXT#", "##next"};
  for (int i = 0; i < 2000; ++i) {
    std::string raw;
    auto n = rng() % 12;
    for (std::size_t k = 0; k < n; ++k) raw += pieces[rng() % pieces.size()];
    auto once = strip_markers(raw);
    auto twice = strip_markers(once.utterance);
    EXPECT_TRUE(twice.markers.empty()) << raw;
    EXPECT_EQ(twice.utterance, once.utterance) << raw;
    EXPECT_EQ(once.utterance.find("##NEXT##"), std::string::npos);
    EXPECT_EQ(once.utterance.find("##Done##"), std::string::npos);
  }
}

TEST(ParseOutput, StoryTags) {
  auto o = parse_output("Here it is! <story>One. Two.</story> Nice? ##NEXT##", true);
  EXPECT_EQ(o.story_text.value(), "One. Two.");
  EXPECT_EQ(o.utterance, "Here it is! One. Two. Nice?");
  EXPECT_EQ(o.markers.size(), 1u);
  auto p = parse_output("Just a story.", true);
  EXPECT_EQ(p.story_text.value(), "Just a story.");
  EXPECT_FALSE(parse_output("Hi.", false).story_text.has_value());
}

TEST(Stub, DraftNamesEveryElementInSevenSentences) {
  auto s = script("start_structured");
  StubNarrator stub;
  auto out = generate(stub, stage_ctx(s, "F"));
  ASSERT_TRUE(out.story_text);
  EXPECT_EQ(text::count_sentences(*out.story_text), 7u);
  for (auto w : {"Rabbit", "Bear", "Bird", "Cave", "Lantern", "Scared"})
    EXPECT_NE(out.story_text->find(w), std::string::npos) << w;
  EXPECT_TRUE(out.markers.empty());
}

TEST(Stub, DraftsCoverEveryStageAndVocabularyValue) {
  const auto& v = Vocabulary::standard();
  for (auto stage : kStages)
    for (const auto& p : v.values(ElementKind::Place))
      for (const auto& i : v.values(ElementKind::Item))
        for (const auto& e : v.values(ElementKind::Emotion)) {
          auto d = stub_draft(stage, trio(), make_element(ElementKind::Place, p), make_element(ElementKind::Item, i),
                              make_element(ElementKind::Emotion, e));
          ASSERT_EQ(text::count_sentences(d), 7u) << d;
          for (const auto& w : {std::string("Rabbit"), std::string("Bear"), std::string("Bird"), p, i, e})
            ASSERT_NE(d.find(w), std::string::npos) << w << " in " << d;
        }
}

TEST(Stub, PrimitiveQuestionAtRiver) {
  auto s = script("start_structured");
  auto ctx = stage_ctx(s, "G", "River");
  ctx.pending_question = ScaffoldQuestionSpec{ScaffoldType::PrimitiveNarrative, Phase::Start, "", ""};
  EXPECT_EQ(stub_question(*ctx.pending_question, ctx), "What else do you think they might do at the River?");
  StubNarrator stub;
  auto out = generate(stub, ctx);
  EXPECT_NE(out.utterance.find("What else do you think they might do at the River?"), std::string::npos);
}

TEST(Stub, UpdateIsTenSentencesWithAnswerTerms) {
  auto s = script("start_structured");
  auto ctx = stage_ctx(s, "I");
  auto draft = stub_draft(NarrativeStage::Start, trio(), *ctx.selection.place, *ctx.selection.item, *ctx.selection.emotion);
  ctx.story = record_stage(ctx.story, NarrativeStage::Start, *ctx.selection.place, *ctx.selection.item,
                           *ctx.selection.emotion, draft);
  ctx.answers = {"They see a turtle, and the turtle becomes a pet for them.", "They feel happy together"};
  ctx.awaiting_marker = true;
  StubNarrator stub;
  auto out = generate(stub, ctx);
  ASSERT_TRUE(out.story_text);
  EXPECT_EQ(text::count_sentences(*out.story_text), 10u);
  EXPECT_EQ(out.story_text->rfind(draft, 0), 0u);
  for (auto w : {"turtle", "pet", "happy", "together"}) EXPECT_NE(out.story_text->find(w), std::string::npos) << w;
  EXPECT_EQ(out.markers, std::vector<std::string>{"##NEXT##"});

  for (std::size_t n = 0; n < 6; ++n) {
    std::vector<std::string> answers(n, "A dragon sings loudly");
    EXPECT_EQ(text::count_sentences(stub_update(draft, answers)), 10u) << n;
  }
}

TEST(Stub, Deterministic) {
  auto s = script("start_structured");
  StubNarrator a, b;
  for (auto node : {"A", "B", "C", "F", "G", "I"})
    for (auto p : {Purpose::Perform, Purpose::React, Purpose::Stay, Purpose::Clarify, Purpose::FollowUp,
                   Purpose::OffScript, Purpose::Correction, Purpose::Rescan}) {
      auto ctx = stage_ctx(s, node);
      ctx.purpose = p;
      ctx.child_text = "they were scared and";
      EXPECT_EQ(a.complete(ctx), b.complete(ctx));
    }
}

TEST(Stub, RepairTexts) {
  auto s = script("characters");
  NarratorContext ctx;
  ctx.script = &s;
  ctx.node = "D";
  ctx.story = bind_characters({}, trio());
  ctx.purpose = Purpose::FollowUp;
  ctx.child_text = "scared and";
  StubNarrator stub;
  EXPECT_EQ(stub.complete(ctx), "Scared and.. what? Tell me more about Rabbit!");
  ctx.purpose = Purpose::Clarify;
  EXPECT_EQ(stub.complete(ctx).rfind("I'm not sure what you mean. Let me ask again: ", 0), 0u);
}

TEST(Stub, MarkerOnlyWhenAwaiting) {
  auto s = script("opening");
  NarratorContext ctx;
  ctx.script = &s;
  ctx.node = "D";
  StubNarrator stub;
  EXPECT_EQ(stub.complete(ctx).find("##"), std::string::npos);
  ctx.purpose = Purpose::React;
  ctx.awaiting_marker = true;
  auto out = generate(stub, ctx);
  EXPECT_EQ(out.markers, std::vector<std::string>{"##NEXT##"});
  EXPECT_EQ(out.utterance.find("##"), std::string::npos);
}

TEST(Generate, EmptyResponse) {
  RecordedNarrator blank({"   "});
  NarratorContext ctx;
  EXPECT_TINKER_ERROR(generate(blank, ctx), ErrorCode::EmptyResponse);
}

TEST(Recorded, PlaysBackInOrderThenFails) {
  RecordedNarrator r({"one", "two"});
  NarratorContext ctx;
  EXPECT_EQ(r.complete(ctx), "one");
  EXPECT_EQ(r.complete(ctx), "two");
  EXPECT_TINKER_ERROR(r.complete(ctx), ErrorCode::BadRecord);
}

TEST(SentenceTarget, DraftAndUpdate) {
  auto s = script("start_structured");
  EXPECT_EQ(sentence_target(stage_ctx(s, "F")), 7u);
  EXPECT_EQ(sentence_target(stage_ctx(s, "I")), 10u);
  EXPECT_EQ(sentence_target(stage_ctx(s, "G")), 0u);
}

TEST(RemoteRequest, CarriesPreambleScriptAndTranscript) {
  auto s = script("start_structured");
  auto ctx = stage_ctx(s, "F");
  ctx.preamble = "You are a friendly intelligent agent named Tinker Tales.";
  Turn t;
  t.speaker = Speaker::Child;
  t.text = "I'm ready";
  ctx.transcript.push_back(t);
  RemoteConfig cfg;
  cfg.model = "m";
  auto body = build_request(ctx, cfg);
  auto system = body.at("system").get<std::string>();
  EXPECT_NE(system.find("named Tinker Tales"), std::string::npos);
  EXPECT_NE(system.find("(F)"), std::string::npos);
  ASSERT_FALSE(body.at("messages").empty());
  EXPECT_EQ(body["messages"].back()["role"], "user");
  EXPECT_EQ(body.at("model"), "m");
  EXPECT_EQ(response_text(Json::parse(R"({"content":[{"type":"text","text":"hi"}]})")), "hi");
  EXPECT_EQ(response_text(Json::parse(R"({"choices":[{"message":{"content":"yo"}}]})")), "yo");
}

namespace {

/// Local provider stub on an ephemeral port.
class FakeProvider {
 public:
  FakeProvider() {
    srv_.Post("/v1/messages", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth_ = req.get_header_value("Authorization");
      if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
      res.status = status_;
      res.set_content(R"({"content":[{"type":"text","text":"Hello friend! ##NEXT##"}]})", "application/json");
    });
    port_ = srv_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { srv_.listen_after_bind(); });
    srv_.wait_until_ready();
  }
  ~FakeProvider() {
    srv_.stop();
    thread_.join();
  }
  RemoteConfig config(std::vector<std::string>* trace = nullptr) const {
    RemoteConfig cfg;
    cfg.url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/messages";
    cfg.model = "test";
    cfg.api_key = "secret-key";
    cfg.timeout = std::chrono::milliseconds(300);
    if (trace) cfg.trace = [trace](std::string_view line) { trace->emplace_back(line); };
    return cfg;
  }
  std::atomic<int> status_{200};
  std::atomic<int> delay_ms_{0};
  std::string last_auth_;

 private:
  httplib::Server srv_;
  int port_ = 0;
  std::thread thread_;
};

ProviderCause cause_of(RemoteNarrator& n, const NarratorContext& ctx) {
  try {
    n.complete(ctx);
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.code(), ErrorCode::ProviderUnavailable);
    return e.cause();
  }
  ADD_FAILURE() << "no ProviderError";
  return ProviderCause::BadResponse;
}

}  // namespace

TEST(Remote, HealthyEndpointAndStatusMapping) {
  FakeProvider fake;
  std::vector<std::string> trace;
  RemoteNarrator n(fake.config(&trace));
  auto s = script("opening");
  NarratorContext ctx;
  ctx.script = &s;
  ctx.node = "A";
  auto out = generate(n, ctx);
  EXPECT_EQ(out.utterance, "Hello friend!");
  EXPECT_EQ(out.markers.size(), 1u);
  EXPECT_EQ(fake.last_auth_, "Bearer secret-key");
  ASSERT_FALSE(trace.empty());
  for (const auto& line : trace) EXPECT_EQ(line.find("secret-key"), std::string::npos) << line;

  fake.status_ = 401;
  EXPECT_EQ(cause_of(n, ctx), ProviderCause::AuthFailure);
  fake.status_ = 429;
  EXPECT_EQ(cause_of(n, ctx), ProviderCause::RateLimited);
  fake.status_ = 500;
  EXPECT_EQ(cause_of(n, ctx), ProviderCause::BadResponse);
  fake.status_ = 200;
  fake.delay_ms_ = 1200;
  EXPECT_EQ(cause_of(n, ctx), ProviderCause::Timeout);
}

TEST(Remote, UnreachableEndpointIsNetwork) {
  RemoteConfig cfg;
  cfg.url = "http://127.0.0.1:1/v1/messages";
  cfg.timeout = std::chrono::milliseconds(300);
  RemoteNarrator n(cfg);
  auto s = script("opening");
  NarratorContext ctx;
  ctx.script = &s;
  ctx.node = "A";
  EXPECT_EQ(cause_of(n, ctx), ProviderCause::Network);
}
