#include <random>

#include "support.hpp"
#include "tinker/dialogue.hpp"
#include "tinker/token.hpp"

using namespace tinker;

namespace {

PhaseScript script(const std::string& name) {
  return load_script(tinker::testing::data_dir() / "scripts" / (name + ".tts"));
}

const std::vector<std::string> kAllScripts{
    "practice",        "opening",           "characters",      "start_structured", "start_generic",
    "journey_structured", "journey_generic", "climax_structured", "climax_generic", "end_structured",
    "end_generic",     "post_story",        "closing"};

StoryElement el(ElementKind k, std::string_view v) { return make_element(k, v); }

GraphCursor walk_to(const PhaseScript& s, std::string_view id) {
  auto c = start_cursor(s);
  c.current = std::string(id);
  c.visited.push_back(std::string(id));
  return c;
}

}  // namespace

TEST(ParseScript, StartStructured) {
  auto s = script("start_structured");
  EXPECT_EQ(s.phase, Phase::Start);
  EXPECT_EQ(s.variant, "structured");
  EXPECT_EQ(s.marker, "##NEXT##");
  ASSERT_EQ(s.nodes.size(), 9u);
  std::string ids;
  for (const auto& n : s.nodes) ids += n.id;
  EXPECT_EQ(ids, "ABCDEFGHI");
  EXPECT_EQ(s.node("C").scan_kind, ElementKind::Place);
  EXPECT_EQ(s.node("C").mismatch, kRedirectText);
  EXPECT_EQ(s.node("F").act, NodeAct::Draft);
  EXPECT_EQ(s.node("I").act, NodeAct::Update);
  EXPECT_TRUE(s.node("I").terminal());
}

TEST(ParseScript, PracticeMarker) { EXPECT_EQ(script("practice").marker, "##Done##"); }

TEST(ParseScript, Dangling) {
  const char* src = R"(phase start
marker ##NEXT##
node A
say: hi
goto: K
)";
  EXPECT_TINKER_ERROR(parse_script(src), ErrorCode::DanglingTransition);
}

TEST(ParseScript, DuplicateAndSyntax) {
  EXPECT_TINKER_ERROR(parse_script("phase start\nmarker ##NEXT##\nnode A\ngoto: ##NEXT##\nnode A\ngoto: ##NEXT##\n"),
                      ErrorCode::DuplicateNodeId);
  EXPECT_TINKER_ERROR(parse_script("phase start\nmarker ##NEXT##\nnode A\nbogus line\n"), ErrorCode::SyntaxError);
  EXPECT_TINKER_ERROR(parse_script("phase nowhere\nmarker ##NEXT##\nnode A\ngoto: ##NEXT##\n"), ErrorCode::SyntaxError);
}

TEST(ValidateScript, ShippedScriptsAreClean) {
  for (const auto& name : kAllScripts) {
    auto s = script(name);
    auto d = validate_script(s);
    EXPECT_TRUE(d.empty()) << name << ": " << (d.empty() ? "" : d[0].message);
  }
}

TEST(ValidateScript, BogusDeclaredPath) {
  auto s = script("start_structured");
  s.declared_paths.push_back({"A", "B", "C"});
  auto d = validate_script(s);
  ASSERT_FALSE(d.empty());
  EXPECT_EQ(d[0].kind, DiagnosticKind::PathMismatch);
}

TEST(ValidateScript, UnreachableNode) {
  auto s = parse_script("phase start\nmarker ##NEXT##\nnode A\nstub: x\ngoto: ##NEXT##\nnode B\ngoto: ##NEXT##\n"
                        "paths:\n(A) → ##NEXT##\n");
  auto d = validate_script(s);
  ASSERT_FALSE(d.empty());
  EXPECT_EQ(d[0].kind, DiagnosticKind::Unreachable);
  EXPECT_EQ(d[0].node, "B");
}

TEST(EnumeratePaths, DeclaredCounts) {
  const std::vector<std::pair<std::string, std::size_t>> want{
      {"start_structured", 1}, {"start_generic", 2}, {"practice", 2},
      {"characters", 1},       {"post_story", 1},    {"opening", 2}};
  for (const auto& [name, n] : want) {
    auto s = script(name);
    auto paths = enumerate_paths(s);
    EXPECT_EQ(paths.size(), n) << name;
    auto declared = s.declared_paths;
    std::sort(declared.begin(), declared.end());
    std::sort(paths.begin(), paths.end());
    EXPECT_EQ(paths, declared) << name;
  }
  auto start = enumerate_paths(script("start_structured"));
  EXPECT_EQ(start[0].size(), 9u);
}

TEST(EnumeratePaths, PracticeUnrollsLoopOnce) {
  auto paths = enumerate_paths(script("practice"));
  ASSERT_EQ(paths.size(), 2u);
  std::size_t looped = 0;
  for (const auto& p : paths) {
    auto c = std::count(p.begin(), p.end(), "C");
    EXPECT_LE(c, 2);
    if (c == 2) ++looped;
  }
  EXPECT_EQ(looped, 1u);
}

TEST(EnumeratePaths, UndeclaredLoopThrows) {
  auto s = parse_script(
      "phase start\nmarker ##NEXT##\nnode A\nstub: x\ngoto[yes]: ##NEXT##\ngoto[no]: B\nnode B\ngoto: A\n"
      "paths:\n(A) → ##NEXT##\n");
  EXPECT_TINKER_ERROR(enumerate_paths(s), ErrorCode::UnboundedLoop);
}

TEST(Advance, ScanAtC) {
  auto s = script("start_structured");
  auto c = walk_to(s, "C");
  auto step = advance(c, s, input::Scan{el(ElementKind::Place, "Forest")});
  EXPECT_EQ(step.effect.kind, EffectKind::Advanced);
  EXPECT_EQ(step.cursor.current, "D");
}

TEST(Advance, UtteranceAtScanNodeRedirects) {
  auto s = script("start_structured");
  auto c = walk_to(s, "C");
  auto step = advance(c, s, input::Utterance{"happy", Intent::Contribute});
  EXPECT_EQ(step.effect.kind, EffectKind::Redirect);
  EXPECT_EQ(step.effect.text, kRedirectText);
  EXPECT_EQ(step.cursor, c);
  auto wrong = advance(c, s, input::Scan{el(ElementKind::Item, "Boat")});
  EXPECT_EQ(wrong.effect.kind, EffectKind::Redirect);
  EXPECT_EQ(wrong.cursor, c);
}

TEST(Advance, MarkerRules) {
  auto s = script("start_structured");
  auto at_i = walk_to(s, "I");
  auto ready = advance(at_i, s, input::Continue{});
  EXPECT_EQ(ready.effect.kind, EffectKind::AwaitingMarker);
  auto done = advance(ready.cursor, s, input::Marker{"##NEXT##"});
  EXPECT_EQ(done.effect.kind, EffectKind::Completed);
  EXPECT_TRUE(done.cursor.complete);
  EXPECT_TINKER_ERROR(advance(walk_to(s, "F"), s, input::Marker{"##NEXT##"}), ErrorCode::MarkerBeforeCompletion);
  EXPECT_TINKER_ERROR(advance(ready.cursor, s, input::Marker{"##Done##"}), ErrorCode::WrongMarker);
  EXPECT_TINKER_ERROR(advance(done.cursor, s, input::Continue{}), ErrorCode::InputAfterComplete);
}

TEST(Advance, GenericGuards) {
  auto s = script("start_generic");
  auto g = walk_to(s, "G");
  auto no = advance(g, s, input::Utterance{"No.", Intent::Decline});
  EXPECT_EQ(no.effect.kind, EffectKind::AwaitingMarker);
  auto adds = advance(g, s, input::Utterance{"They find a rainbow.", Intent::Contribute});
  EXPECT_EQ(adds.effect.kind, EffectKind::Advanced);
  EXPECT_EQ(adds.cursor.current, "H");
}

TEST(Advance, OpeningStaysOnUnmatchedGuard) {
  auto s = script("opening");
  auto b = walk_to(s, "B");
  auto step = advance(b, s, input::Utterance{"not yet", Intent::Deny});
  EXPECT_EQ(step.effect.kind, EffectKind::Stay);
  EXPECT_EQ(step.cursor.current, "B");
}

// Property: random walks only ever visit prefixes of enumerated paths.
TEST(Advance, RandomWalksFollowPaths) {
  std::mt19937_64 rng(9);
  for (const auto& name : kAllScripts) {
    auto s = script(name);
    auto paths = enumerate_paths(s);
    for (int run = 0; run < 200; ++run) {
      auto c = start_cursor(s);
      for (int step = 0; step < 200 && !c.complete; ++step) {
        const auto& node = s.node(c.current);
        GraphInput in;
        if (c.awaiting_marker) {
          in = input::Marker{s.marker};
        } else if (node.expects == Expect::None) {
          in = input::Continue{};
        } else if (node.expects == Expect::Scan) {
          auto kind = rng() % 3 == 0 ? kElementKinds[rng() % 4] : *node.scan_kind;
          in = input::Scan{{kind, Vocabulary::standard().values(kind).front()}};
        } else {
          Intent intents[] = {Intent::Affirm, Intent::Deny, Intent::Decline, Intent::Contribute, Intent::Neutral};
          in = input::Utterance{"x", intents[rng() % 5]};
        }
        c = advance(c, s, in).cursor;
        bool prefix = std::any_of(paths.begin(), paths.end(), [&](const NodePath& p) {
          return c.visited.size() <= p.size() && std::equal(c.visited.begin(), c.visited.end(), p.begin());
        });
        ASSERT_TRUE(prefix) << name;
      }
      EXPECT_TRUE(c.complete) << name;
    }
  }
}
