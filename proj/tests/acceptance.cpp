// One line per primary acceptance criterion; exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <unistd.h>

#include "harness.hpp"
#include "narrators.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "tinker/analysis.hpp"
#include "tinker/error.hpp"
#include "tinker/persistence.hpp"
#include "tinker/scaffolding.hpp"
#include "tinker/simulator.hpp"
#include "tinker/text.hpp"
#include "tinker/token.hpp"

using namespace tinker;
using tinker::testing::Harness;

namespace {

// Pinned budgets and tolerances.
constexpr double kScriptBudgetSeconds = 1.0;
constexpr double kComplianceBudgetSeconds = 30.0;
constexpr int kComplianceRuns = 100;
constexpr int kRandomPayloads = 10000;
constexpr int kTurnTakingCases = 1000;
constexpr std::int64_t kPauseMs = 4000;
constexpr int kMaxReprompts = 2;
constexpr int kReplayRuns = 50;
constexpr int kCorpora = 20;
constexpr double kStatsTolerance = 1e-9;
constexpr double kProportionTolerance = 1e-12;

/// Collects the first few failures of one criterion.
struct Check {
  std::string name;
  std::vector<std::string> failures;
  std::string note;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  bool pass() const { return failures.empty(); }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const ScriptLibrary& scripts() {
  static const ScriptLibrary lib = ScriptLibrary::load_default();
  return lib;
}

const PhaseScript& script_for(const SessionLog& log, Phase phase) {
  const auto* s = scripts().find(phase, text::lower(log.condition()));
  if (!s) throw Error(ErrorCode::ScriptSetIncomplete, "no script for " + std::string(to_string(phase)));
  return *s;
}

struct Run {
  std::string persona;
  Condition condition;
  std::uint64_t seed;
  SimResult result;
};

std::vector<Run>& cooperative_runs() {
  static std::vector<Run> runs;
  return runs;
}

// ---------------------------------------------------------------------------

Check script_fidelity() {
  Check c{"script fidelity", {}, {}};
  auto t0 = std::chrono::steady_clock::now();
  const std::map<std::string, std::size_t> published{
      {"start_structured.tts", 1}, {"start_generic.tts", 2}, {"practice.tts", 2},
      {"characters.tts", 1},       {"post_story.tts", 1},
  };
  std::size_t files = 0;
  bool practice_loop = false;
  for (const auto& e : std::filesystem::directory_iterator(data_dir() / "scripts")) {
    if (e.path().extension() != ".tts") continue;
    ++files;
    auto name = e.path().filename().string();
    try {
      auto script = load_script(e.path());
      auto paths = enumerate_paths(script);
      auto declared = script.declared_paths;
      std::sort(paths.begin(), paths.end());
      std::sort(declared.begin(), declared.end());
      c.expect(paths == declared, name + ": enumerated paths differ from declared paths");
      c.expect(validate_script(script).empty(), name + ": validation diagnostics");
      if (auto it = published.find(name); it != published.end())
        c.expect(paths.size() == it->second, name + ": " + std::to_string(paths.size()) + " paths, expected " +
                                                 std::to_string(it->second));
      if (name == "practice.tts")
        for (const auto& p : paths)
          practice_loop |= std::set<std::string>(p.begin(), p.end()).size() < p.size();
    } catch (const Error& err) {
      c.expect(false, name + ": " + err.what());
    }
  }
  c.expect(files >= 8, "fewer than eight scripts shipped");
  c.expect(practice_loop, "practice has no unrolled loop path");
  for (const auto& [name, _] : published)
    c.expect(std::filesystem::exists(data_dir() / "scripts" / name), name + " missing");
  auto secs = seconds_since(t0);
  c.expect(secs < kScriptBudgetSeconds, "took " + std::to_string(secs) + " s");
  std::ostringstream note;
  note << files << " scripts, " << secs << " s";
  c.note = note.str();
  return c;
}

Check schedule_compliance() {
  Check c{"schedule compliance", {}, {}};
  auto persona = find_persona("cooperative");
  auto t0 = std::chrono::steady_clock::now();
  using Counts = std::map<ScaffoldType, int>;
  const Counts post{{ScaffoldType::TrueNarrative, 2},
                    {ScaffoldType::RelationshipSkills, 1},
                    {ScaffoldType::ResponsibleDecisionMaking, 1}};
  const std::map<Condition, Counts> stage{
      {Condition::Structured,
       {{ScaffoldType::PrimitiveNarrative, 2}, {ScaffoldType::ChainNarrative, 2}, {ScaffoldType::SocialAwareness, 4}}},
      {Condition::Generic, {{ScaffoldType::OpenInvitation, 4}}}};
  for (auto condition : {Condition::Structured, Condition::Generic})
    for (int seed = 0; seed < kComplianceRuns; ++seed) {
      auto tag = std::string(to_string(condition)) + " seed " + std::to_string(seed);
      try {
        auto r = run_persona(persona, condition, scripts(), static_cast<std::uint64_t>(seed));
        c.expect(audit_session(r.log).pass, tag + ": audit failed");
        Counts in_stages, after;
        for (const auto& q : questions_of(r.log)) ++(stage_of(q.phase) ? in_stages : after)[q.scaffold];
        c.expect(in_stages == stage.at(condition), tag + ": wrong narrative-stage questions");
        c.expect(after == post, tag + ": wrong post-story questions");
        c.expect(r.story.has_value(), tag + ": not completed");
        cooperative_runs().push_back({persona.name, condition, static_cast<std::uint64_t>(seed), std::move(r)});
      } catch (const Error& err) {
        c.expect(false, tag + ": " + err.what());
      }
    }
  auto secs = seconds_since(t0);
  c.expect(secs < kComplianceBudgetSeconds, "took " + std::to_string(secs) + " s");
  std::ostringstream note;
  note << 2 * kComplianceRuns << " runs, " << secs << " s";
  c.note = note.str();
  return c;
}

Check protocol() {
  Check c{"protocol", {}, {}};
  std::set<std::string> valid;
  for (auto k : kElementKinds)
    for (const auto& v : Vocabulary::standard().values(k)) {
      StoryElement e{k, v};
      auto s = encode_token(e);
      valid.insert(s);
      try {
        c.expect(parse_token(s) == e && encode_token(parse_token(s)) == s, s + ": round trip");
      } catch (const Error& err) {
        c.expect(false, s + ": " + err.what());
      }
      for (auto want : kElementKinds) {
        auto check = expect_kind(e, want);
        if (want == k) c.expect(is_ok(check), s + ": rejected for its own kind");
        else
          c.expect(!is_ok(check) && std::get<KindMismatch>(check).redirect == kRedirectText,
                   s + ": mismatch text for " + std::string(to_string(want)));
      }
    }
  c.expect(valid.size() == 26, "vocabulary has " + std::to_string(valid.size()) + " payloads");

  std::mt19937_64 rng(20240611);
  const std::string alphabet = "CharcterPlaeItmEonBRbvsdfgHpyLkLW:: \t\n";
  std::size_t accepted = 0;
  for (int i = 0; i < kRandomPayloads; ++i) {
    std::string s;
    switch (i % 4) {
      case 0: {  // random characters
        auto len = rng() % 24;
        for (std::size_t j = 0; j < len; ++j) s += alphabet[rng() % alphabet.size()];
        break;
      }
      case 1: {  // one-character mutation of a valid payload
        s = *std::next(valid.begin(), static_cast<long>(rng() % valid.size()));
        s[rng() % s.size()] = alphabet[rng() % alphabet.size()];
        break;
      }
      case 2: {  // valid payload with noise around it
        s = *std::next(valid.begin(), static_cast<long>(rng() % valid.size()));
        if (rng() % 2) s = " " + s;
        if (rng() % 2) s += "\n";
        if (rng() % 3 == 0) s = text::lower(s);
        break;
      }
      default:  // a valid payload
        s = *std::next(valid.begin(), static_cast<long>(rng() % valid.size()));
    }
    bool parsed = true;
    try {
      parse_token(s);
    } catch (const Error&) {
      parsed = false;
    }
    accepted += parsed;
    c.expect(parsed == (valid.count(s) == 1), "'" + s + "' parse=" + std::to_string(parsed));
  }

  // Every scan node in every script redirects every wrong kind with the same sentence.
  std::size_t redirects = 0;
  for (const auto& script : scripts().all())
    for (const auto& node : script.nodes) {
      if (node.expects != Expect::Scan) continue;
      GraphCursor cursor = start_cursor(script);
      cursor.current = node.id;
      for (auto k : kElementKinds) {
        if (k == *node.scan_kind) continue;
        auto step = advance(cursor, script, input::Scan{{k, Vocabulary::standard().values(k).front()}});
        ++redirects;
        c.expect(step.effect.kind == EffectKind::Redirect && step.effect.text == kRedirectText &&
                     step.cursor.current == node.id,
                 std::string(to_string(script.phase)) + " " + node.id + ": no exact redirect");
      }
    }

  // And the session speaks it.
  for (auto condition : {Condition::Structured, Condition::Generic}) {
    Harness h(condition);
    h.start();
    for (int i = 0; i < 400 && h.s->state().status == SessionStatus::Active; ++i) {
      const auto& n = h.node();
      if (n.expects == Expect::Scan) {
        for (auto k : kElementKinds) {
          if (k == *n.scan_kind) continue;
          auto before = h.s->state().cursor;
          h.scan(encode_token({k, Vocabulary::standard().values(k).back()}));
          const auto& last = h.s->state().transcript.back();
          ++redirects;
          c.expect(last.kind == TurnKind::Redirect && last.text == kRedirectText && h.s->state().cursor == before,
                   std::string(to_string(h.phase())) + ": session redirect was '" + last.text + "'");
        }
      }
      h.step();
    }
    c.expect(h.s->state().status == SessionStatus::Finished, "session with redirects did not finish");
  }
  std::ostringstream note;
  note << "26 round trips, " << kRandomPayloads << " random strings (" << accepted << " valid), " << redirects
       << " mismatches";
  c.note = note.str();
  return c;
}

Check turn_taking() {
  Check c{"turn-taking", {}, {}};
  std::mt19937_64 rng(4000);
  std::unique_ptr<Harness> h;
  std::size_t turns = 0, suppressed = 0;
  auto child_turns = [&] {
    const auto& tr = h->s->state().transcript;
    return static_cast<std::size_t>(
        std::count_if(tr.begin(), tr.end(), [](const Turn& t) { return t.speaker == Speaker::Child; }));
  };
  for (int i = 0; i < kTurnTakingCases; ++i) {
    if (i % 20 == 0) {  // a fresh session well inside the duration limit
      h = std::make_unique<Harness>();
      h->start();
    }
    auto before = child_turns();
    int fragments = 1 + static_cast<int>(rng() % 6);
    std::size_t long_gaps = 0;
    for (int f = 0; f < fragments; ++f) {
      if (f > 0) {
        auto gap = static_cast<std::int64_t>(rng() % (2 * kPauseMs));
        h->t += gap;
        if (gap >= kPauseMs) {
          ++long_gaps;
          h->s->tick(h->t);
          h->finish_speech();
        }
      }
      h->s->ingest(SessionEvent::utterance(h->t, "hmm"));
    }
    h->t += kPauseMs + static_cast<std::int64_t>(rng() % 1000);
    h->s->ingest(SessionEvent::end_of_speech(h->t));
    auto created = child_turns() - before;
    c.expect(created == long_gaps + 1, "case " + std::to_string(i) + ": " + std::to_string(created) +
                                           " turns for " + std::to_string(long_gaps) + " long gaps");
    turns += created;

    // Input while the agent is speaking never becomes a turn.
    c.expect(h->s->state().speak_lock, "case " + std::to_string(i) + ": agent did not reply");
    auto locked_before = child_turns();
    auto suppressed_before = h->s->state().suppressed_inputs;
    int noise = static_cast<int>(rng() % 4);
    for (int k = 0; k < noise; ++k) {
      h->t += 1 + static_cast<std::int64_t>(rng() % (2 * kPauseMs));
      if (rng() % 3 == 0) h->s->ingest(SessionEvent::scan(h->t, "Character:Bear"));
      else h->s->ingest(SessionEvent::utterance(h->t, "hello there"));
      h->s->tick(h->t);
    }
    c.expect(child_turns() == locked_before && h->s->state().pending.empty(),
             "case " + std::to_string(i) + ": turn created during speak lock");
    c.expect(h->s->state().suppressed_inputs == suppressed_before + static_cast<std::size_t>(noise),
             "case " + std::to_string(i) + ": suppressed count");
    suppressed += static_cast<std::size_t>(noise);
    h->finish_speech();
  }
  std::ostringstream note;
  note << kTurnTakingCases << " cases, " << turns << " turns, " << suppressed << " suppressed inputs";
  c.note = note.str();
  return c;
}

std::vector<Run> extra_runs() {
  std::vector<Run> runs;
  for (const auto* name : {"noisy", "wrong_scanner", "refuser"})
    for (auto condition : {Condition::Structured, Condition::Generic})
      for (std::uint64_t seed = 0; seed < 20; ++seed)
        runs.push_back({name, condition, seed, run_persona(find_persona(name), condition, scripts(), seed)});
  return runs;
}

Check marker_hygiene(const std::vector<Run>& extra) {
  Check c{"marker hygiene", {}, {}};
  std::size_t logs = 0, transitions = 0;
  auto scan_log = [&](const Run& run) {
    ++logs;
    auto tag = run.persona + " " + std::string(to_string(run.condition)) + " seed " + std::to_string(run.seed);
    for (const auto& t : run.result.state.transcript)
      c.expect(t.text.find(kNextMarker) == std::string::npos && t.text.find(kDoneMarker) == std::string::npos,
               tag + ": marker in turn " + std::to_string(t.index));
    for (const auto& r : run.result.log.records) {
      if (r.value("type", "") == "turn") {
        auto text = r["turn"].value("text", "");
        c.expect(text.find(kNextMarker) == std::string::npos && text.find(kDoneMarker) == std::string::npos,
                 tag + ": marker in logged turn");
      }
      if (r.value("type", "") != "phase" || r["from"].is_null()) continue;
      ++transitions;
      auto phase = phase_from_string(r["from"].get<std::string>());
      const auto& script = script_for(run.result.log, *phase);
      c.expect(r.value("marker", "") == script.marker, tag + ": transition without the phase marker");
      c.expect(script.node(r.value("node", "")).terminal(), tag + ": transition at non-terminal node");
    }
  };
  for (const auto& run : cooperative_runs()) scan_log(run);
  for (const auto& run : extra) scan_log(run);

  // Early markers: the graph rejects them and the session re-prompts at most twice.
  for (const auto& script : scripts().all()) {
    auto cursor = start_cursor(script);
    const auto& first = script.node(cursor.current);
    if (first.terminal() || first.expects == Expect::None) continue;
    bool raised = false;
    try {
      advance(cursor, script, input::Marker{script.marker});
    } catch (const Error& err) {
      raised = err.code() == ErrorCode::MarkerBeforeCompletion;
    }
    c.expect(raised, std::string(to_string(script.phase)) + ": early marker accepted by the graph");
  }
  for (int faults : {1, 2, 3}) {
    Harness h;
    testing::EarlyMarkerNarrator faulty(faults);
    h.s = std::make_unique<Session>(h.cfg, h.lib, faulty);
    std::size_t fault_records = 0;
    bool stuck = false;
    try {
      h.start();
    } catch (const Error& err) {
      stuck = err.code() == ErrorCode::MarkerStuck;
    }
    for (const auto& r : h.s->log().records)
      if (r.value("type", "") == "fault") {
        ++fault_records;
        c.expect(r.value("kind", "") == "MarkerBeforeCompletion", "fault kind " + r.value("kind", ""));
      }
    if (faults <= kMaxReprompts) {
      c.expect(!stuck && h.s->state().reprompts == static_cast<std::size_t>(faults) &&
                   fault_records == static_cast<std::size_t>(faults),
               std::to_string(faults) + " early markers: not re-prompted exactly that often");
      c.expect(faulty.calls == faults + 1, std::to_string(faults) + " early markers: " +
                                               std::to_string(faulty.calls) + " narrator calls");
    } else {
      c.expect(stuck && faulty.calls == kMaxReprompts + 1,
               std::to_string(faults) + " early markers: expected MarkerStuck after " +
                   std::to_string(kMaxReprompts) + " re-prompts");
    }
  }
  std::ostringstream note;
  note << logs << " logs, " << transitions << " transitions";
  c.note = note.str();
  return c;
}

Check story_loop(const std::vector<Run>& extra) {
  Check c{"story loop", {}, {}};
  std::size_t stages = 0;
  auto count = [](const SessionLog& log, const std::string& reason) {
    return std::count_if(log.records.begin(), log.records.end(), [&](const Json& r) {
      return r.value("type", "") == "story" && r.value("reason", "") == reason;
    });
  };
  auto check_run = [&](const Run& run) {
    const auto& r = run.result;
    if (!r.story) return;
    auto tag = run.persona + " " + std::string(to_string(run.condition)) + " seed " + std::to_string(run.seed);
    c.expect(count(r.log, "draft") == 4, tag + ": " + std::to_string(count(r.log, "draft")) + " drafts");
    if (run.condition == Condition::Structured)
      c.expect(count(r.log, "update") == 4, tag + ": " + std::to_string(count(r.log, "update")) + " updates");
    if (run.persona == "refuser" && run.condition == Condition::Generic)
      c.expect(count(r.log, "update") == 0, tag + ": refuser got updates");
    const auto& doc = r.state.story;
    c.expect(doc.stages.size() == 4, tag + ": stages");
    for (const auto& s : doc.stages) {
      ++stages;
      for (const auto& ch : doc.characters)
        c.expect(s.draft.find(ch.value) != std::string::npos, tag + ": draft lacks " + ch.value);
      for (const auto* e : {&s.place, &s.item, &s.emotion})
        c.expect(text::lower(s.draft).find(text::lower(e->value)) != std::string::npos,
                 tag + ": draft lacks " + e->value);
    }
  };
  std::size_t refusers = 0;
  for (const auto& run : cooperative_runs()) check_run(run);
  for (const auto& run : extra) {
    check_run(run);
    refusers += run.persona == "refuser" && run.condition == Condition::Generic && run.result.story;
  }
  c.expect(refusers > 0, "no completed refuser Generic runs");
  std::ostringstream note;
  note << stages << " stages checked, " << refusers << " refuser Generic runs";
  c.note = note.str();
  return c;
}

Check replay_determinism() {
  Check c{"replay determinism", {}, {}};
  auto dir = std::filesystem::temp_directory_path() / ("tinker-acceptance-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  {
    FileLogStore store(dir);
    const std::vector<std::string> personas{"cooperative", "noisy", "wrong_scanner", "refuser"};
    for (int i = 0; i < kReplayRuns; ++i) {
      auto persona = find_persona(personas[static_cast<std::size_t>(i) % personas.size()]);
      auto condition = i % 2 ? Condition::Generic : Condition::Structured;
      auto seed = static_cast<std::uint64_t>(1000 + i);
      auto tag = persona.name + " seed " + std::to_string(seed);
      try {
        StoreSink sink(store);
        auto live = run_persona(persona, condition, scripts(), seed, {}, &sink);
        auto stored = store.load(live.log.session_id());
        c.expect(to_jsonl(stored) == to_jsonl(live.log), tag + ": stored log differs");
        auto replayed = replay_session(stored, scripts());
        c.expect(to_json(replayed.state).dump() == to_json(live.state).dump(), tag + ": state differs");
        c.expect(replayed.state == live.state, tag + ": state differs");
        c.expect(replayed.story && live.story && replayed.story->compiled == live.story->compiled,
                 tag + ": compiled story differs");
      } catch (const Error& err) {
        c.expect(false, tag + ": " + err.what());
      }
    }
  }
  std::filesystem::remove_all(dir);
  c.note = std::to_string(kReplayRuns) + " runs via file store";
  return c;
}

Check analysis_oracle() {
  Check c{"analysis oracle", {}, {}};
  std::mt19937_64 rng(31337);
  auto compare = [&](const std::string& what, const Summary& s, const std::vector<long double>& xs) {
    long double sum = 0;
    for (auto x : xs) sum += x;
    long double n = xs.size();
    long double mean = sum / n, ss = 0;
    for (auto x : xs) ss += (x - mean) * (x - mean);
    long double sd = xs.size() > 1 ? std::sqrt(ss / (n - 1)) : 0;
    auto near = [](double a, long double b) { return std::fabs(a - static_cast<double>(b)) <= kStatsTolerance; };
    c.expect(s.n == xs.size() && near(s.mean, mean) && near(s.sd, sd) &&
                 near(s.min, *std::min_element(xs.begin(), xs.end())) &&
                 near(s.max, *std::max_element(xs.begin(), xs.end())),
             what + ": stats differ from brute force");
  };
  for (int corpus = 0; corpus < kCorpora; ++corpus) {
    std::vector<SessionLog> logs;
    auto n = 2 + rng() % 15;
    for (std::size_t i = 0; i < n; ++i)
      logs.push_back(testing::synthetic_log(rng, "c" + std::to_string(i), i % 2 ? "Generic" : "Structured"));
    auto s = descriptive_stats(logs);
    auto o = testing::brute_force(logs);
    auto tag = "corpus " + std::to_string(corpus);
    compare(tag + " length", s.length_minutes, o.len);
    compare(tag + " turns", s.total_turns, o.turns);
    compare(tag + " child words", s.child_turn_words, o.child);
    compare(tag + " agent words", s.agent_turn_words, o.agent);
  }

  using namespace tinker::testing;
  c.expect(detect_uptake(kFullUptakeDraft, kFullUptakeUpdate, kFullUptakeAnswers).label == UptakeLabel::Full, "full-uptake fixture not Full");
  c.expect(detect_uptake(kPartialUptakeDraft, kPartialUptakeUpdate, kPartialUptakeAnswers).label == UptakeLabel::Partial,
           "partial-uptake fixture not Partial");
  c.expect(detect_uptake(kFullUptakeDraft, kFullUptakeDraft, kFullUptakeAnswers).label == UptakeLabel::None,
           "draft=update fixture not None");

  // Replica proportions against a direct count of the CSV.
  auto path = tinker::data_dir() / "replica" / "replica_corpus.csv";
  auto table = contribution_distribution(load_replica_corpus(path));
  std::map<std::string, std::map<std::string, int>> tally;
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    auto first = line.find(',');
    auto last = line.rfind(',');
    auto framing = line.substr(0, first);
    auto labels = std::string(text::trim(line.substr(last + 1)));
    std::vector<std::string> parts;
    std::stringstream ls(labels);
    for (std::string p; std::getline(ls, p, '+');) parts.push_back(std::string(text::trim(p)));
    std::sort(parts.begin(), parts.end(), [](const std::string& a, const std::string& b) {
      auto rank = [](const std::string& x) { return x == "AddEvent" ? 0 : x == "AddCausality" ? 1 : x == "ElaborateEmotion" ? 2 : 3; };
      return rank(a) < rank(b);
    });
    ++tally[std::string(question_frame_label(*scaffold_from_string(framing)))][text::join(parts, "+")];
  }
  std::size_t cells = 0;
  for (const auto& [framing, row] : tally) {
    int total = 0;
    for (const auto& [_, n] : row) total += n;
    for (const auto& [label, n] : row) {
      ++cells;
      c.expect(std::fabs(table.proportion(framing, label) - static_cast<double>(n) / total) <= kProportionTolerance,
               framing + "/" + label + ": proportion differs from the CSV count");
    }
  }
  const std::vector<std::tuple<std::string, std::string, double>> published{
      {"Primitive narratives", "AddEvent", 0.90},
      {"Primitive narratives", "None", 0.10},
      {"Chain narratives", "AddCausality", 4.0 / 6},
      {"Chain narratives", "AddEvent+AddCausality", 2.0 / 6},
      {"Social awareness", "ElaborateEmotion", 7.0 / 13},
      {"Social awareness", "AddCausality+ElaborateEmotion", 1.0 / 13},
      {"Social awareness", "None", 5.0 / 13},
      {"Open invitation", "AddEvent", 0.25},
      {"Open invitation", "ElaborateEmotion", 0.125},
      {"Open invitation", "None", 0.625},
  };
  for (const auto& [row, col, want] : published)
    c.expect(std::fabs(table.proportion(row, col) - want) <= kProportionTolerance,
             row + "/" + col + " is " + std::to_string(table.proportion(row, col)));
  std::ostringstream note;
  note << kCorpora << " corpora, 3 uptake fixtures, " << cells << " replica cells";
  c.note = note.str();
  return c;
}

}  // namespace

int main() {
  std::vector<Check> checks;
  auto guarded = [&](const std::string& name, auto&& f) {
    try {
      checks.push_back(f());
    } catch (const std::exception& e) {
      checks.push_back({name, {std::string("exception: ") + e.what()}, {}});
    }
  };
  guarded("script fidelity", script_fidelity);
  guarded("schedule compliance", schedule_compliance);
  guarded("protocol", protocol);
  guarded("turn-taking", turn_taking);
  std::vector<Run> extra;
  try {
    extra = extra_runs();
  } catch (const std::exception& e) {
    checks.push_back({"persona runs", {std::string("exception: ") + e.what()}, {}});
  }
  guarded("marker hygiene", [&] { return marker_hygiene(extra); });
  guarded("story loop", [&] { return story_loop(extra); });
  guarded("replay determinism", replay_determinism);
  guarded("analysis oracle", analysis_oracle);

  int failed = 0;
  for (const auto& c : checks) {
    std::cout << (c.pass() ? "PASS " : "FAIL ") << c.name;
    if (!c.note.empty()) std::cout << " (" << c.note << ")";
    if (!c.pass()) {
      ++failed;
      std::cout << ": " << c.failures.size() << " failure(s); first: " << c.failures.front();
    }
    std::cout << "\n";
  }
  return failed;
}
