#include "tinker/session.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <regex>

#include "tinker/error.hpp"
#include "tinker/text.hpp"
#include "tinker/token.hpp"

namespace tinker {

std::int64_t SystemClock::now_ms() {
  auto t = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch());
  last_ = std::max(last_, static_cast<std::int64_t>(t.count()));
  return last_;
}

// ---------------------------------------------------------------------------
// Scripts

void ScriptLibrary::add(PhaseScript script) {
  auto same = [&](const PhaseScript& s) { return s.phase == script.phase && s.variant == script.variant; };
  auto it = std::find_if(scripts_.begin(), scripts_.end(), same);
  if (it != scripts_.end())
    *it = std::move(script);
  else
    scripts_.push_back(std::move(script));
}

ScriptLibrary ScriptLibrary::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::StorageFailure, "no script directory " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".tts") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  ScriptLibrary lib;
  for (const auto& f : files) lib.add(load_script(f));
  return lib;
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("TINKER_DATA"); env && *env) return env;
  return TINKER_DATA_DIR;
}

ScriptLibrary ScriptLibrary::load_default() { return load_dir(data_dir() / "scripts"); }

const PhaseScript* ScriptLibrary::find(Phase phase, const std::string& variant) const {
  const PhaseScript* shared = nullptr;
  for (const auto& s : scripts_) {
    if (s.phase != phase) continue;
    if (s.variant == variant) return &s;
    if (s.variant.empty()) shared = &s;
  }
  return shared;
}

std::vector<const PhaseScript*> ScriptLibrary::session_set(const std::string& variant) const {
  std::vector<const PhaseScript*> out;
  for (auto p : kSessionPhases) {
    const auto* s = find(p, variant);
    if (!s)
      throw Error(ErrorCode::ScriptSetIncomplete,
                  "no " + std::string(to_string(p)) + " script for variant '" + variant + "'");
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Events

std::string_view to_string(SessionEvent::Kind k) {
  switch (k) {
    case SessionEvent::Kind::Utterance: return "utterance";
    case SessionEvent::Kind::Scan: return "scan";
    case SessionEvent::Kind::EndOfSpeech: return "end-of-speech";
    case SessionEvent::Kind::AgentSpeechEnded: return "agent-speech-ended";
  }
  return "?";
}

Json to_json(const SessionEvent& e) {
  Json j{{"at", e.at}, {"kind", to_string(e.kind)}};
  if (!e.text.empty()) j["text"] = e.text;
  return j;
}

SessionEvent event_from_json(const Json& j) {
  try {
    SessionEvent e;
    e.at = j.at("at").get<std::int64_t>();
    auto kind = j.at("kind").get<std::string>();
    bool known = false;
    for (auto k : {SessionEvent::Kind::Utterance, SessionEvent::Kind::Scan, SessionEvent::Kind::EndOfSpeech,
                   SessionEvent::Kind::AgentSpeechEnded})
      if (to_string(k) == kind) {
        e.kind = k;
        known = true;
      }
    if (!known) throw Error(ErrorCode::BadRecord, "unknown event kind " + kind);
    e.text = j.value("text", "");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::BadRecord, std::string("event: ") + ex.what());
  }
}

std::string_view to_string(EffectType t) {
  switch (t) {
    case EffectType::AgentTurn: return "agent-turn";
    case EffectType::InputSuppressed: return "input-suppressed";
    case EffectType::MalformedPayload: return "malformed-payload";
    case EffectType::PhaseChanged: return "phase-changed";
    case EffectType::StoryChanged: return "story-changed";
    case EffectType::SessionFinished: return "session-finished";
    case EffectType::SessionTimedOut: return "session-timed-out";
    case EffectType::Ignored: return "ignored";
  }
  return "?";
}

Json to_json(const SessionEffect& e) {
  Json j{{"type", to_string(e.type)}, {"phase", to_string(e.phase)}};
  if (!e.text.empty()) j["text"] = e.text;
  if (e.turn) j["turn"] = *e.turn;
  return j;
}

// ---------------------------------------------------------------------------
// Turn assembly

void TurnAssembler::add(std::int64_t at, std::string text) { pending_.push_back({at, std::move(text)}); }

bool TurnAssembler::ready(std::int64_t now) const {
  return !pending_.empty() && now - pending_.back().at >= pause_ms_;
}

std::optional<AssembledTurn> TurnAssembler::take(std::int64_t now) {
  if (!ready(now)) return std::nullopt;
  return flush();
}

std::optional<AssembledTurn> TurnAssembler::flush() {
  if (pending_.empty()) return std::nullopt;
  std::vector<std::string> parts;
  for (const auto& f : pending_) {
    auto t = text::trim(f.text);
    if (!t.empty()) parts.emplace_back(t);
  }
  AssembledTurn turn{pending_.front().at, text::join(parts, " ")};
  pending_.clear();
  return turn;
}

// ---------------------------------------------------------------------------
// Classification

std::string_view to_string(TurnClass c) {
  switch (c) {
    case TurnClass::Answer: return "answer";
    case TurnClass::Garbled: return "garbled";
    case TurnClass::Truncated: return "truncated";
    case TurnClass::SideTalk: return "side-talk";
    case TurnClass::ChangeRequest: return "change-request";
    case TurnClass::Correction: return "correction";
  }
  return "?";
}

namespace {

std::string normalized(std::string_view s) {
  std::string out;
  for (char c : text::lower(s)) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'')
      out += c;
    else if (!out.empty() && out.back() != ' ')
      out += ' ';
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

bool starts_with_word(const std::string& norm, std::string_view phrase) {
  if (norm.size() < phrase.size() || norm.compare(0, phrase.size(), phrase) != 0) return false;
  return norm.size() == phrase.size() || norm[phrase.size()] == ' ';
}

bool has_vowel(std::string_view w) { return w.find_first_of("aeiouy") != std::string_view::npos; }

std::optional<ElementKind> kind_mentioned(const std::string& norm) {
  auto has = [&](std::string_view w) { return (" " + norm + " ").find(" " + std::string(w) + " ") != std::string::npos; };
  if (has("yellow") || has("place")) return ElementKind::Place;
  if (has("green") || has("item")) return ElementKind::Item;
  if (has("red") || has("emotion") || has("feeling")) return ElementKind::Emotion;
  if (has("character") || has("pawn")) return ElementKind::Character;
  return std::nullopt;
}

}  // namespace

Intent classify_intent(std::string_view text) {
  static const std::set<std::string> declines{
      "no",         "nothing",       "i don't know", "i dont know",   "idk",          "same",
      "i'm good",   "im good",       "no thanks",    "no thank you",  "nope",         "not really",
      "nah",        "it's perfect",  "it is perfect", "the story is perfect", "that's all", "nothing else",
      "no more",    "i don't want to", "no it's good", "it's good"};
  auto norm = normalized(text);
  if (declines.count(norm)) return Intent::Decline;
  auto content = text::content_terms(norm);
  for (auto p : {"no", "nope", "not yet", "wait", "not ready", "nah"})
    if (starts_with_word(norm, p) && content.size() < 3) return Intent::Deny;
  for (auto p : {"yes", "yeah", "yep", "yup", "ok", "okay", "sure", "ready", "done", "i'm ready", "i am ready",
                 "let's go", "i'm done", "alright", "all right", "uh huh"})
    if (starts_with_word(norm, p)) return Intent::Affirm;
  return content.empty() ? Intent::Neutral : Intent::Contribute;
}

Classified classify_utterance(std::string_view raw) {
  Classified c;
  auto text = std::string(text::trim(raw));
  auto norm = normalized(text);

  std::vector<std::string> alpha;
  for (const auto& w : text::words(norm))
    if (std::any_of(w.begin(), w.end(), [](char ch) { return std::isalpha(static_cast<unsigned char>(ch)); }))
      alpha.push_back(w);
  std::size_t vowelless = std::count_if(alpha.begin(), alpha.end(), [](const std::string& w) { return !has_vowel(w); });
  if (alpha.empty() || vowelless * 2 > alpha.size()) {
    c.type = TurnClass::Garbled;
    return c;
  }

  static const std::regex correction(
      R"(\b(?:it|he|she|they)\s+(?:was|is|were|are)\s+not\s+(?:a\s+|an\s+|the\s+)?([a-z' ]+?)\s*[,.!;]\s*(?:it|he|she|they)\s+(?:was|is|were|are)\s+(?:a\s+|an\s+|the\s+)?([a-z' ]+?)\s*[.!]?$)",
      std::regex::icase);
  static const std::regex didnt_say(R"(\bi\s+(?:didn't|did not)\s+say\s+(?:a\s+|an\s+|the\s+)?([a-z' ]+?)\s*[.!]?$)",
                                    std::regex::icase);
  std::smatch m;
  if (std::regex_search(text, m, correction)) {
    c.type = TurnClass::Correction;
    c.from = std::string(text::trim(m[1].str()));
    c.to = std::string(text::trim(m[2].str()));
    return c;
  }
  if (std::regex_search(text, m, didnt_say)) {
    c.type = TurnClass::Correction;
    c.from = std::string(text::trim(m[1].str()));
    return c;
  }

  auto padded = " " + norm + " ";
  auto has = [&](std::string_view w) { return padded.find(std::string(w)) != std::string::npos; };
  bool asks = has(" can i ") || has(" i want to ") || has(" let me ") || has(" i wanna ") || has(" could i ");
  bool swap = has(" change ") || has(" another ") || has(" different ") || has(" again ");
  if ((asks && swap) || has(" accident") || has(" wrong one ")) {
    c.type = TurnClass::ChangeRequest;
    c.kind = kind_mentioned(norm);
    return c;
  }

  if (!text.empty() && text.back() == '?') {
    c.type = TurnClass::SideTalk;
    return c;
  }

  static const std::set<std::string> connectives{"and", "but", "or", "because", "so", "then", "the", "a",
                                                 "an", "with", "to", "of", "like", "when", "if"};
  bool terminal = !text.empty() && (text.back() == '.' || text.back() == '!');
  if (!terminal && !alpha.empty() && connectives.count(alpha.back()) && alpha.size() > 1) {
    c.type = TurnClass::Truncated;
    return c;
  }

  c.intent = classify_intent(text);
  return c;
}

// ---------------------------------------------------------------------------
// Serialization

Json config_to_json(const SessionConfig& cfg) {
  Json vocab = Json::object();
  for (auto k : kElementKinds) vocab[std::string(to_string(k))] = cfg.vocabulary.values(k);
  return Json{{"pauseMs", cfg.pause_ms},
              {"idleTimeoutMs", cfg.idle_timeout_ms},
              {"maxDurationMs", cfg.max_duration_ms},
              {"maxReprompts", cfg.max_reprompts},
              {"allowDuplicateCharacters", cfg.bind.allow_duplicates},
              {"transcriptWindow", cfg.transcript_window},
              {"preamble", cfg.preamble},
              {"vocabulary", vocab}};
}

SessionConfig config_from_header(const Json& header) {
  try {
    SessionConfig cfg;
    cfg.session_id = header.at("sessionId").get<std::string>();
    cfg.profile_id = header.at("profileId").get<std::string>();
    cfg.schedule = ConditionSchedule::parse(header.at("schedule").get<std::string>());
    const auto& c = header.at("config");
    cfg.pause_ms = c.value("pauseMs", cfg.pause_ms);
    cfg.idle_timeout_ms = c.value("idleTimeoutMs", cfg.idle_timeout_ms);
    cfg.max_duration_ms = c.value("maxDurationMs", cfg.max_duration_ms);
    cfg.max_reprompts = c.value("maxReprompts", cfg.max_reprompts);
    cfg.bind.allow_duplicates = c.value("allowDuplicateCharacters", false);
    cfg.transcript_window = c.value("transcriptWindow", cfg.transcript_window);
    cfg.preamble = c.value("preamble", "");
    if (c.contains("vocabulary")) {
      std::string src;
      for (auto k : kElementKinds) {
        src += "[" + std::string(to_string(k)) + "]\n";
        for (const auto& v : c["vocabulary"].at(std::string(to_string(k)))) src += v.get<std::string>() + "\n";
      }
      cfg.vocabulary = Vocabulary::parse(src);
    }
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadRecord, std::string("header: ") + e.what());
  }
}

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Active: return "active";
    case SessionStatus::Finished: return "finished";
    case SessionStatus::Closed: return "closed";
    case SessionStatus::Abandoned: return "abandoned";
  }
  return "?";
}

namespace {

Json selection_json(const StageSelection& s) {
  Json j = Json::object();
  if (s.place) j["place"] = s.place->value;
  if (s.item) j["item"] = s.item->value;
  if (s.emotion) j["emotion"] = s.emotion->value;
  return j;
}

}  // namespace

Json to_json(const SessionState& s) {
  Json transcript = Json::array();
  for (const auto& t : s.transcript) transcript.push_back(to_json(t));
  Json pending = Json::array();
  for (const auto& f : s.pending) pending.push_back({{"at", f.at}, {"text", f.text}});
  Json queue = Json::array();
  for (auto t : s.question_queue) queue.push_back(to_string(t));
  Json chosen = Json::array();
  for (const auto& c : s.chosen_characters) chosen.push_back(c.value);
  return Json{{"sessionId", s.session_id},
              {"profileId", s.profile_id},
              {"condition", s.condition},
              {"status", to_string(s.status)},
              {"phaseIndex", s.phase_index + 1},
              {"phase", to_string(s.phase())},
              {"cursor",
               {{"node", s.cursor.current},
                {"visited", s.cursor.visited},
                {"awaitingMarker", s.cursor.awaiting_marker},
                {"complete", s.cursor.complete}}},
              {"story", to_json(s.story)},
              {"chosenCharacters", chosen},
              {"selection", selection_json(s.selection)},
              {"transcript", transcript},
              {"speakLock", s.speak_lock},
              {"pending", pending},
              {"questionQueue", queue},
              {"questionOrdinal", s.question_ordinal},
              {"openQuestion", s.open_question ? Json(to_string(*s.open_question)) : Json()},
              {"stageAnswers", s.stage_answers},
              {"truncatedPrefix", s.truncated_prefix},
              {"rescanKind", s.rescan_kind ? Json(to_string(*s.rescan_kind)) : Json()},
              {"startedAt", s.started_at},
              {"lastEventAt", s.last_event_at},
              {"suppressedInputs", s.suppressed_inputs},
              {"reprompts", s.reprompts}};
}

Json to_json(const StoryRecord& r) {
  Json chars = Json::array();
  for (const auto& c : r.characters) chars.push_back(c.value);
  Json stages = Json::array();
  for (const auto& s : r.stages)
    stages.push_back({{"stage", to_string(s.stage)},
                      {"place", s.place.value},
                      {"item", s.item.value},
                      {"emotion", s.emotion.value},
                      {"text", s.text}});
  return Json{{"storyId", r.story_id},     {"sessionId", r.session_id}, {"profileId", r.profile_id},
              {"condition", r.condition},  {"createdAt", r.created_at}, {"characters", chars},
              {"stages", stages},          {"compiled", r.compiled}};
}

StoryRecord story_record_from_json(const Json& j) {
  try {
    StoryRecord r;
    r.story_id = j.at("storyId").get<std::string>();
    r.session_id = j.at("sessionId").get<std::string>();
    r.profile_id = j.at("profileId").get<std::string>();
    r.condition = j.at("condition").get<std::string>();
    r.created_at = j.at("createdAt").get<std::int64_t>();
    for (const auto& c : j.at("characters")) r.characters.push_back({ElementKind::Character, c.get<std::string>()});
    for (const auto& s : j.at("stages")) {
      auto stage = stage_from_string(s.at("stage").get<std::string>());
      if (!stage) throw Error(ErrorCode::BadRecord, "unknown stage");
      r.stages.push_back({*stage,
                          {ElementKind::Place, s.at("place").get<std::string>()},
                          {ElementKind::Item, s.at("item").get<std::string>()},
                          {ElementKind::Emotion, s.at("emotion").get<std::string>()},
                          s.at("text").get<std::string>()});
    }
    r.compiled = j.at("compiled").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadRecord, std::string("story record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Session

/// Snapshot taken before an operation; restored if the operation throws.
class Session::Txn {
 public:
  explicit Txn(Session& s) : s_(s), state_(s.st_), records_(s.log_.records.size()) { s.fx_.clear(); }
  ~Txn() {
    if (committed_) return;
    s_.st_ = std::move(state_);
    s_.log_.records.resize(records_);
    s_.fx_.clear();
  }
  std::vector<SessionEffect> commit() {
    committed_ = true;
    s_.flush_sink();
    return std::move(s_.fx_);
  }

 private:
  Session& s_;
  SessionState state_;
  std::size_t records_;
  bool committed_ = false;
};

Session::Session(SessionConfig cfg, const ScriptLibrary& scripts, Narrator& narrator, LogSink* sink)
    : cfg_(std::move(cfg)), narrator_(narrator), sink_(sink) {
  set_ = scripts.session_set(cfg_.schedule.script_variant());
  for (const auto* s : set_) {
    auto want = cfg_.schedule.types_for(s->phase).size();
    for (const auto& path : enumerate_paths(*s)) {
      auto asked = std::count_if(path.begin(), path.end(),
                                 [&](const std::string& id) { return s->node(id).act == NodeAct::Question; });
      if (static_cast<std::size_t>(asked) != want)
        throw Error(ErrorCode::ScriptSetIncomplete,
                    std::string(to_string(s->phase)) + " script asks " + std::to_string(asked) +
                        " question(s) on some path; condition " + cfg_.schedule.name() + " schedules " +
                        std::to_string(want));
    }
  }
  st_.session_id = cfg_.session_id;
  st_.profile_id = cfg_.profile_id;
  st_.condition = cfg_.schedule.name();
}

void Session::flush_sink() {
  if (!sink_) {
    flushed_ = log_.records.size();
    return;
  }
  for (; flushed_ < log_.records.size(); ++flushed_) sink_->record(log_.records[flushed_]);
}

void Session::record(Json r) {
  r["t"] = now_;
  append_record(log_, std::move(r));
}

std::size_t Session::add_turn(Turn t) {
  t.index = st_.transcript.size();
  t.phase = st_.phase();
  if (t.node.empty()) t.node = st_.cursor.current;
  st_.transcript.push_back(t);
  record(Json{{"type", "turn"}, {"turn", to_json(t)}});
  return t.index;
}

void Session::agent_say(TurnKind kind, const std::string& text, bool repair, bool off_script,
                        std::optional<ScaffoldType> scaffold) {
  if (text::trim(text).empty()) return;
  Turn t;
  t.speaker = Speaker::Agent;
  t.kind = kind;
  t.text = text;
  t.at = now_;
  t.repair = repair;
  t.off_script = off_script;
  t.scaffold = scaffold;
  auto idx = add_turn(std::move(t));
  st_.speak_lock = true;
  fx_.push_back({EffectType::AgentTurn, text, idx, st_.phase()});
}

void Session::snapshot_story(const std::string& reason) {
  record(Json{{"type", "story"}, {"reason", reason}, {"story", to_json(st_.story)}});
  fx_.push_back({EffectType::StoryChanged, reason, std::nullopt, st_.phase()});
}

std::optional<ScaffoldQuestionSpec> Session::open_spec() const {
  if (!st_.open_question) return std::nullopt;
  auto specs = cfg_.schedule.schedule_for(st_.phase());
  for (const auto& s : specs)
    if (s.scaffold == *st_.open_question) return s;
  return std::nullopt;
}

NarratorContext Session::context(Purpose p) const {
  NarratorContext ctx;
  ctx.preamble = cfg_.preamble;
  ctx.script = &script();
  ctx.node = st_.cursor.current;
  ctx.purpose = p;
  ctx.awaiting_marker = st_.cursor.awaiting_marker;
  auto from = st_.transcript.size() > cfg_.transcript_window ? st_.transcript.size() - cfg_.transcript_window : 0;
  ctx.transcript.assign(st_.transcript.begin() + static_cast<long>(from), st_.transcript.end());
  ctx.story = st_.story;
  ctx.selection = st_.selection;
  ctx.stage = stage_of(st_.phase());
  ctx.pending_question = open_spec();
  ctx.question_ordinal = st_.question_ordinal == 0 ? 0 : st_.question_ordinal - 1;
  ctx.answers = st_.stage_answers;
  for (auto it = st_.transcript.rbegin(); it != st_.transcript.rend(); ++it)
    if (it->speaker == Speaker::Child && !is_scan(it->kind)) {
      ctx.child_text = it->text;
      break;
    }
  for (auto it = st_.transcript.rbegin(); it != st_.transcript.rend(); ++it)
    if (it->speaker == Speaker::Agent && it->node == st_.cursor.current && it->phase == st_.phase() &&
        (it->kind == TurnKind::Prompt || it->kind == TurnKind::Question)) {
      ctx.last_question = it->text;
      break;
    }
  ctx.rescan_kind = st_.rescan_kind;
  return ctx;
}

namespace {

bool marker_problem(const std::string& kind) { return kind != "SentenceCount"; }

}  // namespace

AgentOutput Session::narrate(NarratorContext ctx) {
  const auto target = sentence_target(ctx);
  std::string problem, detail;
  AgentOutput out;
  for (int attempt = 0; attempt <= cfg_.max_reprompts; ++attempt) {
    auto raw = narrator_.complete(ctx);
    record(Json{{"type", "narration"},
                {"purpose", to_string(ctx.purpose)},
                {"node", ctx.node},
                {"attempt", attempt},
                {"raw", raw}});
    if (text::trim(raw).empty()) throw Error(ErrorCode::EmptyResponse, narrator_.name() + " returned no text");
    out = parse_output(raw, target > 0);
    out.off_script = ctx.purpose == Purpose::OffScript || ctx.purpose == Purpose::Correction ||
                     ctx.purpose == Purpose::Rescan;

    problem.clear();
    if (out.markers.size() > 1) {
      problem = "MultipleMarkers";
      detail = "more than one completion marker";
    } else if (out.near_miss) {
      problem = "NearMissMarker";
      detail = "marker text must be exactly " + script().marker;
    } else if (out.markers.size() == 1) {
      try {
        (void)advance(st_.cursor, script(), input::Marker{out.markers[0]});
      } catch (const Error& e) {
        problem = std::string(to_string(e.code()));
        detail = e.what();
      }
    } else if (ctx.awaiting_marker) {
      problem = "MissingMarker";
      detail = "the step is complete; end with " + script().marker;
    }
    if (problem.empty() && target > 0) {
      auto n = text::count_sentences(out.story_text.value_or(""));
      auto diff = n > target ? n - target : target - n;
      if (diff > 3) {
        problem = "SentenceCount";
        detail = "story has " + std::to_string(n) + " sentences, expected about " + std::to_string(target);
      }
    }
    if (problem.empty()) return out;
    record(Json{{"type", "fault"}, {"kind", problem}, {"detail", detail}, {"node", ctx.node}, {"attempt", attempt}});
    if (attempt < cfg_.max_reprompts) ++st_.reprompts;
    ctx.reprompt = detail;
  }
  if (!marker_problem(problem)) return out;
  throw Error(ErrorCode::MarkerStuck, detail + " (after " + std::to_string(cfg_.max_reprompts) + " re-prompts)");
}

void Session::perform_current() {
  while (true) {
    const auto& node = script().node(st_.cursor.current);
    if (node.act == NodeAct::Question) {
      if (st_.question_queue.empty())
        throw Error(ErrorCode::ScriptSetIncomplete, "no scheduled question left at node " + node.id);
      st_.open_question = st_.question_queue.front();
      st_.question_queue.erase(st_.question_queue.begin());
      ++st_.question_ordinal;
    }
    std::optional<GraphCursor> after;
    if (node.expects == Expect::None) {
      auto step = advance(st_.cursor, script(), input::Continue{});
      if (step.effect.kind == EffectKind::AwaitingMarker)
        st_.cursor = step.cursor;
      else
        after = step.cursor;
    }
    auto out = narrate(context(Purpose::Perform));
    auto stage = stage_of(st_.phase());
    switch (node.act) {
      case NodeAct::Speak: agent_say(TurnKind::Prompt, out.utterance); break;
      case NodeAct::Draft:
        if (!stage || !st_.selection.complete())
          throw Error(ErrorCode::NotDrafted, "draft node reached without three tokens");
        st_.story = record_stage(st_.story, *stage, *st_.selection.place, *st_.selection.item, *st_.selection.emotion,
                                 out.story_text.value_or(out.utterance));
        agent_say(TurnKind::Draft, out.utterance);
        snapshot_story("draft");
        break;
      case NodeAct::Update:
        if (!stage) throw Error(ErrorCode::NotDrafted, "update outside a story stage");
        st_.story = apply_update(st_.story, *stage, out.story_text.value_or(out.utterance));
        agent_say(TurnKind::Update, out.utterance);
        snapshot_story("update");
        break;
      case NodeAct::Question:
        agent_say(TurnKind::Question, out.utterance, false, false, st_.open_question);
        record(Json{{"type", "question"},
                    {"phase", to_string(st_.phase())},
                    {"node", node.id},
                    {"scaffold", to_string(*st_.open_question)},
                    {"label", question_frame_label(*st_.open_question)},
                    {"text", out.utterance},
                    {"turn", st_.transcript.size() - 1}});
        break;
    }
    if (st_.cursor.awaiting_marker) {
      close_phase(out);
      return;
    }
    if (!after) return;
    st_.cursor = *after;
  }
}

void Session::react() {
  auto out = narrate(context(Purpose::React));
  agent_say(TurnKind::React, out.utterance);
  close_phase(out);
}

void Session::close_phase(const AgentOutput& out) {
  auto step = advance(st_.cursor, script(), input::Marker{out.markers.at(0)});
  st_.cursor = step.cursor;
  auto next = st_.phase_index + 1;
  record(Json{{"type", "phase"},
              {"from", to_string(st_.phase())},
              {"to", next < kSessionPhases.size() ? Json(to_string(kSessionPhases[next])) : Json()},
              {"node", st_.cursor.current},
              {"visited", st_.cursor.visited},
              {"marker", out.markers[0]}});
  enter_phase(next);
}

void Session::enter_phase(std::size_t index) {
  if (index >= kSessionPhases.size()) {
    st_.status = SessionStatus::Finished;
    fx_.push_back({EffectType::SessionFinished, {}, std::nullopt, st_.phase()});
    return;
  }
  st_.phase_index = index;
  st_.cursor = start_cursor(*set_[index]);
  st_.selection = {};
  st_.stage_answers.clear();
  st_.question_queue = cfg_.schedule.types_for(st_.phase());
  st_.question_ordinal = 0;
  st_.open_question.reset();
  st_.truncated_prefix.clear();
  st_.rescan_kind.reset();
  if (index > 0) fx_.push_back({EffectType::PhaseChanged, std::string(to_string(st_.phase())), std::nullopt, st_.phase()});
  perform_current();
}

std::vector<SessionEffect> Session::start(std::int64_t now) {
  if (!log_.records.empty())
    throw Error(ErrorCode::SessionClosed, "session already started");
  Txn txn(*this);
  now_ = now;
  st_.started_at = st_.last_event_at = now;
  log_.header = make_header(cfg_.session_id, cfg_.profile_id, cfg_.schedule, now, config_to_json(cfg_));
  record(Json{{"type", "phase"}, {"from", Json()}, {"to", to_string(kSessionPhases[0])}});
  enter_phase(0);
  if (sink_) sink_->header(log_.header);
  return txn.commit();
}

std::vector<SessionEffect> Session::ingest(const SessionEvent& e) {
  if (st_.status == SessionStatus::Closed || st_.status == SessionStatus::Abandoned)
    throw Error(ErrorCode::SessionClosed, "session " + cfg_.session_id + " is " + std::string(to_string(st_.status)));
  if (e.at < st_.last_event_at)
    throw Error(ErrorCode::OutOfOrderRecord,
                "event at " + std::to_string(e.at) + " after " + std::to_string(st_.last_event_at));
  Txn txn(*this);
  now_ = e.at;
  record(Json{{"type", "event"}, {"event", to_json(e)}});
  process(e);
  return txn.commit();
}

std::vector<SessionEffect> Session::finalize_turn(std::int64_t now) {
  if (st_.pending.empty() || now - st_.pending.back().at < cfg_.pause_ms || st_.status != SessionStatus::Active)
    return {};
  return ingest(SessionEvent::end_of_speech(now));
}

std::vector<SessionEffect> Session::tick(std::int64_t now) {
  if (st_.status != SessionStatus::Active) return {};
  bool idle = now - st_.last_event_at > cfg_.idle_timeout_ms;
  bool too_long = now - st_.started_at > cfg_.max_duration_ms;
  if (idle || too_long) return ingest(SessionEvent::end_of_speech(now));
  return finalize_turn(now);
}

void Session::process(const SessionEvent& e) {
  if (st_.status == SessionStatus::Active) {
    const char* reason = nullptr;
    if (e.at - st_.last_event_at > cfg_.idle_timeout_ms) reason = "idle timeout";
    if (e.at - st_.started_at > cfg_.max_duration_ms) reason = "maximum duration";
    if (reason) {
      st_.status = SessionStatus::Abandoned;
      record(Json{{"type", "closed"}, {"status", "abandoned"}, {"reason", reason}});
      fx_.push_back({EffectType::SessionTimedOut, reason, std::nullopt, st_.phase()});
      return;
    }
  }
  st_.last_event_at = e.at;

  if (e.kind == SessionEvent::Kind::AgentSpeechEnded) {
    st_.speak_lock = false;
    return;
  }
  if (st_.status != SessionStatus::Active) {
    fx_.push_back({EffectType::Ignored, "session finished", std::nullopt, st_.phase()});
    return;
  }
  switch (e.kind) {
    case SessionEvent::Kind::Utterance:
      if (st_.speak_lock) break;
      try_finalize(e.at);
      if (st_.speak_lock || st_.status != SessionStatus::Active) break;
      st_.pending.push_back({e.at, e.text});
      return;
    case SessionEvent::Kind::EndOfSpeech: try_finalize(e.at); return;
    case SessionEvent::Kind::Scan: {
      if (st_.speak_lock) break;
      TurnAssembler flusher(cfg_.pause_ms);
      flusher.restore(std::move(st_.pending));
      st_.pending.clear();
      if (auto turn = flusher.flush(); turn && !turn->text.empty()) {
        Turn t;
        t.text = turn->text;
        t.at = turn->started_at;
        t.off_script = true;
        add_turn(std::move(t));
      }
      handle_scan(e.text);
      return;
    }
    case SessionEvent::Kind::AgentSpeechEnded: return;
  }
  ++st_.suppressed_inputs;
  record(Json{{"type", "suppressed"}, {"kind", to_string(e.kind)}});
  fx_.push_back({EffectType::InputSuppressed, std::string(to_string(e.kind)), std::nullopt, st_.phase()});
}

void Session::try_finalize(std::int64_t now) {
  TurnAssembler assembler(cfg_.pause_ms);
  assembler.restore(st_.pending);
  auto turn = assembler.take(now);
  if (!turn) return;
  st_.pending.clear();
  if (turn->text.empty()) return;
  handle_child_text(turn->text, turn->started_at);
}

void Session::handle_child_text(const std::string& text, std::int64_t started_at) {
  const auto& node = script().node(st_.cursor.current);
  Turn child;
  child.text = text;
  child.at = started_at;

  if (st_.cursor.awaiting_marker || node.expects == Expect::None) {
    child.off_script = true;
    add_turn(std::move(child));
    return;
  }

  std::string combined = st_.truncated_prefix.empty() ? text : st_.truncated_prefix + " " + text;
  auto c = classify_utterance(combined);
  auto stage = stage_of(st_.phase());
  bool can_rescan = stage && !st_.story.find(*stage);

  if (c.type == TurnClass::ChangeRequest) {
    if (!c.kind) {
      if (node.scan_kind)
        c.kind = node.scan_kind;
      else if (st_.selection.emotion)
        c.kind = ElementKind::Emotion;
      else if (st_.selection.item)
        c.kind = ElementKind::Item;
      else if (st_.selection.place)
        c.kind = ElementKind::Place;
    }
    if (!can_rescan || !c.kind || c.kind == ElementKind::Character) c.type = TurnClass::SideTalk;
  }
  if (node.expects == Expect::Scan && (c.type == TurnClass::Garbled || c.type == TurnClass::Truncated ||
                                       c.type == TurnClass::Answer)) {
    child.kind = TurnKind::Speech;
    add_turn(std::move(child));
    auto step = advance(st_.cursor, script(), input::Utterance{combined, c.intent});
    agent_say(TurnKind::Redirect, step.effect.text.empty() ? std::string(kRedirectText) : step.effect.text, true);
    return;
  }

  switch (c.type) {
    case TurnClass::Garbled: {
      add_turn(std::move(child));
      agent_say(TurnKind::Clarify, narrate(context(Purpose::Clarify)).utterance, true);
      return;
    }
    case TurnClass::Truncated: {
      add_turn(std::move(child));
      st_.truncated_prefix = combined;
      auto ctx = context(Purpose::FollowUp);
      ctx.child_text = combined;
      agent_say(TurnKind::FollowUp, narrate(ctx).utterance, true);
      return;
    }
    case TurnClass::ChangeRequest: {
      child.off_script = true;
      add_turn(std::move(child));
      st_.truncated_prefix.clear();
      st_.rescan_kind = c.kind;
      agent_say(TurnKind::OffScript, narrate(context(Purpose::Rescan)).utterance, false, true);
      return;
    }
    case TurnClass::Correction: {
      child.off_script = true;
      add_turn(std::move(child));
      st_.truncated_prefix.clear();
      if (!c.from.empty() && !c.to.empty() && !st_.story.stages.empty()) {
        const auto& last = st_.story.stages.back();
        auto body = last.final_text();
        auto at = text::lower(body).find(text::lower(c.from));
        if (at != std::string::npos) {
          std::string fixed = body;
          while (at != std::string::npos) {
            fixed.replace(at, c.from.size(), c.to);
            at = text::lower(fixed).find(text::lower(c.from), at + c.to.size());
          }
          st_.story = amend_stage(st_.story, last.stage, fixed);
          snapshot_story("amendment");
        }
      }
      auto ctx = context(Purpose::Correction);
      ctx.correction_from = c.from;
      ctx.correction_to = c.to;
      agent_say(TurnKind::Correction, narrate(ctx).utterance, false, true);
      return;
    }
    case TurnClass::SideTalk: {
      child.off_script = true;
      add_turn(std::move(child));
      agent_say(TurnKind::OffScript, narrate(context(Purpose::OffScript)).utterance, false, true);
      return;
    }
    case TurnClass::Answer: break;
  }

  auto step = advance(st_.cursor, script(), input::Utterance{combined, c.intent});
  st_.truncated_prefix.clear();
  if (step.effect.kind == EffectKind::Stay || step.effect.kind == EffectKind::Ignored) {
    add_turn(std::move(child));
    agent_say(TurnKind::Prompt, narrate(context(Purpose::Stay)).utterance);
    return;
  }
  if (node.act == NodeAct::Question && st_.open_question) child.scaffold = st_.open_question;
  auto idx = add_turn(std::move(child));

  bool story_changed = false;
  if (node.capture == "premise") {
    st_.story = set_premise(st_.story, combined);
    story_changed = true;
  } else if (node.capture.size() == 5 && node.capture.rfind("note", 0) == 0) {
    auto i = static_cast<std::size_t>(node.capture[4] - '1');
    if (i < st_.story.characters.size()) {
      st_.story = set_character_note(st_.story, i, combined);
      story_changed = true;
    }
  }
  if (story_changed) snapshot_story(node.capture);
  if (node.act == NodeAct::Question && st_.open_question) {
    record(Json{{"type", "answer"},
                {"phase", to_string(st_.phase())},
                {"node", node.id},
                {"scaffold", to_string(*st_.open_question)},
                {"intent", to_string(c.intent)},
                {"text", combined},
                {"turn", idx}});
    if (c.intent == Intent::Contribute) st_.stage_answers.push_back(combined);
    st_.open_question.reset();
  }

  st_.cursor = step.cursor;
  if (step.effect.kind == EffectKind::AwaitingMarker)
    react();
  else
    perform_current();
}

void Session::handle_scan(const std::string& raw) {
  const auto& node = script().node(st_.cursor.current);
  Turn child;
  child.kind = TurnKind::Scan;
  child.text = raw;
  child.at = now_;

  StoryElement e;
  try {
    e = parse_token(text::trim(raw), cfg_.vocabulary);  // readers may append whitespace
  } catch (const Error& err) {
    child.kind = TurnKind::RejectedScan;
    add_turn(std::move(child));
    fx_.push_back({EffectType::MalformedPayload, err.what(), std::nullopt, st_.phase()});
    agent_say(TurnKind::Redirect,
              node.expects == Expect::Scan && !node.mismatch.empty() ? node.mismatch
                                                                     : "I couldn't read that toy. Let's try again.",
              true);
    return;
  }

  if (node.expects == Expect::Scan && !st_.cursor.awaiting_marker && e.kind == node.scan_kind) {
    if (e.kind == ElementKind::Character && !cfg_.bind.allow_duplicates &&
        std::find(st_.chosen_characters.begin(), st_.chosen_characters.end(), e) != st_.chosen_characters.end()) {
      child.kind = TurnKind::RejectedScan;
      add_turn(std::move(child));
      agent_say(TurnKind::Redirect, "You already chose " + e.value + ". Please scan a different character pawn.", true);
      return;
    }
    auto step = advance(st_.cursor, script(), input::Scan{e});
    add_turn(std::move(child));
    if (e.kind == ElementKind::Character) {
      st_.chosen_characters.push_back(e);
      if (st_.chosen_characters.size() == 3) {
        st_.story = bind_characters(st_.story, st_.chosen_characters, cfg_.bind);
        snapshot_story("characters");
      }
    } else {
      st_.selection.select(e);
    }
    if (st_.rescan_kind == e.kind) st_.rescan_kind.reset();
    st_.cursor = step.cursor;
    if (step.effect.kind == EffectKind::AwaitingMarker)
      react();
    else
      perform_current();
    return;
  }

  auto stage = stage_of(st_.phase());
  if (st_.rescan_kind && *st_.rescan_kind == e.kind && e.kind != ElementKind::Character && stage &&
      !st_.story.find(*stage)) {
    child.kind = TurnKind::Rescan;
    child.off_script = true;
    add_turn(std::move(child));
    st_.selection.select(e);
    st_.rescan_kind.reset();
    perform_current();
    return;
  }

  child.kind = TurnKind::RejectedScan;
  add_turn(std::move(child));
  auto step = advance(st_.cursor, script(), input::Scan{e});
  if (step.effect.kind == EffectKind::Redirect)
    agent_say(TurnKind::Redirect, step.effect.text, true);
  else
    agent_say(TurnKind::Redirect, "Hold on! We don't need to scan a toy right now.", true);
}

StoryRecord Session::complete(std::int64_t now) {
  if (st_.status == SessionStatus::Closed || st_.status == SessionStatus::Abandoned)
    throw Error(ErrorCode::SessionClosed, "session " + cfg_.session_id + " is " + std::string(to_string(st_.status)));
  if (st_.status != SessionStatus::Finished)
    throw Error(ErrorCode::IncompleteSession,
                "session is in phase " + std::to_string(st_.phase_index + 1) + " (" + std::string(to_string(st_.phase())) + ")");
  if (now < st_.last_event_at) now = st_.last_event_at;
  Txn txn(*this);
  now_ = now;
  StoryRecord r;
  r.story_id = cfg_.session_id;
  r.session_id = cfg_.session_id;
  r.profile_id = cfg_.profile_id;
  r.condition = cfg_.schedule.name();
  r.created_at = now;
  r.characters = st_.story.characters;
  for (const auto& s : st_.story.stages) r.stages.push_back({s.stage, s.place, s.item, s.emotion, s.final_text()});
  r.compiled = compile_story(st_.story);
  record(Json{{"type", "event"}, {"event", {{"at", now}, {"kind", "complete"}}}});
  record(Json{{"type", "closed"}, {"status", "completed"}, {"storyId", r.story_id}});
  st_.status = SessionStatus::Closed;
  st_.last_event_at = now;
  txn.commit();
  return r;
}

void Session::abandon(std::int64_t now, const std::string& reason) {
  if (st_.status == SessionStatus::Closed || st_.status == SessionStatus::Abandoned)
    throw Error(ErrorCode::SessionClosed, "session " + cfg_.session_id + " is " + std::string(to_string(st_.status)));
  if (now < st_.last_event_at) now = st_.last_event_at;
  Txn txn(*this);
  now_ = now;
  record(Json{{"type", "event"}, {"event", {{"at", now}, {"kind", "abandon"}, {"text", reason}}}});
  record(Json{{"type", "closed"}, {"status", "abandoned"}, {"reason", reason}});
  st_.status = SessionStatus::Abandoned;
  st_.last_event_at = now;
  txn.commit();
}

// ---------------------------------------------------------------------------
// Replay

ReplayResult replay_session(const SessionLog& log, const ScriptLibrary& scripts) {
  auto cfg = config_from_header(log.header);
  auto narrator = RecordedNarrator::from_log(log);
  Session s(cfg, scripts, narrator);
  s.start(log.started_at());
  ReplayResult out;
  for (const auto& r : log.records) {
    if (r.value("type", "") != "event") continue;
    const auto& ev = r.at("event");
    auto kind = ev.value("kind", "");
    if (kind == "complete")
      out.story = s.complete(ev.at("at").get<std::int64_t>());
    else if (kind == "abandon")
      s.abandon(ev.at("at").get<std::int64_t>(), ev.value("text", ""));
    else
      s.ingest(event_from_json(ev));
  }
  out.state = s.state();
  out.log = s.log();
  return out;
}

}  // namespace tinker
