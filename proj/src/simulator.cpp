#include "tinker/simulator.hpp"

#include <algorithm>
#include <set>

#include "tinker/error.hpp"
#include "tinker/scaffolding.hpp"
#include "tinker/text.hpp"
#include "tinker/token.hpp"

namespace tinker {

// ---------------------------------------------------------------------------
// Personas

namespace {

std::vector<std::string> strings(const Json& j, const char* key, std::vector<std::string> fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_array() || it->empty()) throw Error(ErrorCode::BadPersona, std::string(key) + " must be a non-empty list");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string() || text::trim(v.get<std::string>()).empty())
      throw Error(ErrorCode::BadPersona, std::string(key) + " entries must be non-empty strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

double probability(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) return 0;
  if (!it->is_number()) throw Error(ErrorCode::BadPersona, std::string(key) + " must be a number");
  double p = it->get<double>();
  if (p < 0 || p > 1) throw Error(ErrorCode::BadPersona, std::string(key) + " must be within [0, 1]");
  return p;
}

}  // namespace

Persona persona_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::BadPersona, "persona must be an object");
  Persona p;
  auto name = j.find("name");
  if (name == j.end() || !name->is_string() || name->get<std::string>().empty())
    throw Error(ErrorCode::BadPersona, "persona needs a name");
  p.name = name->get<std::string>();
  Json answers = j.value("answers", Json::object());
  if (!answers.is_object()) throw Error(ErrorCode::BadPersona, "answers must be an object");
  p.affirmations = strings(answers, "affirm", p.affirmations);
  p.descriptions = strings(answers, "describe", p.descriptions);
  p.contributions = strings(answers, "contribute", p.contributions);
  p.reflections = strings(answers, "reflect", p.reflections);
  p.refusals = strings(answers, "refuse", p.refusals);
  p.side_talk = strings(answers, "sideTalk", p.side_talk);
  p.refusal = probability(j, "refusal");
  p.scan_error = probability(j, "scanError");
  p.garble = probability(j, "garble");
  p.interrupt = probability(j, "interrupt");
  p.side_talk_rate = probability(j, "sideTalk");
  if (j.contains("leaveAt") && !j["leaveAt"].is_null()) {
    auto phase = j["leaveAt"].is_string() ? phase_from_string(j["leaveAt"].get<std::string>()) : std::nullopt;
    if (!phase) throw Error(ErrorCode::BadPersona, "leaveAt must name a phase");
    p.leave_at = phase;
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw Error(ErrorCode::BadPersona, "seed must be a non-negative integer");
    p.seed = j["seed"].get<std::uint64_t>();
  }
  return p;
}

Json to_json(const Persona& p) {
  Json j{{"name", p.name},
         {"answers",
          {{"affirm", p.affirmations},
           {"describe", p.descriptions},
           {"contribute", p.contributions},
           {"reflect", p.reflections},
           {"refuse", p.refusals},
           {"sideTalk", p.side_talk}}},
         {"refusal", p.refusal},
         {"scanError", p.scan_error},
         {"garble", p.garble},
         {"interrupt", p.interrupt},
         {"sideTalk", p.side_talk_rate},
         {"seed", p.seed}};
  if (p.leave_at) j["leaveAt"] = to_string(*p.leave_at);
  return j;
}

Persona load_persona(const std::filesystem::path& path) {
  std::string source;
  try {
    source = text::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::BadPersona, e.what());
  }
  auto j = Json::parse(source, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::BadPersona, path.string() + ": invalid JSON");
  try {
    return persona_from_json(j);
  } catch (const Error& e) {
    throw Error(ErrorCode::BadPersona, path.string() + ": " + e.what());
  }
}

Persona find_persona(const std::string& name) {
  if (std::filesystem::exists(name)) return load_persona(name);
  auto path = data_dir() / "personas" / (name + ".json");
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::BadPersona, "no persona named '" + name + "'");
  return load_persona(path);
}

std::vector<std::string> persona_names() {
  std::vector<std::string> out;
  auto dir = data_dir() / "personas";
  if (!std::filesystem::exists(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::string_view to_string(Breakdown b) {
  switch (b) {
    case Breakdown::Garble: return "garble";
    case Breakdown::Interrupt: return "interrupt";
    case Breakdown::SideTalk: return "side-talk";
  }
  return "?";
}

std::string sim_session_id(const Persona& persona, Condition condition, std::uint64_t seed) {
  return "sim-" + persona.name + "-" + text::lower(to_string(condition)) + "-" + std::to_string(seed);
}

// ---------------------------------------------------------------------------
// Simulation

Simulation::Simulation(Persona persona, Condition condition, const ScriptLibrary& scripts, Narrator& narrator,
                       std::uint64_t seed, SimOptions options, LogSink* sink)
    : persona_(std::move(persona)), opts_(std::move(options)), rng_(seed), t_(opts_.start_at) {
  auto cfg = opts_.config;
  cfg.schedule = opts_.schedule ? *opts_.schedule : ConditionSchedule::standard(condition);
  if (cfg.session_id.empty() || cfg.session_id == SessionConfig{}.session_id)
    cfg.session_id = sim_session_id(persona_, condition, seed);
  cast_ = cfg.vocabulary.values(ElementKind::Character);
  std::shuffle(cast_.begin(), cast_.end(), rng_);
  session_ = std::make_unique<Session>(std::move(cfg), scripts, narrator, sink);
}

std::string Simulation::pick(const std::vector<std::string>& v) {
  return v.at(static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(v.size()) - 1)));
}

bool Simulation::chance(double p) {
  if (p <= 0) return false;
  return std::uniform_real_distribution<double>(0, 1)(rng_) < p;
}

std::int64_t Simulation::uniform(std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
}

const DialogueNode& Simulation::node() const {
  return session_->script().node(session_->state().cursor.current);
}

void Simulation::listen() {
  while (session_->state().speak_lock) {
    const auto& transcript = session_->state().transcript;
    std::size_t words = transcript.empty() ? 1 : text::words(transcript.back().text).size();
    t_ += static_cast<std::int64_t>(words) * opts_.ms_per_word + uniform(0, 500);
    session_->ingest(SessionEvent::speech_ended(t_));
  }
}

void Simulation::start() {
  session_->start(t_);
  listen();
}

std::string Simulation::fill(std::string s) const {
  const auto& st = session_->state();
  auto lower = [](std::string v) { return text::lower(v); };
  auto replace = [&](const std::string& key, const std::string& value) {
    for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size()))
      s.replace(pos, key.size(), value);
  };
  if (!st.chosen_characters.empty()) replace("{character}", lower(st.chosen_characters.front().value));
  if (st.selection.place) replace("{place}", lower(st.selection.place->value));
  if (st.selection.item) replace("{item}", lower(st.selection.item->value));
  if (st.selection.emotion) replace("{emotion}", lower(st.selection.emotion->value));
  replace("{character}", "rabbit");
  replace("{place}", "forest");
  replace("{item}", "bag");
  replace("{emotion}", "happy");
  return s;
}

std::string Simulation::noise() {
  static const std::vector<std::string> sounds{"mm", "hmm", "shh", "brr", "pfft", "tsk", "grr", "zzz", "hm", "psst"};
  auto n = uniform(2, 4);
  std::string out;
  for (std::int64_t i = 0; i < n; ++i) out += (i ? " " : "") + pick(sounds);
  return out;
}

std::string Simulation::answer_for(const DialogueNode& n) {
  auto phase = session_->state().phase();
  if (n.act == NodeAct::Question) {
    if (chance(persona_.refusal)) return pick(persona_.refusals);
    return fill(pick(stage_of(phase) ? persona_.contributions : persona_.reflections));
  }
  if (n.capture == "premise") return fill(pick(persona_.contributions));
  if (!n.capture.empty()) return fill(pick(persona_.descriptions));
  return pick(persona_.affirmations);
}

void Simulation::say(const std::vector<std::string>& fragments, bool hold) {
  t_ += uniform(500, 2500);
  for (std::size_t i = 0; i < fragments.size(); ++i) {
    if (i) t_ += uniform(200, 2500);
    session_->ingest(SessionEvent::utterance(t_, fragments[i]));
  }
  auto pause = session_->config().pause_ms;
  auto last = t_;
  // Either side of the pause threshold; an early end-of-speech waits for the pause to lapse.
  t_ += hold ? uniform(pause, pause + 1000) : uniform(std::max<std::int64_t>(0, pause - 1500), pause + 1500);
  session_->ingest(SessionEvent::end_of_speech(t_));
  if (!session_->state().pending.empty() && session_->state().status == SessionStatus::Active) {
    t_ = std::max(t_, last + pause);
    session_->tick(t_);
  }
  listen();
}

void Simulation::scan(const DialogueNode& n) {
  auto want = *n.scan_kind;
  const auto& vocab = session_->config().vocabulary;
  if (node_breakdowns_ < 2 && chance(persona_.scan_error)) {
    ++node_breakdowns_;
    std::vector<ElementKind> others;
    for (auto k : {ElementKind::Character, ElementKind::Place, ElementKind::Item, ElementKind::Emotion})
      if (k != want) others.push_back(k);
    auto kind = others.at(static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(others.size()) - 1)));
    t_ += uniform(1000, 4000);
    session_->ingest(SessionEvent::scan(t_, encode_token({kind, pick(vocab.values(kind))})));
    listen();
    return;
  }
  std::string value = want == ElementKind::Character
                          ? cast_.at(session_->state().chosen_characters.size() % cast_.size())
                          : pick(vocab.values(want));
  t_ += uniform(1000, 4000);
  session_->ingest(SessionEvent::scan(t_, encode_token({want, value})));
  listen();
}

void Simulation::speak(const DialogueNode& n) {
  bool answer_node = n.act == NodeAct::Question || !n.capture.empty();
  std::optional<Breakdown> b = forced_;
  forced_.reset();
  if (!b && node_breakdowns_ < 2) {
    if (chance(persona_.side_talk_rate)) b = Breakdown::SideTalk;
    else if (answer_node && chance(persona_.garble)) b = Breakdown::Garble;
    else if (answer_node && chance(persona_.interrupt)) b = Breakdown::Interrupt;
    if (b) ++node_breakdowns_;
  }
  if (b == Breakdown::SideTalk) return say({pick(persona_.side_talk)}, false);
  if (b == Breakdown::Garble) return say({noise()}, false);

  auto answer = answer_for(n);
  if (b == Breakdown::Interrupt) {
    static const std::set<std::string> connectives{"and", "but", "because", "so", "then", "with"};
    auto words = text::words(answer);
    std::size_t cut = 0;
    for (std::size_t i = 1; i + 1 < words.size() && !cut; ++i)
      if (connectives.count(text::lower(words[i]))) cut = i + 1;  // punctuation attached words never match
    std::vector<std::string> head, tail;
    if (cut) {
      head.assign(words.begin(), words.begin() + static_cast<long>(cut));
      tail.assign(words.begin() + static_cast<long>(cut), words.end());
    } else {
      auto half = std::max<std::size_t>(1, words.size() / 2);
      head.assign(words.begin(), words.begin() + static_cast<long>(half));
      head.push_back("and");
      tail.assign(words.begin() + static_cast<long>(half), words.end());
    }
    if (!tail.empty()) {
      say({text::join(head, " ")}, true);
      return say({text::join(tail, " ")}, false);
    }
  }
  auto words = text::words(answer);
  std::vector<std::string> fragments;
  auto parts = std::min<std::int64_t>(uniform(1, 3), static_cast<std::int64_t>(words.size()));
  for (std::int64_t p = 0; p < parts; ++p) {
    auto from = words.size() * static_cast<std::size_t>(p) / static_cast<std::size_t>(parts);
    auto to = words.size() * static_cast<std::size_t>(p + 1) / static_cast<std::size_t>(parts);
    fragments.push_back(text::join({words.begin() + static_cast<long>(from), words.begin() + static_cast<long>(to)}, " "));
  }
  say(fragments, false);
}

bool Simulation::step() {
  if (session_->state().status != SessionStatus::Active) return false;
  if (persona_.leave_at && session_->state().phase() == *persona_.leave_at) {
    t_ += uniform(1000, 5000);
    session_->abandon(t_, "child left at " + std::string(to_string(*persona_.leave_at)));
    return false;
  }
  auto key = std::to_string(session_->state().phase_index) + "/" + session_->state().cursor.current;
  if (key != node_key_) {
    node_key_ = key;
    node_breakdowns_ = 0;
  }
  const auto& n = node();
  if (n.expects == Expect::Scan) scan(n);
  else speak(n);
  return session_->state().status == SessionStatus::Active;
}

void Simulation::run() {
  if (session_->log().records.empty()) start();
  for (std::size_t i = 0; i < opts_.max_moves && step(); ++i) {
  }
  if (session_->state().status == SessionStatus::Active)
    throw Error(ErrorCode::IncompleteSession, "simulation did not finish within " + std::to_string(opts_.max_moves) + " moves");
  if (opts_.complete && session_->state().status == SessionStatus::Finished) {
    t_ += uniform(1000, 3000);
    story_ = session_->complete(t_);
  }
}

SimResult run_persona(const Persona& persona, Condition condition, const ScriptLibrary& scripts, std::uint64_t seed,
                      SimOptions options, LogSink* sink) {
  StubNarrator stub;
  Simulation sim(persona, condition, scripts, stub, seed, std::move(options), sink);
  sim.run();
  return {sim.session().log(), sim.session().state(), sim.story()};
}

}  // namespace tinker
