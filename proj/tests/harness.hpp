#pragma once

#include <string>
#include <vector>

#include "tinker/session.hpp"

namespace tinker::testing {

/// Drives a session with the stub narrator on a manual timeline.
struct Harness {
  ScriptLibrary lib = ScriptLibrary::load_default();
  StubNarrator stub;
  Narrator* narrator = &stub;
  SessionConfig cfg;
  std::unique_ptr<Session> s;
  std::int64_t t = 1'000'000;
  std::vector<SessionEffect> fx;
  std::string answer = "They find a shiny shell by the water.";
  std::vector<std::string> characters{"Rabbit", "Bear", "Bird"};
  std::string place = "Cave", item = "Lantern", emotion = "Scared";

  explicit Harness(Condition c = Condition::Structured, LogSink* sink = nullptr) {
    cfg.schedule = ConditionSchedule::standard(c);
    cfg.session_id = "test-session";
    s = std::make_unique<Session>(cfg, lib, *narrator, sink);
  }

  void keep(std::vector<SessionEffect> more) { fx.insert(fx.end(), more.begin(), more.end()); }

  void start() {
    keep(s->start(t));
    finish_speech();
  }
  void finish_speech() {
    if (!s->state().speak_lock) return;
    t += 1000;
    keep(s->ingest(SessionEvent::speech_ended(t)));
  }
  void say(const std::string& text) {
    t += 500;
    keep(s->ingest(SessionEvent::utterance(t, text)));
    t += cfg.pause_ms;
    keep(s->ingest(SessionEvent::end_of_speech(t)));
    finish_speech();
  }
  void scan(const std::string& payload) {
    t += 500;
    keep(s->ingest(SessionEvent::scan(t, payload)));
    finish_speech();
  }
  const DialogueNode& node() const { return s->script().node(s->state().cursor.current); }
  Phase phase() const { return s->state().phase(); }

  /// One cooperative child move for the current node.
  void step() {
    const auto& n = node();
    if (n.expects == Expect::Scan) {
      switch (*n.scan_kind) {
        case ElementKind::Character: scan("Character:" + characters.at(s->state().chosen_characters.size())); break;
        case ElementKind::Place: scan("Place:" + place); break;
        case ElementKind::Item: scan("Item:" + item); break;
        case ElementKind::Emotion: scan("Emotion:" + emotion); break;
      }
    } else if (n.act == NodeAct::Question || !n.capture.empty()) {
      say(answer);
    } else {
      say("Yes!");
    }
  }
  void run_until(Phase p, std::size_t max_steps = 200) {
    for (std::size_t i = 0; i < max_steps && s->state().status == SessionStatus::Active && phase() != p; ++i) step();
  }
  void run_to_end(std::size_t max_steps = 400) {
    for (std::size_t i = 0; i < max_steps && s->state().status == SessionStatus::Active; ++i) step();
  }
  std::vector<std::string> agent_texts() const {
    std::vector<std::string> out;
    for (const auto& turn : s->state().transcript)
      if (turn.speaker == Speaker::Agent) out.push_back(turn.text);
    return out;
  }
};

}  // namespace tinker::testing
