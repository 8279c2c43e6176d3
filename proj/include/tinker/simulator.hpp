#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tinker/session.hpp"

namespace tinker {

/// A scripted child. Probabilities are per opportunity and drawn from the run seed.
struct Persona {
  std::string name = "cooperative";
  std::vector<std::string> affirmations{"Yes!"};
  std::vector<std::string> descriptions{"happy and kind."};  ///< character descriptions
  std::vector<std::string> contributions{"They find a shiny shell."};  ///< answers to story questions
  std::vector<std::string> reflections{"I liked the ending."};  ///< answers to post-story questions
  std::vector<std::string> refusals{"No."};
  std::vector<std::string> side_talk{"Is it lunch time?"};
  double refusal = 0;     ///< answer a story or reflection question with a refusal
  double scan_error = 0;  ///< scan a token of the wrong kind first
  double garble = 0;      ///< replace an answer with noise
  double interrupt = 0;   ///< split an answer across a long pause
  double side_talk_rate = 0;  ///< ask an off-topic question before answering
  std::optional<Phase> leave_at;  ///< walk away on entering this phase
  std::uint64_t seed = 0;

  bool operator==(const Persona&) const = default;
};

/// Throws BadPersona.
Persona persona_from_json(const Json& j);
Json to_json(const Persona& p);
Persona load_persona(const std::filesystem::path& path);
/// Looks up <data>/personas/<name>.json.
Persona find_persona(const std::string& name);
std::vector<std::string> persona_names();

enum class Breakdown { Garble, Interrupt, SideTalk };
std::string_view to_string(Breakdown b);

struct SimOptions {
  SessionConfig config;  ///< default session_id becomes "sim-<persona>-<condition>-<seed>"
  std::optional<ConditionSchedule> schedule;  ///< defaults to the standard schedule for the condition
  std::int64_t start_at = 1'700'000'000'000;
  std::int64_t ms_per_word = 250;  ///< agent speaking time
  std::size_t max_moves = 2000;
  bool complete = true;  ///< close a finished session with a StoryRecord
};

/// One persona playing one session against the stub (or any) narrator.
class Simulation {
 public:
  Simulation(Persona persona, Condition condition, const ScriptLibrary& scripts, Narrator& narrator,
             std::uint64_t seed, SimOptions options = {}, LogSink* sink = nullptr);

  /// Starts the session and lets the agent finish speaking.
  void start();
  /// One child move: a scan, a spoken turn, or walking away. False once the session is over.
  bool step();
  /// Forces the next spoken move at a speech node to be this breakdown.
  void inject(Breakdown b) { forced_ = b; }
  /// Steps until the session ends, then completes it when configured.
  void run();

  Session& session() { return *session_; }
  const Session& session() const { return *session_; }
  const std::optional<StoryRecord>& story() const { return story_; }
  std::int64_t now() const { return t_; }

 private:
  const DialogueNode& node() const;
  std::string pick(const std::vector<std::string>& v);
  bool chance(double p);
  std::int64_t uniform(std::int64_t lo, std::int64_t hi);
  void listen();
  void scan(const DialogueNode& n);
  void speak(const DialogueNode& n);
  void say(const std::vector<std::string>& fragments, bool hold);
  std::string answer_for(const DialogueNode& n);
  std::string fill(std::string text) const;
  std::string noise();

  Persona persona_;
  SimOptions opts_;
  std::mt19937_64 rng_;
  std::unique_ptr<Session> session_;
  std::vector<std::string> cast_;
  std::int64_t t_ = 0;
  std::optional<Breakdown> forced_;
  std::string node_key_;
  int node_breakdowns_ = 0;
  std::optional<StoryRecord> story_;
};

struct SimResult {
  SessionLog log;
  SessionState state;
  std::optional<StoryRecord> story;
};

/// Plays one full session with the stub narrator.
SimResult run_persona(const Persona& persona, Condition condition, const ScriptLibrary& scripts,
                      std::uint64_t seed, SimOptions options = {}, LogSink* sink = nullptr);

std::string sim_session_id(const Persona& persona, Condition condition, std::uint64_t seed);

}  // namespace tinker
