#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "tinker/analysis.hpp"
#include "tinker/error.hpp"
#include "tinker/persistence.hpp"
#include "tinker/scaffolding.hpp"
#include "tinker/service.hpp"
#include "tinker/simulator.hpp"
#include "tinker/text.hpp"
#include "tinker/token.hpp"

using namespace tinker;

namespace {

struct Settings {
  std::string scripts;
  std::string structured_condition;
  std::string generic_condition;
  std::string narrator = "stub";
  std::string narrator_url;
  std::string narrator_model;
  std::string narrator_key_env = "TINKER_API_KEY";
  int narrator_timeout_ms = 30000;
  std::string preamble;

  ScriptLibrary library() const {
    return scripts.empty() ? ScriptLibrary::load_default() : ScriptLibrary::load_dir(scripts);
  }
  std::map<Condition, ConditionSchedule> schedules() const {
    std::map<Condition, ConditionSchedule> out;
    out.emplace(Condition::Structured, structured_condition.empty() ? ConditionSchedule::standard(Condition::Structured)
                                                                    : ConditionSchedule::load(structured_condition));
    out.emplace(Condition::Generic, generic_condition.empty() ? ConditionSchedule::standard(Condition::Generic)
                                                              : ConditionSchedule::load(generic_condition));
    return out;
  }
  SessionConfig session_config() const {
    SessionConfig cfg;
    cfg.preamble = preamble.empty() ? text::read_file(data_dir() / "scripts" / "preamble.txt") : text::read_file(preamble);
    return cfg;
  }
  NarratorFactory narrators() const {
    if (narrator == "stub") return [] { return std::make_unique<StubNarrator>(); };
    if (narrator != "remote") throw Error(ErrorCode::BadRecord, "narrator must be 'stub' or 'remote'");
    if (narrator_url.empty()) throw Error(ErrorCode::BadRecord, "remote narrator needs --narrator-url");
    RemoteConfig rc;
    rc.url = narrator_url;
    rc.model = narrator_model;
    if (const char* key = std::getenv(narrator_key_env.c_str())) rc.api_key = key;
    rc.timeout = std::chrono::milliseconds(narrator_timeout_ms);
    return [rc] { return std::make_unique<RemoteNarrator>(rc); };
  }
};

Condition parse_condition(const std::string& name) {
  auto c = condition_from_string(name);
  if (!c) throw Error(ErrorCode::BadRecord, "unknown condition '" + name + "'");
  return *c;
}

std::vector<Condition> parse_conditions(const std::string& name) {
  if (text::lower(name) == "both") return {Condition::Structured, Condition::Generic};
  return {parse_condition(name)};
}

void write(const std::filesystem::path& path, const std::string& content) {
  text::write_file(path, content);
  std::cout << "wrote " << path.string() << "\n";
}

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& dir, const Settings& settings) {
  auto root = dir.empty() ? (settings.scripts.empty() ? data_dir() / "scripts" : std::filesystem::path(settings.scripts))
                          : std::filesystem::path(dir);
  int problems = 0;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.path().extension() == ".tts") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  ScriptLibrary lib;
  for (const auto& f : files) {
    try {
      auto script = load_script(f);
      auto diagnostics = validate_script(script);
      auto paths = enumerate_paths(script);
      std::cout << f.filename().string() << ": " << to_string(script.phase)
                << (script.variant.empty() ? "" : " (" + script.variant + ")") << ", " << script.nodes.size()
                << " nodes, " << paths.size() << " paths";
      if (!script.declared_paths.empty()) std::cout << ", " << script.declared_paths.size() << " declared";
      std::cout << (diagnostics.empty() ? ", ok" : "") << "\n";
      for (const auto& d : diagnostics) {
        std::cout << "  " << to_string(d.kind) << " at " << d.node << ": " << d.message << "\n";
        ++problems;
      }
      lib.add(std::move(script));
    } catch (const Error& e) {
      std::cout << f.filename().string() << ": " << e.what() << "\n";
      ++problems;
    }
  }
  for (const auto& [condition, schedule] : settings.schedules()) {
    try {
      StubNarrator stub;
      SessionConfig cfg;
      cfg.schedule = schedule;
      Session probe(cfg, lib, stub);
      std::cout << "session set " << to_string(condition) << ": ok\n";
    } catch (const Error& e) {
      std::cout << "session set " << to_string(condition) << ": " << e.what() << "\n";
      ++problems;
    }
  }
  std::cout << (problems ? std::to_string(problems) + " problem(s)" : "all scripts valid") << "\n";
  return problems ? 1 : 0;
}

struct SimulateArgs {
  std::string persona = "cooperative";
  std::string condition = "both";
  std::uint64_t seed = 1;
  std::size_t count = 1;
  std::string out = "sim-logs";
};

int cmd_simulate(const SimulateArgs& a, const Settings& settings) {
  auto persona = find_persona(a.persona);
  auto lib = settings.library();
  auto schedules = settings.schedules();
  FileLogStore store(a.out);
  std::size_t completed = 0, total = 0;
  for (auto condition : parse_conditions(a.condition))
    for (std::uint64_t seed = a.seed; seed < a.seed + a.count; ++seed) {
      SimOptions opts;
      opts.config = settings.session_config();
      opts.schedule = schedules.at(condition);
      auto id = sim_session_id(persona, condition, seed);
      if (store.contains(id)) std::filesystem::remove(store.path_of(id));
      StoreSink sink(store);
      auto r = run_persona(persona, condition, lib, seed, opts, &sink);
      ++total;
      completed += r.story.has_value();
      std::cout << id << ": " << to_string(r.state.status) << ", " << r.state.transcript.size() << " turns\n";
    }
  std::cout << completed << "/" << total << " completed; logs in " << a.out << "\n";
  return 0;
}

struct AnalyzeArgs {
  std::string logs;
  std::string out = "analysis";
  double threshold = 0.5;
  std::string stopwords;
  std::string annotations;
};

int cmd_analyze(const AnalyzeArgs& a) {
  AnalysisOptions opts;
  opts.uptake.threshold = a.threshold;
  if (!a.stopwords.empty()) opts.uptake.stopwords = text::parse_stopwords(text::read_file(a.stopwords));
  std::optional<ManualAnnotations> manual;
  if (!a.annotations.empty()) {
    manual = parse_annotations(text::read_file(a.annotations));
    opts.manual = &*manual;
  }
  auto report = analyze_logs(load_logs(a.logs), opts);
  std::filesystem::create_directories(a.out);
  auto out = std::filesystem::path(a.out);
  write(out / "report.md", markdown_report(report, opts));
  write(out / "sessions.csv", sessions_csv(report));
  write(out / "coded.csv", coded_csv(report));
  if (report.distribution) write(out / "distribution.csv", distribution_csv(*report.distribution));
  std::cout << report.completed << "/" << report.logs << " completed sessions analyzed\n";
  return 0;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string store = "tinker-store";
  std::string token_env = "TINKER_TOKEN";
  std::string web;
};

Service* g_service = nullptr;

int cmd_serve(const ServeArgs& a, const Settings& settings) {
  FileLogStore logs(std::filesystem::path(a.store) / "logs");
  FileStoryStore stories(std::filesystem::path(a.store) / "stories");
  SystemClock clock;
  Library lib(logs, stories, settings.library(), settings.narrators(), settings.session_config(), clock,
              settings.schedules());
  ServiceOptions opts;
  if (const char* token = std::getenv(a.token_env.c_str())) opts.token = token;
  if (opts.token.empty()) std::cerr << "warning: " << a.token_env << " is not set; requests are not authenticated\n";
  opts.web_dir = a.web;
  Service service(lib, opts);
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  std::cout << "listening on http://" << a.host << ":" << a.port << "\n" << std::flush;
  bool ok = service.run(a.host, a.port);
  g_service = nullptr;
  if (!ok) {
    std::cerr << "cannot listen on " << a.host << ":" << a.port << "\n";
    return 1;
  }
  return 0;
}

struct PlayArgs {
  std::string condition = "structured";
  std::string profile = "child";
  std::string log_dir;
};

int cmd_play(const PlayArgs& a, const Settings& settings) {
  auto condition = parse_condition(a.condition);
  auto lib = settings.library();
  auto cfg = settings.session_config();
  cfg.schedule = settings.schedules().at(condition);
  cfg.profile_id = a.profile;
  cfg.session_id = "play-" + std::to_string(SystemClock().now_ms());
  auto narrator = settings.narrators()();
  std::optional<FileLogStore> store;
  std::optional<StoreSink> sink;
  if (!a.log_dir.empty()) {
    store.emplace(a.log_dir);
    sink.emplace(*store);
  }
  Session s(cfg, lib, *narrator, sink ? &*sink : nullptr);
  std::int64_t t = SystemClock().now_ms();
  std::size_t shown = 0;
  auto show = [&] {
    const auto& tr = s.state().transcript;
    for (; shown < tr.size(); ++shown)
      if (tr[shown].speaker == Speaker::Agent) std::cout << "agent> " << tr[shown].text << "\n";
    while (s.state().speak_lock) s.ingest(SessionEvent::speech_ended(++t));
    for (; shown < tr.size(); ++shown)
      if (tr[shown].speaker == Speaker::Agent) std::cout << "agent> " << tr[shown].text << "\n";
  };
  std::cout << "Type to talk. '/scan Kind:Value' scans a token, '/tokens' lists them, '/quit' leaves.\n";
  s.start(t);
  show();
  std::string line;
  while (s.state().status == SessionStatus::Active) {
    std::cout << "[" << to_string(s.state().phase()) << "] you> " << std::flush;
    if (!std::getline(std::cin, line)) break;
    line = std::string(text::trim(line));
    if (line.empty()) continue;
    t = std::max(t + 1, SystemClock().now_ms());
    try {
      if (line == "/quit") break;
      if (line == "/tokens") {
        for (auto k : {ElementKind::Character, ElementKind::Place, ElementKind::Item, ElementKind::Emotion})
          std::cout << to_string(k) << ": " << text::join(cfg.vocabulary.values(k), ", ") << "\n";
        continue;
      }
      if (line.rfind("/scan ", 0) == 0) {
        s.ingest(SessionEvent::scan(t, line.substr(6)));
      } else {
        s.ingest(SessionEvent::utterance(t, line));
        t += cfg.pause_ms;
        s.ingest(SessionEvent::end_of_speech(t));
      }
      show();
    } catch (const Error& e) {
      std::cout << "error: " << e.what() << "\n";
    }
  }
  t = std::max(t + 1, SystemClock().now_ms());
  if (s.state().status == SessionStatus::Finished) {
    auto story = s.complete(t);
    std::cout << "\n" << story.compiled << "\n";
  } else if (s.state().status == SessionStatus::Active) {
    s.abandon(t, "player quit");
    std::cout << "session abandoned\n";
  }
  if (store) std::cout << "log: " << store->path_of(cfg.session_id).string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tinker: co-creative storytelling sessions with scaffolded questions"};
  app.set_config("--config", "", "TOML/INI file with any of the options below");
  app.require_subcommand(1);
  Settings settings;
  app.add_option("--scripts", settings.scripts, "Directory of *.tts phase scripts");
  app.add_option("--structured-condition", settings.structured_condition, "Condition file for the Structured arm");
  app.add_option("--generic-condition", settings.generic_condition, "Condition file for the Generic arm");
  app.add_option("--narrator", settings.narrator, "stub or remote")->check(CLI::IsMember({"stub", "remote"}));
  app.add_option("--narrator-url", settings.narrator_url, "Chat endpoint for the remote narrator");
  app.add_option("--narrator-model", settings.narrator_model, "Model name sent to the remote narrator");
  app.add_option("--narrator-key-env", settings.narrator_key_env, "Environment variable holding the API key");
  app.add_option("--narrator-timeout-ms", settings.narrator_timeout_ms, "Remote narrator timeout");
  app.add_option("--preamble", settings.preamble, "System preamble for the narrator");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--host", serve.host);
  serve_cmd->add_option("--port", serve.port);
  serve_cmd->add_option("--store", serve.store, "Directory for session logs and stories");
  serve_cmd->add_option("--token-env", serve.token_env, "Environment variable holding the bearer token");
  serve_cmd->add_option("--web", serve.web, "Static files to serve at /");

  PlayArgs play;
  auto* play_cmd = app.add_subcommand("play", "Play a session in the terminal");
  play_cmd->add_option("--condition", play.condition, "structured or generic");
  play_cmd->add_option("--profile", play.profile);
  play_cmd->add_option("--log-dir", play.log_dir, "Write the session log here");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run persona sessions and write their logs");
  sim_cmd->add_option("--persona", sim.persona, "Persona name or JSON file");
  sim_cmd->add_option("--condition", sim.condition, "structured, generic or both");
  sim_cmd->add_option("--seed", sim.seed, "First seed");
  sim_cmd->add_option("--count", sim.count, "Sessions per condition");
  sim_cmd->add_option("--out", sim.out, "Output directory");

  std::string validate_dir;
  auto* validate_cmd = app.add_subcommand("validate-scripts", "Check phase scripts and session sets");
  validate_cmd->add_option("dir", validate_dir, "Script directory");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Descriptive statistics, coding and uptake over logs");
  analyze_cmd->add_option("logs", analyze.logs, "Directory of *.jsonl session logs")->required();
  analyze_cmd->add_option("--out", analyze.out, "Output directory");
  analyze_cmd->add_option("--threshold", analyze.threshold, "Per-contribution uptake threshold")
      ->check(CLI::Range(0.0, 1.0));
  analyze_cmd->add_option("--stopwords", analyze.stopwords, "Stopword list, one per line");
  analyze_cmd->add_option("--annotations", analyze.annotations, "Manual coding CSV (session,turn,functions)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*serve_cmd) return cmd_serve(serve, settings);
    if (*play_cmd) return cmd_play(play, settings);
    if (*sim_cmd) return cmd_simulate(sim, settings);
    if (*validate_cmd) return cmd_validate(validate_dir, settings);
    if (*analyze_cmd) return cmd_analyze(analyze);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
