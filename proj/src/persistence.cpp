#include "tinker/persistence.hpp"

#include <algorithm>
#include <fstream>

#include "tinker/error.hpp"
#include "tinker/text.hpp"

namespace tinker {

bool valid_id(std::string_view id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
  });
}

namespace {

std::string header_id(const Json& header) {
  auto id = header.value("sessionId", "");
  if (!valid_id(id)) throw Error(ErrorCode::BadRecord, "invalid session id '" + id + "'");
  return id;
}

void check_order(std::int64_t last, const Json& record) {
  auto t = record.value("t", std::int64_t{0});
  if (t < last)
    throw Error(ErrorCode::OutOfOrderRecord, "record at " + std::to_string(t) + " after " + std::to_string(last));
}

}  // namespace

// ---------------------------------------------------------------------------
// Memory logs

void MemoryLogStore::create(const Json& header) {
  auto id = header_id(header);
  std::unique_lock lock(m_);
  if (logs_.count(id)) throw Error(ErrorCode::StorageFailure, "session " + id + " already exists");
  logs_[id].header = header;
}

void MemoryLogStore::append(const std::string& id, const Json& record) {
  std::unique_lock lock(m_);
  auto it = logs_.find(id);
  if (it == logs_.end()) throw Error(ErrorCode::UnknownSession, id);
  auto& log = it->second;
  check_order(log.records.empty() ? log.started_at() : log.last_time(), record);
  log.records.push_back(record);
}

SessionLog MemoryLogStore::load(const std::string& id) const {
  std::shared_lock lock(m_);
  auto it = logs_.find(id);
  if (it == logs_.end()) throw Error(ErrorCode::UnknownSession, id);
  return it->second;
}

std::vector<std::string> MemoryLogStore::sessions() const {
  std::shared_lock lock(m_);
  std::vector<std::string> out;
  for (const auto& [id, _] : logs_) out.push_back(id);
  return out;
}

bool MemoryLogStore::contains(const std::string& id) const {
  std::shared_lock lock(m_);
  return logs_.count(id) > 0;
}

// ---------------------------------------------------------------------------
// File logs

FileLogStore::FileLogStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot create " + dir_.string() + ": " + ec.message());
}

std::filesystem::path FileLogStore::path_of(const std::string& id) const { return dir_ / (id + ".jsonl"); }

void FileLogStore::create(const Json& header) {
  auto id = header_id(header);
  std::lock_guard lock(m_);
  auto path = path_of(id);
  if (std::filesystem::exists(path)) throw Error(ErrorCode::StorageFailure, "session " + id + " already exists");
  std::ofstream out(path, std::ios::binary);
  out << to_jsonl_line(header) << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + path.string());
  last_t_[id] = header.value("startedAt", std::int64_t{0});
}

void FileLogStore::append(const std::string& id, const Json& record) {
  if (!valid_id(id)) throw Error(ErrorCode::UnknownSession, id);
  std::lock_guard lock(m_);
  auto path = path_of(id);
  auto it = last_t_.find(id);
  if (it == last_t_.end()) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::UnknownSession, id);
    auto log = parse_jsonl(text::read_file(path));
    it = last_t_.emplace(id, log.records.empty() ? log.started_at() : log.last_time()).first;
  }
  check_order(it->second, record);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out << to_jsonl_line(record) << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::StorageFailure, "cannot append to " + path.string());
  it->second = record.value("t", it->second);
}

SessionLog FileLogStore::load(const std::string& id) const {
  if (!valid_id(id)) throw Error(ErrorCode::UnknownSession, id);
  std::lock_guard lock(m_);
  auto path = path_of(id);
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::UnknownSession, id);
  return parse_jsonl(text::read_file(path));
}

std::vector<std::string> FileLogStore::sessions() const {
  std::lock_guard lock(m_);
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir_))
    if (e.path().extension() == ".jsonl") out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

bool FileLogStore::contains(const std::string& id) const {
  if (!valid_id(id)) return false;
  std::lock_guard lock(m_);
  return std::filesystem::exists(path_of(id));
}

void StoreSink::header(const Json& h) {
  id_ = h.value("sessionId", "");
  store_.create(h);
}

void StoreSink::record(const Json& r) { store_.append(id_, r); }

// ---------------------------------------------------------------------------
// Stories

namespace {

std::vector<StoryRecord> newest_first(std::vector<StoryRecord> v) {
  std::sort(v.begin(), v.end(), [](const StoryRecord& a, const StoryRecord& b) {
    return a.created_at != b.created_at ? a.created_at > b.created_at : a.story_id > b.story_id;
  });
  return v;
}

}  // namespace

void MemoryStoryStore::put(const StoryRecord& r) {
  if (!valid_id(r.story_id)) throw Error(ErrorCode::BadRecord, "invalid story id '" + r.story_id + "'");
  std::unique_lock lock(m_);
  stories_[r.story_id] = r;
}

StoryRecord MemoryStoryStore::get(const std::string& id) const {
  std::shared_lock lock(m_);
  auto it = stories_.find(id);
  if (it == stories_.end()) throw Error(ErrorCode::UnknownSession, "no story " + id);
  return it->second;
}

std::vector<StoryRecord> MemoryStoryStore::list(const std::string& profile) const {
  std::shared_lock lock(m_);
  std::vector<StoryRecord> out;
  for (const auto& [_, r] : stories_)
    if (r.profile_id == profile) out.push_back(r);
  return newest_first(std::move(out));
}

FileStoryStore::FileStoryStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot create " + dir_.string() + ": " + ec.message());
}

void FileStoryStore::put(const StoryRecord& r) {
  if (!valid_id(r.story_id)) throw Error(ErrorCode::BadRecord, "invalid story id '" + r.story_id + "'");
  std::lock_guard lock(m_);
  auto tmp = dir_ / (r.story_id + ".json.tmp");
  text::write_file(tmp, to_json(r).dump(2) + "\n");
  std::error_code ec;
  std::filesystem::rename(tmp, dir_ / (r.story_id + ".json"), ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot store story " + r.story_id + ": " + ec.message());
}

StoryRecord FileStoryStore::get(const std::string& id) const {
  if (!valid_id(id)) throw Error(ErrorCode::UnknownSession, "no story " + id);
  std::lock_guard lock(m_);
  auto path = dir_ / (id + ".json");
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::UnknownSession, "no story " + id);
  try {
    return story_record_from_json(Json::parse(text::read_file(path)));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::BadRecord, path.string() + ": " + e.what());
  }
}

std::vector<StoryRecord> FileStoryStore::list(const std::string& profile) const {
  std::vector<std::string> ids;
  {
    std::lock_guard lock(m_);
    for (const auto& e : std::filesystem::directory_iterator(dir_))
      if (e.path().extension() == ".json") ids.push_back(e.path().stem().string());
  }
  std::vector<StoryRecord> out;
  for (const auto& id : ids) {
    auto r = get(id);
    if (r.profile_id == profile) out.push_back(std::move(r));
  }
  return newest_first(std::move(out));
}

// ---------------------------------------------------------------------------
// Parent summary

Json to_json(const ParentSummary& s) {
  auto excerpts = [](const std::vector<Excerpt>& v) {
    Json a = Json::array();
    for (const auto& e : v)
      a.push_back({{"turn", e.turn}, {"phase", to_string(e.phase)}, {"kind", e.kind}, {"child", e.child}, {"agent", e.agent}});
    return a;
  };
  return Json{{"sessionId", s.session_id},
              {"profileId", s.profile_id},
              {"condition", s.condition},
              {"questions", s.questions},
              {"reflection", s.reflection},
              {"contributions", s.contributions},
              {"uptake", s.uptake},
              {"repairs", excerpts(s.repairs)},
              {"offScript", excerpts(s.off_script)},
              {"story", s.story}};
}

ParentSummary parent_summary(const SessionLog& log) {
  if (!is_completed(log))
    throw Error(ErrorCode::SummaryUnavailable, "session " + log.session_id() + " is not completed");
  ParentSummary s;
  s.session_id = log.session_id();
  s.profile_id = log.profile_id();
  s.condition = log.condition();
  for (const auto& q : questions_of(log))
    ++(stage_of(q.phase) ? s.questions : s.reflection)[std::string(to_string(q.scaffold))];
  for (const auto& c : code_turns(log))
    if (stage_of(c.phase)) ++s.contributions[label(c.functions)];
  for (const auto& u : uptake_of(log)) ++s.uptake[std::string(to_string(u.result.label))];
  auto turns = turns_of(log);
  auto previous_child = [&](std::size_t i) {
    for (std::size_t k = i; k-- > 0;)
      if (turns[k].speaker == Speaker::Child) return turns[k].text;
    return std::string();
  };
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto& t = turns[i];
    if (t.speaker != Speaker::Agent) continue;
    Excerpt e{t.index, t.phase, std::string(to_string(t.kind)), previous_child(i), t.text};
    if (t.repair) s.repairs.push_back(e);
    if (t.off_script) s.off_script.push_back(std::move(e));
  }
  if (auto story = last_story(log)) s.story = compile_story(*story);
  return s;
}

// ---------------------------------------------------------------------------
// Library

struct Library::Live {
  std::mutex m;
  std::unique_ptr<Narrator> narrator;
  std::unique_ptr<StoreSink> sink;
  std::unique_ptr<Session> session;
  std::vector<IndexedEffect> effects;
};

Library::Library(LogStore& logs, StoryStore& stories, ScriptLibrary scripts, NarratorFactory narrators,
                 SessionConfig defaults, Clock& clock, std::map<Condition, ConditionSchedule> schedules)
    : logs_(logs),
      stories_(stories),
      scripts_(std::move(scripts)),
      narrators_(std::move(narrators)),
      defaults_(std::move(defaults)),
      clock_(clock),
      schedules_(std::move(schedules)) {
  for (auto c : {Condition::Structured, Condition::Generic})
    if (!schedules_.count(c)) schedules_.emplace(c, ConditionSchedule::standard(c));
}

Library::~Library() = default;

std::shared_ptr<Library::Live> Library::live(const std::string& id) const {
  std::shared_lock lock(m_);
  auto it = live_.find(id);
  if (it != live_.end()) return it->second;
  if (logs_.contains(id)) throw Error(ErrorCode::SessionClosed, "session " + id + " is not active");
  throw Error(ErrorCode::UnknownSession, id);
}

std::vector<IndexedEffect> Library::keep(Live& l, std::vector<SessionEffect> fx) {
  std::vector<IndexedEffect> out;
  for (auto& e : fx) {
    IndexedEffect ie{l.effects.size(), std::move(e)};
    l.effects.push_back(ie);
    out.push_back(std::move(ie));
  }
  return out;
}

Library::Created Library::create_session(const std::string& profile_id, Condition condition,
                                         const std::string& requested) {
  if (!valid_id(profile_id)) throw Error(ErrorCode::BadRecord, "invalid profile id '" + profile_id + "'");
  std::string id = requested;
  std::int64_t now;
  {
    std::lock_guard lock(clock_m_);
    now = clock_.now_ms();
  }
  if (id.empty()) {
    std::unique_lock lock(m_);
    do id = "s" + std::to_string(now) + "-" + std::to_string(next_id_++);
    while (live_.count(id) || logs_.contains(id));
  }
  if (!valid_id(id)) throw Error(ErrorCode::BadRecord, "invalid session id '" + id + "'");
  if (logs_.contains(id)) throw Error(ErrorCode::StorageFailure, "session " + id + " already exists");

  auto l = std::make_shared<Live>();
  auto cfg = defaults_;
  cfg.session_id = id;
  cfg.profile_id = profile_id;
  cfg.schedule = schedules_.at(condition);
  l->narrator = narrators_();
  l->sink = std::make_unique<StoreSink>(logs_);
  l->session = std::make_unique<Session>(cfg, scripts_, *l->narrator, l->sink.get());
  std::lock_guard session_lock(l->m);
  {
    std::unique_lock lock(m_);
    if (live_.count(id)) throw Error(ErrorCode::StorageFailure, "session " + id + " already exists");
    live_[id] = l;
  }
  try {
    auto fx = l->session->start(now);
    return {id, keep(*l, std::move(fx))};
  } catch (...) {
    std::unique_lock lock(m_);
    live_.erase(id);
    throw;
  }
}

std::vector<IndexedEffect> Library::post_event(const std::string& id, SessionEvent::Kind kind, const std::string& text) {
  auto l = live(id);
  std::lock_guard lock(l->m);
  std::int64_t now;
  {
    std::lock_guard clock_lock(clock_m_);
    now = std::max(clock_.now_ms(), l->session->state().last_event_at);
  }
  return keep(*l, l->session->ingest({now, kind, text}));
}

std::vector<IndexedEffect> Library::post_event(const std::string& id, const SessionEvent& e) {
  auto l = live(id);
  std::lock_guard lock(l->m);
  return keep(*l, l->session->ingest(e));
}

std::vector<IndexedEffect> Library::effects(const std::string& id, std::size_t since) const {
  auto l = live(id);
  std::lock_guard lock(l->m);
  if (since >= l->effects.size()) return {};
  return {l->effects.begin() + static_cast<long>(since), l->effects.end()};
}

Json Library::state(const std::string& id) const {
  auto l = live(id);
  std::lock_guard lock(l->m);
  auto j = to_json(l->session->state());
  j["effects"] = l->effects.size();
  if (l->session->state().status == SessionStatus::Active) {
    const auto& n = l->session->script().node(l->session->state().cursor.current);
    j["expects"] = n.expects == Expect::Scan ? "scan" : n.expects == Expect::Utterance ? "speech" : "none";
    j["scanKind"] = n.scan_kind ? Json(to_string(*n.scan_kind)) : Json();
    j["act"] = to_string(n.act);
    j["captures"] = !n.capture.empty();
  }
  return j;
}

StoryRecord Library::complete(const std::string& id) {
  auto l = live(id);
  std::lock_guard lock(l->m);
  std::int64_t now;
  {
    std::lock_guard clock_lock(clock_m_);
    now = clock_.now_ms();
  }
  auto record = l->session->complete(now);
  stories_.put(record);
  std::unique_lock map_lock(m_);
  live_.erase(id);
  return record;
}

void Library::abandon(const std::string& id, const std::string& reason) {
  auto l = live(id);
  std::lock_guard lock(l->m);
  std::int64_t now;
  {
    std::lock_guard clock_lock(clock_m_);
    now = clock_.now_ms();
  }
  l->session->abandon(now, reason);
  std::unique_lock map_lock(m_);
  live_.erase(id);
}

void Library::tick() {
  std::vector<std::pair<std::string, std::shared_ptr<Live>>> all;
  {
    std::shared_lock lock(m_);
    all.assign(live_.begin(), live_.end());
  }
  std::vector<std::string> dead;
  for (auto& [id, l] : all) {
    std::lock_guard lock(l->m);
    std::int64_t now;
    {
      std::lock_guard clock_lock(clock_m_);
      now = std::max(clock_.now_ms(), l->session->state().last_event_at);
    }
    try {
      keep(*l, l->session->tick(now));
    } catch (const Error&) {
      // Provider trouble during a background finalize; the next tick retries.
    }
    if (l->session->state().status == SessionStatus::Abandoned) dead.push_back(id);
  }
  std::unique_lock lock(m_);
  for (const auto& id : dead) live_.erase(id);
}

std::vector<StoryRecord> Library::list_stories(const std::string& profile) const {
  bool known = false;
  {
    std::shared_lock lock(m_);
    for (const auto& [_, l] : live_)
      if (l->session->config().profile_id == profile) known = true;
  }
  if (!known)
    for (const auto& id : logs_.sessions())
      if (logs_.load(id).profile_id() == profile) {
        known = true;
        break;
      }
  if (!known) throw Error(ErrorCode::UnknownProfile, profile);
  return stories_.list(profile);
}

StoryRecord Library::get_story(const std::string& id) const { return stories_.get(id); }

SessionLog Library::log_of(const std::string& id) const {
  std::shared_ptr<Live> l;
  {
    std::shared_lock lock(m_);
    if (auto it = live_.find(id); it != live_.end()) l = it->second;
  }
  if (l) {
    std::lock_guard lock(l->m);
    return l->session->log();
  }
  return logs_.load(id);
}

std::vector<Turn> Library::transcript(const std::string& id) const { return turns_of(log_of(id)); }

ParentSummary Library::summary(const std::string& id) const {
  auto log = log_of(id);
  std::lock_guard lock(cache_m_);
  if (auto it = cache_.find(id); it != cache_.end() && it->second.first == log.records.size()) return it->second.second;
  auto s = parent_summary(log);
  ++summary_computations_;
  cache_[id] = {log.records.size(), s};
  return s;
}

ParentView Library::parent_view(const std::string& id) const {
  ParentView v;
  v.transcript = transcript(id);
  try {
    v.summary = summary(id);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SummaryUnavailable) throw;
    v.summary_error = e.what();
  }
  return v;
}

}  // namespace tinker
