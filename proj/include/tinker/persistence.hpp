#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "tinker/analysis.hpp"
#include "tinker/log.hpp"
#include "tinker/session.hpp"

namespace tinker {

/// Session and story ids: 1-128 characters from [A-Za-z0-9._-], not starting with '.'.
bool valid_id(std::string_view id);

// ---------------------------------------------------------------------------
// Session logs

class LogStore {
 public:
  virtual ~LogStore() = default;
  /// Starts a log. Throws StorageFailure if the session already exists.
  virtual void create(const Json& header) = 0;
  /// Throws UnknownSession, OutOfOrderRecord, StorageFailure.
  virtual void append(const std::string& session_id, const Json& record) = 0;
  /// Throws UnknownSession.
  virtual SessionLog load(const std::string& session_id) const = 0;
  virtual std::vector<std::string> sessions() const = 0;
  virtual bool contains(const std::string& session_id) const = 0;
};

class MemoryLogStore final : public LogStore {
 public:
  void create(const Json& header) override;
  void append(const std::string& session_id, const Json& record) override;
  SessionLog load(const std::string& session_id) const override;
  std::vector<std::string> sessions() const override;
  bool contains(const std::string& session_id) const override;

 private:
  mutable std::shared_mutex m_;
  std::map<std::string, SessionLog> logs_;
};

/// One JSON Lines file per session: header line, then one record per line.
class FileLogStore final : public LogStore {
 public:
  explicit FileLogStore(std::filesystem::path dir);
  void create(const Json& header) override;
  void append(const std::string& session_id, const Json& record) override;
  SessionLog load(const std::string& session_id) const override;
  std::vector<std::string> sessions() const override;
  bool contains(const std::string& session_id) const override;
  std::filesystem::path path_of(const std::string& session_id) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex m_;
  std::map<std::string, std::int64_t> last_t_;
};

/// Forwards a session's committed records to a store.
class StoreSink final : public LogSink {
 public:
  explicit StoreSink(LogStore& store) : store_(store) {}
  void header(const Json& h) override;
  void record(const Json& r) override;

 private:
  LogStore& store_;
  std::string id_;
};

// ---------------------------------------------------------------------------
// Stories

class StoryStore {
 public:
  virtual ~StoryStore() = default;
  virtual void put(const StoryRecord& r) = 0;
  /// Throws UnknownSession when no story has the id.
  virtual StoryRecord get(const std::string& story_id) const = 0;
  /// Stories for a profile, newest first.
  virtual std::vector<StoryRecord> list(const std::string& profile_id) const = 0;
};

class MemoryStoryStore final : public StoryStore {
 public:
  void put(const StoryRecord& r) override;
  StoryRecord get(const std::string& story_id) const override;
  std::vector<StoryRecord> list(const std::string& profile_id) const override;

 private:
  mutable std::shared_mutex m_;
  std::map<std::string, StoryRecord> stories_;
};

/// One JSON file per story.
class FileStoryStore final : public StoryStore {
 public:
  explicit FileStoryStore(std::filesystem::path dir);
  void put(const StoryRecord& r) override;
  StoryRecord get(const std::string& story_id) const override;
  std::vector<StoryRecord> list(const std::string& profile_id) const override;

 private:
  std::filesystem::path dir_;
  mutable std::mutex m_;
};

// ---------------------------------------------------------------------------
// Parent view

struct Excerpt {
  std::size_t turn = 0;  ///< agent turn index
  Phase phase = Phase::Opening;
  std::string kind;   ///< agent turn kind, e.g. "redirect", "follow-up"
  std::string child;  ///< the child turn it answered, if any
  std::string agent;
  bool operator==(const Excerpt&) const = default;
};

/// Artifact-defined digest of one completed session.
struct ParentSummary {
  std::string session_id;
  std::string profile_id;
  std::string condition;
  std::map<std::string, std::size_t> questions;      ///< story-stage questions by scaffold type
  std::map<std::string, std::size_t> reflection;     ///< post-story questions by scaffold type
  std::map<std::string, std::size_t> contributions;  ///< story-stage answers by narrative-function label
  std::map<std::string, std::size_t> uptake;         ///< by uptake label
  std::vector<Excerpt> repairs;
  std::vector<Excerpt> off_script;
  std::string story;
  bool operator==(const ParentSummary&) const = default;
};

Json to_json(const ParentSummary& s);
/// Throws SummaryUnavailable unless the log is completed.
ParentSummary parent_summary(const SessionLog& log);

struct ParentView {
  std::vector<Turn> transcript;
  std::optional<ParentSummary> summary;
  std::string summary_error;
};

// ---------------------------------------------------------------------------
// Library: live sessions plus stored logs and stories

using NarratorFactory = std::function<std::unique_ptr<Narrator>()>;

struct IndexedEffect {
  std::size_t seq = 0;
  SessionEffect effect;
};

class Library {
 public:
  /// `defaults` supplies every SessionConfig field except ids and schedule.
  Library(LogStore& logs, StoryStore& stories, ScriptLibrary scripts, NarratorFactory narrators,
          SessionConfig defaults, Clock& clock, std::map<Condition, ConditionSchedule> schedules = {});
  ~Library();

  struct Created {
    std::string session_id;
    std::vector<IndexedEffect> effects;
  };
  /// Empty id picks a fresh one. Throws BadRecord on an invalid id, StorageFailure if it exists.
  Created create_session(const std::string& profile_id, Condition condition, const std::string& session_id = {});
  /// Stamps the event with the library clock. Throws UnknownSession, SessionClosed.
  std::vector<IndexedEffect> post_event(const std::string& session_id, SessionEvent::Kind kind, const std::string& text);
  /// Uses the event's own timestamp (simulation, tests).
  std::vector<IndexedEffect> post_event(const std::string& session_id, const SessionEvent& e);
  /// Effects with seq >= since.
  std::vector<IndexedEffect> effects(const std::string& session_id, std::size_t since) const;
  Json state(const std::string& session_id) const;
  StoryRecord complete(const std::string& session_id);
  void abandon(const std::string& session_id, const std::string& reason);
  /// Turn finalization and timeouts for every live session.
  void tick();

  /// Throws UnknownProfile when the profile has never started a session.
  std::vector<StoryRecord> list_stories(const std::string& profile_id) const;
  StoryRecord get_story(const std::string& story_id) const;
  std::vector<Turn> transcript(const std::string& session_id) const;
  /// Cached per log length. Throws UnknownSession, SummaryUnavailable.
  ParentSummary summary(const std::string& session_id) const;
  ParentView parent_view(const std::string& session_id) const;
  std::size_t summary_computations() const { return summary_computations_; }

 private:
  struct Live;
  std::shared_ptr<Live> live(const std::string& id) const;
  SessionLog log_of(const std::string& id) const;
  std::vector<IndexedEffect> keep(Live& l, std::vector<SessionEffect> fx);

  LogStore& logs_;
  StoryStore& stories_;
  ScriptLibrary scripts_;
  NarratorFactory narrators_;
  SessionConfig defaults_;
  Clock& clock_;
  std::map<Condition, ConditionSchedule> schedules_;
  mutable std::shared_mutex m_;
  std::map<std::string, std::shared_ptr<Live>> live_;
  std::size_t next_id_ = 1;
  mutable std::mutex clock_m_;
  mutable std::mutex cache_m_;
  mutable std::map<std::string, std::pair<std::size_t, ParentSummary>> cache_;
  mutable std::size_t summary_computations_ = 0;
};

}  // namespace tinker
