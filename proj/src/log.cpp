#include "tinker/log.hpp"

#include "tinker/error.hpp"
#include "tinker/text.hpp"

namespace tinker {

std::string_view to_string(Speaker s) { return s == Speaker::Child ? "child" : "agent"; }

std::string_view to_string(TurnKind k) {
  switch (k) {
    case TurnKind::Speech: return "speech";
    case TurnKind::Scan: return "scan";
    case TurnKind::RejectedScan: return "rejected-scan";
    case TurnKind::Rescan: return "rescan";
    case TurnKind::Prompt: return "prompt";
    case TurnKind::Draft: return "draft";
    case TurnKind::Question: return "question";
    case TurnKind::Update: return "update";
    case TurnKind::React: return "react";
    case TurnKind::Redirect: return "redirect";
    case TurnKind::Clarify: return "clarify";
    case TurnKind::FollowUp: return "follow-up";
    case TurnKind::OffScript: return "off-script";
    case TurnKind::Correction: return "correction";
  }
  return "?";
}

bool is_scan(TurnKind k) { return k == TurnKind::Scan || k == TurnKind::RejectedScan || k == TurnKind::Rescan; }

namespace {

TurnKind turn_kind_from(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(TurnKind::Correction); ++i) {
    auto k = static_cast<TurnKind>(i);
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::BadRecord, "unknown turn kind " + std::string(s));
}

}  // namespace

Json to_json(const Turn& t) {
  Json j{{"index", t.index},
         {"speaker", to_string(t.speaker)},
         {"kind", to_string(t.kind)},
         {"text", t.text},
         {"at", t.at},
         {"phase", to_string(t.phase)},
         {"node", t.node}};
  if (t.scaffold) j["scaffold"] = to_string(*t.scaffold);
  if (t.off_script) j["offScript"] = true;
  if (t.repair) j["repair"] = true;
  return j;
}

Turn turn_from_json(const Json& j) {
  try {
    Turn t;
    t.index = j.at("index").get<std::size_t>();
    t.speaker = j.at("speaker").get<std::string>() == "child" ? Speaker::Child : Speaker::Agent;
    t.kind = turn_kind_from(j.at("kind").get<std::string>());
    t.text = j.at("text").get<std::string>();
    t.at = j.at("at").get<std::int64_t>();
    auto phase = phase_from_string(j.at("phase").get<std::string>());
    if (!phase) throw Error(ErrorCode::BadRecord, "unknown phase in turn");
    t.phase = *phase;
    t.node = j.value("node", "");
    if (j.contains("scaffold")) t.scaffold = scaffold_from_string(j["scaffold"].get<std::string>());
    t.off_script = j.value("offScript", false);
    t.repair = j.value("repair", false);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadRecord, std::string("turn: ") + e.what());
  }
}

std::int64_t SessionLog::last_time() const {
  return records.empty() ? started_at() : records.back().value("t", std::int64_t{0});
}

Json make_header(const std::string& session_id, const std::string& profile_id, const ConditionSchedule& schedule,
                 std::int64_t started_at, Json config) {
  return Json{{"format", kLogFormat},   {"version", kLogVersion},          {"sessionId", session_id},
              {"profileId", profile_id}, {"condition", schedule.name()},   {"schedule", schedule.serialize()},
              {"startedAt", started_at}, {"config", std::move(config)}};
}

void append_record(SessionLog& log, Json record) {
  auto t = record.value("t", std::int64_t{0});
  if (t < log.last_time())
    throw Error(ErrorCode::OutOfOrderRecord, "record at " + std::to_string(t) + " after " +
                                                 std::to_string(log.last_time()));
  record["seq"] = log.records.size();
  log.records.push_back(std::move(record));
}

std::string to_jsonl_line(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::replace) + "\n"; }

std::string to_jsonl(const SessionLog& log) {
  std::string out = to_jsonl_line(log.header);
  for (const auto& r : log.records) out += to_jsonl_line(r);
  return out;
}

SessionLog parse_jsonl(std::string_view source) {
  SessionLog log;
  bool have_header = false;
  std::size_t lineno = 0;
  for (const auto& line : text::split(source, '\n')) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::BadRecord, "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::BadRecord, "line " + std::to_string(lineno) + ": not an object");
    if (!have_header) {
      if (j.value("format", "") != kLogFormat) throw Error(ErrorCode::BadRecord, "not a session log");
      if (j.value("version", 0) != kLogVersion)
        throw Error(ErrorCode::BadRecord, "unsupported log version " + j.value("version", Json(0)).dump());
      log.header = std::move(j);
      have_header = true;
      continue;
    }
    if (!j.contains("type") || !j.contains("t"))
      throw Error(ErrorCode::BadRecord, "line " + std::to_string(lineno) + ": record without type/t");
    log.records.push_back(std::move(j));
  }
  if (!have_header) throw Error(ErrorCode::BadRecord, "empty log");
  return log;
}

std::vector<Turn> turns_of(const SessionLog& log) {
  std::vector<Turn> out;
  for (const auto& r : log.records)
    if (r.value("type", "") == "turn") out.push_back(turn_from_json(r.at("turn")));
  return out;
}

std::optional<std::string> closed_status(const SessionLog& log) {
  for (auto it = log.records.rbegin(); it != log.records.rend(); ++it)
    if (it->value("type", "") == "closed") return it->value("status", "");
  return std::nullopt;
}

bool is_completed(const SessionLog& log) { return closed_status(log) == "completed"; }

std::vector<AskedQuestion> questions_of(const SessionLog& log) {
  std::vector<AskedQuestion> out;
  for (const auto& r : log.records) {
    if (r.value("type", "") != "question") continue;
    auto phase = phase_from_string(r.value("phase", ""));
    auto scaffold = scaffold_from_string(r.value("scaffold", ""));
    if (!phase || !scaffold) throw Error(ErrorCode::BadRecord, "question record: " + r.dump());
    out.push_back({*phase, *scaffold, r.value("node", "")});
  }
  return out;
}

std::vector<AnswerRecord> answers_of(const SessionLog& log) {
  std::vector<AnswerRecord> out;
  for (const auto& r : log.records) {
    if (r.value("type", "") != "answer") continue;
    auto phase = phase_from_string(r.value("phase", ""));
    auto scaffold = scaffold_from_string(r.value("scaffold", ""));
    if (!phase || !scaffold) throw Error(ErrorCode::BadRecord, "answer record: " + r.dump());
    out.push_back({*phase, r.value("node", ""), *scaffold, r.value("text", ""), r.value("turn", std::size_t{0}),
                   r.value("intent", "")});
  }
  return out;
}

std::optional<StoryDocument> last_story(const SessionLog& log) {
  for (auto it = log.records.rbegin(); it != log.records.rend(); ++it)
    if (it->value("type", "") == "story") return story_from_json(it->at("story"));
  return std::nullopt;
}

}  // namespace tinker
