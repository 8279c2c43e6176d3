#include "tinker/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tinker/dialogue.hpp"
#include "tinker/error.hpp"

namespace tinker {

// ---------------------------------------------------------------------------
// Descriptive statistics

Summary summarize(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorCode::EmptyCorpus, "no values to summarize");
  Summary s;
  s.n = values.size();
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  double sq = 0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.sd = s.n > 1 ? std::sqrt(sq / static_cast<double>(s.n - 1)) : 0.0;
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

std::string format_summary(const Summary& s, int decimals) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.*f (± %.*f; %.*f–%.*f)", decimals, s.mean, decimals, s.sd, decimals, s.min,
                decimals, s.max);
  return buf;
}

std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in = false;
  for (char c : s) {
    bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in) ++n;
    in = !space;
  }
  return n;
}

double SessionMetrics::child_words_per_turn() const {
  return child_turns ? static_cast<double>(child_words) / static_cast<double>(child_turns) : 0.0;
}
double SessionMetrics::agent_words_per_turn() const {
  return agent_turns ? static_cast<double>(agent_words) / static_cast<double>(agent_turns) : 0.0;
}

SessionMetrics session_metrics(const SessionLog& log) {
  SessionMetrics m;
  m.session_id = log.session_id();
  m.condition = log.condition();
  if (!log.records.empty()) {
    auto first = log.records.front().value("t", std::int64_t{0});
    auto last = log.records.back().value("t", std::int64_t{0});
    m.minutes = static_cast<double>(last - first) / 60000.0;
  }
  for (const auto& t : turns_of(log)) {
    if (is_scan(t.kind)) continue;
    auto words = word_count(t.text);
    if (t.speaker == Speaker::Child) {
      ++m.child_turns;
      m.child_words += words;
    } else {
      ++m.agent_turns;
      m.agent_words += words;
    }
  }
  m.total_turns = m.child_turns + m.agent_turns;
  return m;
}

DescriptiveStats descriptive_stats(const std::vector<SessionLog>& logs) {
  std::vector<double> len, turns, child, agent;
  for (const auto& log : logs) {
    if (!is_completed(log)) continue;
    auto m = session_metrics(log);
    len.push_back(m.minutes);
    turns.push_back(static_cast<double>(m.total_turns));
    child.push_back(m.child_words_per_turn());
    agent.push_back(m.agent_words_per_turn());
  }
  if (len.empty()) throw Error(ErrorCode::EmptyCorpus, "no completed session logs");
  return {len.size(), summarize(len), summarize(turns), summarize(child), summarize(agent)};
}

// ---------------------------------------------------------------------------
// Coding

std::string_view to_string(NarrativeFunction f) {
  switch (f) {
    case NarrativeFunction::AddEvent: return "AddEvent";
    case NarrativeFunction::AddCausality: return "AddCausality";
    case NarrativeFunction::ElaborateEmotion: return "ElaborateEmotion";
    case NarrativeFunction::None: return "None";
  }
  return "?";
}

std::optional<NarrativeFunction> function_from_string(std::string_view name) {
  for (auto f : kNarrativeFunctions)
    if (to_string(f) == name) return f;
  return std::nullopt;
}

std::string label(const FunctionSet& fs) {
  std::vector<std::string> parts;
  for (auto f : kNarrativeFunctions)
    if (fs.count(f)) parts.emplace_back(to_string(f));
  return text::join(parts, "+");
}

FunctionSet parse_functions(std::string_view s) {
  FunctionSet fs;
  for (const auto& part : text::split(s, '+')) {
    auto f = function_from_string(text::trim(part));
    if (!f) throw Error(ErrorCode::BadRecord, "unknown narrative function '" + part + "'");
    fs.insert(*f);
  }
  if (fs.empty()) throw Error(ErrorCode::BadRecord, "empty function label");
  if (fs.count(NarrativeFunction::None) && fs.size() > 1)
    throw Error(ErrorCode::BadRecord, "None cannot be combined with other functions");
  return fs;
}

std::string_view to_string(CodeSource s) { return s == CodeSource::Manual ? "manual" : "heuristic"; }

namespace {

const std::set<std::string>& refusals() {
  static const std::set<std::string> r{"no", "nothing", "i don't know", "i dont know", "same", "i'm good", "im good",
                                       "no thanks", "nope", "not really", "the story is perfect", "it's perfect",
                                       "nah", "no thank you", "that's all", "nothing else"};
  return r;
}

const std::set<std::string>& emotion_stems() {
  static const std::set<std::string> e = [] {
    std::set<std::string> out;
    for (auto w : {"happy", "happily", "sad", "scared", "scary", "angry", "mad", "excited", "proud", "curious",
                   "nervous", "afraid", "fear", "frightened", "lonely", "brave", "worried", "worry", "confused",
                   "upset", "glad", "joy", "love", "shy", "surprised", "calm", "feel", "feels", "felt", "feeling",
                   "emotion", "cry", "cried", "laugh", "smile", "jealous", "embarrassed", "bored", "tired", "sorry",
                   "kind", "friendly", "mean", "grumpy", "cheerful", "thrilled", "anxious"})
      out.insert(text::stem(w));
    return out;
  }();
  return e;
}

// Intensifiers and hedges that carry no event on their own.
const std::set<std::string>& filler_terms() {
  static const std::set<std::string> f{"especially", "really", "very", "little", "bit", "everybody", "everyone",
                                       "all",        "together", "first", "day", "making", "make", "new", "friend",
                                       "friends",    "each",  "other", "both", "too", "also", "kind"};
  return f;
}

std::string normalize_phrase(std::string_view s) {
  std::string out;
  for (char c : text::lower(text::trim(s))) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'' || c == ' ') out += c;
  }
  return std::string(text::trim(out));
}

}  // namespace

FunctionSet heuristic_functions(std::string_view raw) {
  auto norm = normalize_phrase(raw);
  if (norm.empty() || refusals().count(norm)) return {NarrativeFunction::None};

  FunctionSet fs;
  std::string pre = norm;
  auto padded = " " + norm + " ";
  static const std::vector<std::string> causal{" because ", " cause ", " so that ", " in order to ", " since ",
                                               " so ",      " why ",   " that's why "};
  std::size_t cut = std::string::npos;
  for (const auto& c : causal) cut = std::min(cut, padded.find(c));
  if (cut != std::string::npos) {
    fs.insert(NarrativeFunction::AddCausality);
    pre = cut == 0 ? "" : padded.substr(1, cut - 1);
  } else if (text::starts_with_ci(norm, "to ")) {
    fs.insert(NarrativeFunction::AddCausality);
    pre.clear();
  }

  bool emotion = false;
  for (const auto& t : text::terms(norm))
    if (emotion_stems().count(text::stem(t))) emotion = true;
  if (emotion) fs.insert(NarrativeFunction::ElaborateEmotion);

  const auto& vocab = Vocabulary::standard();
  bool event = false;
  for (const auto& t : text::content_terms(pre)) {
    if (emotion_stems().count(text::stem(t)) || filler_terms().count(t)) continue;
    std::string cap = t;
    cap[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cap[0])));
    if (vocab.contains(ElementKind::Character, cap)) continue;
    event = true;
  }
  if (event) fs.insert(NarrativeFunction::AddEvent);
  if (fs.empty()) fs.insert(NarrativeFunction::None);
  return fs;
}

namespace {

/// Minimal CSV reader: comma-separated, double-quoted fields with "" escapes.
std::vector<std::vector<std::string>> parse_csv(std::string_view src) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < src.size(); ++i) {
    char c = src[i];
    if (quoted) {
      if (c == '"' && i + 1 < src.size() && src[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < src.size() && src[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::BadRecord, "unterminated quote in CSV");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header,
                                                std::initializer_list<std::string_view> required) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < header.size(); ++i) idx[std::string(text::trim(header[i]))] = i;
  for (auto r : required)
    if (!idx.count(std::string(r))) throw Error(ErrorCode::BadRecord, "CSV lacks column '" + std::string(r) + "'");
  return idx;
}

}  // namespace

ManualAnnotations parse_annotations(std::string_view csv) {
  auto rows = parse_csv(csv);
  if (rows.empty()) return {};
  auto idx = header_index(rows[0], {"session", "turn", "functions"});
  ManualAnnotations out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < rows[0].size()) throw Error(ErrorCode::BadRecord, "short CSV row " + std::to_string(r + 1));
    std::size_t turn = 0;
    try {
      turn = std::stoul(row[idx["turn"]]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadRecord, "bad turn index on row " + std::to_string(r + 1));
    }
    out[{row[idx["session"]], turn}] = parse_functions(row[idx["functions"]]);
  }
  return out;
}

std::vector<CodedTurn> code_turns(const SessionLog& log, const ManualAnnotations* manual) {
  if (!log.header.contains("schedule") || log.condition().empty())
    throw Error(ErrorCode::MissingMetadata, "log " + log.session_id() + " has no condition schedule");
  std::vector<AnswerRecord> answers;
  try {
    answers = answers_of(log);
  } catch (const Error& e) {
    throw Error(ErrorCode::MissingMetadata, e.what());
  }
  std::vector<CodedTurn> out;
  for (const auto& a : answers) {
    CodedTurn c;
    c.session_id = log.session_id();
    c.turn = a.turn;
    c.phase = a.phase;
    c.scaffold = a.scaffold;
    c.framing = std::string(question_frame_label(a.scaffold));
    c.text = a.text;
    if (manual) {
      auto it = manual->find({c.session_id, c.turn});
      if (it != manual->end()) {
        c.functions = it->second;
        c.source = CodeSource::Manual;
      }
    }
    if (c.functions.empty()) c.functions = heuristic_functions(a.text);
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Uptake

std::string_view to_string(UptakeLabel l) {
  switch (l) {
    case UptakeLabel::Full: return "Full";
    case UptakeLabel::Partial: return "Partial";
    case UptakeLabel::None: return "None";
    case UptakeLabel::NotApplicable: return "NotApplicable";
  }
  return "?";
}

namespace {

std::set<std::string> stems_of(std::string_view s, const std::set<std::string>& stopwords) {
  std::set<std::string> out;
  for (const auto& t : text::content_terms(s, stopwords)) out.insert(text::stem(t));
  return out;
}

}  // namespace

UptakeResult detect_uptake(std::string_view draft, std::string_view update, const std::vector<std::string>& contributions,
                           const UptakeOptions& opts) {
  auto in_draft = stems_of(draft, opts.stopwords);
  auto in_update = stems_of(update, opts.stopwords);
  UptakeResult r;
  std::size_t considered = 0, taken = 0;
  for (const auto& c : contributions) {
    ContributionUptake cu;
    cu.text = c;
    for (const auto& t : stems_of(c, opts.stopwords)) {
      if (in_draft.count(t)) continue;
      cu.novel.push_back(t);
      if (in_update.count(t)) {
        cu.matched.push_back(t);
        r.matched.push_back(t);
      } else {
        r.unmatched.push_back(t);
      }
    }
    if (!cu.novel.empty()) {
      ++considered;
      cu.taken = static_cast<double>(cu.matched.size()) >= opts.threshold * static_cast<double>(cu.novel.size());
      if (cu.taken) ++taken;
    }
    r.contributions.push_back(std::move(cu));
  }
  if (considered == 0) return r;
  r.coverage = static_cast<double>(taken) / static_cast<double>(considered);
  r.label = taken == considered ? UptakeLabel::Full : taken == 0 ? UptakeLabel::None : UptakeLabel::Partial;
  return r;
}

std::vector<StageUptake> uptake_of(const SessionLog& log, const UptakeOptions& opts) {
  std::vector<StageUptake> out;
  auto story = last_story(log);
  if (!story) return out;
  auto answers = answers_of(log);
  for (const auto& rec : story->stages) {
    std::vector<std::string> contributions;
    for (const auto& a : answers)
      if (a.phase == phase_of(rec.stage) && a.intent == "contribute") contributions.push_back(a.text);
    out.push_back({rec.stage, detect_uptake(rec.draft, rec.update.value_or(rec.draft), contributions, opts)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distribution

std::size_t CrossTab::row_total(const std::string& row) const {
  std::size_t n = 0;
  if (auto it = counts.find(row); it != counts.end())
    for (const auto& [_, c] : it->second) n += c;
  return n;
}

std::size_t CrossTab::total() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += row_total(r);
  return n;
}

double CrossTab::proportion(const std::string& row, const std::string& column) const {
  auto total = row_total(row);
  if (total == 0) return 0.0;
  auto it = counts.find(row);
  auto c = it->second.find(column);
  return c == it->second.end() ? 0.0 : static_cast<double>(c->second) / static_cast<double>(total);
}

CrossTab contribution_distribution(const std::vector<CodedTurn>& coded) {
  if (coded.empty()) throw Error(ErrorCode::EmptyCorpus, "no coded turns");
  CrossTab t;
  std::set<std::string> columns;
  for (const auto& c : coded) {
    auto col = label(c.functions);
    ++t.counts[c.framing][col];
    columns.insert(col);
  }
  for (auto s : kScaffoldTypes) {
    std::string row(question_frame_label(s));
    if (t.counts.count(row)) t.rows.push_back(row);
  }
  t.columns.assign(columns.begin(), columns.end());
  return t;
}

std::vector<CodedTurn> parse_replica_corpus(std::string_view csv) {
  auto rows = parse_csv(csv);
  if (rows.empty()) throw Error(ErrorCode::EmptyCorpus, "empty replica corpus");
  auto idx = header_index(rows[0], {"framing", "text", "functions"});
  std::vector<CodedTurn> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < rows[0].size()) throw Error(ErrorCode::BadRecord, "short CSV row " + std::to_string(r + 1));
    auto scaffold = scaffold_from_string(row[idx["framing"]]);
    if (!scaffold) throw Error(ErrorCode::BadRecord, "unknown framing '" + row[idx["framing"]] + "'");
    CodedTurn c;
    c.session_id = "replica";
    c.turn = r - 1;
    c.scaffold = *scaffold;
    c.framing = std::string(question_frame_label(*scaffold));
    c.text = row[idx["text"]];
    c.functions = parse_functions(row[idx["functions"]]);
    c.source = CodeSource::Manual;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<CodedTurn> load_replica_corpus(const std::filesystem::path& path) {
  return parse_replica_corpus(text::read_file(path));
}

// ---------------------------------------------------------------------------
// Reports

AnalysisReport analyze_logs(const std::vector<SessionLog>& logs, const AnalysisOptions& opts) {
  AnalysisReport r;
  r.logs = logs.size();
  std::map<std::string, std::vector<SessionLog>> by_condition;
  std::vector<SessionLog> completed;
  for (const auto& log : logs) {
    if (!is_completed(log)) continue;
    ++r.completed;
    completed.push_back(log);
    by_condition[log.condition()].push_back(log);
    r.sessions.push_back(session_metrics(log));
    auto coded = code_turns(log, opts.manual);
    r.coded.insert(r.coded.end(), coded.begin(), coded.end());
    for (const auto& su : uptake_of(log, opts.uptake)) ++r.uptake[log.condition()][su.result.label];
  }
  if (completed.empty()) throw Error(ErrorCode::EmptyCorpus, "no completed session logs");
  for (const auto& [cond, group] : by_condition) r.stats[cond] = descriptive_stats(group);
  r.stats["All"] = descriptive_stats(completed);
  if (!r.coded.empty()) r.distribution = contribution_distribution(r.coded);
  return r;
}

namespace {

std::string fixed(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

std::string markdown_report(const AnalysisReport& r, const AnalysisOptions& opts) {
  std::ostringstream md;
  md << "# Session analysis\n\n";
  md << "Logs read: " << r.logs << ", completed: " << r.completed << ".\n\n";
  md << "Uptake rule: a contribution is taken up when at least " << fixed(opts.uptake.threshold * 100, 0)
     << "% of its novel content terms (stemmed, stopwords removed, absent from the draft) appear in the update. "
        "Full means every contribution was taken up, None means none was.\n\n";
  md << "Narrative-function codes marked heuristic come from a keyword rule, not manual coding.\n\n";

  md << "## Descriptive statistics\n\n";
  md << "Values are mean (± SD; min–max). Turns exclude token scans.\n\n";
  md << "| Condition | Sessions | Session length (min) | Total turns | Child turn length (words) | AI turn length (words) |\n";
  md << "|---|---|---|---|---|---|\n";
  for (const auto& [cond, s] : r.stats)
    md << "| " << cond << " | " << s.sessions << " | " << format_summary(s.length_minutes) << " | "
       << format_summary(s.total_turns) << " | " << format_summary(s.child_turn_words) << " | "
       << format_summary(s.agent_turn_words) << " |\n";

  if (r.distribution) {
    const auto& t = *r.distribution;
    md << "\n## Contribution distribution\n\n";
    md << "Share of answers per question framing and narrative-function label.\n\n| Framing | n |";
    for (const auto& c : t.columns) md << " " << c << " |";
    md << "\n|---|---|";
    for (std::size_t i = 0; i < t.columns.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& row : t.rows) {
      md << "| " << row << " | " << t.row_total(row) << " |";
      for (const auto& c : t.columns) md << " " << fixed(t.proportion(row, c)) << " |";
      md << "\n";
    }
    std::size_t heuristic = std::count_if(r.coded.begin(), r.coded.end(),
                                          [](const CodedTurn& c) { return c.source == CodeSource::Heuristic; });
    md << "\nCoded answers: " << r.coded.size() << " (" << heuristic << " heuristic).\n";
  }

  md << "\n## Uptake\n\n| Condition | Full | Partial | None | Not applicable |\n|---|---|---|---|---|\n";
  for (const auto& [cond, tally] : r.uptake) {
    auto get = [&](UptakeLabel l) {
      auto it = tally.find(l);
      return it == tally.end() ? std::size_t{0} : it->second;
    };
    md << "| " << cond << " | " << get(UptakeLabel::Full) << " | " << get(UptakeLabel::Partial) << " | "
       << get(UptakeLabel::None) << " | " << get(UptakeLabel::NotApplicable) << " |\n";
  }
  return md.str();
}

std::string sessions_csv(const AnalysisReport& r) {
  std::ostringstream out;
  out << "session,condition,minutes,total_turns,child_turns,agent_turns,child_words,agent_words,"
         "child_words_per_turn,agent_words_per_turn\n";
  for (const auto& m : r.sessions)
    out << csv_field(m.session_id) << ',' << csv_field(m.condition) << ',' << fixed(m.minutes, 4) << ','
        << m.total_turns << ',' << m.child_turns << ',' << m.agent_turns << ',' << m.child_words << ','
        << m.agent_words << ',' << fixed(m.child_words_per_turn(), 4) << ',' << fixed(m.agent_words_per_turn(), 4)
        << '\n';
  return out.str();
}

std::string coded_csv(const AnalysisReport& r) {
  std::ostringstream out;
  out << "session,turn,phase,scaffold,framing,functions,source,text\n";
  for (const auto& c : r.coded)
    out << csv_field(c.session_id) << ',' << c.turn << ',' << to_string(c.phase) << ',' << to_string(c.scaffold) << ','
        << csv_field(c.framing) << ',' << label(c.functions) << ',' << to_string(c.source) << ',' << csv_field(c.text)
        << '\n';
  return out.str();
}

std::string distribution_csv(const CrossTab& t) {
  std::ostringstream out;
  out << "framing,functions,count,proportion\n";
  for (const auto& row : t.rows)
    for (const auto& c : t.columns) {
      auto it = t.counts.at(row).find(c);
      auto n = it == t.counts.at(row).end() ? 0 : it->second;
      out << csv_field(row) << ',' << c << ',' << n << ',' << fixed(t.proportion(row, c), 6) << '\n';
    }
  return out.str();
}

std::vector<SessionLog> load_logs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::StorageFailure, "no log directory " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<SessionLog> logs;
  for (const auto& f : files) logs.push_back(parse_jsonl(text::read_file(f)));
  return logs;
}

}  // namespace tinker
