#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tinker/log.hpp"
#include "tinker/scaffolding.hpp"
#include "tinker/story.hpp"
#include "tinker/text.hpp"

namespace tinker {

// ---------------------------------------------------------------------------
// Descriptive statistics

struct Summary {
  std::size_t n = 0;
  double mean = 0;
  double sd = 0;  ///< sample standard deviation; 0 for a single value
  double min = 0;
  double max = 0;
};

/// Throws EmptyCorpus on an empty input.
Summary summarize(const std::vector<double>& values);
/// "32.3 (± 6.2; 21.7–39.3)"
std::string format_summary(const Summary& s, int decimals = 1);

/// Whitespace-delimited tokens.
std::size_t word_count(std::string_view s);

struct SessionMetrics {
  std::string session_id;
  std::string condition;
  double minutes = 0;  ///< last record time minus first record time
  std::size_t total_turns = 0;
  std::size_t child_turns = 0;
  std::size_t agent_turns = 0;
  std::size_t child_words = 0;
  std::size_t agent_words = 0;
  double child_words_per_turn() const;
  double agent_words_per_turn() const;
};

/// Scan entries (accepted, rejected, re-scans) are not counted as turns.
SessionMetrics session_metrics(const SessionLog& log);

struct DescriptiveStats {
  std::size_t sessions = 0;
  Summary length_minutes;
  Summary total_turns;
  Summary child_turn_words;
  Summary agent_turn_words;
};

/// Over completed logs only. Throws EmptyCorpus when none is completed.
DescriptiveStats descriptive_stats(const std::vector<SessionLog>& logs);

// ---------------------------------------------------------------------------
// Narrative-function coding

enum class NarrativeFunction { AddEvent, AddCausality, ElaborateEmotion, None };
inline constexpr std::array<NarrativeFunction, 4> kNarrativeFunctions{
    NarrativeFunction::AddEvent, NarrativeFunction::AddCausality, NarrativeFunction::ElaborateEmotion,
    NarrativeFunction::None};
std::string_view to_string(NarrativeFunction f);
std::optional<NarrativeFunction> function_from_string(std::string_view name);

using FunctionSet = std::set<NarrativeFunction>;
/// "AddEvent+AddCausality"; functions in declaration order.
std::string label(const FunctionSet& fs);
/// Parses a '+'-separated label. Throws BadRecord on unknown names or None mixed with others.
FunctionSet parse_functions(std::string_view label);

enum class CodeSource { Manual, Heuristic };
std::string_view to_string(CodeSource s);

struct CodedTurn {
  std::string session_id;
  std::size_t turn = 0;
  Phase phase = Phase::Start;
  ScaffoldType scaffold = ScaffoldType::OpenInvitation;
  std::string framing;  ///< question_frame_label(scaffold)
  std::string text;
  FunctionSet functions;
  CodeSource source = CodeSource::Heuristic;
};

/// Keyword heuristic: refusals -> None; causal connectives -> AddCausality;
/// emotion words -> ElaborateEmotion; other action or entity words -> AddEvent.
FunctionSet heuristic_functions(std::string_view text);

/// Manual codes keyed by (session id, transcript turn index).
using ManualAnnotations = std::map<std::pair<std::string, std::size_t>, FunctionSet>;
/// CSV with header "session,turn,functions". Throws BadRecord.
ManualAnnotations parse_annotations(std::string_view csv);

/// One coded entry per answer to a scheduled question. Throws MissingMetadata
/// when the log has no condition schedule or an answer lacks its question.
std::vector<CodedTurn> code_turns(const SessionLog& log, const ManualAnnotations* manual = nullptr);

// ---------------------------------------------------------------------------
// Uptake

enum class UptakeLabel { Full, Partial, None, NotApplicable };
std::string_view to_string(UptakeLabel l);

struct UptakeOptions {
  double threshold = 0.5;  ///< share of a contribution's novel terms that must reach the update
  std::set<std::string> stopwords = text::default_stopwords();
};

struct ContributionUptake {
  std::string text;
  std::vector<std::string> novel;    ///< stemmed terms absent from the draft
  std::vector<std::string> matched;  ///< novel terms present in the update
  bool taken = false;
};

struct UptakeResult {
  UptakeLabel label = UptakeLabel::NotApplicable;
  double coverage = 0;  ///< taken contributions / contributions with novel terms
  std::vector<std::string> matched;
  std::vector<std::string> unmatched;
  std::vector<ContributionUptake> contributions;
};

UptakeResult detect_uptake(std::string_view draft, std::string_view update, const std::vector<std::string>& contributions,
                           const UptakeOptions& opts = {});

struct StageUptake {
  NarrativeStage stage{};
  UptakeResult result;
};

/// Per drafted stage: the draft, its update (the draft itself when there is none)
/// and the contributing answers given in that phase.
std::vector<StageUptake> uptake_of(const SessionLog& log, const UptakeOptions& opts = {});

// ---------------------------------------------------------------------------
// Contribution distribution

/// Framing x function-label counts. Columns are label combinations so each
/// coded turn lands in exactly one cell.
struct CrossTab {
  std::vector<std::string> rows;     ///< framing labels in scaffold order
  std::vector<std::string> columns;  ///< combination labels, sorted
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  std::size_t row_total(const std::string& row) const;
  std::size_t total() const;
  double proportion(const std::string& row, const std::string& column) const;
};

/// Throws EmptyCorpus.
CrossTab contribution_distribution(const std::vector<CodedTurn>& coded);

/// CSV with header "framing,text,functions"; framing is a scaffold identifier.
std::vector<CodedTurn> parse_replica_corpus(std::string_view csv);
std::vector<CodedTurn> load_replica_corpus(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reports

struct AnalysisOptions {
  UptakeOptions uptake;
  const ManualAnnotations* manual = nullptr;
};

struct AnalysisReport {
  std::size_t logs = 0;
  std::size_t completed = 0;
  std::map<std::string, DescriptiveStats> stats;  ///< by condition, plus "All"
  std::vector<SessionMetrics> sessions;
  std::vector<CodedTurn> coded;
  std::optional<CrossTab> distribution;
  std::map<std::string, std::map<UptakeLabel, std::size_t>> uptake;  ///< by condition
};

AnalysisReport analyze_logs(const std::vector<SessionLog>& logs, const AnalysisOptions& opts = {});
std::string markdown_report(const AnalysisReport& r, const AnalysisOptions& opts = {});
std::string sessions_csv(const AnalysisReport& r);
std::string coded_csv(const AnalysisReport& r);
std::string distribution_csv(const CrossTab& t);

/// Reads every *.jsonl under a directory, sorted by name.
std::vector<SessionLog> load_logs(const std::filesystem::path& dir);

}  // namespace tinker
