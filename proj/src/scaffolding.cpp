#include "tinker/scaffolding.hpp"

#include <sstream>

#include "tinker/error.hpp"
#include "tinker/log.hpp"
#include "tinker/text.hpp"

namespace tinker {

std::string_view to_string(ScaffoldType t) {
  switch (t) {
    case ScaffoldType::PrimitiveNarrative: return "PrimitiveNarrative";
    case ScaffoldType::ChainNarrative: return "ChainNarrative";
    case ScaffoldType::TrueNarrative: return "TrueNarrative";
    case ScaffoldType::SocialAwareness: return "SocialAwareness";
    case ScaffoldType::RelationshipSkills: return "RelationshipSkills";
    case ScaffoldType::ResponsibleDecisionMaking: return "ResponsibleDecisionMaking";
    case ScaffoldType::OpenInvitation: return "OpenInvitation";
    case ScaffoldType::SelfAwareness: return "SelfAwareness";
    case ScaffoldType::SelfManagement: return "SelfManagement";
  }
  return "?";
}

std::optional<ScaffoldType> scaffold_from_string(std::string_view name) {
  for (auto t : kScaffoldTypes)
    if (to_string(t) == name) return t;
  return std::nullopt;
}

Framework framework_of(ScaffoldType t) {
  switch (t) {
    case ScaffoldType::PrimitiveNarrative:
    case ScaffoldType::ChainNarrative:
    case ScaffoldType::TrueNarrative: return Framework::NarrativeDevelopment;
    case ScaffoldType::OpenInvitation: return Framework::General;
    default: return Framework::SocialEmotional;
  }
}

std::string_view question_frame_label(ScaffoldType t) {
  switch (t) {
    case ScaffoldType::PrimitiveNarrative: return "Primitive narratives";
    case ScaffoldType::ChainNarrative: return "Chain narratives";
    case ScaffoldType::TrueNarrative: return "True narratives";
    case ScaffoldType::SocialAwareness: return "Social awareness";
    case ScaffoldType::RelationshipSkills: return "Relationship skills";
    case ScaffoldType::ResponsibleDecisionMaking: return "Responsible decision-making";
    case ScaffoldType::OpenInvitation: return "Open invitation";
    case ScaffoldType::SelfAwareness: return "Self-awareness";
    case ScaffoldType::SelfManagement: return "Self-management";
  }
  return "?";
}

std::string_view to_string(Condition c) { return c == Condition::Structured ? "Structured" : "Generic"; }

std::optional<Condition> condition_from_string(std::string_view name) {
  auto l = text::lower(text::trim(name));
  if (l == "structured") return Condition::Structured;
  if (l == "generic") return Condition::Generic;
  return std::nullopt;
}

std::string_view guidance_text(ScaffoldType t) {
  switch (t) {
    case ScaffoldType::PrimitiveNarrative:
      return "Ask for one more thing that happens around the central characters, without asking why.";
    case ScaffoldType::ChainNarrative:
      return "Ask why something happens, so the child links events with a cause.";
    case ScaffoldType::TrueNarrative:
      return "Ask the child to retell or reshape the whole story with a beginning, middle and end.";
    case ScaffoldType::SocialAwareness:
      return "Ask directly how the characters feel, or how one feels different from the others.";
    case ScaffoldType::RelationshipSkills:
      return "Ask how the characters could help, comfort or get along with each other.";
    case ScaffoldType::ResponsibleDecisionMaking:
      return "Ask what a good choice would be for a character or for the child in that situation.";
    case ScaffoldType::OpenInvitation:
      return "Ask whether the child would like to add anything to the story.";
    case ScaffoldType::SelfAwareness:
      return "Ask how the child would feel in the characters' place.";
    case ScaffoldType::SelfManagement:
      return "Ask what the child could do to calm down or keep trying in that situation.";
  }
  return "";
}

std::string_view exemplar_question(ScaffoldType t) {
  switch (t) {
    case ScaffoldType::PrimitiveNarrative: return "What else do you think they might do here?";
    case ScaffoldType::ChainNarrative: return "Why do you think they decided to follow the Map?";
    case ScaffoldType::TrueNarrative: return "What if our story had a different ending? How would it end?";
    case ScaffoldType::SocialAwareness: return "How do they feel about each other right now?";
    case ScaffoldType::RelationshipSkills: return "What could they do to help their friend?";
    case ScaffoldType::ResponsibleDecisionMaking: return "What would you do to be a good friend?";
    case ScaffoldType::OpenInvitation: return "Would you like to add something to the story?";
    case ScaffoldType::SelfAwareness: return "How would you feel if you were there?";
    case ScaffoldType::SelfManagement: return "What could you do to feel calm again?";
  }
  return "";
}

ConditionSchedule ConditionSchedule::parse(std::string_view source) {
  ConditionSchedule s;
  std::size_t lineno = 0;
  std::istringstream in{std::string(source)};
  std::string raw;
  auto bad = [&](const std::string& what) {
    throw Error(ErrorCode::BadConditionFile, "line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    auto line = std::string(text::trim(std::string_view(raw).substr(0, hash)));
    if (line.empty()) continue;
    if (text::starts_with_ci(line, "condition ")) {
      s.name_ = std::string(text::trim(std::string_view(line).substr(10)));
      continue;
    }
    if (text::starts_with_ci(line, "scripts ")) {
      s.variant_ = std::string(text::trim(std::string_view(line).substr(8)));
      continue;
    }
    auto colon = line.find(':');
    if (colon == std::string::npos) bad("expected 'phase: Type, ...'");
    auto phase = phase_from_string(text::trim(std::string_view(line).substr(0, colon)));
    if (!phase || *phase == Phase::Practice) bad("unknown phase '" + line.substr(0, colon) + "'");
    if (s.phases_.count(*phase)) bad("phase listed twice");
    auto& list = s.phases_[*phase];
    for (const auto& part : text::split(std::string_view(line).substr(colon + 1), ',')) {
      auto name = text::trim(part);
      if (name.empty()) continue;
      auto t = scaffold_from_string(name);
      if (!t) bad("unknown scaffold type '" + std::string(name) + "'");
      list.push_back(*t);
    }
  }
  if (s.name_.empty()) throw Error(ErrorCode::BadConditionFile, "missing 'condition' line");
  if (s.variant_.empty()) s.variant_ = text::lower(s.name_);
  return s;
}

ConditionSchedule ConditionSchedule::load(const std::filesystem::path& path) {
  try {
    return parse(text::read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::StorageFailure) throw Error(ErrorCode::BadConditionFile, e.what());
    throw Error(e.code(), path.filename().string() + ": " + e.what());
  }
}

const ConditionSchedule& ConditionSchedule::standard(Condition c) {
  static const ConditionSchedule structured = parse(R"(condition Structured
start: PrimitiveNarrative, SocialAwareness
journey: ChainNarrative, SocialAwareness
climax: PrimitiveNarrative, SocialAwareness
end: ChainNarrative, SocialAwareness
post-story: TrueNarrative, TrueNarrative, RelationshipSkills, ResponsibleDecisionMaking
)");
  static const ConditionSchedule generic = parse(R"(condition Generic
start: OpenInvitation
journey: OpenInvitation
climax: OpenInvitation
end: OpenInvitation
post-story: TrueNarrative, TrueNarrative, RelationshipSkills, ResponsibleDecisionMaking
)");
  return c == Condition::Structured ? structured : generic;
}

const std::vector<ScaffoldType>& ConditionSchedule::types_for(Phase phase) const {
  static const std::vector<ScaffoldType> none;
  auto it = phases_.find(phase);
  return it == phases_.end() ? none : it->second;
}

std::vector<ScaffoldQuestionSpec> ConditionSchedule::schedule_for(Phase phase) const {
  std::vector<ScaffoldQuestionSpec> out;
  for (auto t : types_for(phase))
    out.push_back({t, phase, std::string(guidance_text(t)), std::string(exemplar_question(t))});
  return out;
}

std::string ConditionSchedule::serialize() const {
  std::string out = "condition " + name_ + "\nscripts " + variant_ + "\n";
  for (const auto& [phase, list] : phases_) {
    std::vector<std::string> names;
    for (auto t : list) names.emplace_back(to_string(t));
    out += std::string(to_string(phase)) + ": " + text::join(names, ", ") + "\n";
  }
  return out;
}

std::vector<ScaffoldQuestionSpec> schedule_for(Condition c, Phase phase) {
  return ConditionSchedule::standard(c).schedule_for(phase);
}

ComplianceReport audit_questions(const ConditionSchedule& schedule, const std::vector<AskedQuestion>& asked) {
  ComplianceReport r;
  r.condition = schedule.name();
  for (const auto& q : asked) {
    r.counts[q.scaffold]++;
    r.asked[q.phase].push_back(q.scaffold);
  }
  auto names = [](const std::vector<ScaffoldType>& v) {
    std::vector<std::string> s;
    for (auto t : v) s.emplace_back(to_string(t));
    return "[" + text::join(s, ", ") + "]";
  };
  for (auto phase : kSessionPhases) {
    const auto& want = schedule.types_for(phase);
    auto it = r.asked.find(phase);
    const auto got = it == r.asked.end() ? std::vector<ScaffoldType>{} : it->second;
    if (got != want) {
      r.first_violation = ScheduleViolation{phase, std::string(to_string(phase)) + ": expected " + names(want) +
                                                       ", asked " + names(got)};
      break;
    }
  }
  r.pass = !r.first_violation;
  return r;
}

ComplianceReport audit_session(const SessionLog& log) {
  if (!is_completed(log)) throw Error(ErrorCode::IncompleteLog, "session " + log.session_id() + " is not completed");
  return audit_questions(ConditionSchedule::parse(log.header.value("schedule", "")), questions_of(log));
}

}  // namespace tinker
