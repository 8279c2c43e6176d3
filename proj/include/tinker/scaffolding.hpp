#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tinker/dialogue.hpp"

namespace tinker {

struct SessionLog;

enum class ScaffoldType {
  PrimitiveNarrative,
  ChainNarrative,
  TrueNarrative,
  SocialAwareness,
  RelationshipSkills,
  ResponsibleDecisionMaking,
  OpenInvitation,
  // Representable, never scheduled by the shipped conditions.
  SelfAwareness,
  SelfManagement,
};

inline constexpr std::array<ScaffoldType, 9> kScaffoldTypes{
    ScaffoldType::PrimitiveNarrative, ScaffoldType::ChainNarrative,  ScaffoldType::TrueNarrative,
    ScaffoldType::SocialAwareness,    ScaffoldType::RelationshipSkills, ScaffoldType::ResponsibleDecisionMaking,
    ScaffoldType::OpenInvitation,     ScaffoldType::SelfAwareness,   ScaffoldType::SelfManagement};

enum class Framework { NarrativeDevelopment, SocialEmotional, General };

std::string_view to_string(ScaffoldType t);
std::optional<ScaffoldType> scaffold_from_string(std::string_view name);
Framework framework_of(ScaffoldType t);

/// Coding-scheme label for the agent's question framing ("Primitive narratives", ...).
std::string_view question_frame_label(ScaffoldType t);

enum class Condition { Structured, Generic };
std::string_view to_string(Condition c);
std::optional<Condition> condition_from_string(std::string_view name);  // case-insensitive

struct ScaffoldQuestionSpec {
  ScaffoldType scaffold{};
  Phase phase{};
  std::string guidance;  ///< prompt-side instruction for the narrator
  std::string exemplar;  ///< canonical example question

  bool operator==(const ScaffoldQuestionSpec&) const = default;
};

std::string_view guidance_text(ScaffoldType t);
std::string_view exemplar_question(ScaffoldType t);

/// Per-phase ordered scaffold list, loaded from a condition file:
///
///     condition Structured
///     scripts structured            # optional; script variant, defaults to lower-case name
///     start: PrimitiveNarrative, SocialAwareness
///     post-story: TrueNarrative, TrueNarrative, RelationshipSkills, ResponsibleDecisionMaking
///
/// Phases without a line get no questions.
class ConditionSchedule {
 public:
  static ConditionSchedule parse(std::string_view source);
  static ConditionSchedule load(const std::filesystem::path& path);
  static const ConditionSchedule& standard(Condition c);

  const std::string& name() const { return name_; }
  const std::string& script_variant() const { return variant_; }
  const std::vector<ScaffoldType>& types_for(Phase phase) const;
  std::vector<ScaffoldQuestionSpec> schedule_for(Phase phase) const;
  std::string serialize() const;

  bool operator==(const ConditionSchedule&) const = default;

 private:
  std::string name_;
  std::string variant_;
  std::map<Phase, std::vector<ScaffoldType>> phases_;
};

std::vector<ScaffoldQuestionSpec> schedule_for(Condition c, Phase phase);

/// A scaffolded question as recorded in a session log.
struct AskedQuestion {
  Phase phase{};
  ScaffoldType scaffold{};
  std::string node;
};

struct ScheduleViolation {
  Phase phase{};
  std::string detail;
};

struct ComplianceReport {
  std::string condition;
  bool pass = false;
  std::map<ScaffoldType, int> counts;
  std::map<Phase, std::vector<ScaffoldType>> asked;
  std::optional<ScheduleViolation> first_violation;
};

ComplianceReport audit_questions(const ConditionSchedule& schedule, const std::vector<AskedQuestion>& asked);

/// Checks a completed log against the schedule it was run under (IncompleteLog otherwise).
ComplianceReport audit_session(const SessionLog& log);

}  // namespace tinker
